//! A point of exp with 5(n+1) ≤ |fⁿ(ζ)| ≤ 64·5(n+1).
use escape_lab::catalog::MapDescriptor;
use escape_lab::constructor::construct_two_sided;
use escape_lab::covering::CoverOptions;
use escape_lab::itinerary::RefineOptions;
use escape_lab::sequence::SequenceSpec;

fn main() {
    let e = MapDescriptor::exp(1.0);
    let r = construct_two_sided(
        &e,
        &SequenceSpec::Linear(5.0),
        2.0,
        1.0,
        20,
        1.0,
        &CoverOptions::default(),
        &RefineOptions::default(),
    )
    .expect("two-sided construction");
    for row in &r.rows {
        let a = row.a_n.unwrap_or(f64::NAN);
        println!(
            "n = {:>2}: |f^n| / a_n = {:>8.4}  ok {} / {}",
            row.n,
            row.abs / a,
            row.ok,
            row.ok_doubled
        );
    }
    println!("precision {} bits, holds = {}", r.precision_bits, r.holds());
}
