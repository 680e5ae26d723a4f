//! Radii where m(r) > M(r)^c, which rule out Bohr-type steps.
use escape_lab::catalog::{Family, MapDescriptor};
use escape_lab::constructor::feasibility_check;

fn main() {
    for m in [
        MapDescriptor::simple(Family::QuarterCos),
        MapDescriptor::exp(1.0),
    ] {
        let r = feasibility_check(&m, 1e2, 1e6, 0.25, 120).expect("valid range");
        println!("{}: {} flagged interval(s)", m.label, r.intervals.len());
        for i in &r.intervals {
            println!(
                "    [{:.2}, {:.2}] over {} radii",
                i.r_start, i.r_end, i.samples
            );
        }
    }
}
