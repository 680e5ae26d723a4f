//! A point of exp whose orbit stays below √n + 10 by pausing on loop annuli.
use escape_lab::catalog::MapDescriptor;
use escape_lab::constructor::{construct_slow_point, ScaledParameters};
use escape_lab::covering::CoverOptions;
use escape_lab::itinerary::RefineOptions;
use escape_lab::sequence::SequenceSpec;

fn main() {
    let e = MapDescriptor::exp(1.0);
    let a = SequenceSpec::SqrtPlus(10.0);
    let r = construct_slow_point(
        &e,
        &a,
        30,
        &ScaledParameters::default(),
        &CoverOptions::default(),
        &RefineOptions::default(),
    )
    .expect("slow point");
    if let Some(s) = &r.schedule {
        println!(
            "pauses at {:?} of lengths {:?} (open ended: {})",
            s.loop_indices, s.pause_lengths, s.open_ended
        );
    }
    for n in &r.notes {
        println!("note: {n}");
    }
    print!("{}", r.to_csv());
    println!(
        "zeta = {}, N0 = {:?}, holds = {}",
        r.zeta.to_c64(),
        r.n0,
        r.holds()
    );
}
