//! An exp orbit that keeps coming back to |z| ≤ 10 after climbing past 10³.
use escape_lab::catalog::MapDescriptor;
use escape_lab::constructor::{construct_oscillating, OscillationOptions};
use escape_lab::covering::CoverOptions;
use escape_lab::itinerary::RefineOptions;
use escape_lab::sequence::SequenceSpec;

fn main() {
    let e = MapDescriptor::exp(1.0);
    let r = construct_oscillating(
        &e,
        10.0,
        &SequenceSpec::Linear(1000.0),
        24,
        &OscillationOptions::default(),
        &CoverOptions::default(),
        &RefineOptions::default(),
    )
    .expect("oscillating construction");
    let track: Vec<String> = r.rows.iter().map(|row| format!("{:.1}", row.abs)).collect();
    println!("|f^n(zeta)|: {}", track.join(" "));
    if let Some(o) = &r.oscillations {
        println!(
            "{} completed oscillations, running max {:.1}, levels {:?}",
            o.completed, o.running_max, o.levels
        );
    }
}
