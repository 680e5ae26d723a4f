//! Max and min modulus on circles, as a CSV table.
use escape_lab::catalog::{Family, MapDescriptor};
use escape_lab::radial::{scan_profile, RadialProfile, Spacing};

fn main() {
    let map = MapDescriptor::simple(Family::QuarterCos);
    println!("# {}", map.label);
    println!("{}", RadialProfile::CSV_HEADER);
    for p in scan_profile(&map, 1.0, 1e4, 9, Spacing::Log, 1e-9).expect("valid range") {
        println!("{}", p.csv_row());
    }
}
