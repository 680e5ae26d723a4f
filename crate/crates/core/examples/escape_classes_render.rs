//! Escape-rate class map of z + sin z + π, written as PPM.
//!
//! Usage: cargo run --release --example escape_classes_render [out.ppm]
use escape_lab::catalog::{Family, MapDescriptor};
use escape_lab::classify::ClassifierParams;
use escape_lab::render::{render_escape_classes, GridSpec};
use std::f64::consts::PI;

fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "sine_shift.ppm".into());
    let map = MapDescriptor::simple(Family::SineShift);
    let grid = GridSpec::new((-PI, 5.0 * PI), (-4.0, 4.0), 400, 200).expect("grid");
    let img = render_escape_classes(&map, &grid, &ClassifierParams::default()).expect("render");
    for (class, count) in img.histogram() {
        println!("{:<18} {count}", class.label());
    }
    std::fs::write(&out, img.to_ppm(&[format!("map {}", map.label)])).expect("write ppm");
    println!("wrote {out}");
}
