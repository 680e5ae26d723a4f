//! Every catalog family: formula, poles and a short orbit.
use escape_lab::catalog::{ExtEval, Family, MapDescriptor, DEFAULT_OVERFLOW_CAP};
use num_complex::Complex64;

fn main() {
    for f in Family::ALL {
        let m = MapDescriptor::simple(f);
        println!("{:<17} {:<40} scale {:.4}", f.name(), m.label, f.scale());
        if !m.is_entire() {
            let near = m.poles.in_window(Complex64::new(0.0, 0.0), 5.0);
            println!(
                "    poles in |z| < 5: {:?}",
                near.iter().map(|p| p.at).collect::<Vec<_>>()
            );
        }
        let orbit = m.orbit_ext(Complex64::new(2.5, 0.5), 6, DEFAULT_OVERFLOW_CAP);
        let track: Vec<String> = orbit
            .iter()
            .map(|e| match e {
                ExtEval::Finite(w) => format!("{:.3}", w.ln_abs()),
                ExtEval::PoleHit(_) => "pole".into(),
                ExtEval::Overflow(l) => format!("overflow({l:.3e})"),
            })
            .collect();
        println!("    ln|f^n(2.5+0.5i)|: {}", track.join(", "));
    }
}
