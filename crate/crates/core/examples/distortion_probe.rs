//! Strong vs weak distortion: a Baker domain against z².
use escape_lab::catalog::{Family, MapDescriptor};
use escape_lab::distortion::distortion_probe;
use num_complex::Complex64;

fn main() {
    let bb = MapDescriptor::simple(Family::BergweilerBaker);
    let r = distortion_probe(&bb, Complex64::new(-10.0, 0.0), 0.5, 40, 64, 1).expect("probe");
    print!("{}", r.to_csv());
    println!(
        "{}: sup ratio {:.6}, sup log exponent {:.6}",
        bb.label, r.sup_ratio, r.sup_log_exponent
    );

    let sq = MapDescriptor::monomial(2);
    let r = distortion_probe(&sq, Complex64::new(4.0, 0.0), 0.1, 10, 64, 1).expect("probe");
    println!(
        "z^2 on B(4, 0.1): sup ratio {:.3e}, sup log exponent {:.6} (bound ln 4.1 / ln 3.9 = {:.6})",
        r.sup_ratio,
        r.sup_log_exponent,
        4.1f64.ln() / 3.9f64.ln()
    );
}
