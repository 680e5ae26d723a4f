//! Certified and refused annulus coverings, and a traced preimage annulus.
use escape_lab::catalog::MapDescriptor;
use escape_lab::covering::{certify_covering, harnack_bound_check, preimage_annulus, CoverOptions};
use escape_lab::region::{Annulus, Region};

fn main() {
    let opts = CoverOptions::default();
    let z3 = MapDescriptor::monomial(3);
    for (src, tgt) in [((1.0, 2.0), (1.5, 7.0)), ((1.0, 2.0), (1.5, 9.0))] {
        let c = certify_covering(
            &z3,
            &Region::annulus(src.0, src.1),
            &Region::annulus(tgt.0, tgt.1),
            &opts,
        );
        println!(
            "z^3: A{src:?} -> A{tgt:?}: {:?} {:?} margin {:.4}",
            c.verdict, c.reason, c.margin
        );
    }

    let e = MapDescriptor::exp(1.0);
    // |ln w| reaches sqrt(ln²|w| + π²), so A(2, 4) is too thin to reach all of A(10, 40)
    for (src, tgt) in [((2.0, 5.0), (10.0, 20.0)), ((2.0, 4.0), (10.0, 40.0))] {
        let c = certify_covering(
            &e,
            &Region::annulus(src.0, src.1),
            &Region::annulus(tgt.0, tgt.1),
            &opts,
        );
        println!(
            "exp: A{src:?} -> A{tgt:?}: {:?} {:?} via {:?}, {} samples",
            c.verdict, c.reason, c.method, c.samples
        );
    }

    let sq = MapDescriptor::monomial(2);
    let b = preimage_annulus(
        &sq,
        &Annulus::centered(4.0, 16.0),
        &Annulus::centered(1.0, 8.0),
        128,
    )
    .expect("traceable");
    let radius = |v: &[num_complex::Complex64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    println!(
        "z^2 preimage of A(4, 16): inner radius {:.12}, outer radius {:.12}",
        radius(&b.inner.vertices),
        radius(&b.outer.vertices)
    );

    let p = MapDescriptor::monomial(6);
    match harnack_bound_check(&p, 1e20, 4.0, 64) {
        Ok(r) => println!(
            "z^6 Harnack bound at r = 1e20: {} rows, {} violations",
            r.rows.len(),
            r.violations.len()
        ),
        Err(e) => println!("z^6 Harnack bound at r = 1e20: {e}"),
    }
    match harnack_bound_check(&e, 1e20, 4.0, 64) {
        Ok(_) => println!("exp: unexpectedly verified"),
        Err(e) => println!("exp Harnack bound: {e}"),
    }
}
