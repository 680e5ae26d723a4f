//! Nested refinement of a point whose orbit visits an annulus chain.
use escape_lab::catalog::MapDescriptor;
use escape_lab::constructor::{build_chain, ScaledParameters};
use escape_lab::covering::CoverOptions;
use escape_lab::itinerary::{refine_point, RefineOptions, TargetSequence};
use escape_lab::region::Region;

fn main() {
    let e = MapDescriptor::exp(1.0);
    let cover = CoverOptions::default();
    let chain = build_chain(&e, &ScaledParameters::default(), 2, &cover).expect("chain");
    for s in &chain.steps {
        println!(
            "A_{} = A(e^{:.4}, e^{:.4}) [{:?}]",
            s.index, s.annulus.ln_r_in, s.annulus.ln_r_out, s.case_tag
        );
    }
    let targets: Vec<Region> = chain.annuli().into_iter().map(Region::Annulus).collect();
    let seq = TargetSequence::certify(&e, targets, &cover).expect("consecutive coverings certify");
    let (zeta, trace) = refine_point(&e, &seq, &RefineOptions::default()).expect("refinement");
    for l in &trace.levels {
        println!(
            "level {}: {} survivors, {} cells, {} bits",
            l.n, l.survivors, l.evaluated, l.precision_bits
        );
    }
    println!("zeta = {}", zeta.to_c64());
    for row in &trace.verification.rows {
        println!(
            "n = {}: ln|f^n| = {:.6}, slack {:.3e}",
            row.n, row.ln_abs, row.slack
        );
    }
    println!(
        "inside at {} bits: {}, at {} bits: {}",
        trace.verification.precision_bits,
        trace.verification.all_inside,
        trace.reverification.precision_bits,
        trace.reverification.all_inside
    );
}
