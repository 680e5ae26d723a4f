//! Pole discs of tan(z)/2 linked by coverings, with 60-link island cycles.
use escape_lab::catalog::{Family, MapDescriptor};
use escape_lab::constructor::build_pole_chain;
use escape_lab::covering::CoverOptions;

fn main() {
    let t = MapDescriptor::simple(Family::HalfTan);
    let c = build_pole_chain(&t, 15, &CoverOptions::default()).expect("pole chain");
    for l in &c.links {
        println!("D{} -> D{}: {:?}", l.from, l.to, l.certificate.verdict);
    }
    for i in &c.islands {
        println!(
            "V{} in D{} over D{} (cycle length {}), {}",
            i.j,
            i.source_disc,
            i.m_j,
            i.ell,
            i.region.describe()
        );
    }
    for cy in &c.cycles {
        println!(
            "cycle from D{}: {} links = {} x {}, verified {}",
            cy.start_disc,
            cy.links.len(),
            cy.repeats,
            cy.ell,
            c.verify_cycle(cy)
        );
    }
}
