//! Discs around poles, each covering the next, with island returns that close
//! up into cycles of length 60.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ISLAND_NOT_FOUND, POLE_ENUMERATION_EXHAUSTED};
use crate::catalog::{MapDescriptor, PoleSet};
use crate::covering::{certify_covering, newton_solve, CoverOptions, CoveringCertificate};
use crate::error::{Error, Result};
use crate::ext::ExtComplex;
use crate::region::Region;

pub const DISC_RADIUS: f64 = 0.25;
const SPIRAL_SEEDS: usize = 32;

/// f(D_from) ⊇ D_to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleLink {
    pub from: usize,
    pub to: usize,
    pub certificate: CoveringCertificate,
}

/// V_j with f(D_{5j+4}) ⊇ V_j and f(V_j) ⊇ D_{m(j)}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Island {
    pub j: usize,
    /// Cycle length ℓ_j = 2 + (j mod 5).
    pub ell: usize,
    /// m(j) = 5j + 6 − ℓ_j.
    pub m_j: usize,
    pub source_disc: usize,
    pub region: Region,
    pub into: CoveringCertificate,
    pub out: CoveringCertificate,
    /// Index of the spiral seed whose Newton solve produced the island.
    pub seed: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum LinkRef {
    /// D_m → D_{m+1}.
    Disc(usize),
    /// D_{5j+4} → V_j.
    IslandIn(usize),
    /// V_j → D_{m(j)}.
    IslandOut(usize),
}

/// A closed walk of certified links starting and ending at D_{5j+4}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleCertificate {
    pub j: usize,
    pub start_disc: usize,
    pub ell: usize,
    pub repeats: usize,
    pub links: Vec<LinkRef>,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleChain {
    pub map: String,
    pub discs: Vec<Region>,
    pub links: Vec<PoleLink>,
    pub islands: Vec<Island>,
    pub cycles: Vec<CycleCertificate>,
}

impl PoleChain {
    pub fn all_links_certified(&self) -> bool {
        self.links.iter().all(|l| l.certificate.is_certified())
    }

    fn link_ok(&self, l: LinkRef) -> bool {
        match l {
            LinkRef::Disc(m) => self
                .links
                .get(m)
                .is_some_and(|k| k.certificate.is_certified()),
            LinkRef::IslandIn(j) => self
                .islands
                .iter()
                .any(|i| i.j == j && i.into.is_certified()),
            LinkRef::IslandOut(j) => self
                .islands
                .iter()
                .any(|i| i.j == j && i.out.is_certified()),
        }
    }

    /// Disc index reached after following `l` from `from`, if the link starts there.
    fn follow(&self, from: Node, l: LinkRef) -> Option<Node> {
        match (from, l) {
            (Node::Disc(m), LinkRef::Disc(k)) if m == k => Some(Node::Disc(m + 1)),
            (Node::Disc(m), LinkRef::IslandIn(j)) if m == 5 * j + 4 => Some(Node::Island(j)),
            (Node::Island(i), LinkRef::IslandOut(j)) if i == j => self
                .islands
                .iter()
                .find(|x| x.j == j)
                .map(|x| Node::Disc(x.m_j)),
            _ => None,
        }
    }

    /// Walks the cycle's links and checks it closes at its start with every link certified.
    pub fn verify_cycle(&self, c: &CycleCertificate) -> bool {
        let mut at = Node::Disc(c.start_disc);
        for &l in &c.links {
            if !self.link_ok(l) {
                return false;
            }
            match self.follow(at, l) {
                Some(n) => at = n,
                None => return false,
            }
        }
        at == Node::Disc(c.start_disc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Node {
    Disc(usize),
    Island(usize),
}

/// Poles D₀, D₁, … in order of distance along the lattice (periodic sets) or by
/// modulus (finite sets), skipping any pole whose disc cannot be covered by
/// the image of a pole disc (|p| ≤ 1 / DISC_RADIUS + 2 DISC_RADIUS).
fn enumerate_poles(poles: &PoleSet, n: usize) -> Vec<Complex64> {
    let floor = 1.0 / DISC_RADIUS + 2.0 * DISC_RADIUS;
    match poles {
        PoleSet::None => vec![],
        PoleSet::Finite { poles } => {
            let mut v: Vec<Complex64> = poles
                .iter()
                .map(|p| p.at)
                .filter(|p| p.norm() > floor)
                .collect();
            v.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
            v.truncate(n);
            v
        }
        PoleSet::Periodic { base, period, .. } => (0..)
            .map(|k| base + period * k as f64)
            .filter(|p| p.norm() > floor)
            .take(n)
            .collect(),
    }
}

/// Builds `n_discs` pole discs with certified links and, for each j with
/// 5j + 4 < n_discs, an island V_j and the 60-link cycle through it.
pub fn build_pole_chain(
    map: &MapDescriptor,
    n_discs: usize,
    opts: &CoverOptions,
) -> Result<PoleChain> {
    if map.poles.is_empty() {
        return Err(Error::refused(
            POLE_ENUMERATION_EXHAUSTED,
            format!("{} has no poles", map.label),
        ));
    }
    let centers = enumerate_poles(&map.poles, n_discs);
    if centers.len() < n_discs || n_discs < 2 {
        return Err(Error::refused(
            POLE_ENUMERATION_EXHAUSTED,
            format!(
                "asked for {n_discs} pole discs, found {} usable poles",
                centers.len()
            ),
        ));
    }
    let discs: Vec<Region> = centers
        .iter()
        .map(|c| Region::disc(*c, DISC_RADIUS))
        .collect();
    let links: Vec<PoleLink> = (0..n_discs - 1)
        .into_par_iter()
        .map(|m| PoleLink {
            from: m,
            to: m + 1,
            certificate: certify_covering(map, &discs[m], &discs[m + 1], opts),
        })
        .collect();
    let n_islands = if n_discs >= 5 {
        (n_discs - 5) / 5 + 1
    } else {
        0
    };
    let islands: Vec<Island> = (0..n_islands)
        .into_par_iter()
        .map(|j| find_island(map, &discs, j, opts))
        .collect::<Result<_>>()?;
    let mut chain = PoleChain {
        map: map.label.clone(),
        discs,
        links,
        islands,
        cycles: vec![],
    };
    chain.cycles = chain
        .islands
        .iter()
        .map(|isl| {
            let mut one = vec![LinkRef::IslandIn(isl.j), LinkRef::IslandOut(isl.j)];
            one.extend((isl.m_j..isl.source_disc).map(LinkRef::Disc));
            let repeats = 60 / isl.ell;
            CycleCertificate {
                j: isl.j,
                start_disc: isl.source_disc,
                ell: isl.ell,
                repeats,
                links: one.iter().copied().cycle().take(60).collect(),
                certified: false,
            }
        })
        .collect();
    for i in 0..chain.cycles.len() {
        let ok = chain.verify_cycle(&chain.cycles[i]);
        chain.cycles[i].certified = ok;
    }
    Ok(chain)
}

fn find_island(
    map: &MapDescriptor,
    discs: &[Region],
    j: usize,
    opts: &CoverOptions,
) -> Result<Island> {
    let ell = 2 + j % 5;
    let src = 5 * j + 4;
    let m_j = 5 * j + 6 - ell;
    let (Region::Disc(sd), Region::Disc(td)) = (&discs[src], &discs[m_j]) else {
        unreachable!("pole discs")
    };
    let w = ExtComplex::from_c64(td.center);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut tried: Vec<Complex64> = vec![];
    for k in 0..SPIRAL_SEEDS {
        let rho = sd.radius * (k as f64 + 0.5) / SPIRAL_SEEDS as f64;
        let seed = sd.center + Complex64::from_polar(rho, golden * k as f64);
        let Some(v) = newton_solve(map, &w, &ExtComplex::from_c64(seed)) else {
            continue;
        };
        let v = v.to_c64();
        if (v - sd.center).norm() >= sd.radius || tried.iter().any(|t| (t - v).norm() < 1e-9) {
            continue;
        }
        tried.push(v);
        let Some(dv) = map.derivative_ext(&ExtComplex::from_c64(v)) else {
            continue;
        };
        let scale = td.radius / dv.to_c64().norm();
        for factor in [3.0, 2.0, 4.0, 6.0] {
            let rad = factor * scale;
            if rad >= (v - sd.center).norm() || (v - sd.center).norm() + rad >= sd.radius {
                continue;
            }
            let island = Region::disc(v, rad);
            let out = certify_covering(map, &island, &discs[m_j], opts);
            if !out.is_certified() {
                continue;
            }
            let into = certify_covering(map, &discs[src], &island, opts);
            if into.is_certified() {
                return Ok(Island {
                    j,
                    ell,
                    m_j,
                    source_disc: src,
                    region: island,
                    into,
                    out,
                    seed: k,
                });
            }
        }
    }
    Err(Error::refused(
        ISLAND_NOT_FOUND,
        format!("no verified island in D_{src} over D_{m_j} from {SPIRAL_SEEDS} spiral seeds ({} distinct solutions)", tried.len()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Family;

    #[test]
    fn entire_maps_have_no_pole_chain() {
        let e = MapDescriptor::exp(1.0);
        let err = build_pole_chain(&e, 10, &CoverOptions::default()).unwrap_err();
        assert_eq!(err.reason(), Some(POLE_ENUMERATION_EXHAUSTED));
    }

    #[test]
    fn finite_pole_sets_run_out() {
        let s = MapDescriptor::simple(Family::SinPole);
        let err = build_pole_chain(&s, 3, &CoverOptions::default()).unwrap_err();
        assert_eq!(err.reason(), Some(POLE_ENUMERATION_EXHAUSTED));
    }

    #[test]
    fn half_tan_chain_with_cycles() {
        let t = MapDescriptor::simple(Family::HalfTan);
        let c = build_pole_chain(&t, 10, &CoverOptions::default()).unwrap();
        assert_eq!(c.discs.len(), 10);
        assert!(c.all_links_certified());
        for (i, d) in c.discs.iter().enumerate() {
            let Region::Disc(d) = d else { panic!() };
            let k = ((d.center.re - std::f64::consts::FRAC_PI_2) / std::f64::consts::PI).round();
            assert!(
                (d.center.re - (std::f64::consts::FRAC_PI_2 + k * std::f64::consts::PI)).abs()
                    < 1e-12,
                "disc {i}"
            );
        }
        assert_eq!(c.cycles.len(), 2);
        for cy in &c.cycles {
            assert_eq!(cy.links.len(), 60);
            assert_eq!(cy.repeats * cy.ell, 60);
            assert!(cy.certified);
        }
        // a broken walk is rejected
        let mut bad = c.cycles[1].clone();
        bad.links.swap(0, 1);
        assert!(!c.verify_cycle(&bad));
    }
}
