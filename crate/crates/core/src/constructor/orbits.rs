//! Slow, two-sided and oscillating orbits assembled from certified targets.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::chain::{build_chain_with, certify_loop, grow_chain};
use super::{
    first_good_index, monotone_minorant, orbit_ln_abs, schedule_pauses, AnnulusChain, BandRow,
    ConstructionKind, ConstructionReport, LoopKind, ScaledParameters, GROWTH_VIOLATED,
    HYPOTHESIS_FAILED, NEITHER_CERTIFIED, NO_LOOP_AVAILABLE,
};
use crate::catalog::MapDescriptor;
use crate::covering::{self, CoverOptions, CoveringCertificate, Prefer};
use crate::error::{Error, Result};
use crate::itinerary::{refine_point, RefineOptions, TargetSequence};
use crate::radial;
use crate::region::{Annulus, Region};
use crate::sequence::SequenceSpec;

fn certify_pair(
    map: &MapDescriptor,
    src: &Region,
    tgt: &Region,
    opts: &CoverOptions,
) -> CoveringCertificate {
    covering::monomial_certificate(map, src, tgt)
        .unwrap_or_else(|| covering::certify_covering(map, src, tgt, opts))
}

/// Per-row bounds in the log domain.
#[derive(Clone, Copy, Debug, Default)]
struct RowBound {
    a: Option<f64>,
    ln_lower: Option<f64>,
    ln_upper: Option<f64>,
}

impl RowBound {
    fn holds(&self, ln_abs: f64) -> bool {
        ln_abs.is_finite()
            && self.ln_lower.is_none_or(|l| ln_abs >= l)
            && self.ln_upper.is_none_or(|u| ln_abs <= u)
    }
}

fn finish(
    map: &MapDescriptor,
    kind: ConstructionKind,
    seq: TargetSequence,
    bounds: &[RowBound],
    refine: &RefineOptions,
) -> Result<ConstructionReport> {
    let (zeta, trace) = refine_point(map, &seq, refine)?;
    let horizon = seq.horizon();
    let bits = trace.precision_bits;
    let once = orbit_ln_abs(map, &zeta, horizon, bits);
    let twice = orbit_ln_abs(map, &zeta, horizon, 2 * bits);
    let rows: Vec<BandRow> = (0..=horizon)
        .map(|n| {
            let b = bounds[n];
            BandRow {
                n,
                a_n: b.a,
                abs: once[n].exp(),
                ln_abs: once[n],
                lower: b.ln_lower.map(f64::exp),
                upper: b.ln_upper.map(f64::exp),
                ok: b.holds(once[n]),
                ok_doubled: b.holds(twice[n]),
            }
        })
        .collect();
    let ok: Vec<bool> = rows.iter().map(|r| r.ok && r.ok_doubled).collect();
    Ok(ConstructionReport {
        kind,
        map: map.label.clone(),
        zeta,
        horizon,
        n0: first_good_index(&ok),
        rows,
        targets: seq.targets,
        chain: None,
        schedule: None,
        oscillations: None,
        precision_bits: bits,
        trace,
        notes: vec![],
    })
}

/// Refines a point along explicit targets and checks `lower[n] ≤ |fⁿ(ζ)| ≤ upper[n]`.
pub fn construct_along(
    map: &MapDescriptor,
    targets: Vec<Region>,
    lower: &[Option<f64>],
    upper: &[Option<f64>],
    cover: &CoverOptions,
    refine: &RefineOptions,
) -> Result<ConstructionReport> {
    if lower.len() != targets.len() || upper.len() != targets.len() {
        return Err(Error::invalid("one bound pair per target"));
    }
    let seq = TargetSequence::certify(map, targets, cover)?;
    let bounds: Vec<RowBound> = lower
        .iter()
        .zip(upper)
        .map(|(l, u)| RowBound {
            a: *u,
            ln_lower: l.map(f64::ln),
            ln_upper: u.map(f64::ln),
        })
        .collect();
    finish(map, ConstructionKind::Custom, seq, &bounds, refine)
}

fn with_precision(refine: &RefineOptions, params: &ScaledParameters) -> RefineOptions {
    RefineOptions {
        precision: params.precision,
        ..refine.clone()
    }
}

/// A point with |fⁿ(ζ)| ≤ aₙ from some N₀ on, by pausing on loop annuli of a chain.
pub fn construct_slow_point(
    map: &MapDescriptor,
    a: &SequenceSpec,
    horizon: usize,
    params: &ScaledParameters,
    cover: &CoverOptions,
    refine: &RefineOptions,
) -> Result<ConstructionReport> {
    if !a.tends_to_infinity() {
        return Err(Error::invalid(format!(
            "sequence {a} must tend to infinity"
        )));
    }
    let a_pref = a.prefix(horizon + 1)?;
    let a_min = monotone_minorant(&a_pref)?;
    let mut notes = vec![];
    let mut params = params.clone();
    // The seed annulus has to fit under the bound early on, or there is nothing to pause on.
    if params.r0.powf(params.k0) > a_min[0] {
        let r0 = (0.75 * a_min[0]).powf(1.0 / params.k0);
        if r0 < 1.0 {
            return Err(Error::invalid(format!(
                "a′_0 = {} too small for a seed annulus with k0 = {}",
                a_min[0], params.k0
            )));
        }
        notes.push(format!(
            "r0 lowered from {} to {r0:.6} so that A_0 fits inside B(0, a′_0)",
            params.r0
        ));
        params.r0 = r0;
    }
    params.validate()?;
    let ln_cap = a_min[horizon].ln();
    let mut chain = build_chain_with(map, &params, 0, Prefer::Near, cover)?;
    while chain
        .steps
        .last()
        .is_some_and(|s| s.annulus.ln_r_out <= ln_cap)
        && chain.steps.len() < 32
    {
        grow_chain(&mut chain, map, Prefer::Near, cover)?;
    }
    let kind = attach_loops(map, &mut chain, ln_cap, cover)?;
    let schedule = schedule_pauses(&chain, &a_min, kind)?;
    let layout = loop {
        if let Some(l) = schedule.layout(horizon, chain.steps.len()) {
            break l;
        }
        grow_chain(&mut chain, map, Prefer::Near, cover)?;
    };
    let targets: Vec<Region> = layout
        .iter()
        .map(|&m| Region::Annulus(chain.steps[m].annulus))
        .collect();
    let certs: Vec<CoveringCertificate> = layout
        .windows(2)
        .map(|w| {
            if w[0] == w[1] {
                chain.steps[w[0]].loops[0].links[0].clone()
            } else {
                chain.steps[w[1]]
                    .certificate
                    .clone()
                    .expect("non-seed steps carry certificates")
            }
        })
        .collect();
    let seq = TargetSequence::new(targets, certs)?;
    let bounds: Vec<RowBound> = a_pref
        .iter()
        .map(|&x| RowBound {
            a: Some(x),
            ln_lower: None,
            ln_upper: Some(x.ln()),
        })
        .collect();
    let mut report = finish(
        map,
        ConstructionKind::SlowPoint,
        seq,
        &bounds,
        &with_precision(refine, &params),
    )?;
    notes.push(format!(
        "pause loops: {kind:?}; layout {:?}",
        compress(&layout)
    ));
    report.chain = Some(chain);
    report.schedule = Some(schedule);
    report.notes = notes;
    Ok(report)
}

/// Run-length form of a layout, e.g. [(0, 31)].
fn compress(layout: &[usize]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = vec![];
    for &m in layout {
        match out.last_mut() {
            Some((k, c)) if *k == m => *c += 1,
            _ => out.push((m, 1)),
        }
    }
    out
}

/// Certifies loops on every chain annulus that fits under `ln_cap`, preferring
/// self-covers; returns the kind used.
fn attach_loops(
    map: &MapDescriptor,
    chain: &mut AnnulusChain,
    ln_cap: f64,
    cover: &CoverOptions,
) -> Result<LoopKind> {
    let mut any = false;
    for step in chain
        .steps
        .iter_mut()
        .filter(|s| s.annulus.ln_r_out <= ln_cap)
    {
        let l = certify_loop(
            map,
            &Region::Annulus(step.annulus),
            LoopKind::SelfLoop,
            None,
            cover,
        )?;
        any |= l.is_certified();
        step.loops.push(l);
    }
    if !any {
        return Err(Error::refused(
            NO_LOOP_AVAILABLE,
            format!("no chain annulus below e^{ln_cap:.4} covers itself"),
        ));
    }
    Ok(LoopKind::SelfLoop)
}

struct Search<'a> {
    map: &'a MapDescriptor,
    cover: &'a CoverOptions,
    pairs: &'a [[Region; 2]],
    dead: HashSet<(usize, usize)>,
}

impl Search<'_> {
    /// Certified continuation from choice `c` at step n, in reverse order.
    fn run(&mut self, n: usize, c: usize) -> Option<Vec<(usize, CoveringCertificate)>> {
        if n + 1 == self.pairs.len() {
            return Some(vec![]);
        }
        if self.dead.contains(&(n, c)) {
            return None;
        }
        for t in 0..2 {
            let cert = certify_pair(
                self.map,
                &self.pairs[n][c],
                &self.pairs[n + 1][t],
                self.cover,
            );
            if cert.is_certified() {
                if let Some(mut rest) = self.run(n + 1, t) {
                    rest.push((t, cert));
                    return Some(rest);
                }
            }
        }
        self.dead.insert((n, c));
        None
    }
}

/// A point with aₙ ≤ |fⁿ(ζ)| ≤ d⁶aₙ for n ≤ N.
#[allow(clippy::too_many_arguments)]
pub fn construct_two_sided(
    map: &MapDescriptor,
    a: &SequenceSpec,
    d: f64,
    c: f64,
    horizon: usize,
    growth_k: f64,
    cover: &CoverOptions,
    refine: &RefineOptions,
) -> Result<ConstructionReport> {
    if !(d > 1.0 && c > 0.0 && growth_k > 0.0) {
        return Err(Error::invalid("need d > 1, c > 0 and K > 0"));
    }
    let a_pref = a.prefix(horizon + 1)?;
    let ln_d = d.ln();
    for n in 0..horizon {
        let ln_m = radial::max_modulus(map, a_pref[n], 1e-9)?.ln_value;
        if a_pref[n + 1].ln() > growth_k.ln() + ln_m {
            return Err(Error::refused(
                GROWTH_VIOLATED,
                format!(
                    "a_{} = {:.6e} exceeds K M(a_{n}) = e^{:.4}",
                    n + 1,
                    a_pref[n + 1],
                    growth_k.ln() + ln_m
                ),
            ));
        }
    }
    let mut pairs = Vec::with_capacity(horizon + 1);
    for (n, &an) in a_pref.iter().enumerate() {
        let la = an.ln();
        let pick = |k_lo: f64| -> Result<Region> {
            let s = radial::find_small_min_modulus_ln(
                map,
                la + k_lo * ln_d,
                la + (k_lo + 1.0) * ln_d,
                c.ln(),
                64,
            )?;
            let ln_rho = s.ln_rho.ok_or_else(|| {
                Error::refused(
                    HYPOTHESIS_FAILED,
                    format!(
                        "no radius in (d^{k_lo} a_{n}, d^{} a_{n}) with m <= {c}; smallest sampled m = {:.4e}",
                        k_lo + 1.0,
                        s.sampled_min
                    ),
                )
            })?;
            Ok(Region::Annulus(Annulus::centered_ln(
                ln_rho - 0.5 * ln_d,
                ln_rho + 0.5 * ln_d,
            )))
        };
        pairs.push([pick(1.0)?, pick(4.0)?]);
    }
    // Depth-first over the two choices, preferring the inner annulus.
    let mut search = Search {
        map,
        cover,
        pairs: &pairs,
        dead: HashSet::new(),
    };
    let (choice, certs) = (0..2)
        .find_map(|c0| {
            search.run(0, c0).map(|mut path| {
                path.reverse();
                let mut choice = vec![c0];
                let mut certs = vec![];
                for (t, cert) in path {
                    choice.push(t);
                    certs.push(cert);
                }
                (choice, certs)
            })
        })
        .ok_or_else(|| {
            Error::refused(
                NEITHER_CERTIFIED,
                "no sequence of A'/A'' choices has every covering certified",
            )
        })?;
    let targets: Vec<Region> = (0..=horizon).map(|n| pairs[n][choice[n]].clone()).collect();
    let seq = TargetSequence::new(targets, certs)?;
    let ln_c = 6.0 * ln_d;
    let bounds: Vec<RowBound> = a_pref
        .iter()
        .map(|&x| RowBound {
            a: Some(x),
            ln_lower: Some(x.ln()),
            ln_upper: Some(x.ln() + ln_c),
        })
        .collect();
    let mut report = finish(map, ConstructionKind::TwoSided, seq, &bounds, refine)?;
    report.notes.push(format!(
        "choices (0 = A', 1 = A''): {:?}; band constant d^6 = {}",
        choice,
        d.powi(6)
    ));
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OscillationOptions {
    /// Running max must pass this for an excursion to count.
    pub high_bound: f64,
    /// The low annulus is A(ρ, ρ^{k0}) with ρ^{k0} slightly below low_bound.
    pub k0: f64,
}

impl Default for OscillationOptions {
    fn default() -> Self {
        OscillationOptions {
            high_bound: 1e3,
            k0: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationSummary {
    pub low_bound: f64,
    pub high_bound: f64,
    /// Returns to |z| ≤ low_bound after having passed high_bound.
    pub completed: usize,
    pub running_max: f64,
    /// Every window of this length contains a point with |fⁿ| ≤ low_bound.
    pub window: usize,
    pub window_min_ok: bool,
    /// Inner radii of the high annuli in the order first visited.
    pub levels: Vec<f64>,
    pub levels_exceeded: bool,
}

fn inner(r: &Region) -> f64 {
    match r {
        Region::Annulus(a) => a.ln_r_in,
        _ => f64::INFINITY,
    }
}

/// (completed oscillations, running max) of a log-modulus track.
pub fn count_oscillations(ln_abs: &[f64], low: f64, high: f64) -> (usize, f64) {
    let (ll, lh) = (low.ln(), high.ln());
    let mut completed = 0;
    let mut was_high = false;
    let mut max = f64::NEG_INFINITY;
    for &x in ln_abs {
        max = max.max(x);
        if x > lh {
            was_high = true;
        } else if x <= ll && was_high {
            completed += 1;
            was_high = false;
        }
    }
    (completed, max.exp())
}

/// An orbit alternating between an annulus inside |z| ≤ low_bound and
/// increasingly large annuli A(1.1aᵢ, 5aᵢ).
pub fn construct_oscillating(
    map: &MapDescriptor,
    low_bound: f64,
    a: &SequenceSpec,
    horizon: usize,
    opts: &OscillationOptions,
    cover: &CoverOptions,
    refine: &RefineOptions,
) -> Result<ConstructionReport> {
    if !(low_bound > 1.0) {
        return Err(Error::invalid("low_bound must exceed 1"));
    }
    if !a.tends_to_infinity() {
        return Err(Error::invalid(format!(
            "sequence {a} must tend to infinity"
        )));
    }
    let ln_out = (0.986 * low_bound).ln();
    let low = Region::Annulus(Annulus::centered_ln(ln_out / opts.k0, ln_out));
    let n_levels = horizon.div_ceil(2).max(1);
    let a_pref = a.prefix(n_levels)?;
    let mut levels: Vec<(Region, CoveringCertificate, CoveringCertificate)> = vec![];
    let mut notes = vec![];
    for &ai in &a_pref {
        if 1.1 * ai <= opts.high_bound {
            continue;
        }
        let hi = Region::Annulus(Annulus::centered(1.1 * ai, 5.0 * ai));
        let up = certify_pair(map, &low, &hi, cover);
        let down = if up.is_certified() {
            certify_pair(map, &hi, &low, cover)
        } else {
            up.clone()
        };
        if up.is_certified() && down.is_certified() {
            levels.push((hi, up, down));
        } else {
            notes.push(format!(
                "level A({:.4e}, {:.4e}) not reachable; reusing the last certified level",
                1.1 * ai,
                5.0 * ai
            ));
            break;
        }
    }
    if levels.is_empty() {
        return Err(Error::refused(
            NEITHER_CERTIFIED,
            "no high annulus is both reachable from and returns to the low one",
        ));
    }
    let mut targets = vec![low.clone()];
    let mut certs = vec![];
    let mut visited = vec![];
    for n in 1..=horizon {
        if n % 2 == 1 {
            let i = (n / 2).min(levels.len() - 1);
            targets.push(levels[i].0.clone());
            certs.push(levels[i].1.clone());
            visited.push(i);
        } else {
            let i = *visited.last().expect("odd step precedes");
            targets.push(low.clone());
            certs.push(levels[i].2.clone());
        }
    }
    let bounds: Vec<RowBound> = targets
        .iter()
        .map(|t| match t {
            Region::Annulus(a) => RowBound {
                a: None,
                ln_lower: Some(a.ln_r_in),
                ln_upper: Some(a.ln_r_out),
            },
            _ => RowBound::default(),
        })
        .collect();
    let seq = TargetSequence::new(targets, certs)?;
    let mut report = finish(map, ConstructionKind::Oscillating, seq, &bounds, refine)?;
    let track: Vec<f64> = report.rows.iter().map(|r| r.ln_abs).collect();
    let (completed, running_max) = count_oscillations(&track, low_bound, opts.high_bound);
    let window = 2;
    let window_min_ok = track
        .windows(window.min(track.len()))
        .all(|w| w.iter().any(|x| *x <= low_bound.ln()));
    let mut seen: Vec<usize> = visited.clone();
    seen.dedup();
    let level_radii: Vec<f64> = seen.iter().map(|&i| inner(&levels[i].0).exp()).collect();
    let levels_exceeded = visited.iter().enumerate().all(|(j, &i)| {
        let n = 2 * j + 1;
        let r_in = inner(&levels[i].0);
        report.rows[..=n]
            .iter()
            .map(|r| r.ln_abs)
            .fold(f64::NEG_INFINITY, f64::max)
            >= r_in
    });
    report.oscillations = Some(OscillationSummary {
        low_bound,
        high_bound: opts.high_bound,
        completed,
        running_max,
        window,
        window_min_ok,
        levels: level_radii,
        levels_exceeded,
    });
    report.notes = notes;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillation_counter() {
        let l = |x: f64| x.ln();
        let track = [l(5.0), l(2e3), l(4.0), l(20.0), l(5e3), l(1.0)];
        assert_eq!(count_oscillations(&track, 10.0, 1e3).0, 2);
        assert_eq!(count_oscillations(&track[..2], 10.0, 1e3).0, 0);
    }

    #[test]
    fn squaring_along_exact_annuli() {
        // Eₙ = A(2^{2ⁿ}, 3^{2ⁿ}) under z², bounded by aₙ = 3^{2ⁿ}.
        let z2 = MapDescriptor::monomial(2);
        let n_max = 6;
        let targets: Vec<Region> = (0..=n_max)
            .map(|n| {
                let p = 2f64.powi(n as i32);
                Region::Annulus(Annulus::centered_ln(p * 2f64.ln(), p * 3f64.ln()))
            })
            .collect();
        let upper: Vec<Option<f64>> = (0..=n_max)
            .map(|n| Some(3f64.powf(2f64.powi(n as i32))))
            .collect();
        let r = construct_along(
            &z2,
            targets,
            &vec![None; n_max + 1],
            &upper,
            &CoverOptions::default(),
            &RefineOptions::default(),
        )
        .unwrap();
        assert!(r.rows.iter().all(|row| row.ok && row.ok_doubled));
        assert_eq!(r.n0, Some(0));
        let z = r.zeta.to_c64().norm();
        assert!((2.0..=3.0).contains(&z));
    }

    #[test]
    fn bounded_sequences_are_rejected() {
        let e = MapDescriptor::exp(1.0);
        let a = SequenceSpec::Custom(vec![5.0; 40]);
        let err = construct_slow_point(
            &e,
            &a,
            30,
            &ScaledParameters::default(),
            &CoverOptions::default(),
            &RefineOptions::default(),
        )
        .unwrap_err();
        assert!(err.reason().is_none());
    }

    #[test]
    fn growth_condition_is_checked() {
        let e = MapDescriptor::exp(1.0);
        let tower = SequenceSpec::Custom(vec![2.0, 1e6, 1e300]);
        let err = construct_two_sided(
            &e,
            &tower,
            2.0,
            1.0,
            2,
            1.0,
            &CoverOptions::default(),
            &RefineOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err.reason(), Some(GROWTH_VIOLATED));
    }

    #[test]
    fn large_minimum_modulus_fails_the_hypothesis() {
        // z³ + 10⁶ has m(r) ≥ 10⁶ − r³ ≫ 1 on small windows.
        let p = MapDescriptor::new(
            crate::catalog::Family::PolyExp,
            crate::catalog::MapParams::poly_exp(&[1e6, 0.0, 0.0, 1.0], &[], 0.0),
        )
        .unwrap();
        let a = SequenceSpec::Linear(1.0);
        let err = construct_two_sided(
            &p,
            &a,
            2.0,
            1.0,
            3,
            1.0,
            &CoverOptions::default(),
            &RefineOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err.reason(), Some(HYPOTHESIS_FAILED));
    }

    #[test]
    fn short_horizon_has_no_completed_oscillation() {
        let e = MapDescriptor::exp(1.0);
        let r = construct_oscillating(
            &e,
            10.0,
            &SequenceSpec::Linear(1e3),
            1,
            &OscillationOptions::default(),
            &CoverOptions::default(),
            &RefineOptions::default(),
        )
        .unwrap();
        assert_eq!(r.oscillations.as_ref().unwrap().completed, 0);
        assert!(r.holds());
    }
}
