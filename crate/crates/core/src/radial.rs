//! Maximum and minimum modulus on circles, radial profiles and growth diagnostics.
//!
//! Everything is computed on ln|f| so that values like e^{10^5} stay representable.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::catalog::{ExtEval, MapDescriptor, DEFAULT_OVERFLOW_CAP};
use crate::error::{Error, Result};
use crate::ext::ExtComplex;

const BASE_SAMPLES: usize = 4096;
pub const MAX_SAMPLES: usize = 1 << 22;
const N_REFINE: usize = 8;
const GOLDEN_ITERS: usize = 60;

/// An extremum of |f| on a circle, with its log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleExtremum {
    pub value: f64,
    pub ln_value: f64,
    pub theta: f64,
    pub samples: usize,
    /// Relative change of the extremum under the last doubling of the grid.
    pub tol: f64,
    /// The circle passes through a pole (maximum is infinite).
    pub unbounded: bool,
}

/// ln|f(center + r e^{iθ})|; `+inf` at poles or overflow.
pub fn ln_abs_at(map: &MapDescriptor, center: Complex64, r: f64, theta: f64) -> f64 {
    let z = ExtComplex::from_c64(center + Complex64::from_polar(r, theta));
    match map.eval_ext(&z, DEFAULT_OVERFLOW_CAP * 1e6) {
        ExtEval::Finite(v) => v.ln_abs(),
        ExtEval::PoleHit(_) => f64::INFINITY,
        ExtEval::Overflow(l) => l,
    }
}

/// ln|f(e^{ln_r + iθ})|, for circles beyond the f64 range.
pub fn ln_abs_at_ln(map: &MapDescriptor, ln_r: f64, theta: f64) -> f64 {
    let z = ExtComplex::from_polar_ln(ln_r, theta);
    match map.eval_ext(&z, DEFAULT_OVERFLOW_CAP * 1e6) {
        ExtEval::Finite(v) => v.ln_abs(),
        ExtEval::PoleHit(_) => f64::INFINITY,
        ExtEval::Overflow(l) => l,
    }
}

/// Coarse-grid size for a circle of radius r.
pub fn base_samples(map: &MapDescriptor, r: f64) -> usize {
    let rate = map.angular_rate();
    let n = (64.0 * rate * r).ceil();
    let n = if n.is_finite() {
        n as usize
    } else {
        MAX_SAMPLES
    };
    n.clamp(BASE_SAMPLES, MAX_SAMPLES)
        .next_power_of_two()
        .min(MAX_SAMPLES)
}

fn circle_through_pole(map: &MapDescriptor, r: f64) -> bool {
    map.poles
        .in_window(Complex64::new(0.0, 0.0), r * 1.001 + 1.0)
        .iter()
        .any(|p| (p.at.norm() - r).abs() <= 1e-12 * (1.0 + p.at.norm()))
}

fn sample_circle(map: &MapDescriptor, ln_r: f64, n: usize) -> Vec<f64> {
    (0..n)
        .into_par_iter()
        .with_min_len(512)
        .map(|i| ln_abs_at_ln(map, ln_r, TAU * i as f64 / n as f64))
        .collect()
}

/// Golden-section search of `sign * g` on [a, b]; returns (θ, g(θ)).
pub fn golden_section(
    g: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    sign: f64,
    iters: usize,
) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a, b);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = sign * g(x1);
    let mut f2 = sign * g(x2);
    for _ in 0..iters {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = sign * g(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = sign * g(x2);
        }
        if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    if f1 >= f2 {
        (x1, sign * f1)
    } else {
        (x2, sign * f2)
    }
}

/// Best value on a sampled circle after refining the top local extrema.
fn refine(map: &MapDescriptor, ln_r: f64, vals: &[f64], sign: f64) -> (f64, f64) {
    let n = vals.len();
    let h = TAU / n as f64;
    let mut cands: Vec<usize> = (0..n)
        .filter(|&i| {
            let v = sign * vals[i];
            v >= sign * vals[(i + n - 1) % n] && v >= sign * vals[(i + 1) % n]
        })
        .collect();
    cands.sort_by(|&a, &b| {
        (sign * vals[b])
            .total_cmp(&(sign * vals[a]))
            .then(a.cmp(&b))
    });
    cands.truncate(N_REFINE);
    if cands.is_empty() {
        cands.push(0);
    }
    let g = |t: f64| ln_abs_at_ln(map, ln_r, t);
    let results: Vec<(f64, f64)> = cands
        .par_iter()
        .map(|&i| {
            let t0 = h * i as f64;
            let (t, v) = golden_section(g, t0 - h, t0 + h, sign, GOLDEN_ITERS);
            if sign * v >= sign * vals[i] {
                (t.rem_euclid(TAU), v)
            } else {
                (t0, vals[i])
            }
        })
        .collect();
    results
        .into_iter()
        .reduce(|a, b| if sign * b.1 > sign * a.1 { b } else { a })
        .expect("at least one candidate")
}

fn circle_extremum(
    map: &MapDescriptor,
    ln_r: f64,
    rel_tol: f64,
    sign: f64,
) -> Result<CircleExtremum> {
    if !ln_r.is_finite() {
        return Err(Error::invalid(format!(
            "radius must be positive and finite, got e^{ln_r}"
        )));
    }
    let r = ln_r.exp();
    if sign > 0.0 && circle_through_pole(map, r) {
        return Ok(CircleExtremum {
            value: f64::INFINITY,
            ln_value: f64::INFINITY,
            theta: 0.0,
            samples: 0,
            tol: 0.0,
            unbounded: true,
        });
    }
    let ln_tol = rel_tol.max(1e-15).ln_1p();
    let mut n = base_samples(map, r);
    let mut prev: Option<(f64, f64)> = None;
    let mut total = 0usize;
    loop {
        let vals = sample_circle(map, ln_r, n);
        total += n;
        let best = refine(map, ln_r, &vals, sign);
        let diff = prev.map(|p: (f64, f64)| {
            if p.1 == best.1 {
                0.0
            } else {
                (p.1 - best.1).abs()
            }
        });
        let floor = 8.0 * f64::EPSILON * best.1.abs();
        let done = matches!(diff, Some(d) if d <= ln_tol.max(floor)) || n >= MAX_SAMPLES;
        if done {
            let tol = diff.map_or(0.0, |d| d.exp_m1());
            return Ok(CircleExtremum {
                value: best.1.exp(),
                ln_value: best.1,
                theta: best.0,
                samples: total,
                tol,
                unbounded: false,
            });
        }
        prev = Some(best);
        n *= 2;
    }
}

/// M(r, f) = max |f| on |z| = r.
pub fn max_modulus(map: &MapDescriptor, r: f64, rel_tol: f64) -> Result<CircleExtremum> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {r}")));
    }
    circle_extremum(map, r.ln(), rel_tol, 1.0)
}

/// M(e^{ln_r}, f) for radii given by their logarithm.
pub fn max_modulus_ln(map: &MapDescriptor, ln_r: f64, rel_tol: f64) -> Result<CircleExtremum> {
    circle_extremum(map, ln_r, rel_tol, 1.0)
}

pub fn min_modulus_ln(map: &MapDescriptor, ln_r: f64, rel_tol: f64) -> Result<CircleExtremum> {
    circle_extremum(map, ln_r, rel_tol, -1.0)
}

/// m(r, f) = min |f| on |z| = r.
pub fn min_modulus(map: &MapDescriptor, r: f64, rel_tol: f64) -> Result<CircleExtremum> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {r}")));
    }
    circle_extremum(map, r.ln(), rel_tol, -1.0)
}

pub fn ln_max_modulus(map: &MapDescriptor, r: f64) -> f64 {
    max_modulus(map, r, 1e-9).map_or(f64::NAN, |e| e.ln_value)
}

pub fn ln_min_modulus(map: &MapDescriptor, r: f64) -> f64 {
    min_modulus(map, r, 1e-9).map_or(f64::NAN, |e| e.ln_value)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub r: f64,
    pub max_mod: f64,
    pub ln_max_mod: f64,
    pub theta_max: f64,
    pub min_mod: f64,
    pub ln_min_mod: f64,
    pub theta_min: f64,
    pub samples_used: usize,
    pub tolerance_achieved: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RadialProfile {
    pub const CSV_HEADER: &'static str = "r,max_mod,theta_max,min_mod,theta_min,samples,tol";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.r,
            self.max_mod,
            self.theta_max,
            self.min_mod,
            self.theta_min,
            self.samples_used,
            self.tolerance_achieved
        )
    }
}

pub fn profile_at(map: &MapDescriptor, r: f64, rel_tol: f64) -> RadialProfile {
    let hi = max_modulus(map, r, rel_tol);
    let lo = min_modulus(map, r, rel_tol);
    match (hi, lo) {
        (Ok(hi), Ok(lo)) => RadialProfile {
            r,
            max_mod: hi.value,
            ln_max_mod: hi.ln_value,
            theta_max: hi.theta,
            min_mod: lo.value,
            ln_min_mod: lo.ln_value,
            theta_min: lo.theta,
            samples_used: hi.samples + lo.samples,
            tolerance_achieved: hi.tol.max(lo.tol),
            error: hi
                .unbounded
                .then(|| "unbounded: circle passes through a pole".to_string()),
        },
        (Err(e), _) | (_, Err(e)) => RadialProfile {
            r,
            max_mod: f64::NAN,
            ln_max_mod: f64::NAN,
            theta_max: f64::NAN,
            min_mod: f64::NAN,
            ln_min_mod: f64::NAN,
            theta_min: f64::NAN,
            samples_used: 0,
            tolerance_achieved: f64::NAN,
            error: Some(e.to_string()),
        },
    }
}

pub fn radii(r_min: f64, r_max: f64, n: usize, spacing: Spacing) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i == 0 {
                return r_min;
            }
            if i == n - 1 {
                return r_max;
            }
            let t = i as f64 / (n - 1) as f64;
            match spacing {
                Spacing::Linear => r_min + t * (r_max - r_min),
                Spacing::Log => (r_min.ln() + t * (r_max.ln() - r_min.ln())).exp(),
            }
        })
        .collect()
}

pub fn scan_profile(
    map: &MapDescriptor,
    r_min: f64,
    r_max: f64,
    n_radii: usize,
    spacing: Spacing,
    rel_tol: f64,
) -> Result<Vec<RadialProfile>> {
    if !(r_min > 0.0 && r_min < r_max) || n_radii < 2 {
        return Err(Error::invalid(
            "scan_profile needs 0 < r_min < r_max and n_radii >= 2",
        ));
    }
    Ok(radii(r_min, r_max, n_radii, spacing)
        .into_iter()
        .map(|r| profile_at(map, r, rel_tol))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinRadiusSearch {
    /// Smallest sampled radius with certified m(rho) <= c.
    pub rho: Option<f64>,
    pub ln_rho: Option<f64>,
    pub m_at_rho: Option<f64>,
    /// Smallest sampled minimum modulus over the interval (whether or not it qualifies).
    pub sampled_min: f64,
    pub ln_sampled_min: f64,
    pub sampled_min_radius: f64,
    pub radii_tested: usize,
}

/// Scans `n` log-spaced radii strictly inside (e^{ln_lo}, e^{ln_hi}) for ln m(rho) <= ln_c.
pub fn find_small_min_modulus_ln(
    map: &MapDescriptor,
    ln_lo: f64,
    ln_hi: f64,
    ln_c: f64,
    n: usize,
) -> Result<MinRadiusSearch> {
    if !(ln_hi > ln_lo) || !ln_lo.is_finite() || !ln_hi.is_finite() {
        return Err(Error::invalid("need 0 < lo < hi"));
    }
    let mut out = MinRadiusSearch {
        rho: None,
        ln_rho: None,
        m_at_rho: None,
        sampled_min: f64::INFINITY,
        ln_sampled_min: f64::INFINITY,
        sampled_min_radius: f64::NAN,
        radii_tested: 0,
    };
    for i in 0..n {
        let t = (i as f64 + 0.5) / n as f64;
        let ln_rho = ln_lo + t * (ln_hi - ln_lo);
        let m = min_modulus_ln(map, ln_rho, 1e-9)?;
        out.radii_tested += 1;
        if m.ln_value < out.ln_sampled_min || out.radii_tested == 1 {
            out.ln_sampled_min = m.ln_value;
            out.sampled_min = m.value;
            out.sampled_min_radius = ln_rho.exp();
        }
        if m.ln_value + m.tol.ln_1p() <= ln_c {
            out.rho = Some(ln_rho.exp());
            out.ln_rho = Some(ln_rho);
            out.m_at_rho = Some(m.value);
            break;
        }
    }
    Ok(out)
}

pub fn find_small_min_modulus(
    map: &MapDescriptor,
    lo: f64,
    hi: f64,
    c: f64,
    n: usize,
) -> Result<MinRadiusSearch> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid("need 0 < lo < hi"));
    }
    find_small_min_modulus_ln(map, lo.ln(), hi.ln(), c.ln(), n)
}

/// Some ρ ∈ (r, d r) with m(ρ, f) ≤ c, if one is found on the sampled radii.
pub fn find_min_modulus_radius(
    map: &MapDescriptor,
    r: f64,
    d: f64,
    c: f64,
) -> Result<MinRadiusSearch> {
    if d <= 1.0 {
        return Err(Error::invalid("d must exceed 1"));
    }
    find_small_min_modulus(map, r, d * r, c, 64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HadamardViolation {
    pub r: f64,
    pub c: f64,
    pub ln_lhs: f64,
    pub ln_rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HadamardReport {
    pub radii: Vec<f64>,
    pub c_values: Vec<f64>,
    pub violations: Vec<HadamardViolation>,
    /// Smallest tested radius above which no tested pair violates M(r^c) >= M(r)^c.
    pub estimated_r1: f64,
}

pub fn hadamard_check(
    map: &MapDescriptor,
    r_lo: f64,
    r_hi: f64,
    n_radii: usize,
    c_values: &[f64],
) -> Result<HadamardReport> {
    if !map.poles.is_finite() {
        return Err(Error::invalid("hadamard_check needs finitely many poles"));
    }
    if !(1.0 < r_lo && r_lo < r_hi) || n_radii < 2 {
        return Err(Error::invalid("need 1 < r_lo < r_hi and n_radii >= 2"));
    }
    if c_values.iter().any(|&c| c <= 1.0) {
        return Err(Error::invalid("every c must exceed 1"));
    }
    let rs = radii(r_lo, r_hi, n_radii, Spacing::Log);
    let mut violations = vec![];
    let mut last_bad: Option<usize> = None;
    for (i, &r) in rs.iter().enumerate() {
        let ln_m = ln_max_modulus(map, r);
        for &c in c_values {
            let ln_lhs = ln_max_modulus(map, r.powf(c));
            let ln_rhs = c * ln_m;
            if ln_lhs < ln_rhs - 1e-9 * ln_rhs.abs() {
                violations.push(HadamardViolation {
                    r,
                    c,
                    ln_lhs,
                    ln_rhs,
                });
                last_bad = Some(i);
            }
        }
    }
    let estimated_r1 = match last_bad {
        None => r_lo,
        Some(i) if i + 1 < rs.len() => rs[i + 1],
        Some(_) => f64::INFINITY,
    };
    Ok(HadamardReport {
        radii: rs,
        c_values: c_values.to_vec(),
        violations,
        estimated_r1,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub r: f64,
    pub ln_ratio: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub k: f64,
    pub rows: Vec<GrowthRow>,
    pub nondecreasing: bool,
}

/// M(k r)/M(r) over the given radii.
pub fn growth_ratio_check(map: &MapDescriptor, k: f64, r_list: &[f64]) -> Result<GrowthReport> {
    if k <= 1.0 {
        return Err(Error::invalid("k must exceed 1"));
    }
    if r_list.iter().any(|&r| r <= 0.0) || r_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("radii must be positive and increasing"));
    }
    let rows: Vec<GrowthRow> = r_list
        .iter()
        .map(|&r| {
            let l = ln_max_modulus(map, k * r) - ln_max_modulus(map, r);
            GrowthRow {
                r,
                ln_ratio: l,
                ratio: l.exp(),
            }
        })
        .collect();
    let nondecreasing = rows
        .windows(2)
        .all(|w| w[1].ln_ratio >= w[0].ln_ratio - 1e-9 * w[0].ln_ratio.abs());
    Ok(GrowthReport {
        k,
        rows,
        nondecreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Family, MapParams};
    use proptest::prelude::*;

    fn poly(p: &[f64]) -> MapDescriptor {
        MapDescriptor::new(Family::PolyExp, MapParams::poly(p)).unwrap()
    }

    #[test]
    fn exp_circle_extrema() {
        let m = MapDescriptor::exp(1.0);
        let hi = max_modulus(&m, 2.0, 1e-12).unwrap();
        assert!((hi.value - 2f64.exp()).abs() < 1e-12 * hi.value);
        assert!(hi.theta.min(TAU - hi.theta) < 1e-6);
        let lo = min_modulus(&m, 2.0, 1e-12).unwrap();
        assert!((lo.value - (-2f64).exp()).abs() < 1e-12 * lo.value);
        assert!((lo.theta - std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn monomial_circle_is_flat() {
        let m = poly(&[0.0, 0.0, 1.0]);
        assert!((max_modulus(&m, 3.0, 1e-12).unwrap().value - 9.0).abs() < 1e-12);
        assert!((min_modulus(&m, 3.0, 1e-12).unwrap().value - 9.0).abs() < 1e-12);
    }

    #[test]
    fn fatou_baker_matches_dense_scan() {
        let m = MapDescriptor::simple(Family::FatouBaker);
        let got = max_modulus(&m, 10.0, 1e-12).unwrap();
        let n = 1 << 20;
        let dense = (0..n)
            .map(|i| {
                ln_abs_at(
                    &m,
                    Complex64::new(0.0, 0.0),
                    10.0,
                    TAU * i as f64 / n as f64,
                )
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(got.ln_value >= dense - 1e-12);
        assert!(got.ln_value - dense < 1e-9);
    }

    #[test]
    fn pole_on_circle_is_unbounded() {
        let m = MapDescriptor::simple(Family::SinPole);
        let e = max_modulus(&m, std::f64::consts::PI, 1e-9).unwrap();
        assert!(e.unbounded);
    }

    #[test]
    fn profile_rows_for_exp() {
        let rows = scan_profile(
            &MapDescriptor::exp(1.0),
            1.0,
            4.0,
            4,
            Spacing::Linear,
            1e-12,
        )
        .unwrap();
        for (i, row) in rows.iter().enumerate() {
            let r = (i + 1) as f64;
            assert!((row.max_mod - r.exp()).abs() < 1e-11 * r.exp());
            assert!((row.min_mod - (-r).exp()).abs() < 1e-11);
        }
        let two = scan_profile(&MapDescriptor::exp(1.0), 1.0, 4.0, 2, Spacing::Log, 1e-9).unwrap();
        assert_eq!(two.iter().map(|p| p.r).collect::<Vec<_>>(), vec![1.0, 4.0]);
    }

    #[test]
    fn quarter_cos_profile_is_monotone() {
        let rows = scan_profile(
            &MapDescriptor::simple(Family::QuarterCos),
            10.0,
            1e4,
            40,
            Spacing::Log,
            1e-9,
        )
        .unwrap();
        assert!(rows.windows(2).all(|w| w[1].ln_max_mod > w[0].ln_max_mod));
    }

    #[test]
    fn min_modulus_radius_search() {
        let e = find_min_modulus_radius(&MapDescriptor::exp(1.0), 5.0, 2.0, 1.0).unwrap();
        let rho = e.rho.unwrap();
        assert!(rho > 5.0 && rho < 10.0);
        let p = find_min_modulus_radius(&poly(&[100.0, 0.0, 1.0]), 1.0, 2.0, 1.0).unwrap();
        assert!(p.rho.is_none());
        assert!(p.sampled_min >= 96.0);
        let s = find_min_modulus_radius(&MapDescriptor::simple(Family::SineShift), 50.0, 2.0, 10.0)
            .unwrap();
        assert!(s.rho.is_some());
        assert!(s.m_at_rho.unwrap() <= 10.0);
    }

    #[test]
    fn hadamard_examples() {
        // ln M(r) = r for exp, so M(r^c) >= M(r)^c exactly when r^(c-1) >= c.
        let cs = [1.5, 2.0, 3.0];
        let rep = hadamard_check(&MapDescriptor::exp(1.0), 1.01, 100.0, 60, &cs).unwrap();
        let analytic = cs
            .iter()
            .map(|&c: &f64| c.powf(1.0 / (c - 1.0)))
            .fold(0.0, f64::max);
        for v in &rep.violations {
            assert!(v.r < analytic);
        }
        assert!(rep.estimated_r1 >= analytic && rep.estimated_r1 < analytic * 1.1);
        let cube = hadamard_check(&poly(&[0.0, 0.0, 0.0, 1.0]), 1.5, 100.0, 20, &cs).unwrap();
        assert!(cube.violations.is_empty());
        let bb = hadamard_check(
            &MapDescriptor::simple(Family::BergweilerBaker),
            2.0,
            100.0,
            30,
            &cs,
        )
        .unwrap();
        assert!(bb.estimated_r1.is_finite());
    }

    #[test]
    fn growth_ratios() {
        let g = growth_ratio_check(&MapDescriptor::exp(1.0), 2.0, &[1.0, 2.0, 4.0]).unwrap();
        for (row, want) in g.rows.iter().zip([1.0f64, 2.0, 4.0]) {
            assert!((row.ln_ratio - want).abs() < 1e-9);
        }
        let sq = growth_ratio_check(&poly(&[0.0, 0.0, 1.0]), 2.0, &[1.0, 3.0, 7.0]).unwrap();
        assert!(sq.rows.iter().all(|r| (r.ratio - 4.0).abs() < 1e-9));
        let qc = growth_ratio_check(
            &MapDescriptor::simple(Family::QuarterCos),
            2.0,
            &[1e2, 1e3, 1e4],
        )
        .unwrap();
        assert!(qc.nondecreasing);
    }

    fn entire_maps() -> Vec<MapDescriptor> {
        vec![
            MapDescriptor::exp(1.0),
            MapDescriptor::simple(Family::FatouBaker),
            MapDescriptor::simple(Family::SineShift),
            MapDescriptor::simple(Family::ExpShift),
            MapDescriptor::simple(Family::QuarterCos),
            MapDescriptor::simple(Family::BergweilerBaker),
            poly(&[1.0, -2.0, 0.0, 1.0]),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn min_never_exceeds_max(i in 0usize..7, r in 0.5f64..30.0) {
            let m = &entire_maps()[i];
            let p = profile_at(m, r, 1e-9);
            prop_assert!(p.ln_min_mod <= p.ln_max_mod);
        }

        #[test]
        fn log_convexity(i in 0usize..7, a in 0.0f64..3.0, w in 0.2f64..1.5, t in 0.1f64..0.9) {
            let m = &entire_maps()[i];
            let (l1, l3) = (a, a + w);
            let l2 = l1 + t * w;
            let (m1, m2, m3) = (ln_max_modulus(m, l1.exp()), ln_max_modulus(m, l2.exp()), ln_max_modulus(m, l3.exp()));
            let interp = m1 + t * (m3 - m1);
            prop_assert!(m2 <= interp + 1e-6 * interp.abs().max(1.0));
        }

        #[test]
        fn doubling_density_is_within_tolerance(i in 0usize..7, r in 0.5f64..40.0) {
            let m = &entire_maps()[i];
            let e = max_modulus(m, r, 1e-9).unwrap();
            let n = base_samples(m, r) * 2;
            let vals = sample_circle(m, r.ln(), n);
            let best = refine(m, r.ln(), &vals, 1.0);
            prop_assert!((best.1 - e.ln_value).abs() <= (e.tol + 1e-9) * e.ln_value.abs().max(1.0));
        }

        #[test]
        fn found_radius_is_inside_and_certified(r in 1.0f64..30.0, d in 1.2f64..3.0) {
            let m = MapDescriptor::simple(Family::SineShift);
            let s = find_min_modulus_radius(&m, r, d, 5.0).unwrap();
            if let Some(rho) = s.rho {
                prop_assert!(rho > r && rho < d * r);
                prop_assert!(s.m_at_rho.unwrap() <= 5.0);
            }
        }
    }
}
