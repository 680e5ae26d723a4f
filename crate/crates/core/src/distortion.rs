//! Orbit-pair distortion statistics on a disc.
//!
//! Strong form: |fⁿ(z′)| / |fⁿ(z)|. Weak form: ln|fⁿ(z′)| / ln|fⁿ(z)|.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{ExtEval, MapDescriptor, DEFAULT_OVERFLOW_CAP};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionRow {
    pub n: usize,
    /// Pairs with both orbits alive at step n.
    pub pairs: usize,
    /// max over pairs of the symmetric ratio max(|w′|/|w|, |w|/|w′|) up to step n.
    pub sup_ratio: f64,
    /// Same for the log ratio, over pairs with both |w|, |w′| > e.
    pub sup_log_exponent: f64,
}

impl DistortionRow {
    pub const CSV_HEADER: &'static str = "n,pairs,sup_ratio,sup_log_exponent";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.12e},{:.12e}",
            self.n, self.pairs, self.sup_ratio, self.sup_log_exponent
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminatedPair {
    pub pair: usize,
    pub n: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub map: String,
    pub center: [f64; 2],
    pub radius: f64,
    pub n_max: usize,
    pub n_pairs: usize,
    pub seed: u64,
    pub sup_ratio: f64,
    pub sup_log_exponent: f64,
    /// Cumulative sups per n.
    pub rows: Vec<DistortionRow>,
    /// Pairs cut short by a pole or overflow (`orbit_terminated`).
    pub terminated: Vec<TerminatedPair>,
}

impl DistortionReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", DistortionRow::CSV_HEADER);
        for r in &self.rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    /// Largest relative change of `sup_ratio` over the last `k` rows.
    pub fn tail_drift(&self, k: usize) -> f64 {
        let tail = &self.rows[self.rows.len().saturating_sub(k)..];
        match (tail.first(), tail.last()) {
            (Some(a), Some(b)) => (b.sup_ratio / a.sup_ratio - 1.0).abs(),
            _ => 0.0,
        }
    }
}

fn ln_orbit(
    map: &MapDescriptor,
    z: Complex64,
    n_max: usize,
) -> (Vec<f64>, Option<(usize, &'static str)>) {
    let mut out = Vec::with_capacity(n_max);
    for (i, e) in map
        .orbit_ext(z, n_max, DEFAULT_OVERFLOW_CAP)
        .into_iter()
        .enumerate()
    {
        match e {
            ExtEval::Finite(w) => out.push(w.ln_abs()),
            ExtEval::PoleHit(_) => return (out, Some((i + 1, "pole_hit"))),
            ExtEval::Overflow(_) => return (out, Some((i + 1, "overflow"))),
        }
    }
    (out, None)
}

fn uniform_in_disc(rng: &mut ChaCha8Rng, center: Complex64, radius: f64) -> Complex64 {
    let r = radius * rng.gen::<f64>().sqrt();
    let t = rng.gen::<f64>() * std::f64::consts::TAU;
    center + Complex64::from_polar(r, t)
}

/// Samples `n_pairs` independent pairs uniformly in the closed disc.
pub fn distortion_probe(
    map: &MapDescriptor,
    center: Complex64,
    radius: f64,
    n_max: usize,
    n_pairs: usize,
    seed: u64,
) -> Result<DistortionReport> {
    if !(radius > 0.0 && radius.is_finite()) || n_max == 0 || n_pairs == 0 {
        return Err(Error::invalid("need radius > 0, n_max ≥ 1 and n_pairs ≥ 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(Complex64, Complex64)> = (0..n_pairs)
        .map(|_| {
            (
                uniform_in_disc(&mut rng, center, radius),
                uniform_in_disc(&mut rng, center, radius),
            )
        })
        .collect();
    probe_pairs(map, center, radius, n_max, &pairs, seed)
}

/// Probe on explicit pairs (the random sampler's back end).
pub fn probe_pairs(
    map: &MapDescriptor,
    center: Complex64,
    radius: f64,
    n_max: usize,
    pairs: &[(Complex64, Complex64)],
    seed: u64,
) -> Result<DistortionReport> {
    let mut rows: Vec<DistortionRow> = (1..=n_max)
        .map(|n| DistortionRow {
            n,
            pairs: 0,
            sup_ratio: 1.0,
            sup_log_exponent: 1.0,
        })
        .collect();
    let mut terminated = vec![];
    for (k, (z, zp)) in pairs.iter().enumerate() {
        let (a, sa) = ln_orbit(map, *z, n_max);
        let (b, sb) = ln_orbit(map, *zp, n_max);
        if let Some((n, reason)) = [sa, sb].into_iter().flatten().min_by_key(|s| s.0) {
            terminated.push(TerminatedPair {
                pair: k,
                n,
                reason: reason.into(),
            });
        }
        for (i, (la, lb)) in a.iter().zip(&b).enumerate() {
            let row = &mut rows[i];
            row.pairs += 1;
            row.sup_ratio = row.sup_ratio.max((la - lb).abs().exp());
            if *la > 1.0 && *lb > 1.0 {
                row.sup_log_exponent = row.sup_log_exponent.max((la / lb).max(lb / la));
            }
        }
    }
    // running sups over n
    for i in 1..rows.len() {
        rows[i].sup_ratio = rows[i].sup_ratio.max(rows[i - 1].sup_ratio);
        rows[i].sup_log_exponent = rows[i].sup_log_exponent.max(rows[i - 1].sup_log_exponent);
    }
    let last = rows.last().expect("n_max ≥ 1");
    Ok(DistortionReport {
        map: map.label.clone(),
        center: [center.re, center.im],
        radius,
        n_max,
        n_pairs: pairs.len(),
        seed,
        sup_ratio: last.sup_ratio,
        sup_log_exponent: last.sup_log_exponent,
        rows,
        terminated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Family, MapParams};

    #[test]
    fn identical_points_have_unit_ratios() {
        let e = MapDescriptor::simple(Family::BergweilerBaker);
        let z = Complex64::new(-10.0, 0.0);
        let r = probe_pairs(&e, z, 0.5, 20, &[(z, z)], 0).unwrap();
        assert!(r
            .rows
            .iter()
            .all(|row| row.sup_ratio == 1.0 && row.sup_log_exponent == 1.0));
    }

    #[test]
    fn baker_domain_ratio_is_stable() {
        let f = MapDescriptor::simple(Family::BergweilerBaker);
        let r = distortion_probe(&f, Complex64::new(-10.0, 0.0), 0.5, 40, 64, 7).unwrap();
        assert!(r.terminated.is_empty(), "{:?}", r.terminated);
        assert!(
            r.sup_ratio.is_finite() && r.sup_ratio < 10.0,
            "{}",
            r.sup_ratio
        );
        assert!(r.tail_drift(20) < 1e-6, "{}", r.tail_drift(20));
        // same seed, same report
        assert_eq!(
            r,
            distortion_probe(&f, Complex64::new(-10.0, 0.0), 0.5, 40, 64, 7).unwrap()
        );
    }

    #[test]
    fn squaring_separates_weak_from_strong() {
        let sq = MapDescriptor::new(Family::PolyExp, MapParams::poly(&[0.0, 0.0, 1.0])).unwrap();
        let c = Complex64::new(4.0, 0.0);
        let pairs = [(Complex64::new(3.9, 0.0), Complex64::new(4.1, 0.0))];
        let r = probe_pairs(&sq, c, 0.1, 14, &pairs, 0).unwrap();
        let bound = 4.1f64.ln() / 3.9f64.ln();
        assert!(
            (r.sup_log_exponent - bound).abs() < 1e-9,
            "{} vs {bound}",
            r.sup_log_exponent
        );
        // ratio (4.1/3.9)^{2ⁿ} blows up
        assert!(r.sup_ratio > 1e100);
        let random = distortion_probe(&sq, c, 0.1, 12, 32, 1).unwrap();
        assert!(random.sup_log_exponent <= bound + 1e-12);
    }

    #[test]
    fn poles_terminate_pairs() {
        let t = MapDescriptor::simple(Family::HalfTan);
        let p = Complex64::new(std::f64::consts::FRAC_PI_2, 0.0);
        let r = probe_pairs(&t, p, 0.1, 5, &[(p, Complex64::new(0.1, 0.0))], 0).unwrap();
        assert_eq!(r.terminated.len(), 1);
        assert_eq!(r.terminated[0].n, 1);
    }
}
