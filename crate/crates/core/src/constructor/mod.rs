//! Finite-horizon orbit constructions: annulus chains with pauses, two-sided
//! bands, oscillating orbits, pole-disc chains and the feasibility scan.

mod chain;
mod feasibility;
mod orbits;
mod pole_chain;
mod schedule;

pub use chain::{build_chain, certify_loop, AnnulusChain, CaseTag, ChainStep, LoopCertificate};
pub use feasibility::{feasibility_check, FeasibilityReport, FeasibilityRow, FlaggedInterval};
pub use orbits::{
    construct_along, construct_oscillating, construct_slow_point, construct_two_sided,
    count_oscillations, OscillationOptions, OscillationSummary,
};
pub use pole_chain::{build_pole_chain, CycleCertificate, Island, PoleChain, PoleLink};
pub use schedule::{schedule_pauses, schedule_pauses_ln, LoopKind, PauseSchedule};

use serde::{Deserialize, Serialize};

use crate::catalog::MapDescriptor;
use crate::error::{Error, Result};
use crate::hp::HpComplex;
use crate::itinerary::{PrecisionSchedule, RefinementTrace};
use crate::region::Region;

pub const CHAIN_STALLED: &str = "chain_stalled";
pub const NO_LOOP_AVAILABLE: &str = "no_loop_available";
pub const HYPOTHESIS_FAILED: &str = "hypothesis_failed";
pub const NEITHER_CERTIFIED: &str = "neither_certified";
pub const GROWTH_VIOLATED: &str = "growth_violated";
pub const ISLAND_NOT_FOUND: &str = "island_not_found";
pub const POLE_ENUMERATION_EXHAUSTED: &str = "pole_enumeration_exhausted";

/// Desk-scale constants standing in for the astronomically large thresholds
/// of the asymptotic argument. Every step built from them is certified directly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScaledParameters {
    pub r0: f64,
    /// Required ln M(r)/ln r at r0.
    pub growth_threshold: f64,
    pub k0: f64,
    /// Successive chain radii satisfy ln r_m ≥ gap_exponent · ln r_{m-1}.
    pub gap_exponent: f64,
    pub d: f64,
    pub c: f64,
    pub precision: PrecisionSchedule,
    /// Reject steps whose exponent leaves [4, 5].
    pub lemma_faithful: bool,
}

impl Default for ScaledParameters {
    fn default() -> Self {
        ScaledParameters {
            r0: 2.0,
            growth_threshold: 3.0,
            k0: 5.0,
            gap_exponent: 1.5,
            d: 2.0,
            c: 1.0,
            precision: PrecisionSchedule::default(),
            lemma_faithful: false,
        }
    }
}

impl ScaledParameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.r0 >= 1.0) {
            return Err(Error::invalid(format!("r0 must be >= 1, got {}", self.r0)));
        }
        if !(self.growth_threshold >= 3.0) {
            return Err(Error::invalid("growth_threshold must be >= 3"));
        }
        if !(4.0..=5.0).contains(&self.k0) {
            return Err(Error::invalid(format!(
                "k0 must lie in [4, 5], got {}",
                self.k0
            )));
        }
        if !(self.gap_exponent > 1.0) {
            return Err(Error::invalid("gap_exponent must exceed 1"));
        }
        if !(self.d > 1.0 && self.c > 0.0) {
            return Err(Error::invalid("need d > 1 and c > 0"));
        }
        if self.precision.base_bits < 53 || self.precision.cap_bits < self.precision.base_bits {
            return Err(Error::invalid(
                "precision caps must satisfy 53 <= base <= cap",
            ));
        }
        Ok(())
    }
}

/// a′ₙ = min_{k ≥ n} aₖ over the prefix.
pub fn monotone_minorant(a: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Err(Error::invalid("monotone_minorant needs a nonempty prefix"));
    }
    if let Some(x) = a.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(Error::invalid(format!(
            "sequence entries must be positive, got {x}"
        )));
    }
    let mut out = a.to_vec();
    for i in (0..out.len() - 1).rev() {
        out[i] = out[i].min(out[i + 1]);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionKind {
    SlowPoint,
    TwoSided,
    Oscillating,
    Custom,
}

/// One line of the verification table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub n: usize,
    pub a_n: Option<f64>,
    pub abs: f64,
    pub ln_abs: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// The claimed inequality at the trace precision.
    pub ok: bool,
    /// The same at doubled precision.
    pub ok_doubled: bool,
}

impl BandRow {
    pub const CSV_HEADER: &'static str = "n,a_n,abs,ln_abs,lower,upper,ok,ok_doubled";

    pub fn csv_row(&self) -> String {
        let o = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.12e}"));
        format!(
            "{},{},{:.12e},{:.12},{},{},{},{}",
            self.n,
            o(self.a_n),
            self.abs,
            self.ln_abs,
            o(self.lower),
            o(self.upper),
            self.ok,
            self.ok_doubled
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub kind: ConstructionKind,
    pub map: String,
    pub zeta: HpComplex,
    pub horizon: usize,
    /// First index from which every later row satisfies the inequality.
    pub n0: Option<usize>,
    pub rows: Vec<BandRow>,
    pub targets: Vec<Region>,
    pub chain: Option<AnnulusChain>,
    pub schedule: Option<PauseSchedule>,
    pub oscillations: Option<OscillationSummary>,
    pub precision_bits: usize,
    pub trace: RefinementTrace,
    pub notes: Vec<String>,
}

impl ConstructionReport {
    /// Every row from n0 on holds at both precisions.
    pub fn holds(&self) -> bool {
        self.n0.is_some_and(|n0| {
            self.rows
                .iter()
                .filter(|r| r.n >= n0)
                .all(|r| r.ok && r.ok_doubled)
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(BandRow::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}

/// ln|fⁿ(ζ)| for n = 0..=horizon at the given precision; +inf past a pole or overflow.
pub(crate) fn orbit_ln_abs(
    map: &MapDescriptor,
    zeta: &HpComplex,
    horizon: usize,
    bits: usize,
) -> Vec<f64> {
    let rec = map.orbit(zeta, horizon, bits, f64::MAX);
    let mut out = vec![zeta.ln_abs()];
    out.extend(rec.entries.iter().map(|e| {
        if e.is_finite() {
            e.log_magnitude
        } else {
            f64::INFINITY
        }
    }));
    out.resize(horizon + 1, f64::INFINITY);
    out
}

/// First n such that every row from n on holds, if any.
pub(crate) fn first_good_index(ok: &[bool]) -> Option<usize> {
    let last_bad = ok.iter().rposition(|b| !b);
    match last_bad {
        None => Some(0),
        Some(i) if i + 1 < ok.len() => Some(i + 1),
        Some(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minorant_examples() {
        assert_eq!(
            monotone_minorant(&[5.0, 3.0, 4.0, 6.0]).unwrap(),
            vec![3.0, 3.0, 4.0, 6.0]
        );
        let inc = vec![1.0, 2.0, 3.0];
        assert_eq!(monotone_minorant(&inc).unwrap(), inc);
        assert!(monotone_minorant(&[]).is_err());
        assert!(monotone_minorant(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn minorant_matches_brute_force_on_wiggly_sequence() {
        let a: Vec<f64> = (0..=100)
            .map(|n| 10.0 + (n as f64).sin() + n as f64 / 10.0)
            .collect();
        let m = monotone_minorant(&a).unwrap();
        for n in 0..a.len() {
            let brute = a[n..].iter().copied().fold(f64::INFINITY, f64::min);
            assert_eq!(m[n], brute);
        }
    }

    proptest! {
        #[test]
        fn minorant_is_increasing_and_below(a in prop::collection::vec(0.01f64..1e6, 1..80)) {
            let m = monotone_minorant(&a).unwrap();
            for n in 0..a.len() {
                prop_assert!(m[n] <= a[n]);
                prop_assert_eq!(m[n], a[n..].iter().copied().fold(f64::INFINITY, f64::min));
                if n > 0 { prop_assert!(m[n - 1] <= m[n]); }
            }
        }
    }

    #[test]
    fn first_good_index_cases() {
        assert_eq!(first_good_index(&[true, true]), Some(0));
        assert_eq!(first_good_index(&[false, true, false, true]), Some(3));
        assert_eq!(first_good_index(&[true, false]), None);
    }

    #[test]
    fn scaled_parameter_validation() {
        assert!(ScaledParameters::default().validate().is_ok());
        let bad = ScaledParameters {
            k0: 6.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ScaledParameters {
            r0: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
