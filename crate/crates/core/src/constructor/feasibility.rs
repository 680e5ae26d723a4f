//! Where does the small-minimum-modulus mechanism fail? Flags radii with m(r) > M(r)^c.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::MapDescriptor;
use crate::error::{Error, Result};
use crate::radial::{self, Spacing};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRow {
    pub r: f64,
    pub ln_min: f64,
    pub ln_max: f64,
    /// ln m − c ln M; positive means flagged.
    pub excess: f64,
    pub flagged: bool,
}

impl FeasibilityRow {
    pub const CSV_HEADER: &'static str = "r,ln_min,ln_max,excess,flagged";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.r, self.ln_min, self.ln_max, self.excess, self.flagged
        )
    }
}

/// Maximal runs of consecutive flagged sample radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlaggedInterval {
    pub r_start: f64,
    pub r_end: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub map: String,
    pub c: f64,
    pub rows: Vec<FeasibilityRow>,
    pub intervals: Vec<FlaggedInterval>,
}

pub fn feasibility_check(
    map: &MapDescriptor,
    r_lo: f64,
    r_hi: f64,
    c: f64,
    n_annuli: usize,
) -> Result<FeasibilityReport> {
    if !(r_lo > 0.0 && r_lo < r_hi) || n_annuli < 2 {
        return Err(Error::invalid(
            "feasibility_check needs 0 < r_lo < r_hi and at least 2 radii",
        ));
    }
    let rs = radial::radii(r_lo, r_hi, n_annuli, Spacing::Log);
    let rows: Vec<FeasibilityRow> = rs
        .par_iter()
        .map(|&r| {
            let lm = radial::ln_min_modulus(map, r);
            let l_max = radial::ln_max_modulus(map, r);
            let excess = lm - c * l_max;
            FeasibilityRow {
                r,
                ln_min: lm,
                ln_max: l_max,
                excess,
                flagged: excess > 0.0,
            }
        })
        .collect();
    let mut intervals: Vec<FlaggedInterval> = vec![];
    let mut open = false;
    for row in &rows {
        match (row.flagged, open) {
            (true, true) => {
                let last = intervals.last_mut().expect("open interval");
                last.r_end = row.r;
                last.samples += 1;
            }
            (true, false) => intervals.push(FlaggedInterval {
                r_start: row.r,
                r_end: row.r,
                samples: 1,
            }),
            _ => {}
        }
        open = row.flagged;
    }
    Ok(FeasibilityReport {
        map: map.label.clone(),
        c,
        rows,
        intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Family, MapParams};

    #[test]
    fn exp_is_never_flagged() {
        let e = MapDescriptor::exp(1.0);
        for c in [0.0, 0.25, 1.0] {
            assert!(feasibility_check(&e, 1.0, 1e3, c, 40)
                .unwrap()
                .intervals
                .is_empty());
        }
    }

    #[test]
    fn large_constant_term_is_flagged() {
        let p = MapDescriptor::new(
            Family::PolyExp,
            MapParams::poly_exp(&[1e6, 0.0, 0.0, 1.0], &[], 0.0),
        )
        .unwrap();
        let rep = feasibility_check(&p, 5.0, 20.0, 0.5, 16).unwrap();
        assert!(!rep.intervals.is_empty());
        assert!(
            rep.rows
                .iter()
                .find(|r| (r.r - 10.0).abs() < 2.0)
                .unwrap()
                .flagged
        );
    }

    #[test]
    fn quarter_cos_has_flagged_intervals() {
        let q = MapDescriptor::simple(Family::QuarterCos);
        let rep = feasibility_check(&q, 1e2, 1e6, 0.25, 48).unwrap();
        assert!(!rep.intervals.is_empty());
    }

    #[test]
    fn bad_range_is_rejected() {
        let e = MapDescriptor::exp(1.0);
        assert!(feasibility_check(&e, 2.0, 1.0, 0.5, 10).is_err());
    }
}
