//! Pause bookkeeping: how long the orbit idles on each loop annulus.

use serde::{Deserialize, Serialize};

use super::{AnnulusChain, NO_LOOP_AVAILABLE};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    /// f²(A) ⊇ A.
    TwoStep,
    /// A 60-link cycle through pole discs.
    Cycle60,
    /// f(A) ⊇ A.
    #[serde(rename = "self")]
    SelfLoop,
}

impl LoopKind {
    /// Pause lengths must be multiples of this.
    pub fn unit(self) -> usize {
        match self {
            LoopKind::TwoStep => 2,
            LoopKind::Cycle60 => 60,
            LoopKind::SelfLoop => 1,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "two_step" => Ok(LoopKind::TwoStep),
            "cycle60" => Ok(LoopKind::Cycle60),
            "self" => Ok(LoopKind::SelfLoop),
            _ => Err(Error::invalid(format!(
                "unknown loop kind `{s}` (two_step|cycle60|self)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PauseSchedule {
    pub loop_kind: LoopKind,
    /// m(j): chain index of pause j.
    pub loop_indices: Vec<usize>,
    /// d(j).
    pub pause_lengths: Vec<usize>,
    /// p(j) = d(1) + … + d(j).
    pub cumulative: Vec<usize>,
    /// n(j): first n with the pause annulus inside B(0, a′ₙ); `None` past the prefix.
    pub trigger_indices: Vec<Option<usize>>,
    /// The last pause never ends: there is no later loop, or its trigger lies
    /// beyond the sequence prefix.
    pub open_ended: bool,
}

impl PauseSchedule {
    /// Checks multiplicity, cumulative sums and the trigger constraint exactly.
    pub fn check(&self) -> std::result::Result<(), String> {
        let j = self.loop_indices.len();
        if self.pause_lengths.len() != j
            || self.cumulative.len() != j
            || self.trigger_indices.len() != j
        {
            return Err("schedule vectors differ in length".into());
        }
        let unit = self.loop_kind.unit();
        let mut p = 0usize;
        for i in 0..j {
            let d = self.pause_lengths[i];
            if d == 0 || d % unit != 0 {
                return Err(format!(
                    "d({}) = {d} is not a positive multiple of {unit}",
                    i + 1
                ));
            }
            p += d;
            if self.cumulative[i] != p {
                return Err(format!(
                    "p({}) = {} but the partial sum is {p}",
                    i + 1,
                    self.cumulative[i]
                ));
            }
            if i > 0 {
                if self.loop_indices[i] <= self.loop_indices[i - 1] {
                    return Err("loop indices must increase".into());
                }
                let n_j = self.trigger_indices[i].ok_or_else(|| format!("n({}) missing", i + 1))?;
                if self.loop_indices[i - 1] + self.cumulative[i - 1] < n_j {
                    return Err(format!("m({i}) + p({i}) < n({})", i + 1));
                }
            }
        }
        Ok(())
    }

    /// Chain index occupied at each time 0..=horizon, or `None` if the
    /// schedule runs off the end of a chain with `chain_len` annuli.
    pub fn layout(&self, horizon: usize, chain_len: usize) -> Option<Vec<usize>> {
        let mut out = Vec::with_capacity(horizon + 1);
        let mut m = 0usize;
        let mut j = 0usize;
        let mut paused = 0usize;
        while out.len() <= horizon {
            if m >= chain_len {
                return None;
            }
            out.push(m);
            let pausing_here = j < self.loop_indices.len() && self.loop_indices[j] == m;
            if pausing_here {
                let last_open = self.open_ended && j + 1 == self.loop_indices.len();
                if last_open || paused < self.pause_lengths[j] {
                    paused += 1;
                    continue;
                }
                j += 1;
                paused = 0;
            }
            m += 1;
        }
        Some(out)
    }
}

/// Minimal pauses for a chain whose annuli have outer radii e^{ln_outer[m]},
/// against a nondecreasing bound with ln a′ₙ = ln_a[n]. Pauses happen at every
/// index with `loops[m]`; a missing trigger truncates the schedule (open end).
pub fn schedule_pauses_ln(
    ln_outer: &[f64],
    ln_a: &[f64],
    kind: LoopKind,
    loops: &[bool],
) -> Result<PauseSchedule> {
    if ln_outer.len() != loops.len() {
        return Err(Error::invalid("one loop flag per chain annulus"));
    }
    if ln_a.is_empty() || ln_a.windows(2).any(|w| w[1] < w[0]) || ln_a.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("a′ must be a nonempty nondecreasing prefix"));
    }
    let idx: Vec<usize> = loops
        .iter()
        .enumerate()
        .filter(|(_, l)| **l)
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        return Err(Error::refused(
            NO_LOOP_AVAILABLE,
            format!(
                "no certified {kind:?} loop on any of {} chain annuli",
                loops.len()
            ),
        ));
    }
    let trigger = |m: usize| ln_a.iter().position(|la| *la >= ln_outer[m]);
    let unit = kind.unit();
    let mut s = PauseSchedule {
        loop_kind: kind,
        loop_indices: vec![idx[0]],
        pause_lengths: vec![],
        cumulative: vec![],
        trigger_indices: vec![trigger(idx[0])],
        open_ended: false,
    };
    let mut p_prev = 0usize;
    for w in 0..idx.len() {
        let m = idx[w];
        let d = match idx.get(w + 1).map(|&next| (next, trigger(next))) {
            Some((next, Some(n_next))) => {
                let need = n_next.saturating_sub(m + p_prev);
                let d = need.div_ceil(unit).max(1) * unit;
                s.loop_indices.push(next);
                s.trigger_indices.push(Some(n_next));
                d
            }
            Some((_, None)) => {
                s.open_ended = true;
                unit
            }
            None => {
                // No later loop exists, so the last pause lasts as long as needed.
                s.open_ended = true;
                unit
            }
        };
        p_prev += d;
        s.pause_lengths.push(d);
        s.cumulative.push(p_prev);
        if s.open_ended {
            break;
        }
    }
    debug_assert!(s.check().is_ok(), "{:?}", s.check());
    Ok(s)
}

/// [`schedule_pauses_ln`] using the chain's outer radii and its certified loops of `kind`.
pub fn schedule_pauses(
    chain: &AnnulusChain,
    a_prime: &[f64],
    kind: LoopKind,
) -> Result<PauseSchedule> {
    let ln_outer: Vec<f64> = chain.steps.iter().map(|s| s.annulus.ln_r_out).collect();
    let loops: Vec<bool> = chain
        .steps
        .iter()
        .map(|s| s.loops.iter().any(|l| l.kind == kind && l.is_certified()))
        .collect();
    let ln_a: Vec<f64> = a_prime.iter().map(|a| a.ln()).collect();
    schedule_pauses_ln(&ln_outer, &ln_a, kind, &loops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ln10s(n: usize) -> Vec<f64> {
        (0..n).map(|m| 10f64.powi(m as i32).ln()).collect()
    }

    #[test]
    fn fast_bound_gives_minimal_pauses() {
        let ln_a: Vec<f64> = (0..50).map(|n| 1e3 * (n as f64 + 1.0)).collect();
        for kind in [LoopKind::TwoStep, LoopKind::Cycle60] {
            let s = schedule_pauses_ln(&ln10s(5), &ln_a, kind, &[true; 5]).unwrap();
            assert!(s.pause_lengths.iter().all(|d| *d == kind.unit()));
            assert!(s.open_ended);
            s.check().unwrap();
        }
    }

    /// Smallest even d with m(j-1) + p(j-1) >= n(j), by search.
    fn brute(m: &[usize], n: &[usize]) -> Vec<usize> {
        let mut p = 0;
        let mut out = vec![];
        for j in 1..m.len() {
            let mut d = 2;
            while m[j - 1] + p + d < n[j] {
                d += 2;
            }
            p += d;
            out.push(d);
        }
        out
    }

    #[test]
    fn powers_of_ten_against_linear_bound() {
        // r_m = 10^m, a′ₙ = n, two-step loops everywhere.
        let ln_a: Vec<f64> = (0..20000).map(|n| (n as f64).ln()).collect();
        let s = schedule_pauses_ln(&ln10s(5), &ln_a, LoopKind::TwoStep, &[true; 5]).unwrap();
        assert_eq!(s.loop_indices, vec![0, 1, 2, 3, 4]);
        assert_eq!(
            s.trigger_indices,
            vec![Some(1), Some(10), Some(100), Some(1000), Some(10000)]
        );
        let expect = brute(&[0, 1, 2, 3, 4], &[1, 10, 100, 1000, 10000]);
        assert_eq!(&s.pause_lengths[..4], &expect[..]);
        assert_eq!(&s.pause_lengths[..2], &[10, 90]);
        s.check().unwrap();
    }

    #[test]
    fn missing_loops_refuse() {
        let e = schedule_pauses_ln(&ln10s(3), &[1.0, 2.0], LoopKind::SelfLoop, &[false; 3])
            .unwrap_err();
        assert_eq!(e.reason(), Some(NO_LOOP_AVAILABLE));
    }

    #[test]
    fn short_prefix_leaves_last_pause_open() {
        let ln_a = vec![3.0f64.ln(); 10];
        let s = schedule_pauses_ln(&ln10s(3), &ln_a, LoopKind::SelfLoop, &[true; 3]).unwrap();
        assert!(s.open_ended);
        assert_eq!(s.loop_indices, vec![0]);
        assert_eq!(s.layout(6, 3).unwrap(), vec![0; 7]);
    }

    #[test]
    fn layout_walks_and_pauses() {
        let s = PauseSchedule {
            loop_kind: LoopKind::TwoStep,
            loop_indices: vec![1, 3],
            pause_lengths: vec![2, 4],
            cumulative: vec![2, 6],
            trigger_indices: vec![Some(0), Some(3)],
            open_ended: false,
        };
        s.check().unwrap();
        assert_eq!(
            s.layout(10, 5).unwrap(),
            vec![0, 1, 1, 1, 2, 3, 3, 3, 3, 3, 4]
        );
        assert!(s.layout(20, 5).is_none());
    }

    proptest! {
        #[test]
        fn random_schedules_satisfy_invariants(
            steps in prop::collection::vec(0.1f64..3.0, 2..12),
            growth in 0.01f64..2.0,
            mask in prop::collection::vec(any::<bool>(), 12),
            kind in prop_oneof![Just(LoopKind::TwoStep), Just(LoopKind::Cycle60), Just(LoopKind::SelfLoop)],
        ) {
            let mut ln_outer = vec![];
            let mut acc = 0.0;
            for s in &steps { acc += s; ln_outer.push(acc); }
            let loops: Vec<bool> = mask[..ln_outer.len()].to_vec();
            let ln_a: Vec<f64> = (0..400).map(|n| growth * (n as f64 + 1.0).ln() * 3.0).collect();
            match schedule_pauses_ln(&ln_outer, &ln_a, kind, &loops) {
                Ok(s) => {
                    prop_assert!(s.check().is_ok());
                    // minimality: one unit less would break the trigger constraint
                    for j in 1..s.loop_indices.len() {
                        let d = s.pause_lengths[j - 1];
                        if d > kind.unit() {
                            let n_j = s.trigger_indices[j].unwrap();
                            prop_assert!(s.loop_indices[j - 1] + s.cumulative[j - 1] - kind.unit() < n_j);
                        }
                    }
                }
                Err(e) => prop_assert!(!loops.iter().any(|l| *l) && e.reason() == Some(NO_LOOP_AVAILABLE)),
            }
        }
    }
}
