//! Finite-horizon escape-rate bands.
//!
//! The asymptotic sets (fast escaping, zipping, slow, moderately slow) are
//! replaced by sup-over-the-computed-range statistics with explicit caps, so
//! every class here is a band, not a membership proof.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::catalog::{ExtEval, MapDescriptor, DEFAULT_OVERFLOW_CAP};
use crate::error::{Error, Result};
use crate::ext::ExtComplex;
use crate::radial;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierParams {
    pub n_max: usize,
    /// Base radius of the iterated maximum modulus; `None` means 1 + the family's scale.
    pub base_radius: Option<f64>,
    /// Largest lag tried in the fast-escape comparison.
    pub l_lag: usize,
    pub l_rate_cap: f64,
    pub m_rate_cap: f64,
    pub z_rate_floor: f64,
    /// ln-modulus beyond which an orbit is treated as overflowed.
    pub overflow_cap: f64,
    pub escape_radius: f64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams {
            n_max: 200,
            base_radius: None,
            l_lag: 3,
            l_rate_cap: 2.0,
            m_rate_cap: 2.0,
            z_rate_floor: 1.0,
            overflow_cap: DEFAULT_OVERFLOW_CAP,
            escape_radius: 1e2,
        }
    }
}

impl ClassifierParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_max < 10 {
            return Err(Error::invalid("n_max must be at least 10"));
        }
        if self.base_radius.is_some_and(|r| !(r > 0.0)) {
            return Err(Error::invalid("base radius must be positive"));
        }
        if !(self.l_rate_cap > 0.0 && self.l_rate_cap.is_finite()) {
            return Err(Error::invalid("L rate cap must be positive and finite"));
        }
        if !(self.escape_radius > 0.0 && self.overflow_cap > self.escape_radius.ln()) {
            return Err(Error::invalid("need 0 < ln(escape radius) < overflow cap"));
        }
        Ok(())
    }

    pub fn radius_for(&self, map: &MapDescriptor) -> f64 {
        self.base_radius.unwrap_or(1.0 + map.family.scale())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapeClass {
    PoleHit,
    NonEscaping,
    SlowL,
    ModerateM,
    ZipZ,
    FastA,
    Undetermined,
}

impl EscapeClass {
    pub const ALL: [EscapeClass; 7] = [
        EscapeClass::PoleHit,
        EscapeClass::NonEscaping,
        EscapeClass::SlowL,
        EscapeClass::ModerateM,
        EscapeClass::ZipZ,
        EscapeClass::FastA,
        EscapeClass::Undetermined,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EscapeClass::PoleHit => "pole_hit",
            EscapeClass::NonEscaping => "non_escaping",
            EscapeClass::SlowL => "slow_L",
            EscapeClass::ModerateM => "moderate_M",
            EscapeClass::ZipZ => "zip_Z",
            EscapeClass::FastA => "fast_A",
            EscapeClass::Undetermined => "undetermined",
        }
    }

    /// Output label; escape classes carry a `_band` suffix.
    pub fn label(self) -> String {
        match self {
            EscapeClass::PoleHit | EscapeClass::NonEscaping | EscapeClass::Undetermined => {
                self.name().to_string()
            }
            _ => format!("{}_band", self.name()),
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }

    pub fn color(self) -> [u8; 3] {
        match self {
            EscapeClass::PoleHit => [255, 255, 255],
            EscapeClass::NonEscaping => [20, 20, 60],
            EscapeClass::SlowL => [60, 180, 75],
            EscapeClass::ModerateM => [255, 225, 25],
            EscapeClass::ZipZ => [245, 130, 48],
            EscapeClass::FastA => [230, 25, 75],
            EscapeClass::Undetermined => [128, 128, 128],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateClass {
    pub class: EscapeClass,
    pub label: String,
    /// sup over 1 ≤ n ≤ n_reached of (1/n) ln|fⁿ(z)|.
    pub sup_ln_rate: f64,
    /// sup over the same range of (1/n) ln ln|fⁿ(z)| (where ln|fⁿ| > 1).
    pub sup_lnln_rate: f64,
    /// The same statistics over the second half of the computed range.
    pub tail_ln_rate: f64,
    pub tail_lnln_rate: f64,
    pub n_reached: usize,
    /// First n with |fⁿ(z)| above the escape radius.
    pub escaped_at: Option<usize>,
    /// Lag for which the fast-escape comparison held.
    pub fast_lag: Option<usize>,
}

/// Log-domain table tₖ = ln Mᵏ(R) for k = 1..=n, saturating at `cap`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxModulusTable {
    pub base_radius: f64,
    pub ln_values: Vec<f64>,
    /// First level whose value hit the cap (that level and later read `cap`).
    pub saturated_from: Option<usize>,
    pub cap: f64,
}

pub fn iterate_max_modulus(
    map: &MapDescriptor,
    r: f64,
    n: usize,
    cap: f64,
) -> Result<MaxModulusTable> {
    if !(r > 0.0) {
        return Err(Error::invalid("base radius must be positive"));
    }
    let mut t = r.ln();
    let mut ln_values = Vec::with_capacity(n);
    let mut saturated_from = None;
    for k in 1..=n {
        if saturated_from.is_none() {
            let v = if t > cap {
                f64::INFINITY
            } else {
                radial::max_modulus_ln(map, t, 1e-12)?.ln_value
            };
            if v.is_finite() && v < cap {
                t = v;
            } else {
                saturated_from = Some(k);
            }
        }
        ln_values.push(if saturated_from.is_some() { cap } else { t });
    }
    Ok(MaxModulusTable {
        base_radius: r,
        ln_values,
        saturated_from,
        cap,
    })
}

enum Track {
    Pole,
    Values(Vec<f64>, bool),
}

/// ln|fⁿ(z)| for n = 1.. until the horizon, a pole, or overflow (flagged).
fn ln_track(map: &MapDescriptor, z: Complex64, params: &ClassifierParams) -> Track {
    let mut cur = ExtComplex::from_c64(z);
    let mut out = Vec::with_capacity(params.n_max);
    for _ in 0..params.n_max {
        match map.eval_ext(&cur, params.overflow_cap) {
            ExtEval::Finite(v) => {
                out.push(v.ln_abs());
                cur = v;
            }
            ExtEval::PoleHit(_) => return Track::Pole,
            ExtEval::Overflow(l) => {
                out.push(l.max(params.overflow_cap));
                return Track::Values(out, true);
            }
        }
    }
    Track::Values(out, false)
}

fn sup_rates(track: &[f64], from: usize) -> (f64, f64) {
    let mut a = f64::NEG_INFINITY;
    let mut b = f64::NEG_INFINITY;
    for (i, &l) in track.iter().enumerate().skip(from) {
        let n = (i + 1) as f64;
        a = a.max(l / n);
        if l > 1.0 {
            b = b.max(l.ln() / n);
        }
    }
    (a, b)
}

/// Whether ln|f^{n+L}| > ln Mⁿ(R) at every comparable n ≥ 1, for some L ≤ l_lag.
fn fast_lag(
    track: &[f64],
    overflowed: bool,
    table: &MaxModulusTable,
    l_lag: usize,
) -> Option<usize> {
    (0..=l_lag).find(|&lag| {
        let mut compared = 0;
        for n in 1..=table.ln_values.len() {
            let Some(&orbit) = track.get(n + lag - 1) else {
                break;
            };
            if table.saturated_from.is_some_and(|s| n >= s) {
                break;
            }
            let orbit_overflow = overflowed && n + lag == track.len();
            if !(orbit_overflow || orbit > table.ln_values[n - 1]) {
                return false;
            }
            compared += 1;
        }
        compared >= 2
    })
}

/// Decision order: pole hit, non-escaping, fast, zipping, slow, moderate, undetermined.
pub fn classify_orbit(map: &MapDescriptor, z: Complex64, params: &ClassifierParams) -> RateClass {
    let table = iterate_max_modulus(
        map,
        params.radius_for(map),
        params.n_max,
        params.overflow_cap,
    )
    .ok();
    classify_with_table(map, z, params, table.as_ref())
}

/// [`classify_orbit`] with a precomputed max-modulus table (shared across pixels).
pub fn classify_with_table(
    map: &MapDescriptor,
    z: Complex64,
    params: &ClassifierParams,
    table: Option<&MaxModulusTable>,
) -> RateClass {
    let mk = |class: EscapeClass, track: &[f64], escaped_at, fast_lag| {
        let (sa, sb) = sup_rates(track, 0);
        let (ta, tb) = sup_rates(track, track.len() / 2);
        RateClass {
            class,
            label: class.label(),
            sup_ln_rate: sa,
            sup_lnln_rate: sb,
            tail_ln_rate: ta,
            tail_lnln_rate: tb,
            n_reached: track.len(),
            escaped_at,
            fast_lag,
        }
    };
    let (track, overflowed) = match ln_track(map, z, params) {
        Track::Pole => return mk(EscapeClass::PoleHit, &[], None, None),
        Track::Values(t, o) => (t, o),
    };
    let ln_esc = params.escape_radius.ln();
    let Some(esc) = track.iter().position(|l| *l > ln_esc) else {
        return mk(EscapeClass::NonEscaping, &track, None, None);
    };
    let escaped_at = Some(esc + 1);
    if let Some(lag) = table.and_then(|t| fast_lag(&track, overflowed, t, params.l_lag)) {
        return mk(EscapeClass::FastA, &track, escaped_at, Some(lag));
    }
    let (_, tail_b) = sup_rates(&track, track.len() / 2);
    let n = track.len();
    let lnln: Vec<f64> = track
        .iter()
        .enumerate()
        .map(|(i, l)| {
            if *l > 1.0 {
                l.ln() / (i + 1) as f64
            } else {
                f64::NAN
            }
        })
        .collect();
    let third = &lnln[(2 * n) / 3..];
    let increasing = third.len() >= 2 && third.windows(2).all(|w| w[1] > w[0]);
    if lnln.last().is_some_and(|x| *x > params.z_rate_floor) && increasing {
        return mk(EscapeClass::ZipZ, &track, escaped_at, None);
    }
    let (tail_a, _) = sup_rates(&track, n / 2);
    if tail_a <= params.l_rate_cap {
        return mk(EscapeClass::SlowL, &track, escaped_at, None);
    }
    if tail_b <= params.m_rate_cap {
        return mk(EscapeClass::ModerateM, &track, escaped_at, None);
    }
    mk(EscapeClass::Undetermined, &track, escaped_at, None)
}
