//! The example maps: descriptors, pole sets, evaluation and orbits.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, ParamError, Result};
use crate::ext::ExtComplex;
use crate::hp::HpComplex;
use crate::scalar::Scalar;

pub const DEFAULT_OVERFLOW_CAP: f64 = 1e6;
pub const DEFAULT_PRECISION: usize = 256;
const POLE_EXCLUSION: f64 = 1e-12;
const GUARD_BITS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ExpScaled,
    FatouBaker,
    SineShift,
    ExpShift,
    QuarterCos,
    BergweilerBaker,
    SinPole,
    HalfTan,
    PolyExp,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::ExpScaled,
        Family::FatouBaker,
        Family::SineShift,
        Family::ExpShift,
        Family::QuarterCos,
        Family::BergweilerBaker,
        Family::SinPole,
        Family::HalfTan,
        Family::PolyExp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::ExpScaled => "exp_scaled",
            Family::FatouBaker => "fatou_baker",
            Family::SineShift => "sine_shift",
            Family::ExpShift => "exp_shift",
            Family::QuarterCos => "quarter_cos",
            Family::BergweilerBaker => "bergweiler_baker",
            Family::SinPole => "sin_pole",
            Family::HalfTan => "half_tan",
            Family::PolyExp => "poly_exp",
        }
    }

    pub fn formula(self) -> &'static str {
        match self {
            Family::ExpScaled => "lambda * exp(z)",
            Family::FatouBaker => "z + 1 + exp(-z)",
            Family::SineShift => "z + sin(z) + 2pi",
            Family::ExpShift => "z + exp(-z) + 2pi i",
            Family::QuarterCos => "(cos(z^(1/4)) + cosh(z^(1/4))) / 2",
            Family::BergweilerBaker => "2z + 2 - ln 2 - exp(z)",
            Family::SinPole => "lambda * sin(z) - epsilon / (z - pi)",
            Family::HalfTan => "tan(z) / 2",
            Family::PolyExp => "p(z) + q(z) * exp(c z)",
        }
    }

    /// Characteristic length used for default radii (e.g. the classifier's R).
    pub fn scale(self) -> f64 {
        match self {
            Family::SineShift | Family::ExpShift | Family::SinPole => PI,
            Family::HalfTan => FRAC_PI_2,
            _ => 1.0,
        }
    }
}

impl FromStr for Family {
    type Err = ParamError;
    fn from_str(s: &str) -> std::result::Result<Self, ParamError> {
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| ParamError::UnknownFamily(s.to_string()))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Complex numbers in configs: either a bare real or `[re, im]`.
pub mod cplx {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Real(f64),
        Pair([f64; 2]),
    }

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if z.im == 0.0 {
            Repr::Real(z.re).serialize(s)
        } else {
            Repr::Pair([z.re, z.im]).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Complex64, D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Real(x) => Complex64::new(x, 0.0),
            Repr::Pair([a, b]) => Complex64::new(a, b),
        })
    }

    pub mod opt {
        use super::*;
        pub fn serialize<S: Serializer>(
            z: &Option<Complex64>,
            s: S,
        ) -> std::result::Result<S::Ok, S::Error> {
            match z {
                Some(z) => super::serialize(z, s),
                None => s.serialize_none(),
            }
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> std::result::Result<Option<Complex64>, D::Error> {
            Ok(Option::<Repr>::deserialize(d)?.map(|r| match r {
                Repr::Real(x) => Complex64::new(x, 0.0),
                Repr::Pair([a, b]) => Complex64::new(a, b),
            }))
        }
    }

    pub mod vec {
        use super::*;
        pub fn serialize<S: Serializer>(
            v: &[Complex64],
            s: S,
        ) -> std::result::Result<S::Ok, S::Error> {
            let r: Vec<Repr> = v
                .iter()
                .map(|z| {
                    if z.im == 0.0 {
                        Repr::Real(z.re)
                    } else {
                        Repr::Pair([z.re, z.im])
                    }
                })
                .collect();
            r.serialize(s)
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> std::result::Result<Vec<Complex64>, D::Error> {
            Ok(Vec::<Repr>::deserialize(d)?
                .into_iter()
                .map(|r| match r {
                    Repr::Real(x) => Complex64::new(x, 0.0),
                    Repr::Pair([a, b]) => Complex64::new(a, b),
                })
                .collect())
        }
    }
}

/// Family parameters. Unused fields are ignored by families that don't need them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    #[serde(default, with = "cplx::opt", skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Complex64>,
    #[serde(default, with = "cplx::opt", skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Complex64>,
    /// Coefficients of p, lowest degree first.
    #[serde(default, with = "cplx::vec", skip_serializing_if = "Vec::is_empty")]
    pub p: Vec<Complex64>,
    #[serde(default, with = "cplx::vec", skip_serializing_if = "Vec::is_empty")]
    pub q: Vec<Complex64>,
    #[serde(default, with = "cplx::opt", skip_serializing_if = "Option::is_none")]
    pub c: Option<Complex64>,
}

impl MapParams {
    pub fn lambda(l: f64) -> Self {
        MapParams {
            lambda: Some(Complex64::new(l, 0.0)),
            ..Default::default()
        }
    }

    pub fn sin_pole(lambda: f64, epsilon: f64) -> Self {
        MapParams {
            lambda: Some(Complex64::new(lambda, 0.0)),
            epsilon: Some(Complex64::new(epsilon, 0.0)),
            ..Default::default()
        }
    }

    /// Real polynomial p (lowest degree first), q = 0.
    pub fn poly(p: &[f64]) -> Self {
        MapParams {
            p: p.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            ..Default::default()
        }
    }

    pub fn poly_exp(p: &[f64], q: &[f64], c: f64) -> Self {
        MapParams {
            p: p.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            q: q.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            c: Some(Complex64::new(c, 0.0)),
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    #[serde(with = "cplx")]
    pub at: Complex64,
    pub order: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PoleSet {
    None,
    Finite {
        poles: Vec<Pole>,
    },
    /// `base + k * period` for every integer k.
    Periodic {
        #[serde(with = "cplx")]
        base: Complex64,
        #[serde(with = "cplx")]
        period: Complex64,
        order: u32,
    },
}

impl PoleSet {
    pub fn is_empty(&self) -> bool {
        matches!(self, PoleSet::None)
    }

    pub fn is_finite(&self) -> bool {
        !matches!(self, PoleSet::Periodic { .. })
    }

    /// Poles with |pole - center| <= radius.
    pub fn in_window(&self, center: Complex64, radius: f64) -> Vec<Pole> {
        match self {
            PoleSet::None => vec![],
            PoleSet::Finite { poles } => poles
                .iter()
                .copied()
                .filter(|p| (p.at - center).norm() <= radius)
                .collect(),
            PoleSet::Periodic {
                base,
                period,
                order,
            } => {
                // Project onto the lattice line, then scan the index range covering the window.
                let pn = period.norm();
                let t = ((center - base) / period).re;
                let span = (radius / pn).ceil() as i64 + 1;
                let k0 = t.round() as i64;
                (k0 - span..=k0 + span)
                    .map(|k| base + period * k as f64)
                    .filter(|p| (p - center).norm() <= radius)
                    .map(|at| Pole { at, order: *order })
                    .collect()
            }
        }
    }

    /// The pole closest to `z`, if any.
    pub fn nearest(&self, z: Complex64) -> Option<Pole> {
        match self {
            PoleSet::None => None,
            PoleSet::Finite { poles } => poles
                .iter()
                .copied()
                .min_by(|a, b| (a.at - z).norm().total_cmp(&(b.at - z).norm())),
            PoleSet::Periodic {
                base,
                period,
                order,
            } => {
                let t = ((z - base) / period).re;
                if !t.is_finite() {
                    return None;
                }
                let at = base + period * t.round();
                Some(Pole { at, order: *order })
            }
        }
    }

    /// Pole within the exclusion radius of `z`.
    pub fn hit(&self, z: Complex64) -> Option<Pole> {
        let p = self.nearest(z)?;
        if (z - p.at).norm() <= POLE_EXCLUSION * (1.0 + p.at.norm()) {
            Some(p)
        } else {
            None
        }
    }

    /// Distance from `z` to the pole set (infinite when there are none).
    pub fn distance(&self, z: Complex64) -> f64 {
        self.nearest(z).map_or(f64::INFINITY, |p| (z - p.at).norm())
    }
}

/// A catalog member with its parameters; immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct MapDescriptor {
    pub family: Family,
    pub params: MapParams,
    pub poles: PoleSet,
    pub label: String,
}

#[derive(Serialize, Deserialize)]
struct DescriptorWire {
    family: Family,
    #[serde(default)]
    params: MapParams,
    #[serde(default)]
    label: Option<String>,
}

impl Serialize for MapDescriptor {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DescriptorWire {
            family: self.family,
            params: self.params.clone(),
            label: Some(self.label.clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MapDescriptor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = DescriptorWire::deserialize(d)?;
        let mut m = make_map(w.family, w.params).map_err(serde::de::Error::custom)?;
        if let Some(l) = w.label {
            m.label = l;
        }
        Ok(m)
    }
}

fn need(v: Option<Complex64>, name: &str, family: Family) -> Result<Complex64> {
    let z = v.ok_or_else(|| ParamError::Inadmissible(format!("{family} requires `{name}`")))?;
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(ParamError::Inadmissible(format!("`{name}` must be finite")).into());
    }
    if z == Complex64::new(0.0, 0.0) {
        return Err(ParamError::Inadmissible(format!("`{name}` must be nonzero")).into());
    }
    Ok(z)
}

fn fmt_c(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

/// Builds a descriptor, checking family-specific admissibility.
pub fn make_map(family: Family, params: MapParams) -> Result<MapDescriptor> {
    let mut params = params;
    let (poles, label) = match family {
        Family::ExpScaled => {
            let l = need(params.lambda, "lambda", family)?;
            (PoleSet::None, format!("{} exp(z)", fmt_c(l)))
        }
        Family::SinPole => {
            let l = need(params.lambda, "lambda", family)?;
            let e = need(params.epsilon, "epsilon", family)?;
            (
                PoleSet::Finite {
                    poles: vec![Pole {
                        at: Complex64::new(PI, 0.0),
                        order: 1,
                    }],
                },
                format!("{} sin(z) - {}/(z - pi)", fmt_c(l), fmt_c(e)),
            )
        }
        Family::HalfTan => (
            PoleSet::Periodic {
                base: Complex64::new(FRAC_PI_2, 0.0),
                period: Complex64::new(PI, 0.0),
                order: 1,
            },
            family.formula().to_string(),
        ),
        Family::PolyExp => {
            let all = params
                .p
                .iter()
                .chain(params.q.iter())
                .chain(params.c.iter());
            if all.clone().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(ParamError::Inadmissible(
                    "poly_exp coefficients must be finite".into(),
                )
                .into());
            }
            while params.p.last() == Some(&Complex64::new(0.0, 0.0)) {
                params.p.pop();
            }
            while params.q.last() == Some(&Complex64::new(0.0, 0.0)) {
                params.q.pop();
            }
            let c = params.c.unwrap_or_default();
            let pl = poly_label(&params.p);
            let label = if params.q.is_empty() {
                pl
            } else {
                format!("{pl} + ({}) exp({} z)", poly_label(&params.q), fmt_c(c))
            };
            (PoleSet::None, label)
        }
        _ => (PoleSet::None, family.formula().to_string()),
    };
    Ok(MapDescriptor {
        family,
        params,
        poles,
        label,
    })
}

fn poly_label(p: &[Complex64]) -> String {
    let terms: Vec<String> = p
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != Complex64::new(0.0, 0.0))
        .map(|(k, a)| match k {
            0 => fmt_c(*a),
            1 => format!("{} z", fmt_c(*a)),
            _ => format!("{} z^{k}", fmt_c(*a)),
        })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalKind {
    Finite,
    PoleHit,
    Overflow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub kind: EvalKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<HpComplex>,
    pub log_magnitude: f64,
    #[serde(default, with = "cplx::opt", skip_serializing_if = "Option::is_none")]
    pub pole: Option<Complex64>,
}

impl EvalResult {
    pub fn is_finite(&self) -> bool {
        self.kind == EvalKind::Finite
    }
}

/// Fast-path evaluation result in extended-exponent doubles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtEval {
    Finite(ExtComplex),
    PoleHit(Complex64),
    Overflow(f64),
}

impl ExtEval {
    pub fn log_magnitude(&self) -> f64 {
        match self {
            ExtEval::Finite(v) => v.ln_abs(),
            ExtEval::PoleHit(_) => f64::INFINITY,
            ExtEval::Overflow(l) => *l,
        }
    }

    pub fn value(&self) -> Option<ExtComplex> {
        match self {
            ExtEval::Finite(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Horizon,
    PoleHit,
    Overflow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub start: HpComplex,
    pub entries: Vec<EvalResult>,
    pub stop_reason: StopReason,
    pub precision_bits: usize,
}

impl OrbitRecord {
    /// ln|f^n(z)| for n = 1..; overflow entries carry their lower bound.
    pub fn log_track(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.log_magnitude).collect()
    }
}

fn horner<S: Scalar>(coef: &[Complex64], z: &S) -> S {
    let mut acc = z.lift(Complex64::new(0.0, 0.0));
    for a in coef.iter().rev() {
        acc = acc.mul(z).add(&z.lift(*a));
    }
    acc
}

fn poly_deriv(coef: &[Complex64]) -> Vec<Complex64> {
    coef.iter()
        .enumerate()
        .skip(1)
        .map(|(k, a)| a * k as f64)
        .collect()
}

/// sum_{k>=1} k z^{k-1} / (4k)!, used for the quarter-cos derivative near 0.
fn quarter_cos_deriv_series<S: Scalar>(z: &S, bits: usize) -> S {
    let mut term = z.lift(Complex64::new(1.0 / 24.0, 0.0)); // k = 1: 1/4!
    let mut acc = term.clone();
    let mut ln_fact = 24f64.ln();
    for k in 2..400usize {
        // z^{k-1}/(4k)! from z^{k-2}/(4k-4)!
        let f = ((4 * k - 3) * (4 * k - 2) * (4 * k - 1) * 4 * k) as f64;
        ln_fact += f.ln();
        term = term.mul(z).div(&z.lift(Complex64::new(f, 0.0)));
        acc = acc.add(&term.scale(k as f64));
        if ln_fact / std::f64::consts::LN_2 > bits as f64 + 16.0 {
            break;
        }
    }
    acc
}

impl MapDescriptor {
    pub fn new(family: Family, params: MapParams) -> Result<Self> {
        make_map(family, params)
    }

    pub fn from_name(name: &str, params: MapParams) -> Result<Self> {
        let family: Family = name.parse().map_err(Error::Param)?;
        make_map(family, params)
    }

    pub fn exp(lambda: f64) -> Self {
        make_map(Family::ExpScaled, MapParams::lambda(lambda)).expect("nonzero lambda")
    }

    /// z^d as a poly_exp instance.
    pub fn monomial(d: usize) -> Self {
        let mut p = vec![0.0; d + 1];
        p[d] = 1.0;
        make_map(Family::PolyExp, MapParams::poly(&p)).expect("finite coefficients")
    }

    pub fn simple(family: Family) -> Self {
        let params = match family {
            Family::ExpScaled => MapParams::lambda(1.0),
            Family::SinPole => MapParams::sin_pole(0.5, 0.01),
            Family::PolyExp => MapParams::poly(&[0.0, 0.0, 1.0]),
            _ => MapParams::default(),
        };
        make_map(family, params).expect("default parameters are admissible")
    }

    pub fn is_entire(&self) -> bool {
        self.poles.is_empty()
    }

    fn lambda(&self) -> Complex64 {
        self.params.lambda.unwrap_or(Complex64::new(1.0, 0.0))
    }

    /// Nominal oscillation count per unit radius on circles, for sampling density.
    pub fn angular_rate(&self) -> f64 {
        match self.family {
            Family::ExpScaled => 0.0,
            Family::QuarterCos => 0.0,
            Family::PolyExp => self.params.c.map_or(0.0, |c| c.norm()),
            _ => 1.0,
        }
    }

    /// The closed form, generic over the number type. Poles are the caller's concern.
    pub fn apply<S: Scalar>(&self, z: &S) -> S {
        let c = |x: f64| z.lift(Complex64::new(x, 0.0));
        match self.family {
            Family::ExpScaled => z.exp().mul(&z.lift(self.lambda())),
            Family::FatouBaker => z.add(&c(1.0)).add(&z.neg().exp()),
            Family::SineShift => z.add(&z.sin()).add(&z.pi().scale(2.0)),
            Family::ExpShift => {
                let two_pi_i = z.pi().scale(2.0).mul(&z.lift(Complex64::new(0.0, 1.0)));
                z.add(&z.neg().exp()).add(&two_pi_i)
            }
            Family::QuarterCos => {
                let w = z.sqrt().sqrt();
                w.cos().add(&w.cosh()).scale(0.5)
            }
            Family::BergweilerBaker => z.scale(2.0).add(&c(2.0)).sub(&z.ln2()).sub(&z.exp()),
            Family::SinPole => {
                let eps = z.lift(self.params.epsilon.unwrap_or_default());
                z.sin()
                    .mul(&z.lift(self.lambda()))
                    .sub(&eps.div(&z.sub(&z.pi())))
            }
            Family::HalfTan => z.tan().scale(0.5),
            Family::PolyExp => {
                let p = horner(&self.params.p, z);
                if self.params.q.is_empty() {
                    return p;
                }
                let cz = z.mul(&z.lift(self.params.c.unwrap_or_default()));
                p.add(&horner(&self.params.q, z).mul(&cz.exp()))
            }
        }
    }

    pub fn apply_derivative<S: Scalar>(&self, z: &S, bits: usize) -> S {
        let c = |x: f64| z.lift(Complex64::new(x, 0.0));
        match self.family {
            Family::ExpScaled => z.exp().mul(&z.lift(self.lambda())),
            Family::FatouBaker | Family::ExpShift => c(1.0).sub(&z.neg().exp()),
            Family::SineShift => c(1.0).add(&z.cos()),
            Family::QuarterCos => {
                if z.ln_abs() <= 0.0 {
                    quarter_cos_deriv_series(z, bits)
                } else {
                    let w = z.sqrt().sqrt();
                    w.sinh().sub(&w.sin()).mul(&w).div(&z.scale(4.0)).scale(0.5)
                }
            }
            Family::BergweilerBaker => c(2.0).sub(&z.exp()),
            Family::SinPole => {
                let eps = z.lift(self.params.epsilon.unwrap_or_default());
                let d = z.sub(&z.pi());
                z.cos().mul(&z.lift(self.lambda())).add(&eps.div(&d.sq()))
            }
            Family::HalfTan => c(1.0).add(&z.tan().sq()).scale(0.5),
            Family::PolyExp => {
                let dp = horner(&poly_deriv(&self.params.p), z);
                if self.params.q.is_empty() {
                    return dp;
                }
                let cc = self.params.c.unwrap_or_default();
                let cz = z.mul(&z.lift(cc));
                let inner = horner(&poly_deriv(&self.params.q), z)
                    .add(&horner(&self.params.q, z).mul(&z.lift(cc)));
                dp.add(&inner.mul(&cz.exp()))
            }
        }
    }

    fn pole_at(&self, z: &ExtComplex) -> Option<Pole> {
        if self.poles.is_empty() || z.ln_abs() > 700.0 {
            return None;
        }
        self.poles.hit(z.to_c64())
    }

    /// Double-exponent evaluation (53-bit mantissa) for scans and rendering.
    pub fn eval_ext(&self, z: &ExtComplex, overflow_cap: f64) -> ExtEval {
        if let Some(p) = self.pole_at(z) {
            return ExtEval::PoleHit(p.at);
        }
        let v = self.apply(z);
        let l = v.ln_abs();
        if l > overflow_cap || l.is_nan() {
            ExtEval::Overflow(if l.is_nan() { f64::INFINITY } else { l })
        } else {
            ExtEval::Finite(v)
        }
    }

    pub fn eval_c64(&self, z: Complex64) -> ExtEval {
        self.eval_ext(&ExtComplex::from_c64(z), DEFAULT_OVERFLOW_CAP)
    }

    pub fn derivative_ext(&self, z: &ExtComplex) -> Option<ExtComplex> {
        if self.pole_at(z).is_some() {
            return None;
        }
        Some(self.apply_derivative(z, 53))
    }

    /// Evaluation at `precision_bits` (>= 53) with the default overflow cap.
    pub fn evaluate(&self, z: &HpComplex, precision_bits: usize) -> EvalResult {
        self.evaluate_capped(z, precision_bits, DEFAULT_OVERFLOW_CAP)
    }

    pub fn evaluate_capped(
        &self,
        z: &HpComplex,
        precision_bits: usize,
        overflow_cap: f64,
    ) -> EvalResult {
        let bits = precision_bits.max(53);
        let ze = z.to_ext();
        if let Some(p) = self.pole_at(&ze) {
            return EvalResult {
                kind: EvalKind::PoleHit,
                value: None,
                log_magnitude: f64::INFINITY,
                pole: Some(p.at),
            };
        }
        // Cheap magnitude pre-check so huge exponentials never reach the bignum path.
        let rough = self.apply(&ze).ln_abs();
        if rough.is_nan() || rough > overflow_cap + 1.0 {
            return EvalResult {
                kind: EvalKind::Overflow,
                value: None,
                log_magnitude: if rough.is_nan() { f64::INFINITY } else { rough },
                pole: None,
            };
        }
        let zz = z.with_precision(bits + GUARD_BITS);
        let v = self.apply(&zz).with_precision(bits);
        let l = v.ln_abs();
        if !v.is_finite() || l > overflow_cap {
            return EvalResult {
                kind: EvalKind::Overflow,
                value: None,
                log_magnitude: if l.is_finite() {
                    l
                } else {
                    rough.max(overflow_cap)
                },
                pole: None,
            };
        }
        EvalResult {
            kind: EvalKind::Finite,
            value: Some(v),
            log_magnitude: l,
            pole: None,
        }
    }

    pub fn evaluate_c64(&self, z: Complex64, precision_bits: usize) -> EvalResult {
        self.evaluate(&HpComplex::from_c64(z, precision_bits), precision_bits)
    }

    /// f'(z); `Err(pole)` inside the pole-exclusion radius.
    pub fn derivative(
        &self,
        z: &HpComplex,
        precision_bits: usize,
    ) -> std::result::Result<HpComplex, Complex64> {
        let bits = precision_bits.max(53);
        if let Some(p) = self.pole_at(&z.to_ext()) {
            return Err(p.at);
        }
        let zz = z.with_precision(bits + GUARD_BITS);
        Ok(self
            .apply_derivative(&zz, bits + GUARD_BITS)
            .with_precision(bits))
    }

    pub fn orbit(
        &self,
        z: &HpComplex,
        n_max: usize,
        precision_bits: usize,
        overflow_cap: f64,
    ) -> OrbitRecord {
        let mut entries = Vec::with_capacity(n_max);
        let mut cur = z.with_precision(precision_bits.max(53));
        let mut stop = StopReason::Horizon;
        for _ in 0..n_max {
            let r = self.evaluate_capped(&cur, precision_bits, overflow_cap);
            let next = r.value.clone();
            let kind = r.kind;
            entries.push(r);
            match kind {
                EvalKind::Finite => cur = next.expect("finite result carries a value"),
                EvalKind::PoleHit => {
                    stop = StopReason::PoleHit;
                    break;
                }
                EvalKind::Overflow => {
                    stop = StopReason::Overflow;
                    break;
                }
            }
        }
        OrbitRecord {
            start: z.clone(),
            entries,
            stop_reason: stop,
            precision_bits: precision_bits.max(53),
        }
    }

    /// Log-magnitude orbit at double precision; stops at the first pole or overflow.
    pub fn orbit_ext(&self, z: Complex64, n_max: usize, overflow_cap: f64) -> Vec<ExtEval> {
        let mut out = Vec::with_capacity(n_max);
        let mut cur = ExtComplex::from_c64(z);
        for _ in 0..n_max {
            let r = self.eval_ext(&cur, overflow_cap);
            out.push(r);
            match r {
                ExtEval::Finite(v) => cur = v,
                _ => break,
            }
        }
        out
    }
}

impl fmt::Display for MapDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]", self.family, self.label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn val(m: &MapDescriptor, z: Complex64) -> Complex64 {
        m.evaluate_c64(z, 256).value.unwrap().to_c64()
    }

    #[test]
    fn simple_values() {
        assert!((val(&MapDescriptor::exp(1.0), c(0.0, 0.0)) - c(1.0, 0.0)).norm() < 1e-15);
        let fb = MapDescriptor::simple(Family::FatouBaker);
        assert!((val(&fb, c(0.0, 0.0)) - c(2.0, 0.0)).norm() < 1e-15);
        let qc = MapDescriptor::simple(Family::QuarterCos);
        assert!((val(&qc, c(0.0, 0.0)) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn admissibility() {
        assert!(make_map(Family::ExpScaled, MapParams::lambda(0.0)).is_err());
        let sp = make_map(Family::SinPole, MapParams::sin_pole(0.5, 0.01)).unwrap();
        assert_eq!(
            sp.poles,
            PoleSet::Finite {
                poles: vec![Pole {
                    at: c(PI, 0.0),
                    order: 1
                }]
            }
        );
        assert!(make_map(Family::SinPole, MapParams::sin_pole(0.5, 0.0)).is_err());
        assert!(MapDescriptor::from_name("badfamily", MapParams::default()).is_err());
        let e = make_map(Family::ExpScaled, MapParams::lambda(0.25)).unwrap();
        assert!(e.poles.is_empty());
    }

    #[test]
    fn quarter_cos_matches_series_at_24() {
        let bits = 256;
        let m = MapDescriptor::simple(Family::QuarterCos);
        let z = HpComplex::from_c64(c(24.0, 0.0), bits);
        let v = m.evaluate(&z, bits).value.unwrap();
        // 1 + z/4! + z^2/8! + ... (20 terms)
        let mut term = HpComplex::from_c64(c(1.0, 0.0), bits);
        let mut sum = term.clone();
        for k in 1..20usize {
            let f = ((4 * k - 3) * (4 * k - 2) * (4 * k - 1) * 4 * k) as f64;
            term = term.mul(&z).div(&HpComplex::from_c64(c(f, 0.0), bits));
            sum = sum.add(&term);
        }
        assert!(v.dist_f64(&sum) / sum.abs_f64() < 1e-20, "{v} vs {sum}");
    }

    #[test]
    fn derivatives_at_critical_points() {
        let bits = 128;
        let d = |m: &MapDescriptor, z: Complex64| {
            m.derivative(&HpComplex::from_c64(z, bits), bits)
                .unwrap()
                .to_c64()
        };
        assert!((d(&MapDescriptor::exp(1.0), c(0.0, 0.0)) - 1.0).norm() < 1e-15);
        assert!(d(&MapDescriptor::simple(Family::SineShift), c(PI, 0.0)).norm() < 1e-15);
        assert!(d(&MapDescriptor::simple(Family::FatouBaker), c(0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn derivatives_match_difference_quotients() {
        let h = 1e-6;
        for fam in Family::ALL {
            let m = MapDescriptor::simple(fam);
            for z in [c(0.3, 0.2), c(2.0, -1.5), c(-0.7, 0.9), c(5.0, 0.5)] {
                let d = m
                    .derivative(&HpComplex::from_c64(z, 128), 128)
                    .unwrap()
                    .to_c64();
                let fd = (val(&m, z + h) - val(&m, z - h)) / (2.0 * h);
                assert!(
                    (d - fd).norm() <= 1e-6 * (1.0 + d.norm()),
                    "{fam} at {z}: {d} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn small_orbits() {
        let fb = MapDescriptor::simple(Family::FatouBaker);
        let o = fb.orbit(
            &HpComplex::from_c64(c(10.0, 0.0), 256),
            3,
            256,
            DEFAULT_OVERFLOW_CAP,
        );
        let v: Vec<Complex64> = o
            .entries
            .iter()
            .map(|e| e.value.as_ref().unwrap().to_c64())
            .collect();
        assert!((v[0].re - (11.0 + (-10f64).exp())).abs() < 1e-12);
        assert!((v[1].re - (v[0].re + 1.0 + (-v[0].re).exp())).abs() < 1e-12);
        assert!(v.iter().all(|z| z.im == 0.0));

        let ss = MapDescriptor::simple(Family::SineShift);
        let o = ss.orbit(&HpComplex::pi(256), 4, 256, DEFAULT_OVERFLOW_CAP);
        for (k, e) in o.entries.iter().enumerate() {
            let want = HpComplex::pi(256).mul_real_f64((2 * k + 3) as f64);
            assert!(e.value.as_ref().unwrap().dist_f64(&want) < 1e-60);
        }

        let ht = MapDescriptor::simple(Family::HalfTan);
        let o = ht.orbit(
            &HpComplex::pi(256).mul_real_f64(0.5),
            1,
            256,
            DEFAULT_OVERFLOW_CAP,
        );
        assert_eq!(o.stop_reason, StopReason::PoleHit);
        assert_eq!(o.entries.len(), 1);
    }

    #[test]
    fn overflow_is_reported_with_log_bound() {
        let m = MapDescriptor::exp(1.0);
        let r = m.evaluate_c64(c(2e6, 0.0), 128);
        assert_eq!(r.kind, EvalKind::Overflow);
        assert!(r.log_magnitude >= DEFAULT_OVERFLOW_CAP);
        let o = m.orbit(
            &HpComplex::from_c64(c(2.0, 0.0), 128),
            10,
            128,
            DEFAULT_OVERFLOW_CAP,
        );
        assert_eq!(o.stop_reason, StopReason::Overflow);
    }

    #[test]
    fn descriptor_json_round_trip() {
        let m = make_map(Family::SinPole, MapParams::sin_pole(0.5, 0.01)).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"family\":\"sin_pole\""));
        let back: MapDescriptor = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let p: MapDescriptor =
            serde_json::from_str(r#"{"family":"poly_exp","params":{"p":[0,[1,2]],"q":[1],"c":1}}"#)
                .unwrap();
        assert_eq!(p.params.p[1], c(1.0, 2.0));
    }

    #[test]
    fn periodic_poles_in_window() {
        let ht = MapDescriptor::simple(Family::HalfTan);
        let w = ht.poles.in_window(c(0.0, 0.0), 5.0);
        assert_eq!(w.len(), 4); // ±π/2, ±3π/2
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn precision_agreement(fi in 0usize..9, re in -20.0f64..20.0, im in -20.0f64..20.0) {
            let m = MapDescriptor::simple(Family::ALL[fi]);
            let z = c(re, im);
            prop_assume!(z.norm() <= 20.0 && m.poles.distance(z) > 1e-6);
            let a = m.evaluate_c64(z, 256);
            let b = m.evaluate_c64(z, 512);
            let (a, b) = (a.value.unwrap(), b.value.unwrap());
            let diff = a.with_precision(512).sub(&b);
            prop_assert!(diff.ln_abs() - b.ln_abs() < -200.0 * std::f64::consts::LN_2);
        }

        #[test]
        fn quarter_cos_branch_independent(r in 0.0f64..10.0, t in -3.14f64..3.14) {
            let m = MapDescriptor::simple(Family::QuarterCos);
            let z = Complex64::from_polar(r, t);
            let v = val(&m, z);
            let mut term = c(1.0, 0.0);
            let mut sum = term;
            for k in 1..=12usize {
                let f = ((4 * k - 3) * (4 * k - 2) * (4 * k - 1) * 4 * k) as f64;
                term = term * z / f;
                sum += term;
            }
            prop_assert!((v - sum).norm() <= 1e-15 * sum.norm().max(1.0) * 4.0);
        }

        #[test]
        fn sine_shift_translation(re in -30.0f64..30.0, im in -3.0f64..3.0) {
            let m = MapDescriptor::simple(Family::SineShift);
            let z = c(re, im);
            let a = val(&m, z + 2.0 * PI);
            let b = val(&m, z) + 2.0 * PI;
            prop_assert!((a - b).norm() < 1e-12 * (1.0 + b.norm()));
        }

        #[test]
        fn orbit_is_deterministic(re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let m = MapDescriptor::simple(Family::FatouBaker);
            let z = HpComplex::from_c64(c(re, im), 192);
            let a = m.orbit(&z, 5, 192, DEFAULT_OVERFLOW_CAP);
            let b = m.orbit(&z, 5, 192, DEFAULT_OVERFLOW_CAP);
            prop_assert_eq!(a, b);
        }
    }
}
