//! Annuli, discs and box covers in the plane.
//!
//! Annulus radii are stored as logarithms: chain annuli routinely sit at radii
//! like e^{1000}, which no f64 can hold.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::catalog::cplx;
use crate::error::{Error, Result};
use crate::ext::ExtComplex;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Annulus {
    pub center: Complex64,
    pub ln_r_in: f64,
    pub ln_r_out: f64,
    pub closed: bool,
}

#[derive(Serialize, Deserialize)]
struct AnnulusWire {
    #[serde(default, with = "cplx")]
    center: Complex64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_out: Option<f64>,
    #[serde(default)]
    ln_r_in: Option<f64>,
    #[serde(default)]
    ln_r_out: Option<f64>,
    #[serde(default = "yes")]
    closed: bool,
}

fn yes() -> bool {
    true
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl Serialize for Annulus {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        AnnulusWire {
            center: self.center,
            r_in: finite(self.r_in()),
            r_out: finite(self.r_out()),
            ln_r_in: Some(self.ln_r_in),
            ln_r_out: Some(self.ln_r_out),
            closed: self.closed,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Annulus {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = AnnulusWire::deserialize(d)?;
        let li = w.ln_r_in.or(w.r_in.map(f64::ln));
        let lo = w.ln_r_out.or(w.r_out.map(f64::ln));
        match (li, lo) {
            (Some(a), Some(b)) => {
                let mut ann = Annulus::from_ln(w.center, a, b).map_err(serde::de::Error::custom)?;
                ann.closed = w.closed;
                Ok(ann)
            }
            _ => Err(serde::de::Error::custom(
                "annulus needs r_in/r_out or ln_r_in/ln_r_out",
            )),
        }
    }
}

impl Annulus {
    pub fn new(center: Complex64, r_in: f64, r_out: f64) -> Result<Self> {
        if !(r_in > 0.0 && r_in < r_out) {
            return Err(Error::invalid(format!(
                "annulus needs 0 < r_in < r_out, got ({r_in}, {r_out})"
            )));
        }
        Self::from_ln(center, r_in.ln(), r_out.ln())
    }

    pub fn from_ln(center: Complex64, ln_r_in: f64, ln_r_out: f64) -> Result<Self> {
        if !(ln_r_in < ln_r_out) || ln_r_in.is_nan() || ln_r_out.is_infinite() {
            return Err(Error::invalid(format!(
                "annulus needs ln_r_in < ln_r_out, got ({ln_r_in}, {ln_r_out})"
            )));
        }
        Ok(Annulus {
            center,
            ln_r_in,
            ln_r_out,
            closed: true,
        })
    }

    /// Closed annulus about the origin. Panics on invalid radii.
    pub fn centered(r_in: f64, r_out: f64) -> Self {
        Self::new(Complex64::new(0.0, 0.0), r_in, r_out).expect("valid radii")
    }

    pub fn centered_ln(ln_r_in: f64, ln_r_out: f64) -> Self {
        Self::from_ln(Complex64::new(0.0, 0.0), ln_r_in, ln_r_out).expect("valid radii")
    }

    pub fn open(mut self) -> Self {
        self.closed = false;
        self
    }

    pub fn r_in(&self) -> f64 {
        self.ln_r_in.exp()
    }

    pub fn r_out(&self) -> f64 {
        self.ln_r_out.exp()
    }

    pub fn ln_mid(&self) -> f64 {
        0.5 * (self.ln_r_in + self.ln_r_out)
    }

    pub fn is_centered(&self) -> bool {
        self.center == Complex64::new(0.0, 0.0)
    }

    /// Contracts both radii toward each other by the relative amount `rel`.
    pub fn shrink(&self, rel: f64) -> Self {
        let d = rel.ln_1p();
        Annulus {
            ln_r_in: self.ln_r_in + d,
            ln_r_out: self.ln_r_out - d,
            ..*self
        }
    }

    pub fn dilate(&self, rel: f64) -> Self {
        self.shrink(-rel / (1.0 + rel))
    }

    pub fn contains_annulus(&self, o: &Annulus) -> bool {
        self.center == o.center && self.ln_r_in <= o.ln_r_in && o.ln_r_out <= self.ln_r_out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    #[serde(with = "cplx")]
    pub center: Complex64,
    pub radius: f64,
    #[serde(default = "yes")]
    pub closed: bool,
}

impl Disc {
    pub fn new(center: Complex64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!(
                "disc radius must be positive, got {radius}"
            )));
        }
        Ok(Disc {
            center,
            radius,
            closed: true,
        })
    }

    pub fn shrink(&self, rel: f64) -> Self {
        Disc {
            radius: self.radius * (1.0 - rel),
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.x1 - self.x0).max(self.y1 - self.y0)
    }
}

/// Axis-aligned boxes at a common subdivision depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCover {
    pub boxes: Vec<Rect>,
    pub depth: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Annulus(Annulus),
    Disc(Disc),
    Cells(CellCover),
}

/// Where a disc sits relative to a region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Placement {
    Inside,
    Disjoint,
    Undecided,
}

impl From<Annulus> for Region {
    fn from(a: Annulus) -> Self {
        Region::Annulus(a)
    }
}

impl From<Disc> for Region {
    fn from(d: Disc) -> Self {
        Region::Disc(d)
    }
}

fn rect_slack(b: &Rect, w: Complex64) -> f64 {
    let d = (w.re - b.x0)
        .min(b.x1 - w.re)
        .min(w.im - b.y0)
        .min(b.y1 - w.im);
    d / b.half_width()
}

impl Region {
    pub fn annulus(r_in: f64, r_out: f64) -> Self {
        Region::Annulus(Annulus::centered(r_in, r_out))
    }

    pub fn disc(center: Complex64, radius: f64) -> Self {
        Region::Disc(Disc::new(center, radius).expect("positive radius"))
    }

    pub fn is_closed(&self) -> bool {
        match self {
            Region::Annulus(a) => a.closed,
            Region::Disc(d) => d.closed,
            Region::Cells(_) => true,
        }
    }

    /// Signed depth of `w` in the region: positive inside, negative outside.
    ///
    /// Units: log-radius for annuli, radius fractions for discs, half-widths for boxes.
    pub fn slack(&self, w: &ExtComplex) -> f64 {
        match self {
            Region::Annulus(a) => {
                let l = w.sub(&ExtComplex::from_c64(a.center)).ln_abs();
                (l - a.ln_r_in).min(a.ln_r_out - l)
            }
            Region::Disc(d) => {
                let dist = w.sub(&ExtComplex::from_c64(d.center)).ln_abs();
                let ln_r = d.radius.ln();
                // (R - |w - c|) / R in a form that survives huge |w|.
                if dist - ln_r > 30.0 {
                    -(dist - ln_r).exp().min(f64::MAX)
                } else {
                    1.0 - (dist - ln_r).exp()
                }
            }
            Region::Cells(c) => {
                let z = w.to_c64();
                c.boxes
                    .iter()
                    .map(|b| rect_slack(b, z))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    pub fn contains(&self, w: &ExtComplex) -> bool {
        let s = self.slack(w);
        if self.is_closed() {
            s >= 0.0
        } else {
            s > 0.0
        }
    }

    pub fn contains_c64(&self, z: Complex64) -> bool {
        self.contains(&ExtComplex::from_c64(z))
    }

    /// Compares the closed disc of radius e^{ln_rad} around `w` with the region.
    pub fn place_disc(&self, w: &ExtComplex, ln_rad: f64) -> Placement {
        match self {
            Region::Annulus(a) => {
                let ld = w.sub(&ExtComplex::from_c64(a.center)).ln_abs();
                // ln(|w-c| + rad) and ln(|w-c| - rad) without leaving log space.
                let hi = ld.max(ln_rad) + (-(ld - ln_rad).abs()).exp().ln_1p();
                if hi < a.ln_r_in {
                    return Placement::Disjoint;
                }
                if ln_rad >= ld {
                    return Placement::Undecided;
                }
                let lo = ld + (-(ln_rad - ld).exp()).ln_1p();
                if lo > a.ln_r_out {
                    Placement::Disjoint
                } else if lo >= a.ln_r_in && hi <= a.ln_r_out {
                    Placement::Inside
                } else {
                    Placement::Undecided
                }
            }
            Region::Disc(d) => {
                let dist = w.sub(&ExtComplex::from_c64(d.center)).ln_abs();
                let (dist, rad) = (dist.exp(), ln_rad.exp());
                if dist + rad <= d.radius {
                    Placement::Inside
                } else if dist - rad > d.radius {
                    Placement::Disjoint
                } else {
                    Placement::Undecided
                }
            }
            Region::Cells(c) => {
                let z = w.to_c64();
                let rad = ln_rad.exp();
                let mut any = false;
                for b in &c.boxes {
                    let inside = z.re - rad >= b.x0
                        && z.re + rad <= b.x1
                        && z.im - rad >= b.y0
                        && z.im + rad <= b.y1;
                    if inside {
                        return Placement::Inside;
                    }
                    let dx = (b.x0 - z.re).max(z.re - b.x1).max(0.0);
                    let dy = (b.y0 - z.im).max(z.im - b.y1).max(0.0);
                    if dx.hypot(dy) <= rad {
                        any = true;
                    }
                }
                if any {
                    Placement::Undecided
                } else {
                    Placement::Disjoint
                }
            }
        }
    }

    /// Shrinks inward by a relative amount (log-radius for annuli).
    pub fn shrink(&self, rel: f64) -> Region {
        match self {
            Region::Annulus(a) => Region::Annulus(a.shrink(rel)),
            Region::Disc(d) => Region::Disc(d.shrink(rel)),
            Region::Cells(c) => Region::Cells(CellCover {
                boxes: c
                    .boxes
                    .iter()
                    .map(|b| {
                        let h = rel * b.half_width();
                        Rect {
                            x0: b.x0 + h,
                            x1: b.x1 - h,
                            y0: b.y0 + h,
                            y1: b.y1 - h,
                        }
                    })
                    .collect(),
                depth: c.depth,
            }),
        }
    }

    pub fn dilate(&self, rel: f64) -> Region {
        match self {
            Region::Annulus(a) => Region::Annulus(a.dilate(rel)),
            Region::Disc(d) => Region::Disc(Disc {
                radius: d.radius * (1.0 + rel),
                ..*d
            }),
            Region::Cells(_) => self.shrink(-rel),
        }
    }

    /// Bounding box [x0, x1] x [y0, y1] (finite regions only).
    pub fn bounding_box(&self) -> Option<Rect> {
        match self {
            Region::Annulus(a) => {
                let r = a.r_out();
                r.is_finite().then(|| Rect {
                    x0: a.center.re - r,
                    x1: a.center.re + r,
                    y0: a.center.im - r,
                    y1: a.center.im + r,
                })
            }
            Region::Disc(d) => Some(Rect {
                x0: d.center.re - d.radius,
                x1: d.center.re + d.radius,
                y0: d.center.im - d.radius,
                y1: d.center.im + d.radius,
            }),
            Region::Cells(c) => c.boxes.iter().copied().reduce(|a, b| Rect {
                x0: a.x0.min(b.x0),
                x1: a.x1.max(b.x1),
                y0: a.y0.min(b.y0),
                y1: a.y1.max(b.y1),
            }),
        }
    }

    /// ln of the largest |w| over the region.
    pub fn ln_outer_extent(&self) -> f64 {
        match self {
            Region::Annulus(a) => {
                let c = a.center.norm();
                if c == 0.0 {
                    a.ln_r_out
                } else {
                    a.ln_r_out.max(c.ln()) + (-(a.ln_r_out - c.ln()).abs()).exp().ln_1p()
                }
            }
            Region::Disc(d) => (d.center.norm() + d.radius).ln(),
            Region::Cells(c) => c
                .boxes
                .iter()
                .map(|b| {
                    Complex64::new(b.x0.abs().max(b.x1.abs()), b.y0.abs().max(b.y1.abs()))
                        .norm()
                        .ln()
                })
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// ln of the largest |w| over the region, as an upper bound on its modulus.
    pub fn ln_sup_modulus(&self) -> f64 {
        self.ln_outer_extent()
    }

    pub fn describe(&self) -> String {
        match self {
            Region::Annulus(a) if a.is_centered() && a.ln_r_out < 700.0 => {
                format!("A({:.6}, {:.6})", a.r_in(), a.r_out())
            }
            Region::Annulus(a) => {
                format!("A(c={}, e^{:.6}, e^{:.6})", a.center, a.ln_r_in, a.ln_r_out)
            }
            Region::Disc(d) => format!("B({}, {:.6})", d.center, d.radius),
            Region::Cells(c) => format!("cells[{} @ depth {}]", c.boxes.len(), c.depth),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(re: f64, im: f64) -> ExtComplex {
        ExtComplex::from_c64(Complex64::new(re, im))
    }

    #[test]
    fn annulus_membership_and_slack() {
        let a = Region::annulus(2.0, 4.0);
        assert!(a.contains(&e(3.0, 0.0)));
        assert!(a.contains(&e(0.0, 2.0)));
        assert!(!a.contains(&e(1.9, 0.0)));
        assert!((a.slack(&e(3.0, 0.0)) - (3f64 / 2.0).ln().min((4f64 / 3.0).ln())).abs() < 1e-15);
        assert!(!Region::Annulus(Annulus::centered(2.0, 4.0).open()).contains(&e(2.0, 0.0)));
    }

    #[test]
    fn huge_annuli_keep_log_radii() {
        let a = Annulus::centered_ln(1000.0, 5000.0);
        assert!(a.r_in().is_infinite());
        let w = ExtComplex::from_polar_ln(2000.0, 0.3);
        assert!(Region::Annulus(a).contains(&w));
        let s = serde_json::to_string(&a).unwrap();
        let back: Annulus = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
        let plain: Annulus = serde_json::from_str(r#"{"r_in":1.0,"r_out":2.0}"#).unwrap();
        assert!((plain.r_out() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn disc_placement() {
        let d = Region::disc(Complex64::new(1.0, 1.0), 1.0);
        assert_eq!(d.place_disc(&e(1.0, 1.0), 0.5f64.ln()), Placement::Inside);
        assert_eq!(d.place_disc(&e(5.0, 1.0), 0.5f64.ln()), Placement::Disjoint);
        assert_eq!(
            d.place_disc(&e(1.8, 1.0), 0.5f64.ln()),
            Placement::Undecided
        );
        let a = Region::annulus(2.0, 4.0);
        assert_eq!(a.place_disc(&e(3.0, 0.0), 0.5f64.ln()), Placement::Inside);
        assert_eq!(a.place_disc(&e(0.0, 0.0), 0.5f64.ln()), Placement::Disjoint);
        assert_eq!(a.place_disc(&e(3.0, 0.0), 2f64.ln()), Placement::Undecided);
    }

    #[test]
    fn invalid_regions_are_rejected() {
        assert!(Annulus::new(Complex64::new(0.0, 0.0), 2.0, 1.0).is_err());
        assert!(Disc::new(Complex64::new(0.0, 0.0), 0.0).is_err());
    }
}
