//! Multiprecision complex arithmetic on top of `astro-float`.

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::f64::consts::LN_2;
use std::fmt;

use crate::ext::ExtComplex;

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constants cache"));
}

fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

fn real_to_f64(x: &BigFloat) -> f64 {
    match x.as_raw_parts() {
        None => f64::NAN,
        Some((words, _, sign, e, _)) => {
            if x.is_zero() {
                return 0.0;
            }
            let n = words.len();
            let hi = words[n - 1] as f64;
            let lo = if n >= 2 { words[n - 2] as f64 } else { 0.0 };
            let frac = (hi + lo / 18_446_744_073_709_551_616.0) / 18_446_744_073_709_551_616.0;
            let mag = if e > 1100 {
                f64::INFINITY
            } else if e < -1200 {
                0.0
            } else {
                frac * 2f64.powi(e)
            };
            if sign == Sign::Neg {
                -mag
            } else {
                mag
            }
        }
    }
}

/// Natural log of |x| without overflow; `-inf` for zero.
fn real_ln_abs(x: &BigFloat) -> f64 {
    match x.as_raw_parts() {
        None => f64::NAN,
        Some((words, _, _, e, _)) => {
            if x.is_zero() {
                return f64::NEG_INFINITY;
            }
            let n = words.len();
            let hi = words[n - 1] as f64;
            let lo = if n >= 2 { words[n - 2] as f64 } else { 0.0 };
            let frac = (hi + lo / 18_446_744_073_709_551_616.0) / 18_446_744_073_709_551_616.0;
            frac.ln() + e as f64 * LN_2
        }
    }
}

/// Signed leading fraction in [0.5, 1) and binary exponent, `None` for zero.
fn real_frac_exp(x: &BigFloat) -> Option<(f64, i64)> {
    let (words, _, sign, e, _) = x.as_raw_parts()?;
    if x.is_zero() {
        return None;
    }
    let n = words.len();
    let hi = words[n - 1] as f64;
    let lo = if n >= 2 { words[n - 2] as f64 } else { 0.0 };
    let frac = (hi + lo / 18_446_744_073_709_551_616.0) / 18_446_744_073_709_551_616.0;
    Some((if sign == Sign::Neg { -frac } else { frac }, e as i64))
}

/// A complex number with a fixed binary mantissa width.
#[derive(Debug)]
pub struct HpComplex {
    re: BigFloat,
    im: BigFloat,
    prec: usize,
}

impl Clone for HpComplex {
    fn clone(&self) -> Self {
        HpComplex {
            re: self.re.clone(),
            im: self.im.clone(),
            prec: self.prec,
        }
    }
}

impl PartialEq for HpComplex {
    fn eq(&self, other: &Self) -> bool {
        self.re == other.re && self.im == other.im
    }
}

impl HpComplex {
    pub fn from_c64(z: Complex64, prec: usize) -> Self {
        HpComplex {
            re: BigFloat::from_f64(z.re, prec),
            im: BigFloat::from_f64(z.im, prec),
            prec,
        }
    }

    pub fn from_parts(re: BigFloat, im: BigFloat, prec: usize) -> Self {
        HpComplex { re, im, prec }
    }

    pub fn zero(prec: usize) -> Self {
        Self::from_c64(Complex64::new(0.0, 0.0), prec)
    }

    pub fn precision(&self) -> usize {
        self.prec
    }

    pub fn re(&self) -> &BigFloat {
        &self.re
    }

    pub fn im(&self) -> &BigFloat {
        &self.im
    }

    /// Rounds (or widens) to a new mantissa width.
    pub fn with_precision(&self, prec: usize) -> Self {
        let mut re = self.re.clone();
        let mut im = self.im.clone();
        let _ = re.set_precision(prec, RM);
        let _ = im.set_precision(prec, RM);
        HpComplex { re, im, prec }
    }

    pub fn pi(prec: usize) -> Self {
        let p = with_consts(|cc| cc.pi(prec, RM));
        HpComplex {
            re: p,
            im: BigFloat::from_f64(0.0, prec),
            prec,
        }
    }

    pub fn ln2(prec: usize) -> Self {
        let p = with_consts(|cc| cc.ln_2(prec, RM));
        HpComplex {
            re: p,
            im: BigFloat::from_f64(0.0, prec),
            prec,
        }
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(real_to_f64(&self.re), real_to_f64(&self.im))
    }

    /// Lossy conversion to the extended-exponent double type.
    pub fn to_ext(&self) -> ExtComplex {
        let a = real_frac_exp(&self.re);
        let b = real_frac_exp(&self.im);
        let e = match (a, b) {
            (None, None) => return ExtComplex::from_c64(Complex64::new(0.0, 0.0)),
            (Some((_, ea)), None) => ea,
            (None, Some((_, eb))) => eb,
            (Some((_, ea)), Some((_, eb))) => ea.max(eb),
        };
        let part = |v: Option<(f64, i64)>| match v {
            None => 0.0,
            Some((f, ev)) => {
                let d = (ev - e).max(-1100) as i32;
                f * 2f64.powi(d)
            }
        };
        ExtComplex::new(Complex64::new(part(a), part(b)), e)
    }

    pub fn from_ext(z: &ExtComplex, prec: usize) -> Self {
        let m = z.mantissa();
        let shift = |x: f64| {
            let mut b = BigFloat::from_f64(x, prec);
            if !b.is_zero() {
                if let Some(ex) = b.exponent() {
                    b.set_exponent((ex as i64 + z.exponent()) as i32);
                }
            }
            b
        };
        HpComplex {
            re: shift(m.re),
            im: shift(m.im),
            prec,
        }
    }

    pub fn is_finite(&self) -> bool {
        !(self.re.is_nan() || self.im.is_nan() || self.re.is_inf() || self.im.is_inf())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn ln_abs(&self) -> f64 {
        let a = real_ln_abs(&self.re);
        let b = real_ln_abs(&self.im);
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        if hi == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        hi + 0.5 * (1.0 + (2.0 * (lo - hi)).exp()).ln()
    }

    pub fn abs_f64(&self) -> f64 {
        self.ln_abs().exp()
    }

    pub fn add(&self, o: &Self) -> Self {
        let p = self.prec.max(o.prec);
        HpComplex {
            re: self.re.add(&o.re, p, RM),
            im: self.im.add(&o.im, p, RM),
            prec: p,
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let p = self.prec.max(o.prec);
        HpComplex {
            re: self.re.sub(&o.re, p, RM),
            im: self.im.sub(&o.im, p, RM),
            prec: p,
        }
    }

    pub fn neg(&self) -> Self {
        HpComplex {
            re: self.re.neg(),
            im: self.im.neg(),
            prec: self.prec,
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let p = self.prec.max(o.prec);
        let ac = self.re.mul(&o.re, p, RM);
        let bd = self.im.mul(&o.im, p, RM);
        let ad = self.re.mul(&o.im, p, RM);
        let bc = self.im.mul(&o.re, p, RM);
        HpComplex {
            re: ac.sub(&bd, p, RM),
            im: ad.add(&bc, p, RM),
            prec: p,
        }
    }

    pub fn mul_real_f64(&self, x: f64) -> Self {
        let s = BigFloat::from_f64(x, self.prec);
        HpComplex {
            re: self.re.mul(&s, self.prec, RM),
            im: self.im.mul(&s, self.prec, RM),
            prec: self.prec,
        }
    }

    pub fn mul_i(&self) -> Self {
        HpComplex {
            re: self.im.neg(),
            im: self.re.clone(),
            prec: self.prec,
        }
    }

    pub fn div(&self, o: &Self) -> Self {
        let p = self.prec.max(o.prec);
        let den = o.re.mul(&o.re, p, RM).add(&o.im.mul(&o.im, p, RM), p, RM);
        let num = self.mul(&HpComplex {
            re: o.re.clone(),
            im: o.im.neg(),
            prec: p,
        });
        HpComplex {
            re: num.re.div(&den, p, RM),
            im: num.im.div(&den, p, RM),
            prec: p,
        }
    }

    pub fn exp(&self) -> Self {
        let p = self.prec;
        with_consts(|cc| {
            let m = self.re.exp(p, RM, cc);
            let c = self.im.cos(p, RM, cc);
            let s = self.im.sin(p, RM, cc);
            HpComplex {
                re: m.mul(&c, p, RM),
                im: m.mul(&s, p, RM),
                prec: p,
            }
        })
    }

    pub fn sin(&self) -> Self {
        let p = self.prec;
        with_consts(|cc| {
            let (sx, cx) = (self.re.sin(p, RM, cc), self.re.cos(p, RM, cc));
            let (ch, sh) = (self.im.cosh(p, RM, cc), self.im.sinh(p, RM, cc));
            HpComplex {
                re: sx.mul(&ch, p, RM),
                im: cx.mul(&sh, p, RM),
                prec: p,
            }
        })
    }

    pub fn cos(&self) -> Self {
        let p = self.prec;
        with_consts(|cc| {
            let (sx, cx) = (self.re.sin(p, RM, cc), self.re.cos(p, RM, cc));
            let (ch, sh) = (self.im.cosh(p, RM, cc), self.im.sinh(p, RM, cc));
            HpComplex {
                re: cx.mul(&ch, p, RM),
                im: sx.mul(&sh, p, RM).neg(),
                prec: p,
            }
        })
    }

    pub fn cosh(&self) -> Self {
        self.mul_i().cos()
    }

    pub fn sinh(&self) -> Self {
        self.mul_i().sin().mul_i().neg()
    }

    pub fn tan(&self) -> Self {
        let p = self.prec;
        let two = BigFloat::from_f64(2.0, p);
        let x2 = self.re.mul(&two, p, RM);
        let y2 = self.im.mul(&two, p, RM);
        with_consts(|cc| {
            let den = x2.cos(p, RM, cc).add(&y2.cosh(p, RM, cc), p, RM);
            let re = x2.sin(p, RM, cc).div(&den, p, RM);
            let im = y2.sinh(p, RM, cc).div(&den, p, RM);
            HpComplex { re, im, prec: p }
        })
    }

    /// Principal square root (branch cut on the negative real axis).
    pub fn sqrt(&self) -> Self {
        let p = self.prec;
        if self.is_zero() {
            return self.clone();
        }
        let r = self
            .re
            .mul(&self.re, p, RM)
            .add(&self.im.mul(&self.im, p, RM), p, RM)
            .sqrt(p, RM);
        let two = BigFloat::from_f64(2.0, p);
        if !self.re.is_negative() {
            let t = r.add(&self.re, p, RM).div(&two, p, RM).sqrt(p, RM);
            let im = self.im.div(&t.mul(&two, p, RM), p, RM);
            HpComplex { re: t, im, prec: p }
        } else {
            let t = r.sub(&self.re, p, RM).div(&two, p, RM).sqrt(p, RM);
            let re = self.im.abs().div(&t.mul(&two, p, RM), p, RM);
            let im = if self.im.is_negative() { t.neg() } else { t };
            HpComplex { re, im, prec: p }
        }
    }

    /// Distance |self - other| as f64.
    pub fn dist_f64(&self, other: &Self) -> f64 {
        self.sub(other).abs_f64()
    }

    /// Decimal rendering with `digits` significant digits per component.
    pub fn to_decimal(&self, digits: usize) -> (String, String) {
        (fmt_real(&self.re, digits), fmt_real(&self.im, digits))
    }

    pub fn parse(re: &str, im: &str, prec: usize) -> Option<Self> {
        let r = with_consts(|cc| BigFloat::parse(re, astro_float::Radix::Dec, prec, RM, cc));
        let i = with_consts(|cc| BigFloat::parse(im, astro_float::Radix::Dec, prec, RM, cc));
        if r.is_nan() || i.is_nan() {
            None
        } else {
            Some(HpComplex { re: r, im: i, prec })
        }
    }
}

fn fmt_real(x: &BigFloat, digits: usize) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    let s = with_consts(|cc| x.format(astro_float::Radix::Dec, RM, cc));
    let s = match s {
        Ok(s) => s,
        Err(_) => return format!("{:e}", real_to_f64(x)),
    };
    // Keep `digits` significant digits of the mantissa (truncation, not rounding).
    let (mant, exp) = s.split_once('e').unwrap_or((&s, "0"));
    let mut out = String::new();
    let mut kept = 0;
    for ch in mant.chars() {
        if ch.is_ascii_digit() {
            if kept == digits {
                break;
            }
            kept += 1;
        }
        out.push(ch);
    }
    format!("{out}e{exp}")
}

impl fmt::Display for HpComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (re, im) = self.to_decimal(20);
        write!(f, "({re}, {im})")
    }
}

/// Serialized as decimal strings so no digits are lost in reports.
#[derive(Serialize, Deserialize)]
struct HpWire {
    re: String,
    im: String,
    precision_bits: usize,
}

impl Serialize for HpComplex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let digits = ((self.prec as f64) / std::f64::consts::LOG2_10).ceil() as usize + 2;
        let (re, im) = self.to_decimal(digits);
        HpWire {
            re,
            im,
            precision_bits: self.prec,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HpComplex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = HpWire::deserialize(d)?;
        HpComplex::parse(&w.re, &w.im, w.precision_bits)
            .ok_or_else(|| serde::de::Error::custom("unparseable high-precision number"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn functions_agree_with_f64() {
        let z = Complex64::new(0.7, -1.3);
        let h = HpComplex::from_c64(z, 128);
        let cases = [
            (h.exp().to_c64(), z.exp()),
            (h.sin().to_c64(), z.sin()),
            (h.cos().to_c64(), z.cos()),
            (h.cosh().to_c64(), z.cosh()),
            (h.sinh().to_c64(), z.sinh()),
            (h.tan().to_c64(), z.tan()),
            (h.sqrt().to_c64(), z.sqrt()),
        ];
        for (a, b) in cases {
            assert!((a - b).norm() < 1e-14 * b.norm(), "{a} vs {b}");
        }
        let neg = HpComplex::from_c64(Complex64::new(-4.0, 0.0), 128)
            .sqrt()
            .to_c64();
        assert!((neg - Complex64::new(0.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn log_magnitude_survives_overflow() {
        let h = HpComplex::from_c64(Complex64::new(5000.0, 1.0), 128).exp();
        assert!((h.ln_abs() - 5000.0).abs() < 1e-9);
        assert!(h.to_c64().re.is_infinite());
    }

    #[test]
    fn ext_conversion_keeps_huge_exponents() {
        let h = HpComplex::from_c64(Complex64::new(3000.0, -2.0), 128).exp();
        let e = h.to_ext();
        assert!((e.ln_abs() - 3000.0).abs() < 1e-9);
        assert!((e.arg() - (-2.0)).abs() < 1e-12);
        let back = HpComplex::from_ext(&e, 128);
        assert!((back.ln_abs() - 3000.0).abs() < 1e-9);
    }

    #[test]
    fn decimal_round_trip() {
        let pi = HpComplex::pi(256);
        let json = serde_json::to_string(&pi).unwrap();
        let back: HpComplex = serde_json::from_str(&json).unwrap();
        assert!(pi.dist_f64(&back) < 1e-70);
    }
}
