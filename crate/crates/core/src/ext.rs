//! Double-precision complex numbers carrying a separate binary exponent.
//!
//! Radial scans and boundary sampling need values such as `exp(10^6)` or
//! `z^40` at `|z| = e^200` without overflow, but only at f64 relative
//! accuracy. `ExtComplex` stores `m * 2^e` with the larger component of `m`
//! normalized into `[1, 2)`.

use num_complex::Complex64;
use std::f64::consts::LN_2;

/// Exponent used for values that are beyond any meaningful magnitude.
const HUGE_EXP: i64 = i64::MAX / 8;

// ln 2 split so that k * LN2_HI is exact for |k| < 2^32.
const LN2_HI: f64 = 0.693_147_180_369_123_816_49;
const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtComplex {
    m: Complex64,
    e: i64,
}

fn frexp_exponent(x: f64) -> i64 {
    // exponent such that x / 2^k lies in [1, 2)
    if x == 0.0 || !x.is_finite() {
        return 0;
    }
    let bits = x.abs().to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i64;
    if raw == 0 {
        // subnormal
        let scaled = x.abs() * 2f64.powi(64);
        return frexp_exponent(scaled) - 64;
    }
    raw - 1023
}

fn ldexp(x: f64, k: i64) -> f64 {
    if k > 2000 {
        return x * f64::INFINITY;
    }
    if k < -2100 {
        return x * 0.0;
    }
    let mut x = x;
    let mut k = k;
    while k > 1000 {
        x *= 2f64.powi(1000);
        k -= 1000;
    }
    while k < -1000 {
        x *= 2f64.powi(-1000);
        k += 1000;
    }
    x * 2f64.powi(k as i32)
}

impl ExtComplex {
    pub const ZERO: ExtComplex = ExtComplex {
        m: Complex64 { re: 0.0, im: 0.0 },
        e: 0,
    };

    pub fn new(m: Complex64, e: i64) -> Self {
        let mut v = ExtComplex { m, e };
        v.normalize();
        v
    }

    pub fn from_c64(z: Complex64) -> Self {
        Self::new(z, 0)
    }

    pub fn from_real(x: f64) -> Self {
        Self::new(Complex64::new(x, 0.0), 0)
    }

    /// A value with the given natural-log magnitude and argument.
    pub fn from_polar_ln(ln_abs: f64, arg: f64) -> Self {
        if ln_abs == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let (k, r) = split_ln(ln_abs);
        Self::new(Complex64::from_polar(r.exp(), arg), k)
    }

    fn huge(arg: f64) -> Self {
        ExtComplex {
            m: Complex64::from_polar(1.0, arg),
            e: HUGE_EXP,
        }
    }

    fn normalize(&mut self) {
        if !self.m.re.is_finite() || !self.m.im.is_finite() {
            let arg = if self.m.re.is_nan() || self.m.im.is_nan() {
                0.0
            } else {
                Complex64::new(
                    self.m.re.clamp(-f64::MAX, f64::MAX),
                    self.m.im.clamp(-f64::MAX, f64::MAX),
                )
                .arg()
            };
            *self = Self::huge(arg);
            return;
        }
        let big = self.m.re.abs().max(self.m.im.abs());
        if big == 0.0 {
            *self = Self::ZERO;
            return;
        }
        let k = frexp_exponent(big);
        if k != 0 {
            self.m = Complex64::new(ldexp(self.m.re, -k), ldexp(self.m.im, -k));
            self.e = self.e.saturating_add(k).min(HUGE_EXP);
        }
        if self.e < -HUGE_EXP {
            *self = Self::ZERO;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.m.re == 0.0 && self.m.im == 0.0
    }

    /// True when the value is past every representable scale (overflowed exp).
    pub fn is_huge(&self) -> bool {
        self.e >= HUGE_EXP
    }

    pub fn mantissa(&self) -> Complex64 {
        self.m
    }

    pub fn exponent(&self) -> i64 {
        self.e
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(ldexp(self.m.re, self.e), ldexp(self.m.im, self.e))
    }

    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        if self.is_huge() {
            return f64::INFINITY;
        }
        self.m.norm().ln() + self.e as f64 * LN_2
    }

    pub fn arg(&self) -> f64 {
        self.m.arg()
    }

    pub fn neg(&self) -> Self {
        ExtComplex {
            m: -self.m,
            e: self.e,
        }
    }

    pub fn conj(&self) -> Self {
        ExtComplex {
            m: self.m.conj(),
            e: self.e,
        }
    }

    pub fn mul_i(&self) -> Self {
        ExtComplex {
            m: Complex64::new(-self.m.im, self.m.re),
            e: self.e,
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        if self.is_zero() {
            return *o;
        }
        if o.is_zero() {
            return *self;
        }
        let (a, b) = if self.e >= o.e { (self, o) } else { (o, self) };
        let shift = a.e - b.e;
        if shift > 120 {
            return *a;
        }
        let bm = Complex64::new(ldexp(b.m.re, -shift), ldexp(b.m.im, -shift));
        Self::new(a.m + bm, a.e)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.m * o.m, self.e.saturating_add(o.e).min(HUGE_EXP))
    }

    pub fn scale(&self, x: f64) -> Self {
        Self::new(self.m * x, self.e)
    }

    pub fn recip(&self) -> Self {
        if self.is_zero() {
            return Self::huge(0.0);
        }
        Self::new(Complex64::new(1.0, 0.0) / self.m, -self.e)
    }

    pub fn div(&self, o: &Self) -> Self {
        self.mul(&o.recip())
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut acc = Self::from_real(1.0);
        let mut base = *self;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            k >>= 1;
        }
        acc
    }

    /// Principal square root.
    pub fn sqrt(&self) -> Self {
        if self.is_zero() {
            return Self::ZERO;
        }
        if self.e % 2 == 0 {
            Self::new(self.m.sqrt(), self.e / 2)
        } else {
            let e = self.e - 1;
            Self::new((self.m * 2.0).sqrt(), e / 2)
        }
    }

    fn real_part(&self) -> f64 {
        ldexp(self.m.re, self.e)
    }

    fn imag_part(&self) -> f64 {
        ldexp(self.m.im, self.e)
    }

    pub fn exp(&self) -> Self {
        let x = self.real_part();
        let y = self.imag_part();
        if x == f64::INFINITY {
            return Self::huge(0.0);
        }
        if x == f64::NEG_INFINITY || x < -1e18 {
            return Self::ZERO;
        }
        if x > 1e18 {
            return Self::huge(0.0);
        }
        let (k, r) = split_ln(x);
        Self::new(Complex64::from_polar(r.exp(), y), k)
    }

    /// `cosh(t)` and `sinh(t)` for real `t` of any size.
    fn cosh_sinh(t: f64) -> (Self, Self) {
        if t.abs() < 20.0 {
            (Self::from_real(t.cosh()), Self::from_real(t.sinh()))
        } else {
            let half = Self::from_polar_ln(t.abs() - LN_2, 0.0);
            let s = if t > 0.0 { half } else { half.neg() };
            (half, s)
        }
    }

    pub fn sin(&self) -> Self {
        let x = self.real_part();
        let y = self.imag_part();
        let (ch, sh) = Self::cosh_sinh(y);
        let re = ch.scale(x.sin());
        let im = sh.scale(x.cos()).mul_i();
        re.add(&im)
    }

    pub fn cos(&self) -> Self {
        let x = self.real_part();
        let y = self.imag_part();
        let (ch, sh) = Self::cosh_sinh(y);
        let re = ch.scale(x.cos());
        let im = sh.scale(-x.sin()).mul_i();
        re.add(&im)
    }

    pub fn cosh(&self) -> Self {
        self.mul_i().cos()
    }

    pub fn sinh(&self) -> Self {
        // sinh z = -i sin(iz)
        self.mul_i().sin().mul_i().neg()
    }

    pub fn tan(&self) -> Self {
        let x = self.real_part();
        let y = self.imag_part();
        if y.abs() > 40.0 {
            // tan z = i sign(y) (1 - 2 e^{2i z sign(y)} / (1 + ...)) ~ i sign(y)
            let s = y.signum();
            let w = Self::from_c64(Complex64::new(-2.0 * y.abs(), 2.0 * x * s)).exp();
            let num = Self::from_real(1.0).sub(&w);
            let den = Self::from_real(1.0).add(&w);
            return num.div(&den).mul_i().scale(s);
        }
        let (ch2, sh2) = Self::cosh_sinh(2.0 * y);
        let den = ch2.add(&Self::from_real((2.0 * x).cos()));
        let num = Self::from_real((2.0 * x).sin()).add(&sh2.mul_i());
        num.div(&den)
    }
}

/// Splits `x` into `k ln 2 + r` with `|r| <= ln 2 / 2`.
fn split_ln(x: f64) -> (i64, f64) {
    let k = (x / LN_2).round();
    let r = (x - k * LN2_HI) - k * LN2_LO;
    (k as i64, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1e-300)
    }

    #[test]
    fn elementary_functions_match_std() {
        let pts = [
            Complex64::new(0.3, -1.2),
            Complex64::new(-4.0, 2.5),
            Complex64::new(10.0, 0.1),
            Complex64::new(-0.01, 7.0),
        ];
        for z in pts {
            let e = ExtComplex::from_c64(z);
            assert!(close(e.exp().to_c64(), z.exp(), 1e-14));
            assert!(close(e.sin().to_c64(), z.sin(), 1e-14));
            assert!(close(e.cos().to_c64(), z.cos(), 1e-14));
            assert!(close(e.cosh().to_c64(), z.cosh(), 1e-14));
            assert!(close(e.sinh().to_c64(), z.sinh(), 1e-14));
            assert!(close(e.tan().to_c64(), z.tan(), 1e-13));
            assert!(close(e.sqrt().to_c64(), z.sqrt(), 1e-15));
        }
    }

    #[test]
    fn huge_exponentials_keep_log_magnitude() {
        let z = ExtComplex::from_c64(Complex64::new(1.0e6, 0.5));
        let w = z.exp();
        assert!((w.ln_abs() - 1.0e6).abs() < 1e-6);
        assert!((w.arg() - 0.5).abs() < 1e-12);
        let s = ExtComplex::from_c64(Complex64::new(0.3, 5000.0)).sin();
        assert!((s.ln_abs() - (5000.0 - LN_2)).abs() < 1e-9);
    }

    #[test]
    fn sums_align_exponents() {
        let big = ExtComplex::from_polar_ln(3000.0, 0.0);
        let one = ExtComplex::from_real(1.0);
        assert_eq!(big.add(&one).ln_abs(), big.ln_abs());
        let p = ExtComplex::from_polar_ln(200.0, 0.3).powi(6);
        assert!((p.ln_abs() - 1200.0).abs() < 1e-9);
        assert!((p.arg() - 1.8).abs() < 1e-12);
    }

    #[test]
    fn tan_far_from_axis_tends_to_i() {
        let t = ExtComplex::from_c64(Complex64::new(1.0, 100.0))
            .tan()
            .to_c64();
        assert!((t - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        let t = ExtComplex::from_c64(Complex64::new(1.0, -100.0))
            .tan()
            .to_c64();
        assert!((t - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }
}
