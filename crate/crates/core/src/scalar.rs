//! The arithmetic the catalog formulas need, implemented by both number types.

use num_complex::Complex64;

use crate::ext::ExtComplex;
use crate::hp::HpComplex;

pub trait Scalar: Clone + Send + Sync {
    /// A constant carried at the same precision as `self`.
    fn lift(&self, c: Complex64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale(&self, x: f64) -> Self;
    fn exp(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sinh(&self) -> Self;
    fn cosh(&self) -> Self;
    fn tan(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn pi(&self) -> Self;
    fn ln2(&self) -> Self;
    fn ln_abs(&self) -> f64;
    fn to_c64(&self) -> Complex64;
    fn to_ext(&self) -> ExtComplex;

    fn sq(&self) -> Self {
        self.mul(self)
    }
}

impl Scalar for ExtComplex {
    fn lift(&self, c: Complex64) -> Self {
        ExtComplex::from_c64(c)
    }
    fn add(&self, o: &Self) -> Self {
        ExtComplex::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        ExtComplex::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        ExtComplex::mul(self, o)
    }
    fn div(&self, o: &Self) -> Self {
        ExtComplex::div(self, o)
    }
    fn neg(&self) -> Self {
        ExtComplex::neg(self)
    }
    fn scale(&self, x: f64) -> Self {
        ExtComplex::scale(self, x)
    }
    fn exp(&self) -> Self {
        ExtComplex::exp(self)
    }
    fn sin(&self) -> Self {
        ExtComplex::sin(self)
    }
    fn cos(&self) -> Self {
        ExtComplex::cos(self)
    }
    fn sinh(&self) -> Self {
        ExtComplex::sinh(self)
    }
    fn cosh(&self) -> Self {
        ExtComplex::cosh(self)
    }
    fn tan(&self) -> Self {
        ExtComplex::tan(self)
    }
    fn sqrt(&self) -> Self {
        ExtComplex::sqrt(self)
    }
    fn pi(&self) -> Self {
        ExtComplex::from_real(std::f64::consts::PI)
    }
    fn ln2(&self) -> Self {
        ExtComplex::from_real(std::f64::consts::LN_2)
    }
    fn ln_abs(&self) -> f64 {
        ExtComplex::ln_abs(self)
    }
    fn to_c64(&self) -> Complex64 {
        ExtComplex::to_c64(self)
    }
    fn to_ext(&self) -> ExtComplex {
        *self
    }
}

impl Scalar for HpComplex {
    fn lift(&self, c: Complex64) -> Self {
        HpComplex::from_c64(c, self.precision())
    }
    fn add(&self, o: &Self) -> Self {
        HpComplex::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        HpComplex::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        HpComplex::mul(self, o)
    }
    fn div(&self, o: &Self) -> Self {
        HpComplex::div(self, o)
    }
    fn neg(&self) -> Self {
        HpComplex::neg(self)
    }
    fn scale(&self, x: f64) -> Self {
        self.mul_real_f64(x)
    }
    fn exp(&self) -> Self {
        HpComplex::exp(self)
    }
    fn sin(&self) -> Self {
        HpComplex::sin(self)
    }
    fn cos(&self) -> Self {
        HpComplex::cos(self)
    }
    fn sinh(&self) -> Self {
        HpComplex::sinh(self)
    }
    fn cosh(&self) -> Self {
        HpComplex::cosh(self)
    }
    fn tan(&self) -> Self {
        HpComplex::tan(self)
    }
    fn sqrt(&self) -> Self {
        HpComplex::sqrt(self)
    }
    fn pi(&self) -> Self {
        HpComplex::pi(self.precision())
    }
    fn ln2(&self) -> Self {
        HpComplex::ln2(self.precision())
    }
    fn ln_abs(&self) -> f64 {
        HpComplex::ln_abs(self)
    }
    fn to_c64(&self) -> Complex64 {
        HpComplex::to_c64(self)
    }
    fn to_ext(&self) -> ExtComplex {
        HpComplex::to_ext(self)
    }
}
