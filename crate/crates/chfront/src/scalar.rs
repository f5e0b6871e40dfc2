//! Complex scalars with an optional forward-mode derivative.
//!
//! The matching determinant is written once, generically over [`Scalar`], and
//! evaluated either on plain `C64` values or on [`Dual`] numbers to get an
//! exact derivative with respect to one parameter.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64 as C64;

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn from_c(z: C64) -> Self;
    fn val(self) -> C64;
    fn exp(self) -> Self;

    fn from_re(x: f64) -> Self {
        Self::from_c(C64::new(x, 0.0))
    }
    fn zero() -> Self {
        Self::from_re(0.0)
    }
    fn one() -> Self {
        Self::from_re(1.0)
    }
    fn scale(self, s: C64) -> Self {
        self * Self::from_c(s)
    }
}

impl Scalar for C64 {
    fn from_c(z: C64) -> Self {
        z
    }
    fn val(self) -> C64 {
        self
    }
    fn exp(self) -> Self {
        C64::exp(self)
    }
}

/// `v + d·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub v: C64,
    pub d: C64,
}

impl Dual {
    pub fn new(v: C64, d: C64) -> Self {
        Self { v, d }
    }
    pub fn constant(v: C64) -> Self {
        Self { v, d: C64::new(0.0, 0.0) }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.v + o.v, self.d + o.d)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.v - o.v, self.d - o.d)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.v * o.v, self.d * o.v + self.v * o.d)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let q = self.v / o.v;
        Dual::new(q, (self.d - q * o.d) / o.v)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.v, -self.d)
    }
}

impl AddAssign for Dual {
    fn add_assign(&mut self, o: Dual) {
        *self = *self + o;
    }
}

impl SubAssign for Dual {
    fn sub_assign(&mut self, o: Dual) {
        *self = *self - o;
    }
}

impl MulAssign for Dual {
    fn mul_assign(&mut self, o: Dual) {
        *self = *self * o;
    }
}

impl Scalar for Dual {
    fn from_c(z: C64) -> Self {
        Dual::constant(z)
    }
    fn val(self) -> C64 {
        self.v
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        Dual::new(e, self.d * e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_derivative_of_rational_exp() {
        // f(z) = exp(z²) / (1 + z), f' = f·(2z − 1/(1+z))
        let z0 = C64::new(0.3, -0.7);
        let z = Dual::new(z0, C64::new(1.0, 0.0));
        let f = (z * z).exp() / (Dual::one() + z);
        let expect = f.v * (2.0 * z0 - 1.0 / (1.0 + z0));
        assert!((f.d - expect).norm() < 1e-14);
    }
}
