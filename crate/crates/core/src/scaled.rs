//! Complex numbers carried as `mantissa · e^{log_scale}` to survive the
//! exponential growth of solutions across the window.

use num_complex::Complex64 as C64;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Scaled {
    pub mantissa: C64,
    pub log_scale: f64,
}

impl Scaled {
    pub fn new(mantissa: C64, log_scale: f64) -> Self {
        Self { mantissa, log_scale }.normalized()
    }

    pub fn zero() -> Self {
        Self { mantissa: C64::new(0.0, 0.0), log_scale: 0.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == C64::new(0.0, 0.0)
    }

    /// `ln |self|`, `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.norm().ln() + self.log_scale
    }

    pub fn abs(&self) -> f64 {
        self.ln_abs().exp()
    }

    /// The value expressed at scale `s`: `self / e^s`.
    pub fn at_scale(&self, s: f64) -> C64 {
        if self.is_zero() {
            return self.mantissa;
        }
        self.mantissa * (self.log_scale - s).exp()
    }

    pub fn to_c64(&self) -> C64 {
        self.at_scale(0.0)
    }

    /// Move the magnitude of the mantissa into the scale.
    pub fn normalized(self) -> Self {
        let n = self.mantissa.norm();
        if n == 0.0 || !n.is_finite() {
            return self;
        }
        let l = n.ln();
        Self { mantissa: self.mantissa / n, log_scale: self.log_scale + l }
    }

    pub fn add(self, o: Self) -> Self {
        if self.is_zero() {
            return o;
        }
        if o.is_zero() {
            return self;
        }
        let s = self.log_scale.max(o.log_scale);
        Self::new(self.at_scale(s) + o.at_scale(s), s)
    }

    pub fn sub(self, o: Self) -> Self {
        self.add(o.mul_c(C64::new(-1.0, 0.0)))
    }

    pub fn mul_c(self, c: C64) -> Self {
        Self::new(self.mantissa * c, self.log_scale)
    }

    pub fn mul(self, o: Self) -> Self {
        Self::new(self.mantissa * o.mantissa, self.log_scale + o.log_scale)
    }

    pub fn div(self, o: Self) -> Self {
        Self::new(self.mantissa / o.mantissa, self.log_scale - o.log_scale)
    }
}

impl From<C64> for Scaled {
    fn from(c: C64) -> Self {
        Self::new(c, 0.0)
    }
}

/// Sum of scaled terms evaluated at the largest scale.
pub fn sum(terms: &[Scaled]) -> Scaled {
    terms.iter().fold(Scaled::zero(), |acc, t| acc.add(*t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_far_beyond_overflow() {
        let a = Scaled::new(C64::new(1.0, 1.0), 2000.0);
        let b = Scaled::new(C64::new(2.0, -1.0), 2000.0);
        let s = a.add(b);
        // the scale is stored to f64, so rounding grows like eps * 2000
        let tol = 1e-14 + 4.0 * f64::EPSILON * 2000.0;
        assert!((s.at_scale(2000.0) - C64::new(3.0, 0.0)).norm() < 3.0 * tol);
        let q = a.div(b);
        assert!((q.to_c64() - C64::new(1.0, 1.0) / C64::new(2.0, -1.0)).norm() < 1e-14);
        assert!((a.ln_abs() - (2000.0 + 2f64.sqrt().ln())).abs() < 1e-12);
        assert_eq!(Scaled::zero().add(a), a);
    }
}
