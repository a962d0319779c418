//! Double-double real and complex numbers, accurate to ~1e-31.
//!
//! Arithmetic follows the usual two-sum / fused two-product error-free
//! transforms; exp, ln, sin/cos and atan2 come from series and Newton steps
//! seeded by the f64 libm values.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64 as C64;

/// An unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    fn norm(hi: f64, lo: f64) -> Dd {
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Dd {
        assert!(self.hi >= 0.0, "sqrt of negative {}", self.hi);
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        let x = self.hi.sqrt();
        let (p, e) = two_prod(x, x);
        let r = self - Dd { hi: p, lo: e };
        let (hi, lo) = two_sum(x, r.hi / (2.0 * x));
        Dd::norm(hi, lo)
    }

    pub fn recip(self) -> Dd {
        Dd::ONE / self
    }
}

pub fn dd(x: f64) -> Dd {
    Dd { hi: x, lo: 0.0 }
}

/// `hi + lo`, renormalized.
pub fn dd_pair(hi: f64, lo: f64) -> Dd {
    let (hi, lo) = two_sum(hi, lo);
    Dd { hi, lo }
}

pub fn to_f64(x: Dd) -> f64 {
    x.hi + x.lo
}

pub fn pi() -> Dd {
    Dd { hi: std::f64::consts::PI, lo: 1.2246467991473532e-16 }
}

fn ln2() -> Dd {
    Dd { hi: std::f64::consts::LN_2, lo: 2.3190468138462996e-17 }
}

fn frac_pi_2() -> Dd {
    Dd { hi: std::f64::consts::FRAC_PI_2, lo: 6.123233995736766e-17 }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, o: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&o.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&o.lo),
            other => other,
        }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Dd::norm(s, e + f)
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        Dd::norm(p, e + (self.hi * o.lo + self.lo * o.hi))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * q1;
        let q2 = r.hi / o.hi;
        let r = r - o * q2;
        let q3 = r.hi / o.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Dd { hi: q1, lo: q2 } + q3
    }
}

impl Add<f64> for Dd {
    type Output = Dd;
    fn add(self, o: f64) -> Dd {
        let (s, e) = two_sum(self.hi, o);
        Dd::norm(s, e + self.lo)
    }
}

impl Sub<f64> for Dd {
    type Output = Dd;
    fn sub(self, o: f64) -> Dd {
        self + (-o)
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, o: f64) -> Dd {
        let (p, e) = two_prod(self.hi, o);
        Dd::norm(p, e + self.lo * o)
    }
}

impl Div<f64> for Dd {
    type Output = Dd;
    fn div(self, o: f64) -> Dd {
        let q1 = self.hi / o;
        let r = self - dd(o) * q1;
        let q2 = r.hi / o;
        let r = r - dd(o) * q2;
        let q3 = r.hi / o;
        let (q1, q2) = quick_two_sum(q1, q2);
        Dd { hi: q1, lo: q2 } + q3
    }
}

impl AddAssign for Dd {
    fn add_assign(&mut self, o: Dd) {
        *self = *self + o;
    }
}

impl SubAssign for Dd {
    fn sub_assign(&mut self, o: Dd) {
        *self = *self - o;
    }
}

/// `e^x`, for `|x| < 700`.
pub fn exp(x: Dd) -> Dd {
    if x.hi() == 0.0 {
        return dd(1.0);
    }
    assert!(x.hi().abs() < 700.0, "exp argument {} out of range", x.hi());
    let k = (x.hi() / std::f64::consts::LN_2).round();
    let r = x - ln2() * k;
    let mut term = dd(1.0);
    let mut sum = dd(1.0);
    for n in 1..40 {
        term = term * r / n as f64;
        sum += term;
        if term.hi().abs() < 1e-36 {
            break;
        }
    }
    sum * 2f64.powi(k as i32)
}

/// Natural log of a positive number.
pub fn ln(x: Dd) -> Dd {
    assert!(x.hi() > 0.0, "ln of non-positive {}", x.hi());
    let y = dd(x.hi().ln());
    y + x * exp(-y) - 1.0
}

/// `(sin x, cos x)` after reduction modulo π/2.
pub fn sin_cos(x: Dd) -> (Dd, Dd) {
    let k = (x.hi() / std::f64::consts::FRAC_PI_2).round();
    let r = x - frac_pi_2() * k;
    let r2 = r * r;
    let (mut s, mut c) = (r, dd(1.0));
    let (mut ts, mut tc) = (r, dd(1.0));
    for n in 1..20 {
        let n2 = 2.0 * n as f64;
        ts = -ts * r2 / (n2 * (n2 + 1.0));
        tc = -tc * r2 / ((n2 - 1.0) * n2);
        s += ts;
        c += tc;
        if tc.hi().abs() < 1e-36 && ts.hi().abs() < 1e-36 {
            break;
        }
    }
    match (k as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

/// `atan2(y, x)`, one Newton step from the f64 angle.
pub fn atan2(y: Dd, x: Dd) -> Dd {
    let t = dd(y.hi().atan2(x.hi()));
    if x.hi() == 0.0 && y.hi() == 0.0 {
        return t;
    }
    let (s, c) = sin_cos(t);
    t + (y * c - x * s) / (x * c + y * s)
}

/// Complex double-double.
#[derive(Clone, Copy, PartialEq)]
pub struct Cdd {
    pub re: Dd,
    pub im: Dd,
}

impl fmt::Debug for Cdd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:e}{:+e}, {:e}{:+e}i)", self.re.hi(), self.re.lo(), self.im.hi(), self.im.lo())
    }
}

impl Cdd {
    pub fn new(re: Dd, im: Dd) -> Self {
        Self { re, im }
    }

    pub fn zero() -> Self {
        Self::from_f64(0.0)
    }

    pub fn one() -> Self {
        Self::from_f64(1.0)
    }

    pub fn i() -> Self {
        Self::new(dd(0.0), dd(1.0))
    }

    pub fn from_f64(x: f64) -> Self {
        Self::new(dd(x), dd(0.0))
    }

    pub fn from_c64(z: C64) -> Self {
        Self::new(dd(z.re), dd(z.im))
    }

    pub fn polar(r: Dd, theta: Dd) -> Self {
        let (s, c) = sin_cos(theta);
        Self::new(r * c, r * s)
    }

    pub fn to_c64(self) -> C64 {
        C64::new(to_f64(self.re), to_f64(self.im))
    }

    pub fn norm_sqr(self) -> Dd {
        self.re * self.re + self.im * self.im
    }

    pub fn abs(self) -> Dd {
        let n = self.norm_sqr();
        if n.hi() == 0.0 {
            dd(0.0)
        } else {
            n.sqrt()
        }
    }

    /// Modulus in f64, adequate for size tests.
    pub fn norm(self) -> f64 {
        self.re.hi().hypot(self.im.hi())
    }

    pub fn arg(self) -> Dd {
        atan2(self.im, self.re)
    }

    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    pub fn scale(self, k: Dd) -> Self {
        Self::new(self.re * k, self.im * k)
    }

    pub fn mul_i(self) -> Self {
        Self::new(-self.im, self.re)
    }

    pub fn recip(self) -> Self {
        let n = self.norm_sqr();
        Self::new(self.re / n, -self.im / n)
    }

    pub fn exp(self) -> Self {
        Self::polar(exp(self.re), self.im)
    }

    /// Principal logarithm.
    pub fn ln(self) -> Self {
        Self::new(ln(self.norm_sqr()) / 2.0, self.arg())
    }

    /// Principal square root.
    pub fn sqrt(self) -> Self {
        if self.re.hi() == 0.0 && self.im.hi() == 0.0 {
            return Self::zero();
        }
        let r = self.abs();
        if self.re.hi() >= 0.0 {
            let t = ((r + self.re) / 2.0).sqrt();
            Self::new(t, self.im / (t * 2.0))
        } else {
            let t = ((r - self.re) / 2.0).sqrt();
            let s = if self.im.hi() < 0.0 { -1.0 } else { 1.0 };
            Self::new(self.im.abs() / (t * 2.0), t * s)
        }
    }

    /// Principal power `z^a`.
    pub fn powf(self, a: f64) -> Self {
        if self.re.hi() == 0.0 && self.im.hi() == 0.0 {
            return Self::zero();
        }
        (self.ln() * a).exp()
    }

    pub fn sin(self) -> Self {
        let (s, c) = sin_cos(self.re);
        let (sh, ch) = sinh_cosh(self.im);
        Self::new(s * ch, c * sh)
    }

    pub fn cos(self) -> Self {
        let (s, c) = sin_cos(self.re);
        let (sh, ch) = sinh_cosh(self.im);
        Self::new(c * ch, -s * sh)
    }

    pub fn is_finite(self) -> bool {
        self.re.hi().is_finite() && self.im.hi().is_finite()
    }
}

/// `(sinh y, cosh y)` with a series for small `|y|`.
fn sinh_cosh(y: Dd) -> (Dd, Dd) {
    if y.hi().abs() < 0.5 {
        let y2 = y * y;
        let (mut s, mut c) = (y, dd(1.0));
        let (mut ts, mut tc) = (y, dd(1.0));
        for n in 1..25 {
            let n2 = 2.0 * n as f64;
            ts = ts * y2 / (n2 * (n2 + 1.0));
            tc = tc * y2 / ((n2 - 1.0) * n2);
            s += ts;
            c += tc;
            if tc.hi().abs() < 1e-36 {
                break;
            }
        }
        (s, c)
    } else {
        let e = exp(y);
        let ei = e.recip();
        ((e - ei) / 2.0, (e + ei) / 2.0)
    }
}

impl From<C64> for Cdd {
    fn from(z: C64) -> Self {
        Self::from_c64(z)
    }
}

impl Add for Cdd {
    type Output = Cdd;
    fn add(self, o: Cdd) -> Cdd {
        Cdd::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for Cdd {
    type Output = Cdd;
    fn sub(self, o: Cdd) -> Cdd {
        Cdd::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for Cdd {
    type Output = Cdd;
    fn mul(self, o: Cdd) -> Cdd {
        Cdd::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}

impl Div for Cdd {
    type Output = Cdd;
    fn div(self, o: Cdd) -> Cdd {
        self * o.recip()
    }
}

impl Neg for Cdd {
    type Output = Cdd;
    fn neg(self) -> Cdd {
        Cdd::new(-self.re, -self.im)
    }
}

impl Add<f64> for Cdd {
    type Output = Cdd;
    fn add(self, o: f64) -> Cdd {
        Cdd::new(self.re + o, self.im)
    }
}

impl Sub<f64> for Cdd {
    type Output = Cdd;
    fn sub(self, o: f64) -> Cdd {
        Cdd::new(self.re - o, self.im)
    }
}

impl Mul<f64> for Cdd {
    type Output = Cdd;
    fn mul(self, k: f64) -> Cdd {
        Cdd::new(self.re * k, self.im * k)
    }
}

impl Mul<Dd> for Cdd {
    type Output = Cdd;
    fn mul(self, k: Dd) -> Cdd {
        self.scale(k)
    }
}

impl Div<f64> for Cdd {
    type Output = Cdd;
    fn div(self, k: f64) -> Cdd {
        Cdd::new(self.re / k, self.im / k)
    }
}

impl Mul<C64> for Cdd {
    type Output = Cdd;
    fn mul(self, o: C64) -> Cdd {
        self * Cdd::from_c64(o)
    }
}

impl Add<C64> for Cdd {
    type Output = Cdd;
    fn add(self, o: C64) -> Cdd {
        self + Cdd::from_c64(o)
    }
}

impl AddAssign for Cdd {
    fn add_assign(&mut self, o: Cdd) {
        *self = *self + o;
    }
}

impl SubAssign for Cdd {
    fn sub_assign(&mut self, o: Cdd) {
        *self = *self - o;
    }
}

impl MulAssign for Cdd {
    fn mul_assign(&mut self, o: Cdd) {
        *self = *self * o;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // 40-digit references
    fn close(x: Dd, hi: f64, lo: f64, tol: f64) -> bool {
        let want = dd_pair(hi, lo);
        ((x - want) / want).abs().hi() < tol
    }

    #[test]
    fn real_functions_reach_double_double_accuracy() {
        let b = dd(0.7) / 3.0;
        let a = dd(300.125);
        assert!(close(exp(b), 1.2628023432938014, -8.07147187797336e-17, 1e-30));
        assert!(close(exp(-a / 7.0), 2.396757463279964e-19, 3.248390396944114e-36, 1e-30));
        assert!(close(ln(b), -1.4552872326068422, 9.553853614939192e-17, 1e-30));
        assert!(close(sin_cos(a).0, -0.9947103022661039, -1.1197514473309345e-17, 1e-30));
        assert!(close(atan2(b, dd(-0.3)), 2.4805494847391065, -1.4826672907831086e-16, 1e-30));
        assert!(close(exp(dd(1.0)), std::f64::consts::E, 1.4456468917292502e-16, 1e-30));
        assert!(close(ln(dd(10.0)), std::f64::consts::LN_10, -2.1707562233822494e-16, 1e-30));
        assert!(close(sin_cos(dd(1.0)).0, 0.8414709848078965, 1.776845092935536e-18, 1e-30));
        assert!(close(sin_cos(dd(100.0)).1, 0.8623188722876839, 4.334809858136501e-17, 1e-30));
        assert!(close(atan2(dd(1.0), dd(2.0)), 0.4636476090008061, 2.2698777452961687e-17, 1e-30));
    }

    #[test]
    fn complex_identities() {
        let z = Cdd::from_c64(C64::new(0.3, -1.7));
        let r = z.sqrt();
        assert!((r * r - z).norm() < 1e-30);
        assert!((z.ln().exp() - z).norm() < 1e-30);
        let s = z.sin();
        let c = z.cos();
        assert!((s * s + c * c - 1.0).norm() < 1e-30);
        assert!((z.powf(1.5) * z.powf(-0.5) - z).norm() < 1e-30);
        assert!((z.to_c64().sqrt() - r.to_c64()).norm() < 1e-15);
        let neg = Cdd::from_c64(C64::new(-4.0, 0.0));
        assert_eq!(neg.sqrt().to_c64(), C64::new(0.0, 2.0));
    }
}
