//! Complex Airy functions and the rotated family `w_j(ζ) = 2πi ω^j Ai(ω^j ζ)`.
#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::Serialize;

/// Ai(0)
pub const AI0: f64 = 0.355028053887817239260;
/// Ai'(0)
pub const AIP0: f64 = -0.258819403792806798405;

/// Below this modulus the Maclaurin series is always used.
const SERIES_SAFE_RADIUS: f64 = 2.0;
/// Upper limit of the Maclaurin region.
pub const SERIES_RADIUS: f64 = 6.0;
/// Above this modulus the asymptotic expansion is accurate to ~1e-14.
pub const ASYMPTOTIC_RADIUS: f64 = 8.5;
/// Accepted relative rounding estimate for the Maclaurin sum.
const SERIES_LOSS_LIMIT: f64 = 1e-14;
/// Exponents beyond this are kept in scaled form.
const SCALE_LIMIT: f64 = 600.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AiryMethod {
    Series,
    Asymptotic,
    Connection,
    /// Taylor stepping of `w'' = ζ w` along a ray from an asymptotic start.
    Continuation,
}

/// `Ai` and `Ai'` at `argument`, scaled by `exp(log_scale)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AiryValue {
    pub argument: C64,
    pub value: C64,
    pub derivative: C64,
    pub log_scale: f64,
    pub method: AiryMethod,
}

impl AiryValue {
    pub fn is_scaled(&self) -> bool {
        self.log_scale != 0.0
    }

    /// Unscaled value and derivative (may overflow to infinity).
    pub fn unscaled(&self) -> (C64, C64) {
        let f = self.log_scale.exp();
        (self.value * f, self.derivative * f)
    }

    fn rescaled(mut self, target: f64) -> Self {
        let f = (self.log_scale - target).exp();
        self.value *= f;
        self.derivative *= f;
        self.log_scale = target;
        self
    }
}

/// ω = e^{2πi/3}
pub fn omega() -> C64 {
    C64::from_polar(1.0, 2.0 * PI / 3.0)
}

fn omega_pow(j: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * (j % 3) as f64 / 3.0)
}

/// Airy function and derivative.
pub fn airy_ai(z: C64) -> AiryValue {
    let r = z.norm();
    if r <= SERIES_SAFE_RADIUS {
        return series_value(z);
    }
    if r >= ASYMPTOTIC_RADIUS {
        return outer(z);
    }
    if r <= SERIES_RADIUS {
        let (ai, aip, loss) = maclaurin(z);
        if loss <= SERIES_LOSS_LIMIT {
            return AiryValue { argument: z, value: ai, derivative: aip, log_scale: 0.0, method: AiryMethod::Series };
        }
    }
    continuation(z)
}

fn series_value(z: C64) -> AiryValue {
    let (ai, aip, _) = maclaurin(z);
    AiryValue { argument: z, value: ai, derivative: aip, log_scale: 0.0, method: AiryMethod::Series }
}

/// Maclaurin sums `Ai = c1 f − c2 g` with an estimate of the relative rounding error.
pub fn maclaurin(z: C64) -> (C64, C64, f64) {
    let c1 = AI0;
    let c2 = -AIP0;
    let z3 = z * z * z;
    let z2 = z * z;
    // f terms t_k, g terms s_k, and their derivatives
    let mut t = C64::new(1.0, 0.0);
    let mut s = z;
    let mut r = C64::new(1.0, 0.0); // s_k / z
    let (mut f, mut g) = (t, s);
    let (mut fp, mut gp) = (C64::new(0.0, 0.0), r);
    let mut mag = c1 + c2 * z.norm();
    let mut magp = c2;
    for k in 0..200 {
        let kf = k as f64;
        let tp_next = t * z2 / (3.0 * kf + 2.0); // derivative of t_{k+1}
        t = t * z3 / ((3.0 * kf + 2.0) * (3.0 * kf + 3.0));
        s = s * z3 / ((3.0 * kf + 3.0) * (3.0 * kf + 4.0));
        r = r * z3 / ((3.0 * kf + 3.0) * (3.0 * kf + 4.0));
        let rp = r * (3.0 * kf + 4.0);
        f += t;
        g += s;
        fp += tp_next;
        gp += rp;
        let step = c1 * t.norm() + c2 * s.norm();
        let stepp = c1 * tp_next.norm() + c2 * rp.norm();
        mag += step;
        magp += stepp;
        if step <= 1e-18 * mag && stepp <= 1e-18 * magp && k > 2 {
            break;
        }
    }
    let ai = f * c1 - g * c2;
    let aip = fp * c1 - gp * c2;
    let loss = f64::EPSILON * (mag / ai.norm().max(1e-300)).max(magp / aip.norm().max(1e-300));
    (ai, aip, loss)
}

/// Asymptotic expansion for `|arg z| ≤ 2π/3`, connection formula beyond.
fn outer(z: C64) -> AiryValue {
    if z.arg().abs() <= 2.0 * PI / 3.0 + 1e-12 {
        let v = asymptotic(z);
        if v.log_scale.abs() < SCALE_LIMIT {
            v.rescaled(0.0)
        } else {
            v
        }
    } else {
        connection(z)
    }
}

/// Ai(z) = −ω Ai(ωz) − ω² Ai(ω²z).
fn connection(z: C64) -> AiryValue {
    let w = omega();
    let w2 = w * w;
    let a = asymptotic(w * z);
    let b = asymptotic(w2 * z);
    let s = a.log_scale.max(b.log_scale);
    let (a, b) = (a.rescaled(s), b.rescaled(s));
    let v = AiryValue {
        argument: z,
        value: -w * a.value - w2 * b.value,
        derivative: -w2 * a.derivative - w * b.derivative,
        log_scale: s,
        method: AiryMethod::Connection,
    };
    if s.abs() < SCALE_LIMIT {
        v.rescaled(0.0)
    } else {
        v
    }
}

/// Scaled asymptotic expansion, valid for `|arg z| < π`, large `|z|`.
fn asymptotic(z: C64) -> AiryValue {
    let sq = z.sqrt();
    let q = z.powf(0.25);
    let xi = z * sq * (2.0 / 3.0);
    let mut u = 1.0;
    let mut sum = C64::new(1.0, 0.0);
    let mut sump = C64::new(1.0, 0.0);
    let mut term = C64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let v = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u;
        term = term * (-1.0) / xi;
        let tu = term * u;
        let tv = term * v;
        let size = tu.norm().max(tv.norm());
        if size > last {
            break;
        }
        sum += tu;
        sump += tv;
        last = size;
        if size < 1e-17 {
            break;
        }
    }
    // e^{-ξ} = e^{-Re ξ} · e^{-i Im ξ}; keep the modulus in log_scale.
    let phase = C64::from_polar(1.0, -xi.im);
    let pref = phase / (2.0 * PI.sqrt());
    AiryValue {
        argument: z,
        value: pref * sum / q,
        derivative: -pref * q * sump,
        log_scale: -xi.re,
        method: AiryMethod::Asymptotic,
    }
}

/// Integrate the Airy equation along the ray through `z`, in the direction
/// in which Ai grows: inward from the asymptotic radius near the recessive
/// sector, outward from the series disk elsewhere.
fn continuation(z: C64) -> AiryValue {
    let a = if z.arg().abs() < PI / 2.0 {
        outer(z * (ASYMPTOTIC_RADIUS / z.norm()))
    } else {
        series_value(z * (SERIES_SAFE_RADIUS / z.norm()))
    };
    let start = a.argument;
    let (y, yp) = taylor_step_path(start, z, a.value, a.derivative);
    AiryValue { argument: z, value: y, derivative: yp, log_scale: a.log_scale, method: AiryMethod::Continuation }
}

/// Advance a solution of `y'' = x y` from `a` to `b` along the segment.
pub fn taylor_step_path(a: C64, b: C64, mut y: C64, mut yp: C64) -> (C64, C64) {
    let len = (b - a).norm();
    let steps = (len / 0.5).ceil().max(1.0) as usize;
    let ds = (b - a) / steps as f64;
    let mut c = a;
    for _ in 0..steps {
        let (ny, nyp) = taylor_step(c, ds, y, yp);
        y = ny;
        yp = nyp;
        c += ds;
    }
    (y, yp)
}

fn taylor_step(c: C64, s: C64, y: C64, yp: C64) -> (C64, C64) {
    // a_{k+2} = (c a_k + a_{k-1}) / ((k+2)(k+1))
    let mut am1 = C64::new(0.0, 0.0);
    let mut a0 = y;
    let mut a1 = yp;
    let mut val = a0 + a1 * s;
    let mut der = a1;
    let mut sk = s; // s^(k+1) for the next derivative term
    let mut spow = s * s;
    let scale = y.norm() + yp.norm() * s.norm();
    for k in 0..80 {
        let kf = k as f64;
        let a2 = (c * a0 + am1) / ((kf + 2.0) * (kf + 1.0));
        val += a2 * spow;
        der += a2 * (kf + 2.0) * sk;
        let small = (a2 * spow).norm() <= 1e-18 * scale;
        spow *= s;
        sk *= s;
        am1 = a0;
        a0 = a1;
        a1 = a2;
        if small && k > 4 {
            break;
        }
    }
    (val, der)
}

/// `w_j(ζ)` and `w_j'(ζ)`.
pub fn w_j(j: usize, zeta: C64) -> AiryValue {
    let wj = omega_pow(j);
    let a = airy_ai(wj * zeta);
    let pre = C64::new(0.0, 2.0 * PI) * wj;
    AiryValue {
        argument: zeta,
        value: pre * a.value,
        derivative: pre * wj * a.derivative,
        log_scale: a.log_scale,
        method: a.method,
    }
}

/// The constant Wronskian `w_0 w_1' − w_0' w_1`, from the values at 0.
pub fn w01_wronskian() -> C64 {
    let a = w_j(0, C64::new(0.0, 0.0));
    let b = w_j(1, C64::new(0.0, 0.0));
    a.value * b.derivative - a.derivative * b.value
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn ai(z: C64) -> (C64, C64) {
        airy_ai(z).unscaled()
    }

    #[test]
    fn values_at_zero_and_one() {
        let (a, ap) = ai(c(0.0, 0.0));
        assert!((a.re - 0.3550280538878172).abs() < 1e-15 && a.im == 0.0);
        assert!((ap.re + 0.2588194037928068).abs() < 1e-15);
        let (a1, _) = ai(c(1.0, 0.0));
        assert!((a1.re - 0.1352924163128814).abs() < 1e-12);
    }

    #[test]
    fn reference_values() {
        // Ai(5), Ai(-5), Ai(10), Ai'(-10)
        let cases = [
            (c(5.0, 0.0), 1.0834442813607441e-4, true),
            (c(-5.0, 0.0), 0.3507610090241142, true),
            (c(10.0, 0.0), 1.1047532552898687e-10, true),
            (c(-10.0, 0.0), 0.9962650441327729, false),
        ];
        for (z, want, value) in cases {
            let (a, ap) = ai(z);
            let got = if value { a } else { ap };
            assert!(((got.re - want) / want).abs() < 1e-11, "z={z} got {got} want {want}");
            assert!(got.im.abs() < 1e-11 * want.abs());
        }
    }

    #[test]
    fn methods_agree_across_switches() {
        for k in 0..24 {
            let th = -PI + 2.0 * PI * (k as f64 + 0.3) / 24.0;
            let z = C64::from_polar(7.0, th);
            let (a, ap) = ai(z);
            // continue from an independent start on a different radius
            let start = C64::from_polar(1.5, th);
            let (y0, y1) = ai(start);
            let (b, bp) = taylor_step_path(start, z, y0, y1);
            let scale = a.norm().max(b.norm());
            if z.arg().abs() > 1.3 {
                // outward integration is stable outside the recessive sector
                assert!((a - b).norm() <= 1e-10 * scale, "th={th} {a} {b}");
                assert!((ap - bp).norm() <= 1e-10 * ap.norm().max(bp.norm()));
            }
        }
    }

    #[test]
    fn rotated_family_sums_to_zero() {
        for z in [c(0.0, 0.0), c(3.0, -4.0), c(-12.0, 5.0), c(0.5, 17.0)] {
            let ws: Vec<AiryValue> = (0..3).map(|j| w_j(j, z)).collect();
            let vals: Vec<C64> = ws.iter().map(|w| w.unscaled().0).collect();
            let m = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!((vals[0] + vals[1] + vals[2]).norm() <= 1e-12 * m, "z={z}");
        }
        assert_eq!(w_j(0, c(1.5, 0.0)).value, c(0.0, 2.0 * PI) * airy_ai(c(1.5, 0.0)).value);
    }

    #[test]
    fn scaled_representation_beyond_overflow() {
        let v = airy_ai(c(120.0, 0.0));
        assert!(v.is_scaled());
        let xi = (2.0 / 3.0) * 120f64.powf(1.5);
        assert!((v.log_scale + xi).abs() < 1e-9);
        let lead = 1.0 / (2.0 * PI.sqrt() * 120f64.powf(0.25));
        assert!((v.value.re / lead - 1.0).abs() < 1e-2);
    }
}
