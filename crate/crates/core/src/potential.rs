//! Potentials `v(z)` with exact derivatives and Taylor expansions.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::analytic::AnalyticFunction;
use crate::dd::Cdd;
use crate::error::{Error, Result};
use crate::taylor::Taylor;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum PotentialKind {
    /// v = −2 − z
    Linear,
    /// v = −2 − z + c z²
    Quadratic(f64),
    /// v = −2 − sin z
    Sine,
    /// v = Σ a_k z^k
    Polynomial(Vec<C64>),
}

/// A potential on the disk `U`; `gauge` records the sign flip `v → −v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    pub kind: PotentialKind,
    pub center: C64,
    pub radius: f64,
    pub gauge: bool,
}

impl Potential {
    pub fn new(kind: PotentialKind, center: C64, radius: f64) -> Self {
        Self { kind, center, radius, gauge: false }
    }

    pub fn linear() -> Self {
        Self::new(PotentialKind::Linear, C64::new(0.0, 0.0), 1.0)
    }

    pub fn quadratic(c: f64) -> Self {
        Self::new(PotentialKind::Quadratic(c), C64::new(0.0, 0.0), 1.0)
    }

    pub fn sine() -> Self {
        Self::new(PotentialKind::Sine, C64::new(0.0, 0.0), 1.0)
    }

    pub fn polynomial(coeffs: Vec<C64>, center: C64, radius: f64) -> Self {
        Self::new(PotentialKind::Polynomial(coeffs), center, radius)
    }

    /// Built-in by name: `linear`, `quadratic`, `sine`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "linear" => Ok(Self::linear()),
            "quadratic" => Ok(Self::quadratic(0.2)),
            "sine" => Ok(Self::sine()),
            other => Err(Error::Config(format!("unknown potential '{other}'"))),
        }
    }

    pub fn label(&self) -> String {
        let base = match &self.kind {
            PotentialKind::Linear => "linear".to_string(),
            PotentialKind::Quadratic(c) => format!("quadratic({c})"),
            PotentialKind::Sine => "sine".to_string(),
            PotentialKind::Polynomial(a) => format!("polynomial(deg {})", a.len().saturating_sub(1)),
        };
        if self.gauge {
            format!("-({base})")
        } else {
            base
        }
    }

    fn sign(&self) -> f64 {
        if self.gauge {
            -1.0
        } else {
            1.0
        }
    }

    fn poly_coeffs(&self) -> Option<Vec<C64>> {
        let c = |x: f64| C64::new(x, 0.0);
        match &self.kind {
            PotentialKind::Linear => Some(vec![c(-2.0), c(-1.0)]),
            PotentialKind::Quadratic(q) => Some(vec![c(-2.0), c(-1.0), c(*q)]),
            PotentialKind::Polynomial(a) => Some(a.clone()),
            PotentialKind::Sine => None,
        }
    }

    pub fn eval(&self, z: C64) -> C64 {
        let v = match self.poly_coeffs() {
            Some(a) => a.iter().rev().fold(C64::new(0.0, 0.0), |acc, &ak| acc * z + ak),
            None => -2.0 - z.sin(),
        };
        v * self.sign()
    }

    /// [`Self::eval`] in double-double arithmetic.
    pub fn eval_dd(&self, z: Cdd) -> Cdd {
        let v = match self.poly_coeffs() {
            Some(a) => a.iter().rev().fold(Cdd::zero(), |acc, &ak| acc * z + ak),
            None => -(z.sin() + 2.0),
        };
        v * self.sign()
    }

    pub fn deriv(&self, z: C64) -> C64 {
        let d = match self.poly_coeffs() {
            Some(a) => {
                let mut acc = C64::new(0.0, 0.0);
                for (k, ak) in a.iter().enumerate().skip(1).rev() {
                    acc = acc * z + ak * k as f64;
                }
                acc
            }
            None => -z.cos(),
        };
        d * self.sign()
    }

    /// Exact Taylor coefficients at `center`.
    pub fn taylor(&self, center: C64, radius: f64, len: usize) -> Taylor {
        let c = match self.poly_coeffs() {
            Some(a) => {
                let p = Taylor::new(C64::new(0.0, 0.0), 1.0, a);
                let mut j = p.jet_at(center, len - 1);
                j.resize(len, C64::new(0.0, 0.0));
                j
            }
            None => {
                let (s, co) = (center.sin(), center.cos());
                let mut out = vec![C64::new(0.0, 0.0); len];
                let mut fact = 1.0;
                for (k, o) in out.iter_mut().enumerate() {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    // d^k/du^k sin(c+u) at 0 cycles through sin, cos, −sin, −cos
                    let d = match k % 4 {
                        0 => s,
                        1 => co,
                        2 => -s,
                        _ => -co,
                    };
                    *o = -d / fact;
                }
                out[0] -= 2.0;
                out
            }
        };
        Taylor::new(center, radius, c).scale(C64::new(self.sign(), 0.0))
    }

    /// The potential `−v`.
    pub fn gauge_flip(&self) -> Self {
        let mut p = self.clone();
        p.gauge = !p.gauge;
        p
    }

    pub fn as_analytic(&self) -> AnalyticFunction {
        let p = self.clone();
        AnalyticFunction::new(format!("v={}", self.label()), C64::new(0.0, 0.0), f64::INFINITY, move |z| p.eval(z))
    }

    pub fn in_u(&self, z: C64) -> bool {
        (z - self.center).norm() <= self.radius * (1.0 + 1e-12)
    }

    /// Winding number of `v − target` around the boundary of `U`.
    pub fn winding(&self, target: f64, radius: f64) -> i64 {
        let n = 2048;
        let mut total = 0.0;
        let mut prev = self.eval(self.center + radius) - target;
        for k in 1..=n {
            let z = self.center + C64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
            let cur = self.eval(z) - target;
            total += (cur / prev).arg();
            prev = cur;
        }
        (total / (2.0 * std::f64::consts::PI)).round() as i64
    }

    /// Exactly one turning point with `v = −2` and none with `v = 2` inside `U`.
    pub fn check_single_turning_point(&self) -> Result<()> {
        let a = self.winding(-2.0, self.radius);
        let b = self.winding(2.0, self.radius);
        if a != 1 || b != 0 {
            return Err(Error::Domain(format!(
                "U must contain one turning point with v=-2 and none with v=2 (found {a} and {b})"
            )));
        }
        Ok(())
    }
}

/// Gauge transform: `v(z0) = +2` is mapped to `−v`; `v(z0) = −2` is left alone.
pub fn normalize_potential(pot: &Potential, z0: C64) -> Result<Potential> {
    let v = pot.eval(z0);
    if (v + 2.0).norm() <= 1e-8 {
        return Ok(pot.clone());
    }
    if (v - 2.0).norm() <= 1e-8 {
        return Ok(pot.gauge_flip());
    }
    Err(Error::Argument(format!("v(z0) = {v} is not ±2")))
}

/// Turning point data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TurningPoint {
    pub z0: C64,
    pub v_prime: C64,
    /// Slope of `p ≈ k1 √(z − z0)`; `k1² = v'(z0)`.
    pub k1: C64,
}

/// Newton iteration on `v(z) + 2`.
pub fn find_turning_point(pot: &Potential, guess: C64) -> Result<TurningPoint> {
    let mut z = guess;
    for _ in 0..50 {
        let f = pot.eval(z) + 2.0;
        let d = pot.deriv(z);
        if f.norm() <= 1e-12 {
            for _ in 0..2 {
                let d = pot.deriv(z);
                if d.norm() > 0.0 {
                    z -= (pot.eval(z) + 2.0) / d;
                }
            }
            return finish_turning_point(pot, z);
        }
        if d.norm() == 0.0 {
            return Err(Error::Newton(format!("zero derivative at {z}")));
        }
        z -= f / d;
    }
    if (pot.eval(z) + 2.0).norm() <= 1e-12 {
        return finish_turning_point(pot, z);
    }
    Err(Error::Newton(format!("no convergence in 50 steps from {guess}")))
}

fn finish_turning_point(pot: &Potential, z0: C64) -> Result<TurningPoint> {
    let vp = pot.deriv(z0);
    if vp.norm() <= 1e-8 {
        return Err(Error::NotSimple(vp.norm()));
    }
    Ok(TurningPoint { z0, v_prime: vp, k1: vp.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn turning_point_examples() {
        let tp = find_turning_point(&Potential::linear(), c(0.1, 0.0)).unwrap();
        assert!(tp.z0.norm() < 1e-14);
        assert!((tp.v_prime + 1.0).norm() < 1e-15);
        let tp = find_turning_point(&Potential::sine(), c(0.2, 0.0)).unwrap();
        assert!(tp.z0.norm() < 1e-12);
        // −2 − z + z² has roots 0 and 1; from 0.3 Newton picks 0
        let p = Potential::polynomial(vec![c(-2.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)], c(0.0, 0.0), 0.5);
        let tp = find_turning_point(&p, c(0.3, 0.0)).unwrap();
        assert!(tp.z0.norm() < 1e-12);
        // v = −2 + z² has a double root
        let p = Potential::polynomial(vec![c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], c(0.0, 0.0), 1.0);
        assert!(matches!(find_turning_point(&p, c(0.0, 0.0)), Err(Error::NotSimple(_))));
    }

    #[test]
    fn gauge_examples() {
        let p = Potential::polynomial(vec![c(2.0, 0.0), c(-1.0, 0.0)], c(0.0, 0.0), 1.0);
        let n = normalize_potential(&p, c(0.0, 0.0)).unwrap();
        assert!(n.gauge);
        assert!((n.eval(c(0.3, 0.1)) - (c(-2.0, 0.0) + c(0.3, 0.1))).norm() < 1e-15);
        let l = Potential::linear();
        assert_eq!(normalize_potential(&l, c(0.0, 0.0)).unwrap(), l);
        assert_eq!(normalize_potential(&n, c(0.0, 0.0)).unwrap(), n);
        let back = n.gauge_flip().gauge_flip();
        assert_eq!(back.eval(c(0.2, 0.1)), n.eval(c(0.2, 0.1)));
        assert_eq!(n.gauge_flip().eval(c(0.2, 0.1)), p.eval(c(0.2, 0.1)));
        assert!(matches!(normalize_potential(&l, c(0.5, 0.0)), Err(Error::Argument(_))));
    }

    #[test]
    fn taylor_matches_values() {
        for p in [Potential::linear(), Potential::quadratic(0.2), Potential::sine()] {
            let t = p.taylor(c(0.1, -0.2), 1.0, 30);
            let z = c(0.4, 0.3);
            assert!((t.eval(z) - p.eval(z)).norm() < 1e-14, "{}", p.label());
            assert!((t.eval_d(z).1 - p.deriv(z)).norm() < 1e-13);
        }
    }

    #[test]
    fn builtins_have_one_turning_point() {
        for p in [Potential::linear(), Potential::quadratic(0.2), Potential::sine()] {
            p.check_single_turning_point().unwrap();
        }
    }
}
