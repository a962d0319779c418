//! Complex momentum, the turning-point map ζ, and the derived `g`, `A_0`, `ρ_j`.
//!
//! Two representations of ζ are kept. The power series at `z0` is built by
//! exact series arithmetic from the Taylor expansion of `v` and supplies the
//! jets used by the coefficient pipeline. The quadrature route integrates the
//! momentum from the turning point and takes the 2/3 power; it backs
//! [`ZetaMap::zeta`] and serves as the independent check of the series.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::analytic::{cauchy_derivatives, default_cauchy_radius, integrate_from_turning_point, AnalyticFunction, QuadratureConfig};
use crate::error::{Error, Result};
use crate::potential::{find_turning_point, Potential, TurningPoint};
use crate::taylor::Taylor;

/// Number of Taylor coefficients kept for ζ and derived series.
pub const MODEL_LEN: usize = 64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A determination of the momentum: `s · arccos(−v/2) + 2πn`, continued from
/// `base` along the straight segment when a base point is given.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentumBranch {
    pub sign: i8,
    pub offset: i64,
    pub base: Option<C64>,
}

impl Default for MomentumBranch {
    fn default() -> Self {
        Self { sign: 1, offset: 0, base: None }
    }
}

/// `p` with `2 cos p + v(z) = 0` on the given branch.
pub fn momentum(pot: &Potential, z: C64, branch: &MomentumBranch) -> Result<C64> {
    let acos = |x: C64| (-x / 2.0).acos();
    let p = match branch.base {
        None => acos(pot.eval(z)),
        Some(b) => {
            let n = 256;
            let mut prev = acos(pot.eval(b));
            for k in 1..=n {
                let x = b + (z - b) * (k as f64 / n as f64);
                let v = pot.eval(x);
                if (v + 2.0).norm() < 1e-9 || (v - 2.0).norm() < 1e-9 {
                    return Err(Error::Domain(format!("continuation path meets a turning point near {x}")));
                }
                let a = acos(v);
                let near = |cand: C64| {
                    let k = ((prev - cand).re / (2.0 * PI)).round();
                    cand + 2.0 * PI * k
                };
                let (p1, p2) = (near(a), near(-a));
                prev = if (p1 - prev).norm() <= (p2 - prev).norm() { p1 } else { p2 };
            }
            prev
        }
    };
    Ok(p * branch.sign as f64 + 2.0 * PI * branch.offset as f64)
}

/// Principal momentum at `base` continued along the segment to `z`, with
/// its integral over the segment.
fn continued_action(pot: &Potential, base: C64, z: C64) -> Result<(C64, C64)> {
    let pick = |prev: C64, v: C64| {
        let a = (-v / 2.0).acos();
        let near = |cand: C64| cand + 2.0 * PI * ((prev - cand).re / (2.0 * PI)).round();
        let (p1, p2) = (near(a), near(-a));
        if (p1 - prev).norm() <= (p2 - prev).norm() { p1 } else { p2 }
    };
    let mut p = (pot.eval(base) / -2.0).acos();
    if z == base {
        return Ok((p, c(0.0, 0.0)));
    }
    let rule = crate::analytic::gauss_legendre(16);
    let panels = 128;
    let dz = (z - base) / panels as f64;
    let mut acc = c(0.0, 0.0);
    for k in 0..panels {
        let a = base + dz * k as f64;
        let mid = a + dz / 2.0;
        let mut prev = p;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let pt = mid + dz / 2.0 * *x;
            let v = pot.eval(pt);
            if (v + 2.0).norm() < 1e-9 || (v - 2.0).norm() < 1e-9 {
                return Err(Error::Domain(format!("continuation path meets a turning point near {pt}")));
            }
            prev = pick(prev, v);
            acc += prev * dz / 2.0 * *w;
        }
        p = pick(prev, pot.eval(a + dz));
    }
    Ok((p, acc))
}

/// The conformal map ζ near a simple turning point of a normalized potential.
#[derive(Debug)]
pub struct ZetaMap {
    pub pot: Potential,
    pub tp: TurningPoint,
    /// Branch selector of the 2/3 power.
    pub ell: usize,
    /// Radius of the certified disk `U` around `z0`.
    pub radius: f64,
    /// Radius on which the series model is trusted.
    pub model_radius: f64,
    pub quad: QuadratureConfig,
    zeta: Taylor,
    zeta_tilde: Taylor,
    zeta_prime: Taylor,
    g: Taylor,
    a0: Taylor,
    sqrt_zt0: C64,
    s0: C64,
    s0_pow: C64,
    q_half: C64,
    sign: OnceLock<i8>,
    cache: Mutex<HashMap<(u64, u64), C64>>,
}

impl Clone for ZetaMap {
    fn clone(&self) -> Self {
        let sign = OnceLock::new();
        if let Some(s) = self.sign.get() {
            let _ = sign.set(*s);
        }
        Self {
            pot: self.pot.clone(),
            tp: self.tp,
            ell: self.ell,
            radius: self.radius,
            model_radius: self.model_radius,
            quad: self.quad,
            zeta: self.zeta.clone(),
            zeta_tilde: self.zeta_tilde.clone(),
            zeta_prime: self.zeta_prime.clone(),
            g: self.g.clone(),
            a0: self.a0.clone(),
            sqrt_zt0: self.sqrt_zt0,
            s0: self.s0,
            s0_pow: self.s0_pow,
            q_half: self.q_half,
            sign,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

/// Coefficients of `sinh(√w)/√w`.
fn shc_coeffs(n: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(n);
    let mut f = 1.0;
    for k in 0..n {
        if k > 0 {
            f *= ((2 * k) * (2 * k + 1)) as f64;
        }
        out.push(c(1.0 / f, 0.0));
    }
    out
}

/// Coefficients of `4 arcsin²(√s)` in powers of `s`.
fn arcsin_sq_coeffs(n: usize) -> Vec<C64> {
    let mut out = vec![c(0.0, 0.0); n];
    let mut d = 4.0;
    for k in 1..n {
        out[k] = c(d, 0.0);
        let kf = k as f64;
        d *= 2.0 * kf * kf / ((kf + 1.0) * (2.0 * kf + 1.0));
    }
    out
}

/// `sinh(√w)/√w` for a scalar.
pub fn shc(w: C64) -> C64 {
    if w.norm() < 1e-3 {
        shc_coeffs(12).iter().rev().fold(c(0.0, 0.0), |acc, &a| acc * w + a)
    } else {
        let r = w.sqrt();
        r.sinh() / r
    }
}

/// `cosh(√w)` for a scalar.
pub fn ch(w: C64) -> C64 {
    w.sqrt().cosh()
}

impl ZetaMap {
    /// Locate the turning point near `guess`, normalizing `v(z0) = 2` to `−2`.
    pub fn for_potential(pot: &Potential, guess: C64, ell: usize) -> Result<Self> {
        match find_turning_point(pot, guess) {
            Ok(tp) => Self::new(pot.clone(), tp, ell),
            Err(e) => {
                let flipped = pot.gauge_flip();
                match find_turning_point(&flipped, guess) {
                    Ok(tp) => Self::new(flipped, tp, ell),
                    Err(_) => Err(e),
                }
            }
        }
    }

    pub fn new(pot: Potential, tp: TurningPoint, ell: usize) -> Result<Self> {
        let z0 = tp.z0;
        if (pot.eval(z0) + 2.0).norm() > 1e-10 {
            return Err(Error::Argument("potential is not normalized: v(z0) != -2".into()));
        }
        let radius = pot.radius - (z0 - pot.center).norm();
        if !(radius > 0.0) {
            return Err(Error::Domain("turning point outside U".into()));
        }
        let n = MODEL_LEN;
        let nominal = radius;
        let v = pot.taylor(z0, nominal, n);
        let mut s = v.add_const(c(2.0, 0.0)).scale(c(0.25, 0.0));
        s.c[0] = c(0.0, 0.0);
        let p2 = s.compose(&arcsin_sq_coeffs(n));
        let p2u = p2.div_u();
        let rt = p2u.powf_with(0.5, tp.k1);
        let mut sc = rt.clone();
        for (k, x) in sc.c.iter_mut().enumerate() {
            *x = *x / (k as f64 + 1.5) * c(0.0, -1.5);
        }
        let s0 = sc.c[0];
        let s0_pow = s0.powf(2.0 / 3.0) * C64::from_polar(1.0, 4.0 * PI * (ell % 3) as f64 / 3.0);
        let zeta_tilde = sc.powf_with(2.0 / 3.0, s0_pow);
        let zeta = zeta_tilde.mul_u();
        let zeta_prime = zeta.derivative();
        let w = zeta.mul(&zeta_prime).mul(&zeta_prime);
        let g = zeta_prime.mul(&w.compose(&shc_coeffs(n)));
        if g.c[0].norm() <= 1e-8 {
            return Err(Error::Domain("g vanishes at the turning point".into()));
        }
        let a0 = g.powf(-0.5);
        let model_radius = estimate_radius(&zeta).min(1.5 * radius).max(radius);
        Ok(Self {
            q_half: tp.k1 / 2.0,
            sqrt_zt0: zeta_tilde.c[0].sqrt(),
            tp,
            pot,
            ell: ell % 3,
            radius,
            model_radius,
            quad: QuadratureConfig { abs_tol: 1e-14, rel_tol: 1e-13, ..Default::default() },
            zeta,
            zeta_tilde,
            zeta_prime,
            g,
            a0,
            s0,
            s0_pow,
            sign: OnceLock::new(),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn z0(&self) -> C64 {
        self.tp.z0
    }

    pub fn in_u(&self, z: C64) -> bool {
        (z - self.tp.z0).norm() <= self.radius * (1.0 + 1e-12)
    }

    /// Series of ζ at `z0`.
    pub fn zeta_series(&self) -> &Taylor {
        &self.zeta
    }

    pub fn g_series(&self) -> &Taylor {
        &self.g
    }

    pub fn a0_series(&self) -> &Taylor {
        &self.a0
    }

    /// ζ from the series model.
    pub fn zeta_model(&self, z: C64) -> C64 {
        self.zeta.eval(z)
    }

    /// ζ and ζ' from the series model.
    pub fn zeta_d(&self, z: C64) -> (C64, C64) {
        self.zeta.eval_d(z)
    }

    pub fn zeta_jet(&self, z: C64, order: usize) -> Vec<C64> {
        self.zeta.jet_at(z, order)
    }

    pub fn zeta_prime(&self, z: C64) -> C64 {
        self.zeta_prime.eval(z)
    }

    /// ζ as an analytic function backed by the series.
    pub fn zeta_function(&self) -> AnalyticFunction {
        AnalyticFunction::from_taylor("zeta", self.model_radius, self.zeta.clone())
    }

    /// ζ as an analytic function backed by quadrature.
    pub fn zeta_quadrature_function(&self) -> AnalyticFunction {
        let m = self.clone();
        AnalyticFunction::new("zeta(quadrature)", self.tp.z0, self.radius, move |z| {
            m.zeta(z).unwrap_or(C64::new(f64::NAN, f64::NAN))
        })
    }

    /// The momentum on the branch analytic in `τ = √(z − z0)`, odd in τ.
    pub fn momentum_tau(&self, tau: C64) -> C64 {
        let u = tau * tau;
        let q_ref = self.tp.v_prime / 4.0;
        let q = if u.norm() < 1e-300 {
            q_ref
        } else {
            (self.pot.eval(self.tp.z0 + u) + 2.0) / (4.0 * u)
        };
        let rq = self.q_half * (q / q_ref).sqrt();
        (tau * rq).asin() * 2.0
    }

    /// ζ by quadrature of the momentum from the turning point.
    pub fn zeta(&self, z: C64) -> Result<C64> {
        let z0 = self.tp.z0;
        if z == z0 {
            return Ok(c(0.0, 0.0));
        }
        let key = (z.re.to_bits(), z.im.to_bits());
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let u = z - z0;
        let tau = u.sqrt();
        let integral = integrate_from_turning_point(&|t| self.momentum_tau(t), z0, z, c(1.0, 0.0), &self.quad)?;
        let q = integral.value / (tau * tau * tau) * c(0.0, -1.5);
        let zt = self.s0_pow * (q / self.s0).powf(2.0 / 3.0);
        let value = u * zt;
        self.cache.lock().unwrap().insert(key, value);
        Ok(value)
    }

    /// The three values of ζ at `z`, differing by `e^{4πiℓ/3}`.
    pub fn zeta_branches(&self, z: C64) -> [C64; 3] {
        let base = self.zeta_model(z) * C64::from_polar(1.0, -4.0 * PI * self.ell as f64 / 3.0);
        [0, 1, 2].map(|l| base * C64::from_polar(1.0, 4.0 * PI * l as f64 / 3.0))
    }

    /// `√ζ` on the determination odd in `τ = √(z − z0)` (principal τ).
    pub fn sqrt_zeta_tau(&self, z: C64, zeta: C64) -> C64 {
        let u = z - self.tp.z0;
        if u.norm() == 0.0 {
            return c(0.0, 0.0);
        }
        let zt = zeta / u;
        u.sqrt() * self.sqrt_zt0 * (zt / self.zeta_tilde.c[0]).sqrt()
    }

    /// Residual of `√ζ ζ' = ± i p`, with ζ by quadrature and ζ' by Cauchy
    /// differentiation; the realized sign is recorded on first use.
    pub fn check_zeta_ode(&self, z: C64) -> Result<f64> {
        let f = self.zeta_quadrature_function();
        let r = default_cauchy_radius(&f, z)?;
        let jet = cauchy_derivatives(&f, z, r, 1)?;
        let (zeta, dz) = (jet.coeffs[0], jet.coeffs[1]);
        let lhs = self.sqrt_zeta_tau(z, zeta) * dz;
        let p = self.momentum_tau((z - self.tp.z0).sqrt());
        let rp = (lhs - c(0.0, 1.0) * p).norm();
        let rm = (lhs + c(0.0, 1.0) * p).norm();
        let (res, s) = if rp <= rm { (rp, 1) } else { (rm, -1) };
        let stored = *self.sign.get_or_init(|| s);
        if stored != s && res > 1e-6 {
            return Err(Error::Accuracy(format!("ODE sign flipped at {z}")));
        }
        Ok(res)
    }

    /// The sign realized by `√ζ ζ' = sign · i p`, if checked already.
    pub fn realized_sign(&self) -> Option<i8> {
        self.sign.get().copied()
    }

    /// `g = sinh(√ζ ζ')/√ζ`, evaluated without square roots.
    pub fn g_function(&self, z: C64) -> Result<C64> {
        let (zeta, dz) = self.zeta_d(z);
        let g = dz * shc(zeta * dz * dz);
        if g.norm() <= 1e-8 {
            return Err(Error::Domain(format!("g vanishes at {z}; shrink U")));
        }
        Ok(g)
    }

    /// `g` from an explicit determination `root_sign · √ζ` (principal root).
    pub fn g_with_root(&self, z: C64, root_sign: f64) -> C64 {
        let (zeta, dz) = self.zeta_d(z);
        let r = zeta.sqrt() * root_sign;
        if r.norm() < 1e-6 {
            return dz * shc(zeta * dz * dz);
        }
        (r * dz).sinh() / r
    }

    pub fn a0(&self, z: C64) -> C64 {
        self.a0.eval(z)
    }

    /// Normalized branch `p_j = i (ω^j ζ)^{1/2} ω^j ζ'`, cut along `σ_j`.
    pub fn p_branch(&self, j: usize, z: C64) -> C64 {
        let wj = C64::from_polar(1.0, 2.0 * PI * (j % 3) as f64 / 3.0);
        let (zeta, dz) = self.zeta_d(z);
        c(0.0, 1.0) * (wj * zeta).sqrt() * wj * dz
    }

    /// `∫_{z0}^z p_j = (2i/3) (ω^j ζ)^{3/2}`.
    pub fn action(&self, j: usize, z: C64) -> C64 {
        let wj = C64::from_polar(1.0, 2.0 * PI * (j % 3) as f64 / 3.0);
        let x = wj * self.zeta_model(z);
        c(0.0, 2.0 / 3.0) * x * x.sqrt()
    }

    /// `|ρ_j(z)| = exp(−Im ∫ p_j / h)`.
    pub fn weight_rho(&self, j: usize, z: C64, h: f64) -> f64 {
        (-self.action(j, z).im / h).exp()
    }

    /// Leading WKB solution `(sin p)^{-1/2} exp(±(i/h) ∫_base^z p)`.
    ///
    /// With `base = z0` the normalized branch `p_0` is used; otherwise the
    /// momentum is the principal arccos at `base` continued to `z`.
    pub fn wkb_leading(&self, z: C64, sign: f64, h: f64, base: C64) -> Result<C64> {
        let (p, action) = if base == self.tp.z0 {
            (self.p_branch(0, z), self.action(0, z))
        } else {
            continued_action(&self.pot, base, z)?
        };
        let sp = p.sin();
        if sp.norm() <= 1e-3 {
            return Err(Error::Domain(format!("|sin p| = {:e} too small near the turning point", sp.norm())));
        }
        Ok((c(0.0, sign) * action / h).exp() / sp.sqrt())
    }

    /// Sampled certificate: `g` nonvanishing and ζ injective on a polar grid of `U`.
    pub fn certify(&self, rings: usize, spokes: usize) -> Certificate {
        let z0 = self.tp.z0;
        let mut pts = vec![z0];
        for i in 1..=rings {
            let r = self.radius * i as f64 / rings as f64;
            for k in 0..spokes {
                pts.push(z0 + C64::from_polar(r, 2.0 * PI * (k as f64 + 0.5 * (i % 2) as f64) / spokes as f64));
            }
        }
        let vals: Vec<C64> = pts.iter().map(|&z| self.zeta_model(z)).collect();
        let g_min = pts.iter().map(|&z| self.zeta_prime(z).norm().min(self.g_function(z).map(|g| g.norm()).unwrap_or(0.0))).fold(f64::INFINITY, f64::min);
        let mut injective = true;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if (vals[i] - vals[j]).norm() <= 1e-10 && (pts[i] - pts[j]).norm() > 1e-10 {
                    injective = false;
                }
            }
        }
        Certificate { g_min, injective, points: pts.len() }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Certificate {
    pub g_min: f64,
    pub injective: bool,
    pub points: usize,
}

/// Root-test estimate of the convergence radius from the series tail.
fn estimate_radius(t: &Taylor) -> f64 {
    let n = t.len();
    let mut best = f64::INFINITY;
    for k in n / 2..n {
        let a = t.c[k].norm();
        if a > 1e-300 {
            best = best.min(a.powf(-1.0 / k as f64));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> ZetaMap {
        ZetaMap::for_potential(&Potential::linear(), c(0.1, 0.0), 0).unwrap()
    }

    #[test]
    fn momentum_examples() {
        let pot = Potential::linear();
        let b = MomentumBranch::default();
        assert!((momentum(&pot, c(-2.0, 0.0), &b).unwrap() - c(PI / 2.0, 0.0)).norm() < 1e-15);
        assert!(momentum(&pot, c(0.0, 0.0), &b).unwrap().norm() < 1e-7);
        let p = momentum(&pot, c(1.0, 0.0), &b).unwrap();
        assert!((p - c(0.0, 0.9624236501192069)).norm() < 1e-12);
        assert!((2.0 * p.cos() + pot.eval(c(1.0, 0.0))).norm() < 1e-10);
    }

    #[test]
    fn zeta_taylor_oracle() {
        // p² = −z + z²/12 + … gives ζ = z − z²/60 + O(z³)
        let m = linear();
        assert_eq!(m.zeta(c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        let z = c(1e-3, 0.0);
        assert!((m.zeta(z).unwrap() / z - 1.0).norm() <= 1e-3);
        let v = m.zeta(c(0.01, 0.0)).unwrap();
        // (3/2 ∫_0^z arccosh(1 + t/2) dt)^{2/3} at 30 digits
        assert!((v - c(0.009998334601730393, 0.0)).norm() <= 1e-15);
        // the two-term expansion misses the cubic term, about 1.27e-9 here
        assert!((v - c(0.01 - 1.6667e-6, 0.0)).norm() <= 1.5e-9);
        assert!((m.zeta_prime(c(0.0, 0.0)) - 1.0).norm() < 1e-12);
        assert!((m.zeta_series().c[2] + 1.0 / 60.0).norm() < 1e-14);
    }

    #[test]
    fn series_and_quadrature_agree() {
        for pot in [Potential::linear(), Potential::quadratic(0.2), Potential::sine()] {
            let m = ZetaMap::for_potential(&pot, c(0.1, 0.0), 0).unwrap();
            for k in 0..12 {
                let z = C64::from_polar(0.9 * (k as f64 + 1.0) / 12.0, 0.7 + 1.9 * k as f64);
                let a = m.zeta(z).unwrap();
                let b = m.zeta_model(z);
                assert!((a - b).norm() < 1e-12 * a.norm().max(1e-3), "{} z={z} {a} {b}", pot.label());
            }
        }
    }

    #[test]
    fn zeta_identity_cosh() {
        // 2 cosh(√ζ ζ') + v = 0
        let m = ZetaMap::for_potential(&Potential::sine(), c(0.1, 0.0), 0).unwrap();
        for k in 0..10 {
            let z = C64::from_polar(0.95, k as f64 * 0.63);
            let (zeta, dz) = m.zeta_d(z);
            assert!((2.0 * ch(zeta * dz * dz) + m.pot.eval(z)).norm() < 1e-13);
        }
    }

    #[test]
    fn zeta_ode_and_sign() {
        let m = linear();
        assert!(m.check_zeta_ode(c(0.3, 0.0)).unwrap() <= 1e-8);
        assert!(m.check_zeta_ode(c(1e-4, 0.0)).unwrap() <= 1e-6);
        let s = m.realized_sign().unwrap();
        for k in 0..20 {
            let z = C64::from_polar(0.1 + 0.04 * k as f64, 0.37 * k as f64 - 3.0);
            m.check_zeta_ode(z).unwrap();
            assert_eq!(m.realized_sign(), Some(s));
        }
    }

    #[test]
    fn g_examples() {
        let m = linear();
        assert!((m.g_function(c(0.0, 0.0)).unwrap() - 1.0).norm() < 1e-14);
        assert!((m.a0(c(0.0, 0.0)) - 1.0).norm() < 1e-14);
        for k in 0..20 {
            let z = C64::from_polar(0.05 + 0.045 * k as f64, 1.1 * k as f64);
            let a = m.g_with_root(z, 1.0);
            let b = m.g_with_root(z, -1.0);
            assert!((a - b).norm() <= 1e-14 * a.norm());
            assert!((a - m.g_function(z).unwrap()).norm() <= 1e-12 * a.norm());
        }
    }

    #[test]
    fn branches_and_weights() {
        let m = linear();
        let z = c(0.3, 0.2);
        let br = m.zeta_branches(z);
        let w = C64::from_polar(1.0, 4.0 * PI / 3.0);
        assert!((br[1] - br[0] * w).norm() < 1e-14);
        assert!((m.weight_rho(0, m.z0(), 0.01) - 1.0).abs() < 1e-15);
        // inside S_0 (ζ > 0) the weight is below one
        assert!(m.weight_rho(0, c(0.3, 0.0), 0.01) < 1.0);
        // on σ_0 (ζ < 0) the modulus is one
        assert!((m.weight_rho(0, c(-0.3, 0.0), 0.01) - 1.0).abs() < 1e-12);
        for j in 0..3 {
            let p = m.p_branch(j, z);
            assert!((2.0 * p.cos() + m.pot.eval(z)).norm() < 1e-12);
        }
    }

    #[test]
    fn wkb_examples() {
        let m = linear();
        let v = m.wkb_leading(c(-2.0, 0.0), 1.0, 0.1, c(-2.0, 0.0));
        // z = −2 lies outside U but the leading formula is still defined
        assert!((v.unwrap() - 1.0).norm() < 1e-14);
        let z = c(-0.4, 0.3);
        let (h, z0) = (0.05, m.z0());
        let p = m.wkb_leading(z, 1.0, h, z0).unwrap();
        let q = m.wkb_leading(z, -1.0, h, z0).unwrap();
        let sp = m.p_branch(0, z).sin();
        assert!((p * q - 1.0 / sp).norm() < 1e-12 * (1.0 / sp).norm());
        let rho = m.weight_rho(0, z, h);
        assert!((p.norm() - rho / sp.norm().sqrt()).abs() < 1e-12 * p.norm());
        assert!(matches!(m.wkb_leading(c(1e-7, 0.0), 1.0, h, z0), Err(Error::Domain(_))));
        // away from the turning point the principal arccos is analytic along the path
        let (b, z) = (c(-2.0, 0.0), c(-1.5, 0.2));
        let f = |x: C64| (m.pot.eval(x) / -2.0).acos();
        let cfg = QuadratureConfig::default();
        let s = crate::analytic::integrate_path(&f, &crate::analytic::ComplexPath::Segment(b, z), &cfg).unwrap();
        let want = (c(0.0, 1.0) * s.value / h).exp() / f(z).sin().sqrt();
        let got = m.wkb_leading(z, 1.0, h, b).unwrap();
        assert!((got - want).norm() < 1e-10 * want.norm());
    }

    #[test]
    fn certificate_for_builtins() {
        for pot in [Potential::linear(), Potential::quadratic(0.2), Potential::sine()] {
            let m = ZetaMap::for_potential(&pot, c(0.1, 0.0), 0).unwrap();
            let cert = m.certify(8, 24);
            assert!(cert.injective && cert.g_min > 0.1, "{} {:?}", pot.label(), cert);
        }
    }
}
