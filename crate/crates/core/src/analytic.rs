//! Analytic functions on disks, Cauchy-integral jets and complex path quadrature.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::taylor::Taylor;

type Eval = Arc<dyn Fn(C64) -> C64 + Send + Sync>;

/// An analytic map with a stated disk of validity.
#[derive(Clone)]
pub struct AnalyticFunction {
    eval: Eval,
    pub center: C64,
    pub radius: f64,
    pub label: String,
    series: Option<Arc<Taylor>>,
}

impl fmt::Debug for AnalyticFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticFunction")
            .field("label", &self.label)
            .field("center", &self.center)
            .field("radius", &self.radius)
            .field("series", &self.series.as_ref().map(|s| s.len()))
            .finish()
    }
}

impl AnalyticFunction {
    pub fn new<F>(label: impl Into<String>, center: C64, radius: f64, f: F) -> Self
    where
        F: Fn(C64) -> C64 + Send + Sync + 'static,
    {
        Self { eval: Arc::new(f), center, radius, label: label.into(), series: None }
    }

    /// Wrap a power series; jets are then taken from the series directly.
    pub fn from_taylor(label: impl Into<String>, radius: f64, t: Taylor) -> Self {
        let t = Arc::new(t);
        let t2 = t.clone();
        Self {
            eval: Arc::new(move |z| t2.eval(z)),
            center: t.center,
            radius,
            label: label.into(),
            series: Some(t),
        }
    }

    pub fn constant(label: impl Into<String>, value: C64) -> Self {
        Self::new(label, C64::new(0.0, 0.0), f64::INFINITY, move |_| value)
    }

    pub fn eval(&self, z: C64) -> C64 {
        (self.eval)(z)
    }

    pub fn series(&self) -> Option<&Taylor> {
        self.series.as_deref()
    }

    pub fn contains(&self, z: C64) -> bool {
        (z - self.center).norm() <= self.radius * (1.0 + 1e-12)
    }

    /// Distance from `z` to the boundary of the validity disk.
    pub fn margin(&self, z: C64) -> f64 {
        self.radius - (z - self.center).norm()
    }

    /// Taylor coefficients at `z` up to `order`, from the stored series when
    /// available and by Cauchy sampling otherwise.
    pub fn jet(&self, z: C64, order: usize) -> Result<Vec<C64>> {
        if let Some(s) = &self.series {
            if !self.contains(z) {
                return Err(Error::Domain(format!("{} outside validity disk of {}", z, self.label)));
            }
            return Ok(s.jet_at(z, order));
        }
        let r = default_cauchy_radius(self, z)?;
        Ok(cauchy_derivatives(self, z, r, order)?.coeffs)
    }
}

/// A piecewise smooth integration contour.
#[derive(Clone)]
pub enum ComplexPath {
    Segment(C64, C64),
    Polyline(Vec<C64>),
    /// `point(s)` and `tangent(s)` on `s in [s0, s1]`.
    Parametric {
        point: Arc<dyn Fn(f64) -> C64 + Send + Sync>,
        tangent: Arc<dyn Fn(f64) -> C64 + Send + Sync>,
        s0: f64,
        s1: f64,
    },
    Reversed(Box<ComplexPath>),
}

impl fmt::Debug for ComplexPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Segment(a, b) => write!(f, "Segment({a}, {b})"),
            Self::Polyline(p) => write!(f, "Polyline({} nodes)", p.len()),
            Self::Parametric { s0, s1, .. } => write!(f, "Parametric([{s0}, {s1}])"),
            Self::Reversed(p) => write!(f, "Reversed({p:?})"),
        }
    }
}

/// One smooth piece, parameterized on `[0, 1]`.
struct Piece {
    point: Box<dyn Fn(f64) -> C64 + Send + Sync>,
    tangent: Box<dyn Fn(f64) -> C64 + Send + Sync>,
}

impl ComplexPath {
    pub fn polyline(nodes: Vec<C64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Argument("polyline needs at least two nodes".into()));
        }
        if nodes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Argument("consecutive polyline nodes coincide".into()));
        }
        Ok(Self::Polyline(nodes))
    }

    pub fn reversed(self) -> Self {
        match self {
            Self::Reversed(p) => *p,
            p => Self::Reversed(Box::new(p)),
        }
    }

    pub fn start(&self) -> C64 {
        match self {
            Self::Segment(a, _) => *a,
            Self::Polyline(p) => p[0],
            Self::Parametric { point, s0, .. } => point(*s0),
            Self::Reversed(p) => p.end(),
        }
    }

    pub fn end(&self) -> C64 {
        match self {
            Self::Segment(_, b) => *b,
            Self::Polyline(p) => p[p.len() - 1],
            Self::Parametric { point, s1, .. } => point(*s1),
            Self::Reversed(p) => p.start(),
        }
    }

    fn pieces(&self) -> Vec<Piece> {
        match self {
            Self::Segment(a, b) => vec![segment_piece(*a, *b)],
            Self::Polyline(p) => p.windows(2).map(|w| segment_piece(w[0], w[1])).collect(),
            Self::Parametric { point, tangent, s0, s1 } => {
                let (p, t) = (point.clone(), tangent.clone());
                let (a, len) = (*s0, *s1 - *s0);
                vec![Piece {
                    point: Box::new(move |s| p(a + len * s)),
                    tangent: Box::new(move |s| t(a + len * s) * len),
                }]
            }
            Self::Reversed(inner) => inner
                .pieces()
                .into_iter()
                .rev()
                .map(|pc| {
                    let Piece { point, tangent } = pc;
                    Piece {
                        point: Box::new(move |s| point(1.0 - s)),
                        tangent: Box::new(move |s| -tangent(1.0 - s)),
                    }
                })
                .collect(),
        }
    }
}

fn segment_piece(a: C64, b: C64) -> Piece {
    Piece { point: Box::new(move |s| a + (b - a) * s), tangent: Box::new(move |_| b - a) }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureConfig {
    pub nodes_per_panel: usize,
    pub max_panels: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { nodes_per_panel: 32, max_panels: 256, abs_tol: 1e-12, rel_tol: 1e-10 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_panel < 4 {
            return Err(Error::Argument("nodes_per_panel must be at least 4".into()));
        }
        if self.max_panels == 0 || !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::Argument("quadrature tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: C64,
    pub error: f64,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(r) = cache.read().unwrap().get(&n) {
        return r.clone();
    }
    let rule = Arc::new(compute_gauss_legendre(n));
    cache.write().unwrap().insert(n, rule.clone());
    rule
}

fn compute_gauss_legendre(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

/// Gauss-Legendre sum of `f(point) * tangent` over `[a, b]` of one piece.
fn panel(piece: &Piece, f: &dyn Fn(C64) -> C64, a: f64, b: f64, rule: &GaussRule) -> C64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = C64::new(0.0, 0.0);
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        let s = mid + half * x;
        acc += f((piece.point)(s)) * (piece.tangent)(s) * *w;
    }
    acc * half
}

/// Adaptive composite Gauss-Legendre over a path, with a plain closure integrand.
pub fn integrate_path(f: &dyn Fn(C64) -> C64, path: &ComplexPath, cfg: &QuadratureConfig) -> Result<QuadResult> {
    cfg.validate()?;
    let rule = gauss_legendre(cfg.nodes_per_panel);
    let pieces = path.pieces();
    // (piece index, a, b, coarse value, error estimate)
    let mut panels: Vec<(usize, f64, f64, C64, f64)> = Vec::new();
    for (i, pc) in pieces.iter().enumerate() {
        panels.push(refine(pc, f, i, 0.0, 1.0, &rule));
    }
    loop {
        let value: C64 = panels.iter().map(|p| p.3).sum();
        let error: f64 = panels.iter().map(|p| p.4).sum();
        let tol = cfg.abs_tol.max(cfg.rel_tol * value.norm());
        if error <= tol {
            return Ok(QuadResult { value, error });
        }
        if panels.len() >= cfg.max_panels {
            return Err(Error::Convergence { best: value, estimate: error });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (k, p)| if p.4 > acc.1 { (k, p.4) } else { acc });
        let (pi, a, b, _, _) = panels.swap_remove(worst);
        let m = 0.5 * (a + b);
        panels.push(refine(&pieces[pi], f, pi, a, m, &rule));
        panels.push(refine(&pieces[pi], f, pi, m, b, &rule));
    }
}

/// Panel value from two halves, error from the difference with the whole.
fn refine(pc: &Piece, f: &dyn Fn(C64) -> C64, i: usize, a: f64, b: f64, rule: &GaussRule) -> (usize, f64, f64, C64, f64) {
    let whole = panel(pc, f, a, b, rule);
    let m = 0.5 * (a + b);
    let halves = panel(pc, f, a, m, rule) + panel(pc, f, m, b, rule);
    (i, a, b, halves, (halves - whole).norm())
}

/// `∫_path f(z) dz` for an analytic function; the path must stay in its disk.
pub fn path_integral(f: &AnalyticFunction, path: &ComplexPath, cfg: &QuadratureConfig) -> Result<QuadResult> {
    for pc in path.pieces() {
        for k in 0..=16 {
            let z = (pc.point)(k as f64 / 16.0);
            if !f.contains(z) {
                return Err(Error::Domain(format!("path point {z} outside validity disk of {}", f.label)));
            }
        }
    }
    integrate_path(&|z| f.eval(z), path, cfg)
}

/// `∫_{z0}^{z} f` for an integrand with a square-root branch point at `z0`.
///
/// `f_tau(τ)` must return the integrand at `z0 + τ²` on the branch selected by
/// `τ`. The endpoint `τ = √(z − z0)` is taken with `arg τ − arg(reference)/2`
/// in `(−π/2, π/2]`.
pub fn integrate_from_turning_point(
    f_tau: &dyn Fn(C64) -> C64,
    z0: C64,
    z: C64,
    reference: C64,
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    if reference.norm() == 0.0 {
        return Err(Error::Argument("branch reference direction is zero".into()));
    }
    if z == z0 {
        return Ok(QuadResult { value: C64::new(0.0, 0.0), error: 0.0 });
    }
    let tau = tau_endpoint(z - z0, reference);
    integrate_path(&|t| f_tau(t) * t * 2.0, &ComplexPath::Segment(C64::new(0.0, 0.0), tau), cfg)
}

/// Square root of `u` with the branch fixed relative to `reference`.
pub fn tau_endpoint(u: C64, reference: C64) -> C64 {
    let d = reference / reference.norm();
    d.sqrt() * (u / d).sqrt()
}

/// Taylor coefficients with per-coefficient error estimates.
#[derive(Clone, Debug)]
pub struct Jet {
    pub coeffs: Vec<C64>,
    pub errors: Vec<f64>,
    pub samples: usize,
    pub warning: Option<String>,
}

pub fn default_cauchy_radius(f: &AnalyticFunction, center: C64) -> Result<f64> {
    let m = f.margin(center);
    if !(m > 0.0) {
        return Err(Error::Domain(format!("{center} not inside validity disk of {}", f.label)));
    }
    Ok(if m.is_finite() { 0.25 * m } else { 0.25 })
}

/// Trapezoidal Cauchy integrals on a circle, doubling the sample count until
/// two successive estimates agree.
pub fn cauchy_derivatives(f: &AnalyticFunction, center: C64, radius: f64, order: usize) -> Result<Jet> {
    if !(radius > 0.0) {
        return Err(Error::Argument("Cauchy radius must be positive".into()));
    }
    if (center - f.center).norm() + radius > f.radius * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "disk |z-{center}| <= {radius} exceeds validity disk of {}",
            f.label
        )));
    }
    let rel_tol = 1e-10;
    let mut n = (4 * (order + 1)).max(64);
    let mut prev = circle_coefficients(f, center, radius, n);
    loop {
        let next = circle_coefficients(f, center, radius, 2 * n);
        let scale = next.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let diffs: Vec<f64> = (0..=order).map(|k| (next[k] - prev[k]).norm()).collect();
        let converged = diffs.iter().all(|d| *d <= rel_tol * scale.max(1e-300)) || 2 * n >= 8192;
        if converged {
            let m = next.len();
            let tail = next[m / 2 - 4..m / 2].iter().map(|c| c.norm()).fold(0.0, f64::max);
            let warning = (tail > 1e-8 * scale).then(|| {
                format!("coefficient tail not decaying (|c_k| r^k = {tail:e} of {scale:e})")
            });
            let coeffs = (0..=order).map(|k| next[k] / radius.powi(k as i32)).collect();
            let errors = (0..=order).map(|k| diffs[k].max(f64::EPSILON * scale) / radius.powi(k as i32)).collect();
            return Ok(Jet { coeffs, errors, samples: 2 * n, warning });
        }
        n *= 2;
        prev = next;
    }
}

/// Normalized coefficients `c_k r^k`, `k < n`, from `n` circle samples.
fn circle_coefficients(f: &AnalyticFunction, center: C64, radius: f64, n: usize) -> Vec<C64> {
    let mut buf: Vec<C64> = (0..n)
        .map(|j| f.eval(center + C64::from_polar(radius, 2.0 * PI * j as f64 / n as f64)))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().map(|c| c / n as f64).collect()
}

/// Sample `f` on a circle around its center and return the Taylor series.
pub fn taylor_from_samples(f: &dyn Fn(C64) -> C64, center: C64, radius: f64, n: usize, len: usize) -> Taylor {
    let mut buf: Vec<C64> = (0..n)
        .map(|j| f(center + C64::from_polar(radius, 2.0 * PI * j as f64 / n as f64)))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let c = (0..len.min(n)).map(|k| buf[k] / (n as f64 * radius.powi(k as i32))).collect();
    Taylor::new(center, radius, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn entire(label: &str, f: fn(C64) -> C64) -> AnalyticFunction {
        AnalyticFunction::new(label, c(0.0, 0.0), f64::INFINITY, f)
    }

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let r = gauss_legendre(7);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn cauchy_examples() {
        let sq = entire("z^2", |z| z * z);
        let j = cauchy_derivatives(&sq, c(0.0, 0.0), 1.0, 3).unwrap();
        for (k, want) in [0.0, 0.0, 1.0, 0.0].iter().enumerate() {
            assert!((j.coeffs[k] - c(*want, 0.0)).norm() < 1e-14);
        }
        let e = entire("exp", |z| z.exp());
        let j = cauchy_derivatives(&e, c(0.0, 0.0), 0.5, 2).unwrap();
        for (k, want) in [1.0, 1.0, 0.5].iter().enumerate() {
            assert!((j.coeffs[k] - c(*want, 0.0)).norm() < 1e-12);
        }
        // geometric-series oracle: 1/(1-z) = sum z^k
        let g = AnalyticFunction::new("1/(1-z)", c(0.0, 0.0), 1.0, |z| 1.0 / (1.0 - z));
        let j = cauchy_derivatives(&g, c(0.0, 0.0), 0.5, 4).unwrap();
        for k in 0..=4 {
            assert!((j.coeffs[k] - c(1.0, 0.0)).norm() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn cauchy_rejects_disk_outside_validity() {
        let g = AnalyticFunction::new("1/(1-z)", c(0.0, 0.0), 1.0, |z| 1.0 / (1.0 - z));
        assert!(matches!(cauchy_derivatives(&g, c(0.0, 0.0), 1.5, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn path_integral_examples() {
        let cfg = QuadratureConfig::default();
        let one = entire("1", |_| c(1.0, 0.0));
        let r = path_integral(&one, &ComplexPath::Segment(c(0.0, 0.0), c(1.0, 1.0)), &cfg).unwrap();
        assert!((r.value - c(1.0, 1.0)).norm() < 1e-14);
        let id = entire("z", |z| z);
        let r = path_integral(&id, &ComplexPath::Segment(c(0.0, 0.0), c(2.0, 0.0)), &cfg).unwrap();
        assert!((r.value - c(2.0, 0.0)).norm() < 1e-13);
        // residue oracle on a 64-node polygon around the origin
        let inv = AnalyticFunction::new("1/z", c(0.0, 0.0), 2.0, |z| 1.0 / z);
        let mut nodes: Vec<C64> = (0..64).map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / 64.0)).collect();
        nodes.push(nodes[0]);
        let r = path_integral(&inv, &ComplexPath::polyline(nodes).unwrap(), &cfg).unwrap();
        assert!((r.value - c(0.0, 2.0 * PI)).norm() < 1e-8);
    }

    #[test]
    fn path_integral_budget_exhaustion_carries_best_value() {
        let cfg = QuadratureConfig { nodes_per_panel: 4, max_panels: 2, ..Default::default() };
        let f = AnalyticFunction::new("osc", c(0.0, 0.0), f64::INFINITY, |z| (z * 80.0).sin());
        let e = path_integral(&f, &ComplexPath::Segment(c(0.0, 0.0), c(3.0, 0.0)), &cfg).unwrap_err();
        assert!(matches!(e, Error::Convergence { .. }));
    }

    #[test]
    fn turning_point_integrals() {
        let cfg = QuadratureConfig::default();
        let r = integrate_from_turning_point(&|t| t, c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), &cfg).unwrap();
        assert!((r.value - c(2.0 / 3.0, 0.0)).norm() < 1e-13);
        let r = integrate_from_turning_point(&|_| c(0.0, 0.0), c(0.0, 0.0), c(0.4, 0.7), c(1.0, 0.0), &cfg).unwrap();
        assert_eq!(r.value, c(0.0, 0.0));
        // term-by-term oracle: ∫ √t (1 + t) = 2/3 + 2/5
        let r = integrate_from_turning_point(&|t| t * (1.0 + t * t), c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), &cfg).unwrap();
        assert!((r.value - c(16.0 / 15.0, 0.0)).norm() < 1e-10);
        let r = integrate_from_turning_point(&|t| t, c(0.3, 0.0), c(0.3, 0.0), c(1.0, 0.0), &cfg).unwrap();
        assert_eq!(r.value, c(0.0, 0.0));
        assert!(matches!(
            integrate_from_turning_point(&|t| t, c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), &cfg),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn reversed_path_negates() {
        let cfg = QuadratureConfig::default();
        let f = entire("exp", |z| z.exp());
        let p = ComplexPath::polyline(vec![c(0.0, 0.0), c(1.0, 0.5), c(0.2, 1.0)]).unwrap();
        let a = path_integral(&f, &p, &cfg).unwrap().value;
        let b = path_integral(&f, &p.reversed(), &cfg).unwrap().value;
        assert!((a + b).norm() < 1e-13);
        assert!((a - (c(0.2, 1.0).exp() - 1.0)).norm() < 1e-13);
    }
}
