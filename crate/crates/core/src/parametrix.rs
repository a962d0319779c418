//! Parametrix for `H` on a vertical precanonical segment, the operator
//! `D_0` it leaves behind, and the Neumann solve of `g_0 + D_0 g_0 = δ_0`.
//!
//! Functions on the strip around the segment are stored divided by `ρ_0`, so
//! every quantity in the inner loops is of moderate size. The integrals are
//! discretized on three copies of the segment: the segment itself and two
//! copies shifted by `∓αh/2`. Near the endpoints the shift is ramped to zero
//! over a height of `h/2`, so all three copies join at `z_1` and `z_2`.
//!
//! The `−0` in `θ_0((ζ − z − 0)/h)` means the path passes to the left of the
//! pole at `ζ = z`. At a point of the left copy no copy lies further left, so
//! the integral is taken over the segment and the residue at `ζ = z` is added.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analytic::gauss_legendre;
use crate::exact::{leading_wronskian, wronskian_values};
use crate::fit::loglog_fit;
use crate::momentum::ZetaMap;
use crate::parallel::par_map;
use crate::precise::PreciseSolution;
use crate::scaled::Scaled;
use crate::series::{apply_h_scaled, AsymptoticSolution, Precision};
use crate::stokes::{is_precanonical, CurveSpec, PrecanonicalReport};
use crate::{Error, Result, C64};

/// Smallest admissible distance of `t` from the integers.
const POLE_GUARD: f64 = 1e-10;
/// Offset realizing `z + 0`, in units of `h`.
const SIDE_EPS: f64 = 1e-8;
/// Below this `exp` underflows; terms are dropped.
const LOG_FLOOR: f64 = -740.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaVariant {
    /// `θ_0(t) = cot(πt) − i`, decaying as `Im t → −∞`.
    Minus,
    /// `θ_1(t) = cot(πt) + i`, decaying as `Im t → +∞`.
    Plus,
}

/// `θ` as mantissa and log-scale, without the pole check.
///
/// With `E = e^{2πit}` one has `θ_0 = 2i/(E − 1)` and `θ_1 = 2iE/(E − 1)`;
/// the branch is picked so that only `e^{−2π|Im t|}` is ever formed.
#[inline]
fn theta_parts(t: C64, variant: ThetaVariant) -> (C64, f64) {
    let two_i = C64::new(0.0, 2.0);
    let (s, co) = (2.0 * PI * t.re).sin_cos();
    let phase = C64::new(co, s);
    let m = (-2.0 * PI * t.im.abs()).exp();
    let one = C64::new(1.0, 0.0);
    match variant {
        ThetaVariant::Minus if t.im >= 0.0 => (two_i / (phase * m - one), 0.0),
        ThetaVariant::Minus => (two_i * phase.conj() / (one - phase.conj() * m), 2.0 * PI * t.im),
        ThetaVariant::Plus if t.im > 0.0 => (two_i * phase / (phase * m - one), -2.0 * PI * t.im),
        ThetaVariant::Plus => (two_i / (one - phase.conj() * m), 0.0),
    }
}

fn pole_check(t: C64) -> Result<()> {
    let d = (t - C64::new(t.re.round(), 0.0)).norm();
    if d < POLE_GUARD {
        return Err(Error::Pole(d));
    }
    Ok(())
}

/// `θ_0(t) = cot(πt) − i` or `θ_1(t) = cot(πt) + i`.
pub fn theta(t: C64, variant: ThetaVariant) -> Result<C64> {
    pole_check(t)?;
    let (m, l) = theta_parts(t, variant);
    Ok(if l == 0.0 { m } else { m * l.exp() })
}

fn theta_scaled(t: C64, variant: ThetaVariant) -> Result<Scaled> {
    pole_check(t)?;
    let (m, l) = theta_parts(t, variant);
    Ok(Scaled::new(m, l))
}

/// Everything the kernels need at one point.
#[derive(Clone, Copy, Debug)]
pub struct Sample {
    pub z: C64,
    pub rho: Scaled,
    /// `W_0(z), W_1(z)`
    pub w: [Scaled; 2],
    /// `δ_j = H W_j` at `z`
    pub delta: [Scaled; 2],
    /// `(W_0, W_1)(z)`
    pub wronskian: Scaled,
}

/// `W_0`, `W_1` at order `L`, their residuals, and the weight `ρ_0`.
#[derive(Clone, Debug)]
pub struct KernelContext {
    pub w0: AsymptoticSolution,
    pub w1: AsymptoticSolution,
    pub h: f64,
    pub precision: Precision,
    precise: Option<Arc<[PreciseSolution; 2]>>,
    /// `0.1 |h (w_0' w_1 − w_0 w_1')|`
    pub wronskian_floor: f64,
}

impl KernelContext {
    pub fn new(sol: &AsymptoticSolution, h: f64, precision: Precision) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Argument("h must be positive".into()));
        }
        let (w0, w1) = (sol.with_index(0), sol.with_index(1));
        let precise = match precision {
            Precision::Double => None,
            Precision::DoubleDouble => Some(Arc::new([PreciseSolution::new(&w0)?, PreciseSolution::new(&w1)?])),
        };
        Ok(Self { w0, w1, h, precision, precise, wronskian_floor: 0.1 * leading_wronskian(h).norm() })
    }

    pub fn map(&self) -> &ZetaMap {
        &self.w0.map
    }

    pub fn order(&self) -> usize {
        self.w0.order
    }

    /// `ρ_0(z) = exp((i/h) ∫_{z0}^z p_0)`.
    pub fn rho0(&self, z: C64) -> Scaled {
        let a = self.map().action(0, z);
        Scaled::new(C64::from_polar(1.0, a.re / self.h), -a.im / self.h)
    }

    pub fn w(&self, j: usize, z: C64) -> Result<Scaled> {
        if j == 0 { &self.w0 } else { &self.w1 }.evaluate(z, self.h)
    }

    pub fn delta(&self, j: usize, z: C64) -> Result<Scaled> {
        match &self.precise {
            Some(p) => Ok(Scaled::from(p[j].apply_h(z, self.h)?.to_c64())),
            None => {
                let sol = if j == 0 { &self.w0 } else { &self.w1 };
                apply_h_scaled(&|x| sol.evaluate(x, self.h), z, self.h, &sol.map.pot)
            }
        }
    }

    /// `(W_0, W_1)(z)`, refused below the floor.
    pub fn wronskian(&self, z: C64) -> Result<Scaled> {
        let w = wronskian_values([self.w(0, z)?, self.w(0, z + self.h)?], [self.w(1, z)?, self.w(1, z + self.h)?]);
        self.check_floor(z, w)?;
        Ok(w)
    }

    fn check_floor(&self, z: C64, w: Scaled) -> Result<()> {
        if !(w.abs() >= self.wronskian_floor) {
            return Err(Error::Degenerate(format!("|(W_0, W_1)({z})| = {:e} below {:e}", w.abs(), self.wronskian_floor)));
        }
        Ok(())
    }

    pub fn sample(&self, z: C64) -> Result<Sample> {
        let h = self.h;
        let pot = &self.w0.map.pot;
        let mut w = [[Scaled::zero(); 3]; 2];
        for (j, row) in w.iter_mut().enumerate() {
            for (k, x) in [z - h, z, z + h].into_iter().enumerate() {
                row[k] = self.w(j, x)?;
            }
        }
        let delta = match &self.precise {
            Some(_) => [self.delta(0, z)?, self.delta(1, z)?],
            None => {
                let v = pot.eval(z);
                [0, 1].map(|j| w[j][2].add(w[j][0]).add(w[j][1].mul_c(v)))
            }
        };
        let wronskian = wronskian_values([w[0][1], w[0][2]], [w[1][1], w[1][2]]);
        self.check_floor(z, wronskian)?;
        Ok(Sample { z, rho: self.rho0(z), w: [w[0][1], w[1][1]], delta, wronskian })
    }

    /// `W_j'(z)` from a Cauchy circle of radius `h/8`.
    fn w_derivative(&self, j: usize, z: C64) -> Result<Scaled> {
        let n = 16;
        let r = self.h / 8.0;
        let vals: Vec<(Scaled, C64)> = (0..n)
            .map(|k| {
                let e = C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
                self.w(j, z + e * r).map(|v| (v, e))
            })
            .collect::<Result<_>>()?;
        let s = vals.iter().map(|v| v.0.log_scale).fold(f64::NEG_INFINITY, f64::max);
        let sum: C64 = vals.iter().map(|(v, e)| v.at_scale(s) / e).sum();
        Ok(Scaled::new(sum / (n as f64 * r), s))
    }
}

/// `δ_0(z) W_1(ζ) − W_0(ζ) δ_1(z)`.
pub fn d0_numerator(delta_z: [Scaled; 2], w_zeta: [Scaled; 2]) -> Scaled {
    delta_z[0].mul(w_zeta[1]).sub(w_zeta[0].mul(delta_z[1]))
}

/// `r_0(z, ζ)`; on the diagonal the analytic limit
/// `(W_0 W_1' − W_0' W_1)/(2πi (W_0, W_1))`.
pub fn kernel_r0(ctx: &KernelContext, z: C64, zeta: C64) -> Result<Scaled> {
    let h = ctx.h;
    let wr = ctx.wronskian(zeta)?;
    if (zeta - z).norm() < 1e-6 * h {
        let (a, b) = (ctx.w(0, z)?, ctx.w(1, z)?);
        let (da, db) = (ctx.w_derivative(0, z)?, ctx.w_derivative(1, z)?);
        let num = a.mul(db).sub(da.mul(b));
        return Ok(num.div(wr).mul_c(C64::new(0.0, -0.5 / PI)));
    }
    let num = ctx.w(0, z)?.mul(ctx.w(1, zeta)?).sub(ctx.w(0, zeta)?.mul(ctx.w(1, z)?));
    let th = theta_scaled((zeta - z) / h, ThetaVariant::Minus)?;
    Ok(num.div(wr).mul(th).mul_c(C64::new(0.0, -0.5 / h)))
}

/// `d_0(z, ζ)` with the pole at `ζ = z + 0` realized as `z + 10⁻⁸ h`.
pub fn kernel_d0(ctx: &KernelContext, z: C64, zeta: C64) -> Result<Scaled> {
    let h = ctx.h;
    let wr = ctx.wronskian(zeta)?;
    let s = ctx.sample(z)?;
    let num = d0_numerator(s.delta, [ctx.w(0, zeta)?, ctx.w(1, zeta)?]);
    let th = theta_scaled((zeta - z - SIDE_EPS * h) / h, ThetaVariant::Minus)?;
    Ok(num.div(wr).mul(th).mul_c(C64::new(0.0, -0.5 / h)))
}

/// Panel layout along the segment.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuadratureConfig {
    pub nodes_per_panel: usize,
    /// Longest panel, in units of `h`.
    pub max_panel: f64,
    /// Geometric levels toward each endpoint.
    pub grading_levels: usize,
    pub grading_ratio: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { nodes_per_panel: 16, max_panel: 0.5, grading_levels: 12, grading_ratio: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Track {
    /// The segment shifted by `−αh/2`.
    Left,
    /// The segment itself.
    Center,
    /// The segment shifted by `+αh/2`.
    Right,
}

impl Track {
    pub const ALL: [Track; 3] = [Track::Left, Track::Center, Track::Right];

    fn idx(self) -> usize {
        self as usize
    }

    fn sign(self) -> f64 {
        match self {
            Track::Left => -1.0,
            Track::Center => 0.0,
            Track::Right => 1.0,
        }
    }
}

/// The space `H_{γ,α,β}` on the vertical segment from `z_1` to `z_2`.
#[derive(Clone, Debug, Serialize)]
pub struct WeightedCurveSpace {
    pub x: f64,
    pub y1: f64,
    pub y2: f64,
    pub h: f64,
    pub alpha: f64,
    pub beta: f64,
    pub quadrature: QuadratureConfig,
    pub curve: CurveSpec,
    pub certificate: PrecanonicalReport,
    /// Gauss nodes and weights in `y`.
    pub y: Vec<f64>,
    pub wy: Vec<f64>,
}

impl WeightedCurveSpace {
    /// The segment `Re z = x`, `y1 ≤ Im z ≤ y2`, certified precanonical for `p_0`.
    pub fn vertical(map: &ZetaMap, x: f64, y1: f64, y2: f64, h: f64, alpha: f64, beta: f64, quadrature: QuadratureConfig) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
            return Err(Error::Argument(format!("alpha = {alpha}, beta = {beta} must lie in (0, 1)")));
        }
        if !(y2 - y1 > 2.0 * h) || !(h > 0.0) {
            return Err(Error::Argument(format!("segment [{y1}, {y2}] too short for h = {h}")));
        }
        let pts: Vec<C64> = (0..=200).map(|k| C64::new(x, y1 + (y2 - y1) * k as f64 / 200.0)).collect();
        for &z in &pts {
            for d in [-1.5 * h, 1.5 * h] {
                if !map.in_u(z + d) {
                    return Err(Error::Domain(format!("{} outside U", z + d)));
                }
            }
        }
        let curve = CurveSpec::new(map, &pts, 0, 1.0);
        let certificate = is_precanonical(&curve);
        if !certificate.is_precanonical() {
            return Err(Error::Domain(format!("segment Re z = {x} is not precanonical for p_0: {certificate:?}")));
        }
        let (y, wy) = panel_nodes(y1, y2, h, beta, &quadrature);
        Ok(Self { x, y1, y2, h, alpha, beta, quadrature, curve, certificate, y, wy })
    }

    pub fn z1(&self) -> C64 {
        C64::new(self.x, self.y1)
    }

    pub fn z2(&self) -> C64 {
        C64::new(self.x, self.y2)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Share of the full shift at height `y`, and its derivative.
    fn ramp(&self, y: f64) -> (f64, f64) {
        let r = 0.5 * self.h;
        let lo = (y - self.y1) / r;
        let hi = (self.y2 - y) / r;
        if lo < 1.0 && lo <= hi {
            (lo.max(0.0), 1.0 / r)
        } else if hi < 1.0 {
            (hi.max(0.0), -1.0 / r)
        } else {
            (1.0, 0.0)
        }
    }

    /// Horizontal offset of a track from the segment at height `y`.
    pub fn offset(&self, track: Track, y: f64) -> f64 {
        track.sign() * 0.5 * self.alpha * self.h * self.ramp(y).0
    }

    pub fn point(&self, track: Track, k: usize) -> C64 {
        C64::new(self.x + self.offset(track, self.y[k]), self.y[k])
    }

    pub fn points(&self, track: Track) -> Vec<C64> {
        (0..self.len()).map(|k| self.point(track, k)).collect()
    }

    /// Quadrature weights `w_k dz/dy` along a track.
    pub fn weights(&self, track: Track) -> Vec<C64> {
        let a = track.sign() * 0.5 * self.alpha * self.h;
        self.y.iter().zip(&self.wy).map(|(&y, &w)| C64::new(a * self.ramp(y).1, 1.0) * w).collect()
    }

    /// `(z − z_1)^β (z − z_2)^β`.
    pub fn weight_beta(&self, z: C64) -> C64 {
        (z - self.z1()).powf(self.beta) * (z - self.z2()).powf(self.beta)
    }

    /// Whether `z` lies in the strip `Π_{γ,α}`.
    pub fn in_strip(&self, z: C64) -> bool {
        z.im > self.y1 && z.im < self.y2 && (z.re - self.x).abs() <= self.alpha * self.h
    }
}

/// Gauss nodes in `y`. On the two end zones of height `h/2` the variable is
/// `y = y_i ± (h/2) u^q` with `q = 1/(1 − β)`, which turns the weight
/// `|y − y_i|^{−β} dy` into a constant multiple of `du`; the `u` panels are
/// graded geometrically toward `u = 0`.
fn panel_nodes(y1: f64, y2: f64, h: f64, beta: f64, q: &QuadratureConfig) -> (Vec<f64>, Vec<f64>) {
    let ramp = 0.5 * h;
    let power = 1.0 / (1.0 - beta);
    let rule = gauss_legendre(q.nodes_per_panel);
    let mut u_breaks = vec![0.0];
    for k in (0..=q.grading_levels).rev() {
        u_breaks.push(q.grading_ratio.powi(k as i32));
    }
    let mut end_nodes = Vec::new();
    for p in u_breaks.windows(2) {
        let (c, r) = (0.5 * (p[0] + p[1]), 0.5 * (p[1] - p[0]));
        for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
            let u: f64 = c + r * t;
            end_nodes.push((ramp * u.powf(power), r * wt * ramp * power * u.powf(power - 1.0)));
        }
    }
    let mut y = Vec::new();
    let mut w = Vec::new();
    for &(d, wt) in &end_nodes {
        y.push(y1 + d);
        w.push(wt);
    }
    let (a, b) = (y1 + ramp, y2 - ramp);
    let n_mid = ((b - a) / (q.max_panel * h)).ceil().max(1.0) as usize;
    for k in 0..n_mid {
        let lo = a + (b - a) * k as f64 / n_mid as f64;
        let hi = a + (b - a) * (k + 1) as f64 / n_mid as f64;
        let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
            y.push(c + r * t);
            w.push(r * wt);
        }
    }
    for &(d, wt) in end_nodes.iter().rev() {
        y.push(y2 - d);
        w.push(wt);
    }
    (y, w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    R0,
    D0,
}

/// Source-side factors at one node: `P w` and `Q w` with
/// `P = W_1 ρ_0/(W_0, W_1)`, `Q = W_0 ρ_0/(W_0, W_1)`.
#[derive(Clone, Copy, Debug)]
struct SourceNode {
    z: C64,
    pw: C64,
    qw: (C64, f64),
}

/// Target-side factors: for `D_0`, `δ_0/ρ_0` and `δ_1/ρ_0`; for `R_0`,
/// `W_0/ρ_0` and `W_1/ρ_0`.
#[derive(Clone, Copy, Debug)]
struct Target {
    z: C64,
    a: C64,
    c: (C64, f64),
}

fn split(s: Scaled) -> (C64, f64) {
    (s.mantissa, s.log_scale)
}

impl Target {
    fn new(s: &Sample, kind: KernelKind) -> Self {
        let (a, c) = match kind {
            KernelKind::D0 => (s.delta[0], s.delta[1]),
            KernelKind::R0 => (s.w[0], s.w[1]),
        };
        Self { z: s.z, a: a.div(s.rho).to_c64(), c: split(c.div(s.rho)) }
    }
}

struct TrackData {
    samples: Vec<Sample>,
    sources: Vec<SourceNode>,
}

/// A function on the three tracks, stored divided by `ρ_0`.
#[derive(Clone, Debug, Serialize)]
pub struct CurveFunction {
    pub values: [Vec<C64>; 3],
}

impl CurveFunction {
    pub fn zeros(n: usize) -> Self {
        Self { values: [vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]] }
    }

    pub fn get(&self, track: Track) -> &[C64] {
        &self.values[track.idx()]
    }

    fn sub(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&o.values) {
            for (x, y) in a.iter_mut().zip(b) {
                *x -= y;
            }
        }
        out
    }
}

/// The discretized kernels on one segment for one `h`.
pub struct Parametrix {
    pub space: WeightedCurveSpace,
    pub ctx: KernelContext,
    tracks: Vec<TrackData>,
    /// `|(z − z_1)^β (z − z_2)^β|` at the nodes of each track.
    weights_beta: [Vec<f64>; 3],
}

impl Parametrix {
    pub fn new(space: WeightedCurveSpace, ctx: KernelContext) -> Result<Self> {
        if (space.h - ctx.h).abs() > 1e-15 * ctx.h {
            return Err(Error::Argument("space and context use different h".into()));
        }
        let mut tracks = Vec::with_capacity(3);
        let mut weights_beta: [Vec<f64>; 3] = Default::default();
        for t in Track::ALL {
            let pts = space.points(t);
            let wts = space.weights(t);
            let samples: Vec<Sample> = par_map(&pts, |&z| ctx.sample(z)).into_iter().collect::<Result<_>>()?;
            let sources = samples
                .iter()
                .zip(&wts)
                .map(|(s, &w)| {
                    let p = s.w[1].mul(s.rho).div(s.wronskian);
                    let q = s.w[0].mul(s.rho).div(s.wronskian).mul_c(w);
                    SourceNode { z: s.z, pw: p.to_c64() * w, qw: split(q) }
                })
                .collect();
            weights_beta[t.idx()] = pts.iter().map(|&z| space.weight_beta(z).norm()).collect();
            tracks.push(TrackData { samples, sources });
        }
        Ok(Self { space, ctx, tracks, weights_beta })
    }

    pub fn h(&self) -> f64 {
        self.ctx.h
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn samples(&self, track: Track) -> &[Sample] {
        &self.tracks[track.idx()].samples
    }

    /// `δ_0/ρ_0` on the tracks.
    pub fn delta0(&self) -> CurveFunction {
        let v = |t: Track| self.samples(t).iter().map(|s| s.delta[0].div(s.rho).to_c64()).collect();
        CurveFunction { values: [v(Track::Left), v(Track::Center), v(Track::Right)] }
    }

    /// Samples `f/ρ_0` on the tracks from a closure returning `f/ρ_0`.
    pub fn sample_function(&self, f: &(dyn Fn(C64) -> C64 + Sync)) -> CurveFunction {
        let v = |t: Track| self.space.points(t).into_iter().map(f).collect();
        CurveFunction { values: [v(Track::Left), v(Track::Center), v(Track::Right)] }
    }

    /// `sup |f_β|/|ρ_0|` over the nodes of the three tracks.
    pub fn norm(&self, f: &CurveFunction) -> f64 {
        let mut m: f64 = 0.0;
        for t in Track::ALL {
            for (v, w) in f.get(t).iter().zip(&self.weights_beta[t.idx()]) {
                m = m.max(v.norm() * w);
            }
        }
        m
    }

    /// Path integral over `src` of `K(z, ζ) f(ζ)` for each target and column,
    /// divided by `ρ_0(z)`.
    fn integrate(&self, src: Track, targets: &[Target], cols: &[&[C64]]) -> Vec<Vec<C64>> {
        let nodes = &self.tracks[src.idx()].sources;
        let h = self.h();
        let pref = C64::new(0.0, -0.5 / h);
        let rows = par_map(targets, |tg| {
            let mut acc = vec![C64::new(0.0, 0.0); cols.len()];
            for (k, s) in nodes.iter().enumerate() {
                let t = (s.z - tg.z) / h;
                let (tm, tl) = theta_parts(t, ThetaVariant::Minus);
                let th = if tl == 0.0 { tm } else if tl > LOG_FLOOR { tm * tl.exp() } else { C64::new(0.0, 0.0) };
                let mut kv = tg.a * s.pw * th;
                let e2 = tg.c.1 + s.qw.1 + tl;
                if e2 > LOG_FLOOR {
                    kv -= tg.c.0 * s.qw.0 * tm * e2.exp();
                }
                for (a, col) in acc.iter_mut().zip(cols) {
                    *a += kv * col[k];
                }
            }
            for a in acc.iter_mut() {
                *a *= pref;
            }
            acc
        });
        (0..cols.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
    }

    /// `D_0 f/ρ_0` at the nodes of every track.
    ///
    /// Center and right nodes integrate over the track to their left; left
    /// nodes integrate over the center and add the residue at `ζ = z`.
    pub fn apply_d0(&self, fs: &[&CurveFunction]) -> Vec<CurveFunction> {
        let n = self.len();
        let mut out = vec![CurveFunction::zeros(n); fs.len()];
        for (tgt, src) in [(Track::Left, Track::Center), (Track::Center, Track::Left), (Track::Right, Track::Center)] {
            let targets: Vec<Target> = self.samples(tgt).iter().map(|s| Target::new(s, KernelKind::D0)).collect();
            let cols: Vec<&[C64]> = fs.iter().map(|f| f.get(src)).collect();
            let res = self.integrate(src, &targets, &cols);
            for (j, r) in res.into_iter().enumerate() {
                out[j].values[tgt.idx()] = r;
            }
        }
        let samples = self.samples(Track::Left);
        for (j, f) in fs.iter().enumerate() {
            for (k, s) in samples.iter().enumerate() {
                out[j].values[Track::Left.idx()][k] -= self.residue_factor(s) * f.get(Track::Left)[k];
            }
        }
        out
    }

    /// `(δ_0 W_1 − W_0 δ_1)/(W_0, W_1)` at a node: the residue of the `D_0`
    /// integrand at `ζ = z`, times `2πi`, per unit `f(z)`.
    fn residue_factor(&self, s: &Sample) -> C64 {
        d0_numerator(s.delta, s.w).div(s.wronskian).to_c64()
    }

    /// Offsets of the tracks at the height of `z`, best first, for a path
    /// that must pass right of `z + kh` for `k ≤ lo` and left of it for `k ≥ hi`.
    fn pick_track(&self, z: C64, removable: bool) -> Result<Track> {
        let h = self.h();
        let u = z.re - self.space.x;
        let mut best: Option<(f64, Track)> = None;
        for t in Track::ALL {
            let o = self.space.offset(t, z.im);
            let (left, right) = if removable { (u - h, u + h) } else { (u - h, u) };
            if !(o > left && o < right) {
                continue;
            }
            let mut margin = (o - left).min(right - o);
            if removable {
                margin = margin.min(3.0 * (o - u).abs());
            }
            if best.is_none_or(|b| margin > b.0) {
                best = Some((margin, t));
            }
        }
        match best {
            Some((m, t)) if m >= 1e-6 * h => Ok(t),
            _ => Err(Error::Domain(format!("no admissible integration path for {z}"))),
        }
    }

    /// `D_0 f(z)/ρ_0(z)` at a point of the strip not to the left of every track.
    pub fn d0_at(&self, f: &CurveFunction, z: C64) -> Result<C64> {
        let t = self.pick_track(z, false)?;
        let tg = Target::new(&self.ctx.sample(z)?, KernelKind::D0);
        Ok(self.integrate(t, &[tg], &[f.get(t)])[0][0])
    }

    /// `R_0 f(z)/ρ_0(z)`, valid up to a horizontal distance `h` beyond the strip.
    pub fn r0_at(&self, f: &CurveFunction, z: C64) -> Result<C64> {
        Ok(self.r0_many(f, &[z])?[0])
    }

    fn r0_many(&self, f: &CurveFunction, zs: &[C64]) -> Result<Vec<C64>> {
        let mut out = Vec::with_capacity(zs.len());
        for &z in zs {
            let t = self.pick_track(z, true)?;
            let tg = Target::new(&self.ctx.sample(z)?, KernelKind::R0);
            out.push(self.integrate(t, &[tg], &[f.get(t)])[0][0]);
        }
        Ok(out)
    }

    /// `track,re_z,im_z,re,im` rows of `f` (stored divided by `ρ_0`).
    pub fn function_csv(&self, f: &CurveFunction) -> String {
        let mut out = String::from("track,re_z,im_z,re,im\n");
        for t in Track::ALL {
            let name = match t {
                Track::Left => "left",
                Track::Center => "center",
                Track::Right => "right",
            };
            for (z, v) in self.space.points(t).iter().zip(f.get(t)) {
                let _ = writeln!(out, "{name},{:.17e},{:.17e},{:.17e},{:.17e}", z.re, z.im, v.re, v.im);
            }
        }
        out
    }

    /// Interior points of the segment, avoiding the outer tenth at each end.
    pub fn interior_points(&self, n: usize) -> Vec<C64> {
        let (a, b) = (self.space.y1, self.space.y2);
        let l = b - a;
        (0..n).map(|k| C64::new(self.space.x, a + l * (0.1 + 0.8 * (k as f64 + 0.5) / n as f64))).collect()
    }
}

/// Random `f` with `f_β/ρ_0` a polynomial of degree ≤ 3 in the rescaled
/// variable along the segment; returned as `f/ρ_0`.
pub fn probe_functions(space: &WeightedCurveSpace, count: usize, seed: u64) -> Vec<Arc<dyn Fn(C64) -> C64 + Send + Sync>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mid = 0.5 * (space.z1() + space.z2());
    let half = 0.5 * (space.y2 - space.y1);
    (0..count)
        .map(|_| {
            let deg = rng.gen_range(0..=3usize);
            let coeffs: Vec<C64> = (0..=deg).map(|_| C64::from_polar(rng.gen_range(0.2..1.0), rng.gen_range(0.0..2.0 * PI))).collect();
            let sp = space.clone();
            Arc::new(move |z: C64| {
                let s = (z - mid) / half;
                let p = coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * s + c);
                p / sp.weight_beta(z)
            }) as Arc<dyn Fn(C64) -> C64 + Send + Sync>
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct NormEstimate {
    pub h: f64,
    pub probes: usize,
    /// `max ‖D_0 f‖/‖f‖` over the probes.
    pub norm: f64,
    pub ratios: Vec<f64>,
}

/// Empirical `‖D_0‖` from `probes` random probe functions.
pub fn operator_norm_estimate(par: &Parametrix, probes: usize, seed: u64) -> Result<NormEstimate> {
    if probes == 0 {
        return Err(Error::Argument("need at least one probe".into()));
    }
    let fs: Vec<CurveFunction> = probe_functions(&par.space, probes, seed).iter().map(|f| par.sample_function(f.as_ref())).collect();
    let refs: Vec<&CurveFunction> = fs.iter().collect();
    let out = par.apply_d0(&refs);
    let ratios: Vec<f64> = fs.iter().zip(&out).map(|(f, d)| par.norm(d) / par.norm(f)).collect();
    if ratios.iter().any(|r| !r.is_finite()) {
        return Err(Error::Accuracy("non-finite D_0 probe norm".into()));
    }
    let norm = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(NormEstimate { h: par.h(), probes, norm, ratios })
}

#[derive(Clone, Debug, Serialize)]
pub struct NeumannSolveReport {
    pub h: f64,
    pub order: usize,
    pub iterations: usize,
    /// Weighted norm of each update `g^{(k+1)} − g^{(k)}`.
    pub updates: Vec<f64>,
    pub delta_norm: f64,
    pub g_norm: f64,
    /// `‖g + D_0 g − δ_0‖/‖δ_0‖` after the last iterate.
    pub residual: f64,
    pub converged: bool,
}

/// Solves `g + D_0 g = rhs` by Neumann iteration from `g = rhs`.
pub fn solve_neumann(par: &Parametrix, rhs: &CurveFunction) -> Result<(CurveFunction, NeumannSolveReport)> {
    let rhs_norm = par.norm(rhs);
    let mut g = rhs.clone();
    let mut updates = Vec::new();
    let mut converged = rhs_norm == 0.0;
    let mut iterations = 0;
    while !converged && iterations < 50 {
        let dg = par.apply_d0(&[&g]).pop().unwrap_or_else(|| CurveFunction::zeros(par.len()));
        let next = rhs.sub(&dg);
        let upd = par.norm(&next.sub(&g));
        iterations += 1;
        if !upd.is_finite() {
            return Err(Error::Divergence(f64::INFINITY));
        }
        if let Some(&prev) = updates.last() {
            let ratio: f64 = upd / prev;
            if ratio > 1.0 && iterations > 2 {
                return Err(Error::Divergence(ratio));
            }
        }
        updates.push(upd);
        g = next;
        converged = upd < 1e-12 * rhs_norm;
    }
    let dg = par.apply_d0(&[&g]).pop().unwrap_or_else(|| CurveFunction::zeros(par.len()));
    let mut r = g.sub(rhs);
    for (a, b) in r.values.iter_mut().zip(&dg.values) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
    let residual = if rhs_norm == 0.0 { par.norm(&r) } else { par.norm(&r) / rhs_norm };
    let report = NeumannSolveReport {
        h: par.h(),
        order: par.ctx.order(),
        iterations,
        updates,
        delta_norm: rhs_norm,
        g_norm: par.norm(&g),
        residual,
        converged,
    };
    Ok((g, report))
}

/// `g_0` with `g_0 + D_0 g_0 = δ_0` on the tracks.
pub fn solve_g0(par: &Parametrix) -> Result<(CurveFunction, NeumannSolveReport)> {
    solve_neumann(par, &par.delta0())
}

/// `Δ_0 = R_0 g_0` and `ψ_0 = W_0 − Δ_0`.
pub struct Correction<'a> {
    pub par: &'a Parametrix,
    pub g0: CurveFunction,
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrectionPoint {
    pub z: [f64; 2],
    /// `|Δ_0(z)|/|ρ_0(z)|`
    pub delta_rel: f64,
    pub h_w0: f64,
    pub h_psi0: f64,
}

pub fn build_correction(par: &Parametrix, g0: CurveFunction) -> Correction<'_> {
    Correction { par, g0 }
}

impl Correction<'_> {
    /// `Δ_0(z)`
    pub fn delta(&self, z: C64) -> Result<Scaled> {
        let v = self.par.r0_at(&self.g0, z)?;
        Ok(self.par.ctx.rho0(z).mul_c(v))
    }

    pub fn psi0(&self, z: C64) -> Result<Scaled> {
        Ok(self.par.ctx.w(0, z)?.sub(self.delta(z)?))
    }

    /// `|H W_0|`, `|H ψ_0|` and `|Δ_0|/|ρ_0|` at `z`.
    pub fn check(&self, z: C64) -> Result<CorrectionPoint> {
        let h = self.par.h();
        let pot = &self.par.ctx.map().pot;
        let d = self.par.r0_many(&self.g0, &[z - h, z, z + h])?;
        let parts: Vec<Scaled> = [z - h, z, z + h].iter().zip(&d).map(|(&x, &v)| self.par.ctx.rho0(x).mul_c(v)).collect();
        let h_delta = parts[0].add(parts[2]).add(parts[1].mul_c(pot.eval(z)));
        let hw = self.par.ctx.delta(0, z)?;
        let hpsi = hw.sub(h_delta);
        Ok(CorrectionPoint { z: [z.re, z.im], delta_rel: d[1].norm(), h_w0: hw.abs(), h_psi0: hpsi.abs() })
    }
}

/// Relative defect of `H R_0 f = f + D_0 f` at `z` for `f` given as `f/ρ_0`.
pub fn parametrix_identity_defect(par: &Parametrix, f: &(dyn Fn(C64) -> C64 + Sync), z: C64) -> Result<f64> {
    let h = par.h();
    let pot = &par.ctx.map().pot;
    let cf = par.sample_function(f);
    let r = par.r0_many(&cf, &[z - h, z, z + h])?;
    let parts: Vec<Scaled> = [z - h, z, z + h].iter().zip(&r).map(|(&x, &v)| par.ctx.rho0(x).mul_c(v)).collect();
    let lhs = parts[0].add(parts[2]).add(parts[1].mul_c(pot.eval(z)));
    let rho = par.ctx.rho0(z);
    let fz = rho.mul_c(f(z));
    let rhs = fz.add(rho.mul_c(par.d0_at(&cf, z)?));
    Ok(lhs.sub(rhs).abs() / fz.abs())
}

/// Segment and discretization for the parametrix checks.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SegmentConfig {
    pub x: f64,
    pub y1: f64,
    pub y2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub quadrature: QuadratureConfig,
    pub probes: usize,
    pub seed: u64,
    pub interior_points: usize,
    pub precision: Precision,
}

impl Default for SegmentConfig {
    /// A segment in the lower half plane crossing `σ_2` for the linear
    /// potential, where `0 < Re p_0 < π`.
    fn default() -> Self {
        Self {
            x: 0.2,
            y1: -0.5,
            y2: -0.08,
            alpha: 0.5,
            beta: 0.5,
            quadrature: QuadratureConfig::default(),
            probes: 8,
            seed: 7,
            interior_points: 10,
            precision: Precision::Double,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParametrixPoint {
    pub h: f64,
    pub nodes: usize,
    pub norm: NormEstimate,
    pub solve: NeumannSolveReport,
    pub correction: Vec<CorrectionPoint>,
    /// Largest `|H ψ_0|/|H W_0|` over the interior points.
    pub reduction: f64,
    /// Largest `|Δ_0|/|ρ_0|` over the interior points.
    pub delta_max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ParametrixReport {
    pub order: usize,
    pub config: SegmentConfig,
    pub points: Vec<ParametrixPoint>,
    pub norm_slope: Option<f64>,
    pub g_slope: Option<f64>,
    pub delta_slope: Option<f64>,
    pub worst_residual: f64,
    pub worst_reduction: f64,
    pub norm_threshold: f64,
    pub delta_threshold: f64,
    pub pass: bool,
}

impl ParametrixReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,nodes,d0_norm,iterations,residual,delta_norm,g_norm,reduction,delta_max\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{:.17e},{},{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                p.h, p.nodes, p.norm.norm, p.solve.iterations, p.solve.residual, p.solve.delta_norm, p.solve.g_norm, p.reduction, p.delta_max
            );
        }
        out
    }
}

/// Full parametrix pipeline at one `h`.
pub fn parametrix_point(sol: &AsymptoticSolution, cfg: &SegmentConfig, h: f64) -> Result<ParametrixPoint> {
    let space = WeightedCurveSpace::vertical(&sol.map, cfg.x, cfg.y1, cfg.y2, h, cfg.alpha, cfg.beta, cfg.quadrature)?;
    let ctx = KernelContext::new(sol, h, cfg.precision)?;
    let par = Parametrix::new(space, ctx)?;
    let norm = operator_norm_estimate(&par, cfg.probes, cfg.seed)?;
    if !(norm.norm < 0.5) {
        return Err(Error::Divergence(norm.norm));
    }
    let (g0, solve) = solve_g0(&par)?;
    let corr = build_correction(&par, g0);
    let correction: Vec<CorrectionPoint> = par.interior_points(cfg.interior_points).into_iter().map(|z| corr.check(z)).collect::<Result<_>>()?;
    let reduction = correction.iter().map(|c| c.h_psi0 / c.h_w0).fold(0.0, f64::max);
    let delta_max = correction.iter().map(|c| c.delta_rel).fold(0.0, f64::max);
    Ok(ParametrixPoint { h, nodes: par.len(), norm, solve, correction, reduction, delta_max })
}

/// The parametrix checks over an `h` sweep.
pub fn parametrix_sweep(sol: &AsymptoticSolution, cfg: &SegmentConfig, hs: &[f64]) -> Result<ParametrixReport> {
    let points: Vec<ParametrixPoint> = hs.iter().map(|&h| parametrix_point(sol, cfg, h)).collect::<Result<_>>()?;
    let hv: Vec<f64> = points.iter().map(|p| p.h).collect();
    let slope = |f: &dyn Fn(&ParametrixPoint) -> f64| loglog_fit(&hv, &points.iter().map(f).collect::<Vec<_>>()).map(|fit| fit.slope);
    let norm_slope = slope(&|p| p.norm.norm);
    let g_slope = slope(&|p| p.solve.g_norm);
    let delta_slope = slope(&|p| p.delta_max);
    let worst_residual = points.iter().map(|p| p.solve.residual).fold(0.0, f64::max);
    let worst_reduction = points.iter().map(|p| p.reduction).fold(0.0, f64::max);
    let order = sol.order;
    let norm_threshold = order as f64 + 0.4;
    let delta_threshold = order as f64 + 0.7;
    let pass = norm_slope.is_some_and(|s| s >= norm_threshold)
        && delta_slope.is_some_and(|s| s >= delta_threshold)
        && worst_residual <= 1e-10
        && worst_reduction <= 1e-2
        && points.iter().all(|p| p.solve.converged);
    Ok(ParametrixReport {
        order,
        config: *cfg,
        points,
        norm_slope,
        g_slope,
        delta_slope,
        worst_residual,
        worst_reduction,
        norm_threshold,
        delta_threshold,
        pass,
    })
}
