//! Heat kernels on the Lie algebra and its Cartan subalgebra, the
//! group-averaged kernel, the `V` function, and finite-difference checks of
//! the heat equations they satisfy.
//!
//! Coordinates on the Cartan subalgebra are orthonormal for the positive
//! form `Q`; with this form the heat equation reads `∂_t V = ½ ΔV` and every
//! Gaussian exponent is nonpositive for real points.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::closedform::{hc_rhs_scaled, CartanPoint};
use crate::error::{Error, Result};
use crate::groups::{embed_cartan, mc_expectation, pairing, CMatrix, CompactGroupSpec, IntegralEstimate};
use crate::numeric::{alternating_exp_sum, CompensatedSum};
use crate::rootsys::{discriminant, normalization_constant, RootSystem, SparsePolynomial};

/// Successive quadrature refinements must agree to this before stopping.
pub const QUADRATURE_TOL: f64 = 1e-7;

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("t must be positive and finite, got {t}")))
    }
}

fn real_point(rs: &RootSystem, u: &[f64]) -> CartanPoint {
    CartanPoint::from_orthonormal(rs, u)
}

fn norm_sq(rs: &RootSystem, h: &CartanPoint) -> f64 {
    rs.pairing(h.coords(), h.coords()).re
}

#[derive(Debug, Clone)]
pub struct HeatKernelParams {
    pub spec: CompactGroupSpec,
    pub x1: CartanPoint,
    pub t: f64,
}

impl HeatKernelParams {
    pub fn new(spec: CompactGroupSpec, x1: CartanPoint, t: f64) -> Result<Self> {
        check_t(t)?;
        spec.root_system().validate_point(x1.coords(), "x1")?;
        Ok(HeatKernelParams { spec, x1, t })
    }
}

/// `(2πt)^{−d/2} e^{−Q(X1−X2)/2t}` on the full algebra of dimension `d`.
pub fn heat_kernel_g0(spec: &CompactGroupSpec, x1: &CMatrix, x2: &CMatrix, t: f64) -> Result<f64> {
    check_t(t)?;
    let d = x1 - x2;
    let q = pairing(spec, &d, &d)?.re;
    let dim = spec.algebra_dim() as f64;
    Ok((2.0 * PI * t).powf(-dim / 2.0) * (-q / (2.0 * t)).exp())
}

/// Heat kernel on the full algebra between two Cartan elements.
pub fn heat_kernel(params: &HeatKernelParams, x2: &CartanPoint) -> Result<f64> {
    let spec = &params.spec;
    heat_kernel_g0(spec, &embed_cartan(spec, &params.x1)?, &embed_cartan(spec, x2)?, params.t)
}

/// `Γ(n/2)` for a positive integer `n`.
fn gamma_half(n: usize) -> f64 {
    let mut g = if n.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut k = if n.is_multiple_of(2) { 2 } else { 1 };
    while k < n {
        g *= k as f64 / 2.0;
        k += 2;
    }
    g
}

/// `∫_{g0} K(x1, x2; t) dx2` by one-dimensional radial quadrature
/// (composite Simpson on `[0, √t (√d + 12)]`).
pub fn heat_kernel_total_mass(spec: &CompactGroupSpec, t: f64) -> Result<f64> {
    check_t(t)?;
    let d = spec.algebra_dim();
    let sphere = 2.0 * PI.powf(d as f64 / 2.0) / gamma_half(d);
    let norm = (2.0 * PI * t).powf(-(d as f64) / 2.0);
    let rmax = t.sqrt() * ((d as f64).sqrt() + 12.0);
    let n = 4000;
    let h = rmax / n as f64;
    let f = |r: f64| sphere * r.powi(d as i32 - 1) * norm * (-r * r / (2.0 * t)).exp();
    let mut acc = CompensatedSum::default();
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc.add(Complex64::new(w * f(i as f64 * h), 0.0));
    }
    Ok(acc.value().re * h / 3.0)
}

/// `log K̃(h1, h2; t)` with `K̃ = ∫_G K(Ad_g h1, h2; t) dg` in closed form.
pub fn log_averaged_kernel(spec: &CompactGroupSpec, h1: &CartanPoint, h2: &CartanPoint, t: f64) -> Result<f64> {
    check_t(t)?;
    let rs = spec.root_system();
    let d = spec.algebra_dim() as f64;
    let integral = hc_rhs_scaled(rs, h1, &h2.scaled(Complex64::new(1.0 / t, 0.0)))?;
    if !(integral.mantissa.re > 0.0) {
        return Err(Error::Numerical(format!("orbital integral not positive ({}) for real inputs", integral.mantissa)));
    }
    Ok(-0.5 * d * (2.0 * PI * t).ln() - (norm_sq(rs, h1) + norm_sq(rs, h2)) / (2.0 * t)
        + integral.mantissa.re.ln()
        + integral.max_exp)
}

pub fn averaged_kernel_closed(spec: &CompactGroupSpec, h1: &CartanPoint, h2: &CartanPoint, t: f64) -> Result<f64> {
    Ok(log_averaged_kernel(spec, h1, h2, t)?.exp())
}

/// Monte Carlo average of `K(Ad_g h1, h2; t)` over Haar measure.
pub fn averaged_kernel_mc(
    spec: &CompactGroupSpec,
    h1: &CartanPoint,
    h2: &CartanPoint,
    t: f64,
    n: usize,
    seed: u64,
) -> Result<IntegralEstimate> {
    check_t(t)?;
    let m1 = embed_cartan(spec, h1)?;
    let m2 = embed_cartan(spec, h2)?;
    mc_expectation(spec, n, seed, |g| {
        let x = g.adjoint_action(&m1);
        Complex64::new(heat_kernel_g0(spec, &x, &m2, t).unwrap_or(f64::NAN), 0.0)
    })
}

/// `V = (2π)^{(d−r)/2} Π(h1) Π(h2) K̃(h1, h2; t)`.
pub fn v_function(spec: &CompactGroupSpec, h1: &CartanPoint, h2: &CartanPoint, t: f64) -> Result<f64> {
    let rs = spec.root_system();
    let p1 = rs.check_regular(h1.coords(), "h1")?.re;
    let p2 = rs.check_regular(h2.coords(), "h2")?.re;
    let half = (spec.algebra_dim() - rs.rank()) as f64 / 2.0;
    let log_k = log_averaged_kernel(spec, h1, h2, t)?;
    Ok(p1 * p2 * (half * (2.0 * PI).ln() + log_k).exp())
}

/// `C (2πt)^{−r/2} Σ_w ε(w) e^{−Q(w h1 − h2)/2t}`: a signed sum of heat
/// kernels on the Cartan subalgebra. Defined for every `h2`, singular or not.
///
/// The exponents are centered on their mean before summation; the mean is
/// `−(Q(h1)+Q(h2))/2t` because Weyl orbits average to zero.
pub fn v_weyl_sum(rs: &RootSystem, h1: &CartanPoint, h2: &CartanPoint, t: f64) -> Result<f64> {
    check_t(t)?;
    rs.validate_point(h1.coords(), "h1")?;
    rs.validate_point(h2.coords(), "h2")?;
    let weyl = rs.weyl_group()?;
    let exps: Vec<(f64, Complex64)> = weyl
        .iter()
        .map(|w| {
            let d: Vec<Complex64> = w.apply(h1.coords()).iter().zip(h2.coords()).map(|(a, b)| a - b).collect();
            (w.sign_f64(), -rs.pairing(&d, &d) / (2.0 * t))
        })
        .collect();
    let mean = exps.iter().map(|(_, x)| x).sum::<Complex64>() / exps.len() as f64;
    let centered: Vec<(f64, Complex64)> = exps.iter().map(|&(s, x)| (s, x - mean)).collect();
    let s = alternating_exp_sum(&centered, rs.num_positive_roots() as u32);
    let c = normalization_constant(rs)?;
    let r = rs.rank() as f64;
    Ok(c * (2.0 * PI * t).powf(-r / 2.0) * (s.mantissa * (s.max_exp + mean.re).exp()).re)
}

/// Rectangular grid in orthonormal Cartan coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct GridSpec {
    /// `[lo, hi]` per axis; the number of axes is the rank.
    pub extent: Vec<[f64; 2]>,
    /// Points per axis (≥ 1; one point sits at the interval midpoint).
    pub points: usize,
}

impl GridSpec {
    /// Cube of half-width `half` around `center` (orthonormal coordinates).
    pub fn around(center: &[f64], half: f64, points: usize) -> Self {
        GridSpec { extent: center.iter().map(|c| [c - half, c + half]).collect(), points }
    }

    pub fn dims(&self) -> usize {
        self.extent.len()
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .extent
            .iter()
            .map(|[lo, hi]| {
                if self.points <= 1 {
                    vec![0.5 * (lo + hi)]
                } else {
                    (0..self.points).map(|i| lo + (hi - lo) * i as f64 / (self.points - 1) as f64).collect()
                }
            })
            .collect();
        let mut out: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |x| {
                        let mut q = p.clone();
                        q.push(*x);
                        q
                    })
                })
                .collect();
        }
        out
    }
}

/// Fails with a configuration error if a stencil of radius `reach` around
/// any grid node comes within reach of a root hyperplane.
fn check_grid(rs: &RootSystem, grid: &GridSpec, reach: f64) -> Result<()> {
    if grid.dims() != rs.rank() {
        return Err(Error::Config(format!("grid has {} axes, rank is {}", grid.dims(), rs.rank())));
    }
    if grid.points == 0 {
        return Err(Error::Config("grid needs at least one point per axis".into()));
    }
    for u in grid.nodes() {
        let h = real_point(rs, &u);
        for (i, (val, a)) in rs.root_values(h.coords()).iter().zip(rs.positive_roots_f64()).enumerate() {
            let len = (a.iter().map(|x| x * x).sum::<f64>() / rs.form_scale_f64()).sqrt();
            if val.norm() / len <= 2.0 * reach {
                return Err(Error::Config(format!(
                    "grid node {u:?} is within {:.3e} of root hyperplane {}",
                    val.norm() / len,
                    rs.root_label(i)
                )));
            }
        }
    }
    Ok(())
}

/// Residual record: `max_residual[i]` at `steps[i]`, ratios between
/// consecutive steps.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub op: String,
    pub steps: Vec<f64>,
    pub max_residual: Vec<f64>,
    pub halving_ratio: Vec<f64>,
    /// Max residual divided by max |field| on the grid.
    pub max_relative_residual: Vec<f64>,
    pub details: serde_json::Value,
}

fn ratios(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[0] / w[1]).collect()
}

/// `(max |∂_t f − ½Δf|, max |f|)` over the grid with central differences of step `s`.
fn heat_residual<F>(grid: &GridSpec, t0: f64, s: f64, f: &F) -> Result<(f64, f64)>
where
    F: Fn(&[f64], f64) -> Result<f64> + Sync,
{
    let nodes = grid.nodes();
    let per: Vec<Result<(f64, f64)>> = nodes
        .par_iter()
        .map(|u| {
            let f0 = f(u, t0)?;
            let ft = (f(u, t0 + s)? - f(u, t0 - s)?) / (2.0 * s);
            let mut lap = 0.0;
            for k in 0..u.len() {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[k] += s;
                dn[k] -= s;
                lap += (f(&up, t0)? - 2.0 * f0 + f(&dn, t0)?) / (s * s);
            }
            Ok(((ft - 0.5 * lap).abs(), f0.abs()))
        })
        .collect();
    let mut res: f64 = 0.0;
    let mut mag: f64 = 0.0;
    for p in per {
        let (r, m) = p?;
        res = res.max(r);
        mag = mag.max(m);
    }
    Ok((res, mag))
}

fn check_steps(steps: &[f64], t0: f64) -> Result<()> {
    check_t(t0)?;
    if steps.is_empty() || steps.iter().any(|&s| !(s > 0.0) || s >= t0) {
        return Err(Error::Config(format!("steps must be nonempty, positive and below t0 = {t0}: {steps:?}")));
    }
    Ok(())
}

/// Heat-equation residual of `V(h1, ·; t)` on the grid at each step, plus
/// the same residual for `K̃` without the `Π` factors (control) and the
/// analytic residual of the Weyl-sum form.
pub fn radial_heat_residual(
    spec: &CompactGroupSpec,
    h1: &CartanPoint,
    grid: &GridSpec,
    t0: f64,
    steps: &[f64],
) -> Result<ResidualReport> {
    let rs = spec.root_system();
    check_steps(steps, t0)?;
    rs.check_regular(h1.coords(), "h1")?;
    let reach = steps.iter().copied().fold(0.0, f64::max);
    check_grid(rs, grid, reach)?;
    let v = |u: &[f64], t: f64| v_function(spec, h1, &real_point(rs, u), t);
    let half = (spec.algebra_dim() - rs.rank()) as f64 / 2.0;
    let control = |u: &[f64], t: f64| -> Result<f64> {
        Ok((half * (2.0 * PI).ln() + log_averaged_kernel(spec, h1, &real_point(rs, u), t)?).exp())
    };
    let mut max_residual = Vec::new();
    let mut rel = Vec::new();
    let mut control_rel = Vec::new();
    for &s in steps {
        let (r, m) = heat_residual(grid, t0, s, &v)?;
        max_residual.push(r);
        rel.push(r / m);
        let (cr, cm) = heat_residual(grid, t0, s, &control)?;
        control_rel.push(cr / cm);
    }
    let analytic = grid
        .nodes()
        .iter()
        .map(|u| analytic_weyl_sum_residual(rs, h1, &real_point(rs, u), t0))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(ResidualReport {
        op: "radial_heat_residual".into(),
        halving_ratio: ratios(&max_residual),
        steps: steps.to_vec(),
        max_residual,
        max_relative_residual: rel,
        details: serde_json::json!({
            "t0": t0,
            "control_max_relative_residual": control_rel,
            "control_halving_ratio": ratios(&control_rel),
            "analytic_weyl_sum_residual": analytic,
        }),
    })
}

/// `|∂_t V − ½ΔV|` for the Weyl-sum form with derivatives taken termwise in
/// closed form (each term is a Gaussian on the Cartan subalgebra).
pub fn analytic_weyl_sum_residual(rs: &RootSystem, h1: &CartanPoint, h2: &CartanPoint, t: f64) -> Result<f64> {
    check_t(t)?;
    let r = rs.rank() as f64;
    let c = normalization_constant(rs)? * (2.0 * PI * t).powf(-r / 2.0);
    let mut acc = CompensatedSum::default();
    for w in rs.weyl_group()? {
        let d: Vec<Complex64> = w.apply(h1.coords()).iter().zip(h2.coords()).map(|(a, b)| a - b).collect();
        let q = rs.pairing(&d, &d).re;
        let g = c * (-q / (2.0 * t)).exp() * w.sign_f64();
        let dt = g * (-r / (2.0 * t) + q / (2.0 * t * t));
        let lap = g * (q / (t * t) - r / t);
        acc.add(Complex64::new(dt - 0.5 * lap, 0.0));
    }
    Ok(acc.value().re.abs())
}

/// Test function on the Cartan subalgebra, in ambient coordinates.
pub trait TestFunction: Sync {
    fn eval(&self, h: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> TestFunction for F {
    fn eval(&self, h: &[f64]) -> f64 {
        self(h)
    }
}

/// `e^{−Q(h − c)/2σ²}`.
#[derive(Debug, Clone, Serialize)]
pub struct GaussianBump {
    pub center: Vec<f64>,
    pub sigma: f64,
    /// Antisymmetrize over the Weyl group: `Σ_w ε(w) φ(w h)`.
    pub antisymmetrize: bool,
}

/// [`GaussianBump`] bound to a root system.
pub struct BoundBump<'a> {
    bump: GaussianBump,
    rs: &'a RootSystem,
}

impl GaussianBump {
    pub fn bind(self, rs: &RootSystem) -> BoundBump<'_> {
        BoundBump { bump: self, rs }
    }
}

impl BoundBump<'_> {
    fn plain(&self, h: &[f64]) -> f64 {
        let d: Vec<f64> = h.iter().zip(&self.bump.center).map(|(a, b)| a - b).collect();
        (-self.rs.pairing_f64(&d, &d) / (2.0 * self.bump.sigma * self.bump.sigma)).exp()
    }
}

impl TestFunction for BoundBump<'_> {
    fn eval(&self, h: &[f64]) -> f64 {
        if !self.bump.antisymmetrize {
            return self.plain(h);
        }
        // Reindexing w → w⁻¹ leaves ε unchanged, so Σ ε(w) φ(w⁻¹h) = Σ ε(w) φ(w h).
        self.rs
            .weyl_group()
            .map(|ws| ws.iter().map(|w| w.sign_f64() * self.plain(&w.apply_f64(h))).sum())
            .unwrap_or(f64::NAN)
    }
}

/// Tensor-product trapezoid rule on a cube of half-width `half` around
/// `center` (orthonormal coordinates), doubling the resolution until two
/// successive estimates differ by less than [`QUADRATURE_TOL`] (absolute, or
/// relative to the estimate when it exceeds one).
pub fn cube_quadrature<F>(center: &[f64], half: f64, start_points: usize, max_points: usize, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dims = center.len();
    let mut n = start_points.max(3);
    let mut prev: Option<f64> = None;
    loop {
        let h = 2.0 * half / (n - 1) as f64;
        let total: usize = n.pow(dims as u32);
        let sum: f64 = (0..total)
            .into_par_iter()
            .map(|mut idx| {
                let mut u = Vec::with_capacity(dims);
                let mut w = 1.0;
                for c in center {
                    let i = idx % n;
                    idx /= n;
                    u.push(c - half + i as f64 * h);
                    if i == 0 || i == n - 1 {
                        w *= 0.5;
                    }
                }
                w * f(&u)
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        let est = sum * h.powi(dims as i32);
        if let Some(p) = prev {
            if (est - p).abs() < QUADRATURE_TOL * est.abs().max(1.0) {
                return Ok(est);
            }
        }
        prev = Some(est);
        if 2 * n - 1 > max_points {
            return Err(Error::Resolution(format!(
                "trapezoid rule still changing by {:.2e} at {n} points per axis",
                (est - prev.unwrap_or(est)).abs()
            )));
        }
        n = 2 * n - 1;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryRecord {
    pub t: f64,
    pub integral: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryReport {
    pub op: String,
    /// `C Σ_w ε(w) φ(w h1)`.
    pub limit: f64,
    pub records: Vec<BoundaryRecord>,
}

fn max_points_for_rank(r: usize) -> usize {
    match r {
        1 => 1 << 16,
        2 => 1 << 11,
        _ => 1 << 6,
    }
}

/// `∫ V(h1, h2; t) φ(h2) dh2` for each `t` against the limit
/// `C Σ_w ε(w) φ(w h1)`. Uses the Weyl-sum form of `V`, which is smooth
/// across root hyperplanes.
pub fn boundary_delta_check(
    rs: &RootSystem,
    h1: &CartanPoint,
    test_fn: &dyn TestFunction,
    t_sequence: &[f64],
) -> Result<BoundaryReport> {
    if t_sequence.is_empty() {
        return Err(Error::Config("t sequence is empty".into()));
    }
    rs.check_regular(h1.coords(), "h1")?;
    let c = normalization_constant(rs)?;
    let weyl = rs.weyl_group()?;
    let h1r = h1.real_parts();
    let limit = c * weyl.iter().map(|w| w.sign_f64() * test_fn.eval(&w.apply_f64(&h1r))).sum::<f64>();
    let u1 = rs.to_orthonormal_f64(&h1r);
    let radius = u1.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut records = Vec::new();
    for &t in t_sequence {
        check_t(t)?;
        let half = radius + 8.0 + 12.0 * t.sqrt();
        // Start fine enough that the Gaussian of width √t is resolved.
        let start = ((2.0 * half / t.sqrt()) as usize + 1).clamp(17, max_points_for_rank(rs.rank()) / 2);
        let integral = cube_quadrature(&vec![0.0; rs.rank()], half, start, max_points_for_rank(rs.rank()), |u| {
            let h2 = real_point(rs, u);
            let v = v_weyl_sum(rs, h1, &h2, t).unwrap_or(f64::NAN);
            v * test_fn.eval(&h2.real_parts())
        })?;
        let rel_error = if limit.abs() > 0.0 { (integral - limit).abs() / limit.abs() } else { integral.abs() };
        records.push(BoundaryRecord { t, integral, rel_error });
    }
    Ok(BoundaryReport { op: "boundary_delta_check".into(), limit, records })
}

#[derive(Debug, Clone, Serialize)]
pub struct SemigroupReport {
    pub op: String,
    pub s: f64,
    pub t: f64,
    pub convolved: f64,
    pub direct: f64,
    pub abs_error: f64,
}

/// `∫ V(h1, y; s) G_t(h2 − y) dy` against `V(h1, h2; s+t)`, with `G_t` the
/// heat kernel on the Cartan subalgebra.
pub fn semigroup_check(rs: &RootSystem, h1: &CartanPoint, h2: &CartanPoint, s: f64, t: f64) -> Result<SemigroupReport> {
    check_t(s)?;
    check_t(t)?;
    rs.validate_point(h1.coords(), "h1")?;
    rs.validate_point(h2.coords(), "h2")?;
    let r = rs.rank();
    let u2 = rs.to_orthonormal_f64(&h2.real_parts());
    let u1 = rs.to_orthonormal_f64(&h1.real_parts());
    let radius = u1.iter().chain(&u2).map(|x| x * x).sum::<f64>().sqrt();
    let half = radius + 12.0 * (s + t).sqrt() + 2.0;
    let norm = (2.0 * PI * t).powf(-(r as f64) / 2.0);
    let width = s.min(t).sqrt();
    let start = ((2.0 * half / width) as usize + 1).clamp(17, max_points_for_rank(r) / 2);
    let convolved = cube_quadrature(&vec![0.0; r], half, start, max_points_for_rank(r), |y| {
        let d2: f64 = y.iter().zip(&u2).map(|(a, b)| (a - b) * (a - b)).sum();
        let v = v_weyl_sum(rs, h1, &real_point(rs, y), s).unwrap_or(f64::NAN);
        v * norm * (-d2 / (2.0 * t)).exp()
    })?;
    let direct = v_weyl_sum(rs, h1, h2, s + t)?;
    Ok(SemigroupReport { op: "semigroup_check".into(), s, t, convolved, direct, abs_error: (convolved - direct).abs() })
}

/// Derivatives of `Π` in orthonormal coordinates.
struct PiDerivatives {
    pi: SparsePolynomial<Complex64>,
    grad: Vec<SparsePolynomial<Complex64>>,
    lap: SparsePolynomial<Complex64>,
}

impl PiDerivatives {
    fn new(rs: &RootSystem) -> Self {
        let pi = discriminant(rs);
        let grad = (0..rs.rank()).map(|k| pi.derivative(k)).collect();
        let lap = pi.laplacian();
        PiDerivatives { pi, grad, lap }
    }

    /// `(Π, ∇Π, ΔΠ)` at `u`.
    fn at(&self, u: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
        let z: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let p = self.pi.eval(&z)?.re;
        let g = self.grad.iter().map(|q| q.eval(&z).map(|v| v.re)).collect::<Result<Vec<f64>>>()?;
        let l = self.lap.eval(&z)?.re;
        Ok((p, g, l))
    }
}

/// Finite-difference derivatives of a scalar field at one node.
struct Stencil {
    f_t: f64,
    grad: Vec<f64>,
    lap: f64,
}

fn stencil<F>(u: &[f64], t0: f64, s: f64, f: &F) -> Result<Stencil>
where
    F: Fn(&[f64], f64) -> Result<f64>,
{
    let f0 = f(u, t0)?;
    let f_t = (f(u, t0 + s)? - f(u, t0 - s)?) / (2.0 * s);
    let mut grad = Vec::with_capacity(u.len());
    let mut lap = 0.0;
    for k in 0..u.len() {
        let mut up = u.to_vec();
        let mut dn = u.to_vec();
        up[k] += s;
        dn[k] -= s;
        let (fu, fd) = (f(&up, t0)?, f(&dn, t0)?);
        grad.push((fu - fd) / (2.0 * s));
        lap += (fu - 2.0 * f0 + fd) / (s * s);
    }
    Ok(Stencil { f_t, grad, lap })
}

/// Residual of the scaled log-kernel PDE at every grid node, step `s`.
///
/// With `F(h2, t) = N^{−2} log K̃(√N h1, √N h2; t)` the identity is
///
/// ```text
/// 2F_t = Π^{−1}(N^{−3}ΔΠ + (2/N)∇Π·∇F) + (1/N)ΔF + N|∇F|²
/// ```
///
/// and with `S = F + N^{−2} log Π` it becomes
///
/// ```text
/// 2S_t = N|∇S|² − N^{−3}|∇log Π|² + (1/N)ΔF + N^{−3}ΔΠ/Π
/// ```
///
/// where the last two terms are the ones a Hamilton–Jacobi reading drops.
/// Returns `(max |residual|, max |residual of S form|, max |dropped|,
/// max |F residual − S residual|)`.
fn cm_residual_at_step(
    spec: &CompactGroupSpec,
    h1: &CartanPoint,
    grid: &GridSpec,
    t0: f64,
    n: f64,
    s: f64,
    pid: &PiDerivatives,
) -> Result<[f64; 4]> {
    let rs = spec.root_system();
    let sq = n.sqrt();
    let h1s = h1.scaled(Complex64::new(sq, 0.0));
    let field = |u: &[f64], t: f64| -> Result<f64> {
        let us: Vec<f64> = u.iter().map(|x| x * sq).collect();
        Ok(log_averaged_kernel(spec, &h1s, &real_point(rs, &us), t)? / (n * n))
    };
    let per: Vec<Result<[f64; 4]>> = grid
        .nodes()
        .par_iter()
        .map(|u| {
            let st = stencil(u, t0, s, &field)?;
            let (p, gp, lp) = pid.at(u)?;
            let gf_sq: f64 = st.grad.iter().map(|g| g * g).sum();
            let gp_gf: f64 = gp.iter().zip(&st.grad).map(|(a, b)| a * b).sum();
            let rhs = (lp / (n * n * n) + 2.0 / n * gp_gf) / p + st.lap / n + n * gf_sq;
            let res_f = 2.0 * st.f_t - rhs;

            let glog: Vec<f64> = gp.iter().map(|g| g / p).collect();
            let gs: Vec<f64> = st.grad.iter().zip(&glog).map(|(f, l)| f + l / (n * n)).collect();
            let gs_sq: f64 = gs.iter().map(|g| g * g).sum();
            let glog_sq: f64 = glog.iter().map(|g| g * g).sum();
            let dropped = st.lap / n + lp / (p * n * n * n);
            let s_t = st.f_t;
            let res_s = 2.0 * s_t - (n * gs_sq - glog_sq / (n * n * n) + dropped);
            Ok([res_f.abs(), res_s.abs(), dropped.abs(), (res_f - res_s).abs()])
        })
        .collect();
    let mut out = [0.0f64; 4];
    for p in per {
        let p = p?;
        for k in 0..4 {
            out[k] = out[k].max(p[k]);
        }
    }
    Ok(out)
}

/// Finite-difference residual of the scaled log-kernel PDE on the grid
/// (derivatives in `h2`), at each step, with the `S`-substitution bookkeeping.
pub fn cm_pde_residual(
    spec: &CompactGroupSpec,
    h1: &CartanPoint,
    h2_grid: &GridSpec,
    t0: f64,
    n_scaling: usize,
    steps: &[f64],
) -> Result<ResidualReport> {
    let rs = spec.root_system();
    check_steps(steps, t0)?;
    if n_scaling < 1 {
        return Err(Error::Config("scaling parameter N must be ≥ 1".into()));
    }
    rs.check_regular(h1.coords(), "h1")?;
    let reach = steps.iter().copied().fold(0.0, f64::max);
    check_grid(rs, h2_grid, reach)?;
    let pid = PiDerivatives::new(rs);
    let n = n_scaling as f64;
    let mut max_residual = Vec::new();
    let mut s_form = Vec::new();
    let mut dropped = Vec::new();
    let mut bookkeeping = Vec::new();
    for &s in steps {
        let [rf, rs_, d, b] = cm_residual_at_step(spec, h1, h2_grid, t0, n, s, &pid)?;
        max_residual.push(rf);
        s_form.push(rs_);
        dropped.push(d);
        bookkeeping.push(b);
    }
    Ok(ResidualReport {
        op: "cm_pde_residual".into(),
        halving_ratio: ratios(&max_residual),
        max_relative_residual: max_residual.clone(),
        steps: steps.to_vec(),
        max_residual,
        details: serde_json::json!({
            "t0": t0,
            "n_scaling": n_scaling,
            "s_form_max_residual": s_form,
            "dropped_term_max": dropped,
            "substitution_discrepancy": bookkeeping,
        }),
    })
}

/// CSV dump `u1,…,ur,V` of `V(h1, ·; t)` on a grid (orthonormal coordinates).
pub fn grid_dump(spec: &CompactGroupSpec, h1: &CartanPoint, grid: &GridSpec, t: f64) -> Result<String> {
    let rs = spec.root_system();
    let mut out = String::new();
    let header: Vec<String> = (1..=grid.dims()).map(|k| format!("u{k}")).collect();
    out.push_str(&header.join(","));
    out.push_str(",V\n");
    for u in grid.nodes() {
        let v = v_function(spec, h1, &real_point(rs, &u), t)?;
        let cols: Vec<String> = u.iter().map(|x| format!("{x:.17e}")).collect();
        out.push_str(&format!("{},{v:.17e}\n", cols.join(",")));
    }
    Ok(out)
}
