//! Critical points of `g ↦ ⟨Ad_g h1, h2⟩`, the Hessian determinant at each
//! of them, and the leading stationary-phase term of the orbital integral.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::closedform::CartanPoint;
use crate::error::{Error, Result};
use crate::groups::{
    algebra_basis, embed_cartan, haar_sample, pairing, rng_stream, CMatrix, CompactGroupSpec, GroupElement,
};
use crate::numeric::alternating_exp_sum;
use crate::rootsys::{normalization_constant, RootSystem};

/// Critical values closer than this are merged.
pub const CLUSTER_TOL: f64 = 1e-6;

/// Gradient norm below which a start counts as converged.
pub const GRADIENT_TOL: f64 = 1e-10;

/// Default finite-difference step of the Hessian check.
pub const HESSIAN_STEP: f64 = 1e-4;

/// Hessians with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e10;

const MAX_ITERATIONS: usize = 200;
const MAX_BACKTRACKS: usize = 40;

#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub group_element: GroupElement,
    pub value: f64,
    /// Index into the root system's Weyl group list.
    pub matched_weyl: Option<usize>,
    pub weyl_sign: Option<i8>,
    pub residual_gradient_norm: f64,
    /// Number of starts that converged into this cluster.
    pub hits: usize,
}

#[derive(Debug, Clone)]
pub struct CriticalSearch {
    pub points: Vec<CriticalPoint>,
    pub starts: usize,
    pub unconverged: usize,
    /// Clusters whose value matches no closed-form critical value.
    pub spurious: usize,
    /// Fewer distinct clusters than `|W|`.
    pub incomplete_cover: bool,
}

fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

fn real_inputs(h1: &CartanPoint, h2: &CartanPoint) -> Result<()> {
    if h1.is_real() && h2.is_real() {
        Ok(())
    } else {
        Err(Error::Argument("saddle analysis needs real Cartan points".into()))
    }
}

/// `Σ x_k B_k`.
fn combine(basis: &[CMatrix], x: &[f64]) -> CMatrix {
    let n = basis[0].nrows();
    let mut m = CMatrix::zeros(n, n);
    for (b, &xk) in basis.iter().zip(x) {
        m += b * Complex64::new(xk, 0.0);
    }
    m
}

struct Newton<'a> {
    spec: &'a CompactGroupSpec,
    basis: Vec<CMatrix>,
    h1: CMatrix,
    h2: CMatrix,
}

impl Newton<'_> {
    /// Coordinates of the Riemannian gradient `[X, H2]`.
    fn gradient(&self, x: &CMatrix) -> DVector<f64> {
        let g = commutator(x, &self.h2);
        DVector::from_iterator(
            self.basis.len(),
            self.basis.iter().map(|b| pairing(self.spec, b, &g).map(|z| z.re).unwrap_or(f64::NAN)),
        )
    }

    /// Derivative of the gradient along `Ad_{exp ξ}` at `ξ = 0`.
    fn jacobian(&self, x: &CMatrix) -> DMatrix<f64> {
        let d = self.basis.len();
        let mut j = DMatrix::zeros(d, d);
        for (l, bl) in self.basis.iter().enumerate() {
            let col = commutator(&commutator(bl, x), &self.h2);
            for (k, bk) in self.basis.iter().enumerate() {
                j[(k, l)] = pairing(self.spec, bk, &col).map(|z| z.re).unwrap_or(f64::NAN);
            }
        }
        j
    }

    /// Levenberg–Marquardt on `‖[Ad_g H1, H2]‖` with retraction `g ↦ exp(ξ) g`.
    fn run(&self, start: GroupElement) -> Option<(CMatrix, f64)> {
        let mut g = start.to_complex();
        let mut x = &g * &self.h1 * g.adjoint();
        let mut r = self.gradient(&x);
        let mut mu = 1e-3;
        for _ in 0..MAX_ITERATIONS {
            let norm = r.norm();
            if norm < GRADIENT_TOL {
                return Some((g, norm));
            }
            let jac = self.jacobian(&x);
            let jt = jac.transpose();
            let jtj = &jt * &jac;
            let rhs = -(&jt * &r);
            let mut accepted = false;
            for _ in 0..MAX_BACKTRACKS {
                let mut a = jtj.clone();
                for i in 0..a.nrows() {
                    a[(i, i)] += mu;
                }
                let Some(step) = a.lu().solve(&rhs) else {
                    mu *= 4.0;
                    continue;
                };
                let u = combine(&self.basis, step.as_slice()).exp();
                let g_new = &u * &g;
                let x_new = &g_new * &self.h1 * g_new.adjoint();
                let r_new = self.gradient(&x_new);
                if r_new.norm() < norm {
                    g = g_new;
                    x = x_new;
                    r = r_new;
                    mu = (mu / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
                mu *= 4.0;
            }
            if !accepted {
                break;
            }
        }
        let norm = r.norm();
        (norm < GRADIENT_TOL).then_some((g, norm))
    }
}

fn as_element(spec: &CompactGroupSpec, g: CMatrix) -> GroupElement {
    match spec.family() {
        crate::groups::GroupFamily::SO => GroupElement::Real(g.map(|z| z.re)),
        _ => GroupElement::Complex(g),
    }
}

/// The closed-form critical values `⟨w h1, h2⟩`, one per Weyl element.
pub fn closed_form_critical_values(rs: &RootSystem, h1: &CartanPoint, h2: &CartanPoint) -> Result<Vec<f64>> {
    Ok(rs.weyl_group()?.iter().map(|w| rs.pairing(&w.apply(h1.coords()), h2.coords()).re).collect())
}

/// Minimum starts accepted by [`find_critical_points`]: `20·|W|`.
pub fn min_starts(rs: &RootSystem) -> Result<usize> {
    Ok(20 * rs.weyl_group()?.len())
}

/// Finds critical points of `g ↦ ⟨Ad_g h1, h2⟩` from Haar-random starts and
/// clusters them by value.
pub fn find_critical_points(
    spec: &CompactGroupSpec,
    h1: &CartanPoint,
    h2: &CartanPoint,
    n_starts: usize,
    seed: u64,
) -> Result<CriticalSearch> {
    let rs = spec.root_system();
    real_inputs(h1, h2)?;
    rs.check_regular(h1.coords(), "h1")?;
    rs.check_regular(h2.coords(), "h2")?;
    let need = min_starts(rs)?;
    if n_starts < need {
        return Err(Error::Argument(format!("need at least {need} starts (20·|W|), got {n_starts}")));
    }
    let ab = algebra_basis(spec)?;
    let newton = Newton {
        spec,
        basis: ab.cartan.into_iter().chain(ab.complement).collect(),
        h1: embed_cartan(spec, h1)?,
        h2: embed_cartan(spec, h2)?,
    };
    let runs: Vec<Option<(CMatrix, f64)>> = (0..n_starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_stream(seed, i as u64);
            newton.run(haar_sample(spec, &mut rng))
        })
        .collect();
    let unconverged = runs.iter().filter(|r| r.is_none()).count();

    let targets = closed_form_critical_values(rs, h1, h2)?;
    let weyl = rs.weyl_group()?;
    let mut points: Vec<CriticalPoint> = Vec::new();
    for (g, norm) in runs.into_iter().flatten() {
        let x = &g * &newton.h1 * g.adjoint();
        let value = pairing(spec, &x, &newton.h2)?.re;
        if let Some(p) = points.iter_mut().find(|p| (p.value - value).abs() < CLUSTER_TOL) {
            p.hits += 1;
            continue;
        }
        let matched = targets
            .iter()
            .enumerate()
            .map(|(i, v)| (i, (v - value).abs()))
            .filter(|(_, d)| *d < CLUSTER_TOL)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i);
        points.push(CriticalPoint {
            group_element: as_element(spec, g),
            value,
            matched_weyl: matched,
            weyl_sign: matched.map(|i| weyl[i].sign()),
            residual_gradient_norm: norm,
            hits: 1,
        });
    }
    points.sort_by(|a, b| b.value.total_cmp(&a.value));
    let spurious = points.iter().filter(|p| p.matched_weyl.is_none()).count();
    Ok(CriticalSearch { incomplete_cover: points.len() < weyl.len(), points, starts: n_starts, unconverged, spurious })
}

#[derive(Debug, Clone, Serialize)]
pub struct HessianCheck {
    pub sqrt_det: f64,
    pub predicted: f64,
    pub rel_error: f64,
    /// Error after Richardson extrapolation from steps `h` and `h/2`.
    pub richardson_rel_error: f64,
    pub condition: f64,
    /// Largest relative mismatch inside the doubled eigenvalue pairs of `−H`.
    pub pair_mismatch: f64,
    pub step: f64,
}

/// Signed `√det(−H)` with eigenvalues of `−H` taken in doubled pairs.
fn paired_sqrt_det(neg_h: DMatrix<f64>) -> Result<(f64, f64, f64)> {
    let eig = SymmetricEigen::new(neg_h);
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let amax = ev.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let amin = ev.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    let condition = amax / amin;
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Numerical(format!("Hessian condition number {condition:e}")));
    }
    if !ev.len().is_multiple_of(2) {
        return Err(Error::Numerical("odd number of transverse directions".into()));
    }
    let mut prod = 1.0;
    let mut mismatch: f64 = 0.0;
    for pair in ev.chunks(2) {
        let m = 0.5 * (pair[0] + pair[1]);
        mismatch = mismatch.max((pair[0] - pair[1]).abs() / m.abs());
        prod *= m;
    }
    Ok((prod, condition, mismatch))
}

/// Checks `√det(−H) = ε(w) Π(h1) Π(h2)` at a matched critical point, with
/// `H` the central-difference Hessian in orthonormal transverse coordinates.
pub fn hessian_determinant_check(
    spec: &CompactGroupSpec,
    cp: &CriticalPoint,
    h1: &CartanPoint,
    h2: &CartanPoint,
    step: f64,
) -> Result<HessianCheck> {
    let rs = spec.root_system();
    real_inputs(h1, h2)?;
    let Some(w) = cp.matched_weyl else {
        return Err(Error::Argument("critical point is not matched to a Weyl element".into()));
    };
    if !(step > 0.0) {
        return Err(Error::Argument(format!("finite-difference step must be positive, got {step}")));
    }
    let sign = f64::from(rs.weyl_group()?[w].sign());
    let predicted = sign * (rs.discriminant_value(h1.coords()) * rs.discriminant_value(h2.coords())).re;

    let g = cp.group_element.clone();
    let x = g.adjoint_action(&embed_cartan(spec, h1)?);
    let m2 = embed_cartan(spec, h2)?;
    let transverse: Vec<CMatrix> = algebra_basis(spec)?.complement.iter().map(|b| g.adjoint_action(b)).collect();
    let phi = |v: &[f64]| -> f64 {
        let u = combine(&transverse, v).exp();
        let y = &u * &x * u.adjoint();
        pairing(spec, &y, &m2).map(|z| z.re).unwrap_or(f64::NAN)
    };
    let hessian = |h: f64| -> DMatrix<f64> {
        let d = transverse.len();
        let f0 = phi(&vec![0.0; d]);
        let mut m = DMatrix::zeros(d, d);
        let at = |pairs: &[(usize, f64)]| {
            let mut v = vec![0.0; d];
            for &(i, s) in pairs {
                v[i] += s;
            }
            phi(&v)
        };
        for i in 0..d {
            m[(i, i)] = (at(&[(i, h)]) - 2.0 * f0 + at(&[(i, -h)])) / (h * h);
            for j in 0..i {
                let v = (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)])
                    + at(&[(i, -h), (j, -h)]))
                    / (4.0 * h * h);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        -m
    };
    let (sqrt_det, condition, pair_mismatch) = paired_sqrt_det(hessian(step))?;
    let (half, _, _) = paired_sqrt_det(hessian(step / 2.0))?;
    let extrapolated = (4.0 * half - sqrt_det) / 3.0;
    let rel = |v: f64| (v - predicted).abs() / predicted.abs();
    Ok(HessianCheck {
        sqrt_det,
        predicted,
        rel_error: rel(sqrt_det),
        richardson_rel_error: rel(extrapolated),
        condition,
        pair_mismatch,
        step,
    })
}

/// Leading stationary-phase term of `∫_G e^{(1/t)⟨Ad_g h1, h2⟩} dg`,
/// assembled from the constant, the Gaussian factors `(2πt)^{1/2}` per
/// transverse direction and the Hessian determinants `ε(w)Π(h1)Π(h2)`.
pub fn stationary_phase_estimate(rs: &RootSystem, h1: &CartanPoint, h2: &CartanPoint, t: f64) -> Result<Complex64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Argument(format!("t must be positive and finite, got {t}")));
    }
    let p1 = rs.check_regular(h1.coords(), "h1")?;
    let p2 = rs.check_regular(h2.coords(), "h2")?;
    let half_transverse = ((rs.algebra_dim() - rs.rank()) / 2) as i32;
    let two_pi = 2.0 * std::f64::consts::PI;
    // Normalization of the orbit volume form, folded into the constant.
    let c = normalization_constant(rs)? * two_pi.powi(-half_transverse);
    let gaussian = (two_pi * t).powi(half_transverse);
    let terms: Vec<(f64, Complex64)> =
        rs.weyl_group()?.iter().map(|w| (w.sign_f64(), rs.pairing(&w.apply(h1.coords()), h2.coords()) / t)).collect();
    let s = alternating_exp_sum(&terms, rs.num_positive_roots() as u32);
    Ok(s.mantissa * (c * gaussian) / (p1 * p2) * s.max_exp.exp())
}

/// JSON report of a saddle run.
#[derive(Debug, Clone, Serialize)]
pub struct SaddleReport {
    pub critical_values: Vec<f64>,
    pub closed_form_values: Vec<f64>,
    pub matched_weyl_signs: Vec<Option<i8>>,
    pub hessian_rel_errors: Vec<Option<f64>>,
    pub hessian_richardson_rel_errors: Vec<Option<f64>>,
    pub residual_gradient_norms: Vec<f64>,
    pub starts: usize,
    pub unconverged: usize,
    pub spurious: usize,
    pub incomplete_cover: bool,
}

impl SaddleReport {
    pub fn new(search: &CriticalSearch, closed_form_values: Vec<f64>, checks: &[Option<HessianCheck>]) -> Self {
        let mut cf = closed_form_values;
        cf.sort_by(|a, b| b.total_cmp(a));
        SaddleReport {
            critical_values: search.points.iter().map(|p| p.value).collect(),
            closed_form_values: cf,
            matched_weyl_signs: search.points.iter().map(|p| p.weyl_sign).collect(),
            hessian_rel_errors: checks.iter().map(|c| c.as_ref().map(|c| c.rel_error)).collect(),
            hessian_richardson_rel_errors: checks.iter().map(|c| c.as_ref().map(|c| c.richardson_rel_error)).collect(),
            residual_gradient_norms: search.points.iter().map(|p| p.residual_gradient_norm).collect(),
            starts: search.starts,
            unconverged: search.unconverged,
            spurious: search.spurious,
            incomplete_cover: search.incomplete_cover,
        }
    }
}

#[cfg(test)]
mod tests;
