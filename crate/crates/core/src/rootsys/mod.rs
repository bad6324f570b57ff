//! Root systems of types A–D and G2, Weyl groups, the discriminant `Π` and
//! the polynomial bracket `[[·,·]]`.
//!
//! Coordinate conventions:
//! * `A_n` lives in the sum-zero hyperplane of `R^{n+1}`,
//! * `B_n`, `C_n`, `D_n` use the standard coordinates of `R^n`,
//! * `G2` lives in the sum-zero hyperplane of `R^3`, so every root is integral.
//!
//! The invariant form is `scale · I` on the ambient coordinates (`scale = 1` by
//! default). Orthonormal Cartan coordinates come from Gram–Schmidt applied to
//! `e_i - e_{i+1}` (A, G2) or `e_i` (B, C, D) in index order.

pub mod exact;
pub mod poly;
pub mod weyl;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use exact::{format_rational, rat, rat_frac, QMatrix, Rational};
pub use poly::{bracket, bracket_exact, SparsePolynomial};
pub use weyl::{generate_weyl_group, generate_weyl_group_bounded, WeylElement, DEFAULT_WEYL_BOUND};

/// Relative regularity threshold: `|Π(h)| > REGULARITY_TOL · scale^r`.
pub const REGULARITY_TOL: f64 = 1e-8;

/// Sum-zero tolerance for A and G2 points.
pub const SUM_ZERO_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
    C,
    D,
    G2,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::A => "A",
            Family::B => "B",
            Family::C => "C",
            Family::D => "D",
            Family::G2 => "G2",
        };
        f.write_str(s)
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Family::A),
            "b" => Ok(Family::B),
            "c" => Ok(Family::C),
            "d" => Ok(Family::D),
            "g2" | "g" => Ok(Family::G2),
            other => Err(Error::Config(format!("unknown root-system family '{other}'"))),
        }
    }
}

/// Exact root data for one family and rank.
#[derive(Debug, Clone)]
pub struct RootSystem {
    family: Family,
    rank: usize,
    ambient_dim: usize,
    simple_roots: Vec<Vec<Rational>>,
    positive_roots: Vec<Vec<Rational>>,
    form_scale: Rational,
    form_gram: Vec<Vec<Rational>>,
    basis: Vec<Vec<f64>>,
    positive_f64: Vec<Vec<f64>>,
    weyl: OnceLock<std::result::Result<Vec<WeylElement>, Error>>,
    pi_pi: OnceLock<f64>,
}

fn unit(n: usize, i: usize, c: i64) -> Vec<Rational> {
    let mut v = vec![rat(0); n];
    v[i] = rat(c);
    v
}

fn combo(n: usize, terms: &[(usize, i64)]) -> Vec<Rational> {
    let mut v = vec![rat(0); n];
    for &(i, c) in terms {
        v[i] += rat(c);
    }
    v
}

/// Builds the root system of the given family and rank.
pub fn build_root_system(family: Family, rank: usize) -> Result<RootSystem> {
    let ok = match family {
        Family::A => rank >= 1,
        Family::B | Family::C => rank >= 2,
        Family::D => rank >= 3,
        Family::G2 => rank == 2,
    };
    if !ok {
        return Err(Error::Config(format!(
            "unsupported root system {family}_{rank} (need A_n n≥1, B_n/C_n n≥2, D_n n≥3, G2 rank 2)"
        )));
    }
    Ok(RootSystem::construct(family, rank))
}

impl RootSystem {
    pub fn new(family: Family, rank: usize) -> Result<Self> {
        build_root_system(family, rank)
    }

    /// Builds rank-one `B_1`/`C_1` as well; used for SO(3) and USp(2).
    pub(crate) fn construct(family: Family, rank: usize) -> Self {
        let n = rank;
        let (ambient_dim, simple, positive) = match family {
            Family::A => {
                let d = n + 1;
                let simple = (0..n).map(|i| combo(d, &[(i, 1), (i + 1, -1)])).collect();
                let mut pos = Vec::new();
                for i in 0..d {
                    for j in i + 1..d {
                        pos.push(combo(d, &[(i, 1), (j, -1)]));
                    }
                }
                (d, simple, pos)
            }
            Family::B | Family::C | Family::D => {
                let mut simple: Vec<Vec<Rational>> = (0..n - 1).map(|i| combo(n, &[(i, 1), (i + 1, -1)])).collect();
                match family {
                    Family::B => simple.push(unit(n, n - 1, 1)),
                    Family::C => simple.push(unit(n, n - 1, 2)),
                    _ => simple.push(combo(n, &[(n - 2, 1), (n - 1, 1)])),
                }
                let mut pos = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        pos.push(combo(n, &[(i, 1), (j, -1)]));
                        pos.push(combo(n, &[(i, 1), (j, 1)]));
                    }
                }
                match family {
                    Family::B => pos.extend((0..n).map(|i| unit(n, i, 1))),
                    Family::C => pos.extend((0..n).map(|i| unit(n, i, 2))),
                    _ => {}
                }
                (n, simple, pos)
            }
            Family::G2 => {
                let short = combo(3, &[(0, 1), (1, -1)]);
                let long = combo(3, &[(0, -2), (1, 1), (2, 1)]);
                let pos = vec![
                    short.clone(),
                    long.clone(),
                    combo(3, &[(0, -1), (2, 1)]),
                    combo(3, &[(1, -1), (2, 1)]),
                    combo(3, &[(0, 1), (1, -2), (2, 1)]),
                    combo(3, &[(0, -1), (1, -1), (2, 2)]),
                ];
                (3, vec![short, long], pos)
            }
        };
        let mut rs = RootSystem {
            family,
            rank,
            ambient_dim,
            simple_roots: simple,
            positive_roots: positive,
            form_scale: rat(1),
            form_gram: Vec::new(),
            basis: Vec::new(),
            positive_f64: Vec::new(),
            weyl: OnceLock::new(),
            pi_pi: OnceLock::new(),
        };
        rs.positive_f64 = rs.positive_roots.iter().map(|a| a.iter().map(exact::to_f64).collect()).collect();
        rs.set_form_scale(rat(1));
        rs
    }

    fn set_form_scale(&mut self, scale: Rational) {
        let d = self.ambient_dim;
        self.form_gram =
            (0..d).map(|i| (0..d).map(|j| if i == j { scale.clone() } else { rat(0) }).collect()).collect();
        let s = exact::to_f64(&scale);
        let seeds: Vec<Vec<f64>> = match self.family {
            Family::A | Family::G2 => (0..self.rank)
                .map(|i| {
                    let mut v = vec![0.0; d];
                    v[i] = 1.0;
                    v[i + 1] = -1.0;
                    v
                })
                .collect(),
            _ => (0..self.rank)
                .map(|i| {
                    let mut v = vec![0.0; d];
                    v[i] = 1.0;
                    v
                })
                .collect(),
        };
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(self.rank);
        for seed in seeds {
            let mut v = seed;
            for b in &basis {
                let proj = s * b.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
            let norm = (s * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
        self.basis = basis;
        self.form_scale = scale;
        self.pi_pi = OnceLock::new();
    }

    /// Same roots with the invariant form replaced by `c · form`.
    pub fn with_form_scale(&self, c: &Rational) -> Result<Self> {
        if !c.is_positive() {
            return Err(Error::Config("form scale must be positive".into()));
        }
        let mut rs = self.clone();
        let scale = &self.form_scale * c;
        rs.set_form_scale(scale);
        Ok(rs)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn simple_roots(&self) -> &[Vec<Rational>] {
        &self.simple_roots
    }

    pub fn positive_roots(&self) -> &[Vec<Rational>] {
        &self.positive_roots
    }

    pub fn positive_roots_f64(&self) -> &[Vec<f64>] {
        &self.positive_f64
    }

    /// Number `r` of positive roots.
    pub fn num_positive_roots(&self) -> usize {
        self.positive_roots.len()
    }

    pub fn form_gram(&self) -> &[Vec<Rational>] {
        &self.form_gram
    }

    pub fn form_scale(&self) -> &Rational {
        &self.form_scale
    }

    pub fn form_scale_f64(&self) -> f64 {
        exact::to_f64(&self.form_scale)
    }

    /// Orthonormal basis of the Cartan subspace, as ambient vectors.
    pub fn orthonormal_basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Dimension of the compact Lie algebra: `rank + 2r`.
    pub fn algebra_dim(&self) -> usize {
        self.rank + 2 * self.num_positive_roots()
    }

    /// Weyl group order from the closed-form family formula.
    pub fn weyl_order_formula(&self) -> u128 {
        let n = self.rank as u128;
        let fact = |k: u128| (1..=k).product::<u128>();
        match self.family {
            Family::A => fact(n + 1),
            Family::B | Family::C => (1u128 << n) * fact(n),
            Family::D => (1u128 << (n - 1)) * fact(n),
            Family::G2 => 12,
        }
    }

    /// The Weyl group, generated on first use (bound `DEFAULT_WEYL_BOUND`).
    pub fn weyl_group(&self) -> Result<&[WeylElement]> {
        self.weyl.get_or_init(|| generate_weyl_group(self)).as_ref().map(|v| v.as_slice()).map_err(Clone::clone)
    }

    /// Complex-bilinear invariant form on ambient coordinates.
    pub fn pairing(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        let s: Complex64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        s * self.form_scale_f64()
    }

    pub fn pairing_f64(&self, x: &[f64], y: &[f64]) -> f64 {
        self.form_scale_f64() * x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Values `α(h)` of every positive root.
    pub fn root_values(&self, h: &[Complex64]) -> Vec<Complex64> {
        self.positive_f64.iter().map(|a| a.iter().zip(h).map(|(x, y)| y * *x).sum()).collect()
    }

    /// `Π(h) = ∏ α(h)` evaluated as a product of root values.
    pub fn discriminant_value(&self, h: &[Complex64]) -> Complex64 {
        self.root_values(h).into_iter().product()
    }

    pub fn discriminant_value_f64(&self, h: &[f64]) -> f64 {
        self.positive_f64.iter().map(|a| a.iter().zip(h).map(|(x, y)| x * y).sum::<f64>()).product()
    }

    /// `Π(h)` in exact arithmetic.
    pub fn discriminant_value_exact(&self, h: &[Rational]) -> Rational {
        self.positive_roots.iter().fold(rat(1), |acc, a| acc * exact::dot(a, h))
    }

    /// Checks length and, for A/G2, the sum-zero constraint.
    pub fn validate_point(&self, h: &[Complex64], what: &str) -> Result<()> {
        if h.len() != self.ambient_dim {
            return Err(Error::Argument(format!(
                "{what} has {} coordinates; {}_{} expects {}",
                h.len(),
                self.family,
                self.rank,
                self.ambient_dim
            )));
        }
        if matches!(self.family, Family::A | Family::G2) {
            let sum: Complex64 = h.iter().sum();
            let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
            if sum.norm() > SUM_ZERO_TOL * scale {
                return Err(Error::Argument(format!("{what} must lie in the sum-zero subspace (sum = {sum})")));
            }
        }
        Ok(())
    }

    /// Fails with a degenerate-input error naming the vanishing root when
    /// `|Π(h)| ≤ REGULARITY_TOL · max|h_i|^r`.
    pub fn check_regular(&self, h: &[Complex64], what: &str) -> Result<Complex64> {
        self.validate_point(h, what)?;
        let vals = self.root_values(h);
        let pi: Complex64 = vals.iter().product();
        let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tol = REGULARITY_TOL * scale.powi(self.num_positive_roots() as i32);
        if scale == 0.0 || !(pi.norm() > tol) {
            let (idx, v) = vals
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .map(|(i, v)| (i, v.norm()))
                .unwrap_or((0, 0.0));
            return Err(Error::Degenerate { what: what.to_string(), root: self.root_label(idx), value: v });
        }
        Ok(pi)
    }

    /// Ambient → orthonormal Cartan coordinates.
    pub fn to_orthonormal(&self, h: &[Complex64]) -> Vec<Complex64> {
        let s = self.form_scale_f64();
        self.basis.iter().map(|b| b.iter().zip(h).map(|(x, y)| y * (*x * s)).sum()).collect()
    }

    /// Orthonormal Cartan → ambient coordinates.
    pub fn from_orthonormal(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut h = vec![Complex64::zero(); self.ambient_dim];
        for (b, uk) in self.basis.iter().zip(u) {
            for (hi, bi) in h.iter_mut().zip(b) {
                *hi += uk * *bi;
            }
        }
        h
    }

    pub fn from_orthonormal_f64(&self, u: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.ambient_dim];
        for (b, uk) in self.basis.iter().zip(u) {
            for (hi, bi) in h.iter_mut().zip(b) {
                *hi += uk * bi;
            }
        }
        h
    }

    pub fn to_orthonormal_f64(&self, h: &[f64]) -> Vec<f64> {
        let s = self.form_scale_f64();
        self.basis.iter().map(|b| s * b.iter().zip(h).map(|(x, y)| x * y).sum::<f64>()).collect()
    }

    /// Removes the component along `(1,…,1)` for A/G2; returns the removed mean.
    pub fn project_to_cartan(&self, h: &mut [f64]) -> f64 {
        if matches!(self.family, Family::A | Family::G2) && !h.is_empty() {
            let mean = h.iter().sum::<f64>() / h.len() as f64;
            h.iter_mut().for_each(|x| *x -= mean);
            mean
        } else {
            0.0
        }
    }

    /// Half-sum of the positive roots.
    pub fn weyl_vector(&self) -> Vec<Rational> {
        let mut rho = vec![rat(0); self.ambient_dim];
        for a in &self.positive_roots {
            for (r, x) in rho.iter_mut().zip(a) {
                *r += x;
            }
        }
        rho.into_iter().map(|x| x / rat(2)).collect()
    }

    /// `α^∨ = 2α/(α·α)` for each simple root.
    pub fn simple_coroots(&self) -> Vec<Vec<Rational>> {
        self.simple_roots
            .iter()
            .map(|a| {
                let n = exact::dot(a, a);
                a.iter().map(|x| rat(2) * x / &n).collect()
            })
            .collect()
    }

    /// Cartan matrix `A_ij = ⟨α_i, α_j^∨⟩`.
    pub fn cartan_matrix(&self) -> Vec<Vec<Rational>> {
        let co = self.simple_coroots();
        self.simple_roots.iter().map(|a| co.iter().map(|c| exact::dot(a, c)).collect()).collect()
    }

    /// Fundamental weights `ω_i`, dual to the simple coroots and lying in the
    /// span of the roots.
    pub fn fundamental_weights(&self) -> Result<Vec<Vec<Rational>>> {
        // ω_i = Σ_k M_ik α_k with M A = I, i.e. Aᵀ M_iᵀ = e_i.
        let a = self.cartan_matrix();
        let n = self.rank;
        let at: Vec<Vec<Rational>> = (0..n).map(|i| (0..n).map(|j| a[j][i].clone()).collect()).collect();
        (0..n)
            .map(|i| {
                let rhs: Vec<Rational> = (0..n).map(|j| if i == j { rat(1) } else { rat(0) }).collect();
                let m = exact::solve(&at, &rhs)?;
                let mut w = vec![rat(0); self.ambient_dim];
                for (mk, alpha) in m.iter().zip(&self.simple_roots) {
                    for (wi, ai) in w.iter_mut().zip(alpha) {
                        *wi += mk * ai;
                    }
                }
                Ok(w)
            })
            .collect()
    }

    /// Coefficients of `v` in the simple-root basis (exact).
    pub fn simple_root_coefficients(&self, v: &[Rational]) -> Result<Vec<Rational>> {
        // Normal equations on the Gram matrix of the simple roots.
        let gram: Vec<Vec<Rational>> =
            self.simple_roots.iter().map(|a| self.simple_roots.iter().map(|b| exact::dot(a, b)).collect()).collect();
        let rhs: Vec<Rational> = self.simple_roots.iter().map(|a| exact::dot(a, v)).collect();
        exact::solve(&gram, &rhs)
    }

    /// Human-readable label for positive root `idx`, e.g. `e1-e2` or `-2e1+e2+e3`.
    pub fn root_label(&self, idx: usize) -> String {
        let Some(a) = self.positive_roots.get(idx) else {
            return "?".into();
        };
        let mut s = String::new();
        for (i, c) in a.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if c.is_negative() {
                s.push('-');
            } else if !s.is_empty() {
                s.push('+');
            }
            if !mag.is_one() {
                s.push_str(&format_rational(&mag));
            }
            s.push_str(&format!("e{}", i + 1));
        }
        s
    }

    /// Serializable root data.
    pub fn root_data(&self) -> Result<RootData> {
        let to_ints =
            |v: &Vec<Rational>| -> Vec<i64> { v.iter().map(|x| x.to_integer().to_i64().unwrap_or(0)).collect() };
        Ok(RootData {
            family: self.family,
            rank: self.rank,
            simple_roots: self.simple_roots.iter().map(to_ints).collect(),
            positive_roots: self.positive_roots.iter().map(to_ints).collect(),
            weyl_order: self.weyl_group()?.len(),
        })
    }
}

/// JSON export of a root system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootData {
    pub family: Family,
    pub rank: usize,
    pub simple_roots: Vec<Vec<i64>>,
    pub positive_roots: Vec<Vec<i64>>,
    pub weyl_order: usize,
}

/// `Π` in orthonormal Cartan coordinates, homogeneous of degree `r`.
pub fn discriminant(rs: &RootSystem) -> SparsePolynomial<Complex64> {
    let forms: Vec<Vec<Complex64>> = rs
        .positive_roots_f64()
        .iter()
        .map(|a| {
            // α(B u) = Σ_k (α · b_k) u_k
            rs.orthonormal_basis()
                .iter()
                .map(|b| Complex64::new(a.iter().zip(b).map(|(x, y)| x * y).sum(), 0.0))
                .collect()
        })
        .collect();
    let mut p = SparsePolynomial::product_of_linear_forms(rs.rank(), &forms);
    let cmax = p.terms().map(|(_, c)| c.norm()).fold(0.0, f64::max);
    p.retain(|c| c.norm() > 1e-13 * cmax);
    p
}

/// `Π` in ambient coordinates with exact rational coefficients.
pub fn discriminant_ambient(rs: &RootSystem) -> SparsePolynomial<Rational> {
    SparsePolynomial::product_of_linear_forms(rs.ambient_dim(), rs.positive_roots())
}

/// Evaluates a polynomial over orthonormal coordinates.
pub fn eval_poly(p: &SparsePolynomial<Complex64>, h: &[Complex64]) -> Result<Complex64> {
    p.eval(h)
}

/// `[[Π, Π]]`, computed by brute-force bracket in orthonormal coordinates.
pub fn pi_pi_norm(rs: &RootSystem) -> f64 {
    *rs.pi_pi.get_or_init(|| {
        let p = discriminant(rs);
        bracket(&p, &p).map(|z| z.re).unwrap_or(f64::NAN)
    })
}

/// `[[Π, Π]]` in exact arithmetic on the ambient coordinates.
///
/// Valid because every root is orthogonal to the directions dropped by the
/// sum-zero projection, so `Π` does not depend on them.
pub fn pi_pi_norm_exact(rs: &RootSystem) -> Rational {
    let p = discriminant_ambient(rs);
    bracket_exact(&p, &p, rs.form_scale()).unwrap_or_else(|_| rat(0))
}

/// The normalization constant `[[Π,Π]] / |W|`.
pub fn normalization_constant(rs: &RootSystem) -> Result<f64> {
    Ok(pi_pi_norm(rs) / rs.weyl_group()?.len() as f64)
}
