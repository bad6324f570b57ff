//! Sparse multivariate polynomials and the differential-operator bracket.

use std::collections::BTreeMap;
use std::ops::{Mul, Neg};

use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rootsys::exact::{rat, Rational};

/// Integer multiplicities as coefficients (needed by differentiation).
pub trait FromCount {
    fn from_count(n: u32) -> Self;
}

impl FromCount for f64 {
    fn from_count(n: u32) -> Self {
        f64::from(n)
    }
}

impl FromCount for Complex64 {
    fn from_count(n: u32) -> Self {
        Complex64::new(f64::from(n), 0.0)
    }
}

impl FromCount for i64 {
    fn from_count(n: u32) -> Self {
        i64::from(n)
    }
}

impl FromCount for i128 {
    fn from_count(n: u32) -> Self {
        i128::from(n)
    }
}

impl FromCount for Rational {
    fn from_count(n: u32) -> Self {
        rat(i64::from(n))
    }
}

/// Exponent vector over the coordinate variables.
pub type MultiIndex = Vec<u32>;

/// `Σ c_β z^β` stored by multi-index. Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsePolynomial<T> {
    nvars: usize,
    coeffs: BTreeMap<MultiIndex, T>,
}

impl<T> SparsePolynomial<T>
where
    T: Clone + Zero + One + PartialEq,
{
    pub fn zero(nvars: usize) -> Self {
        SparsePolynomial { nvars, coeffs: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: T) -> Self {
        let mut p = Self::zero(nvars);
        p.insert(vec![0; nvars], c);
        p
    }

    /// The linear form `Σ a_i z_i`.
    pub fn linear(a: &[T]) -> Self {
        let n = a.len();
        let mut p = Self::zero(n);
        for (i, c) in a.iter().enumerate() {
            let mut beta = vec![0; n];
            beta[i] = 1;
            p.insert(beta, c.clone());
        }
        p
    }

    /// Builds from `(multi-index, coefficient)` pairs, summing repeats.
    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (MultiIndex, T)>) -> Result<Self> {
        let mut p = Self::zero(nvars);
        for (beta, c) in terms {
            if beta.len() != nvars {
                return Err(Error::Argument(format!(
                    "multi-index of length {} in a polynomial over {} variables",
                    beta.len(),
                    nvars
                )));
            }
            p.add_term(beta, c);
        }
        Ok(p)
    }

    fn insert(&mut self, beta: MultiIndex, c: T) {
        if !c.is_zero() {
            self.coeffs.insert(beta, c);
        }
    }

    fn add_term(&mut self, beta: MultiIndex, c: T) {
        let sum = match self.coeffs.remove(&beta) {
            Some(old) => old + c,
            None => c,
        };
        self.insert(beta, sum);
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &T)> {
        self.coeffs.iter()
    }

    pub fn coeff(&self, beta: &[u32]) -> Option<&T> {
        self.coeffs.get(beta)
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.coeffs.keys().map(|b| b.iter().sum()).max()
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.coeffs.keys().map(|b| b.iter().sum::<u32>());
        match degs.next() {
            None => true,
            Some(d) => degs.all(|e| e == d),
        }
    }

    pub fn map<U, F>(&self, f: F) -> SparsePolynomial<U>
    where
        U: Clone + Zero + One + PartialEq,
        F: Fn(&T) -> U,
    {
        let mut out = SparsePolynomial::zero(self.nvars);
        for (b, c) in &self.coeffs {
            out.insert(b.clone(), f(c));
        }
        out
    }

    /// Drops coefficients for which `keep` is false.
    pub fn retain(&mut self, keep: impl Fn(&T) -> bool) {
        self.coeffs.retain(|_, c| keep(c));
    }

    /// `Σ c_β h^β`.
    pub fn eval(&self, h: &[T]) -> Result<T>
    where
        T: Mul<Output = T>,
    {
        if h.len() != self.nvars {
            return Err(Error::Argument(format!(
                "point has {} coordinates, polynomial has {} variables",
                h.len(),
                self.nvars
            )));
        }
        let maxdeg = self.coeffs.keys().flat_map(|b| b.iter().copied()).max().unwrap_or(0) as usize;
        // powers[i][k] = h_i^k
        let powers: Vec<Vec<T>> = h
            .iter()
            .map(|x| {
                let mut v = Vec::with_capacity(maxdeg + 1);
                v.push(T::one());
                for k in 1..=maxdeg {
                    let next = v[k - 1].clone() * x.clone();
                    v.push(next);
                }
                v
            })
            .collect();
        let mut acc = T::zero();
        for (beta, c) in &self.coeffs {
            let mut term = c.clone();
            for (i, &e) in beta.iter().enumerate() {
                if e > 0 {
                    term = term * powers[i][e as usize].clone();
                }
            }
            acc = acc + term;
        }
        Ok(acc)
    }

    pub fn mul_poly(&self, other: &Self) -> Self
    where
        T: Mul<Output = T>,
    {
        assert_eq!(self.nvars, other.nvars, "variable count mismatch");
        let mut out = Self::zero(self.nvars);
        for (a, ca) in &self.coeffs {
            for (b, cb) in &other.coeffs {
                let beta: MultiIndex = a.iter().zip(b).map(|(x, y)| x + y).collect();
                out.add_term(beta, ca.clone() * cb.clone());
            }
        }
        out
    }

    pub fn add_poly(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars, "variable count mismatch");
        let mut out = self.clone();
        for (b, c) in &other.coeffs {
            out.add_term(b.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, s: &T) -> Self
    where
        T: Mul<Output = T>,
    {
        self.map(|c| c.clone() * s.clone())
    }

    /// Product of a list of linear forms, each given by its coefficient vector.
    pub fn product_of_linear_forms(nvars: usize, forms: &[Vec<T>]) -> Self
    where
        T: Mul<Output = T>,
    {
        forms.iter().fold(Self::constant(nvars, T::one()), |acc, f| acc.mul_poly(&Self::linear(f)))
    }

    /// `∂p/∂z_var`.
    pub fn derivative(&self, var: usize) -> Self
    where
        T: Mul<Output = T> + FromCount,
    {
        let mut out = Self::zero(self.nvars);
        for (b, c) in &self.coeffs {
            if b[var] == 0 {
                continue;
            }
            let mut nb = b.clone();
            nb[var] -= 1;
            out.add_term(nb, c.clone() * T::from_count(b[var]));
        }
        out
    }

    /// `Σ_i ∂²p/∂z_i²`.
    pub fn laplacian(&self) -> Self
    where
        T: Mul<Output = T> + FromCount,
    {
        (0..self.nvars).fold(Self::zero(self.nvars), |acc, i| acc.add_poly(&self.derivative(i).derivative(i)))
    }

    /// Applies the constant-coefficient operator `self(∂)` to `q`.
    pub fn apply_as_operator(&self, q: &Self) -> Self
    where
        T: Mul<Output = T> + FromCount,
    {
        let mut out = Self::zero(self.nvars);
        for (beta, c) in &self.coeffs {
            let mut d = q.clone();
            for (var, &e) in beta.iter().enumerate() {
                for _ in 0..e {
                    d = d.derivative(var);
                }
            }
            out = out.add_poly(&d.scale(c));
        }
        out
    }

    pub fn constant_term(&self) -> T {
        self.coeffs.get(&vec![0; self.nvars]).cloned().unwrap_or_else(T::zero)
    }
}

impl<T> Neg for SparsePolynomial<T>
where
    T: Clone + Zero + One + PartialEq + Neg<Output = T>,
{
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|c| -c.clone())
    }
}

fn beta_factorial(beta: &[u32]) -> f64 {
    beta.iter().map(|&e| (1..=e).map(f64::from).product::<f64>()).product()
}

fn beta_factorial_exact(beta: &[u32]) -> Rational {
    beta.iter().map(|&e| (1..=e as i64).fold(rat(1), |acc, k| acc * rat(k))).fold(rat(1), |acc, f| acc * f)
}

fn check_bracket_vars<T>(p: &SparsePolynomial<T>, q: &SparsePolynomial<T>) -> Result<()> {
    if p.nvars != q.nvars {
        return Err(Error::Argument(format!("bracket of polynomials over {} and {} variables", p.nvars, q.nvars)));
    }
    Ok(())
}

/// `[[p, q]] = p(∂) q |_{z=0} = Σ_β c_β(p) c_β(q) β!` in orthonormal coordinates.
pub fn bracket(p: &SparsePolynomial<Complex64>, q: &SparsePolynomial<Complex64>) -> Result<Complex64> {
    check_bracket_vars(p, q)?;
    let (small, large) = if p.len() <= q.len() { (p, q) } else { (q, p) };
    let mut acc = Complex64::zero();
    for (beta, c) in small.terms() {
        if let Some(d) = large.coeff(beta) {
            acc += c * d * beta_factorial(beta);
        }
    }
    Ok(acc)
}

/// Exact bracket for coordinates whose invariant form is `scale · I`.
///
/// For a homogeneous pair of degree `k` this is `Σ_β c_β(p) c_β(q) β! / scale^k`.
pub fn bracket_exact(
    p: &SparsePolynomial<Rational>,
    q: &SparsePolynomial<Rational>,
    scale: &Rational,
) -> Result<Rational> {
    check_bracket_vars(p, q)?;
    let mut acc = rat(0);
    for (beta, c) in p.terms() {
        if let Some(d) = q.coeff(beta) {
            let deg: u32 = beta.iter().sum();
            let mut s = rat(1);
            for _ in 0..deg {
                s *= scale;
            }
            acc += c * d * beta_factorial_exact(beta) / s;
        }
    }
    Ok(acc)
}
