//! Weyl group generation by breadth-first closure over simple reflections.

use std::collections::{HashSet, VecDeque};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rootsys::exact::{QMatrix, Rational};
use crate::rootsys::RootSystem;

/// Default cap on the number of generated elements.
pub const DEFAULT_WEYL_BOUND: usize = 10_000_000;

/// One Weyl group element acting on ambient Cartan coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylElement {
    matrix: QMatrix,
    sign: i8,
    word_length: usize,
    numeric: Vec<f64>,
}

impl WeylElement {
    fn new(matrix: QMatrix, word_length: usize) -> Self {
        let numeric = matrix.to_f64();
        let sign = if word_length.is_multiple_of(2) { 1 } else { -1 };
        WeylElement { matrix, sign, word_length, numeric }
    }

    pub fn matrix(&self) -> &QMatrix {
        &self.matrix
    }

    /// `ε(w) = det w = (-1)^{ℓ(w)}`.
    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn sign_f64(&self) -> f64 {
        f64::from(self.sign)
    }

    pub fn word_length(&self) -> usize {
        self.word_length
    }

    pub fn apply(&self, h: &[Complex64]) -> Vec<Complex64> {
        let n = h.len();
        self.numeric.chunks(n).map(|row| row.iter().zip(h).map(|(a, x)| x * *a).sum()).collect()
    }

    pub fn apply_f64(&self, h: &[f64]) -> Vec<f64> {
        let n = h.len();
        self.numeric.chunks(n).map(|row| row.iter().zip(h).map(|(a, x)| a * x).sum()).collect()
    }

    pub fn apply_exact(&self, h: &[Rational]) -> Vec<Rational> {
        self.matrix.apply(h)
    }
}

/// All Weyl group elements, identity first, with the default size bound.
pub fn generate_weyl_group(rs: &RootSystem) -> Result<Vec<WeylElement>> {
    generate_weyl_group_bounded(rs, DEFAULT_WEYL_BOUND)
}

pub fn generate_weyl_group_bounded(rs: &RootSystem, bound: usize) -> Result<Vec<WeylElement>> {
    let gens: Vec<QMatrix> = rs.simple_roots().iter().map(|a| QMatrix::reflection(a)).collect();
    let id = QMatrix::identity(rs.ambient_dim());
    let mut seen: HashSet<QMatrix> = HashSet::new();
    seen.insert(id.clone());
    let mut out = vec![WeylElement::new(id.clone(), 0)];
    let mut queue = VecDeque::from([(id, 0usize)]);
    while let Some((g, len)) = queue.pop_front() {
        for s in &gens {
            let h = s.mul(&g);
            if seen.contains(&h) {
                continue;
            }
            if seen.len() >= bound {
                return Err(Error::Resource(format!(
                    "Weyl group of {}_{} exceeds {} elements",
                    rs.family(),
                    rs.rank(),
                    bound
                )));
            }
            seen.insert(h.clone());
            out.push(WeylElement::new(h.clone(), len + 1));
            queue.push_back((h, len + 1));
        }
    }
    Ok(out)
}
