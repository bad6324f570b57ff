//! Matrix realizations of SU(N), SO(N) and USp(2n), Haar sampling, Cartan
//! embeddings and Monte Carlo evaluation of orbital integrals.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closedform::CartanPoint;
use crate::error::{Error, Result};
use crate::rootsys::{Family, RootSystem};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

/// Samples per deterministic Monte Carlo partition.
pub const MC_CHUNK: usize = 4096;

/// Smallest sample count accepted by [`mc_orbital_integral`].
pub const MC_MIN_SAMPLES: usize = 1000;

const UNITARITY_TOL: f64 = 1e-12;
const DET_TOL: f64 = 1e-10;
const SYMPLECTIC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupFamily {
    #[serde(rename = "su")]
    SU,
    #[serde(rename = "so")]
    SO,
    #[serde(rename = "usp")]
    USp,
}

impl fmt::Display for GroupFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupFamily::SU => "SU",
            GroupFamily::SO => "SO",
            GroupFamily::USp => "USp",
        })
    }
}

impl FromStr for GroupFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "su" => Ok(GroupFamily::SU),
            "so" => Ok(GroupFamily::SO),
            "usp" | "sp" => Ok(GroupFamily::USp),
            _ => Err(Error::Config(format!("unknown group family '{s}' (expected su, so, usp)"))),
        }
    }
}

/// A compact group together with the root system of its Cartan subalgebra.
#[derive(Debug, Clone)]
pub struct CompactGroupSpec {
    family: GroupFamily,
    size: usize,
    rank: usize,
    root_system: RootSystem,
}

impl CompactGroupSpec {
    /// `size` is the matrix dimension: SU(N), SO(N), USp(2n).
    pub fn new(family: GroupFamily, size: usize) -> Result<Self> {
        let (rs_family, rank) = match family {
            GroupFamily::SU if size >= 2 => (Family::A, size - 1),
            GroupFamily::SO if size >= 3 && size % 2 == 1 => (Family::B, size / 2),
            GroupFamily::SO if size >= 4 => (Family::D, size / 2),
            GroupFamily::USp if size >= 2 && size.is_multiple_of(2) => (Family::C, size / 2),
            _ => {
                return Err(Error::Config(format!(
                    "unsupported group {family}({size}) (need SU(N≥2), SO(N≥3), USp(2n≥2))"
                )))
            }
        };
        Ok(CompactGroupSpec { family, size, rank, root_system: RootSystem::construct(rs_family, rank) })
    }

    /// The group realizing a classical root system, if it has a matrix model here.
    pub fn for_root_system(family: Family, rank: usize) -> Result<Self> {
        match family {
            Family::A => Self::new(GroupFamily::SU, rank + 1),
            Family::B => Self::new(GroupFamily::SO, 2 * rank + 1),
            Family::C => Self::new(GroupFamily::USp, 2 * rank),
            Family::D => Self::new(GroupFamily::SO, 2 * rank),
            Family::G2 => Err(Error::Config("no matrix model for G2; closed form only".into())),
        }
    }

    pub fn family(&self) -> GroupFamily {
        self.family
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn root_system(&self) -> &RootSystem {
        &self.root_system
    }

    /// Real dimension of the Lie algebra.
    pub fn algebra_dim(&self) -> usize {
        let n = self.size;
        match self.family {
            GroupFamily::SU => n * n - 1,
            GroupFamily::SO => n * (n - 1) / 2,
            GroupFamily::USp => (n / 2) * (n + 1),
        }
    }

    /// Constant `c` in `pairing(X, Y) = c · tr(XY)`.
    pub fn trace_constant(&self) -> f64 {
        match self.family {
            GroupFamily::SU => -1.0,
            GroupFamily::SO | GroupFamily::USp => -0.5,
        }
    }

    pub fn label(&self) -> String {
        format!("{}({})", self.family, self.size)
    }
}

impl Serialize for CompactGroupSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("CompactGroupSpec", 4)?;
        st.serialize_field("family", &self.family)?;
        st.serialize_field("size", &self.size)?;
        st.serialize_field("rank", &self.rank)?;
        st.serialize_field("root_system", &format!("{}_{}", self.root_system.family(), self.rank))?;
        st.end()
    }
}

/// A group element; SO elements are stored as real matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupElement {
    Real(RMatrix),
    Complex(CMatrix),
}

impl GroupElement {
    pub fn to_complex(&self) -> CMatrix {
        match self {
            GroupElement::Real(m) => m.map(|x| Complex64::new(x, 0.0)),
            GroupElement::Complex(m) => m.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            GroupElement::Real(m) => m.nrows(),
            GroupElement::Complex(m) => m.nrows(),
        }
    }

    /// `‖g* g − I‖_∞` (max entry).
    pub fn unitarity_defect(&self) -> f64 {
        let g = self.to_complex();
        let n = g.nrows();
        let p = g.adjoint() * &g - CMatrix::identity(n, n);
        p.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn det(&self) -> Complex64 {
        match self {
            GroupElement::Real(m) => Complex64::new(m.clone().lu().determinant(), 0.0),
            GroupElement::Complex(m) => m.clone().lu().determinant(),
        }
    }

    /// `‖gᵀ J g − J‖_∞` for even dimension.
    pub fn symplectic_defect(&self) -> f64 {
        let g = self.to_complex();
        let j = symplectic_j(g.nrows() / 2);
        let p = g.transpose() * &j * &g - j;
        p.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Verifies the defining constraints of the spec's group.
    pub fn check(&self, spec: &CompactGroupSpec) -> Result<()> {
        if self.dim() != spec.size {
            return Err(Error::Argument(format!(
                "element has dimension {}, {} expects {}",
                self.dim(),
                spec.label(),
                spec.size
            )));
        }
        let u = self.unitarity_defect();
        if !(u < UNITARITY_TOL) {
            return Err(Error::Numerical(format!("unitarity defect {u:e}")));
        }
        let d = (self.det() - Complex64::new(1.0, 0.0)).norm();
        if !(d < DET_TOL) {
            return Err(Error::Numerical(format!("determinant off by {d:e}")));
        }
        if spec.family == GroupFamily::USp {
            let s = self.symplectic_defect();
            if !(s < SYMPLECTIC_TOL) {
                return Err(Error::Numerical(format!("symplectic defect {s:e}")));
            }
        }
        Ok(())
    }

    /// `Ad_g X = g X g⁻¹`.
    pub fn adjoint_action(&self, x: &CMatrix) -> CMatrix {
        let g = self.to_complex();
        &g * x * g.adjoint()
    }
}

/// `J = [[0, I], [−I, 0]]` of size `2n`.
pub fn symplectic_j(n: usize) -> CMatrix {
    let mut j = CMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(k, n + k)] = Complex64::new(1.0, 0.0);
        j[(n + k, k)] = Complex64::new(-1.0, 0.0);
    }
    j
}

fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

/// One Haar-distributed element of the spec's group.
pub fn haar_sample<R: rand::Rng + ?Sized>(spec: &CompactGroupSpec, rng: &mut R) -> GroupElement {
    let n = spec.size;
    loop {
        let g = match spec.family {
            GroupFamily::SU => sample_su(n, rng),
            GroupFamily::SO => sample_so(n, rng),
            GroupFamily::USp => sample_usp(n / 2, rng),
        };
        if let Some(g) = g {
            return g;
        }
    }
}

const SINGULAR_PIVOT: f64 = 1e-150;

fn sample_su<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Option<GroupElement> {
    let z = CMatrix::from_fn(n, n, |_, _| complex_normal(rng));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..n {
        let d = r[(k, k)];
        if d.norm() < SINGULAR_PIVOT {
            return None;
        }
        let phase = d / d.norm();
        q.column_mut(k).iter_mut().for_each(|x| *x *= phase);
    }
    let det = q.clone().lu().determinant();
    let fix = det.conj() / det.norm();
    q.column_mut(0).iter_mut().for_each(|x| *x *= fix);
    Some(GroupElement::Complex(q))
}

fn sample_so<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Option<GroupElement> {
    let z = RMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..n {
        let d = r[(k, k)];
        if d.abs() < SINGULAR_PIVOT {
            return None;
        }
        if d < 0.0 {
            q.column_mut(k).iter_mut().for_each(|x| *x = -*x);
        }
    }
    if q.clone().lu().determinant() < 0.0 {
        q.column_mut(0).iter_mut().for_each(|x| *x = -*x);
    }
    Some(GroupElement::Real(q))
}

/// Sequential Gram–Schmidt on complex Gaussians; column `n+k` is the
/// quaternionic partner `−J conj(q_k)` of column `k`.
fn sample_usp<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Option<GroupElement> {
    let m = 2 * n;
    let mut g = CMatrix::zeros(m, m);
    let mut done: Vec<usize> = Vec::with_capacity(m);
    for k in 0..n {
        let mut v: Vec<Complex64> = (0..m).map(|_| complex_normal(rng)).collect();
        for _pass in 0..2 {
            for &c in &done {
                let proj: Complex64 = (0..m).map(|i| g[(i, c)].conj() * v[i]).sum();
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi -= proj * g[(i, c)];
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < SINGULAR_PIVOT {
            return None;
        }
        for i in 0..m {
            g[(i, k)] = v[i] / norm;
        }
        // −J conj(q): top half gets −conj(q_bottom), bottom half gets conj(q_top).
        for i in 0..n {
            g[(i, n + k)] = -g[(n + i, k)].conj();
            g[(n + i, n + k)] = g[(i, k)].conj();
        }
        done.push(k);
        done.push(n + k);
    }
    Some(GroupElement::Complex(g))
}

/// Matrix of a Cartan point in the spec's realization.
pub fn embed_cartan(spec: &CompactGroupSpec, h: &CartanPoint) -> Result<CMatrix> {
    embed_coords(spec, h.coords())
}

/// [`embed_cartan`] on raw ambient coordinates.
pub fn embed_coords(spec: &CompactGroupSpec, h: &[Complex64]) -> Result<CMatrix> {
    let rs = &spec.root_system;
    if h.len() != rs.ambient_dim() {
        return Err(Error::Argument(format!(
            "{} expects {} Cartan coordinates, got {}",
            spec.label(),
            rs.ambient_dim(),
            h.len()
        )));
    }
    let n = spec.size;
    let i = Complex64::new(0.0, 1.0);
    let mut m = CMatrix::zeros(n, n);
    match spec.family {
        GroupFamily::SU => {
            for (k, a) in h.iter().enumerate() {
                m[(k, k)] = i * a;
            }
        }
        GroupFamily::SO => {
            for (k, th) in h.iter().enumerate() {
                m[(2 * k, 2 * k + 1)] = *th;
                m[(2 * k + 1, 2 * k)] = -th;
            }
        }
        GroupFamily::USp => {
            let r = spec.rank;
            for (k, a) in h.iter().enumerate() {
                m[(k, k)] = i * a;
                m[(r + k, r + k)] = -i * a;
            }
        }
    }
    Ok(m)
}

/// The invariant form `c_spec · tr(XY)`, positive definite on the compact algebra.
pub fn pairing(spec: &CompactGroupSpec, x: &CMatrix, y: &CMatrix) -> Result<Complex64> {
    let n = spec.size;
    if x.shape() != (n, n) || y.shape() != (n, n) {
        return Err(Error::Argument(format!(
            "pairing on {} needs {n}×{n} matrices, got {:?} and {:?}",
            spec.label(),
            x.shape(),
            y.shape()
        )));
    }
    Ok(trace_product(x, y) * spec.trace_constant())
}

/// `tr(XY)` without forming the product.
pub fn trace_product(x: &CMatrix, y: &CMatrix) -> Complex64 {
    let n = x.nrows();
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s += x[(i, j)] * y[(j, i)];
        }
    }
    s
}

/// Orthonormal basis of the compact Lie algebra under [`pairing`], split into
/// Cartan directions (first `rank`, matching the root system's orthonormal
/// Cartan basis) and their orthogonal complement.
#[derive(Debug, Clone)]
pub struct AlgebraBasis {
    pub cartan: Vec<CMatrix>,
    pub complement: Vec<CMatrix>,
}

pub fn algebra_basis(spec: &CompactGroupSpec) -> Result<AlgebraBasis> {
    let rs = &spec.root_system;
    let n = spec.size;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let cartan: Vec<CMatrix> = rs
        .orthonormal_basis()
        .iter()
        .map(|b| {
            let h: Vec<Complex64> = b.iter().map(|&x| c(x, 0.0)).collect();
            embed_coords(spec, &h)
        })
        .collect::<Result<_>>()?;
    let mut spanning: Vec<CMatrix> = Vec::new();
    let m = n;
    for j in 0..m {
        for k in j + 1..m {
            let mut a = CMatrix::zeros(m, m);
            a[(j, k)] = c(1.0, 0.0);
            a[(k, j)] = c(-1.0, 0.0);
            spanning.push(a);
            if spec.family != GroupFamily::SO {
                let mut b = CMatrix::zeros(m, m);
                b[(j, k)] = c(0.0, 1.0);
                b[(k, j)] = c(0.0, 1.0);
                spanning.push(b);
            }
        }
        // Diagonal directions: traceless for SU, all of them before the usp projection.
        if spec.family == GroupFamily::USp || (spec.family == GroupFamily::SU && j + 1 < m) {
            let mut d = CMatrix::zeros(m, m);
            d[(j, j)] = c(0.0, 1.0);
            if spec.family == GroupFamily::SU {
                d[(j + 1, j + 1)] = c(0.0, -1.0);
            }
            spanning.push(d);
        }
    }
    if spec.family == GroupFamily::USp {
        // Project onto usp: X ↦ ½(X − J conj(X) J).
        let j = symplectic_j(n / 2);
        spanning = spanning.into_iter().map(|x| (&x - &j * x.map(|z| z.conj()) * &j) * c(0.5, 0.0)).collect();
    }
    let mut basis: Vec<CMatrix> = cartan.clone();
    for mut x in spanning {
        for _pass in 0..2 {
            for b in &basis {
                let p = pairing(spec, b, &x)?.re;
                x -= b * c(p, 0.0);
            }
        }
        let norm2 = pairing(spec, &x, &x)?.re;
        if norm2 > 1e-20 {
            basis.push(x * c(1.0 / norm2.sqrt(), 0.0));
        }
    }
    if basis.len() != spec.algebra_dim() {
        return Err(Error::Numerical(format!(
            "algebra basis for {} has {} elements, expected {}",
            spec.label(),
            basis.len(),
            spec.algebra_dim()
        )));
    }
    let complement = basis.split_off(spec.rank);
    Ok(AlgebraBasis { cartan: basis, complement })
}

/// Result of a Monte Carlo integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralEstimate {
    pub mean: Complex64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub elapsed: f64,
}

/// JSON export of an estimate with its inputs.
#[derive(Debug, Clone, Serialize)]
pub struct IntegralEstimateRecord {
    pub spec: String,
    pub h1: Vec<[f64; 2]>,
    pub h2: Vec<[f64; 2]>,
    pub t: f64,
    pub n: usize,
    pub seed: u64,
    pub mean_re: f64,
    pub mean_im: f64,
    pub stderr: f64,
}

impl IntegralEstimate {
    pub fn record(
        &self,
        spec: &CompactGroupSpec,
        h1: &CartanPoint,
        h2: &CartanPoint,
        t: f64,
    ) -> IntegralEstimateRecord {
        let pts = |h: &CartanPoint| h.coords().iter().map(|z| [z.re, z.im]).collect();
        IntegralEstimateRecord {
            spec: spec.label(),
            h1: pts(h1),
            h2: pts(h2),
            t,
            n: self.n_samples,
            seed: self.seed,
            mean_re: self.mean.re,
            mean_im: self.mean.im,
            stderr: self.stderr,
        }
    }
}

/// Running mean and sum of squared deviations (real and imaginary parts).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: Complex64,
    m2_re: f64,
    m2_im: f64,
}

impl Moments {
    fn push(&mut self, x: Complex64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        let d2 = x - self.mean;
        self.m2_re += d.re * d2.re;
        self.m2_im += d.im * d2.im;
    }

    fn merge(self, o: Moments) -> Moments {
        if o.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * (o.n / n),
            m2_re: self.m2_re + o.m2_re + d.re * d.re * self.n * o.n / n,
            m2_im: self.m2_im + o.m2_im + d.im * d.im * self.n * o.n / n,
        }
    }

    fn stderr(&self) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        let var = (self.m2_re + self.m2_im) / (self.n - 1.0);
        (var / self.n).sqrt()
    }
}

/// Independent stream `index` derived from `seed`.
pub fn rng_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Monte Carlo estimate of `E_g[f(g)]` over Haar measure with deterministic
/// chunked streams. `f` receives the sample.
pub fn mc_expectation<F>(spec: &CompactGroupSpec, n: usize, seed: u64, f: F) -> Result<IntegralEstimate>
where
    F: Fn(&GroupElement) -> Complex64 + Sync,
{
    if n < MC_MIN_SAMPLES {
        return Err(Error::Argument(format!("Monte Carlo needs at least {MC_MIN_SAMPLES} samples, got {n}")));
    }
    let start = Instant::now();
    let chunks = n.div_ceil(MC_CHUNK);
    let partials: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_stream(seed, c as u64);
            let len = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut m = Moments::default();
            for _ in 0..len {
                let g = haar_sample(spec, &mut rng);
                m.push(f(&g));
            }
            m
        })
        .collect();
    let total = partials.into_iter().fold(Moments::default(), Moments::merge);
    Ok(IntegralEstimate {
        mean: total.mean,
        stderr: total.stderr(),
        n_samples: n,
        seed,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

/// `pairing(Ad_g H1, H2)` for a sampled `g`.
pub fn orbit_functional(spec: &CompactGroupSpec, g: &GroupElement, h1: &CMatrix, h2: &CMatrix) -> Complex64 {
    let x = match g {
        GroupElement::Real(r) => {
            let gc = r.map(|v| Complex64::new(v, 0.0));
            &gc * h1 * gc.transpose()
        }
        GroupElement::Complex(c) => c * h1 * c.adjoint(),
    };
    trace_product(&x, h2) * spec.trace_constant()
}

/// Monte Carlo estimate of `∫_G e^{(1/t)⟨Ad_g h1, h2⟩} dg`.
///
/// The integrand is evaluated as `e^{x − s}` with `s = max_w Re⟨w h1, h2⟩/t`
/// and the shift restored at the end, so large exponents do not overflow.
pub fn mc_orbital_integral(
    spec: &CompactGroupSpec,
    h1: &CartanPoint,
    h2: &CartanPoint,
    t: f64,
    n: usize,
    seed: u64,
) -> Result<IntegralEstimate> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Argument(format!("t must be positive and finite, got {t}")));
    }
    let rs = &spec.root_system;
    rs.validate_point(h1.coords(), "h1")?;
    rs.validate_point(h2.coords(), "h2")?;
    let m1 = embed_cartan(spec, h1)?;
    let m2 = embed_cartan(spec, h2)?;
    let shift = rs
        .weyl_group()?
        .iter()
        .map(|w| rs.pairing(&w.apply(h1.coords()), h2.coords()).re / t)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut est = mc_expectation(spec, n, seed, |g| (orbit_functional(spec, g, &m1, &m2) / t - shift).exp())?;
    let scale = shift.exp();
    est.mean *= scale;
    est.stderr *= scale;
    Ok(est)
}

/// `D_3 → A_3` Cartan coordinate isometry realizing so(6) ≅ su(4).
pub fn d3_to_a3(theta: &[Complex64]) -> Result<Vec<Complex64>> {
    if theta.len() != 3 {
        return Err(Error::Argument(format!("D_3 point needs 3 coordinates, got {}", theta.len())));
    }
    let (a, b, c) = (theta[0], theta[1], theta[2]);
    Ok(vec![(a + b + c) * 0.5, (a - b - c) * 0.5, (-a + b - c) * 0.5, (-a - b + c) * 0.5])
}
