//! Closed-form evaluators: the Weyl-sum side of the integral formula, the
//! U(N) determinant form, Weyl and Kirillov characters, and coadjoint orbit
//! volumes.

use num_complex::Complex64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{alternating_exp_sum, factorial, ScaledSum};
use crate::rootsys::exact::{self, rat, Rational};
use crate::rootsys::{normalization_constant, pi_pi_norm, Family, RootSystem};

/// Minimum gap between consecutive eigenvalues accepted by [`hciz`].
pub const HCIZ_MIN_GAP: f64 = 1e-8;

/// Threshold on `|e^{α(h)/2} - e^{-α(h)/2}|` for character evaluation.
pub const CHARACTER_DENOMINATOR_TOL: f64 = 1e-8;

/// A point of the complexified Cartan subalgebra in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CartanPoint {
    coords: Vec<Complex64>,
}

impl CartanPoint {
    pub fn new(rs: &RootSystem, coords: Vec<Complex64>) -> Result<Self> {
        rs.validate_point(&coords, "Cartan point")?;
        Ok(CartanPoint { coords })
    }

    pub fn real(rs: &RootSystem, coords: &[f64]) -> Result<Self> {
        Self::new(rs, coords.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Builds a point from orthonormal Cartan coordinates.
    pub fn from_orthonormal(rs: &RootSystem, u: &[f64]) -> Self {
        let u: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        CartanPoint { coords: rs.from_orthonormal(&u) }
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.coords.iter().map(|z| z.re).collect()
    }

    pub fn is_real(&self) -> bool {
        self.coords.iter().all(|z| z.im == 0.0)
    }

    pub fn scaled(&self, c: Complex64) -> CartanPoint {
        CartanPoint { coords: self.coords.iter().map(|z| z * c).collect() }
    }

    pub fn apply_weyl(&self, w: &crate::rootsys::WeylElement) -> CartanPoint {
        CartanPoint { coords: w.apply(&self.coords) }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// A weight in ambient dual coordinates (paired with the Cartan by the dot product).
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    coords: Vec<Rational>,
    dominant_integral: bool,
}

impl Weight {
    /// `Σ m_i ω_i` from Dynkin labels `m_i ≥ 0`.
    pub fn from_dynkin_labels(rs: &RootSystem, labels: &[u32]) -> Result<Self> {
        if labels.len() != rs.rank() {
            return Err(Error::Argument(format!("{} Dynkin labels given for rank {}", labels.len(), rs.rank())));
        }
        let om = rs.fundamental_weights()?;
        let mut coords = vec![rat(0); rs.ambient_dim()];
        for (m, w) in labels.iter().zip(&om) {
            for (c, x) in coords.iter_mut().zip(w) {
                *c += rat(i64::from(*m)) * x;
            }
        }
        Self::new(rs, coords)
    }

    /// Wraps explicit coordinates, recording whether the weight is dominant integral.
    pub fn new(rs: &RootSystem, coords: Vec<Rational>) -> Result<Self> {
        if coords.len() != rs.ambient_dim() {
            return Err(Error::Argument(format!(
                "weight has {} coordinates, expected {}",
                coords.len(),
                rs.ambient_dim()
            )));
        }
        if matches!(rs.family(), Family::A | Family::G2) && !coords.iter().sum::<Rational>().is_zero() {
            return Err(Error::Argument("weight must lie in the sum-zero subspace".into()));
        }
        let dominant_integral =
            rs.simple_coroots().iter().all(|c| exact::is_nonnegative_integer(&exact::dot(&coords, c)));
        Ok(Weight { coords, dominant_integral })
    }

    pub fn zero(rs: &RootSystem) -> Self {
        Weight { coords: vec![rat(0); rs.ambient_dim()], dominant_integral: true }
    }

    pub fn coords(&self) -> &[Rational] {
        &self.coords
    }

    pub fn is_dominant_integral(&self) -> bool {
        self.dominant_integral
    }

    /// `λ + ρ`.
    pub fn shifted(&self, rs: &RootSystem) -> Vec<Rational> {
        self.coords.iter().zip(rs.weyl_vector()).map(|(a, b)| a + b).collect()
    }
}

fn to_c64(v: &[Rational]) -> Vec<Complex64> {
    v.iter().map(|x| Complex64::new(exact::to_f64(x), 0.0)).collect()
}

/// `Σ_w ε(w) e^{⟨w h1, h2⟩}` with the largest exponent factored out.
pub fn weyl_sum(rs: &RootSystem, h1: &[Complex64], h2: &[Complex64]) -> Result<ScaledSum> {
    let terms: Vec<(f64, Complex64)> =
        rs.weyl_group()?.iter().map(|w| (w.sign_f64(), rs.pairing(&w.apply(h1), h2))).collect();
    Ok(alternating_exp_sum(&terms, rs.num_positive_roots() as u32))
}

/// Right-hand side of the integral formula divided by `Π(h1)Π(h2)`, i.e. the
/// closed form of `∫_G e^{⟨Ad_g h1, h2⟩} dg`.
pub fn hc_rhs(rs: &RootSystem, h1: &CartanPoint, h2: &CartanPoint) -> Result<Complex64> {
    let s = hc_rhs_scaled(rs, h1, h2)?;
    Ok(s.value())
}

/// [`hc_rhs`] as `mantissa · e^{max_exp}`, for callers that combine it with
/// other exponentials.
pub fn hc_rhs_scaled(rs: &RootSystem, h1: &CartanPoint, h2: &CartanPoint) -> Result<ScaledSum> {
    let p1 = rs.check_regular(h1.coords(), "h1")?;
    let p2 = rs.check_regular(h2.coords(), "h2")?;
    let c = normalization_constant(rs)?;
    let s = weyl_sum(rs, h1.coords(), h2.coords())?;
    Ok(ScaledSum { mantissa: s.mantissa * c / (p1 * p2), max_exp: s.max_exp })
}

fn check_increasing(v: &[f64], name: &str) -> Result<()> {
    for i in 1..v.len() {
        let gap = v[i] - v[i - 1];
        if !(gap > HCIZ_MIN_GAP) {
            return Err(Error::Degenerate { what: name.to_string(), root: format!("e{}-e{}", i, i + 1), value: gap });
        }
    }
    Ok(())
}

/// `∫_{U(N)} e^{tr(A U B U†)} dU` via the determinant formula, for strictly
/// increasing eigenvalues `a`, `b`.
pub fn hciz(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len();
    if n == 0 || b.len() != n {
        return Err(Error::Argument(format!(
            "eigenvalue vectors must be nonempty and of equal length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    check_increasing(a, "a")?;
    check_increasing(b, "b")?;
    let mut shift = 0.0;
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i] * b[j]);
    let mut scaled = m.clone();
    for i in 0..n {
        let row_max = (0..n).map(|j| m[(i, j)]).fold(f64::NEG_INFINITY, f64::max);
        shift += row_max;
        for j in 0..n {
            scaled[(i, j)] = (m[(i, j)] - row_max).exp();
        }
    }
    let det = scaled.lu().determinant();
    let mut log_vdm = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            log_vdm += (a[j] - a[i]).ln() + (b[j] - b[i]).ln();
        }
    }
    let log_const: f64 = (1..n as u32).map(|p| factorial(p).ln()).sum();
    Ok(det.signum() * (det.abs().ln() + shift + log_const - log_vdm).exp())
}

/// `∏ (e^{α(h)/2} - e^{-α(h)/2})` as `mantissa · e^{exponent}` (complex exponent).
fn weyl_denominator(rs: &RootSystem, h: &[Complex64]) -> Result<(Complex64, Complex64)> {
    let mut mant = Complex64::new(1.0, 0.0);
    let mut expo = Complex64::zero();
    for (i, a) in rs.root_values(h).into_iter().enumerate() {
        let d = (a / 2.0).exp() - (-a / 2.0).exp();
        if !(d.norm() > CHARACTER_DENOMINATOR_TOL) {
            return Err(Error::Degenerate { what: "h".into(), root: rs.root_label(i), value: d.norm() });
        }
        // e^{a/2} - e^{-a/2} = s e^{s a/2} (1 - e^{-s a}), s = sign(Re a)
        let s = if a.re >= 0.0 { 1.0 } else { -1.0 };
        expo += a * (s / 2.0);
        mant *= (Complex64::new(1.0, 0.0) - (-a * s).exp()) * s;
    }
    Ok((mant, expo))
}

fn require_dominant(lambda: &Weight) -> Result<()> {
    if lambda.is_dominant_integral() {
        Ok(())
    } else {
        Err(Error::Argument("highest weight must be dominant integral".into()))
    }
}

/// Weyl character `χ_λ(e^h)` as the alternating sum over the Weyl denominator.
pub fn weyl_character(rs: &RootSystem, lambda: &Weight, h: &CartanPoint) -> Result<Complex64> {
    require_dominant(lambda)?;
    rs.validate_point(h.coords(), "h")?;
    let (dm, de) = weyl_denominator(rs, h.coords())?;
    let shifted = to_c64(&lambda.shifted(rs));
    let terms: Vec<(f64, Complex64)> = rs
        .weyl_group()?
        .iter()
        .map(|w| {
            let x: Complex64 = w.apply(&shifted).iter().zip(h.coords()).map(|(a, b)| a * b).sum();
            (w.sign_f64(), x)
        })
        .collect();
    let num = alternating_exp_sum(&terms, rs.num_positive_roots() as u32);
    Ok(num.mantissa / dm * (Complex64::new(num.max_exp, 0.0) - de).exp())
}

/// Character through the orbit-integral route: `Π(h)/∏(e^{α/2}-e^{-α/2})`
/// times the Liouville volume of the coadjoint orbit through `λ+ρ` times the
/// normalized Haar integral `∫_G e^{⟨Ad_g h1, h⟩} dg` (closed form), where
/// `h1` is dual to `λ+ρ` under the invariant form.
pub fn kirillov_character(rs: &RootSystem, lambda: &Weight, h: &CartanPoint) -> Result<Complex64> {
    require_dominant(lambda)?;
    rs.validate_point(h.coords(), "h")?;
    let (dm, de) = weyl_denominator(rs, h.coords())?;
    let scale = rs.form_scale_f64();
    let h1: Vec<Complex64> = to_c64(&lambda.shifted(rs)).into_iter().map(|z| z / scale).collect();
    let h1 = CartanPoint::new(rs, h1)?;
    let volume = coadjoint_volume(rs, &h1)?;
    let integral = hc_rhs_scaled(rs, &h1, h)?;
    let pi_h = rs.discriminant_value(h.coords());
    Ok(pi_h / dm * volume * integral.mantissa * (Complex64::new(integral.max_exp, 0.0) - de).exp())
}

/// Liouville volume `|W| Π(h1) / [[Π,Π]]` of the coadjoint orbit through `h1`;
/// `h1` must lie in the chamber where `Π > 0`.
pub fn coadjoint_volume(rs: &RootSystem, h1: &CartanPoint) -> Result<f64> {
    let p = rs.check_regular(h1.coords(), "h1")?;
    if p.im.abs() > 1e-12 * p.norm() || p.re <= 0.0 {
        return Err(Error::Argument(format!("h1 must lie in the fundamental chamber (Π(h1) = {p})")));
    }
    let order = rs.weyl_group()?.len() as f64;
    Ok(order * p.re / pi_pi_norm(rs))
}

/// Dimension `Π(λ+ρ)/Π(ρ)` of the irreducible representation (exact).
pub fn weyl_dimension(rs: &RootSystem, lambda: &Weight) -> Result<Rational> {
    require_dominant(lambda)?;
    let num = rs.discriminant_value_exact(&lambda.shifted(rs));
    let den = rs.discriminant_value_exact(&rs.weyl_vector());
    debug_assert!(den.is_positive());
    Ok(num / den)
}

/// Which closed form produced a [`ClosedFormRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    WeylSum,
    HcizDeterminant,
    WeylCharacter,
    CoadjointVolume,
}

/// JSON record of one closed-form evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormRecord {
    pub inputs: serde_json::Value,
    pub value: [f64; 2],
    pub method: String,
    pub formula: Formula,
}

impl ClosedFormRecord {
    pub fn new(inputs: serde_json::Value, value: Complex64, formula: Formula) -> Self {
        ClosedFormRecord { inputs, value: [value.re, value.im], method: "closed_form".into(), formula }
    }
}

#[cfg(test)]
mod tests;
