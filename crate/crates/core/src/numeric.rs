//! Shared numerical helpers: compensated summation and max-exponent factoring.

use num_complex::Complex64;

/// Neumaier-compensated running sum of complex numbers.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    re: f64,
    re_c: f64,
    im: f64,
    im_c: f64,
}

fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

impl CompensatedSum {
    pub fn add(&mut self, z: Complex64) {
        neumaier(&mut self.re, &mut self.re_c, z.re);
        neumaier(&mut self.im, &mut self.im_c, z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re + self.re_c, self.im + self.im_c)
    }
}

/// `Σ s_k e^{x_k}` represented as `mantissa · e^{max_exp}` with
/// `max_exp = max Re x_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledSum {
    pub mantissa: Complex64,
    pub max_exp: f64,
}

impl ScaledSum {
    pub fn value(&self) -> Complex64 {
        self.mantissa * self.max_exp.exp()
    }
}

/// Signed exponential sum with the largest real exponent factored out.
/// Terms are accumulated in descending order of magnitude (descending
/// `Re x_k`) with compensation.
pub fn signed_exp_sum(terms: &[(f64, Complex64)]) -> ScaledSum {
    let max_exp = terms.iter().map(|(_, x)| x.re).fold(f64::NEG_INFINITY, f64::max);
    let mut order: Vec<usize> = (0..terms.len()).collect();
    order.sort_by(|&a, &b| terms[b].1.re.total_cmp(&terms[a].1.re));
    let mut acc = CompensatedSum::default();
    for k in order {
        let (s, x) = terms[k];
        acc.add((x - max_exp).exp() * s);
    }
    ScaledSum { mantissa: acc.value(), max_exp }
}

/// Beyond this `max |x_k|` the remainder form of [`alternating_exp_sum`]
/// gains nothing and the scaled form is used.
pub const REMAINDER_LIMIT: f64 = 40.0;

/// `e^x − Σ_{k<m} x^k/k!`.
pub fn exp_remainder(x: Complex64, m: u32) -> Complex64 {
    let r = x.norm();
    if m == 0 {
        return x.exp();
    }
    if r <= 0.5 * f64::from(m + 1) {
        let mut term = Complex64::new(1.0, 0.0);
        for k in 1..=m {
            term *= x / f64::from(k);
        }
        let mut acc = CompensatedSum::default();
        let mut k = m;
        while term.norm() > 1e-18 * acc.value().norm() || k == m {
            acc.add(term);
            k += 1;
            term *= x / f64::from(k);
            if term == Complex64::new(0.0, 0.0) {
                break;
            }
        }
        acc.value()
    } else {
        let mut acc = CompensatedSum::default();
        acc.add(x.exp());
        let mut term = Complex64::new(1.0, 0.0);
        for k in 0..m {
            acc.add(-term);
            term *= x / f64::from(k + 1);
        }
        acc.value()
    }
}

/// `Σ s_k e^{x_k}` for sums known to vanish to order `m` (every power sum
/// `Σ s_k x_k^j`, `j < m`, is zero). The Taylor polynomial of degree `< m`
/// is dropped termwise so the cancellation happens analytically.
pub fn alternating_exp_sum(terms: &[(f64, Complex64)], m: u32) -> ScaledSum {
    let max_abs = terms.iter().map(|(_, x)| x.norm()).fold(0.0, f64::max);
    if m == 0 || max_abs > REMAINDER_LIMIT {
        return signed_exp_sum(terms);
    }
    let mut acc = CompensatedSum::default();
    for &(s, x) in terms {
        acc.add(exp_remainder(x, m) * s);
    }
    ScaledSum { mantissa: acc.value(), max_exp: 0.0 }
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

pub fn relative_error(got: Complex64, want: Complex64) -> f64 {
    let d = (got - want).norm();
    if want.norm() == 0.0 {
        d
    } else {
        d / want.norm()
    }
}
