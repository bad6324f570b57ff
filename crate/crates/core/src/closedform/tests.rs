use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::numeric::relative_error;
use crate::rootsys::build_root_system;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn point(rs: &RootSystem, v: &[f64]) -> CartanPoint {
    CartanPoint::real(rs, v).unwrap()
}

/// Random regular real point with consecutive sorted gaps ≥ `gap` (A family:
/// sum-zero eigenvalues; others: orthonormal coordinates).
fn random_regular(rs: &RootSystem, rng: &mut ChaCha8Rng) -> CartanPoint {
    loop {
        let u: Vec<f64> = (0..rs.rank()).map(|_| rng.random_range(-1.5..1.5)).collect();
        let p = CartanPoint::from_orthonormal(rs, &u);
        let min_root = rs.root_values(p.coords()).iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if min_root > 0.3 {
            return p;
        }
    }
}

#[test]
fn hc_rhs_a1_two_term_sum() {
    let rs = build_root_system(Family::A, 1).unwrap();
    for (a, b) in [(0.5, 0.7), (1.0, -0.3), (2.0, 1.5)] {
        let got = hc_rhs(&rs, &point(&rs, &[a, -a]), &point(&rs, &[b, -b])).unwrap();
        let want = ((2.0 * a * b).exp() - (-2.0 * a * b).exp()) / (4.0 * a * b);
        assert!(relative_error(got, c(want)) < 1e-14, "{got} vs {want}");
        // Same integral through the determinant form at N = 2.
        let (lo_a, hi_a) = if a < 0.0 { (a, -a) } else { (-a, a) };
        let (lo_b, hi_b) = if b < 0.0 { (b, -b) } else { (-b, b) };
        let det = hciz(&[lo_a, hi_a], &[lo_b, hi_b]).unwrap();
        assert!(relative_error(got, c(det)) < 1e-13);
    }
}

#[test]
fn hc_rhs_transpose_and_weyl_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (f, n) in [(Family::A, 2), (Family::B, 2), (Family::C, 3), (Family::D, 3), (Family::G2, 2), (Family::A, 3)] {
        let rs = build_root_system(f, n).unwrap();
        for _ in 0..5 {
            let h1 = random_regular(&rs, &mut rng);
            let h2 = random_regular(&rs, &mut rng);
            let v = hc_rhs(&rs, &h1, &h2).unwrap();
            let t = hc_rhs(&rs, &h2, &h1).unwrap();
            assert!(relative_error(t, v) < 1e-12, "{f}_{n} transpose");
            for w in rs.weyl_group().unwrap() {
                let wv = hc_rhs(&rs, &h1.apply_weyl(w), &h2).unwrap();
                assert!(relative_error(wv, v) < 1e-12, "{f}_{n} W-invariance");
            }
        }
    }
}

#[test]
fn hc_rhs_positive_for_real_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (f, n) in [(Family::A, 2), (Family::B, 3), (Family::G2, 2)] {
        let rs = build_root_system(f, n).unwrap();
        for _ in 0..10 {
            let v = hc_rhs(&rs, &random_regular(&rs, &mut rng), &random_regular(&rs, &mut rng)).unwrap();
            assert!(v.re > 0.0 && v.im.abs() <= 1e-12 * v.re, "{v}");
        }
    }
}

#[test]
fn hc_rhs_rejects_degenerate_inputs() {
    let rs = build_root_system(Family::A, 2).unwrap();
    let err = hc_rhs(&rs, &point(&rs, &[0.5, 0.5, -1.0]), &point(&rs, &[1.0, 0.0, -1.0])).unwrap_err();
    assert!(matches!(err, Error::Degenerate { ref root, .. } if root == "e1-e2"), "{err}");
}

#[test]
fn hc_rhs_matches_hciz_for_sum_zero_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 2..=5usize {
        let rs = build_root_system(Family::A, n - 1).unwrap();
        for _ in 0..5 {
            let mut a = random_regular(&rs, &mut rng).real_parts();
            let mut b = random_regular(&rs, &mut rng).real_parts();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let closed = hc_rhs(&rs, &point(&rs, &a), &point(&rs, &b)).unwrap();
            let det = hciz(&a, &b).unwrap();
            assert!(relative_error(closed, c(det)) < 1e-10, "N={n}: {closed} vs {det}");
            assert!(det > 0.0);
        }
    }
}

#[test]
fn hciz_small_cases() {
    assert!((hciz(&[0.7], &[-1.3]).unwrap() - (0.7f64 * -1.3).exp()).abs() < 1e-15);
    let e = hciz(&[0.0, 1.0], &[0.0, 1.0]).unwrap();
    assert!((e - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    assert!((e - 1.7182818).abs() < 1e-7);
}

#[test]
fn hciz_handles_large_exponents() {
    let v = hciz(&[0.0, 25.0], &[0.0, 25.0]).unwrap();
    let want = ((625.0f64).exp() - 1.0) / 625.0;
    assert!(relative_error(c(v), c(want)) < 1e-12);
}

#[test]
fn hciz_rejects_coincident_eigenvalues() {
    assert!(matches!(hciz(&[0.0, 0.0], &[0.0, 1.0]), Err(Error::Degenerate { .. })));
    assert!(matches!(hciz(&[1.0, 0.0], &[0.0, 1.0]), Err(Error::Degenerate { .. })));
    assert!(matches!(hciz(&[0.0, 1.0], &[0.0]), Err(Error::Argument(_))));
}

/// Trace of `diag(e^{iθ}, e^{-iθ})` in the `m`-th symmetric power.
fn su2_trace(m: u32, theta: f64) -> Complex64 {
    (0..=m).map(|k| Complex64::new(0.0, (f64::from(m) - 2.0 * f64::from(k)) * theta).exp()).sum()
}

#[test]
fn weyl_character_a1_matches_trace() {
    let rs = build_root_system(Family::A, 1).unwrap();
    for m in 0..=4u32 {
        let lambda = Weight::from_dynkin_labels(&rs, &[m]).unwrap();
        for theta in [0.3, 0.37, 1.1] {
            let h = CartanPoint::new(&rs, vec![Complex64::new(0.0, theta), Complex64::new(0.0, -theta)]).unwrap();
            let got = weyl_character(&rs, &lambda, &h).unwrap();
            let want = su2_trace(m, theta);
            assert!((got - want).norm() < 1e-12, "m={m} θ={theta}: {got} vs {want}");
            let ratio = ((f64::from(m) + 1.0) * theta).sin() / theta.sin();
            assert!((got.re - ratio).abs() < 1e-12);
        }
    }
}

#[test]
fn trivial_character_is_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (f, n) in [(Family::A, 2), (Family::B, 2), (Family::G2, 2)] {
        let rs = build_root_system(f, n).unwrap();
        let h = random_regular(&rs, &mut rng);
        let zero = Weight::zero(&rs);
        assert!((weyl_character(&rs, &zero, &h).unwrap() - c(1.0)).norm() < 1e-12);
        assert!((kirillov_character(&rs, &zero, &h).unwrap() - c(1.0)).norm() < 1e-12);
    }
}

#[test]
fn a2_fundamental_character_is_defining_trace() {
    let rs = build_root_system(Family::A, 2).unwrap();
    let lambda = Weight::from_dynkin_labels(&rs, &[1, 0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let re = random_regular(&rs, &mut rng);
        let im = random_regular(&rs, &mut rng);
        let coords: Vec<Complex64> =
            re.coords().iter().zip(im.coords()).map(|(a, b)| Complex64::new(a.re * 0.3, b.re)).collect();
        let h = CartanPoint::new(&rs, coords.clone()).unwrap();
        let want: Complex64 = coords.iter().map(|z| z.exp()).sum();
        let got = weyl_character(&rs, &lambda, &h).unwrap();
        assert!(relative_error(got, want) < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn dimension_limits() {
    let a1 = build_root_system(Family::A, 1).unwrap();
    for m in 0..=4u32 {
        let lambda = Weight::from_dynkin_labels(&a1, &[m]).unwrap();
        assert_eq!(weyl_dimension(&a1, &lambda).unwrap(), rat(i64::from(m) + 1));
        let h = point(&a1, &[1e-4, -1e-4]);
        let near = weyl_character(&a1, &lambda, &h).unwrap();
        assert!((near.re - f64::from(m + 1)).abs() < 1e-5);
    }
    let a2 = build_root_system(Family::A, 2).unwrap();
    let fund = Weight::from_dynkin_labels(&a2, &[1, 0]).unwrap();
    assert_eq!(weyl_dimension(&a2, &fund).unwrap(), rat(3));
    let adj = Weight::from_dynkin_labels(&a2, &[1, 1]).unwrap();
    assert_eq!(weyl_dimension(&a2, &adj).unwrap(), rat(8));
    let h = point(&a2, &[1e-3, 0.2e-3, -1.2e-3]);
    let near = weyl_character(&a2, &fund, &h).unwrap();
    assert!((near.re - 3.0).abs() < 1e-4, "{near}");
    let g2 = build_root_system(Family::G2, 2).unwrap();
    // Smallest nontrivial G2 representations: 7 and 14.
    let mut dims: Vec<Rational> = [[1, 0], [0, 1]]
        .iter()
        .map(|l| weyl_dimension(&g2, &Weight::from_dynkin_labels(&g2, l).unwrap()).unwrap())
        .collect();
    dims.sort();
    assert_eq!(dims, vec![rat(7), rat(14)]);
}

#[test]
fn kirillov_equals_weyl() {
    let a1 = build_root_system(Family::A, 1).unwrap();
    for m in 0..=3u32 {
        let lambda = Weight::from_dynkin_labels(&a1, &[m]).unwrap();
        let h = CartanPoint::new(&a1, vec![Complex64::new(0.0, 0.37), Complex64::new(0.0, -0.37)]).unwrap();
        let k = kirillov_character(&a1, &lambda, &h).unwrap();
        let w = weyl_character(&a1, &lambda, &h).unwrap();
        assert!(relative_error(k, w) < 1e-10, "m={m}: {k} vs {w}");
    }
    let a2 = build_root_system(Family::A, 2).unwrap();
    let lambda = Weight::from_dynkin_labels(&a2, &[1, 0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let h = random_regular(&a2, &mut rng);
        let k = kirillov_character(&a2, &lambda, &h).unwrap();
        let w = weyl_character(&a2, &lambda, &h).unwrap();
        assert!(relative_error(k, w) < 1e-10);
    }
}

#[test]
fn non_dominant_weight_rejected() {
    let rs = build_root_system(Family::A, 1).unwrap();
    let lambda = Weight::new(&rs, vec![rat_frac(-1, 2), rat_frac(1, 2)]).unwrap();
    assert!(!lambda.is_dominant_integral());
    let h = point(&rs, &[0.2, -0.2]);
    assert!(weyl_character(&rs, &lambda, &h).is_err());
}

#[test]
fn character_rejects_singular_h() {
    let rs = build_root_system(Family::A, 1).unwrap();
    let lambda = Weight::from_dynkin_labels(&rs, &[1]).unwrap();
    let h = point(&rs, &[0.0, 0.0]);
    assert!(matches!(weyl_character(&rs, &lambda, &h), Err(Error::Degenerate { .. })));
}

use crate::rootsys::rat_frac;

#[test]
fn coadjoint_volume_values() {
    let a1 = build_root_system(Family::A, 1).unwrap();
    for a in [0.25, 1.0, 3.5] {
        let v = coadjoint_volume(&a1, &point(&a1, &[a, -a])).unwrap();
        assert!((v - 2.0 * a).abs() < 1e-14);
    }
    let a2 = build_root_system(Family::A, 2).unwrap();
    let v = coadjoint_volume(&a2, &point(&a2, &[1.0, 0.0, -1.0])).unwrap();
    assert!((v - 1.0).abs() < 1e-13);
    // Homogeneity of degree r.
    let h = point(&a2, &[0.9, 0.1, -1.0]);
    let base = coadjoint_volume(&a2, &h).unwrap();
    for s in [0.5, 2.0, 3.0] {
        let scaled = coadjoint_volume(&a2, &h.scaled(c(s))).unwrap();
        assert!((scaled / base - s.powi(3)).abs() < 1e-12);
    }
    assert!(coadjoint_volume(&a1, &point(&a1, &[-1.0, 1.0])).is_err());
    assert!(matches!(coadjoint_volume(&a1, &point(&a1, &[0.0, 0.0])), Err(Error::Degenerate { .. })));
}

#[test]
fn record_serializes() {
    let rec = ClosedFormRecord::new(serde_json::json!({"a": [0, 1]}), c(1.5), Formula::HcizDeterminant);
    let v = serde_json::to_value(&rec).unwrap();
    assert_eq!(v["method"], "closed_form");
    assert_eq!(v["formula"], "hciz_determinant");
}
