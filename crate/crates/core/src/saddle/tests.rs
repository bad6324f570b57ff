use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::closedform::hc_rhs;
use crate::groups::{mc_orbital_integral, GroupFamily};
use crate::numeric::relative_error;

fn spec(f: GroupFamily, n: usize) -> CompactGroupSpec {
    CompactGroupSpec::new(f, n).unwrap()
}

fn random_point(rs: &RootSystem, rng: &mut ChaCha8Rng) -> CartanPoint {
    loop {
        let u: Vec<f64> = (0..rs.rank()).map(|_| rng.random_range(-1.5..1.5)).collect();
        let p = CartanPoint::from_orthonormal(rs, &u);
        let m = rs.root_values(p.coords()).iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if m >= 0.3 {
            return p;
        }
    }
}

/// Found values must be exactly the closed-form list (as sets, to 1e-6).
fn assert_values_match(search: &CriticalSearch, mut want: Vec<f64>) {
    want.sort_by(|a, b| b.total_cmp(a));
    want.dedup_by(|a, b| (*a - *b).abs() < CLUSTER_TOL);
    let got: Vec<f64> = search.points.iter().map(|p| p.value).collect();
    assert_eq!(got.len(), want.len(), "got {got:?}, want {want:?}");
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-6, "got {got:?}, want {want:?}");
    }
    assert_eq!(search.spurious, 0);
    assert!(!search.incomplete_cover);
    assert!(search.points.iter().all(|p| p.residual_gradient_norm < 1e-8));
}

#[test]
fn su2_two_critical_values() {
    let s = spec(GroupFamily::SU, 2);
    let rs = s.root_system();
    let h1 = CartanPoint::real(rs, &[0.8, -0.8]).unwrap();
    let h2 = CartanPoint::real(rs, &[0.5, -0.5]).unwrap();
    let search = find_critical_points(&s, &h1, &h2, 40, 1).unwrap();
    assert_values_match(&search, vec![0.8, -0.8]);
    let signs: Vec<_> = search.points.iter().map(|p| p.weyl_sign).collect();
    assert_eq!(signs, vec![Some(1), Some(-1)]);
}

#[test]
fn su3_and_so5_cover_the_weyl_orbit() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for (f, n) in [(GroupFamily::SU, 3), (GroupFamily::SO, 5), (GroupFamily::USp, 4)] {
        let s = spec(f, n);
        let rs = s.root_system();
        let h1 = random_point(rs, &mut rng);
        let h2 = random_point(rs, &mut rng);
        let starts = min_starts(rs).unwrap();
        let search = find_critical_points(&s, &h1, &h2, starts, 3).unwrap();
        assert_values_match(&search, closed_form_critical_values(rs, &h1, &h2).unwrap());
    }
}

use rand::SeedableRng;

#[test]
fn critical_values_scale_with_h2() {
    let s = spec(GroupFamily::SU, 3);
    let rs = s.root_system();
    let h1 = CartanPoint::real(rs, &[1.0, 0.2, -1.2]).unwrap();
    let h2 = CartanPoint::real(rs, &[0.7, -0.3, -0.4]).unwrap();
    let base = find_critical_points(&s, &h1, &h2, 120, 5).unwrap();
    let scaled = find_critical_points(&s, &h1, &h2.scaled(Complex64::new(2.5, 0.0)), 120, 5).unwrap();
    assert_eq!(base.points.len(), scaled.points.len());
    for (a, b) in base.points.iter().zip(&scaled.points) {
        assert!((2.5 * a.value - b.value).abs() < 1e-8);
    }
}

#[test]
fn su2_hessian_is_plus_minus_4ab() {
    let s = spec(GroupFamily::SU, 2);
    let rs = s.root_system();
    let (a, b) = (0.9, 0.6);
    let h1 = CartanPoint::real(rs, &[a, -a]).unwrap();
    let h2 = CartanPoint::real(rs, &[b, -b]).unwrap();
    let search = find_critical_points(&s, &h1, &h2, 40, 2).unwrap();
    let top = hessian_determinant_check(&s, &search.points[0], &h1, &h2, HESSIAN_STEP).unwrap();
    let bottom = hessian_determinant_check(&s, &search.points[1], &h1, &h2, HESSIAN_STEP).unwrap();
    assert!((top.sqrt_det - 4.0 * a * b).abs() < 1e-6, "{top:?}");
    assert!((bottom.sqrt_det + 4.0 * a * b).abs() < 1e-6, "{bottom:?}");
}

#[test]
fn hessian_identity_holds_with_eigenvalue_signs() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
    for (f, n) in [(GroupFamily::SU, 3), (GroupFamily::SO, 5)] {
        let s = spec(f, n);
        let rs = s.root_system();
        let h1 = random_point(rs, &mut rng);
        let h2 = random_point(rs, &mut rng);
        let search = find_critical_points(&s, &h1, &h2, min_starts(rs).unwrap(), 4).unwrap();
        let pi = (rs.discriminant_value(h1.coords()) * rs.discriminant_value(h2.coords())).re;
        for cp in &search.points {
            let chk = hessian_determinant_check(&s, cp, &h1, &h2, HESSIAN_STEP).unwrap();
            assert!(chk.rel_error < 1e-4, "{}: {chk:?}", s.label());
            assert!(chk.richardson_rel_error < 1e-4);
            let measured_sign = chk.sqrt_det.signum() * pi.signum();
            assert_eq!(measured_sign, f64::from(cp.weyl_sign.unwrap()));
            assert!(chk.pair_mismatch < 1e-4);
        }
    }
}

#[test]
fn rejects_bad_inputs() {
    let s = spec(GroupFamily::SU, 2);
    let rs = s.root_system();
    let h1 = CartanPoint::real(rs, &[0.8, -0.8]).unwrap();
    let zero = CartanPoint::real(rs, &[0.0, 0.0]).unwrap();
    assert!(matches!(find_critical_points(&s, &h1, &zero, 40, 0), Err(Error::Degenerate { .. })));
    assert!(matches!(find_critical_points(&s, &h1, &h1, 39, 0), Err(Error::Argument(_))));
    let z = CartanPoint::new(rs, vec![Complex64::new(0.1, 0.2), Complex64::new(-0.1, -0.2)]).unwrap();
    assert!(find_critical_points(&s, &h1, &z, 40, 0).is_err());
}

#[test]
fn stationary_phase_is_exact() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
    for (f, n) in [(GroupFamily::SU, 2), (GroupFamily::SU, 3), (GroupFamily::SO, 5), (GroupFamily::USp, 6)] {
        let s = spec(f, n);
        let rs = s.root_system();
        let h1 = random_point(rs, &mut rng);
        let h2 = random_point(rs, &mut rng);
        for t in [0.2, 1.0, 5.0] {
            let sp = stationary_phase_estimate(rs, &h1, &h2, t).unwrap();
            let closed = hc_rhs(rs, &h1, &h2.scaled(Complex64::new(1.0 / t, 0.0))).unwrap();
            assert!(relative_error(sp, closed) < 1e-12, "{} t={t}: {sp} vs {closed}", s.label());
        }
    }
}

#[test]
fn stationary_phase_matches_monte_carlo() {
    let s = spec(GroupFamily::SU, 2);
    let rs = s.root_system();
    let h1 = CartanPoint::real(rs, &[0.6, -0.6]).unwrap();
    let h2 = CartanPoint::real(rs, &[0.4, -0.4]).unwrap();
    for t in [1.0, 0.2] {
        let sp = stationary_phase_estimate(rs, &h1, &h2, t).unwrap();
        let mc = mc_orbital_integral(&s, &h1, &h2, t, 200_000, 6).unwrap();
        assert!((mc.mean - sp).norm() <= 3.0 * mc.stderr, "t={t}: {sp} vs {mc:?}");
    }
}

#[test]
fn algebra_dimensions() {
    assert_eq!(spec(GroupFamily::SU, 2).root_system().algebra_dim(), 3);
    assert_eq!(spec(GroupFamily::SU, 3).root_system().algebra_dim(), 8);
    assert_eq!(spec(GroupFamily::SO, 5).root_system().algebra_dim(), 10);
}

#[test]
fn report_shape() {
    let s = spec(GroupFamily::SU, 2);
    let rs = s.root_system();
    let h1 = CartanPoint::real(rs, &[0.8, -0.8]).unwrap();
    let h2 = CartanPoint::real(rs, &[0.5, -0.5]).unwrap();
    let search = find_critical_points(&s, &h1, &h2, 40, 1).unwrap();
    let checks: Vec<_> =
        search.points.iter().map(|p| hessian_determinant_check(&s, p, &h1, &h2, HESSIAN_STEP).ok()).collect();
    let rep = SaddleReport::new(&search, closed_form_critical_values(rs, &h1, &h2).unwrap(), &checks);
    let v = serde_json::to_value(&rep).unwrap();
    assert_eq!(v["critical_values"].as_array().unwrap().len(), 2);
    assert_eq!(v["matched_weyl_signs"], serde_json::json!([1, -1]));
    assert!(v["hessian_rel_errors"][0].as_f64().unwrap() < 1e-4);
}
