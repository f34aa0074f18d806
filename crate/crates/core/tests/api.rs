use halfweight_core::autfactors::{j_half, j_m_star};
use halfweight_core::report::trial_rng;
use halfweight_core::suites::{run_suite, Suite, SuiteConfig};
use halfweight_core::theta::{theta_eval, ThetaParams};
use halfweight_core::weilrep::{covariant_map, weil_action};
use halfweight_core::{
    meta_jacobi_mul, random_siegel, random_word, word_element, CMat, ElementJson, IndexMatrix, JacobiPoint, WordOptions,
};
use num_complex::Complex64;

fn point(n: usize, m: usize, seed: u64) -> JacobiPoint {
    let z = CMat::from_fn(m, n, |i, j| Complex64::new(0.2 * (i as f64 - j as f64), 0.1));
    JacobiPoint::new(random_siegel(n, seed), z).unwrap()
}

#[test]
fn element_json_round_trip_preserves_factors() {
    let opts = WordOptions { integral: false, heisenberg: true, random_sheets: true };
    let word = random_word(&mut trial_rng(3, 0), 2, 1, 4, opts);
    let x = word_element(&word, 2, 1).unwrap();
    let text = serde_json::to_string(&ElementJson::from_meta_jacobi(&x)).unwrap();
    let back: ElementJson = serde_json::from_str(&text).unwrap();
    let y = back.to_meta_jacobi(2, 1).unwrap();
    let p = point(2, 1, 5);
    let index = IndexMatrix::identity(1);
    let (a, b) = (j_m_star(&x, &p, &index).unwrap(), j_m_star(&y, &p, &index).unwrap());
    assert!((a - b).norm() < 1e-12 * a.norm());
}

#[test]
fn star_factor_is_a_cocycle_through_the_public_api() {
    let opts = WordOptions { integral: false, heisenberg: true, random_sheets: true };
    let mut rng = trial_rng(4, 0);
    let index = IndexMatrix::identity(1);
    for _ in 0..20 {
        let x1 = word_element(&random_word(&mut rng, 1, 1, 3, opts), 1, 1).unwrap();
        let x2 = word_element(&random_word(&mut rng, 1, 1, 3, opts), 1, 1).unwrap();
        let p = point(1, 1, 6);
        let lhs = j_m_star(&meta_jacobi_mul(&x1, &x2).unwrap(), &p, &index).unwrap();
        let rhs = j_m_star(&x1, &x2.act(&p).unwrap(), &index).unwrap() * j_m_star(&x2, &p, &index).unwrap();
        assert!((lhs - rhs).norm() < 1e-9 * lhs.norm());
        let h = j_half(&x1.base, &p.omega).unwrap();
        assert!(h.is_finite());
    }
}

#[test]
fn gaussians_stay_in_family() {
    let index = IndexMatrix::identity(1);
    let p = point(2, 1, 8);
    let g = covariant_map(&p.omega, &p.z, &index).unwrap();
    let opts = WordOptions { integral: false, heisenberg: true, random_sheets: true };
    for w in random_word(&mut trial_rng(9, 0), 2, 1, 5, opts) {
        let h = weil_action(&w, &g).unwrap();
        assert_eq!((h.n(), h.m()), (2, 1));
        assert!(h.coeff.is_finite());
    }
}

#[test]
fn theta_is_even_in_z() {
    let params = ThetaParams::new(IndexMatrix::identity(1), 1e-12).unwrap();
    let p = point(2, 1, 10);
    let q = JacobiPoint::new(p.omega.clone(), -p.z.clone()).unwrap();
    let (a, b) = (theta_eval(&p, &params).unwrap().value, theta_eval(&q, &params).unwrap().value);
    assert!((a - b).norm() < 1e-10 * a.norm().max(1.0));
}

#[test]
fn suite_reports_are_reproducible() {
    let mut cfg = SuiteConfig::new(Suite::Cocycle);
    cfg.trials = Some(30);
    cfg.seed = 21;
    cfg.timing = false;
    let a = run_suite(&cfg).unwrap();
    cfg.jobs = 3;
    let b = run_suite(&cfg).unwrap();
    assert_eq!(a.to_json(false), b.to_json(false));
    assert!(a.pass);
}
