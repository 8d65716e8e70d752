mod common;

use common::*;
use loora::design::DesignSpec;
use loora::estimators::*;
use loora::inference::*;
use loora::oracle::Population;

#[test]
fn ht_sandwich_equals_simplified_form() {
    let mut r = rng(50);
    for _ in 0..20 {
        let pop = population(&mut r, 25, 3);
        let spec = DesignSpec::simple(probabilities(&mut r, 25)).unwrap();
        let d: Vec<bool> = (0..25).map(|_| normal(&mut r) > 0.0).collect();
        let s = observed(&pop, &spec, d);
        let a = hw_variance_ht(&s, LambdaRule::Auto(2.0)).unwrap();
        let b = hw_variance_ht_sandwich(&s, LambdaRule::Auto(2.0)).unwrap();
        assert!(rel_err(a, b) <= 1e-12);
    }
}

#[test]
fn auxiliary_slope_reproduces_loora_dm() {
    let mut r = rng(51);
    for trial in 0..50 {
        let n = 12 + trial;
        let nt = 3 + trial % (n - 6);
        let pop = population(&mut r, n, 1 + trial % 4);
        let spec = DesignSpec::complete(n, nt).unwrap();
        let s = observed(&pop, &spec, random_assignment_complete(&mut r, n, nt));
        let u = dm_adjusted_outcomes(&s, LambdaRule::Auto(2.0)).unwrap();
        let aux = dm_auxiliary_regression(&u, s.d()).unwrap();
        let tau = estimate_loora_dm(&s, LambdaRule::Auto(2.0)).unwrap();
        assert!((aux.slope - tau).abs() <= 1e-10 * (1.0 + tau.abs()));
    }
}

#[test]
fn auxiliary_variance_equals_arm_sums() {
    let mut r = rng(52);
    let n = 30;
    let d = random_assignment_complete(&mut r, n, 11);
    let u = gaussian_vec(&mut r, n);
    let aux = dm_auxiliary_regression(&u, &d).unwrap();
    let arm = |a: bool| {
        let v: Vec<f64> = (0..n).filter(|&i| d[i] == a).map(|i| u[i]).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64).powi(2)
    };
    assert!(rel_err(aux.slope_variance, arm(true) + arm(false)) <= 1e-12);
}

#[test]
fn dm_report_invariant_to_outcome_shift() {
    let mut r = rng(53);
    let pop = population(&mut r, 20, 2);
    let shifted = Population::new(pop.x.clone(), pop.y1.iter().map(|v| v + 7.0).collect(), pop.y0.iter().map(|v| v + 7.0).collect()).unwrap();
    let spec = DesignSpec::complete(20, 9).unwrap();
    let d = random_assignment_complete(&mut r, 20, 9);
    for id in [EstimatorId::Dm, EstimatorId::Adj, EstimatorId::Int, EstimatorId::RidgeReg] {
        let a = estimate_report(&observed(&pop, &spec, d.clone()), id, LambdaRule::Auto(2.0), 0.9).unwrap();
        let b = estimate_report(&observed(&shifted, &spec, d.clone()), id, LambdaRule::Auto(2.0), 0.9).unwrap();
        assert!((a.tau_hat - b.tau_hat).abs() <= 1e-10, "{id}");
        assert!(rel_err(a.var_hat, b.var_hat) <= 1e-9, "{id}");
    }
}

#[test]
fn interval_width_scales_with_quantile() {
    let mut r = rng(55);
    let pop = population(&mut r, 40, 2);
    let spec = DesignSpec::simple_uniform(40, 0.5).unwrap();
    let d: Vec<bool> = (0..40).map(|_| normal(&mut r) > 0.0).collect();
    let s = observed(&pop, &spec, d);
    let a = estimate_report(&s, EstimatorId::LooraHt, LambdaRule::Auto(2.0), 0.8).unwrap();
    let b = estimate_report(&s, EstimatorId::LooraHt, LambdaRule::Auto(2.0), 0.99).unwrap();
    let ratio = (b.ci_high - b.ci_low) / (a.ci_high - a.ci_low);
    assert!((ratio - normal_quantile(0.995) / normal_quantile(0.9)).abs() <= 1e-12);
    assert_eq!(a.tau_hat, b.tau_hat);
    assert!(((a.ci_high + a.ci_low) / 2.0 - a.tau_hat).abs() <= 1e-12);
}

#[test]
fn reports_cover_every_method() {
    let mut r = rng(56);
    let pop = population(&mut r, 30, 3);
    let simple = DesignSpec::simple(probabilities(&mut r, 30)).unwrap();
    let complete = DesignSpec::complete(30, 14).unwrap();
    let ds: Vec<bool> = (0..30).map(|i| i % 3 == 0 || i % 5 == 1).collect();
    let dc = random_assignment_complete(&mut r, 30, 14);
    for id in EstimatorId::ALL {
        let s = if id.wants_simple() { observed(&pop, &simple, ds.clone()) } else { observed(&pop, &complete, dc.clone()) };
        let rep = estimate_report(&s, id, LambdaRule::Auto(2.0), 0.95).unwrap();
        assert_eq!(rep.method, id);
        assert!(rep.var_hat.is_finite() && rep.var_hat > 0.0, "{id}");
        assert!(rep.ci_low < rep.tau_hat && rep.tau_hat < rep.ci_high);
        assert_eq!(rep.tau_hat, estimate(&s, id, LambdaRule::Auto(2.0)).unwrap());
    }
}

#[test]
fn quantile_matches_reference_values() {
    for (p, z) in [
        (0.975, 1.959963984540054),
        (0.995, 2.5758293035489004),
        (0.9, 1.2815515655446004),
        (1e-10, -6.361340902404056),
        (0.5, 0.0),
    ] {
        assert!((normal_quantile(p) - z).abs() <= 1e-13, "p={p}");
    }
}
