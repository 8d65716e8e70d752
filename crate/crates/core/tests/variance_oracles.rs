mod common;

use common::*;
use loora::design::DesignSpec;
use loora::estimators::*;
use loora::oracle::*;

fn half(n: usize) -> Vec<f64> {
    vec![0.5; n]
}

#[test]
fn loora_ht_variance_matches_enumeration() {
    let mut r = rng(30);
    for n in 4..=7 {
        for k in 1..=2 {
            let pop = population(&mut r, n, k);
            for p in [half(n), probabilities(&mut r, n)] {
                let spec = DesignSpec::simple(p.clone()).unwrap();
                let xt = ht_tilde_design(&pop.x, &p).unwrap();
                for rule in [LambdaRule::Fixed(0.0), LambdaRule::Auto(2.0)] {
                    let lam = rule.resolve(&xt).unwrap();
                    if lam == 0.0 && n <= k + 1 {
                        continue;
                    }
                    let exact = loora_ht_variance(&pop, &p, lam).unwrap();
                    let m = enumeration_moments(&pop, &spec, EstimatorId::LooraHt, LambdaRule::Fixed(lam)).unwrap();
                    assert!(rel_err(exact, m.variance) <= 1e-10, "n={n} k={k} lam={lam}: {exact} vs {}", m.variance);
                }
            }
        }
    }
}

#[test]
fn loora_dm_variance_matches_enumeration() {
    let mut r = rng(31);
    let opts = DmVarianceOptions { allow_n4: true };
    for n in 4..=8 {
        for k in 1..=2 {
            let pop = population(&mut r, n, k);
            for nt in 2..=n - 2 {
                let spec = DesignSpec::complete(n, nt).unwrap();
                for rule in [LambdaRule::Fixed(0.0), LambdaRule::Auto(2.0), LambdaRule::Fixed(0.3)] {
                    let lam = rule.resolve(&pop.x).unwrap();
                    if lam == 0.0 && n <= k + 2 {
                        continue;
                    }
                    let exact = loora_dm_variance(&pop, nt, lam, opts).unwrap();
                    let m = enumeration_moments(&pop, &spec, EstimatorId::LooraDm, LambdaRule::Fixed(lam)).unwrap();
                    assert!(
                        rel_err(exact, m.variance) <= 1e-10,
                        "n={n} n_T={nt} k={k} lam={lam}: {exact} vs {}",
                        m.variance
                    );
                }
            }
        }
    }
}

#[test]
fn loora_dm_variance_needs_five_units_by_default() {
    let mut r = rng(32);
    let pop = population(&mut r, 4, 1);
    assert!(loora_dm_variance(&pop, 2, 1.0, DmVarianceOptions::default()).is_err());
    assert!(loora_dm_variance(&pop, 2, 1.0, DmVarianceOptions { allow_n4: true }).is_ok());
    let pop = population(&mut r, 6, 1);
    assert!(loora_dm_variance(&pop, 1, 1.0, DmVarianceOptions::default()).is_err());
}

#[test]
fn fault_in_q_breaks_agreement() {
    let mut r = rng(33);
    let pop = population(&mut r, 6, 1);
    let spec = DesignSpec::complete(6, 3).unwrap();
    let lam = LambdaRule::Auto(2.0).resolve(&pop.x).unwrap();
    let m = enumeration_moments(&pop, &spec, EstimatorId::LooraDm, LambdaRule::Fixed(lam)).unwrap();
    let fault = QFault { block: (1, 0), j: 0, l: 1, delta: 0.5 };
    let bad = loora_dm_variance_terms(&pop, 3, lam, DmVarianceOptions::default(), Some(fault)).unwrap().total();
    assert!(rel_err(bad, m.variance) > 1e-6);
}

#[test]
fn q_term_vanishes_without_covariates() {
    let mut r = rng(34);
    let pop = population(&mut r, 7, 2);
    let zero = pop.with_covariates(matrix(&vec![vec![0.0, 0.0]; 7])).unwrap();
    let t = loora_dm_variance_terms(&zero, 3, 1.0, DmVarianceOptions::default(), None).unwrap();
    assert_eq!(t.t2, 0.0);
    assert_eq!(t.t3, 0.0);
    assert!(rel_err(t.t1, dm_variance(&zero, 3).unwrap()) <= 1e-12);
}

#[test]
fn dm_variance_forms_agree_and_match_enumeration() {
    let mut r = rng(35);
    for n in 3..=9 {
        let pop = population(&mut r, n, 1);
        for nt in 1..n {
            let a = dm_variance(&pop, nt).unwrap();
            let b = dm_variance_neyman(&pop, nt).unwrap();
            assert!(rel_err(a, b) <= 1e-12);
            let spec = DesignSpec::complete(n, nt).unwrap();
            let m = enumeration_moments(&pop, &spec, EstimatorId::Dm, LambdaRule::default()).unwrap();
            assert!(rel_err(a, m.variance) <= 1e-11);
        }
    }
}

#[test]
fn ht_variance_matches_enumeration() {
    let mut r = rng(36);
    for n in 2..=8 {
        let pop = population(&mut r, n, 1);
        let p = probabilities(&mut r, n);
        let spec = DesignSpec::simple(p.clone()).unwrap();
        let m = enumeration_moments(&pop, &spec, EstimatorId::Ht, LambdaRule::default()).unwrap();
        assert!(rel_err(ht_variance(&pop, &p).unwrap(), m.variance) <= 1e-11);
    }
}

#[test]
fn fixed_adjustment_variances_match_enumeration() {
    let mut r = rng(37);
    let pop = population(&mut r, 6, 2);
    let b = [0.3, -0.8];
    let p = probabilities(&mut r, 6);
    let simple = DesignSpec::simple(p.clone()).unwrap();
    let (_, v) = brute_moments(&simple, |d| estimate_ht_fixed_adjustment(&observed(&pop, &simple, d.to_vec()), &b).unwrap());
    assert!(rel_err(adjusted_ht_variance(&pop, &p, &b).unwrap(), v) <= 1e-11);

    let complete = DesignSpec::complete(6, 2).unwrap();
    let (_, v) = brute_moments(&complete, |d| estimate_dm_fixed_adjustment(&observed(&pop, &complete, d.to_vec()), &b).unwrap());
    assert!(rel_err(dm_adjusted_variance(&pop, 2, &b).unwrap(), v) <= 1e-11);
}

#[test]
fn optimal_fixed_adjustments_are_minimal() {
    let mut r = rng(38);
    let pop = population(&mut r, 20, 3);
    let p = probabilities(&mut r, 20);
    let (b, vmin) = adjusted_ht_optimal(&pop, &p).unwrap();
    let (g, wmin) = dm_projection_minimum(&pop, 8).unwrap();
    for _ in 0..50 {
        let e: Vec<f64> = (0..3).map(|_| 0.1 * normal(&mut r)).collect();
        let bp: Vec<f64> = b.iter().zip(&e).map(|(a, c)| a + c).collect();
        assert!(adjusted_ht_variance(&pop, &p, &bp).unwrap() >= vmin * (1.0 - 1e-12));
        let gp: Vec<f64> = g.iter().zip(&e).map(|(a, c)| a + c).collect();
        assert!(dm_adjusted_variance(&pop, 8, &gp).unwrap() >= wmin * (1.0 - 1e-12));
    }
    assert!(vmin <= ht_variance(&pop, &p).unwrap());
    assert!(wmin <= dm_variance(&pop, 8).unwrap());
}

#[test]
fn lin_variance_forms_agree() {
    let mut r = rng(39);
    for trial in 0..20 {
        let n = 10 + 3 * trial;
        let pop = population(&mut r, n, 1 + trial % 4);
        let pt = 0.2 + 0.03 * trial as f64;
        let v = lin_asymptotic_variance(&pop, pt).unwrap();
        assert!(rel_err(v.value, v.projection) <= 1e-10);
    }
}

#[test]
fn equal_probability_ht_terms_match_projection_scaled() {
    // with equal p the fixed HT optimum is n^-1 times the Lin projection at that p
    let mut r = rng(40);
    let plain = population(&mut r, 40, 3);
    let pop = plain.with_covariates(plain.x.with_intercept()).unwrap();
    for p in [0.3, 0.5, 0.65] {
        let pv = vec![p; 40];
        let (_, vmin) = adjusted_ht_optimal(&pop, &pv).unwrap();
        let lin = lin_asymptotic_variance(&plain, p).unwrap();
        assert!(rel_err(vmin * 40.0, lin.projection) <= 1e-10, "p={p}");
    }
}

#[test]
fn cross_term_decreases_with_lambda() {
    let mut r = rng(41);
    for _ in 0..30 {
        let n = 15;
        let pop = population(&mut r, n, 4);
        let p = probabilities(&mut r, n);
        let grid = [0.0, 0.5, 1.0, 3.0, 10.0, 30.0, 100.0, 1e3, 1e5];
        let cross: Vec<f64> = grid.iter().map(|&l| loora_ht_variance_terms(&pop, &p, l).unwrap().cross).collect();
        for w in cross.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10));
        }
        assert!(cross[grid.len() - 1] <= 1e-4 * cross[0]);
    }
}

#[test]
fn leverage_controlled_cross_term_bound() {
    // with lambda = c ||X~||^2 every 1/(1 - h~) is at most (1 + c)/c, and the
    // Frobenius bound on off-diagonal hat mass gives the n^-2 k max(t/r)^2 scale
    let mut r = rng(42);
    for c in [0.5, 1.0, 2.0, 5.0] {
        let n = 25;
        let k = 3;
        let pop = population(&mut r, n, k);
        let p = probabilities(&mut r, n);
        let sig = HtSignal::new(&pop, &p).unwrap();
        let lam = LambdaRule::Auto(c).resolve(&sig.x_tilde).unwrap();
        let terms = loora_ht_variance_terms(&pop, &p, lam).unwrap();
        let m = (0..n).map(|i| (sig.t[i] / sig.r[i]).abs()).fold(0.0, f64::max);
        let bound = 4.0 * ((1.0 + c) / c).powi(2) * m * m * k as f64 / 2.0 / (n * n) as f64;
        assert!(terms.cross <= bound * (1.0 + 1e-12), "c={c}");
    }
}

#[test]
fn loora_ht_approaches_fixed_optimum() {
    let mut r = rng(43);
    let n = 400;
    let pop = population(&mut r, n, 2);
    let p = vec![0.5; n];
    let (_, opt) = adjusted_ht_optimal(&pop, &p).unwrap();
    let v = loora_ht_variance(&pop, &p, 0.0).unwrap();
    assert!(v >= opt * 0.9);
    assert!(rel_err(v, opt) <= 0.05, "{v} vs {opt}");
}
