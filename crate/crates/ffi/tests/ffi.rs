use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use loora::design::DesignSpec;
use loora::estimators::{EstimatorId, LambdaRule, ObservedSample};
use loora::inference::estimate_report;
use loora::oracle::{loora_dm_variance, loora_ht_variance, DmVarianceOptions};
use loora::simulation::{synth_population, PopulationKind};
use loora_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(loora_last_error()) }.to_string_lossy().into_owned()
}

fn row_major(x: &loora::linalg::DesignMatrix) -> Vec<f64> {
    (0..x.nrows()).flat_map(|i| x.row(i)).collect()
}

struct Sample(*mut LooraSample);

impl Drop for Sample {
    fn drop(&mut self) {
        unsafe { loora_sample_free(self.0) }
    }
}

fn complete(x: &[f64], n: usize, k: usize, y: &[f64], d: &[u8]) -> Result<Sample, LooraStatus> {
    let mut out = ptr::null_mut();
    let st = unsafe { loora_sample_new_complete(x.as_ptr(), n, k, y.as_ptr(), d.as_ptr(), &mut out) };
    if st == LooraStatus::Ok {
        Ok(Sample(out))
    } else {
        assert!(out.is_null());
        Err(st)
    }
}

fn estimate(s: &Sample, method: u32, kind: u32, value: f64) -> Result<LooraEstimate, LooraStatus> {
    let mut e = LooraEstimate::default();
    match unsafe { loora_estimate(s.0, method, kind, value, 0.95, &mut e) } {
        LooraStatus::Ok => Ok(e),
        st => Err(st),
    }
}

#[test]
fn two_unit_ht() {
    let (x, y, d, p) = ([1.0, 1.0], [3.0, 1.0], [1u8, 0], [0.5, 0.5]);
    let mut s = ptr::null_mut();
    let st = unsafe { loora_sample_new_simple(x.as_ptr(), 2, 1, y.as_ptr(), d.as_ptr(), p.as_ptr(), &mut s) };
    assert_eq!(st, LooraStatus::Ok, "{}", last_error());
    let s = Sample(s);
    let e = estimate(&s, LOORA_METHOD_HT, LOORA_LAMBDA_FIXED, 0.0).unwrap();
    assert_eq!(e.tau_hat, 2.0);
    assert_eq!(e.level, 0.95);
    assert!(last_error().is_empty());
    assert_eq!(loora_last_error_row(), -1);
}

#[test]
fn matches_rust_api_for_every_complete_method() {
    let pop = synth_population(PopulationKind::LinearHeterogeneous, 40, 3, 11).unwrap();
    let d: Vec<bool> = (0..40).map(|i| i % 3 == 0).collect();
    let y = pop.outcomes(&d);
    let x = row_major(&pop.x);
    let d8: Vec<u8> = d.iter().map(|&b| b as u8).collect();
    let s = complete(&x, 40, 3, &y, &d8).unwrap();

    let n_t = d.iter().filter(|b| **b).count();
    let rust = ObservedSample::from_d(pop.x.clone(), y.clone(), d, DesignSpec::complete(40, n_t).unwrap()).unwrap();
    for (code, id) in [
        (LOORA_METHOD_DM, EstimatorId::Dm),
        (LOORA_METHOD_ADJ, EstimatorId::Adj),
        (LOORA_METHOD_INT, EstimatorId::Int),
        (LOORA_METHOD_RIDGE_REG, EstimatorId::RidgeReg),
        (LOORA_METHOD_LOORA_DM, EstimatorId::LooraDm),
    ] {
        let got = estimate(&s, code, LOORA_LAMBDA_AUTO, 2.0).unwrap();
        let want = estimate_report(&rust, id, LambdaRule::Auto(2.0), 0.95).unwrap();
        assert_eq!(got.tau_hat, want.tau_hat, "{id}");
        assert_eq!(got.var_hat, want.var_hat, "{id}");
        assert_eq!((got.ci_low, got.ci_high), (want.ci_low, want.ci_high), "{id}");
        assert_eq!(got.lambda_used, want.lambda_used, "{id}");
    }
}

#[test]
fn exact_variances_match_oracles() {
    let pop = synth_population(PopulationKind::LinearHeterogeneous, 12, 2, 4).unwrap();
    let x = row_major(&pop.x);
    let mut h = ptr::null_mut();
    let st = unsafe { loora_population_new(x.as_ptr(), 12, 2, pop.y1.as_ptr(), pop.y0.as_ptr(), &mut h) };
    assert_eq!(st, LooraStatus::Ok);

    let mut tau = f64::NAN;
    assert_eq!(unsafe { loora_population_tau(h, &mut tau) }, LooraStatus::Ok);
    assert_eq!(tau, pop.tau());

    let p: Vec<f64> = (0..12).map(|i| 0.3 + 0.03 * i as f64).collect();
    let mut v = f64::NAN;
    assert_eq!(unsafe { loora_ht_exact_variance(h, p.as_ptr(), 0.5, &mut v) }, LooraStatus::Ok);
    assert_eq!(v, loora_ht_variance(&pop, &p, 0.5).unwrap());

    assert_eq!(unsafe { loora_dm_exact_variance(h, 5, 0.5, &mut v) }, LooraStatus::Ok);
    assert_eq!(v, loora_dm_variance(&pop, 5, 0.5, DmVarianceOptions::default()).unwrap());

    assert_eq!(unsafe { loora_dm_exact_variance(h, 0, 0.5, &mut v) }, LooraStatus::InvalidInput);
    unsafe { loora_population_free(h) };
}

#[test]
fn null_pointers_are_rejected() {
    let mut out = ptr::null_mut();
    let y = [1.0, 2.0];
    let d = [1u8, 0];
    let st = unsafe { loora_sample_new_complete(ptr::null(), 2, 1, y.as_ptr(), d.as_ptr(), &mut out) };
    assert_eq!(st, LooraStatus::NullPointer);
    assert!(last_error().contains('x'));

    let mut e = LooraEstimate::default();
    assert_eq!(unsafe { loora_estimate(ptr::null(), 0, 0, 0.0, 0.95, &mut e) }, LooraStatus::NullPointer);
    let mut tau = 0.0;
    assert_eq!(unsafe { loora_population_tau(ptr::null(), &mut tau) }, LooraStatus::NullPointer);

    let x = [1.0, 1.0];
    let st = unsafe { loora_sample_new_complete(x.as_ptr(), 2, 1, y.as_ptr(), d.as_ptr(), ptr::null_mut()) };
    assert_eq!(st, LooraStatus::NullPointer);

    unsafe {
        loora_sample_free(ptr::null_mut());
        loora_population_free(ptr::null_mut());
    }
}

#[test]
fn invalid_codes_and_values() {
    let x = [1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0];
    let y = [1.0, 2.0, 3.0, 5.0];
    let s = complete(&x, 4, 2, &y, &[1, 0, 1, 0]).unwrap();
    assert_eq!(estimate(&s, 99, 0, 0.0), Err(LooraStatus::InvalidInput));
    assert!(last_error().contains("99"));
    assert_eq!(estimate(&s, LOORA_METHOD_DM, 7, 0.0), Err(LooraStatus::InvalidInput));
    assert_eq!(estimate(&s, LOORA_METHOD_DM, LOORA_LAMBDA_FIXED, -1.0), Err(LooraStatus::InvalidInput));
    assert_eq!(estimate(&s, LOORA_METHOD_DM, LOORA_LAMBDA_FIXED, f64::NAN), Err(LooraStatus::InvalidInput));
    assert_eq!(estimate(&s, LOORA_METHOD_HT, LOORA_LAMBDA_FIXED, 0.0), Err(LooraStatus::SpecMismatch));

    assert_eq!(complete(&x, 4, 2, &y, &[1, 0, 2, 0]).err(), Some(LooraStatus::InvalidInput));
    assert_eq!(loora_last_error_row(), 2);
    let bad_y = [1.0, f64::INFINITY, 3.0, 5.0];
    assert!(complete(&x, 4, 2, &bad_y, &[1, 0, 1, 0]).is_err());
}

#[test]
fn singular_leverage_reports_row() {
    let n = 8;
    let x: Vec<f64> = (0..n).map(|i| if i == 3 { 1.0 } else { 0.0 }).collect();
    let y: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let d: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let s = complete(&x, n, 1, &y, &d).unwrap();
    assert_eq!(estimate(&s, LOORA_METHOD_LOORA_DM, LOORA_LAMBDA_FIXED, 0.0), Err(LooraStatus::Numeric));
    assert_eq!(loora_last_error_row(), 3);
    assert!(last_error().contains("row 3"));

    estimate(&s, LOORA_METHOD_LOORA_DM, LOORA_LAMBDA_FIXED, 1.0).unwrap();
    assert_eq!(loora_last_error_row(), -1);
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(loora_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

const USAGE: &str = r#"
#include "loora.h"
#include <stdio.h>

int main(void) {
    const double x[4] = {1.0, 1.0, 1.0, 1.0};
    const double y[4] = {3.0, 1.0, 4.0, 2.0};
    const uint8_t d[4] = {1, 0, 1, 0};
    LooraSample *s = NULL;
    LooraEstimate e;
    if (loora_sample_new_complete(x, 4, 1, y, d, &s) != LOORA_STATUS_OK) {
        fprintf(stderr, "%s (row %lld)\n", loora_last_error(), (long long)loora_last_error_row());
        return 1;
    }
    LooraStatus st = loora_estimate(s, LOORA_METHOD_DM, LOORA_LAMBDA_AUTO, 2.0, 0.95, &e);
    loora_sample_free(s);
    printf("%s %f [%f, %f]\n", loora_version(), e.tau_hat, e.ci_low, e.ci_high);
    return st == LOORA_STATUS_OK ? 0 : 1;
}
"#;

#[test]
fn header_compiles_as_c_and_cpp() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("loora.h").is_file(), "header was not generated");
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let src = dir.join("loora_usage.c");
    std::fs::write(&src, USAGE).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    for lang in ["c", "c++"] {
        let o = Command::new(&cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg("-I")
            .arg(&include)
            .arg(&src)
            .output()
            .expect("a C compiler is required for this test");
        assert!(o.status.success(), "{lang}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
