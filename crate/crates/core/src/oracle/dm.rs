//! Difference-in-means variances under complete random assignment.
//!
//! The leave-one-out variance splits as `T1 + T2 + T3`. Write
//! `R_i = (mu~_i - x_i' beta) / (1 - h_ii)` with `beta` the ridge fit of `mu~` on `X`.
//! The estimator error is then `U + W` with
//!
//! ```text
//! U = n^-1 sum_i a_i R_i,                       a_i = 1/n_T or -1/n_C
//! W = -n^-1 sum_{i != j} M_ij c(d_i, d_j) t^(d_i)_j,  M_ij = h_ij / (1 - h_ii)
//! ```
//!
//! where `c(1,1) = 1/(n_T(n_T-1))`, `c(0,0) = 1/(n_C(n_C-1))`, `c(1,0) = c(0,1) = -1/(n_T n_C)`,
//! and `t^(1)`, `t^(0)` are the two signal vectors of [`DmSignal`]. `T1 = E[U^2]` and
//! `T2 = 2 E[UW]` have short closed forms. `T3 = E[W^2]` is a quadratic form
//! `sum_{a,c} t^(a)' Q^(ac) t^(c) / n^2` whose entries are sums of products of `M`
//! weighted by joint inclusion probabilities of at most four distinct units.

use nalgebra::{DMatrix, DVector};

use super::Population;
use crate::error::{Error, Result};
use crate::linalg::{penalized_least_squares, RidgeSystem};
use crate::numeric::{falling, mean, sum, Accumulator};

/// Largest `n` for which the four `Q` blocks are stored; above it they are streamed.
pub const Q_MATERIALIZE_MAX_N: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct DmSignal {
    /// `n_C y1 + n_T y0`.
    pub mu_tilde: Vec<f64>,
    /// `n_C^2 y1 - n_T (n_T - 1) y0`.
    pub t1: Vec<f64>,
    /// `n_C (n_C - 1) y1 - n_T^2 y0`.
    pub t0: Vec<f64>,
}

impl DmSignal {
    pub fn new(pop: &Population, n_t: usize) -> Result<Self> {
        let (nt, nc) = counts(pop, n_t)?;
        let (ntf, ncf) = (nt as f64, nc as f64);
        let n = pop.n();
        Ok(Self {
            mu_tilde: (0..n).map(|i| ncf * pop.y1[i] + ntf * pop.y0[i]).collect(),
            t1: (0..n)
                .map(|i| ncf * ncf * pop.y1[i] - ntf * (ntf - 1.0) * pop.y0[i])
                .collect(),
            t0: (0..n)
                .map(|i| ncf * (ncf - 1.0) * pop.y1[i] - ntf * ntf * pop.y0[i])
                .collect(),
        })
    }
}

fn counts(pop: &Population, n_t: usize) -> Result<(usize, usize)> {
    let n = pop.n();
    if n_t < 1 || n_t >= n {
        return Err(Error::ParameterOutOfRange(format!(
            "need 1 <= n_T <= n - 1, got n_T = {n_t} with n = {n}"
        )));
    }
    Ok((n_t, n - n_t))
}

fn centered_sq(v: &[f64]) -> f64 {
    let m = mean(v);
    sum(v.iter().map(|x| (x - m).powi(2)))
}

/// `||mu~ - mean(mu~)||^2 / (n_T n_C n (n - 1))`.
pub fn dm_variance(pop: &Population, n_t: usize) -> Result<f64> {
    let (nt, nc) = counts(pop, n_t)?;
    let s = DmSignal::new(pop, n_t)?;
    let n = pop.n() as f64;
    Ok(centered_sq(&s.mu_tilde) / (nt as f64 * nc as f64 * n * (n - 1.0)))
}

/// `S^2(y1)/n_T + S^2(y0)/n_C - S^2(y1 - y0)/n` with `n - 1` divisors.
pub fn dm_variance_neyman(pop: &Population, n_t: usize) -> Result<f64> {
    let (nt, nc) = counts(pop, n_t)?;
    let n = pop.n() as f64;
    let tau: Vec<f64> = pop.y1.iter().zip(&pop.y0).map(|(a, b)| a - b).collect();
    let s2 = |v: &[f64]| centered_sq(v) / (n - 1.0);
    Ok(s2(&pop.y1) / nt as f64 + s2(&pop.y0) / nc as f64 - s2(&tau) / n)
}

/// Variance of DM applied to `y - X b`: the centered form with `mu~ - n X b`.
pub fn dm_adjusted_variance(pop: &Population, n_t: usize, b: &[f64]) -> Result<f64> {
    let (nt, nc) = counts(pop, n_t)?;
    if b.len() != pop.k() {
        return Err(Error::InvalidInput("coefficient length mismatch".into()));
    }
    let s = DmSignal::new(pop, n_t)?;
    let xb = pop.x.as_matrix() * DVector::from_column_slice(b);
    let n = pop.n() as f64;
    let v: Vec<f64> = (0..pop.n()).map(|i| s.mu_tilde[i] - n * xb[i]).collect();
    Ok(centered_sq(&v) / (nt as f64 * nc as f64 * n * (n - 1.0)))
}

/// Best fixed adjustment: minimizes `||(X - Xbar) g - (mu~ - mean mu~)||^2` over `g`.
///
/// Returns `b = g / n`, in the units accepted by [`dm_adjusted_variance`], and the
/// minimal variance.
pub fn dm_projection_minimum(pop: &Population, n_t: usize) -> Result<(Vec<f64>, f64)> {
    let s = DmSignal::new(pop, n_t)?;
    let xc = pop.x.centered();
    let m = mean(&s.mu_tilde);
    let mc: Vec<f64> = s.mu_tilde.iter().map(|v| v - m).collect();
    let fit = penalized_least_squares(&xc, &mc, &vec![0.0; pop.k()])?;
    let n = pop.n() as f64;
    let b: Vec<f64> = fit.beta.iter().map(|g| g / n).collect();
    let v = dm_adjusted_variance(pop, n_t, &b)?;
    Ok((b, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DmVarianceOptions {
    /// Accept `n = 4`; by default `n >= 5` is required.
    pub allow_n4: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmVarianceTerms {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

impl DmVarianceTerms {
    pub fn total(&self) -> f64 {
        self.t1 + self.t2 + self.t3
    }
}

/// Corrupts one entry of `Q`; exists only to prove the verification suite can fail.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QFault {
    pub block: (usize, usize),
    pub j: usize,
    pub l: usize,
    pub delta: f64,
}

pub fn loora_dm_variance(pop: &Population, n_t: usize, lambda: f64, opts: DmVarianceOptions) -> Result<f64> {
    loora_dm_variance_terms(pop, n_t, lambda, opts, None).map(|t| t.total())
}

struct Setup {
    n: usize,
    nt: usize,
    nc: usize,
    h: DMatrix<f64>,
    hb: Vec<f64>,
    r: Vec<f64>,
    mu: Vec<f64>,
    t: [Vec<f64>; 2],
}

fn setup(pop: &Population, n_t: usize, lambda: f64, opts: DmVarianceOptions) -> Result<Setup> {
    let (nt, nc) = counts(pop, n_t)?;
    let n = pop.n();
    let min_n = if opts.allow_n4 { 4 } else { 5 };
    if nt < 2 || nc < 2 || n < min_n {
        return Err(Error::ParameterOutOfRange(format!(
            "exact leave-one-out DM variance needs n_T, n_C >= 2 and n >= {min_n}, got n = {n}, n_T = {nt}"
        )));
    }
    let sig = DmSignal::new(pop, n_t)?;
    let sys = RidgeSystem::new(&pop.x, lambda)?;
    sys.check_leverage()?;
    let h = sys.hat_full();
    let hb: Vec<f64> = (0..n).map(|i| 1.0 - h[(i, i)]).collect();
    let fitted = sys.fitted(&sig.mu_tilde);
    let r = (0..n).map(|i| (sig.mu_tilde[i] - fitted[i]) / hb[i]).collect();
    Ok(Setup {
        n,
        nt,
        nc,
        h,
        hb,
        r,
        mu: sig.mu_tilde,
        t: [sig.t0, sig.t1],
    })
}

/// The three terms of the exact leave-one-out DM variance.
#[doc(hidden)]
pub fn loora_dm_variance_terms(
    pop: &Population,
    n_t: usize,
    lambda: f64,
    opts: DmVarianceOptions,
    fault: Option<QFault>,
) -> Result<DmVarianceTerms> {
    let s = setup(pop, n_t, lambda, opts)?;
    let n = s.n as f64;
    let (ntf, ncf) = (s.nt as f64, s.nc as f64);

    let t1 = centered_sq(&s.r) / (n * (n - 1.0) * ntf * ncf);

    // A = sum_{i != j} R_i h_ij mu~_i / hb_j
    // B = sum_{i != j} sum_{k != i, j} R_i h_jk mu~_k / hb_j, reduced to O(n^2) via
    //     G_j = sum_{k != j} h_jk mu~_k / hb_j.
    let nn = s.n;
    let g: Vec<f64> = (0..nn)
        .map(|j| sum((0..nn).filter(|&k| k != j).map(|k| s.h[(j, k)] * s.mu[k])) / s.hb[j])
        .collect();
    let gsum = sum(g.iter().copied());
    let mut a = Accumulator::new();
    let mut b = Accumulator::new();
    for i in 0..nn {
        let inner = sum((0..nn).filter(|&j| j != i).map(|j| s.h[(i, j)] / s.hb[j]));
        let ai = s.r[i] * s.mu[i] * inner;
        a.add(ai);
        b.add(s.r[i] * (gsum - g[i]));
        b.add(-ai);
    }
    let t2 = -2.0 / (n * n * (n - 1.0) * ntf * ncf) * (a.value() - b.value() / (n - 2.0));

    let t3 = q_form(&s, fault) / (n * n);
    Ok(DmVarianceTerms { t1, t2, t3 })
}

/// Pattern weights for one block `(a, c)`.
///
/// Each is `sum_{b,e} c(a,b) c(c,e) P(d_i = a, d_j = b, d_k = c, d_l = e)` for a
/// coincidence pattern among the four indices.
#[derive(Debug, Clone, Copy)]
struct BlockWeights {
    /// all four distinct
    g4: f64,
    /// i = k
    ik: f64,
    /// i = l
    il: f64,
    /// k = j
    kj: f64,
    /// i = l and k = j
    il_kj: f64,
    /// j = l, i != k
    jl: f64,
    /// j = l and i = k
    jl_ik: f64,
}

fn pair_constant(a: usize, b: usize, nt: f64, nc: f64) -> f64 {
    match (a, b) {
        (1, 1) => 1.0 / (nt * (nt - 1.0)),
        (0, 0) => 1.0 / (nc * (nc - 1.0)),
        _ => -1.0 / (nt * nc),
    }
}

/// `P(d_u = v for every (u, v))` under complete assignment; zero on conflicting labels.
fn joint_probability(constraints: &[(usize, usize)], n: usize, nt: usize) -> f64 {
    let mut seen: [Option<usize>; 4] = [None; 4];
    for &(unit, value) in constraints {
        match seen[unit] {
            Some(v) if v != value => return 0.0,
            _ => seen[unit] = Some(value),
        }
    }
    let m = seen.iter().filter(|v| v.is_some()).count();
    let ones = seen.iter().filter(|v| **v == Some(1)).count();
    if ones > nt || m - ones > n - nt {
        return 0.0;
    }
    falling(nt, ones) * falling(n - nt, m - ones) / falling(n, m)
}

fn block_weights(a: usize, c: usize, n: usize, nt: usize, nc: usize) -> BlockWeights {
    let (ntf, ncf) = (nt as f64, nc as f64);
    // positions (i, j, k, l) mapped to unit labels
    let w = |labels: [usize; 4]| {
        let mut tot = 0.0;
        for b in 0..2 {
            for e in 0..2 {
                let cons = [(labels[0], a), (labels[1], b), (labels[2], c), (labels[3], e)];
                tot += pair_constant(a, b, ntf, ncf)
                    * pair_constant(c, e, ntf, ncf)
                    * joint_probability(&cons, n, nt);
            }
        }
        tot
    };
    BlockWeights {
        g4: w([0, 1, 2, 3]),
        ik: w([0, 1, 0, 3]),
        il: w([3, 1, 2, 3]),
        kj: w([0, 1, 1, 3]),
        il_kj: w([3, 1, 1, 3]),
        jl: w([0, 1, 2, 1]),
        jl_ik: w([0, 1, 0, 1]),
    }
}

struct QParts {
    m: DMatrix<f64>,
    colsum: Vec<f64>,
    colsq: Vec<f64>,
    weights: [[BlockWeights; 2]; 2],
}

fn q_parts(s: &Setup) -> QParts {
    let n = s.n;
    let m = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { s.h[(i, j)] / s.hb[i] });
    let colsum = (0..n).map(|j| sum(m.column(j).iter().copied())).collect();
    let colsq = (0..n).map(|j| sum(m.column(j).iter().map(|v| v * v))).collect();
    let weights = [0, 1].map(|a| [0, 1].map(|c| block_weights(a, c, n, s.nt, s.nc)));
    QParts {
        m,
        colsum,
        colsq,
        weights,
    }
}

/// Row `j` of block `(a, c)` given column `j` of `M'M`.
fn q_row(p: &QParts, a: usize, c: usize, j: usize, mtm_j: &[f64], out: &mut [f64]) {
    let w = &p.weights[a][c];
    let m = &p.m;
    let s = &p.colsum;
    for (l, q) in out.iter_mut().enumerate() {
        *q = if l == j {
            w.jl * (s[j] * s[j] - p.colsq[j]) + w.jl_ik * p.colsq[j]
        } else {
            let aa = s[j] - m[(l, j)];
            let bb = s[l] - m[(j, l)];
            let mm = mtm_j[l];
            w.g4 * (aa * bb - mm) + w.ik * mm + w.il * m[(l, j)] * bb + w.kj * m[(j, l)] * aa
                + w.il_kj * m[(l, j)] * m[(j, l)]
        };
    }
}

fn apply_fault(fault: Option<QFault>, a: usize, c: usize, j: usize, row: &mut [f64]) {
    if let Some(f) = fault {
        if f.block == (a, c) && f.j == j && f.l < row.len() {
            row[f.l] += f.delta;
        }
    }
}

fn q_form(s: &Setup, fault: Option<QFault>) -> f64 {
    let p = q_parts(s);
    let n = s.n;
    let mut acc = Accumulator::new();
    let mut row = vec![0.0; n];
    if n <= Q_MATERIALIZE_MAX_N {
        let blocks = materialize(&p, n, fault);
        for a in 0..2 {
            for c in 0..2 {
                let q = &blocks[a][c];
                for j in 0..n {
                    for l in 0..n {
                        acc.add(s.t[a][j] * q[(j, l)] * s.t[c][l]);
                    }
                }
            }
        }
    } else {
        for j in 0..n {
            let mtm_j: Vec<f64> = (p.m.tr_mul(&p.m.column(j))).iter().copied().collect();
            for a in 0..2 {
                for c in 0..2 {
                    q_row(&p, a, c, j, &mtm_j, &mut row);
                    apply_fault(fault, a, c, j, &mut row);
                    for l in 0..n {
                        acc.add(s.t[a][j] * row[l] * s.t[c][l]);
                    }
                }
            }
        }
    }
    acc.value()
}

fn materialize(p: &QParts, n: usize, fault: Option<QFault>) -> [[DMatrix<f64>; 2]; 2] {
    let mtm = p.m.tr_mul(&p.m);
    let mut row = vec![0.0; n];
    [0, 1].map(|a| {
        [0, 1].map(|c| {
            let mut q = DMatrix::zeros(n, n);
            for j in 0..n {
                let col: Vec<f64> = mtm.column(j).iter().copied().collect();
                q_row(p, a, c, j, &col, &mut row);
                apply_fault(fault, a, c, j, &mut row);
                for l in 0..n {
                    q[(j, l)] = row[l];
                }
            }
            q
        })
    })
}

/// The four blocks `Q^(ac)`, indexed `[a][c]` with `a, c = 1` selecting the treated signal.
pub fn dm_q_blocks(
    pop: &Population,
    n_t: usize,
    lambda: f64,
    opts: DmVarianceOptions,
) -> Result<[[DMatrix<f64>; 2]; 2]> {
    let s = setup(pop, n_t, lambda, opts)?;
    let p = q_parts(&s);
    Ok(materialize(&p, s.n, None))
}
