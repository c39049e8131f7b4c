//! The two test procedures on a two-sample set of support vectors: the
//! permutation test on the N-distance U-statistic, and the three-way split
//! test that reduces to a univariate KS or AD two-sample comparison.
//!
//! Permutation replicates are independent given their derived RNG
//! sub-streams (replicate `i` uses sub-stream `i` of the caller's seed),
//! so they may run in parallel and the p-value does not depend on
//! execution order.

use crate::error::{Error, Result};
use crate::kernels::{kernel_eval, KernelSpec};
use crate::nstat::{kernel_matrix, kernel_matrix_seq, nhat, nhat_permuted, Group, SampleSet};
use crate::rng::stream_rng;
use rand::seq::SliceRandom;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Which univariate two-sample test the split procedure applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UniTest {
    Ks,
    Ad,
}

/// Test procedure tag carried in results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Permutation,
    SplitKs,
    SplitAd,
}

/// Outcome of a two-sample test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: TestMethod,
    pub statistic: f64,
    pub p_value: f64,
    /// Permutation count `s`; 0 for the split methods.
    pub replicates: usize,
    pub seed: u64,
    pub kernel: KernelSpec,
}

/// Below this group size the asymptotic statistics of the split test are
/// unreliable and callers should prefer the permutation test.
pub const SPLIT_RECOMMENDED_MIN_M: usize = 120;

fn count_exceedances<I>(iter: I, matrix: &crate::nstat::KernelMatrix, observed: f64) -> usize
where
    I: Iterator<Item = rand_chacha::ChaCha8Rng>,
{
    iter.map(|mut rng| {
        let mut perm: Vec<usize> = (0..matrix.size()).collect();
        perm.shuffle(&mut rng);
        let replicate = nhat_permuted(matrix, &perm).expect("permutation is valid");
        usize::from(replicate >= observed)
    })
    .sum()
}

fn permutation_result(
    spec: &KernelSpec,
    s: usize,
    seed: u64,
    count: usize,
    observed: f64,
) -> TestResult {
    TestResult {
        method: TestMethod::Permutation,
        statistic: observed,
        p_value: (count + 1) as f64 / (s + 1) as f64,
        replicates: s,
        seed,
        kernel: spec.clone(),
    }
}

/// Permutation test on N̂: `p = (#{i : N̂⁽ⁱ⁾ ≥ N̂} + 1)/(s + 1)`.
///
/// Replicate `i` (1-based) draws its permutation from sub-stream `i` of
/// `seed`, so results are bit-reproducible and independent of the number
/// of worker threads.
#[cfg(feature = "parallel")]
pub fn permutation_test(
    s_set: &SampleSet,
    spec: &KernelSpec,
    s: usize,
    seed: u64,
) -> Result<TestResult> {
    if s < 1 {
        return Err(Error::NoPermutations);
    }
    let matrix = kernel_matrix(s_set, spec)?;
    let observed = nhat(&matrix, &identity_labels(s_set))?;
    let count: usize = (1..=s as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let mut perm: Vec<usize> = (0..matrix.size()).collect();
            perm.shuffle(&mut rng);
            let replicate = nhat_permuted(&matrix, &perm).expect("permutation is valid");
            usize::from(replicate >= observed)
        })
        .sum();
    Ok(permutation_result(spec, s, seed, count, observed))
}

/// Permutation test on N̂ (sequential build of this crate).
#[cfg(not(feature = "parallel"))]
pub fn permutation_test(
    s_set: &SampleSet,
    spec: &KernelSpec,
    s: usize,
    seed: u64,
) -> Result<TestResult> {
    permutation_test_seq(s_set, spec, s, seed)
}

/// Sequential permutation test; bit-identical to [`permutation_test`].
pub fn permutation_test_seq(
    s_set: &SampleSet,
    spec: &KernelSpec,
    s: usize,
    seed: u64,
) -> Result<TestResult> {
    if s < 1 {
        return Err(Error::NoPermutations);
    }
    let matrix = kernel_matrix_seq(s_set, spec)?;
    let observed = nhat(&matrix, &identity_labels(s_set))?;
    let count = count_exceedances((1..=s as u64).map(|i| stream_rng(seed, i)), &matrix, observed);
    Ok(permutation_result(spec, s, seed, count, observed))
}

fn identity_labels(s_set: &SampleSet) -> Vec<Group> {
    let mut labels = vec![Group::B; s_set.m1() + s_set.m2()];
    for l in labels.iter_mut().take(s_set.m1()) {
        *l = Group::A;
    }
    labels
}

/// Three-way split test. Each group is shuffled (sub-streams 0 and 1 of
/// `seed`), cut into thirds A',A'',A''' and B',B'',B''', and the paired
/// differences
///
/// `U_i = L(A'_i, B'_i) − L(A'_i, A''_i)`,
/// `V_i = L(B''_i, B'''_i) − L(A'''_i, B'''_i)`
///
/// are compared with the chosen univariate two-sample test. Under the
/// null U and V are equally distributed; under the alternative their
/// means differ by the squared N-distance.
///
/// Requires `m₁ = m₂ = m` with `m` divisible by 3 and `m/3 >= 8`; for
/// `m <` [`SPLIT_RECOMMENDED_MIN_M`] the asymptotic p-values are rough
/// and the permutation test is the better tool.
pub fn split_test(
    s_set: &SampleSet,
    spec: &KernelSpec,
    uni: UniTest,
    seed: u64,
) -> Result<TestResult> {
    let m = s_set.m1();
    if s_set.m2() != m || !m.is_multiple_of(3) {
        return Err(Error::BadSplit);
    }
    let third = m / 3;
    if third < 8 {
        return Err(Error::SplitTooSmall(m));
    }
    spec.validate(s_set.dim())?;

    let mut idx_a: Vec<usize> = (0..m).collect();
    let mut idx_b: Vec<usize> = (0..m).collect();
    idx_a.shuffle(&mut stream_rng(seed, 0));
    idx_b.shuffle(&mut stream_rng(seed, 1));

    // Sub-samples are consumed in index order after the shuffle.
    let a = s_set.group_a();
    let b = s_set.group_b();
    let mut u = Vec::with_capacity(third);
    let mut v = Vec::with_capacity(third);
    for i in 0..third {
        let a1 = &a[idx_a[i]];
        let a2 = &a[idx_a[third + i]];
        let a3 = &a[idx_a[2 * third + i]];
        let b1 = &b[idx_b[i]];
        let b2 = &b[idx_b[third + i]];
        let b3 = &b[idx_b[2 * third + i]];
        u.push(kernel_eval(spec, a1, b1)? - kernel_eval(spec, a1, a2)?);
        v.push(kernel_eval(spec, b2, b3)? - kernel_eval(spec, a3, b3)?);
    }

    let (statistic, p_value, method) = match uni {
        UniTest::Ks => {
            let (d, p) = ks_two_sample(&u, &v)?;
            (d, p, TestMethod::SplitKs)
        }
        UniTest::Ad => {
            let (a2, p) = ad_two_sample(&u, &v)?;
            (a2, p, TestMethod::SplitAd)
        }
    };
    Ok(TestResult {
        method,
        statistic,
        p_value,
        replicates: 0,
        seed,
        kernel: spec.clone(),
    })
}

/// Two-sample Kolmogorov–Smirnov test.
///
/// `D` is the supremum of |ECDF_x − ECDF_y| over the pooled points (both
/// one-sided jump limits are covered by evaluating after each distinct
/// pooled value). The p-value uses the asymptotic Kolmogorov distribution
/// at `λ = sqrt(ne) D` with effective size `ne = |x||y|/(|x|+|y|)`:
/// `p = 2 Σ_{k>=1} (−1)^{k−1} exp(−2k²λ²)`, truncated once terms drop
/// below 1e-12 and clamped to [0, 1].
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);

    let nx = xs.len() as f64;
    let ny = ys.len() as f64;
    let mut i = 0;
    let mut j = 0;
    let mut d = 0.0f64;
    while i < xs.len() || j < ys.len() {
        let v = match (xs.get(i), ys.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        let diff = (i as f64 / nx - j as f64 / ny).abs();
        d = d.max(diff);
    }

    let ne = nx * ny / (nx + ny);
    Ok((d, kolmogorov_tail(ne.sqrt() * d)))
}

fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut p = 0.0;
    let mut sign = 1.0;
    for k in 1..100_000u32 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        p += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * p).clamp(0.0, 1.0)
}

// Scholz–Stephens percentile table for the standardized statistic at
// m = k − 1 = 1: critical values b0 + b1/sqrt(m) + b2/m per significance
// level.
const AD_SIG: [f64; 7] = [0.25, 0.10, 0.05, 0.025, 0.01, 0.005, 0.001];
const AD_B0: [f64; 7] = [0.675, 1.281, 1.645, 1.960, 2.326, 2.573, 3.085];
const AD_B1: [f64; 7] = [-0.245, 0.250, 0.678, 1.149, 1.822, 2.364, 3.615];
const AD_B2: [f64; 7] = [-0.105, -0.305, -0.362, -0.391, -0.396, -0.345, -0.154];

/// Two-sample Anderson–Darling test in the rank form
///
/// `A² = 1/(mn) Σ_{i=1}^{N−1} (M_i N − i m)² / (i (N−i))`
///
/// with `N = m + n` and `M_i` the number of x-values among the `i`
/// smallest pooled values; ties follow the midrank convention (within a
/// tie block the x-count accrues proportionally). The p-value
/// standardizes the statistic with the Scholz–Stephens variance and
/// interpolates the published asymptotic percentiles; outside the table
/// it is capped to [0.001, 0.25].
pub fn ad_two_sample(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::GroupTooSmall(x.len().min(y.len())));
    }
    let m = x.len();
    let n_total = m + y.len();

    // Pooled sort with source labels.
    let mut pooled: Vec<(f64, bool)> = x
        .iter()
        .map(|&v| (v, true))
        .chain(y.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mf = m as f64;
    let nf = (n_total - m) as f64;
    let nn = n_total as f64;

    let mut a2 = 0.0;
    let mut m_before = 0.0f64; // x-count before the current tie block
    let mut pos = 0usize;
    while pos < n_total {
        let mut end = pos;
        while end < n_total && pooled[end].0 == pooled[pos].0 {
            end += 1;
        }
        let block = (end - pos) as f64;
        let bx = pooled[pos..end].iter().filter(|(_, fx)| *fx).count() as f64;
        for off in 0..(end - pos) {
            let i = pos + off + 1; // global rank of this position
            if i == n_total {
                break;
            }
            let mi = m_before + bx * (off + 1) as f64 / block;
            let ifl = i as f64;
            let num = mi * nn - ifl * mf;
            a2 += num * num / (ifl * (nn - ifl));
        }
        m_before += bx;
        pos = end;
    }
    a2 /= mf * nf;

    Ok((a2, ad_p_value(a2, m, n_total - m)))
}

fn ad_p_value(a2: f64, m: usize, n: usize) -> f64 {
    let k = 2.0f64;
    let nn = (m + n) as f64;
    let h = 1.0 / m as f64 + 1.0 / n as f64;
    let hsum: f64 = (1..(m + n)).map(|i| 1.0 / i as f64).sum();
    // g = Σ_{i=1}^{N−2} (1/(N−i)) Σ_{j=i+1}^{N−1} 1/j via harmonic prefixes.
    let mut g = 0.0;
    {
        let total = m + n;
        let mut suffix = 0.0; // Σ_{j=i+1}^{N−1} 1/j, built from the top
        for i in (1..=(total - 2)).rev() {
            suffix += 1.0 / (i + 1) as f64;
            g += suffix / (total - i) as f64;
        }
    }
    let a = (4.0 * g - 6.0) * (k - 1.0) + (10.0 - 6.0 * g) * h;
    let b = (2.0 * g - 4.0) * k * k + 8.0 * hsum * k + (2.0 * g - 14.0 * hsum - 4.0) * h
        - 8.0 * hsum
        + 4.0 * g
        - 6.0;
    let c = (6.0 * hsum + 2.0 * g - 2.0) * k * k + (4.0 * hsum - 4.0 * g + 6.0) * k
        + (2.0 * hsum - 6.0) * h
        + 4.0 * hsum;
    let d = (2.0 * hsum + 6.0) * k * k - 4.0 * hsum * k;
    let var = (a * nn.powi(3) + b * nn.powi(2) + c * nn + d)
        / ((nn - 1.0) * (nn - 2.0) * (nn - 3.0));
    if var <= 0.0 {
        return 1.0;
    }
    let t = (a2 - (k - 1.0)) / var.sqrt();

    let tm: Vec<f64> = (0..7).map(|i| AD_B0[i] + AD_B1[i] + AD_B2[i]).collect();
    if t < tm[0] {
        return 0.25;
    }
    if t > tm[6] {
        return 0.001;
    }
    // Quadratic least-squares fit of ln(sig) against the critical values,
    // evaluated at the standardized statistic.
    let coeffs = quad_fit(&tm, &AD_SIG.map(f64::ln));
    (coeffs[0] + coeffs[1] * t + coeffs[2] * t * t)
        .exp()
        .clamp(0.001, 0.25)
}

/// Least-squares quadratic through (xs, ys): returns [c0, c1, c2].
fn quad_fit(xs: &[f64], ys: &[f64]) -> [f64; 3] {
    let mut xtx = [[0.0f64; 3]; 3];
    let mut xty = [0.0f64; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let row = [1.0, x, x * x];
        for i in 0..3 {
            for j in 0..3 {
                xtx[i][j] += row[i] * row[j];
            }
            xty[i] += row[i] * y;
        }
    }
    // Gaussian elimination with partial pivoting on the 3x3 system.
    let mut aug = [[0.0f64; 4]; 3];
    for i in 0..3 {
        aug[i][..3].copy_from_slice(&xtx[i]);
        aug[i][3] = xty[i];
    }
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
            .unwrap();
        aug.swap(col, pivot);
        for row in (col + 1)..3 {
            let f = aug[row][col] / aug[col][col];
            let pivot_row = aug[col];
            for (k, slot) in aug[row].iter_mut().enumerate().skip(col) {
                *slot -= f * pivot_row[k];
            }
        }
    }
    let mut out = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut v = aug[row][3];
        for k in (row + 1)..3 {
            v -= aug[row][k] * out[k];
        }
        out[row] = v / aug[row][row];
    }
    out
}
