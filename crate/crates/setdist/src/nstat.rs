//! Kernel matrices over pooled two-sample data and the unbiased
//! U-statistic estimate of the squared N-distance,
//!
//! `N̂ = 2/(m₁m₂) Σ_{i∈A,j∈B} L_ij − 1/(m₁(m₁−1)) Σ_{i,j∈A} L_ij
//!      − 1/(m₂(m₂−1)) Σ_{i,j∈B} L_ij`,
//!
//! with the within-group sums running over all ordered pairs including
//! `i = j`, verbatim. For vanishing-diagonal kernels that is identical to
//! the `i ≠ j` sums; the Gaussian/Cauchy 0.5 diagonal adds a constant that
//! does not change permutation comparisons (constant shifts of the whole
//! matrix leave N̂ unchanged).
//!
//! The matrix is cached once so each permutation re-evaluation is a pure
//! `O((m₁+m₂)²)` read.

use crate::error::{Error, Result};
use crate::geometry::SupportVector;
use crate::kernels::{kernel_eval_diff, KernelSpec};
use crate::summation::CompensatedSum;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Two labeled groups of support vectors on a shared grid.
#[derive(Debug, Clone)]
pub struct SampleSet {
    group_a: Vec<SupportVector>,
    group_b: Vec<SupportVector>,
}

impl SampleSet {
    /// Both groups need at least 2 vectors (the U-statistic divides by
    /// `m(m-1)`) and all vectors must share one grid.
    pub fn new(group_a: Vec<SupportVector>, group_b: Vec<SupportVector>) -> Result<Self> {
        if group_a.len() < 2 {
            return Err(Error::GroupTooSmall(group_a.len()));
        }
        if group_b.len() < 2 {
            return Err(Error::GroupTooSmall(group_b.len()));
        }
        let n = group_a[0].dim();
        for v in group_a.iter().chain(&group_b) {
            if v.dim() != n {
                return Err(Error::GridMismatch(n, v.dim()));
            }
        }
        Ok(SampleSet { group_a, group_b })
    }

    pub fn group_a(&self) -> &[SupportVector] {
        &self.group_a
    }

    pub fn group_b(&self) -> &[SupportVector] {
        &self.group_b
    }

    pub fn m1(&self) -> usize {
        self.group_a.len()
    }

    pub fn m2(&self) -> usize {
        self.group_b.len()
    }

    pub fn dim(&self) -> usize {
        self.group_a[0].dim()
    }

    /// Pooled view: group A then group B.
    pub fn pooled(&self) -> impl Iterator<Item = &SupportVector> {
        self.group_a.iter().chain(&self.group_b)
    }
}

/// Dense symmetric cache of `L(pooled[i], pooled[j])`.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    size: usize,
    m1: usize,
    entries: Vec<f64>,
    spec: KernelSpec,
}

impl KernelMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    /// Size of group A in the original labeling.
    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.size - self.m1
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    /// CSV dump (debugging aid): one row per pooled index.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.size {
            let row: Vec<String> = (0..self.size).map(|j| self.get(i, j).to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn matrix_row(row: usize, vals: &[Vec<f64>], spec: &KernelSpec, diag: f64) -> Result<Vec<f64>> {
    // Upper triangle only; the caller mirrors it, making symmetry exact.
    let size = vals.len();
    let mut out = vec![0.0; size];
    out[row] = diag;
    let mut d = vec![0.0; vals[row].len()];
    for j in (row + 1)..size {
        for (slot, (a, b)) in d.iter_mut().zip(vals[row].iter().zip(&vals[j])) {
            *slot = a - b;
        }
        out[j] = kernel_eval_diff(spec, &d)?;
    }
    Ok(out)
}

fn assemble(size: usize, m1: usize, spec: &KernelSpec, rows: Vec<Vec<f64>>) -> KernelMatrix {
    let mut entries = vec![0.0; size * size];
    for (i, row) in rows.iter().enumerate() {
        for j in i..size {
            entries[i * size + j] = row[j];
            entries[j * size + i] = row[j];
        }
    }
    KernelMatrix {
        size,
        m1,
        entries,
        spec: spec.clone(),
    }
}

fn pooled_values(s: &SampleSet) -> Vec<Vec<f64>> {
    s.pooled().map(|v| v.values().to_vec()).collect()
}

fn diagonal_value(spec: &KernelSpec) -> f64 {
    if spec.vanishes_on_diagonal() {
        0.0
    } else {
        0.5
    }
}

/// Kernel matrix over the pooled sample, sequential path.
///
/// Entries are computed for `i <= j` only and mirrored, so symmetry is
/// exact by construction.
pub fn kernel_matrix_seq(s: &SampleSet, spec: &KernelSpec) -> Result<KernelMatrix> {
    spec.validate(s.dim())?;
    let vals = pooled_values(s);
    let diag = diagonal_value(spec);
    let rows = (0..vals.len())
        .map(|i| matrix_row(i, &vals, spec, diag))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(vals.len(), s.m1(), spec, rows))
}

/// Kernel matrix over the pooled sample; rows are computed in parallel
/// with the `parallel` feature and the result is bit-identical to
/// [`kernel_matrix_seq`].
#[cfg(feature = "parallel")]
pub fn kernel_matrix(s: &SampleSet, spec: &KernelSpec) -> Result<KernelMatrix> {
    spec.validate(s.dim())?;
    let vals = pooled_values(s);
    let diag = diagonal_value(spec);
    let rows = (0..vals.len())
        .into_par_iter()
        .map(|i| matrix_row(i, &vals, spec, diag))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(vals.len(), s.m1(), spec, rows))
}

/// Kernel matrix over the pooled sample (sequential build of this crate).
#[cfg(not(feature = "parallel"))]
pub fn kernel_matrix(s: &SampleSet, spec: &KernelSpec) -> Result<KernelMatrix> {
    kernel_matrix_seq(s, spec)
}

/// Group assignment of the pooled indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    A,
    B,
}

/// The U-statistic on an explicit labeling. `labels[i]` assigns pooled
/// index `i`; counts must equal the matrix's `(m1, m2)`.
///
/// The estimator is unbiased for the squared N-distance and may be
/// negative.
pub fn nhat(matrix: &KernelMatrix, labels: &[Group]) -> Result<f64> {
    if labels.len() != matrix.size() {
        return Err(Error::BadLabels {
            m1: matrix.m1(),
            m2: matrix.m2(),
        });
    }
    let got_m1 = labels.iter().filter(|&&g| g == Group::A).count();
    if got_m1 != matrix.m1() {
        return Err(Error::BadLabels {
            m1: matrix.m1(),
            m2: matrix.m2(),
        });
    }
    Ok(nhat_unchecked(matrix, labels))
}

fn nhat_unchecked(matrix: &KernelMatrix, labels: &[Group]) -> f64 {
    let size = matrix.size();
    let m1 = matrix.m1() as f64;
    let m2 = matrix.m2() as f64;
    let mut cross = CompensatedSum::new();
    let mut within_a = CompensatedSum::new();
    let mut within_b = CompensatedSum::new();
    for i in 0..size {
        for j in 0..size {
            let v = matrix.get(i, j);
            match (labels[i], labels[j]) {
                (Group::A, Group::B) => cross.add(v),
                (Group::A, Group::A) => within_a.add(v),
                (Group::B, Group::B) => within_b.add(v),
                (Group::B, Group::A) => {}
            }
        }
    }
    2.0 / (m1 * m2) * cross.value()
        - within_a.value() / (m1 * (m1 - 1.0))
        - within_b.value() / (m2 * (m2 - 1.0))
}

/// N̂ after relabeling: the first `m1` entries of `permutation` (indices
/// into the pooled sample) become group A, the rest group B. Pure read of
/// the cached matrix; no kernel re-evaluation.
pub fn nhat_permuted(matrix: &KernelMatrix, permutation: &[usize]) -> Result<f64> {
    let size = matrix.size();
    if permutation.len() != size {
        return Err(Error::BadPermutation(size));
    }
    let mut seen = vec![false; size];
    for &p in permutation {
        if p >= size || seen[p] {
            return Err(Error::BadPermutation(size));
        }
        seen[p] = true;
    }
    let mut labels = vec![Group::B; size];
    for &p in &permutation[..matrix.m1()] {
        labels[p] = Group::A;
    }
    Ok(nhat_unchecked(matrix, &labels))
}
