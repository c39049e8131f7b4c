//! Strongly negative definite kernels on n-dimensional support vectors:
//! the three classical kernels (Euclidean power, Gaussian, Cauchy) and the
//! two measure-integrated kernels `L_(n,D)` built from subset integrals of
//! `1 - cos(<t, a>)` against a product weight.
//!
//! The subset kernels sum, over every index subset of size 1..=D, a closed
//! form of the corresponding j-dimensional integral:
//!
//! * exponential weight `exp(-Σ|t_l|/w_l)`: the integral over `R^j`
//!   factorizes into univariate pieces, giving per subset
//!   `Π 2w_l - Π 2w_l/(1 + w_l²a_l²)`;
//! * radial power weight: per subset `(Σ a_l²)^{r/2}`.
//!
//! The orthant recursion ([`orthant_recursion`]) is the alternative route
//! to the exponential-weight integrals and is kept as a validation oracle
//! for the product form; it costs `O(2^j)` sign patterns per subset where
//! the product form costs `O(j)`.

use crate::error::{Error, Result};
use crate::geometry::SupportVector;
use serde::{Deserialize, Serialize};

/// Symmetric positive-definite matrix parameter for the Gaussian and
/// Cauchy kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    dim: usize,
    /// Row-major entries.
    data: Vec<f64>,
}

impl SquareMatrix {
    /// Validates squareness, symmetry and positive definiteness (via a
    /// Cholesky factorization attempt).
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidKernel("V must be a square matrix".into()));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (data[i * dim + j] - data[j * dim + i]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidKernel("V must be symmetric".into()));
                }
            }
        }
        let m = SquareMatrix { dim, data };
        if !m.is_positive_definite() {
            return Err(Error::InvalidKernel("V must be positive definite".into()));
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn is_positive_definite(&self) -> bool {
        // Cholesky without pivoting; fails iff some leading minor is <= 0.
        let n = self.dim;
        let mut l = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.data[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return false;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        true
    }

    /// `d^T V d`.
    pub fn quadratic_form(&self, d: &[f64]) -> f64 {
        debug_assert_eq!(d.len(), self.dim);
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            let row: f64 = self.data[i * n..(i + 1) * n]
                .iter()
                .zip(d)
                .map(|(m, v)| m * v)
                .sum();
            acc += d[i] * row;
        }
        acc
    }
}

/// The matrix parameter of the Gaussian/Cauchy kernels: the CLI accepts
/// only a scaled identity (`v_scale`), the library also takes a full
/// symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum CovSpec {
    ScaledIdentity(f64),
    Full(SquareMatrix),
}

impl CovSpec {
    pub fn quadratic_form(&self, d: &[f64]) -> f64 {
        match self {
            CovSpec::ScaledIdentity(s) => s * d.iter().map(|v| v * v).sum::<f64>(),
            CovSpec::Full(m) => m.quadratic_form(d),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            CovSpec::ScaledIdentity(s) => {
                if !s.is_finite() || *s <= 0.0 {
                    return Err(Error::InvalidKernel(format!(
                        "v_scale must be positive, got {s}"
                    )));
                }
            }
            CovSpec::Full(m) => {
                if m.dim() != n {
                    return Err(Error::DimensionMismatch {
                        expected: m.dim(),
                        got: n,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Tagged choice of strongly negative definite kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpecRepr", into = "KernelSpecRepr")]
pub enum KernelSpec {
    /// `|x - y|^r` with `0 < r < 2`.
    EuclideanPower { r: f64 },
    /// `1 - exp(-(x-y)^T V (x-y) / 2) / 2`.
    Gaussian { v: CovSpec },
    /// `1 - 1 / (2 (1 + (x-y)^T V (x-y)))`.
    Cauchy { v: CovSpec },
    /// Subset-integrated kernel with exponential weight `exp(-Σ|t_i|/w_i)`.
    ExpWeighted { w: Vec<f64>, depth: usize },
    /// Subset-summed radial power kernel `(Σ a²)^{r/2}`.
    RadialPower { r: f64, depth: usize },
}

fn check_power(r: f64) -> Result<()> {
    if !r.is_finite() || r <= 0.0 || r >= 2.0 {
        return Err(Error::InvalidKernel(format!(
            "power r must lie in (0, 2), got {r}"
        )));
    }
    Ok(())
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.is_empty() || w.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::InvalidKernel(
            "weights w must be strictly positive".into(),
        ));
    }
    Ok(())
}

impl KernelSpec {
    pub fn euclidean(r: f64) -> Result<Self> {
        check_power(r)?;
        Ok(KernelSpec::EuclideanPower { r })
    }

    pub fn exp_weighted(w: Vec<f64>, depth: usize) -> Result<Self> {
        check_weights(&w)?;
        if depth < 1 || depth > w.len() {
            return Err(Error::DepthOutOfRange { d: depth, n: w.len() });
        }
        Ok(KernelSpec::ExpWeighted { w, depth })
    }

    pub fn radial_power(r: f64, depth: usize) -> Result<Self> {
        check_power(r)?;
        if depth < 1 {
            return Err(Error::DepthOutOfRange { d: depth, n: depth });
        }
        Ok(KernelSpec::RadialPower { r, depth })
    }

    /// Euclidean distance kernel with `r = 1`.
    pub fn euclidean_default() -> Self {
        KernelSpec::EuclideanPower { r: 1.0 }
    }

    /// Gaussian kernel with `V = 10 I`.
    pub fn gaussian_default() -> Self {
        KernelSpec::Gaussian {
            v: CovSpec::ScaledIdentity(10.0),
        }
    }

    /// Cauchy kernel with `V = I`.
    pub fn cauchy_default() -> Self {
        KernelSpec::Cauchy {
            v: CovSpec::ScaledIdentity(1.0),
        }
    }

    /// Exponential-weight subset kernel with `w_i = 1`, `D = 3`.
    pub fn exp_weighted_default(n: usize) -> Self {
        KernelSpec::ExpWeighted {
            w: vec![1.0; n],
            depth: 3,
        }
    }

    /// Radial power subset kernel with `r = 1`, `D = 3`.
    pub fn radial_power_default() -> Self {
        KernelSpec::RadialPower { r: 1.0, depth: 3 }
    }

    /// The five kernels of the reference study, in study order.
    pub fn study_defaults(n: usize) -> Vec<KernelSpec> {
        vec![
            KernelSpec::euclidean_default(),
            KernelSpec::gaussian_default(),
            KernelSpec::cauchy_default(),
            KernelSpec::exp_weighted_default(n),
            KernelSpec::radial_power_default(),
        ]
    }

    pub fn kind_str(&self) -> &'static str {
        match self {
            KernelSpec::EuclideanPower { .. } => "euclidean",
            KernelSpec::Gaussian { .. } => "gaussian",
            KernelSpec::Cauchy { .. } => "cauchy",
            KernelSpec::ExpWeighted { .. } => "expweighted",
            KernelSpec::RadialPower { .. } => "radialpower",
        }
    }

    /// Whether this kernel vanishes on the diagonal (`L(x,x) = 0`). The
    /// Gaussian and Cauchy forms evaluate to 0.5 there instead; the offset
    /// cancels in the N-distance combination.
    pub fn vanishes_on_diagonal(&self) -> bool {
        !matches!(
            self,
            KernelSpec::Gaussian { .. } | KernelSpec::Cauchy { .. }
        )
    }

    /// Check all parameter invariants against grid size `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            KernelSpec::EuclideanPower { r } => check_power(*r),
            KernelSpec::Gaussian { v } | KernelSpec::Cauchy { v } => v.validate(n),
            KernelSpec::ExpWeighted { w, depth } => {
                check_weights(w)?;
                if w.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: w.len(),
                        got: n,
                    });
                }
                if *depth < 1 || *depth > n {
                    return Err(Error::DepthOutOfRange { d: *depth, n });
                }
                Ok(())
            }
            KernelSpec::RadialPower { r, depth } => {
                check_power(*r)?;
                if *depth < 1 || *depth > n {
                    return Err(Error::DepthOutOfRange { d: *depth, n });
                }
                Ok(())
            }
        }
    }
}

/// Evaluate the kernel on two support vectors from the same grid.
pub fn kernel_eval(spec: &KernelSpec, x: &SupportVector, y: &SupportVector) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::GridMismatch(x.dim(), y.dim()));
    }
    spec.validate(x.dim())?;
    let d: Vec<f64> = x
        .values()
        .iter()
        .zip(y.values())
        .map(|(a, b)| a - b)
        .collect();
    kernel_eval_diff(spec, &d)
}

/// Kernel value as a function of the difference vector. All five forms
/// depend on (x, y) only through `x - y`.
pub(crate) fn kernel_eval_diff(spec: &KernelSpec, d: &[f64]) -> Result<f64> {
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(match spec {
        KernelSpec::EuclideanPower { r } => {
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            norm.powf(*r)
        }
        KernelSpec::Gaussian { v } => 1.0 - 0.5 * (-0.5 * v.quadratic_form(d)).exp(),
        KernelSpec::Cauchy { v } => 1.0 - 0.5 / (1.0 + v.quadratic_form(d)),
        KernelSpec::ExpWeighted { w, depth } => exp_weighted_l(d, w, *depth)?,
        KernelSpec::RadialPower { r, depth } => radial_power_l(d, *r, *depth)?,
    })
}

/// `L_(n,D)` with the exponential product weight:
///
/// `Σ_{j=1..D} Σ_{S ⊆ {1..n}, |S|=j} [ Π_{l∈S} 2w_l − Π_{l∈S} 2w_l/(1+w_l²a_l²) ]`.
///
/// Each subset term equals `Π 2w_l · (1 − Π 1/(1+(w_l a_l)²))`; the second
/// factor is evaluated as `-expm1(-Σ ln1p((w_l a_l)²))` so small `a` lose
/// no relative precision. All terms are nonnegative, and the sum is zero
/// iff `a = 0`.
pub fn exp_weighted_l(a: &[f64], w: &[f64], depth: usize) -> Result<f64> {
    let n = a.len();
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: n,
        });
    }
    check_weights(w)?;
    if depth < 1 || depth > n {
        return Err(Error::DepthOutOfRange { d: depth, n });
    }
    let two_w: Vec<f64> = w.iter().map(|&wl| 2.0 * wl).collect();
    let log_damp: Vec<f64> = a
        .iter()
        .zip(w)
        .map(|(&al, &wl)| (wl * al).powi(2).ln_1p())
        .collect();

    // Depth-first over subsets, carrying the running weight product and
    // damping-log sum.
    fn visit(
        start: usize,
        left: usize,
        prod_w: f64,
        sum_log: f64,
        two_w: &[f64],
        log_damp: &[f64],
        acc: &mut f64,
    ) {
        for l in start..two_w.len() {
            let p = prod_w * two_w[l];
            let s = sum_log + log_damp[l];
            *acc += p * (-(-s).exp_m1());
            if left > 1 {
                visit(l + 1, left - 1, p, s, two_w, log_damp, acc);
            }
        }
    }

    let mut acc = 0.0;
    visit(0, depth, 1.0, 0.0, &two_w, &log_damp, &mut acc);
    Ok(acc)
}

/// Orthant integrals
/// `I_c(k) = ∫_{[0,∞)^k} cos(Σ a_j t_j) Π exp(-t_j/w_j) dt` and `I_s(k)`
/// with sine, by the 2×2 matrix recursion
///
/// `[I_c(k); I_s(k)] = w_k/(1+(w_k a_k)²) · [[1, -w_k a_k], [w_k a_k, 1]] · [I_c(k-1); I_s(k-1)]`
///
/// started from `I_c(0) = 1`, `I_s(0) = 0`, which gives the base case
/// `I_c(1) = w_1/(1+(w_1 a_1)²)`, `I_s(1) = w_1²a_1/(1+(w_1 a_1)²)`.
///
/// Note the `w_1` factor in `I_c(1)`: it follows from
/// `∫_0^∞ cos(b+at) e^{-t/w} dt = w(cos b − wa sin b)/(1+w²a²)` at `b = 0`,
/// and is confirmed by quadrature (`I_c` at `a=1, w=2` is 2/5, see tests).
pub fn orthant_recursion(a: &[f64], w: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() {
        return Err(Error::EmptySample);
    }
    if w.len() != a.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: a.len(),
        });
    }
    check_weights(w)?;
    let (mut c, mut s) = (1.0f64, 0.0f64);
    for (&ak, &wk) in a.iter().zip(w) {
        let wa = wk * ak;
        let f = wk / (1.0 + wa * wa);
        let (c1, s1) = (f * (c - wa * s), f * (wa * c + s));
        c = c1;
        s = s1;
    }
    Ok((c, s))
}

/// `L_(n,D)` with the radial power weight:
/// `Σ_{j=1..D} Σ_{S ⊆ {1..n}, |S|=j} (Σ_{l∈S} a_l²)^{r/2}`.
pub fn radial_power_l(a: &[f64], r: f64, depth: usize) -> Result<f64> {
    check_power(r)?;
    let n = a.len();
    if depth < 1 || depth > n {
        return Err(Error::DepthOutOfRange { d: depth, n });
    }
    let sq: Vec<f64> = a.iter().map(|v| v * v).collect();
    let half_r = r / 2.0;

    fn visit(start: usize, left: usize, sum_sq: f64, sq: &[f64], half_r: f64, acc: &mut f64) {
        for l in start..sq.len() {
            let s = sum_sq + sq[l];
            *acc += s.powf(half_r);
            if left > 1 {
                visit(l + 1, left - 1, s, sq, half_r, acc);
            }
        }
    }

    let mut acc = 0.0;
    visit(0, depth, 0.0, &sq, half_r, &mut acc);
    Ok(acc)
}

/// All index subsets of `{0..n-1}` of size 1..=D, each exactly once,
/// ordered by size then lexicographically.
pub fn subsets_up_to(n: usize, depth: usize) -> Result<SubsetsUpTo> {
    if depth < 1 || depth > n {
        return Err(Error::DepthOutOfRange { d: depth, n });
    }
    Ok(SubsetsUpTo {
        n,
        depth,
        current: Vec::new(),
    })
}

/// Iterator returned by [`subsets_up_to`].
#[derive(Debug, Clone)]
pub struct SubsetsUpTo {
    n: usize,
    depth: usize,
    current: Vec<usize>,
}

impl Iterator for SubsetsUpTo {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.current.is_empty() {
            self.current = vec![0];
            return Some(self.current.clone());
        }
        // Advance the size-k combination in lexicographic order; when the
        // last combination of size k is exhausted, start size k+1.
        let k = self.current.len();
        let mut i = k;
        loop {
            if i == 0 {
                if k == self.depth {
                    return None;
                }
                self.current = (0..k + 1).collect();
                return Some(self.current.clone());
            }
            i -= 1;
            if self.current[i] < self.n - (k - i) {
                self.current[i] += 1;
                for j in (i + 1)..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                return Some(self.current.clone());
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct KernelSpecRepr {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    v_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    v: Option<Vec<Vec<f64>>>,
    #[serde(rename = "D", skip_serializing_if = "Option::is_none")]
    depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    w: Option<Vec<f64>>,
}

impl TryFrom<KernelSpecRepr> for KernelSpec {
    type Error = Error;

    fn try_from(repr: KernelSpecRepr) -> Result<Self> {
        let cov = |repr: &KernelSpecRepr| -> Result<CovSpec> {
            match (&repr.v_scale, &repr.v) {
                (Some(s), None) => {
                    if !s.is_finite() || *s <= 0.0 {
                        return Err(Error::InvalidKernel(format!(
                            "v_scale must be positive, got {s}"
                        )));
                    }
                    Ok(CovSpec::ScaledIdentity(*s))
                }
                (None, Some(rows)) => Ok(CovSpec::Full(SquareMatrix::from_rows(rows.clone())?)),
                (None, None) => Err(Error::InvalidKernel(
                    "gaussian/cauchy kernel needs v_scale or v".into(),
                )),
                (Some(_), Some(_)) => Err(Error::InvalidKernel(
                    "give either v_scale or v, not both".into(),
                )),
            }
        };
        let spec = match repr.kind.as_str() {
            "euclidean" => KernelSpec::euclidean(repr.r.ok_or_else(|| {
                Error::InvalidKernel("euclidean kernel needs parameter r".into())
            })?)?,
            "gaussian" => KernelSpec::Gaussian { v: cov(&repr)? },
            "cauchy" => KernelSpec::Cauchy { v: cov(&repr)? },
            "expweighted" => KernelSpec::exp_weighted(
                repr.w
                    .ok_or_else(|| Error::InvalidKernel("expweighted kernel needs w".into()))?,
                repr.depth
                    .ok_or_else(|| Error::InvalidKernel("expweighted kernel needs D".into()))?,
            )?,
            "radialpower" => KernelSpec::radial_power(
                repr.r.ok_or_else(|| {
                    Error::InvalidKernel("radialpower kernel needs parameter r".into())
                })?,
                repr.depth
                    .ok_or_else(|| Error::InvalidKernel("radialpower kernel needs D".into()))?,
            )?,
            other => {
                return Err(Error::InvalidKernel(format!("unknown kernel kind {other:?}")));
            }
        };
        Ok(spec)
    }
}

impl From<KernelSpec> for KernelSpecRepr {
    fn from(spec: KernelSpec) -> Self {
        let mut repr = KernelSpecRepr {
            kind: spec.kind_str().to_string(),
            r: None,
            v_scale: None,
            v: None,
            depth: None,
            w: None,
        };
        match spec {
            KernelSpec::EuclideanPower { r } => repr.r = Some(r),
            KernelSpec::Gaussian { v } | KernelSpec::Cauchy { v } => match v {
                CovSpec::ScaledIdentity(s) => repr.v_scale = Some(s),
                CovSpec::Full(m) => {
                    let n = m.dim();
                    repr.v = Some(
                        (0..n)
                            .map(|i| m.data[i * n..(i + 1) * n].to_vec())
                            .collect(),
                    );
                }
            },
            KernelSpec::ExpWeighted { w, depth } => {
                repr.w = Some(w);
                repr.depth = Some(depth);
            }
            KernelSpec::RadialPower { r, depth } => {
                repr.r = Some(r);
                repr.depth = Some(depth);
            }
        }
        repr
    }
}
