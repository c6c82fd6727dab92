//! Bernstein basis, Bézier change-of-basis matrices and their tensor products.
//!
//! The Bézier matrix `A` of degree `k` maps the vector of unnormalized power
//! moments `(Σ x⁰, Σ x¹, …, Σ xᵏ)` of a dataset to its Bernstein aggregates
//! `(Σ B₀(x), …, Σ Bₖ(x))`. Both `A` and its inverse are built exactly from
//! integer binomials; floating point only appears when a matrix is applied to
//! data.

use std::fmt;
use std::sync::OnceLock;

use num_rational::Ratio;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Exact rational with 128-bit numerator and denominator.
pub type Rational = Ratio<i128>;

/// Largest supported degree. Every `C(k, j)` with `k <= 60` and every product
/// `C(k, l)·C(l, j)` fits in an `i128`.
pub const MAX_DEGREE: u32 = 60;

fn pascal() -> &'static [[i128; MAX_DEGREE as usize + 1]] {
    static TABLE: OnceLock<Vec<[i128; MAX_DEGREE as usize + 1]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let size = MAX_DEGREE as usize + 1;
        let mut rows = vec![[0i128; MAX_DEGREE as usize + 1]; size];
        for n in 0..size {
            rows[n][0] = 1;
            for k in 1..=n {
                rows[n][k] = rows[n - 1][k - 1] + if k < n { rows[n - 1][k] } else { 0 };
            }
        }
        rows
    })
}

/// Binomial coefficient `C(n, k)` from the cached Pascal triangle; zero when `k > n`.
pub fn binomial(n: u32, k: u32) -> Result<i128> {
    if n > MAX_DEGREE {
        return Err(Error::Capacity(format!(
            "binomial C({n}, {k}) exceeds the supported degree {MAX_DEGREE}"
        )));
    }
    if k > n {
        return Ok(0);
    }
    Ok(pascal()[n as usize][k as usize])
}

/// Polynomial degree `k` of a Bernstein basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BernsteinDegree(u32);

impl BernsteinDegree {
    pub fn new(k: u32) -> Result<Self> {
        if k > MAX_DEGREE {
            return Err(Error::Capacity(format!(
                "degree {k} exceeds the maximum {MAX_DEGREE}"
            )));
        }
        Ok(BernsteinDegree(k))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    /// Number of basis functions, `k + 1`.
    #[inline]
    pub fn width(self) -> usize {
        self.0 as usize + 1
    }
}

impl fmt::Display for BernsteinDegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn check_unit(x: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("{what} = {x} is outside [0, 1]")));
    }
    Ok(())
}

#[inline]
pub(crate) fn powi_u(x: f64, e: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..e {
        acc *= x;
    }
    acc
}

/// `B_j^k(x) = C(k, j) xʲ (1 − x)^(k − j)`.
pub fn bernstein_eval(k: BernsteinDegree, j: u32, x: f64) -> Result<f64> {
    if j > k.get() {
        return Err(Error::domain(format!("basis index {j} exceeds degree {k}")));
    }
    check_unit(x, "x")?;
    Ok(bernstein_unchecked(k.get(), j, x))
}

#[inline]
fn bernstein_unchecked(k: u32, j: u32, x: f64) -> f64 {
    pascal()[k as usize][j as usize] as f64 * powi_u(x, j) * powi_u(1.0 - x, k - j)
}

/// Fills `out[j] = B_j^k(x)` for every `j`. `out` must have length `k + 1`.
pub fn bernstein_row(k: BernsteinDegree, x: f64, out: &mut [f64]) {
    debug_assert_eq!(out.len(), k.width());
    for (j, slot) in out.iter_mut().enumerate() {
        *slot = bernstein_unchecked(k.get(), j as u32, x);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixKind {
    Forward,
    Inverse,
}

/// Square `(k+1) × (k+1)` Bézier matrix (or its inverse) with exact entries.
/// Rows are indexed by `j`, columns by `l`; both are upper triangular.
#[derive(Clone, Debug, PartialEq)]
pub struct BezierMatrix {
    degree: BernsteinDegree,
    kind: MatrixKind,
    entries: Vec<Rational>,
}

impl BezierMatrix {
    pub fn degree(&self) -> BernsteinDegree {
        self.degree
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.degree.width()
    }

    pub fn get(&self, row: usize, col: usize) -> Rational {
        self.entries[row * self.size() + col]
    }

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    /// Row-major double-precision copy of the entries.
    pub fn to_f64(&self) -> Vec<f64> {
        self.entries
            .iter()
            .map(|r| *r.numer() as f64 / *r.denom() as f64)
            .collect()
    }

    /// Exact matrix product `self · rhs` as a row-major rational matrix.
    pub fn exact_product(&self, rhs: &BezierMatrix) -> Result<Vec<Rational>> {
        if self.size() != rhs.size() {
            return Err(Error::domain("matrix sizes differ"));
        }
        let m = self.size();
        let mut out = vec![Rational::zero(); m * m];
        for i in 0..m {
            for j in 0..m {
                let mut acc = Rational::zero();
                for l in 0..m {
                    let a = self.get(i, l);
                    let b = rhs.get(l, j);
                    if !a.is_zero() && !b.is_zero() {
                        acc += a * b;
                    }
                }
                out[i * m + j] = acc;
            }
        }
        Ok(out)
    }
}

/// Forward Bézier matrix: `A[j][l] = (−1)^(l−j) C(k, l) C(l, j)` for `j ≤ l`.
pub fn bezier_matrix(k: BernsteinDegree) -> BezierMatrix {
    let m = k.width();
    let table = pascal();
    let mut entries = vec![Rational::zero(); m * m];
    for j in 0..m {
        for l in j..m {
            let magnitude = table[k.get() as usize][l] * table[l][j];
            let sign = if (l - j) % 2 == 0 { 1 } else { -1 };
            entries[j * m + l] = Rational::from_integer(sign * magnitude);
        }
    }
    BezierMatrix {
        degree: k,
        kind: MatrixKind::Forward,
        entries,
    }
}

/// Closed-form inverse: `A⁻¹[j][l] = C(l, j) / C(k, j)` for `j ≤ l`.
pub fn bezier_inverse(k: BernsteinDegree) -> BezierMatrix {
    let m = k.width();
    let table = pascal();
    let mut entries = vec![Rational::zero(); m * m];
    for j in 0..m {
        let denom = table[k.get() as usize][j];
        for l in j..m {
            entries[j * m + l] = Rational::new(table[l][j], denom);
        }
    }
    BezierMatrix {
        degree: k,
        kind: MatrixKind::Inverse,
        entries,
    }
}

/// True when a row-major rational matrix is exactly the identity.
pub fn is_exact_identity(entries: &[Rational], size: usize) -> bool {
    entries.len() == size * size
        && entries.iter().enumerate().all(|(idx, e)| {
            if idx / size == idx % size {
                e.is_one()
            } else {
                e.is_zero()
            }
        })
}

/// Multi-index `α = (α₁, …, α_d)` with every component in `0..=k`.
///
/// Flattening is row-major with the last coordinate varying fastest:
/// `flat(α) = Σ_j α_j (k+1)^(d−1−j)`. Every tensor-product vector in this
/// crate uses that order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    alpha: Vec<u32>,
}

impl MultiIndex {
    pub fn new(alpha: Vec<u32>, k: BernsteinDegree) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::domain("multi-index must have at least one component"));
        }
        if let Some(bad) = alpha.iter().find(|&&a| a > k.get()) {
            return Err(Error::domain(format!(
                "multi-index component {bad} exceeds degree {k}"
            )));
        }
        Ok(MultiIndex { alpha })
    }

    pub fn components(&self) -> &[u32] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn flatten(&self, k: BernsteinDegree) -> usize {
        let m = k.width();
        self.alpha.iter().fold(0, |acc, &a| acc * m + a as usize)
    }

    pub fn unflatten(mut flat: usize, k: BernsteinDegree, d: usize) -> Self {
        let m = k.width();
        let mut alpha = vec![0u32; d];
        for slot in alpha.iter_mut().rev() {
            *slot = (flat % m) as u32;
            flat /= m;
        }
        MultiIndex { alpha }
    }

    /// All `(k+1)^d` multi-indices in flattening order.
    pub fn all(k: BernsteinDegree, d: usize) -> impl Iterator<Item = MultiIndex> {
        let total = tensor_len(k, d).unwrap_or(0);
        (0..total).map(move |flat| MultiIndex::unflatten(flat, k, d))
    }
}

/// `(k+1)^d`, or a capacity error on overflow.
pub fn tensor_len(k: BernsteinDegree, d: usize) -> Result<usize> {
    let d32 = u32::try_from(d).map_err(|_| Error::Capacity(format!("dimension {d} too large")))?;
    k.width()
        .checked_pow(d32)
        .ok_or_else(|| Error::Capacity(format!("({}+1)^{d} overflows", k.get())))
}

/// `B_α(z) = Π_j B_{α_j}(z_j)`.
pub fn multivariate_bernstein_eval(k: BernsteinDegree, alpha: &MultiIndex, z: &[f64]) -> Result<f64> {
    if alpha.dim() != z.len() {
        return Err(Error::domain(format!(
            "multi-index has {} components but the point has {}",
            alpha.dim(),
            z.len()
        )));
    }
    let mut acc = 1.0;
    for (&a, &zj) in alpha.components().iter().zip(z) {
        acc *= bernstein_eval(k, a, zj)?;
    }
    Ok(acc)
}

/// Adds the tensor-product Bernstein values of one record into `acc`
/// (length `(k+1)^d`, flattening order). `row` is scratch of length `d·(k+1)`.
pub(crate) fn accumulate_tensor_basis(k: BernsteinDegree, record: &[f64], row: &mut [f64], acc: &mut [f64]) {
    let m = k.width();
    for (j, &x) in record.iter().enumerate() {
        bernstein_row(k, x, &mut row[j * m..(j + 1) * m]);
    }
    for (flat, slot) in acc.iter_mut().enumerate() {
        let mut rest = flat;
        let mut prod = 1.0;
        for j in (0..record.len()).rev() {
            prod *= row[j * m + rest % m];
            rest /= m;
        }
        *slot += prod;
    }
}

/// Applies the same `m × m` matrix (row-major) along every mode of a
/// `d`-way tensor stored in flattening order. Equivalent to multiplying by
/// the `d`-fold Kronecker power without materializing it.
pub fn apply_along_modes(matrix: &[f64], m: usize, d: usize, input: &[f64]) -> Result<Vec<f64>> {
    if matrix.len() != m * m {
        return Err(Error::domain("matrix is not m × m"));
    }
    let total = m
        .checked_pow(d as u32)
        .ok_or_else(|| Error::Capacity("tensor size overflows".into()))?;
    if input.len() != total {
        return Err(Error::domain(format!(
            "vector length {} does not match (k+1)^d = {total}",
            input.len()
        )));
    }
    let mut cur = input.to_vec();
    let mut next = vec![0.0; total];
    let mut fiber = vec![0.0; m];
    for mode in 0..d {
        let stride = m.pow((d - 1 - mode) as u32);
        let outer = total / (stride * m);
        for o in 0..outer {
            let base = o * stride * m;
            for i in 0..stride {
                for (l, f) in fiber.iter_mut().enumerate() {
                    *f = cur[base + l * stride + i];
                }
                for j in 0..m {
                    let row = &matrix[j * m..(j + 1) * m];
                    let mut s = 0.0;
                    for (a, f) in row.iter().zip(&fiber) {
                        s += a * f;
                    }
                    next[base + j * stride + i] = s;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// `(A ⊗ … ⊗ A)⁻¹ b`, applied mode by mode.
pub fn tensor_apply_inverse(k: BernsteinDegree, d: usize, b: &[f64]) -> Result<Vec<f64>> {
    BezierBasis::new(k).apply_inverse(d, b)
}

/// Degree-`k` basis with both matrices and a cached floating-point inverse.
#[derive(Clone, Debug)]
pub struct BezierBasis {
    degree: BernsteinDegree,
    forward: BezierMatrix,
    inverse: BezierMatrix,
    inverse_f64: Vec<f64>,
}

impl BezierBasis {
    pub fn new(k: BernsteinDegree) -> Self {
        let forward = bezier_matrix(k);
        let inverse = bezier_inverse(k);
        let inverse_f64 = inverse.to_f64();
        BezierBasis {
            degree: k,
            forward,
            inverse,
            inverse_f64,
        }
    }

    pub fn degree(&self) -> BernsteinDegree {
        self.degree
    }

    pub fn forward(&self) -> &BezierMatrix {
        &self.forward
    }

    pub fn inverse(&self) -> &BezierMatrix {
        &self.inverse
    }

    pub fn apply_inverse(&self, d: usize, b: &[f64]) -> Result<Vec<f64>> {
        apply_along_modes(&self.inverse_f64, self.degree.width(), d, b)
    }

    pub fn apply_forward(&self, d: usize, mu: &[f64]) -> Result<Vec<f64>> {
        apply_along_modes(&self.forward.to_f64(), self.degree.width(), d, mu)
    }
}
