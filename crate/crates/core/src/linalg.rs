//! Dense real matrices, the SVD, and every norm used by the estimators.
//!
//! `RealMatrix` wraps a column-major `nalgebra::DMatrix<f64>`, so the raw
//! storage slice is exactly `vec(A)` (columns stacked top to bottom).

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative cutoff below which a singular value counts as zero for rank.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Dense `m x T` matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct RealMatrix(DMatrix<f64>);

impl RealMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        check_shape(rows, cols)?;
        if entries.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, entries))
    }

    /// Builds a matrix from its column-stacked vectorization.
    pub fn from_vec(rows: usize, cols: usize, vec: &[f64]) -> Result<Self> {
        check_shape(rows, cols)?;
        if vec.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                vec.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_column_slice(rows, cols, vec))
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let m = rows.len();
        let t = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::InvalidMatrix("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_row_major(m, t, &flat)
    }

    pub fn from_dmatrix(inner: DMatrix<f64>) -> Result<Self> {
        check_shape(inner.nrows(), inner.ncols())?;
        if let Some(pos) = inner.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite entry at storage index {pos}"
            )));
        }
        Ok(RealMatrix(inner))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        RealMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "matrix dimensions must be positive");
        RealMatrix(DMatrix::identity(n, n))
    }

    /// Square diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        check_shape(diag.len(), diag.len())?;
        let mut inner = DMatrix::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            inner[(i, i)] = *d;
        }
        Self::from_dmatrix(inner)
    }

    /// The matrix `e_{p,q}` with a single one at `(row, col)`.
    pub fn unit(rows: usize, cols: usize, row: usize, col: usize) -> Self {
        let mut out = Self::zeros(rows, cols);
        out.0[(row, col)] = 1.0;
        out
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.0[(row, col)] = value;
    }

    /// `vec(A)`: columns stacked into one slice.
    pub fn as_vec(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_vec_mut(&mut self) -> &mut [f64] {
        self.0.as_mut_slice()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn transpose(&self) -> RealMatrix {
        RealMatrix(self.0.transpose())
    }

    pub fn scaled(&self, s: f64) -> RealMatrix {
        RealMatrix(&self.0 * s)
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &RealMatrix) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += s * b;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealMatrix {
        RealMatrix(self.0.map(f))
    }

    pub fn matmul(&self, other: &RealMatrix) -> Result<RealMatrix> {
        if self.cols() != other.rows() {
            return Err(Error::DimensionMismatch {
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(RealMatrix(&self.0 * &other.0))
    }

    /// Root-sum-of-squares of the entries.
    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn frobenius_norm_squared(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<f64> {
        let (m, t) = self.shape();
        let mut out = Vec::with_capacity(m * t);
        for i in 0..m {
            for j in 0..t {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    /// Writes one row per line, comma-separated, no header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for i in 0..self.rows() {
            let line: Vec<String> = (0..self.cols())
                .map(|j| format_float(self.0[(i, j)]))
                .collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Reads the format written by [`RealMatrix::write_csv`]; ragged rows are rejected.
    pub fn read_csv<R: BufRead>(input: R) -> Result<RealMatrix> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let row = parse_csv_row(trimmed, idx + 1)?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::Parse {
                        line: idx + 1,
                        reason: format!("ragged row: expected {} fields, got {}", first.len(), row.len()),
                    });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Empty("matrix csv"));
        }
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        RealMatrix::from_rows(&refs)
    }
}

pub(crate) fn parse_csv_row(line: &str, line_no: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|field| {
            let field = field.trim();
            field.parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                reason: format!("bad number `{field}`: {e}"),
            })
        })
        .collect()
}

/// Shortest representation that round-trips exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

fn check_shape(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidMatrix(format!(
            "dimensions must be positive, got {rows}x{cols}"
        )));
    }
    Ok(())
}

impl fmt::Debug for RealMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RealMatrix{}x{}{:?}", self.rows(), self.cols(), self.to_row_major())
    }
}

impl Serialize for RealMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.0[(i, j)]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RealMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        RealMatrix::from_rows(&refs).map_err(serde::de::Error::custom)
    }
}

impl Add for &RealMatrix {
    type Output = RealMatrix;
    fn add(self, rhs: &RealMatrix) -> RealMatrix {
        RealMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &RealMatrix {
    type Output = RealMatrix;
    fn sub(self, rhs: &RealMatrix) -> RealMatrix {
        RealMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &RealMatrix {
    type Output = RealMatrix;
    fn mul(self, rhs: f64) -> RealMatrix {
        self.scaled(rhs)
    }
}

impl Neg for &RealMatrix {
    type Output = RealMatrix;
    fn neg(self) -> RealMatrix {
        RealMatrix(-&self.0)
    }
}

impl AddAssign<&RealMatrix> for RealMatrix {
    fn add_assign(&mut self, rhs: &RealMatrix) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&RealMatrix> for RealMatrix {
    fn sub_assign(&mut self, rhs: &RealMatrix) {
        self.0 -= &rhs.0;
    }
}

/// Anything that acts on matrices as `A -> <X, A>`.
pub trait LinearFunctional {
    fn apply(&self, a: &RealMatrix) -> f64;
}

impl LinearFunctional for RealMatrix {
    fn apply(&self, a: &RealMatrix) -> f64 {
        dot(self.as_vec(), a.as_vec())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `tr(A^T B)`.
pub fn inner_product(a: &RealMatrix, b: &RealMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(dot(a.as_vec(), b.as_vec()))
}

/// Thin SVD with `k = min(m, T)` triplets, singular values nonincreasing.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub left_vectors: RealMatrix,
    pub singular_values: Vec<f64>,
    pub right_vectors: RealMatrix,
}

impl SvdFactors {
    /// `U diag(values) V^T` for a replacement spectrum.
    pub fn recompose_with(&self, values: &[f64]) -> RealMatrix {
        assert_eq!(values.len(), self.singular_values.len());
        let u = self.left_vectors.as_dmatrix();
        let v = self.right_vectors.as_dmatrix();
        let mut out = DMatrix::zeros(u.nrows(), v.nrows());
        for (j, s) in values.iter().enumerate() {
            if *s == 0.0 {
                continue;
            }
            out.ger(*s, &u.column(j), &v.column(j), 1.0);
        }
        RealMatrix(out)
    }

    pub fn reconstruct(&self) -> RealMatrix {
        self.recompose_with(&self.singular_values)
    }

    pub fn rank(&self) -> usize {
        numerical_rank(&self.singular_values)
    }
}

/// Count of singular values above `RANK_TOLERANCE * s_1`.
pub fn numerical_rank(singular_values: &[f64]) -> usize {
    let top = singular_values.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    singular_values
        .iter()
        .filter(|s| **s > RANK_TOLERANCE * top)
        .count()
}

fn faer_view(a: &RealMatrix) -> faer::MatRef<'_, f64> {
    let (m, t) = a.shape();
    faer::MatRef::from_column_major_slice(a.as_vec(), m, t)
}

fn not_converged(a: &RealMatrix) -> Error {
    let (rows, cols) = a.shape();
    Error::SvdNotConverged { rows, cols }
}

/// Thin SVD by `faer`; nalgebra's bidiagonal QR returns wrong factors on a
/// noticeable fraction of rank-deficient inputs, which thresholding
/// produces constantly.
pub fn svd(a: &RealMatrix) -> Result<SvdFactors> {
    let (m, t) = a.shape();
    let k = m.min(t);
    let f = faer_view(a).thin_svd().map_err(|_| not_converged(a))?;
    let (u, v, s) = (f.U(), f.V(), f.S().column_vector());
    Ok(SvdFactors {
        left_vectors: RealMatrix(DMatrix::from_fn(m, k, |i, j| u[(i, j)])),
        singular_values: (0..k).map(|j| s[j].max(0.0)).collect(),
        right_vectors: RealMatrix(DMatrix::from_fn(t, k, |i, j| v[(i, j)])),
    })
}

/// Singular values only, nonincreasing.
pub fn singular_values(a: &RealMatrix) -> Result<Vec<f64>> {
    let values = faer_view(a).singular_values().map_err(|_| not_converged(a))?;
    Ok(values.into_iter().map(|s| s.max(0.0)).collect())
}

/// Index `p` of a Schatten norm. `Infinity` is the operator norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SchattenIndex {
    Finite(f64),
    Infinity,
}

impl SchattenIndex {
    pub const NUCLEAR: SchattenIndex = SchattenIndex::Finite(1.0);
    pub const FROBENIUS: SchattenIndex = SchattenIndex::Finite(2.0);
    pub const OPERATOR: SchattenIndex = SchattenIndex::Infinity;
}

/// `p`-norm of a precomputed spectrum.
pub fn schatten_from_spectrum(values: &[f64], p: SchattenIndex) -> Result<f64> {
    match p {
        SchattenIndex::Infinity => Ok(values.first().copied().unwrap_or(0.0)),
        SchattenIndex::Finite(p) if !(p >= 1.0) || !p.is_finite() => Err(Error::invalid(
            "p",
            format!("Schatten index must be in [1, inf], got {p}"),
        )),
        SchattenIndex::Finite(1.0) => Ok(values.iter().sum()),
        SchattenIndex::Finite(2.0) => Ok(values.iter().map(|s| s * s).sum::<f64>().sqrt()),
        SchattenIndex::Finite(p) => {
            let top = values.first().copied().unwrap_or(0.0);
            if top == 0.0 {
                return Ok(0.0);
            }
            // scale by s_1 so large p cannot overflow
            let sum: f64 = values.iter().map(|s| (s / top).powf(p)).sum();
            Ok(top * sum.powf(1.0 / p))
        }
    }
}

pub fn schatten_norm(a: &RealMatrix, p: SchattenIndex) -> Result<f64> {
    if let SchattenIndex::Finite(q) = p {
        if !(q >= 1.0) || !q.is_finite() {
            return Err(Error::invalid(
                "p",
                format!("Schatten index must be in [1, inf], got {q}"),
            ));
        }
        if q == 2.0 {
            return Ok(a.frobenius_norm());
        }
    }
    schatten_from_spectrum(&singular_values(a)?, p)
}

pub fn nuclear_norm(a: &RealMatrix) -> Result<f64> {
    schatten_norm(a, SchattenIndex::NUCLEAR)
}

pub fn operator_norm(a: &RealMatrix) -> Result<f64> {
    schatten_norm(a, SchattenIndex::OPERATOR)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntrywiseNorm {
    L1,
    LInf,
}

pub fn entrywise_norm(a: &RealMatrix, kind: EntrywiseNorm) -> f64 {
    match kind {
        EntrywiseNorm::L1 => a.0.iter().map(|v| v.abs()).sum(),
        EntrywiseNorm::LInf => a.0.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())),
    }
}

/// `max_i |<X_i, A>|` over a sample of covariates.
pub fn empirical_sup_metric<X: LinearFunctional>(a: &RealMatrix, xs: &[X]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Empty("covariate list"));
    }
    Ok(xs.iter().fold(0.0, |acc: f64, x| acc.max(x.apply(a).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut impl Rng, m: usize, t: usize) -> RealMatrix {
        let v: Vec<f64> = (0..m * t).map(|_| rng.random_range(-2.0..2.0)).collect();
        RealMatrix::from_vec(m, t, &v).unwrap()
    }

    #[test]
    fn inner_product_examples() {
        let i2 = RealMatrix::identity(2);
        assert_eq!(inner_product(&i2, &i2).unwrap(), 2.0);
        let a = RealMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(inner_product(&a, &i2).unwrap(), 5.0);
    }

    #[test]
    fn inner_product_matches_trace_of_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 3, 4);
        let b = random_matrix(&mut rng, 3, 4);
        let atb = a.transpose().matmul(&b).unwrap();
        let trace: f64 = (0..4).map(|i| atb.get(i, i)).sum();
        let ip = inner_product(&a, &b).unwrap();
        assert!((ip - trace).abs() <= 1e-12 * (1.0 + trace.abs()));
    }

    #[test]
    fn inner_product_rejects_mismatch() {
        let err = inner_product(&RealMatrix::zeros(2, 3), &RealMatrix::zeros(3, 2)).unwrap_err();
        match err {
            Error::DimensionMismatch { left, right } => {
                assert_eq!(left, (2, 3));
                assert_eq!(right, (3, 2));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn construction_rejects_non_finite_and_empty() {
        assert!(RealMatrix::from_rows(&[&[1.0, f64::NAN]]).is_err());
        assert!(RealMatrix::from_row_major(0, 2, &[]).is_err());
        assert!(RealMatrix::from_row_major(2, 2, &[1.0]).is_err());
    }

    #[test]
    fn svd_of_diagonal_is_sorted() {
        let a = RealMatrix::from_diagonal(&[3.0, 4.0]).unwrap();
        let f = svd(&a).unwrap();
        assert!((f.singular_values[0] - 4.0).abs() < 1e-14);
        assert!((f.singular_values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn svd_of_zero_matrix() {
        let f = svd(&RealMatrix::zeros(3, 2)).unwrap();
        assert_eq!(f.singular_values, vec![0.0, 0.0]);
        assert_eq!(f.rank(), 0);
    }

    #[test]
    fn svd_spectrum_carries_frobenius_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 5, 3);
        let f = svd(&a).unwrap();
        let spec: f64 = f.singular_values.iter().map(|s| s * s).sum();
        let entries: f64 = a.as_vec().iter().map(|v| v * v).sum();
        assert!((spec - entries).abs() <= 1e-12 * entries);
    }

    fn orthonormality_defect(q: &RealMatrix) -> f64 {
        let qtq = q.transpose().matmul(q).unwrap();
        let k = qtq.rows();
        (&qtq - &RealMatrix::identity(k)).frobenius_norm()
    }

    #[test]
    fn svd_invariants_on_random_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(m, t) in &[(1, 1), (1, 5), (5, 1), (4, 7), (7, 4), (12, 12), (30, 20)] {
            let a = random_matrix(&mut rng, m, t);
            let f = svd(&a).unwrap();
            let k = m.min(t);
            assert_eq!(f.singular_values.len(), k);
            assert!(f.singular_values.windows(2).all(|w| w[0] >= w[1]));
            assert!(f.singular_values.iter().all(|s| *s >= 0.0));
            let err = (&f.reconstruct() - &a).frobenius_norm();
            assert!(err <= 1e-10 * a.frobenius_norm(), "{m}x{t}: {err}");
            let bound = 1e-10 * (k as f64).sqrt();
            assert!(orthonormality_defect(&f.left_vectors) <= bound);
            assert!(orthonormality_defect(&f.right_vectors) <= bound);
        }
    }

    #[test]
    fn schatten_examples() {
        let d = RealMatrix::from_diagonal(&[3.0, 4.0]).unwrap();
        assert!((schatten_norm(&d, SchattenIndex::NUCLEAR).unwrap() - 7.0).abs() < 1e-13);
        let perm = RealMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        assert!((schatten_norm(&perm, SchattenIndex::Infinity).unwrap() - 1.0).abs() < 1e-13);
        assert!(schatten_norm(&d, SchattenIndex::Finite(0.5)).is_err());
        assert!(schatten_norm(&d, SchattenIndex::Finite(f64::NAN)).is_err());
        let p3 = schatten_norm(&d, SchattenIndex::Finite(3.0)).unwrap();
        assert!((p3 - (27.0f64 + 64.0).powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn frobenius_agrees_with_spectral_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_matrix(&mut rng, 4, 4);
        let entrywise = a.as_vec().iter().map(|v| v * v).sum::<f64>().sqrt();
        let spectral = schatten_from_spectrum(&singular_values(&a).unwrap(), SchattenIndex::FROBENIUS).unwrap();
        assert!((spectral - entrywise).abs() <= 1e-12 * entrywise);
        assert!((schatten_norm(&a, SchattenIndex::FROBENIUS).unwrap() - entrywise).abs() <= 1e-12 * entrywise);
    }

    #[test]
    fn entrywise_examples() {
        let a = RealMatrix::from_rows(&[&[1.0, -2.0], &[0.0, 3.0]]).unwrap();
        assert_eq!(entrywise_norm(&a, EntrywiseNorm::L1), 6.0);
        assert_eq!(entrywise_norm(&a, EntrywiseNorm::LInf), 3.0);
    }

    #[test]
    fn empirical_sup_metric_examples() {
        let a = RealMatrix::from_rows(&[&[5.0, 1.0], &[2.0, 3.0]]).unwrap();
        assert_eq!(empirical_sup_metric(&a, &[RealMatrix::zeros(2, 2)]).unwrap(), 0.0);
        assert_eq!(empirical_sup_metric(&a, &[RealMatrix::unit(2, 2, 0, 0)]).unwrap(), 5.0);
        assert!(empirical_sup_metric::<RealMatrix>(&a, &[]).is_err());
    }

    #[test]
    fn empirical_sup_metric_bounded_by_frobenius_for_unit_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_matrix(&mut rng, 3, 5);
        let xs: Vec<RealMatrix> = (0..10)
            .map(|_| {
                let x = random_matrix(&mut rng, 3, 5);
                x.scaled(1.0 / x.frobenius_norm())
            })
            .collect();
        for x in &xs {
            // Cauchy-Schwarz, probe by probe
            assert!(x.apply(&a).abs() <= a.frobenius_norm() * x.frobenius_norm() + 1e-12);
        }
        assert!(empirical_sup_metric(&a, &xs).unwrap() <= a.frobenius_norm() + 1e-12);
    }

    #[test]
    fn csv_round_trip_and_ragged_rejection() {
        let a = RealMatrix::from_rows(&[&[1.5, -2.0, 0.1], &[1e-300, 3.0, -0.0]]).unwrap();
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let back = RealMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, a);
        assert!(RealMatrix::read_csv("1,2\n3\n".as_bytes()).is_err());
        assert!(RealMatrix::read_csv("1,x\n".as_bytes()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn norm_ordering(seed in any::<u64>(), m in 1usize..7, t in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, m, t);
            let s = singular_values(&a).unwrap();
            let op = schatten_from_spectrum(&s, SchattenIndex::Infinity).unwrap();
            let fro = schatten_from_spectrum(&s, SchattenIndex::FROBENIUS).unwrap();
            let nuc = schatten_from_spectrum(&s, SchattenIndex::NUCLEAR).unwrap();
            let rank = numerical_rank(&s) as f64;
            prop_assert!(op <= fro * (1.0 + 1e-12));
            prop_assert!(fro <= nuc * (1.0 + 1e-12));
            prop_assert!(nuc <= rank.sqrt() * fro * (1.0 + 1e-12));
            prop_assert!(entrywise_norm(&a, EntrywiseNorm::L1) >= entrywise_norm(&a, EntrywiseNorm::LInf));
        }

        #[test]
        fn trace_duality_and_vec_isometry(seed in any::<u64>(), m in 1usize..6, t in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, m, t);
            let b = random_matrix(&mut rng, m, t);
            let ip = inner_product(&a, &b).unwrap();
            let by_entries: f64 = (0..m).flat_map(|i| (0..t).map(move |j| (i, j)))
                .map(|(i, j)| a.get(i, j) * b.get(i, j)).sum();
            prop_assert!((ip - by_entries).abs() <= 1e-12 * (1.0 + by_entries.abs()));
            prop_assert!((ip - inner_product(&b, &a).unwrap()).abs() == 0.0);
            let bound = nuclear_norm(&a).unwrap() * operator_norm(&b).unwrap();
            prop_assert!(ip.abs() <= bound * (1.0 + 1e-12));
        }
    }
}
