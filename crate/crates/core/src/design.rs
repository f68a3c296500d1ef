//! Sampling designs for the covariate `X`, noise models for `Y`, the bound
//! constants those induce, and synthetic datasets.
//!
//! Designs are finite discrete distributions, so every population quantity
//! (`E <X, A>^2`, the covariance, the noise constants) is computed exactly
//! by enumerating atoms.

use std::io::{BufRead, Write};
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution, Uniform};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{self, format_float, parse_csv_row, LinearFunctional, RealMatrix};
use crate::quad;
use crate::rng::{rng_from_seed, TrialRng};

/// Relative eigenvalue cutoff for declaring the covariance invertible.
pub const INVERTIBILITY_TOLERANCE: f64 = 1e-10;

/// A covariate matrix, stored in the most compact exact form.
///
/// Matrices that are single canonical basis elements or single columns
/// keep that structure so inner products and gradient assembly cost
/// `O(1)` or `O(m)` instead of `O(mT)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Covariate {
    /// `e_{p,q}`: one at `(row, col)`, zero elsewhere.
    Entry { row: usize, col: usize },
    /// `values` placed in column `col`, zero elsewhere.
    Column { col: usize, values: Arc<[f64]> },
    Dense(RealMatrix),
}

impl Covariate {
    /// Picks the compact form of a dense matrix.
    pub fn compact(dense: RealMatrix) -> Covariate {
        let (m, t) = dense.shape();
        let nonzero: Vec<(usize, usize)> = (0..t)
            .flat_map(|j| (0..m).map(move |i| (i, j)))
            .filter(|&(i, j)| dense.get(i, j) != 0.0)
            .collect();
        if nonzero.len() == 1 && dense.get(nonzero[0].0, nonzero[0].1) == 1.0 {
            return Covariate::Entry {
                row: nonzero[0].0,
                col: nonzero[0].1,
            };
        }
        if let Some(&(_, col)) = nonzero.first() {
            if nonzero.iter().all(|&(_, j)| j == col) {
                let values: Vec<f64> = (0..m).map(|i| dense.get(i, col)).collect();
                return Covariate::Column {
                    col,
                    values: values.into(),
                };
            }
        }
        Covariate::Dense(dense)
    }

    pub fn fits_shape(&self, shape: (usize, usize)) -> bool {
        match self {
            Covariate::Entry { row, col } => *row < shape.0 && *col < shape.1,
            Covariate::Column { col, values } => *col < shape.1 && values.len() == shape.0,
            Covariate::Dense(x) => x.shape() == shape,
        }
    }

    pub fn to_dense(&self, shape: (usize, usize)) -> RealMatrix {
        match self {
            Covariate::Entry { row, col } => RealMatrix::unit(shape.0, shape.1, *row, *col),
            Covariate::Column { col, values } => {
                let mut out = RealMatrix::zeros(shape.0, shape.1);
                for (i, v) in values.iter().enumerate() {
                    out.set(i, *col, *v);
                }
                out
            }
            Covariate::Dense(x) => x.clone(),
        }
    }

    /// `target += s * X`.
    pub fn add_scaled_to(&self, target: &mut RealMatrix, s: f64) {
        match self {
            Covariate::Entry { row, col } => {
                let v = target.get(*row, *col);
                target.set(*row, *col, v + s);
            }
            Covariate::Column { col, values } => {
                let m = target.rows();
                let column = &mut target.as_vec_mut()[col * m..(col + 1) * m];
                for (dst, v) in column.iter_mut().zip(values.iter()) {
                    *dst += s * v;
                }
            }
            Covariate::Dense(x) => target.axpy(s, x),
        }
    }

    pub fn operator_norm(&self) -> Result<f64> {
        match self {
            Covariate::Entry { .. } => Ok(1.0),
            Covariate::Column { values, .. } => Ok(l2(values)),
            Covariate::Dense(x) => linalg::operator_norm(x),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        match self {
            Covariate::Entry { .. } => 1.0,
            Covariate::Column { values, .. } => l2(values),
            Covariate::Dense(x) => x.frobenius_norm(),
        }
    }

    pub fn max_abs_entry(&self) -> f64 {
        match self {
            Covariate::Entry { .. } => 1.0,
            Covariate::Column { values, .. } => values.iter().fold(0.0, |a: f64, v| a.max(v.abs())),
            Covariate::Dense(x) => linalg::entrywise_norm(x, linalg::EntrywiseNorm::LInf),
        }
    }
}

fn l2(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl LinearFunctional for Covariate {
    fn apply(&self, a: &RealMatrix) -> f64 {
        match self {
            Covariate::Entry { row, col } => a.get(*row, *col),
            Covariate::Column { col, values } => {
                let m = a.rows();
                linalg::dot(&a.as_vec()[col * m..(col + 1) * m], values)
            }
            Covariate::Dense(x) => linalg::dot(x.as_vec(), a.as_vec()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Completion,
    Multitask,
    Custom,
}

impl DesignKind {
    fn as_str(self) -> &'static str {
        match self {
            DesignKind::Completion => "completion",
            DesignKind::Multitask => "multitask",
            DesignKind::Custom => "custom",
        }
    }
}

/// Almost-sure bounds on the covariate: `||X||_{S_inf}`, `||X||_{S_2}`, `||X||_inf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignBounds {
    pub operator: f64,
    pub frobenius: f64,
    pub max_entry: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpectrum {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub invertible: bool,
}

#[derive(Debug)]
struct DesignData {
    kind: DesignKind,
    shape: (usize, usize),
    atoms: Vec<Covariate>,
    probabilities: Vec<f64>,
    bounds: DesignBounds,
    sampler: Option<WeightedIndex<f64>>,
    spectrum: OnceLock<CovarianceSpectrum>,
}

/// Finite distribution over covariate matrices. Cheap to clone.
#[derive(Clone, Debug)]
pub struct DesignDistribution {
    inner: Arc<DesignData>,
}

impl DesignDistribution {
    pub fn new(
        kind: DesignKind,
        shape: (usize, usize),
        atoms: Vec<Covariate>,
        probabilities: Vec<f64>,
    ) -> Result<Self> {
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::invalid("shape", format!("{shape:?} has a zero dimension")));
        }
        if atoms.is_empty() {
            return Err(Error::Empty("design atoms"));
        }
        if atoms.len() != probabilities.len() {
            return Err(Error::invalid(
                "probabilities",
                format!("{} atoms but {} probabilities", atoms.len(), probabilities.len()),
            ));
        }
        if let Some(k) = atoms.iter().position(|a| !a.fits_shape(shape)) {
            return Err(Error::invalid("atoms", format!("atom {k} does not have shape {shape:?}")));
        }
        if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("probabilities", "must be finite and nonnegative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("probabilities", format!("sum to {total}, not 1")));
        }

        let mut bounds = DesignBounds {
            operator: 0.0,
            frobenius: 0.0,
            max_entry: 0.0,
        };
        for atom in &atoms {
            bounds.operator = bounds.operator.max(atom.operator_norm()?);
            bounds.frobenius = bounds.frobenius.max(atom.frobenius_norm());
            bounds.max_entry = bounds.max_entry.max(atom.max_abs_entry());
        }

        let uniform = probabilities.iter().all(|p| *p == probabilities[0]);
        let sampler = if uniform {
            None
        } else {
            Some(
                WeightedIndex::new(&probabilities)
                    .map_err(|e| Error::invalid("probabilities", e.to_string()))?,
            )
        };
        Ok(DesignDistribution {
            inner: Arc::new(DesignData {
                kind,
                shape,
                atoms,
                probabilities,
                bounds,
                sampler,
                spectrum: OnceLock::new(),
            }),
        })
    }

    pub fn kind(&self) -> DesignKind {
        self.inner.kind
    }

    pub fn is_completion(&self) -> bool {
        self.inner.kind == DesignKind::Completion
    }

    pub fn shape(&self) -> (usize, usize) {
        self.inner.shape
    }

    pub fn atoms(&self) -> &[Covariate] {
        &self.inner.atoms
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.inner.probabilities
    }

    pub fn bounds(&self) -> DesignBounds {
        self.inner.bounds
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Covariate {
        let k = match &self.inner.sampler {
            None => rng.random_range(0..self.inner.atoms.len()),
            Some(w) => w.sample(rng),
        };
        self.inner.atoms[k].clone()
    }

    /// `E f(X)` by enumeration.
    pub fn expectation(&self, f: impl Fn(&Covariate) -> f64) -> f64 {
        self.inner
            .atoms
            .iter()
            .zip(&self.inner.probabilities)
            .map(|(x, p)| p * f(x))
            .sum()
    }

    /// `E <X, A>^2`, exact.
    pub fn second_moment(&self, a: &RealMatrix) -> f64 {
        self.expectation(|x| {
            let v = x.apply(a);
            v * v
        })
    }

    /// `Sigma = sum_k p_k vec(X_k) vec(X_k)^T`, an `mT x mT` matrix.
    pub fn covariance(&self) -> DMatrix<f64> {
        let (m, t) = self.shape();
        let d = m * t;
        let mut sigma = DMatrix::zeros(d, d);
        for (atom, p) in self.atoms().iter().zip(self.probabilities()) {
            match atom {
                Covariate::Entry { row, col } => {
                    let k = col * m + row;
                    sigma[(k, k)] += p;
                }
                _ => {
                    let dense = atom.to_dense((m, t));
                    let v = nalgebra::DVectorView::from_slice(dense.as_vec(), d);
                    sigma.ger(*p, &v, &v, 1.0);
                }
            }
        }
        sigma
    }

    /// Extreme eigenvalues of the covariance and the invertibility flag
    /// `lambda_min > 1e-10 * lambda_max`. Computed once, on first use.
    pub fn covariance_spectrum(&self) -> CovarianceSpectrum {
        *self.inner.spectrum.get_or_init(|| {
            let eig = SymmetricEigen::new(self.covariance());
            let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            CovarianceSpectrum {
                min_eigenvalue: min,
                max_eigenvalue: max,
                invertible: max > 0.0 && min > INVERTIBILITY_TOLERANCE * max,
            }
        })
    }

    /// Text form: a `design <kind> <m> <T>` header, then per atom an
    /// `atom <probability>` line followed by the atom as `m` CSV rows.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let (m, t) = self.shape();
        writeln!(out, "design {} {m} {t}", self.kind().as_str())?;
        for (atom, p) in self.atoms().iter().zip(self.probabilities()) {
            writeln!(out, "atom {}", format_float(*p))?;
            atom.to_dense((m, t)).write_csv(&mut out)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input
            .lines()
            .enumerate()
            .map(|(i, l)| l.map(|l| (i + 1, l)))
            .filter(|r| r.as_ref().map_or(true, |(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#')));

        let (line_no, header) = lines.next().ok_or(Error::Empty("design file"))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let parse_err = |line: usize, reason: String| Error::Parse { line, reason };
        if parts.len() != 4 || parts[0] != "design" {
            return Err(parse_err(line_no, "expected `design <kind> <m> <T>`".into()));
        }
        let kind = match parts[1] {
            "completion" => DesignKind::Completion,
            "multitask" => DesignKind::Multitask,
            "custom" => DesignKind::Custom,
            other => return Err(parse_err(line_no, format!("unknown design kind `{other}`"))),
        };
        let dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| parse_err(line_no, format!("bad dimension `{s}`: {e}")))
        };
        let (m, t) = (dim(parts[2])?, dim(parts[3])?);

        let mut atoms = Vec::new();
        let mut probabilities = Vec::new();
        while let Some(next) = lines.next() {
            let (line_no, line) = next?;
            let p = line
                .strip_prefix("atom ")
                .ok_or_else(|| parse_err(line_no, "expected `atom <probability>`".into()))?
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(line_no, format!("bad probability: {e}")))?;
            let mut rows = Vec::with_capacity(m);
            for _ in 0..m {
                let (row_no, row) = lines
                    .next()
                    .ok_or_else(|| parse_err(line_no, "truncated atom".into()))??;
                let values = parse_csv_row(row.trim(), row_no)?;
                if values.len() != t {
                    return Err(parse_err(row_no, format!("expected {t} fields, got {}", values.len())));
                }
                rows.push(values);
            }
            let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            atoms.push(Covariate::compact(RealMatrix::from_rows(&refs)?));
            probabilities.push(p);
        }
        DesignDistribution::new(kind, (m, t), atoms, probabilities)
    }

    /// SHA-256 of the text form, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

/// `X` uniform over the canonical basis `{e_{p,q}}` of `m x T` matrices.
pub fn completion_design(m: usize, t: usize) -> Result<DesignDistribution> {
    if m == 0 || t == 0 {
        return Err(Error::invalid("shape", "completion design needs m, T >= 1"));
    }
    let atoms: Vec<Covariate> = (0..t)
        .flat_map(|col| (0..m).map(move |row| Covariate::Entry { row, col }))
        .collect();
    let p = 1.0 / (m * t) as f64;
    DesignDistribution::new(DesignKind::Completion, (m, t), atoms, vec![p; m * t])
}

/// `X = A_j(x_{j,s})`: the task vector placed in column `j`.
///
/// The task is drawn uniformly, then one of its `k_j` vectors uniformly, so
/// atom `(j, s)` has probability `1 / (T k_j)`. With equal `k_j` this is the
/// uniform law over all atoms.
pub fn multitask_design(task_vectors: &[Vec<Vec<f64>>]) -> Result<DesignDistribution> {
    let t = task_vectors.len();
    if t == 0 {
        return Err(Error::Empty("task list"));
    }
    if let Some(j) = task_vectors.iter().position(Vec::is_empty) {
        return Err(Error::invalid("task_vectors", format!("task {j} has no vectors")));
    }
    let m = task_vectors[0][0].len();
    if m == 0 {
        return Err(Error::invalid("task_vectors", "vectors must be nonempty"));
    }
    let mut atoms = Vec::new();
    let mut probabilities = Vec::new();
    for (j, vectors) in task_vectors.iter().enumerate() {
        let p = 1.0 / (t * vectors.len()) as f64;
        for (s, x) in vectors.iter().enumerate() {
            if x.len() != m {
                return Err(Error::invalid(
                    "task_vectors",
                    format!("vector {s} of task {j} has length {}, expected {m}", x.len()),
                ));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("task_vectors", format!("vector {s} of task {j} is not finite")));
            }
            atoms.push(Covariate::Column {
                col: j,
                values: x.clone().into(),
            });
            probabilities.push(p);
        }
    }
    // 1/(T k_j) does not always sum to exactly one in floating point
    let total: f64 = probabilities.iter().sum();
    for p in &mut probabilities {
        *p /= total;
    }
    DesignDistribution::new(DesignKind::Multitask, (m, t), atoms, probabilities)
}

/// The block-diagonal covariance of a multitask design: `T^{-1}` times
/// `diag(k_j^{-1} sum_s x_{j,s} x_{j,s}^T)`.
pub fn multitask_block_covariance(task_vectors: &[Vec<Vec<f64>>]) -> DMatrix<f64> {
    let t = task_vectors.len();
    let m = task_vectors[0][0].len();
    let mut sigma = DMatrix::zeros(m * t, m * t);
    for (j, vectors) in task_vectors.iter().enumerate() {
        let w = 1.0 / (t as f64 * vectors.len() as f64);
        for x in vectors {
            for a in 0..m {
                for b in 0..m {
                    sigma[(j * m + a, j * m + b)] += w * x[a] * x[b];
                }
            }
        }
    }
    sigma
}

/// Additive noise `epsilon`, independent of `X`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// `N(0, sigma^2)`. `sigma = 0` is the noiseless model.
    Gaussian { sigma: f64 },
    /// Uniform on `[-half_width, half_width]`.
    BoundedUniform { half_width: f64 },
    /// Constants supplied by the caller; cannot be sampled.
    CustomSubgaussian { psi2: f64, psi1: f64, sd: f64 },
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        let model = NoiseModel::Gaussian { sigma };
        model.validate()?;
        Ok(model)
    }

    pub fn bounded_uniform(half_width: f64) -> Result<Self> {
        let model = NoiseModel::BoundedUniform { half_width };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        match *self {
            NoiseModel::Gaussian { sigma } if !ok(sigma) => {
                Err(Error::invalid("sigma", format!("must be finite and >= 0, got {sigma}")))
            }
            NoiseModel::BoundedUniform { half_width } if !(ok(half_width) && half_width > 0.0) => Err(
                Error::invalid("half_width", format!("must be finite and > 0, got {half_width}")),
            ),
            NoiseModel::CustomSubgaussian { psi2, psi1, sd } if !(ok(psi2) && ok(psi1) && ok(sd)) => {
                Err(Error::invalid("custom noise", "constants must be finite and >= 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => sigma * sigma,
            NoiseModel::BoundedUniform { half_width } => half_width * half_width / 3.0,
            NoiseModel::CustomSubgaussian { sd, .. } => sd * sd,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.variance() == 0.0
    }

    /// A constant `b` with `E exp(eps^2 / b^2) <= 2`.
    pub fn psi2_norm(&self) -> f64 {
        match *self {
            // E exp(eps^2/b^2) = (1 - 2 sigma^2/b^2)^{-1/2}, equal to 2 at b^2 = 8 sigma^2 / 3
            NoiseModel::Gaussian { sigma } => sigma * (8.0f64 / 3.0).sqrt(),
            NoiseModel::BoundedUniform { half_width } => {
                let h = half_width;
                // b >= h / sqrt(ln 2) already gives E <= exp(h^2/b^2) <= 2
                quad::bisect_decreasing(
                    |b| uniform_abs_expectation(h, |u| (u * u / (b * b)).exp()),
                    2.0,
                    0.1 * h,
                    h / std::f64::consts::LN_2.sqrt(),
                )
            }
            NoiseModel::CustomSubgaussian { psi2, .. } => psi2,
        }
    }

    /// A constant `b` with `E exp(|eps| / b) <= 2`, solved by quadrature.
    pub fn psi1_norm(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => {
                if sigma == 0.0 {
                    return 0.0;
                }
                // E exp(|eps|/b) = 2 exp(t^2/2) Phi(t) with t = sigma/b; Phi(t) >= 1/2
                // forces t <= sqrt(2 ln 2), so b >= sigma / sqrt(2 ln 2).
                let lo = sigma / (2.0 * std::f64::consts::LN_2).sqrt();
                quad::bisect_decreasing(
                    |b| gaussian_abs_expectation(sigma, |e| (e / b).exp()),
                    2.0,
                    lo,
                    100.0 * sigma,
                )
            }
            NoiseModel::BoundedUniform { half_width } => {
                let h = half_width;
                quad::bisect_decreasing(
                    |b| uniform_abs_expectation(h, |u| (u / b).exp()),
                    2.0,
                    0.01 * h,
                    h / std::f64::consts::LN_2,
                )
            }
            NoiseModel::CustomSubgaussian { psi1, .. } => psi1,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match *self {
            NoiseModel::Gaussian { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                Ok(sigma * z)
            }
            NoiseModel::BoundedUniform { half_width } => {
                let u = Uniform::new_inclusive(-half_width, half_width)
                    .map_err(|e| Error::invalid("half_width", e.to_string()))?;
                Ok(u.sample(rng))
            }
            NoiseModel::CustomSubgaussian { .. } => Err(Error::NotSampleable("custom_subgaussian")),
        }
    }
}

/// `E g(|eps|)` for `eps ~ N(0, sigma^2)`, by quadrature.
pub(crate) fn gaussian_abs_expectation(sigma: f64, g: impl Fn(f64) -> f64) -> f64 {
    let density = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    2.0 * quad::simpson(|z| density(z) * g(sigma * z), 0.0, 40.0, 40_000)
}

/// `E g(|eps|)` for `eps` uniform on `[-h, h]`.
fn uniform_abs_expectation(h: f64, g: impl Fn(f64) -> f64) -> f64 {
    quad::simpson(&g, 0.0, h, 4_000) / h
}

/// The noise-side constants of the estimator's guarantees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConstants {
    /// `sqrt(E Y^2)`.
    pub b_y: f64,
    /// `max |E(Y|X)|`.
    pub b_y_inf: f64,
    pub b_y_psi2: f64,
    /// Conditional noise standard deviation bound.
    pub b_y_2: f64,
    pub b_y_psi1: f64,
}

/// Constants for the linear truth `E(Y|X) = <X, A0>` under `design` and `noise`.
pub fn noise_constants(
    design: &DesignDistribution,
    a0: &RealMatrix,
    noise: &NoiseModel,
) -> Result<NoiseConstants> {
    if a0.shape() != design.shape() {
        return Err(Error::DimensionMismatch {
            left: a0.shape(),
            right: design.shape(),
        });
    }
    noise.validate()?;
    let b_y_inf = design
        .atoms()
        .iter()
        .fold(0.0, |acc: f64, x| acc.max(x.apply(a0).abs()));
    let variance = noise.variance();
    Ok(NoiseConstants {
        b_y: (design.second_moment(a0) + variance).sqrt(),
        b_y_inf,
        b_y_psi2: noise.psi2_norm(),
        b_y_2: variance.sqrt(),
        b_y_psi1: noise.psi1_norm(),
    })
}

/// What generated a synthetic dataset.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub a0: RealMatrix,
    pub noise: NoiseModel,
    pub design: DesignDistribution,
}

/// `n` observations `(X_i, Y_i)`.
#[derive(Clone, Debug)]
pub struct Dataset {
    shape: (usize, usize),
    pub xs: Vec<Covariate>,
    pub ys: Vec<f64>,
    pub truth: Option<GroundTruth>,
    pub seed: Option<u64>,
}

/// How covariates are laid out in a dataset CSV.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    /// `row,col,y` per line, zero-based indices; completion designs only.
    Indices,
    /// `vec(X)` (column-stacked) followed by `y`.
    Values,
}

/// Sidecar written next to an exported dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    pub format: DatasetFormat,
    pub seed: Option<u64>,
    pub design_hash: Option<String>,
    pub noise: Option<NoiseModel>,
}

impl Dataset {
    pub fn new(shape: (usize, usize), xs: Vec<Covariate>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        if xs.len() != ys.len() {
            return Err(Error::invalid(
                "ys",
                format!("{} covariates but {} responses", xs.len(), ys.len()),
            ));
        }
        if let Some(i) = xs.iter().position(|x| !x.fits_shape(shape)) {
            return Err(Error::invalid("xs", format!("covariate {i} does not have shape {shape:?}")));
        }
        if let Some(i) = ys.iter().position(|y| !y.is_finite()) {
            return Err(Error::invalid("ys", format!("response {i} is not finite")));
        }
        Ok(Dataset {
            shape,
            xs,
            ys,
            truth: None,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    /// Observations at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let xs = indices.iter().map(|&i| self.xs[i].clone()).collect();
        let ys = indices.iter().map(|&i| self.ys[i]).collect();
        let mut out = Dataset::new(self.shape, xs, ys)?;
        out.truth = self.truth.clone();
        Ok(out)
    }

    pub fn preferred_format(&self) -> DatasetFormat {
        if self.xs.iter().all(|x| matches!(x, Covariate::Entry { .. })) {
            DatasetFormat::Indices
        } else {
            DatasetFormat::Values
        }
    }

    pub fn metadata(&self, format: DatasetFormat) -> DatasetMetadata {
        DatasetMetadata {
            n: self.len(),
            rows: self.shape.0,
            cols: self.shape.1,
            format,
            seed: self.seed,
            design_hash: self.truth.as_ref().map(|t| t.design.content_hash()),
            noise: self.truth.as_ref().map(|t| t.noise),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W, format: DatasetFormat) -> Result<()> {
        for (x, y) in self.xs.iter().zip(&self.ys) {
            match (format, x) {
                (DatasetFormat::Indices, Covariate::Entry { row, col }) => {
                    writeln!(out, "{row},{col},{}", format_float(*y))?;
                }
                (DatasetFormat::Indices, _) => {
                    return Err(Error::invalid("format", "indices format needs a completion sample"));
                }
                (DatasetFormat::Values, x) => {
                    let dense = x.to_dense(self.shape);
                    let mut fields: Vec<String> = dense.as_vec().iter().map(|v| format_float(*v)).collect();
                    fields.push(format_float(*y));
                    writeln!(out, "{}", fields.join(","))?;
                }
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, shape: (usize, usize), format: DatasetFormat) -> Result<Dataset> {
        let (m, t) = shape;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let line_no = idx + 1;
            let fields = parse_csv_row(trimmed, line_no)?;
            match format {
                DatasetFormat::Indices => {
                    if fields.len() != 3 {
                        return Err(Error::Parse {
                            line: line_no,
                            reason: format!("expected `row,col,y`, got {} fields", fields.len()),
                        });
                    }
                    let index = |v: f64, bound: usize| {
                        (v >= 0.0 && v.fract() == 0.0 && (v as usize) < bound).then_some(v as usize)
                    };
                    let (row, col) = match (index(fields[0], m), index(fields[1], t)) {
                        (Some(r), Some(c)) => (r, c),
                        _ => {
                            return Err(Error::Parse {
                                line: line_no,
                                reason: format!("index ({}, {}) outside {m}x{t}", fields[0], fields[1]),
                            })
                        }
                    };
                    xs.push(Covariate::Entry { row, col });
                    ys.push(fields[2]);
                }
                DatasetFormat::Values => {
                    if fields.len() != m * t + 1 {
                        return Err(Error::Parse {
                            line: line_no,
                            reason: format!("expected {} fields, got {}", m * t + 1, fields.len()),
                        });
                    }
                    let x = RealMatrix::from_vec(m, t, &fields[..m * t])?;
                    xs.push(Covariate::compact(x));
                    ys.push(fields[m * t]);
                }
            }
        }
        Dataset::new(shape, xs, ys)
    }
}

/// `n` i.i.d. draws `Y_i = <X_i, A0> + eps_i`; reproducible from `seed`.
pub fn generate_dataset(
    design: &DesignDistribution,
    a0: &RealMatrix,
    noise: &NoiseModel,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if a0.shape() != design.shape() {
        return Err(Error::DimensionMismatch {
            left: a0.shape(),
            right: design.shape(),
        });
    }
    if n == 0 {
        return Err(Error::invalid("n", "must be positive"));
    }
    noise.validate()?;
    let mut rng: TrialRng = rng_from_seed(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = design.sample(&mut rng);
        let eps = noise.sample(&mut rng)?;
        ys.push(x.apply(a0) + eps);
        xs.push(x);
    }
    let mut data = Dataset::new(design.shape(), xs, ys)?;
    data.truth = Some(GroundTruth {
        a0: a0.clone(),
        noise: *noise,
        design: design.clone(),
    });
    data.seed = Some(seed);
    Ok(data)
}
