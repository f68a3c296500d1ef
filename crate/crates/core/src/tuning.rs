//! Theoretical regularization levels, the ball constant `C_r`, and a
//! cross-validation fallback for when the absolute constant is unknown.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{noise_constants, Dataset, DesignDistribution, NoiseModel};
use crate::error::{Error, Result};
use crate::linalg::{LinearFunctional, RealMatrix};
use crate::prox::{BallSpec, PenaltyConfig};
use crate::rng::rng_from_seed;
use crate::solver::{self, SolverOptions};

/// Which penalty family a guarantee is stated for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    /// Nuclear norm only.
    T1,
    /// Nuclear plus squared Frobenius.
    T2,
    /// Nuclear plus entrywise l1.
    T3,
    /// All three terms.
    T4,
}

impl Theorem {
    pub fn parse(s: &str) -> Result<Theorem> {
        match s.to_ascii_uppercase().as_str() {
            "T1" | "1" => Ok(Theorem::T1),
            "T2" | "2" => Ok(Theorem::T2),
            "T3" | "3" => Ok(Theorem::T3),
            "T4" | "4" => Ok(Theorem::T4),
            _ => Err(Error::invalid("theorem", format!("expected T1..T4, got {s:?}"))),
        }
    }
}

impl std::fmt::Display for Theorem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Design and noise bounds together with the absolute constant `c_abs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub b_x2: f64,
    pub b_x_inf: f64,
    pub b_x_linf: f64,
    pub b_y: f64,
    pub b_y_psi1: f64,
    pub b_y_inf: f64,
    pub b_y_2: f64,
    pub c_abs: f64,
}

impl TheoremConstants {
    /// Constants for the linear truth `A0` observed through `design` with `noise`.
    pub fn from_model(design: &DesignDistribution, a0: &RealMatrix, noise: &NoiseModel, c_abs: f64) -> Result<Self> {
        let nc = noise_constants(design, a0, noise)?;
        let b = design.bounds();
        let k = TheoremConstants {
            b_x2: b.frobenius,
            b_x_inf: b.operator,
            b_x_linf: b.max_entry,
            b_y: nc.b_y,
            b_y_psi1: nc.b_y_psi1,
            b_y_inf: nc.b_y_inf,
            b_y_2: nc.b_y_2,
            c_abs,
        };
        k.validate()?;
        Ok(k)
    }

    /// Constants bounded through trace duality, `|<X, A0>| <= b_{X,inf} ||A0||_{S1}`,
    /// so they depend on the truth only through `s1_norm`.
    pub fn shape_free(design: &DesignDistribution, s1_norm: f64, noise: &NoiseModel, c_abs: f64) -> Result<Self> {
        noise.validate()?;
        if !(s1_norm.is_finite() && s1_norm >= 0.0) {
            return Err(Error::invalid("s1_norm", format!("must be finite and >= 0, got {s1_norm}")));
        }
        let b = design.bounds();
        let mean_bound = b.operator * s1_norm;
        let variance = noise.variance();
        let k = TheoremConstants {
            b_x2: b.frobenius,
            b_x_inf: b.operator,
            b_x_linf: b.max_entry,
            b_y: (mean_bound * mean_bound + variance).sqrt(),
            b_y_psi1: noise.psi1_norm(),
            b_y_inf: mean_bound,
            b_y_2: variance.sqrt(),
            c_abs,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("b_x2", self.b_x2),
            ("b_x_inf", self.b_x_inf),
            ("b_x_linf", self.b_x_linf),
            ("b_y", self.b_y),
            ("b_y_psi1", self.b_y_psi1),
            ("b_y_inf", self.b_y_inf),
            ("b_y_2", self.b_y_2),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(self.c_abs.is_finite() && self.c_abs > 0.0) {
            return Err(Error::invalid("c_abs", format!("must be finite and > 0, got {}", self.c_abs)));
        }
        Ok(())
    }

    pub fn with_c_abs(mut self, c_abs: f64) -> Self {
        self.c_abs = c_abs;
        self
    }

    /// `c_{X,Y}` of the given theorem.
    pub fn c_xy(&self, theorem: Theorem) -> f64 {
        let common = 1.0
            + self.b_x2 * self.b_x2
            + self.b_x2 * self.b_y
            + self.b_y_psi1 * self.b_y_psi1
            + self.b_y_inf * self.b_y_inf
            + self.b_y_2 * self.b_y_2;
        let extra = match theorem {
            Theorem::T1 => self.b_x_inf * self.b_x_inf,
            Theorem::T3 => self.b_x_inf * self.b_x_inf + self.b_x_linf * self.b_x_linf,
            Theorem::T2 | Theorem::T4 => 0.0,
        };
        self.c_abs * (common + extra)
    }
}

/// Matrix dimensions entering through `sqrt(ln(mT))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dimensions {
    pub m: usize,
    pub t: usize,
    /// Drop the `sqrt(ln(mT))` factor, as allowed for matrix completion.
    pub completion: bool,
}

impl Dimensions {
    pub fn new(m: usize, t: usize) -> Self {
        Dimensions { m, t, completion: false }
    }

    pub fn completion(m: usize, t: usize) -> Self {
        Dimensions { m, t, completion: true }
    }

    fn log_factor(&self) -> f64 {
        if self.completion {
            1.0
        } else {
            ((self.m * self.t) as f64).ln().sqrt()
        }
    }
}

/// Sample size, confidence level and penalty weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremParams {
    pub n: usize,
    pub x: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl TheoremParams {
    pub fn nuclear(n: usize, x: f64) -> Self {
        TheoremParams {
            n,
            x,
            r1: 1.0,
            r2: 0.0,
            r3: 0.0,
        }
    }
}

fn log_n(n: usize, x: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("n", format!("must be at least 2, got {n}")));
    }
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::invalid("x", format!("must be finite and > 0, got {x}")));
    }
    Ok((n as f64).ln())
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && !v.is_nan() {
        Ok(v)
    } else {
        Err(Error::invalid(name, format!("must be > 0, got {v}")))
    }
}

/// `c (x + ln n) ln n / sqrt(n)`.
pub fn lambda_s1(n: usize, x: f64, k: &TheoremConstants) -> Result<f64> {
    k.validate()?;
    let ln = log_n(n, x)?;
    Ok(k.c_xy(Theorem::T1) * (x + ln) * ln / (n as f64).sqrt())
}

/// `c (ln n / sqrt(n)) (1/r1 + (x + ln n) ln n / (r2 sqrt(n)))`.
pub fn lambda_elastic(n: usize, x: f64, r1: f64, r2: f64, k: &TheoremConstants) -> Result<f64> {
    k.validate()?;
    log_n(n, x)?;
    let (r1, r2) = (positive("r1", r1)?, positive("r2", r2)?);
    Ok(k.c_xy(Theorem::T2) * elastic_shape(n as f64, x, r1, r2))
}

fn elastic_shape(n: f64, x: f64, r1: f64, r2: f64) -> f64 {
    let (ln, sn) = (n.ln(), n.sqrt());
    ln / sn * (1.0 / r1 + (x + ln) * ln / (r2 * sn))
}

/// `c min(1/r1, sqrt(ln(mT))/r3) (x + ln n) (ln n)^{3/2} / sqrt(n)`.
pub fn lambda_s1_l1(n: usize, x: f64, r1: f64, r3: f64, dims: Dimensions, k: &TheoremConstants) -> Result<f64> {
    k.validate()?;
    let ln = log_n(n, x)?;
    let (r1, r3) = (positive("r1", r1)?, positive("r3", r3)?);
    let lead = (1.0 / r1).min(dims.log_factor() / r3);
    Ok(k.c_xy(Theorem::T3) * lead * (x + ln) * ln.powf(1.5) / (n as f64).sqrt())
}

/// `c ((ln n)^{3/2} / sqrt(n)) (min(1/r1, sqrt(ln(mT))/r3) + (x + ln n)/(r2 sqrt(n)))`.
pub fn lambda_full(
    n: usize,
    x: f64,
    r1: f64,
    r2: f64,
    r3: f64,
    dims: Dimensions,
    k: &TheoremConstants,
) -> Result<f64> {
    k.validate()?;
    let ln = log_n(n, x)?;
    let (r1, r2, r3) = (positive("r1", r1)?, positive("r2", r2)?, positive("r3", r3)?);
    let sn = (n as f64).sqrt();
    let lead = (1.0 / r1).min(dims.log_factor() / r3);
    Ok(k.c_xy(Theorem::T4) * ln.powf(1.5) / sn * (lead + (x + ln) / (r2 * sn)))
}

/// The regularization level of `theorem`.
pub fn lambda(theorem: Theorem, p: &TheoremParams, dims: Dimensions, k: &TheoremConstants) -> Result<f64> {
    match theorem {
        Theorem::T1 => lambda_s1(p.n, p.x, k),
        Theorem::T2 => lambda_elastic(p.n, p.x, p.r1, p.r2, k),
        Theorem::T3 => lambda_s1_l1(p.n, p.x, p.r1, p.r3, dims, k),
        Theorem::T4 => lambda_full(p.n, p.x, p.r1, p.r2, p.r3, dims, k),
    }
}

/// Relative weights of the penalty terms `theorem` uses.
pub fn penalty_weights(theorem: Theorem, p: &TheoremParams) -> PenaltyConfig {
    match theorem {
        Theorem::T1 => PenaltyConfig::nuclear(1.0),
        Theorem::T2 => PenaltyConfig {
            lambda1: p.r1,
            lambda2: p.r2,
            lambda3: 0.0,
        },
        Theorem::T3 => PenaltyConfig {
            lambda1: p.r1,
            lambda2: 0.0,
            lambda3: p.r3,
        },
        Theorem::T4 => PenaltyConfig {
            lambda1: p.r1,
            lambda2: p.r2,
            lambda3: p.r3,
        },
    }
}

/// The estimator's penalty: `lambda` times [`penalty_weights`].
pub fn theory_penalty(theorem: Theorem, p: &TheoremParams, dims: Dimensions, k: &TheoremConstants) -> Result<PenaltyConfig> {
    Ok(penalty_weights(theorem, p).scaled(lambda(theorem, p, dims, k)?))
}

/// `min(b_{X,inf} r/r1, b_{X,2} sqrt(r/r2), b_{X,linf} r/r3)` with `1/0 = inf`.
pub fn c_r(r: f64, spec: &BallSpec, k: &TheoremConstants) -> f64 {
    let branch = |b: f64, w: f64, f: fn(f64) -> f64| if w == 0.0 { f64::INFINITY } else { b * f(r / w) };
    branch(k.b_x_inf, spec.r1, |q| q)
        .min(branch(k.b_x2, spec.r2, f64::sqrt))
        .min(branch(k.b_x_linf, spec.r3, |q| q))
}

/// Grid built from candidate `(r1, r2, r3, x)` tuples at the theoretical level.
pub fn theory_grid(
    theorem: Theorem,
    n: usize,
    points: &[(f64, f64, f64, f64)],
    dims: Dimensions,
    k: &TheoremConstants,
) -> Result<Vec<PenaltyConfig>> {
    points
        .iter()
        .map(|&(r1, r2, r3, x)| theory_penalty(theorem, &TheoremParams { n, x, r1, r2, r3 }, dims, k))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub cfg: PenaltyConfig,
    pub cv_risk: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: PenaltyConfig,
    /// Ascending by `cv_risk`; ties keep grid order.
    pub table: Vec<CvEntry>,
}

/// K-fold cross-validation of the grid by pooled held-out squared error.
pub fn cross_validate(
    data: &Dataset,
    grid: &[PenaltyConfig],
    folds: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::Empty("penalty grid"));
    }
    if folds < 2 {
        return Err(Error::invalid("folds", format!("must be at least 2, got {folds}")));
    }
    if data.len() < folds {
        return Err(Error::invalid("folds", format!("{folds} folds but only {} observations", data.len())));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut splits = Vec::with_capacity(folds);
    for f in 0..folds {
        let held: Vec<usize> = order.iter().copied().skip(f).step_by(folds).collect();
        let train: Vec<usize> = order
            .iter()
            .enumerate()
            .filter(|(pos, _)| pos % folds != f)
            .map(|(_, &i)| i)
            .collect();
        splits.push((solver::LeastSquares::new(&data.subset(&train)?)?, held));
    }
    let risks: Vec<f64> = grid
        .par_iter()
        .map(|cfg| -> Result<f64> {
            let mut total = 0.0;
            for (loss, held) in &splits {
                let est = solver::fit_least_squares(loss, cfg, opts)?.estimate;
                for &i in held {
                    let r = data.ys[i] - data.xs[i].apply(&est);
                    total += r * r;
                }
            }
            Ok(total / data.len() as f64)
        })
        .collect::<Result<_>>()?;
    let mut table: Vec<CvEntry> = grid
        .iter()
        .zip(risks)
        .map(|(cfg, cv_risk)| CvEntry { cfg: *cfg, cv_risk })
        .collect();
    table.sort_by(|a, b| a.cv_risk.total_cmp(&b.cv_risk));
    Ok(CvResult {
        best: table[0].cfg,
        table,
    })
}
