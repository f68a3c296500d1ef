//! The mixed penalty `l1 ||A||_{S1} + l2 ||A||_{S2}^2 + l3 ||A||_1`, its
//! proximal map, and Euclidean projection onto the matching norm balls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, EntrywiseNorm, RealMatrix};

/// Default stopping tolerance for the composite prox.
pub const DEFAULT_PROX_TOL: f64 = 1e-10;
/// Iteration cap for the composite prox.
pub const DEFAULT_PROX_MAX_ITERS: usize = 5000;

/// Weights of the nuclear, squared-Frobenius and entrywise-l1 terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl PenaltyConfig {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        let cfg = PenaltyConfig {
            lambda1,
            lambda2,
            lambda3,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn nuclear(lambda1: f64) -> Self {
        PenaltyConfig {
            lambda1,
            lambda2: 0.0,
            lambda3: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.lambda1 == 0.0 && self.lambda2 == 0.0 && self.lambda3 == 0.0
    }

    pub fn scaled(&self, s: f64) -> PenaltyConfig {
        PenaltyConfig {
            lambda1: s * self.lambda1,
            lambda2: s * self.lambda2,
            lambda3: s * self.lambda3,
        }
    }
}

/// `B = { A : r1 ||A||_{S1} + r2 ||A||_{S2}^2 + r3 ||A||_1 <= r }`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub r: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl BallSpec {
    pub fn nuclear(r: f64) -> BallSpec {
        BallSpec {
            r,
            r1: 1.0,
            r2: 0.0,
            r3: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r", self.r), ("r1", self.r1), ("r2", self.r2), ("r3", self.r3)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if self.r1 == 0.0 && self.r2 == 0.0 && self.r3 == 0.0 {
            return Err(Error::invalid("ball", "at least one weight must be positive"));
        }
        Ok(())
    }

    pub fn weights(&self) -> PenaltyConfig {
        PenaltyConfig {
            lambda1: self.r1,
            lambda2: self.r2,
            lambda3: self.r3,
        }
    }

    /// Left-hand side of the membership inequality.
    pub fn gauge(&self, a: &RealMatrix) -> Result<f64> {
        penalty_value(a, &self.weights())
    }

    pub fn contains(&self, a: &RealMatrix) -> Result<bool> {
        Ok(self.gauge(a)? <= self.r)
    }
}

pub fn penalty_value(a: &RealMatrix, cfg: &PenaltyConfig) -> Result<f64> {
    let mut value = 0.0;
    if cfg.lambda1 != 0.0 {
        value += cfg.lambda1 * linalg::nuclear_norm(a)?;
    }
    if cfg.lambda2 != 0.0 {
        value += cfg.lambda2 * a.frobenius_norm_squared();
    }
    if cfg.lambda3 != 0.0 {
        value += cfg.lambda3 * linalg::entrywise_norm(a, EntrywiseNorm::L1);
    }
    Ok(value)
}

/// Singular value thresholding: the prox of `tau ||.||_{S1}`.
pub fn svt(v: &RealMatrix, tau: f64) -> Result<RealMatrix> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::invalid("tau", format!("must be finite and >= 0, got {tau}")));
    }
    if tau == 0.0 || v.is_zero() {
        return Ok(v.clone());
    }
    let f = linalg::svd(v)?;
    if f.singular_values[0] <= tau {
        return Ok(RealMatrix::zeros(v.rows(), v.cols()));
    }
    let shrunk: Vec<f64> = f.singular_values.iter().map(|s| (s - tau).max(0.0)).collect();
    Ok(f.recompose_with(&shrunk))
}

/// Entrywise soft thresholding: the prox of `tau ||.||_1`.
pub fn soft_threshold(v: &RealMatrix, tau: f64) -> Result<RealMatrix> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::invalid("tau", format!("must be finite and >= 0, got {tau}")));
    }
    Ok(v.map(|x| x.signum() * (x.abs() - tau).max(0.0)))
}

/// `1/2 ||A - V||^2 + step * pen(A)`.
pub fn prox_objective(a: &RealMatrix, v: &RealMatrix, cfg: &PenaltyConfig, step: f64) -> Result<f64> {
    Ok(0.5 * (a - v).frobenius_norm_squared() + step * penalty_value(a, cfg)?)
}

/// Tuning for [`prox_penalty_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProxOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ProxOptions {
    fn default() -> Self {
        ProxOptions {
            tol: DEFAULT_PROX_TOL,
            max_iters: DEFAULT_PROX_MAX_ITERS,
        }
    }
}

/// Minimizer of `1/2 ||A - V||^2 + step * pen(A)`.
///
/// The squared-Frobenius term is absorbed into a global rescaling
/// `V / (1 + 2 step l2)`; what is left is the nuclear term (exact by
/// [`svt`]) plus, when `l3 > 0`, the entrywise term, handled by
/// accelerated projected gradient on the dual variable of the l1 term.
pub fn prox_penalty(v: &RealMatrix, cfg: &PenaltyConfig, step: f64, tol: f64) -> Result<RealMatrix> {
    prox_penalty_with(
        v,
        cfg,
        step,
        ProxOptions {
            tol,
            ..ProxOptions::default()
        },
    )
}

pub fn prox_penalty_with(v: &RealMatrix, cfg: &PenaltyConfig, step: f64, opts: ProxOptions) -> Result<RealMatrix> {
    cfg.validate()?;
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::invalid("step", format!("must be finite and > 0, got {step}")));
    }
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be finite and > 0, got {}", opts.tol)));
    }
    if v.is_zero() {
        return Ok(v.clone());
    }

    let shrink = 1.0 + 2.0 * step * cfg.lambda2;
    let base = v.scaled(1.0 / shrink);
    let tau1 = step * cfg.lambda1 / shrink;
    let tau3 = step * cfg.lambda3 / shrink;

    if tau3 == 0.0 {
        return svt(&base, tau1);
    }
    if tau1 == 0.0 {
        return soft_threshold(&base, tau3);
    }
    // base inside tau1 B_op + tau3 B_inf: zero is optimal
    if linalg::entrywise_norm(&base, EntrywiseNorm::LInf) <= tau3 || linalg::operator_norm(&base)? <= tau1 {
        return Ok(RealMatrix::zeros(v.rows(), v.cols()));
    }

    // accelerated projected gradient on the dual: maximize over |W| <= tau3
    // the concave function whose gradient is svt(base - W, tau1)
    let scale = 1.0 + base.frobenius_norm();
    let clip = |w: &RealMatrix| w.map(|x| x.clamp(-tau3, tau3));
    let primal = |w: &RealMatrix| svt(&(&base - w), tau1);
    let mut w = RealMatrix::zeros(v.rows(), v.cols());
    let mut z = w.clone();
    let mut theta: f64 = 1.0;
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iters {
        let next = clip(&(&z + &primal(&z)?));
        if (&next - &z).frobenius_norm() <= opts.tol * scale {
            let x = primal(&next)?;
            residual = (&clip(&(&next + &x)) - &next).frobenius_norm();
            if residual <= opts.tol * scale {
                return certify(x, &base, tau1, tau3);
            }
        }
        let stepped = &next - &w;
        if linalg::inner_product(&(&next - &z), &stepped)? < 0.0 {
            theta = 1.0;
            z = next.clone();
        } else {
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            z = &next + &stepped.scaled((theta - 1.0) / theta_next);
            theta = theta_next;
        }
        w = next;
    }
    Err(Error::ProxNotConverged {
        iterations: opts.max_iters,
        residual,
    })
}

/// Returns whichever of the dual iteration output and the two single-term
/// proxes has the lowest composite objective.
fn certify(x: RealMatrix, base: &RealMatrix, tau1: f64, tau3: f64) -> Result<RealMatrix> {
    let cfg = PenaltyConfig {
        lambda1: tau1,
        lambda2: 0.0,
        lambda3: tau3,
    };
    let mut best_value = prox_objective(&x, base, &cfg, 1.0)?;
    let mut best = x;
    for candidate in [svt(base, tau1)?, soft_threshold(base, tau3)?] {
        let value = prox_objective(&candidate, base, &cfg, 1.0)?;
        if value < best_value {
            best_value = value;
            best = candidate;
        }
    }
    Ok(best)
}

/// Euclidean projection of `v` onto the ball `spec`.
///
/// The projection is `prox_{mu g}(v)` for the gauge `g` at the multiplier
/// `mu >= 0` where `g(prox) = r`; `g(prox_{mu g}(v))` is nonincreasing in
/// `mu`, so `mu` is found by bisection and the feasible end is returned.
pub fn project_ball(v: &RealMatrix, spec: &BallSpec, tol: f64) -> Result<RealMatrix> {
    spec.validate()?;
    if spec.contains(v)? {
        return Ok(v.clone());
    }
    if spec.r == 0.0 {
        return Ok(RealMatrix::zeros(v.rows(), v.cols()));
    }
    let weights = spec.weights();
    let opts = ProxOptions {
        tol: tol.clamp(1e-9, 1e-6),
        max_iters: 50_000,
    };
    let at = |mu: f64| -> Result<(RealMatrix, f64)> {
        let a = prox_penalty_with(v, &weights, mu, opts)?;
        let g = spec.gauge(&a)?;
        Ok((a, g))
    };

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut feasible = loop {
        let (a, g) = at(hi)?;
        if g <= spec.r {
            break a;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::ConstrainedSolve("could not bracket the ball multiplier".into()));
        }
    };
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (a, g) = at(mid)?;
        if g <= spec.r {
            hi = mid;
            feasible = a;
        } else {
            lo = mid;
        }
        if spec.r - g <= tol * spec.r && g <= spec.r {
            break;
        }
    }
    Ok(feasible)
}
