//! Penalized least squares: minimize `R_n(A) + pen(A)` by accelerated
//! proximal gradient (FISTA) with function-value restart.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::design::{Covariate, Dataset, DesignDistribution};
use crate::error::{Error, Result};
use crate::linalg::{self, LinearFunctional, RealMatrix};
use crate::prox::{self, PenaltyConfig, ProxOptions};

/// Relative accuracy of the power iteration for the Lipschitz constant.
const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITERS: usize = 10_000;
/// Rounding allowance in the monotonicity and descent checks.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepRule {
    /// `1/L` with `L` twice the top eigenvalue of the empirical Gram matrix.
    FixedLipschitz,
    /// Start each iteration at `L / eta`, multiply by `1 / beta` until the
    /// descent condition holds.
    Backtracking { beta: f64, eta: f64 },
}

impl StepRule {
    pub fn backtracking() -> StepRule {
        StepRule::Backtracking { beta: 0.5, eta: 1.1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    Zero,
    Warm(RealMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Relative change of the objective between accepted iterates.
    pub rel_obj_tol: f64,
    /// Bound on the subgradient certificate, relative to `1 + ||A||_{S2}`.
    pub residual_tol: f64,
    pub step_rule: StepRule,
    /// Reset momentum when it points against the last step.
    pub restart: bool,
    pub init: Init,
    pub prox: ProxOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 5000,
            rel_obj_tol: 1e-9,
            residual_tol: 1e-9,
            step_rule: StepRule::FixedLipschitz,
            restart: true,
            init: Init::Zero,
            prox: ProxOptions::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        for (name, v) in [("rel_obj_tol", self.rel_obj_tol), ("residual_tol", self.residual_tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if let StepRule::Backtracking { beta, eta } = self.step_rule {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::invalid("beta", format!("must lie in (0, 1), got {beta}")));
            }
            if !(eta.is_finite() && eta >= 1.0) {
                return Err(Error::invalid("eta", format!("must be >= 1, got {eta}")));
            }
        }
        Ok(())
    }

    pub fn warm(mut self, a: RealMatrix) -> Self {
        self.init = Init::Warm(a);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub estimate: RealMatrix,
    /// Objective at the initial point, then after every accepted step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `||grad f(z) - grad f(y) + L (y - z)||`, an element of the composite
    /// subdifferential at the estimate.
    pub subgradient_residual: f64,
    /// Step constant in use at termination.
    pub lipschitz: f64,
}

impl SolverResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }
}

/// `(1/n) sum (Y_i - <X_i, A>)^2`.
pub fn empirical_risk(a: &RealMatrix, data: &Dataset) -> Result<f64> {
    check_shape(a, data)?;
    let total: f64 = data
        .xs
        .iter()
        .zip(&data.ys)
        .map(|(x, y)| {
            let r = y - x.apply(a);
            r * r
        })
        .sum();
    Ok(total / data.len() as f64)
}

/// `-(2/n) sum (Y_i - <X_i, A>) X_i`.
pub fn empirical_risk_gradient(a: &RealMatrix, data: &Dataset) -> Result<RealMatrix> {
    check_shape(a, data)?;
    let (m, t) = data.shape();
    let mut g = RealMatrix::zeros(m, t);
    let s = -2.0 / data.len() as f64;
    for (x, y) in data.xs.iter().zip(&data.ys) {
        x.add_scaled_to(&mut g, s * (y - x.apply(a)));
    }
    Ok(g)
}

fn check_shape(a: &RealMatrix, data: &Dataset) -> Result<()> {
    if a.shape() != data.shape() {
        return Err(Error::DimensionMismatch {
            left: a.shape(),
            right: data.shape(),
        });
    }
    Ok(())
}

/// The empirical risk of a dataset in a form that is cheap to evaluate
/// repeatedly. Canonical-basis observations are pooled per cell:
/// `sum_i (y_i - a_k)^2 = SS_k + c_k (ybar_k - a_k)^2`.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    shape: (usize, usize),
    n: usize,
    /// `c_k / n` per cell, column-major.
    weights: Vec<f64>,
    means: Vec<f64>,
    /// Pooled within-cell sum of squares over `n`.
    within: f64,
    /// Remaining observations as `(X, y, weight)`.
    others: Vec<(Covariate, f64, f64)>,
    lipschitz: f64,
}

impl LeastSquares {
    pub fn new(data: &Dataset) -> Result<Self> {
        let (m, t) = data.shape();
        let n = data.len();
        let mut counts = vec![0.0; m * t];
        let mut means = vec![0.0; m * t];
        let mut sums = vec![0.0; m * t];
        let mut others = Vec::new();
        let nf = n as f64;
        for (x, &y) in data.xs.iter().zip(&data.ys) {
            match x {
                Covariate::Entry { row, col } => {
                    // Welford update
                    let k = col * m + row;
                    counts[k] += 1.0;
                    let delta = y - means[k];
                    means[k] += delta / counts[k];
                    sums[k] += delta * (y - means[k]);
                }
                _ => others.push((x.clone(), y, 1.0 / nf)),
            }
        }
        let weights: Vec<f64> = counts.iter().map(|c| c / nf).collect();
        let within = sums.iter().sum::<f64>() / nf;
        let mut out = LeastSquares {
            shape: (m, t),
            n,
            weights,
            means,
            within,
            others,
            lipschitz: 0.0,
        };
        out.lipschitz = 2.0 * out.top_eigenvalue();
        Ok(out)
    }

    /// `E <X, A - A0>^2` as a function of `A`, by atom enumeration.
    pub fn population(design: &DesignDistribution, a0: &RealMatrix) -> Result<Self> {
        if a0.shape() != design.shape() {
            return Err(Error::DimensionMismatch {
                left: a0.shape(),
                right: design.shape(),
            });
        }
        let (m, t) = design.shape();
        let mut weights = vec![0.0; m * t];
        let means = a0.as_vec().to_vec();
        let mut others = Vec::new();
        for (x, &p) in design.atoms().iter().zip(design.probabilities()) {
            match x {
                Covariate::Entry { row, col } => weights[col * m + row] += p,
                _ => others.push((x.clone(), x.apply(a0), p)),
            }
        }
        let mut out = LeastSquares {
            shape: (m, t),
            n: design.atoms().len(),
            weights,
            means,
            within: 0.0,
            others,
            lipschitz: 0.0,
        };
        out.lipschitz = 2.0 * out.top_eigenvalue();
        Ok(out)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `2 lambda_max((1/n) sum vec(X_i) vec(X_i)^T)`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn value(&self, a: &RealMatrix) -> f64 {
        let mut v = self.within;
        for ((w, mean), ak) in self.weights.iter().zip(&self.means).zip(a.as_vec()) {
            if *w != 0.0 {
                let d = ak - mean;
                v += w * d * d;
            }
        }
        for (x, y, w) in &self.others {
            let r = y - x.apply(a);
            v += w * r * r;
        }
        v
    }

    pub fn gradient(&self, a: &RealMatrix) -> RealMatrix {
        let (m, t) = self.shape;
        let mut g = RealMatrix::zeros(m, t);
        for (((gk, w), mean), ak) in g.as_vec_mut().iter_mut().zip(&self.weights).zip(&self.means).zip(a.as_vec()) {
            *gk = 2.0 * w * (ak - mean);
        }
        for (x, y, w) in &self.others {
            x.add_scaled_to(&mut g, -2.0 * w * (y - x.apply(a)));
        }
        g
    }

    /// `H v` for the Gram operator `H = sum_i w_i vec(X_i) vec(X_i)^T`.
    fn gram_apply(&self, v: &RealMatrix) -> RealMatrix {
        let (m, t) = self.shape;
        let mut out = RealMatrix::zeros(m, t);
        for ((o, w), vk) in out.as_vec_mut().iter_mut().zip(&self.weights).zip(v.as_vec()) {
            *o = w * vk;
        }
        for (x, _, w) in &self.others {
            x.add_scaled_to(&mut out, w * x.apply(v));
        }
        out
    }

    fn top_eigenvalue(&self) -> f64 {
        let diag_max = self.weights.iter().fold(0.0, |a: f64, w| a.max(*w));
        if self.others.is_empty() {
            return diag_max;
        }
        let (m, t) = self.shape;
        let start: Vec<f64> = (0..m * t).map(|k| 1.0 + (k as f64 * 0.618_033_988_749_894_9).fract()).collect();
        let mut v = RealMatrix::from_vec(m, t, &start).expect("finite start vector");
        v = v.scaled(1.0 / v.frobenius_norm());
        let mut estimate = 0.0;
        for _ in 0..POWER_MAX_ITERS {
            let hv = self.gram_apply(&v);
            let norm = hv.frobenius_norm();
            if norm == 0.0 {
                return diag_max;
            }
            let converged = (norm - estimate).abs() <= POWER_TOL * norm;
            estimate = norm;
            v = hv.scaled(1.0 / norm);
            if converged {
                break;
            }
        }
        estimate.max(diag_max)
    }

    /// Whether the empirical Gram operator is positive definite.
    pub fn gram_is_nonsingular(&self) -> bool {
        if self.others.is_empty() {
            return self.weights.iter().all(|w| *w > 0.0);
        }
        let (m, t) = self.shape;
        let d = m * t;
        let mut h = DMatrix::zeros(d, d);
        for (k, w) in self.weights.iter().enumerate() {
            h[(k, k)] = *w;
        }
        for (x, _, w) in &self.others {
            let dense = x.to_dense(self.shape);
            let v = dense.as_vec();
            for j in 0..d {
                if v[j] == 0.0 {
                    continue;
                }
                for i in 0..d {
                    h[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        let eig = SymmetricEigen::new(h).eigenvalues;
        let max = eig.iter().fold(0.0, |a: f64, e| a.max(*e));
        let min = eig.iter().fold(f64::INFINITY, |a: f64, e| a.min(*e));
        max > 0.0 && min > crate::design::INVERTIBILITY_TOLERANCE * max
    }
}

/// Fit `argmin R_n(A) + pen(A)` on `data`.
pub fn fit(data: &Dataset, cfg: &PenaltyConfig, opts: &SolverOptions) -> Result<SolverResult> {
    fit_least_squares(&LeastSquares::new(data)?, cfg, opts)
}

/// [`fit`] on a prepared loss, for repeated fits on one dataset.
pub fn fit_least_squares(loss: &LeastSquares, cfg: &PenaltyConfig, opts: &SolverOptions) -> Result<SolverResult> {
    cfg.validate()?;
    opts.validate()?;
    if cfg.is_zero() && !loss.gram_is_nonsingular() {
        return Err(Error::IllPosed(
            "unpenalized least squares needs a nonsingular empirical Gram matrix".into(),
        ));
    }
    let (m, t) = loss.shape();
    let mut x = match &opts.init {
        Init::Zero => RealMatrix::zeros(m, t),
        Init::Warm(a) => {
            if a.shape() != (m, t) {
                return Err(Error::DimensionMismatch {
                    left: a.shape(),
                    right: (m, t),
                });
            }
            a.clone()
        }
    };
    let objective = |a: &RealMatrix, fa: f64| -> Result<f64> { Ok(fa + prox::penalty_value(a, cfg)?) };

    let mut lipschitz = loss.lipschitz().max(f64::MIN_POSITIVE);
    let mut f_prev = objective(&x, loss.value(&x))?;
    let mut trace = vec![f_prev];
    let mut y = x.clone();
    let mut momentum = 1.0_f64;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let fy = loss.value(&y);
        let gy = loss.gradient(&y);
        if let StepRule::Backtracking { eta, .. } = opts.step_rule {
            lipschitz /= eta;
        }
        let (z, fz) = loop {
            let step = 1.0 / lipschitz;
            let mut point = y.clone();
            point.axpy(-step, &gy);
            let z = prox::prox_penalty_with(&point, cfg, step, opts.prox)?;
            let fz = loss.value(&z);
            let d = &z - &y;
            let model = fy + linalg::dot(gy.as_vec(), d.as_vec()) + 0.5 * lipschitz * d.frobenius_norm_squared();
            if fz <= model + MONOTONE_SLACK * (1.0 + fy.abs()) {
                break (z, fz);
            }
            let beta = match opts.step_rule {
                StepRule::Backtracking { beta, .. } => beta,
                StepRule::FixedLipschitz => 0.5,
            };
            lipschitz /= beta;
            if !lipschitz.is_finite() {
                return Err(Error::Diverged {
                    iteration: iterations,
                    objective_trace: trace,
                });
            }
        };
        let f_z = objective(&z, fz)?;
        if !f_z.is_finite() {
            return Err(Error::Diverged {
                iteration: iterations,
                objective_trace: trace,
            });
        }
        if f_z > f_prev + MONOTONE_SLACK * (1.0 + f_prev.abs()) {
            if momentum > 1.0 {
                // function-value restart: retake the step from x
                momentum = 1.0;
                y = x.clone();
                continue;
            }
            trace.push(f_z);
            return Err(Error::Diverged {
                iteration: iterations,
                objective_trace: trace,
            });
        }

        let mut cert = loss.gradient(&z);
        cert -= &gy;
        cert.axpy(lipschitz, &(&y - &z));
        residual = cert.frobenius_norm();

        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let step = &z - &x;
        let against = opts.restart && linalg::dot((&y - &z).as_vec(), step.as_vec()) > 0.0;
        let rel_change = (f_prev - f_z).abs() / f_prev.abs().max(f_z.abs()).max(f64::MIN_POSITIVE);
        trace.push(f_z.min(f_prev));
        f_prev = f_z.min(f_prev);
        if against {
            momentum = 1.0;
            y = z.clone();
        } else {
            y = z.clone();
            y.axpy((momentum - 1.0) / next_momentum, &step);
            momentum = next_momentum;
        }
        x = z;
        if rel_change <= opts.rel_obj_tol && residual <= opts.residual_tol * (1.0 + x.frobenius_norm()) {
            converged = true;
            break;
        }
    }

    Ok(SolverResult {
        estimate: x,
        objective_trace: trace,
        iterations,
        converged,
        subgradient_residual: residual,
        lipschitz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{completion_design, generate_dataset, NoiseModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut impl Rng, m: usize, t: usize) -> RealMatrix {
        let v: Vec<f64> = (0..m * t).map(|_| rng.random_range(-1.0..1.0)).collect();
        RealMatrix::from_vec(m, t, &v).unwrap()
    }

    fn dense_dataset(rng: &mut impl Rng, m: usize, t: usize, n: usize) -> Dataset {
        let xs: Vec<Covariate> = (0..n).map(|_| Covariate::Dense(random_matrix(rng, m, t))).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        Dataset::new((m, t), xs, ys).unwrap()
    }

    #[test]
    fn risk_examples() {
        let d = completion_design(2, 2).unwrap();
        let a0 = RealMatrix::from_rows(&[&[1.0, -1.0], &[0.5, 2.0]]).unwrap();
        let data = generate_dataset(&d, &a0, &NoiseModel::gaussian(0.0).unwrap(), 10, 3).unwrap();
        assert_eq!(empirical_risk(&a0, &data).unwrap(), 0.0);
        let zero = RealMatrix::zeros(2, 2);
        let mean_sq = data.ys.iter().map(|y| y * y).sum::<f64>() / 10.0;
        assert!((empirical_risk(&zero, &data).unwrap() - mean_sq).abs() < 1e-15);

        // n = 3 by hand
        let xs = vec![
            Covariate::Entry { row: 0, col: 0 },
            Covariate::Dense(RealMatrix::from_rows(&[&[1.0, 1.0], &[0.0, 0.0]]).unwrap()),
            Covariate::Entry { row: 1, col: 1 },
        ];
        let data = Dataset::new((2, 2), xs, vec![1.0, 2.0, -1.0]).unwrap();
        let a = RealMatrix::from_rows(&[&[0.5, 0.25], &[3.0, -2.0]]).unwrap();
        let hand = ((1.0 - 0.5f64).powi(2) + (2.0 - 0.75f64).powi(2) + (-1.0 + 2.0f64).powi(2)) / 3.0;
        assert!((empirical_risk(&a, &data).unwrap() - hand).abs() < 1e-15);
        let loss = LeastSquares::new(&data).unwrap();
        assert!((loss.value(&a) - hand).abs() < 1e-14);
    }

    #[test]
    fn gradient_single_observation() {
        let data = Dataset::new((2, 2), vec![Covariate::Entry { row: 0, col: 0 }], vec![2.0]).unwrap();
        let g = empirical_risk_gradient(&RealMatrix::zeros(2, 2), &data).unwrap();
        assert_eq!(g, RealMatrix::unit(2, 2, 0, 0).scaled(-4.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut xs: Vec<Covariate> = (0..15).map(|_| Covariate::Dense(random_matrix(&mut rng, 3, 2))).collect();
        xs.extend((0..10).map(|k| Covariate::Entry { row: k % 3, col: k % 2 }));
        let ys: Vec<f64> = (0..xs.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let data = Dataset::new((3, 2), xs, ys).unwrap();
        let loss = LeastSquares::new(&data).unwrap();
        let a = random_matrix(&mut rng, 3, 2);
        let g = empirical_risk_gradient(&a, &data).unwrap();
        assert!((&g - &loss.gradient(&a)).frobenius_norm() < 1e-13);
        let h = 1e-6;
        for _ in 0..20 {
            let d = random_matrix(&mut rng, 3, 2);
            let fd = (empirical_risk(&(&a + &d.scaled(h)), &data).unwrap()
                - empirical_risk(&(&a - &d.scaled(h)), &data).unwrap())
                / (2.0 * h);
            let exact = linalg::inner_product(&g, &d).unwrap();
            assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1e-3), "{fd} vs {exact}");
        }
    }

    #[test]
    fn least_squares_first_order_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = dense_dataset(&mut rng, 2, 2, 30);
        let res = fit(&data, &PenaltyConfig::new(0.0, 0.0, 0.0).unwrap(), &SolverOptions::default()).unwrap();
        assert!(res.converged);
        let g = empirical_risk_gradient(&res.estimate, &data).unwrap();
        assert!(g.frobenius_norm() <= 1e-8, "{}", g.frobenius_norm());
    }

    #[test]
    fn unpenalized_fit_needs_full_rank_gram() {
        let data = Dataset::new((2, 2), vec![Covariate::Entry { row: 0, col: 0 }], vec![1.0]).unwrap();
        let err = fit(&data, &PenaltyConfig::new(0.0, 0.0, 0.0).unwrap(), &SolverOptions::default());
        assert!(matches!(err, Err(Error::IllPosed(_))));
    }

    #[test]
    fn large_nuclear_weight_gives_zero() {
        let d = completion_design(4, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a0 = random_matrix(&mut rng, 4, 3);
        let data = generate_dataset(&d, &a0, &NoiseModel::gaussian(0.3).unwrap(), 40, 9).unwrap();
        let g0 = empirical_risk_gradient(&RealMatrix::zeros(4, 3), &data).unwrap();
        let threshold = linalg::operator_norm(&g0).unwrap();
        let res = fit(&data, &PenaltyConfig::nuclear(threshold * 1.0001), &SolverOptions::default()).unwrap();
        assert!(res.estimate.is_zero());
        // just below the threshold zero is no longer optimal
        let res = fit(&data, &PenaltyConfig::nuclear(threshold * 0.99), &SolverOptions::default()).unwrap();
        assert!(!res.estimate.is_zero());
    }

    #[test]
    fn ridge_matches_linear_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = dense_dataset(&mut rng, 2, 3, 12);
        let lambda2 = 0.3;
        let res = fit(&data, &PenaltyConfig::new(0.0, lambda2, 0.0).unwrap(), &SolverOptions::default()).unwrap();
        let d = 6;
        let n = data.len() as f64;
        let mut lhs = DMatrix::<f64>::identity(d, d) * (n * lambda2);
        let mut rhs = nalgebra::DVector::<f64>::zeros(d);
        for (x, y) in data.xs.iter().zip(&data.ys) {
            let v = nalgebra::DVector::from_column_slice(x.to_dense((2, 3)).as_vec());
            lhs += &v * v.transpose();
            rhs += &v * *y;
        }
        let exact = lhs.lu().solve(&rhs).unwrap();
        let diff: f64 = exact.iter().zip(res.estimate.as_vec()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(diff <= 1e-7, "{diff}");
    }

    #[test]
    fn trace_is_monotone_and_warm_start_is_immediate() {
        let d = completion_design(5, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a0 = random_matrix(&mut rng, 5, 4);
        let data = generate_dataset(&d, &a0, &NoiseModel::gaussian(0.5).unwrap(), 60, 4).unwrap();
        let cfg = PenaltyConfig::new(0.05, 0.01, 0.02).unwrap();
        let res = fit(&data, &cfg, &SolverOptions::default()).unwrap();
        assert!(res.converged);
        for w in res.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let again = fit(&data, &cfg, &SolverOptions::default().warm(res.estimate.clone())).unwrap();
        assert!(again.iterations <= 2, "{}", again.iterations);
        assert!(again.objective() <= res.objective() + 1e-12);
    }

    #[test]
    fn backtracking_agrees_with_fixed_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let data = dense_dataset(&mut rng, 3, 3, 25);
        let cfg = PenaltyConfig::new(0.2, 0.05, 0.0).unwrap();
        let fixed = fit(&data, &cfg, &SolverOptions::default()).unwrap();
        let opts = SolverOptions {
            step_rule: StepRule::backtracking(),
            ..SolverOptions::default()
        };
        let bt = fit(&data, &cfg, &opts).unwrap();
        assert!(fixed.converged && bt.converged);
        assert!((fixed.objective() - bt.objective()).abs() <= 1e-9 * fixed.objective());
        // strong convexity makes the minimizer unique
        assert!((&fixed.estimate - &bt.estimate).frobenius_norm() <= 1e-5);
    }

    #[test]
    fn solutions_scale_with_responses() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let data = dense_dataset(&mut rng, 2, 2, 20);
        let mut doubled = data.clone();
        for y in &mut doubled.ys {
            *y *= 2.0;
        }
        let opts = SolverOptions {
            rel_obj_tol: 1e-14,
            residual_tol: 1e-11,
            ..SolverOptions::default()
        };
        let base = fit(&data, &PenaltyConfig::new(0.0, 0.4, 0.0).unwrap(), &opts).unwrap();
        let scaled = fit(&doubled, &PenaltyConfig::new(0.0, 0.4, 0.0).unwrap(), &opts).unwrap();
        assert!((&scaled.estimate - &base.estimate.scaled(2.0)).frobenius_norm() <= 1e-8);
        // norm penalties scale with the responses, the quadratic one does not
        let base = fit(&data, &PenaltyConfig::new(0.1, 0.4, 0.05).unwrap(), &opts).unwrap();
        let scaled = fit(&doubled, &PenaltyConfig::new(0.2, 0.4, 0.1).unwrap(), &opts).unwrap();
        assert!((&scaled.estimate - &base.estimate.scaled(2.0)).frobenius_norm() <= 1e-6);
    }

    #[test]
    fn fits_are_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let data = dense_dataset(&mut rng, 3, 2, 10);
        let cfg = PenaltyConfig::new(0.1, 0.0, 0.1).unwrap();
        let a = fit(&data, &cfg, &SolverOptions::default()).unwrap();
        let b = fit(&data, &cfg, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let data = dense_dataset(&mut rng, 3, 3, 30);
        let opts = SolverOptions {
            max_iters: 2,
            ..SolverOptions::default()
        };
        let res = fit(&data, &PenaltyConfig::nuclear(0.01), &opts).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 2);
    }
}
