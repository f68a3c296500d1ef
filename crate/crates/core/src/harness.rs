//! Exact population risks and the Monte-Carlo experiments built on them:
//! oracle-inequality checks with calibration of the absolute constant,
//! the Bernstein condition, the rate in `n`, and the dependence on shape.
//!
//! Designs are finite, so `E <X, A - A0>^2` is computed exactly by atom
//! enumeration; only the data are random. Trials derive their seeds from
//! `(master, index)` alone and run in parallel without affecting results.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{completion_design, generate_dataset, Dataset, DesignDistribution, NoiseModel};
use crate::error::{Error, Result};
use crate::linalg::{self, LinearFunctional, RealMatrix};
use crate::prox::{self, BallSpec, PenaltyConfig};
use crate::rng::{rng_from_seed, subseed};
use crate::solver::{self, LeastSquares, SolverOptions, SolverResult};
use crate::tuning::{self, Dimensions, Theorem, TheoremConstants, TheoremParams};

/// Artifact version recorded in every report.
pub const VERSION: &str = concat!("schatten-core ", env!("CARGO_PKG_VERSION"));

/// Relative slack allowed when comparing an excess risk to its bound.
pub const BOUND_SLACK: f64 = 1e-9;
/// Slack of the Bernstein checks, relative to `1 + E L`.
pub const BERNSTEIN_SLACK: f64 = 1e-6;
/// Smallest span of an `n` grid for a slope fit, in decades.
pub const MIN_RATE_DECADES: f64 = 1.0;

fn check_shapes(a: &RealMatrix, design: &DesignDistribution) -> Result<()> {
    if a.shape() != design.shape() {
        return Err(Error::DimensionMismatch {
            left: a.shape(),
            right: design.shape(),
        });
    }
    Ok(())
}

/// `E <X, A - A0>^2`, i.e. `R(A) - R(A0)` for the linear truth `A0`.
pub fn excess_risk(a: &RealMatrix, design: &DesignDistribution, a0: &RealMatrix) -> Result<f64> {
    check_shapes(a, design)?;
    check_shapes(a0, design)?;
    Ok(design.second_moment(&(a - a0)))
}

/// `R(A) = E (Y - <X, A>)^2`, exactly.
pub fn population_risk(a: &RealMatrix, design: &DesignDistribution, a0: &RealMatrix, noise: &NoiseModel) -> Result<f64> {
    noise.validate()?;
    Ok(excess_risk(a, design, a0)? + noise.variance())
}

/// `R(A) + lambda (1 + pen_w(A))` with the weights of `theorem`.
#[allow(clippy::too_many_arguments)]
pub fn oracle_rhs(
    design: &DesignDistribution,
    a0: &RealMatrix,
    noise: &NoiseModel,
    a: &RealMatrix,
    theorem: Theorem,
    params: &TheoremParams,
    dims: Dimensions,
    k: &TheoremConstants,
) -> Result<f64> {
    let lam = tuning::lambda(theorem, params, dims, k)?;
    let pen = prox::penalty_value(a, &tuning::penalty_weights(theorem, params))?;
    Ok(population_risk(a, design, a0, noise)? + lam * (1.0 + pen))
}

/// `U diag(spectrum) V^T` with Haar-random orthonormal `U` and `V`.
pub fn low_rank_truth(m: usize, t: usize, spectrum: &[f64], seed: u64) -> Result<RealMatrix> {
    let r = spectrum.len();
    if r == 0 || r > m.min(t) {
        return Err(Error::invalid("rank", format!("must lie in 1..={}, got {r}", m.min(t))));
    }
    if spectrum.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::invalid("spectrum", "must be finite and nonnegative"));
    }
    let mut rng = rng_from_seed(seed);
    let mut gaussian = |rows: usize| {
        let q = DMatrix::<f64>::from_fn(rows, r, |_, _| rng.sample(StandardNormal)).qr().q();
        q.columns(0, r).into_owned()
    };
    let u = gaussian(m);
    let v = gaussian(t);
    let s = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(spectrum));
    RealMatrix::from_dmatrix(&u * s * v.transpose())
}

/// `low_rank_truth` with the spectrum rescaled to nuclear norm `s1_norm`.
pub fn scaled_truth(m: usize, t: usize, template: &[f64], s1_norm: f64, seed: u64) -> Result<RealMatrix> {
    let total: f64 = template.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("spectrum", "must have a positive sum"));
    }
    let spectrum: Vec<f64> = template.iter().map(|s| s * s1_norm / total).collect();
    low_rank_truth(m, t, &spectrum, seed)
}

/// One estimation problem whose guarantee is under test.
#[derive(Clone, Debug)]
pub struct OracleProblem {
    pub design: DesignDistribution,
    pub a0: RealMatrix,
    pub noise: NoiseModel,
    pub theorem: Theorem,
    pub params: TheoremParams,
    pub dims: Dimensions,
    pub constants: TheoremConstants,
    pub solver: SolverOptions,
}

impl OracleProblem {
    /// Constants taken from the model itself; the `sqrt(ln(mT))` factor is kept.
    pub fn new(
        design: DesignDistribution,
        a0: RealMatrix,
        noise: NoiseModel,
        theorem: Theorem,
        params: TheoremParams,
        c_abs: f64,
    ) -> Result<Self> {
        let constants = TheoremConstants::from_model(&design, &a0, &noise, c_abs)?;
        let (m, t) = design.shape();
        let problem = OracleProblem {
            design,
            a0,
            noise,
            theorem,
            params,
            dims: Dimensions::new(m, t),
            constants,
            solver: SolverOptions::default(),
        };
        problem.lambda()?;
        Ok(problem)
    }

    pub fn lambda(&self) -> Result<f64> {
        tuning::lambda(self.theorem, &self.params, self.dims, &self.constants)
    }

    pub fn weights(&self) -> PenaltyConfig {
        tuning::penalty_weights(self.theorem, &self.params)
    }

    pub fn with_n(&self, n: usize) -> Self {
        let mut out = self.clone();
        out.params.n = n;
        out
    }

    pub fn with_c_abs(&self, c_abs: f64) -> Self {
        let mut out = self.clone();
        out.constants.c_abs = c_abs;
        out
    }

    /// `R(A0) + lambda (1 + pen_w(A0))`.
    pub fn rhs_at_truth(&self) -> Result<f64> {
        oracle_rhs(
            &self.design,
            &self.a0,
            &self.noise,
            &self.a0,
            self.theorem,
            &self.params,
            self.dims,
            &self.constants,
        )
    }
}

/// Candidate set for the infimum on the right of the oracle inequality,
/// on the excess-risk scale: `min_A E(A) + lambda (1 + pen_w(A))`.
///
/// Fixed members are `0`, `A0`, `alpha A0`, singular-value and (for
/// penalties with an entrywise term) entrywise shrinkages of `A0`. The
/// minimizer of `E(A) + lambda pen_w(A)` over all matrices is added at
/// each `lambda`, which makes the minimum equal to the infimum up to
/// solver accuracy.
#[derive(Clone, Debug)]
pub struct CandidateSet {
    population: LeastSquares,
    weights: PenaltyConfig,
    fixed: Vec<(String, f64, f64)>,
    opts: SolverOptions,
}

impl CandidateSet {
    pub fn new(problem: &OracleProblem) -> Result<Self> {
        let a0 = &problem.a0;
        let (m, t) = a0.shape();
        let weights = problem.weights();
        let mut members: Vec<(String, RealMatrix)> = vec![("zero".into(), RealMatrix::zeros(m, t)), ("truth".into(), a0.clone())];
        for k in 1..10 {
            let alpha = k as f64 / 10.0;
            members.push((format!("scaled_{alpha:.1}"), a0.scaled(alpha)));
        }
        let top = linalg::operator_norm(a0)?;
        let peak = linalg::entrywise_norm(a0, linalg::EntrywiseNorm::LInf);
        for k in 1..10 {
            let q = k as f64 / 10.0;
            members.push((format!("svt_{q:.1}"), prox::svt(a0, q * top)?));
            if weights.lambda3 > 0.0 {
                members.push((format!("soft_{q:.1}"), prox::soft_threshold(a0, q * peak)?));
            }
        }
        let mut fixed = Vec::with_capacity(members.len());
        for (name, a) in members {
            let excess = problem.design.second_moment(&(&a - a0));
            fixed.push((name, excess, prox::penalty_value(&a, &weights)?));
        }
        Ok(CandidateSet {
            population: LeastSquares::population(&problem.design, a0)?,
            weights,
            fixed,
            opts: SolverOptions {
                rel_obj_tol: 1e-12,
                residual_tol: 1e-10,
                ..SolverOptions::default()
            },
        })
    }

    /// Minimum over the set at level `lambda`, with the minimizing member's name.
    /// `warm` carries the population fit between calls.
    pub fn bound(&self, lambda: f64, warm: &mut Option<RealMatrix>) -> Result<(f64, String)> {
        let (mut best, mut name) = (f64::INFINITY, String::new());
        for (label, excess, pen) in &self.fixed {
            let v = excess + lambda * (1.0 + pen);
            if v < best {
                best = v;
                name.clone_from(label);
            }
        }
        if lambda > 0.0 {
            let mut opts = self.opts.clone();
            if let Some(a) = warm.take() {
                opts = opts.warm(a);
            }
            let res = solver::fit_least_squares(&self.population, &self.weights.scaled(lambda), &opts)?;
            let a = res.estimate;
            let v = self.population.value(&a) + lambda * (1.0 + prox::penalty_value(&a, &self.weights)?);
            if v < best {
                best = v;
                name = "population_fit".into();
            }
            *warm = Some(a);
        }
        Ok((best, name))
    }
}

/// One Monte-Carlo trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub t: usize,
    pub cfg: PenaltyConfig,
    /// `R(A_hat) - R(A0)`, exact.
    pub excess_risk: f64,
    /// Candidate-set minimum of the oracle bound minus `R(A0)`.
    pub oracle_bound: f64,
    pub bound_holds: bool,
    pub best_candidate: String,
    /// `(1/n) sum <X_i, A_hat - A0>^2`; diagnostic only.
    pub empirical_excess: f64,
    pub iterations: usize,
    pub converged: bool,
    pub subgradient_residual: f64,
    /// Smallest `c_abs` at which this trial's bound holds, when calibrating.
    pub c_star: Option<f64>,
    pub failure: Option<String>,
}

impl TrialRecord {
    fn failed(index: usize, seed: u64, n: usize, shape: (usize, usize), err: &Error) -> Self {
        TrialRecord {
            index,
            seed,
            n,
            m: shape.0,
            t: shape.1,
            cfg: PenaltyConfig::nuclear(0.0),
            excess_risk: 0.0,
            oracle_bound: 0.0,
            bound_holds: false,
            best_candidate: String::new(),
            empirical_excess: 0.0,
            iterations: 0,
            converged: false,
            subgradient_residual: 0.0,
            c_star: None,
            failure: Some(err.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub failed: usize,
    pub mean_excess: f64,
    pub stderr: f64,
    pub quantiles: Quantiles,
    pub fraction_holds: f64,
    pub slope: Option<f64>,
}

/// Per-`n` or per-shape aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub m: usize,
    pub t: usize,
    pub trials: usize,
    pub mean_excess: f64,
    pub stderr: f64,
    pub lambda: f64,
    /// `R(A0) + lambda (1 + pen_w(A0))`.
    pub rhs_at_truth: f64,
    /// This group's own calibrated constant, when calibrating.
    pub c_cal: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Required fraction of trials, `max(0.95, 1 - 5 e^{-x})`.
    pub target: f64,
    pub c_abs: f64,
    /// Trials whose bound holds when refit at `c_abs`.
    pub holds: usize,
    pub evaluated: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Noisy,
    /// No noise: the estimator can interpolate and rates are faster.
    Noiseless,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub slope_stderr: f64,
    /// Slope plus and minus two standard errors.
    pub band: (f64, f64),
    pub regime: Regime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeComparison {
    /// Largest over smallest per-shape mean excess risk.
    pub ratio: f64,
    /// Per-shape `rhs_at_truth` agree to `1e-12` relative.
    pub rhs_invariant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub experiment: String,
    pub master_seed: u64,
    pub design_hash: String,
    pub noise: NoiseModel,
    pub theorem: Theorem,
    pub x: f64,
    pub c_abs: f64,
    pub overrides: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub summary: Summary,
    pub groups: Vec<GroupSummary>,
    pub calibration: Option<Calibration>,
    pub rate: Option<RateFit>,
    pub shapes: Option<ShapeComparison>,
    pub trials: Vec<TrialRecord>,
}

#[derive(Serialize)]
struct ReportHeader<'a> {
    provenance: &'a Provenance,
    summary: &'a Summary,
    groups: &'a [GroupSummary],
    calibration: &'a Option<Calibration>,
    rate: &'a Option<RateFit>,
    shapes: &'a Option<ShapeComparison>,
}

impl ExperimentReport {
    /// One JSON object per trial.
    pub fn write_trials_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for t in &self.trials {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Everything except the trials, as one JSON object.
    pub fn write_summary_json<W: Write>(&self, mut out: W) -> Result<()> {
        let header = ReportHeader {
            provenance: &self.provenance,
            summary: &self.summary,
            groups: &self.groups,
            calibration: &self.calibration,
            rate: &self.rate,
            shapes: &self.shapes,
        };
        serde_json::to_writer_pretty(&mut out, &header)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    /// `n,m,t,mean_excess,stderr` per group.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,m,t,mean_excess,stderr")?;
        for g in &self.groups {
            writeln!(
                out,
                "{},{},{},{},{}",
                g.n,
                g.m,
                g.t,
                linalg::format_float(g.mean_excess),
                linalg::format_float(g.stderr)
            )?;
        }
        Ok(())
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(trials: &[TrialRecord], slope: Option<f64>) -> Summary {
    let ok: Vec<&TrialRecord> = trials.iter().filter(|t| t.is_ok()).collect();
    let mut excess: Vec<f64> = ok.iter().map(|t| t.excess_risk).collect();
    let (mean_excess, stderr) = mean_and_stderr(&excess);
    excess.sort_by(f64::total_cmp);
    let holds = ok.iter().filter(|t| t.bound_holds).count();
    Summary {
        trials: trials.len(),
        failed: trials.len() - ok.len(),
        mean_excess,
        stderr,
        quantiles: Quantiles {
            q05: quantile(&excess, 0.05),
            q50: quantile(&excess, 0.5),
            q95: quantile(&excess, 0.95),
        },
        fraction_holds: if ok.is_empty() { 0.0 } else { holds as f64 / ok.len() as f64 },
        slope,
    }
}

fn provenance(problem: &OracleProblem, experiment: &str, seed: u64) -> Provenance {
    Provenance {
        version: VERSION.into(),
        experiment: experiment.into(),
        master_seed: seed,
        design_hash: problem.design.content_hash(),
        noise: problem.noise,
        theorem: problem.theorem,
        x: problem.params.x,
        c_abs: problem.constants.c_abs,
        overrides: Vec::new(),
    }
}

/// Fit one generated dataset at level `lambda` and compare with the bound.
fn evaluate(
    problem: &OracleProblem,
    candidates: &CandidateSet,
    data: &Dataset,
    lambda: f64,
    index: usize,
    seed: u64,
) -> Result<TrialRecord> {
    let cfg = problem.weights().scaled(lambda);
    let res = solver::fit(data, &cfg, &problem.solver)?;
    if !res.converged {
        return Err(Error::Diverged {
            iteration: res.iterations,
            objective_trace: Vec::new(),
        });
    }
    let (excess, empirical) = excess_pair(problem, data, &res)?;
    let (bound, best) = candidates.bound(lambda, &mut None)?;
    let (m, t) = problem.design.shape();
    Ok(TrialRecord {
        index,
        seed,
        n: data.len(),
        m,
        t,
        cfg,
        excess_risk: excess,
        oracle_bound: bound,
        bound_holds: excess <= bound + BOUND_SLACK * (1.0 + bound),
        best_candidate: best,
        empirical_excess: empirical,
        iterations: res.iterations,
        converged: res.converged,
        subgradient_residual: res.subgradient_residual,
        c_star: None,
        failure: None,
    })
}

fn excess_pair(problem: &OracleProblem, data: &Dataset, res: &SolverResult) -> Result<(f64, f64)> {
    let diff = &res.estimate - &problem.a0;
    let excess = problem.design.second_moment(&diff);
    let empirical = data.xs.iter().map(|x| x.apply(&diff).powi(2)).sum::<f64>() / data.len() as f64;
    Ok((excess, empirical))
}

fn trial(problem: &OracleProblem, candidates: &CandidateSet, lambda: f64, index: usize, seed: u64) -> TrialRecord {
    let run = || -> Result<TrialRecord> {
        let data = generate_dataset(&problem.design, &problem.a0, &problem.noise, problem.params.n, seed)?;
        evaluate(problem, candidates, &data, lambda, index, seed)
    };
    run().unwrap_or_else(|e| TrialRecord::failed(index, seed, problem.params.n, problem.design.shape(), &e))
}

/// Smallest `lambda` (to `0.1%`) at which the trial's bound holds, over
/// `lambda(c_abs = 1)`.
pub fn calibrate_trial(problem: &OracleProblem, candidates: &CandidateSet, data: &Dataset) -> Result<f64> {
    let unit = problem.with_c_abs(1.0).lambda()?;
    let loss = LeastSquares::new(data)?;
    let weights = problem.weights();
    let mut warm: Option<RealMatrix> = None;
    let mut pop_warm: Option<RealMatrix> = None;
    let mut holds = |lambda: f64| -> Result<bool> {
        let mut opts = problem.solver.clone();
        if let Some(a) = warm.take() {
            opts = opts.warm(a);
        }
        let res = solver::fit_least_squares(&loss, &weights.scaled(lambda), &opts)?;
        let excess = problem.design.second_moment(&(&res.estimate - &problem.a0));
        warm = Some(res.estimate);
        let (bound, _) = candidates.bound(lambda, &mut pop_warm)?;
        Ok(excess <= bound + BOUND_SLACK * (1.0 + bound))
    };

    let grad0 = solver::empirical_risk_gradient(&RealMatrix::zeros(data.shape().0, data.shape().1), data)?;
    let scale = weights.lambda1.max(weights.lambda3).max(f64::MIN_POSITIVE);
    let mut hi = (linalg::operator_norm(&grad0)? / scale).max(1e-8);
    let mut doublings = 0;
    while !holds(hi)? {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::ConstrainedSolve("no level satisfies the bound".into()));
        }
    }
    let floor = hi * 1e-12;
    let mut lo = hi / 1024.0;
    while holds(lo)? {
        hi = lo;
        lo /= 1024.0;
        if lo < floor {
            return Ok(lo / unit);
        }
    }
    while hi / lo > 1.001 {
        let mid = (lo * hi).sqrt();
        if holds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi / unit)
}

/// Fraction of trials the calibrated constant must cover.
pub fn calibration_target(x: f64) -> f64 {
    0.95f64.max(1.0 - 5.0 * (-x).exp())
}

/// Smallest `c` covering `ceil(target k)` of the `k` per-trial thresholds.
pub fn calibrated_constant(c_stars: &[f64], target: f64) -> Option<f64> {
    if c_stars.is_empty() {
        return None;
    }
    let mut sorted = c_stars.to_vec();
    sorted.sort_by(f64::total_cmp);
    let need = ((target * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[need - 1])
}

/// Trials of several related problems, seeded `subseed(subseed(master, g), i)`
/// for trial `i` of group `g` (or `subseed(master, i)` for a single group).
struct GroupedRun {
    problems: Vec<OracleProblem>,
    records: Vec<TrialRecord>,
    groups: Vec<GroupSummary>,
    calibration: Option<Calibration>,
}

fn trial_seed(master: u64, groups: usize, g: usize, i: usize) -> u64 {
    if groups == 1 {
        subseed(master, i as u64)
    } else {
        subseed(subseed(master, g as u64), i as u64)
    }
}

/// Runs every group at a common `c_abs`. With `calibrate`, each group's
/// trials are calibrated first and the largest group constant is used, so
/// that one absolute constant serves the whole experiment.
fn run_groups(problems: &[OracleProblem], trials: usize, seed: u64, calibrate: bool) -> Result<GroupedRun> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let candidates: Vec<CandidateSet> = problems.iter().map(CandidateSet::new).collect::<Result<_>>()?;
    let count = problems.len();
    let jobs: Vec<(usize, usize, u64)> = (0..count)
        .flat_map(|g| (0..trials).map(move |i| (g, i, trial_seed(seed, count, g, i))))
        .collect();

    let mut c_stars: Vec<Option<f64>> = vec![None; jobs.len()];
    let mut group_c: Vec<Option<f64>> = vec![None; count];
    let mut problems = problems.to_vec();
    let mut calibration = None;
    if calibrate {
        c_stars = jobs
            .par_iter()
            .map(|&(g, _, s)| {
                let p = &problems[g];
                generate_dataset(&p.design, &p.a0, &p.noise, p.params.n, s)
                    .and_then(|data| calibrate_trial(p, &candidates[g], &data))
                    .ok()
            })
            .collect();
        let target = calibration_target(problems[0].params.x);
        for (g, c) in group_c.iter_mut().enumerate() {
            let found: Vec<f64> = c_stars[g * trials..(g + 1) * trials].iter().flatten().copied().collect();
            *c = calibrated_constant(&found, target);
        }
        let c = group_c
            .iter()
            .flatten()
            .copied()
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            .ok_or(Error::Empty("calibrated trials"))?;
        for p in &mut problems {
            p.constants.c_abs = c;
        }
        calibration = Some(Calibration {
            target,
            c_abs: c,
            holds: 0,
            evaluated: 0,
        });
    }

    let lambdas: Vec<f64> = problems.iter().map(OracleProblem::lambda).collect::<Result<_>>()?;
    let mut records: Vec<TrialRecord> = jobs
        .par_iter()
        .enumerate()
        .map(|(k, &(g, _, s))| trial(&problems[g], &candidates[g], lambdas[g], k, s))
        .collect();
    for (r, c) in records.iter_mut().zip(&c_stars) {
        r.c_star = *c;
    }
    if let Some(cal) = calibration.as_mut() {
        cal.evaluated = records.iter().filter(|r| r.is_ok()).count();
        cal.holds = records.iter().filter(|r| r.is_ok() && r.bound_holds).count();
    }

    let mut groups = Vec::with_capacity(count);
    for (g, p) in problems.iter().enumerate() {
        let values: Vec<f64> = records[g * trials..(g + 1) * trials]
            .iter()
            .filter(|r| r.is_ok())
            .map(|r| r.excess_risk)
            .collect();
        let (mean_excess, stderr) = mean_and_stderr(&values);
        let (m, t) = p.design.shape();
        groups.push(GroupSummary {
            n: p.params.n,
            m,
            t,
            trials: values.len(),
            mean_excess,
            stderr,
            lambda: lambdas[g],
            rhs_at_truth: p.rhs_at_truth()?,
            c_cal: group_c[g],
        });
    }
    Ok(GroupedRun {
        problems,
        records,
        groups,
        calibration,
    })
}

/// Generate `trials` datasets, fit each, and compare the excess risk
/// with the candidate-set bound.
///
/// With `calibrate`, each trial's threshold `c*` is found first, the
/// constant covering [`calibration_target`] of them is chosen, and the
/// trials are evaluated at that constant; otherwise at `problem`'s.
pub fn verify_oracle_inequality(problem: &OracleProblem, trials: usize, seed: u64, calibrate: bool) -> Result<ExperimentReport> {
    let run = run_groups(std::slice::from_ref(problem), trials, seed, calibrate)?;
    Ok(ExperimentReport {
        provenance: provenance(&run.problems[0], "verify-oracle", seed),
        summary: summarize(&run.records, None),
        groups: run.groups,
        calibration: run.calibration,
        rate: None,
        shapes: None,
        trials: run.records,
    })
}

/// Ordinary least squares slope of `ln y` on `ln x`, with its standard error.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 || points.iter().any(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::invalid("points", "need at least two points with positive coordinates"));
    }
    let k = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let stderr = if points.len() > 2 {
        let ssr: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
        (ssr / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, stderr))
}

/// Mean excess risk over `trials` datasets at each `n`, and the log-log slope.
pub fn rate_experiment(problem: &OracleProblem, n_grid: &[usize], trials: usize, seed: u64, calibrate: bool) -> Result<ExperimentReport> {
    if n_grid.len() < 4 {
        return Err(Error::invalid("n_grid", format!("needs at least 4 points, got {}", n_grid.len())));
    }
    let (lo, hi) = (*n_grid.iter().min().unwrap(), *n_grid.iter().max().unwrap());
    if ((hi as f64) / (lo as f64)).log10() < MIN_RATE_DECADES {
        return Err(Error::invalid("n_grid", format!("must span at least {MIN_RATE_DECADES} decade(s)")));
    }
    let problems: Vec<OracleProblem> = n_grid.iter().map(|&n| problem.with_n(n)).collect();
    let run = run_groups(&problems, trials, seed, calibrate)?;
    let points: Vec<(f64, f64)> = run.groups.iter().map(|g| (g.n as f64, g.mean_excess)).collect();
    let (slope, slope_stderr) = loglog_slope(&points)?;
    Ok(ExperimentReport {
        provenance: provenance(&run.problems[0], "rate", seed),
        summary: summarize(&run.records, Some(slope)),
        groups: run.groups,
        calibration: run.calibration,
        rate: Some(RateFit {
            slope,
            slope_stderr,
            band: (slope - 2.0 * slope_stderr, slope + 2.0 * slope_stderr),
            regime: if problem.noise.is_noiseless() { Regime::Noiseless } else { Regime::Noisy },
        }),
        shapes: None,
        trials: run.records,
    })
}

/// Matrix-completion setup at shape `(m, t)` with a truth of nuclear norm
/// `s1_norm` and constants that depend on the truth only through that norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeStudy {
    pub shapes: Vec<(usize, usize)>,
    /// Singular values of the truth up to scale.
    pub template: Vec<f64>,
    pub s1_norm: f64,
    pub noise: NoiseModel,
    pub n: usize,
    pub x: f64,
    pub c_abs: f64,
    /// Seed of the truth's singular vectors.
    pub truth_seed: u64,
}

impl ShapeStudy {
    /// The nuclear-norm problem at `shape`.
    pub fn problem(&self, shape: (usize, usize)) -> Result<OracleProblem> {
        let (m, t) = shape;
        let design = completion_design(m, t)?;
        let a0 = scaled_truth(m, t, &self.template, self.s1_norm, self.truth_seed)?;
        let constants = TheoremConstants::shape_free(&design, self.s1_norm, &self.noise, self.c_abs)?;
        Ok(OracleProblem {
            design,
            a0,
            noise: self.noise,
            theorem: Theorem::T1,
            params: TheoremParams::nuclear(self.n, self.x),
            dims: Dimensions::new(m, t),
            constants,
            solver: SolverOptions::default(),
        })
    }
}

/// Mean excess risk per shape at fixed `n` and fixed `||A0||_{S1}`.
pub fn dimension_free_experiment(study: &ShapeStudy, trials: usize, seed: u64, calibrate: bool) -> Result<ExperimentReport> {
    if study.shapes.is_empty() {
        return Err(Error::Empty("shape grid"));
    }
    let problems: Vec<OracleProblem> = study.shapes.iter().map(|&s| study.problem(s)).collect::<Result<_>>()?;
    let run = run_groups(&problems, trials, seed, calibrate)?;
    let means: Vec<f64> = run.groups.iter().map(|g| g.mean_excess).collect();
    let max = means.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let min = means.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    let first = run.groups[0].rhs_at_truth;
    let rhs_invariant = run.groups.iter().all(|g| (g.rhs_at_truth - first).abs() <= 1e-12 * first.abs());
    let mut prov = provenance(&run.problems[0], "dimension-free", seed);
    prov.design_hash = run.problems.iter().map(|p| p.design.content_hash()).collect::<Vec<_>>().join(",");
    Ok(ExperimentReport {
        provenance: prov,
        summary: summarize(&run.records, None),
        groups: run.groups,
        calibration: run.calibration,
        rate: None,
        shapes: Some(ShapeComparison {
            ratio: max / min,
            rhs_invariant,
        }),
        trials: run.records,
    })
}

/// `E L` and `E L^2` for `L = (Y - <X,A>)^2 - (Y - <X,A*>)^2`, exactly.
///
/// With `d = <X, A* - A>` and `u = <X, 2 A0 - A - A*>`, `L = d (u + 2 eps)`,
/// so `E[L | X] = d u` and `E[L^2 | X] = d^2 (u^2 + 4 sigma^2)` for
/// centered noise of variance `sigma^2` independent of `X`.
pub fn bernstein_moments(
    design: &DesignDistribution,
    a0: &RealMatrix,
    variance: f64,
    a: &RealMatrix,
    a_star: &RealMatrix,
) -> Result<(f64, f64)> {
    check_shapes(a, design)?;
    check_shapes(a0, design)?;
    check_shapes(a_star, design)?;
    let dm = a_star - a;
    let um = &(&a0.scaled(2.0) - a) - a_star;
    let mut el = 0.0;
    let mut el2 = 0.0;
    for (x, p) in design.atoms().iter().zip(design.probabilities()) {
        let d = x.apply(&dm);
        let u = x.apply(&um);
        el += p * d * u;
        el2 += p * d * d * (u * u + 4.0 * variance);
    }
    Ok((el, el2))
}

/// `argmin_{A in B} E <X, A - A0>^2` by projected accelerated gradient.
pub fn best_in_ball(design: &DesignDistribution, a0: &RealMatrix, spec: &BallSpec, tol: f64) -> Result<RealMatrix> {
    spec.validate()?;
    let loss = LeastSquares::population(design, a0)?;
    let step = 1.0 / loss.lipschitz();
    let mut x = prox::project_ball(a0, spec, tol)?;
    let mut fx = loss.value(&x);
    let mut y = x.clone();
    let mut momentum = 1.0_f64;
    for _ in 0..20_000 {
        let mut point = y.clone();
        point.axpy(-step, &loss.gradient(&y));
        let z = prox::project_ball(&point, spec, tol)?;
        let fz = loss.value(&z);
        if fz > fx && momentum > 1.0 {
            momentum = 1.0;
            y = x.clone();
            continue;
        }
        let change = (&z - &x).frobenius_norm();
        let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        y = z.clone();
        y.axpy((momentum - 1.0) / next, &(&z - &x));
        momentum = next;
        x = z;
        fx = fz;
        if change <= tol * (1.0 + x.frobenius_norm()) {
            return Ok(x);
        }
    }
    Err(Error::ConstrainedSolve("projected gradient did not converge".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinSample {
    pub index: usize,
    /// Ball gauge of the sampled `A`.
    pub gauge: f64,
    pub el: f64,
    pub el2: f64,
    /// `E <X, A - A*>^2`.
    pub lower: f64,
    pub upper_holds: bool,
    pub lower_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinReport {
    pub version: String,
    pub master_seed: u64,
    pub design_hash: String,
    pub noise: NoiseModel,
    pub ball: BallSpec,
    pub c_r: f64,
    /// `4 (b_{Y,2}^2 + (b_{Y,inf} + C_r)^2)`.
    pub constant: f64,
    pub a_star: RealMatrix,
    pub all_hold: bool,
    pub overrides: Vec<String>,
    pub samples: Vec<BernsteinSample>,
}

impl BernsteinReport {
    pub fn write_samples_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for s in &self.samples {
            serde_json::to_writer(&mut out, s)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_summary_json<W: Write>(&self, mut out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            version: &'a str,
            master_seed: u64,
            design_hash: &'a str,
            noise: &'a NoiseModel,
            ball: &'a BallSpec,
            c_r: f64,
            constant: f64,
            a_star: &'a RealMatrix,
            all_hold: bool,
            overrides: &'a [String],
            samples: usize,
            upper_failures: usize,
            lower_failures: usize,
        }
        let header = Header {
            version: &self.version,
            master_seed: self.master_seed,
            design_hash: &self.design_hash,
            noise: &self.noise,
            ball: &self.ball,
            c_r: self.c_r,
            constant: self.constant,
            a_star: &self.a_star,
            all_hold: self.all_hold,
            overrides: &self.overrides,
            samples: self.samples.len(),
            upper_failures: self.samples.iter().filter(|s| !s.upper_holds).count(),
            lower_failures: self.samples.iter().filter(|s| !s.lower_holds).count(),
        };
        serde_json::to_writer_pretty(&mut out, &header)?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

/// A random element of `spec`: uniform direction, then either a random
/// interior level, the boundary, or a small perturbation of `center`.
fn sample_in_ball(rng: &mut impl Rng, spec: &BallSpec, center: &RealMatrix, kind: usize) -> Result<RealMatrix> {
    let (m, t) = center.shape();
    let g: Vec<f64> = (0..m * t).map(|_| rng.sample(StandardNormal)).collect();
    let g = RealMatrix::from_vec(m, t, &g)?;
    if kind == 2 {
        let delta = 10f64.powf(rng.random_range(-4.0..0.0)) * spec.r.max(1e-12) / g.frobenius_norm();
        let a = center + &g.scaled(delta);
        return if spec.contains(&a)? { Ok(a) } else { prox::project_ball(&a, spec, 1e-12) };
    }
    let level = if kind == 1 { spec.r } else { spec.r * rng.random::<f64>() };
    // gauge(s g) = q s^2 + l s for s >= 0
    let w = spec.weights();
    let l = w.lambda1 * linalg::nuclear_norm(&g)? + w.lambda3 * linalg::entrywise_norm(&g, linalg::EntrywiseNorm::L1);
    let q = w.lambda2 * g.frobenius_norm_squared();
    let s = if q > 0.0 { (-l + (l * l + 4.0 * q * level).sqrt()) / (2.0 * q) } else { level / l };
    let a = g.scaled(s);
    // rounding can leave the boundary sample a hair outside
    if spec.contains(&a)? {
        Ok(a)
    } else {
        Ok(a.scaled(spec.r / spec.gauge(&a)?))
    }
}

/// Check both Bernstein inequalities on `samples` members of the ball.
pub fn verify_bernstein(
    design: &DesignDistribution,
    a0: &RealMatrix,
    noise: &NoiseModel,
    spec: &BallSpec,
    samples: usize,
    seed: u64,
) -> Result<BernsteinReport> {
    noise.validate()?;
    if samples == 0 {
        return Err(Error::invalid("samples", "must be at least 1"));
    }
    let k = TheoremConstants::from_model(design, a0, noise, 1.0)?;
    let cr = tuning::c_r(spec.r, spec, &k);
    let constant = 4.0 * (k.b_y_2 * k.b_y_2 + (k.b_y_inf + cr).powi(2));
    let a_star = best_in_ball(design, a0, spec, 1e-10)?;
    let variance = noise.variance();

    let results: Vec<Result<BernsteinSample>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let a = if i == 0 {
                a_star.clone()
            } else {
                let mut rng = rng_from_seed(subseed(seed, i as u64));
                sample_in_ball(&mut rng, spec, &a_star, i % 3)?
            };
            let (el, el2) = bernstein_moments(design, a0, variance, &a, &a_star)?;
            let lower = design.second_moment(&(&a - &a_star));
            let slack = BERNSTEIN_SLACK * (1.0 + el.abs());
            Ok(BernsteinSample {
                index: i,
                gauge: spec.gauge(&a)?,
                el,
                el2,
                lower,
                upper_holds: el2 <= constant * el + slack,
                lower_holds: el >= lower - slack,
            })
        })
        .collect();
    let samples: Vec<BernsteinSample> = results.into_iter().collect::<Result<_>>()?;
    Ok(BernsteinReport {
        version: VERSION.into(),
        master_seed: seed,
        design_hash: design.content_hash(),
        noise: *noise,
        ball: *spec,
        c_r: cr,
        constant,
        all_hold: samples.iter().all(|s| s.upper_holds && s.lower_holds),
        a_star,
        overrides: Vec::new(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::multitask_design;

    #[test]
    fn risk_at_truth_is_noise_variance() {
        let d = completion_design(3, 2).unwrap();
        let a0 = low_rank_truth(3, 2, &[2.0, 1.0], 1).unwrap();
        let noise = NoiseModel::gaussian(0.4).unwrap();
        assert!((population_risk(&a0, &d, &a0, &noise).unwrap() - 0.16).abs() < 1e-15);
    }

    #[test]
    fn completion_excess_is_scaled_frobenius() {
        let d = completion_design(4, 5).unwrap();
        let a0 = low_rank_truth(4, 5, &[1.0], 2).unwrap();
        let a = low_rank_truth(4, 5, &[3.0, 1.0], 3).unwrap();
        let noise = NoiseModel::gaussian(0.5).unwrap();
        let lhs = population_risk(&a, &d, &a0, &noise).unwrap() - population_risk(&a0, &d, &a0, &noise).unwrap();
        assert!((lhs - (&a - &a0).frobenius_norm_squared() / 20.0).abs() < 1e-12);
    }

    #[test]
    fn truth_has_requested_spectrum() {
        let a = scaled_truth(6, 4, &[2.0, 1.0], 5.0, 7).unwrap();
        let s = linalg::singular_values(&a).unwrap();
        assert!((s[0] - 10.0 / 3.0).abs() < 1e-12 && (s[1] - 5.0 / 3.0).abs() < 1e-12 && s[2] < 1e-12);
        assert!(low_rank_truth(2, 2, &[1.0, 1.0, 1.0], 1).is_err());
    }

    fn small_problem(theorem: Theorem) -> OracleProblem {
        let d = completion_design(4, 4).unwrap();
        let a0 = low_rank_truth(4, 4, &[2.0], 5).unwrap();
        let params = TheoremParams {
            n: 60,
            x: 1.0,
            r1: 1.0,
            r2: 0.5,
            r3: 0.5,
        };
        OracleProblem::new(d, a0, NoiseModel::gaussian(0.3).unwrap(), theorem, params, 0.05).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let p = small_problem(Theorem::T1);
        let lam = p.lambda().unwrap();
        let zero = RealMatrix::zeros(4, 4);
        let r0 = population_risk(&zero, &p.design, &p.a0, &p.noise).unwrap();
        let rhs = oracle_rhs(&p.design, &p.a0, &p.noise, &zero, Theorem::T1, &p.params, p.dims, &p.constants).unwrap();
        assert!((rhs - (r0 + lam)).abs() < 1e-14);
        let at_truth = p.rhs_at_truth().unwrap();
        let expected = 0.09 + lam * (1.0 + linalg::nuclear_norm(&p.a0).unwrap());
        assert!((at_truth - expected).abs() < 1e-12);

        // the r2 summand is linear in ||A||_{S2}^2
        let p2 = small_problem(Theorem::T2);
        let lam2 = p2.lambda().unwrap();
        let a = RealMatrix::from_diagonal(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let b = RealMatrix::from_diagonal(&[2f64.sqrt(), 0.0, 0.0, 0.0]).unwrap();
        let f = |x: &RealMatrix| oracle_rhs(&p2.design, &p2.a0, &p2.noise, x, Theorem::T2, &p2.params, p2.dims, &p2.constants).unwrap()
            - population_risk(x, &p2.design, &p2.a0, &p2.noise).unwrap()
            - lam2 * (1.0 + p2.params.r1 * linalg::nuclear_norm(x).unwrap());
        assert!((f(&b) - 2.0 * f(&a)).abs() < 1e-12);
        assert!((f(&a) - lam2 * 0.5).abs() < 1e-12);

        let mut bad = p2.params;
        bad.r2 = 0.0;
        assert!(oracle_rhs(&p2.design, &p2.a0, &p2.noise, &a, Theorem::T2, &bad, p2.dims, &p2.constants).is_err());
    }

    #[test]
    fn rhs_dominates_risk() {
        for th in [Theorem::T1, Theorem::T2, Theorem::T3, Theorem::T4] {
            let p = small_problem(th);
            let a = low_rank_truth(4, 4, &[1.0, 0.5], 9).unwrap();
            let rhs = oracle_rhs(&p.design, &p.a0, &p.noise, &a, th, &p.params, p.dims, &p.constants).unwrap();
            assert!(rhs >= population_risk(&a, &p.design, &p.a0, &p.noise).unwrap());
        }
    }

    #[test]
    fn candidate_population_fit_is_optimal_for_completion() {
        // completion: E(A) = ||A - A0||^2 / mT, so the penalized infimum is svt(A0, lambda mT / 2)
        let p = small_problem(Theorem::T1);
        let cands = CandidateSet::new(&p).unwrap();
        let lam = 0.01;
        let (bound, _) = cands.bound(lam, &mut None).unwrap();
        let a = prox::svt(&p.a0, lam * 16.0 / 2.0).unwrap();
        let exact = (&a - &p.a0).frobenius_norm_squared() / 16.0 + lam * (1.0 + linalg::nuclear_norm(&a).unwrap());
        assert!((bound - exact).abs() < 1e-10, "{bound} vs {exact}");
    }

    #[test]
    fn calibration_order_statistic() {
        let c: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(calibrated_constant(&c, 0.95), Some(95.0));
        assert_eq!(calibrated_constant(&c[..10], 0.95), Some(10.0));
        assert_eq!(calibrated_constant(&[], 0.95), None);
        assert_eq!(calibration_target(1.0), 0.95);
        assert!((calibration_target(10.0) - (1.0 - 5.0 * (-10f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [100.0, 200.0, 400.0, 800.0].iter().map(|&n: &f64| (n, 3.0 * n.powf(-0.5))).collect();
        let (s, se) = loglog_slope(&pts).unwrap();
        assert!((s + 0.5).abs() < 1e-12 && se < 1e-12);
    }

    #[test]
    fn oracle_report_counts_trials_and_reproduces() {
        let p = small_problem(Theorem::T1);
        let a = verify_oracle_inequality(&p, 4, 11, false).unwrap();
        assert_eq!(a.trials.len(), 4);
        assert_eq!(a.summary.trials, 4);
        assert!(a.trials.iter().all(|t| t.is_ok() && t.excess_risk >= 0.0));
        let b = verify_oracle_inequality(&p, 4, 11, false).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_trials_jsonl(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    #[test]
    fn calibrated_bound_covers_target() {
        let p = small_problem(Theorem::T1);
        let r = verify_oracle_inequality(&p, 20, 3, true).unwrap();
        let cal = r.calibration.unwrap();
        assert!(cal.holds as f64 >= cal.target * cal.evaluated as f64);
        // doubling x lowers lambda(c = 1), so the threshold constant cannot grow
        let mut p2 = p.clone();
        p2.params.x = 2.0;
        let r2 = verify_oracle_inequality(&p2, 20, 3, true).unwrap();
        assert!(r2.calibration.unwrap().c_abs <= cal.c_abs);
    }

    #[test]
    fn interpolation_regime() {
        // noiseless, fully observed many times over, tiny lambda
        let d = completion_design(3, 3).unwrap();
        let a0 = low_rank_truth(3, 3, &[1.0, 0.5], 4).unwrap();
        let p = OracleProblem::new(d, a0, NoiseModel::gaussian(0.0).unwrap(), Theorem::T1, TheoremParams::nuclear(400, 1.0), 1e-9).unwrap();
        let r = verify_oracle_inequality(&p, 3, 1, false).unwrap();
        for t in &r.trials {
            assert!(t.excess_risk <= 1e-6 && t.bound_holds, "{t:?}");
        }
    }

    #[test]
    fn bernstein_at_the_minimizer_is_zero() {
        let d = completion_design(2, 2).unwrap();
        let a0 = RealMatrix::from_rows(&[&[1.0, 0.5], &[-0.5, 2.0]]).unwrap();
        let spec = BallSpec::nuclear(1.0);
        let star = best_in_ball(&d, &a0, &spec, 1e-10).unwrap();
        assert!((spec.gauge(&star).unwrap() - 1.0).abs() < 1e-8);
        let (el, el2) = bernstein_moments(&d, &a0, 0.25, &star, &star).unwrap();
        assert_eq!((el, el2), (0.0, 0.0));
    }

    #[test]
    fn bernstein_holds_on_multitask_ball() {
        let d = multitask_design(&[vec![vec![0.6, 0.8], vec![1.0, 0.0]], vec![vec![0.0, 1.0]]]).unwrap();
        let a0 = RealMatrix::from_rows(&[&[1.0, -1.0], &[2.0, 0.5]]).unwrap();
        let r = verify_bernstein(&d, &a0, &NoiseModel::gaussian(0.5).unwrap(), &BallSpec::nuclear(1.0), 60, 2).unwrap();
        assert!(r.all_hold);
        assert!(r.samples.iter().all(|s| s.gauge <= 1.0 + 1e-12));
    }
}
