use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use schatten_core::harness::{self, ExperimentReport, OracleProblem, ShapeStudy, VERSION};
use schatten_core::linalg::format_float;
use schatten_core::solver::{self, SolverOptions};
use schatten_core::tuning::{self, CvEntry, TheoremConstants};
use schatten_core::{BallSpec, DesignDistribution, PenaltyConfig};
use serde::Serialize;

use crate::config::{ConfigError, DesignKindConfig, ExperimentConfig, Format};

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("run failed: {0}")]
    Run(String),
}

impl From<schatten_core::Error> for Failure {
    fn from(e: schatten_core::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(format!("writing output: {e}"))
    }
}

type Result<T> = std::result::Result<T, Failure>;

/// The one-line summary, and the reason the run counts as failed, if any.
pub struct Outcome {
    pub summary: String,
    pub failure: Option<String>,
}

pub struct Context {
    pub cfg: ExperimentConfig,
    pub overrides: Vec<String>,
}

fn write_output(dir: &Path, name: &str, body: impl FnOnce(&mut dyn Write) -> schatten_core::Result<()>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut out = BufWriter::new(fs::File::create(dir.join(name))?);
    body(&mut out)?;
    out.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    write_output(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn solver_options(cfg: &ExperimentConfig) -> SolverOptions {
    let mut opts = SolverOptions::default();
    if let Some(it) = cfg.run.max_iters {
        opts.max_iters = it;
    }
    opts
}

fn constants(cfg: &ExperimentConfig, design: &DesignDistribution) -> Result<TheoremConstants> {
    let a0 = cfg.truth_at(design.shape())?;
    Ok(TheoremConstants::from_model(design, &a0, &cfg.noise(), cfg.run.c_abs)?)
}

fn fmt_cfg(c: &PenaltyConfig) -> String {
    format!("({}, {}, {})", format_float(c.lambda1), format_float(c.lambda2), format_float(c.lambda3))
}

#[derive(Serialize)]
struct FitReport<'a> {
    version: &'a str,
    master_seed: u64,
    overrides: &'a [String],
    n: usize,
    cfg: PenaltyConfig,
    iterations: usize,
    converged: bool,
    objective: f64,
    subgradient_residual: f64,
}

pub fn fit(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.cfg;
    let design = cfg.design()?;
    let data = cfg.dataset(&design)?;
    let penalty = match cfg.explicit_penalty() {
        Some(p) => p,
        None => {
            if cfg.truth.is_none() {
                return Err(ConfigError::new("run.lambda", "required when there is no [truth] to derive it from").into());
            }
            let k = constants(cfg, &design)?;
            let params = cfg.params(data.len())?;
            tuning::theory_penalty(cfg.theorem(), &params, cfg.dims(design.shape()), &k)?
        }
    };
    let res = solver::fit(&data, &penalty, &solver_options(cfg))?;
    let dir = &cfg.output.dir;
    if cfg.wants(Format::Csv) {
        write_output(dir, "estimate.csv", |w| res.estimate.write_csv(w))?;
    }
    if cfg.wants(Format::Json) {
        let report = FitReport {
            version: VERSION,
            master_seed: cfg.run.seed,
            overrides: &ctx.overrides,
            n: data.len(),
            cfg: penalty,
            iterations: res.iterations,
            converged: res.converged,
            objective: res.objective(),
            subgradient_residual: res.subgradient_residual,
        };
        write_json(dir, "fit.json", &report)?;
    }
    Ok(Outcome {
        summary: format!(
            "fit: n={} lambda={} iterations={} converged={} objective={}",
            data.len(),
            fmt_cfg(&penalty),
            res.iterations,
            res.converged,
            format_float(res.objective())
        ),
        failure: (!res.converged).then(|| format!("solver stopped after {} iterations without converging", res.iterations)),
    })
}

#[derive(Serialize)]
struct CvReport<'a> {
    version: &'a str,
    master_seed: u64,
    overrides: &'a [String],
    folds: usize,
    best: PenaltyConfig,
    table: &'a [CvEntry],
}

pub fn tune(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.cfg;
    let design = cfg.design()?;
    let data = cfg.dataset(&design)?;
    let grid: Vec<PenaltyConfig> = match (&cfg.run.grid, &cfg.run.theory_grid) {
        (Some(_), Some(_)) => return Err(ConfigError::new("run.theory_grid", "give either run.grid or run.theory_grid").into()),
        (Some(g), None) => g.iter().map(|&[l1, l2, l3]| PenaltyConfig { lambda1: l1, lambda2: l2, lambda3: l3 }).collect(),
        (None, Some(points)) => {
            let k = constants(cfg, &design)?;
            let points: Vec<_> = points.iter().map(|&[r1, r2, r3, x]| (r1, r2, r3, x)).collect();
            tuning::theory_grid(cfg.theorem(), data.len(), &points, cfg.dims(design.shape()), &k)
                .map_err(|e| ConfigError::new("run.theory_grid", e.to_string()))?
        }
        (None, None) => return Err(ConfigError::new("run.grid", "required for tune").into()),
    };
    let opts = solver_options(cfg);
    let cv = tuning::cross_validate(&data, &grid, cfg.run.folds, cfg.run.seed, &opts)?;
    let refit = solver::fit(&data, &cv.best, &opts)?;
    let dir = &cfg.output.dir;
    if cfg.wants(Format::Csv) {
        write_output(dir, "cv.csv", |w| {
            writeln!(w, "lambda1,lambda2,lambda3,cv_risk")?;
            for e in &cv.table {
                let c = &e.cfg;
                writeln!(
                    w,
                    "{},{},{},{}",
                    format_float(c.lambda1),
                    format_float(c.lambda2),
                    format_float(c.lambda3),
                    format_float(e.cv_risk)
                )?;
            }
            Ok(())
        })?;
        write_output(dir, "estimate.csv", |w| refit.estimate.write_csv(w))?;
    }
    if cfg.wants(Format::Json) {
        let report = CvReport {
            version: VERSION,
            master_seed: cfg.run.seed,
            overrides: &ctx.overrides,
            folds: cfg.run.folds,
            best: cv.best,
            table: &cv.table,
        };
        write_json(dir, "cv.json", &report)?;
    }
    Ok(Outcome {
        summary: format!(
            "tune: {} configs, {} folds, best lambda={} cv_risk={}",
            grid.len(),
            cfg.run.folds,
            fmt_cfg(&cv.best),
            format_float(cv.table[0].cv_risk)
        ),
        failure: (!refit.converged).then(|| "refit at the selected penalty did not converge".to_string()),
    })
}

fn oracle_problem(cfg: &ExperimentConfig, n: usize) -> Result<OracleProblem> {
    let design = cfg.design()?;
    let a0 = cfg.truth_at(design.shape())?;
    let dims = cfg.dims(design.shape());
    let params = cfg.params(n)?;
    let mut p = OracleProblem::new(design, a0, cfg.noise(), cfg.theorem(), params, cfg.run.c_abs)?;
    p.dims = dims;
    p.solver = solver_options(cfg);
    Ok(p)
}

fn write_report(cfg: &ExperimentConfig, report: &ExperimentReport) -> Result<()> {
    let dir = &cfg.output.dir;
    if cfg.wants(Format::Jsonl) {
        write_output(dir, "trials.jsonl", |w| report.write_trials_jsonl(w))?;
    }
    if cfg.wants(Format::Json) {
        write_output(dir, "summary.json", |w| report.write_summary_json(w))?;
    }
    if cfg.wants(Format::Csv) {
        write_output(dir, "groups.csv", |w| report.write_csv(w))?;
    }
    Ok(())
}

fn trial_failure(report: &ExperimentReport) -> Option<String> {
    let failed: Vec<_> = report.trials.iter().filter(|t| !t.is_ok()).collect();
    failed.first().map(|t| {
        format!(
            "{} of {} trials failed; first at n={} seed={}: {}",
            failed.len(),
            report.trials.len(),
            t.n,
            t.seed,
            t.failure.as_deref().unwrap_or("")
        )
    })
}

fn report_tail(report: &ExperimentReport) -> String {
    let s = &report.summary;
    let mut line = format!(
        "{} trials ({} failed), mean excess {} (se {})",
        s.trials,
        s.failed,
        format_float(s.mean_excess),
        format_float(s.stderr)
    );
    match &report.calibration {
        Some(c) => line.push_str(&format!(
            ", calibrated c_abs {} holds {}/{} (target {})",
            format_float(c.c_abs),
            c.holds,
            c.evaluated,
            format_float(c.target)
        )),
        None => line.push_str(&format!(
            ", c_abs {} holds in {}",
            format_float(report.provenance.c_abs),
            format_float(s.fraction_holds)
        )),
    }
    line
}

pub fn verify_oracle(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.cfg;
    if cfg.run.n.len() != 1 {
        return Err(ConfigError::new("run.n", "verify-oracle takes exactly one sample size").into());
    }
    let problem = oracle_problem(cfg, cfg.run.n[0])?;
    let mut report = harness::verify_oracle_inequality(&problem, cfg.run.trials, cfg.run.seed, cfg.run.calibrate)?;
    report.provenance.overrides = ctx.overrides.clone();
    write_report(cfg, &report)?;
    Ok(Outcome {
        summary: format!("verify-oracle: n={} {}", cfg.run.n[0], report_tail(&report)),
        failure: trial_failure(&report),
    })
}

pub fn rate(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.cfg;
    let problem = oracle_problem(cfg, cfg.first_n()?)?;
    let mut report = harness::rate_experiment(&problem, &cfg.run.n, cfg.run.trials, cfg.run.seed, cfg.run.calibrate)
        .map_err(|e| match e {
            schatten_core::Error::InvalidArgument { .. } | schatten_core::Error::Empty(_) => {
                Failure::Config(ConfigError::new("run.n", e.to_string()))
            }
            e => e.into(),
        })?;
    report.provenance.overrides = ctx.overrides.clone();
    write_report(cfg, &report)?;
    let fit = report.rate.as_ref().expect("rate experiments fit a slope");
    Ok(Outcome {
        summary: format!(
            "rate: slope {} (se {}, {:?}) over {} sample sizes, {}",
            format_float(fit.slope),
            format_float(fit.slope_stderr),
            fit.regime,
            cfg.run.n.len(),
            report_tail(&report)
        ),
        failure: trial_failure(&report),
    })
}

pub fn dimension_free(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.cfg;
    if cfg.design.kind != DesignKindConfig::Completion {
        return Err(ConfigError::new("design.kind", "dimension-free runs use completion designs").into());
    }
    if cfg.theorem() != schatten_core::Theorem::T1 {
        return Err(ConfigError::new("run.theorem", "dimension-free runs use T1").into());
    }
    if cfg.run.shapes.is_empty() {
        return Err(ConfigError::new("run.shapes", "required for dimension-free").into());
    }
    let truth = cfg.truth.as_ref().ok_or_else(|| ConfigError::new("truth", "section required"))?;
    let s1_norm = truth.s1_norm.ok_or_else(|| ConfigError::new("truth.s1_norm", "required for dimension-free"))?;
    let study = ShapeStudy {
        shapes: cfg.run.shapes.iter().map(|s| (s[0], s[1])).collect(),
        template: cfg.template()?,
        s1_norm,
        noise: cfg.noise(),
        n: cfg.first_n()?,
        x: cfg.run.x,
        c_abs: cfg.run.c_abs,
        truth_seed: truth.seed,
    };
    let mut report = harness::dimension_free_experiment(&study, cfg.run.trials, cfg.run.seed, cfg.run.calibrate)?;
    report.provenance.overrides = ctx.overrides.clone();
    write_report(cfg, &report)?;
    let shapes = report.shapes.as_ref().expect("shape studies compare shapes");
    Ok(Outcome {
        summary: format!(
            "dimension-free: {} shapes at n={}, max/min mean excess {}, rhs invariant {}, {}",
            study.shapes.len(),
            study.n,
            format_float(shapes.ratio),
            shapes.rhs_invariant,
            report_tail(&report)
        ),
        failure: trial_failure(&report),
    })
}

pub fn verify_bernstein(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.cfg;
    let design = cfg.design()?;
    let a0 = cfg.truth_at(design.shape())?;
    let w = cfg.params(2)?;
    let spec = BallSpec {
        r: cfg.run.radius,
        r1: w.r1,
        r2: w.r2,
        r3: w.r3,
    };
    let mut report = harness::verify_bernstein(&design, &a0, &cfg.noise(), &spec, cfg.run.samples, cfg.run.seed)?;
    report.overrides = ctx.overrides.clone();
    let dir = &cfg.output.dir;
    if cfg.wants(Format::Jsonl) {
        write_output(dir, "samples.jsonl", |w| report.write_samples_jsonl(w))?;
    }
    if cfg.wants(Format::Json) {
        write_output(dir, "summary.json", |w| report.write_summary_json(w))?;
    }
    if cfg.wants(Format::Csv) {
        write_output(dir, "a_star.csv", |w| report.a_star.write_csv(w))?;
    }
    let upper = report.samples.iter().filter(|s| !s.upper_holds).count();
    let lower = report.samples.iter().filter(|s| !s.lower_holds).count();
    Ok(Outcome {
        summary: format!(
            "verify-bernstein: {} samples, radius {}, constant {}, upper violations {upper}, lower violations {lower}",
            report.samples.len(),
            format_float(spec.r),
            format_float(report.constant)
        ),
        failure: None,
    })
}
