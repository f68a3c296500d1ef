//! Experiment configuration: a TOML file with `[design]`, `[truth]`,
//! `[noise]`, `[data]`, `[run]` and `[output]` tables. Unknown keys are
//! rejected. `--set key=value` overrides are applied to the parsed table
//! before it is checked.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use schatten_core::design::DatasetFormat;
use schatten_core::harness::{low_rank_truth, scaled_truth};
use schatten_core::tuning::{Dimensions, Theorem, TheoremParams};
use schatten_core::{completion_design, multitask_design, Dataset, DesignDistribution, NoiseModel, PenaltyConfig, RealMatrix};
use serde::Deserialize;

/// A configuration problem, tied to the key that caused it.
#[derive(Debug, thiserror::Error)]
#[error("{key}: {reason}")]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

fn ensure(cond: bool, key: &str, reason: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError::new(key, reason))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub design: DesignSection,
    #[serde(default)]
    pub truth: Option<TruthSection>,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub data: Option<DataSection>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKindConfig {
    Completion,
    Multitask,
    File,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub kind: DesignKindConfig,
    pub m: Option<usize>,
    pub t: Option<usize>,
    /// JSON file: a list of tasks, each a list of vectors in `R^m`.
    pub task_vectors: Option<PathBuf>,
    /// Design in the library's text form.
    pub path: Option<PathBuf>,
    /// Drop the `sqrt(ln(mT))` factor from the regularization level.
    #[serde(default)]
    pub drop_log_factor: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSection {
    pub rank: Option<usize>,
    pub spectrum: Option<Vec<f64>>,
    pub s1_norm: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// CSV file with one matrix row per line.
    pub matrix: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Uniform,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default = "gaussian")]
    pub kind: NoiseKind,
    pub sigma: Option<f64>,
    pub half_width: Option<f64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            kind: NoiseKind::Gaussian,
            sigma: Some(0.0),
            half_width: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    pub format: DatasetFormat,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_theorem")]
    pub theorem: String,
    #[serde(default = "unit")]
    pub x: f64,
    #[serde(default = "unit")]
    pub c_abs: f64,
    #[serde(default)]
    pub calibrate: bool,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub r3: Option<f64>,
    /// Explicit `[lambda1, lambda2, lambda3]`.
    pub lambda: Option<[f64; 3]>,
    /// Explicit penalties for cross-validation.
    pub grid: Option<Vec<[f64; 3]>>,
    /// `[r1, r2, r3, x]` tuples mapped through the theoretical level.
    pub theory_grid: Option<Vec<[f64; 4]>>,
    #[serde(default = "five")]
    pub folds: usize,
    #[serde(default = "two_hundred")]
    pub samples: usize,
    #[serde(default = "unit")]
    pub radius: f64,
    #[serde(default)]
    pub shapes: Vec<[usize; 2]>,
    pub max_iters: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        toml::from_str("").expect("every run key has a default")
    }
}

fn gaussian() -> NoiseKind {
    NoiseKind::Gaussian
}
fn one() -> usize {
    1
}
fn five() -> usize {
    5
}
fn two_hundred() -> usize {
    200
}
fn unit() -> f64 {
    1.0
}
fn default_theorem() -> String {
    "T1".into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Jsonl,
    Json,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_dir(),
            formats: all_formats(),
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Jsonl, Format::Json]
}

/// Parse `raw` as a TOML value, falling back to a bare string.
fn parse_override_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key just written"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Set the dotted `key` in `table`, creating intermediate tables.
fn apply_override(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    ensure(parts.iter().all(|p| !p.is_empty()), key, "malformed key")?;
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::new(key, format!("`{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Reads, overrides and checks a config. Relative paths inside the file
/// resolve against the file's directory. Returns the config and the
/// overrides in the form they are logged.
pub fn load(path: &Path, overrides: &[String]) -> Result<(ExperimentConfig, Vec<String>)> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::new("--config", format!("{}: {e}", path.display())))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::new("--config", e.to_string().trim_end().to_string()))?;
    let mut logged = Vec::with_capacity(overrides.len());
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| ConfigError::new("--set", format!("expected key=value, got `{o}`")))?;
        let (key, raw) = (key.trim(), raw.trim());
        apply_override(&mut table, key, parse_override_value(raw))?;
        logged.push(format!("{key}={raw}"));
    }
    let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let key = e.path().to_string();
                // the toml error repeats the path on a second line
        let reason = e.into_inner().to_string().lines().next().unwrap_or_default().to_string();
        ConfigError::new(if key == "." { "config".into() } else { key }, reason)
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    cfg.resolve_paths(base);
    cfg.validate()?;
    Ok((cfg, logged))
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    ensure(v.is_finite() && v > 0.0, key, format!("must be finite and > 0, got {v}"))
}

fn nonnegative(key: &str, v: f64) -> Result<()> {
    ensure(v.is_finite() && v >= 0.0, key, format!("must be finite and >= 0, got {v}"))
}

fn file_exists(key: &str, p: &Path) -> Result<()> {
    ensure(p.is_file(), key, format!("file {} does not exist", p.display()))
}

impl ExperimentConfig {
    fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.design.task_vectors, &mut self.design.path].into_iter().flatten() {
            resolve(base, p);
        }
        if let Some(m) = self.truth.as_mut().and_then(|t| t.matrix.as_mut()) {
            resolve(base, m);
        }
        if let Some(d) = self.data.as_mut() {
            resolve(base, &mut d.path);
        }
    }

    /// Range and presence checks that do not depend on the subcommand.
    fn validate(&self) -> Result<()> {
        let d = &self.design;
        match d.kind {
            DesignKindConfig::Completion => {
                for (key, v) in [("design.m", d.m), ("design.t", d.t)] {
                    let v = v.ok_or_else(|| ConfigError::new(key, "required for completion designs"))?;
                    ensure(v >= 1, key, "must be at least 1")?;
                }
            }
            DesignKindConfig::Multitask => {
                let p = d
                    .task_vectors
                    .as_ref()
                    .ok_or_else(|| ConfigError::new("design.task_vectors", "required for multitask designs"))?;
                file_exists("design.task_vectors", p)?;
            }
            DesignKindConfig::File => {
                let p = d.path.as_ref().ok_or_else(|| ConfigError::new("design.path", "required for file designs"))?;
                file_exists("design.path", p)?;
            }
        }
        if let Some(t) = &self.truth {
            if let Some(p) = &t.matrix {
                file_exists("truth.matrix", p)?;
                ensure(t.rank.is_none() && t.spectrum.is_none() && t.s1_norm.is_none(), "truth.matrix", "excludes rank, spectrum and s1_norm")?;
            } else {
                ensure(t.rank.is_some() || t.spectrum.is_some(), "truth", "needs `matrix`, `rank` or `spectrum`")?;
            }
            if let Some(r) = t.rank {
                ensure(r >= 1, "truth.rank", "must be at least 1")?;
            }
            if let Some(s) = &t.spectrum {
                ensure(!s.is_empty(), "truth.spectrum", "must not be empty")?;
                for v in s {
                    positive("truth.spectrum", *v)?;
                }
                if let Some(r) = t.rank {
                    ensure(r == s.len(), "truth.rank", format!("is {r} but truth.spectrum has {} values", s.len()))?;
                }
            }
            if let Some(s) = t.s1_norm {
                positive("truth.s1_norm", s)?;
            }
        }
        match self.noise.kind {
            NoiseKind::Gaussian => {
                let s = self.noise.sigma.ok_or_else(|| ConfigError::new("noise.sigma", "required for gaussian noise"))?;
                nonnegative("noise.sigma", s)?;
                ensure(self.noise.half_width.is_none(), "noise.half_width", "only valid for uniform noise")?;
            }
            NoiseKind::Uniform => {
                let h = self
                    .noise
                    .half_width
                    .ok_or_else(|| ConfigError::new("noise.half_width", "required for uniform noise"))?;
                positive("noise.half_width", h)?;
                ensure(self.noise.sigma.is_none(), "noise.sigma", "only valid for gaussian noise")?;
            }
        }
        if let Some(data) = &self.data {
            file_exists("data.path", &data.path)?;
        }

        let r = &self.run;
        for (i, &n) in r.n.iter().enumerate() {
            ensure(n >= 2, &format!("run.n[{i}]"), format!("must be at least 2, got {n}"))?;
        }
        ensure(r.trials >= 1, "run.trials", "must be at least 1")?;
        Theorem::parse(&r.theorem).map_err(|_| ConfigError::new("run.theorem", format!("expected T1..T4, got `{}`", r.theorem)))?;
        positive("run.x", r.x)?;
        positive("run.c_abs", r.c_abs)?;
        for (key, v) in [("run.r1", r.r1), ("run.r2", r.r2), ("run.r3", r.r3)] {
            if let Some(v) = v {
                nonnegative(key, v)?;
            }
        }
        if let Some(l) = r.lambda {
            for (i, v) in l.iter().enumerate() {
                nonnegative(&format!("run.lambda[{i}]"), *v)?;
            }
        }
        if let Some(g) = &r.grid {
            ensure(!g.is_empty(), "run.grid", "must not be empty")?;
            for (i, row) in g.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    nonnegative(&format!("run.grid[{i}][{j}]"), *v)?;
                }
            }
        }
        if let Some(g) = &r.theory_grid {
            ensure(!g.is_empty(), "run.theory_grid", "must not be empty")?;
            for (i, row) in g.iter().enumerate() {
                for (j, v) in row[..3].iter().enumerate() {
                    nonnegative(&format!("run.theory_grid[{i}][{j}]"), *v)?;
                }
                positive(&format!("run.theory_grid[{i}][3]"), row[3])?;
            }
        }
        ensure(r.folds >= 2, "run.folds", "must be at least 2")?;
        ensure(r.samples >= 1, "run.samples", "must be at least 1")?;
        positive("run.radius", r.radius)?;
        for (i, s) in r.shapes.iter().enumerate() {
            ensure(s[0] >= 1 && s[1] >= 1, &format!("run.shapes[{i}]"), "dimensions must be at least 1")?;
        }
        if let Some(it) = r.max_iters {
            ensure(it >= 1, "run.max_iters", "must be at least 1")?;
        }
        if !self.output.formats.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::new("output.formats", "must name at least one format"))
        }
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }

    pub fn theorem(&self) -> Theorem {
        Theorem::parse(&self.run.theorem).expect("checked in validate")
    }

    /// Penalty weights: the configured ones, else 1 for each term the theorem uses.
    pub fn params(&self, n: usize) -> Result<TheoremParams> {
        let th = self.theorem();
        let uses = match th {
            Theorem::T1 => [true, false, false],
            Theorem::T2 => [true, true, false],
            Theorem::T3 => [true, false, true],
            Theorem::T4 => [true, true, true],
        };
        let given = [self.run.r1, self.run.r2, self.run.r3];
        let mut w = [0.0; 3];
        for (i, key) in ["run.r1", "run.r2", "run.r3"].iter().enumerate() {
            w[i] = match (uses[i], given[i]) {
                (true, Some(v)) => {
                    positive(key, v)?;
                    v
                }
                (true, None) => 1.0,
                (false, Some(v)) if v != 0.0 => {
                    return Err(ConfigError::new(*key, format!("not used by theorem {th}")));
                }
                (false, _) => 0.0,
            };
        }
        Ok(TheoremParams {
            n,
            x: self.run.x,
            r1: w[0],
            r2: w[1],
            r3: w[2],
        })
    }

    pub fn dims(&self, shape: (usize, usize)) -> Dimensions {
        if self.design.drop_log_factor {
            Dimensions::completion(shape.0, shape.1)
        } else {
            Dimensions::new(shape.0, shape.1)
        }
    }

    pub fn noise(&self) -> NoiseModel {
        match self.noise.kind {
            NoiseKind::Gaussian => NoiseModel::Gaussian {
                sigma: self.noise.sigma.expect("checked"),
            },
            NoiseKind::Uniform => NoiseModel::BoundedUniform {
                half_width: self.noise.half_width.expect("checked"),
            },
        }
    }

    pub fn design(&self) -> Result<DesignDistribution> {
        let d = &self.design;
        match d.kind {
            DesignKindConfig::Completion => completion_design(d.m.expect("checked"), d.t.expect("checked"))
                .map_err(|e| ConfigError::new("design", e.to_string())),
            DesignKindConfig::Multitask => {
                let p = d.task_vectors.as_ref().expect("checked");
                let text = fs::read_to_string(p).map_err(|e| ConfigError::new("design.task_vectors", e.to_string()))?;
                let vectors: Vec<Vec<Vec<f64>>> =
                    serde_json::from_str(&text).map_err(|e| ConfigError::new("design.task_vectors", e.to_string()))?;
                let design = multitask_design(&vectors).map_err(|e| ConfigError::new("design.task_vectors", e.to_string()))?;
                self.check_shape(design)
            }
            DesignKindConfig::File => {
                let p = d.path.as_ref().expect("checked");
                let f = fs::File::open(p).map_err(|e| ConfigError::new("design.path", e.to_string()))?;
                let design = DesignDistribution::read_text(BufReader::new(f)).map_err(|e| ConfigError::new("design.path", e.to_string()))?;
                self.check_shape(design)
            }
        }
    }

    fn check_shape(&self, design: DesignDistribution) -> Result<DesignDistribution> {
        let (m, t) = design.shape();
        if let Some(cm) = self.design.m {
            ensure(cm == m, "design.m", format!("is {cm} but the design has {m} rows"))?;
        }
        if let Some(ct) = self.design.t {
            ensure(ct == t, "design.t", format!("is {ct} but the design has {t} columns"))?;
        }
        Ok(design)
    }

    fn truth_section(&self) -> Result<&TruthSection> {
        self.truth.as_ref().ok_or_else(|| ConfigError::new("truth", "section required"))
    }

    /// Singular values of the truth before scaling: `spectrum`, else `rank, rank-1, ..., 1`.
    pub fn template(&self) -> Result<Vec<f64>> {
        let t = self.truth_section()?;
        match (&t.spectrum, t.rank) {
            (Some(s), _) => Ok(s.clone()),
            (None, Some(r)) => Ok((1..=r).rev().map(|k| k as f64).collect()),
            (None, None) => Err(ConfigError::new("truth.rank", "required here")),
        }
    }

    pub fn truth_at(&self, shape: (usize, usize)) -> Result<RealMatrix> {
        let t = self.truth_section()?;
        let (m, n) = shape;
        if let Some(p) = &t.matrix {
            let f = fs::File::open(p).map_err(|e| ConfigError::new("truth.matrix", e.to_string()))?;
            let a = RealMatrix::read_csv(BufReader::new(f)).map_err(|e| ConfigError::new("truth.matrix", e.to_string()))?;
            ensure(a.shape() == shape, "truth.matrix", format!("is {:?} but the design is {m}x{n}", a.shape()))?;
            return Ok(a);
        }
        let template = self.template()?;
        ensure(template.len() <= m.min(n), "truth.rank", format!("exceeds min(m, t) = {}", m.min(n)))?;
        let built = match t.s1_norm {
            Some(s) => scaled_truth(m, n, &template, s, t.seed),
            None => low_rank_truth(m, n, &template, t.seed),
        };
        built.map_err(|e| ConfigError::new("truth", e.to_string()))
    }

    pub fn explicit_penalty(&self) -> Option<PenaltyConfig> {
        self.run.lambda.map(|[l1, l2, l3]| PenaltyConfig {
            lambda1: l1,
            lambda2: l2,
            lambda3: l3,
        })
    }

    pub fn first_n(&self) -> Result<usize> {
        self.run.n.first().copied().ok_or_else(|| ConfigError::new("run.n", "required here"))
    }

    /// The `[data]` file, or a sample drawn from design, truth and noise.
    pub fn dataset(&self, design: &DesignDistribution) -> Result<Dataset> {
        if let Some(d) = &self.data {
            let f = fs::File::open(&d.path).map_err(|e| ConfigError::new("data.path", e.to_string()))?;
            return Dataset::read_csv(BufReader::new(f), design.shape(), d.format)
                .map_err(|e| ConfigError::new("data.path", e.to_string()));
        }
        let a0 = self.truth_at(design.shape())?;
        let n = self.first_n()?;
        schatten_core::generate_dataset(design, &a0, &self.noise(), n, self.run.seed)
            .map_err(|e| ConfigError::new("data", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("exp.toml");
        fs::write(&p, text).unwrap();
        p
    }

    const BASE: &str = "[design]\nkind = \"completion\"\nm = 4\nt = 3\n[run]\nn = [100]\n";

    #[test]
    fn defaults_fill_in() {
        let dir = tempfile::tempdir().unwrap();
        let (cfg, logged) = load(&write(dir.path(), BASE), &[]).unwrap();
        assert!(logged.is_empty());
        assert_eq!(cfg.run.trials, 1);
        assert_eq!(cfg.theorem(), Theorem::T1);
        assert_eq!(cfg.noise(), NoiseModel::Gaussian { sigma: 0.0 });
        assert_eq!(cfg.output.formats.len(), 3);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let err = load(&write(dir.path(), &format!("{BASE}lambda_one = 0.1\n")), &[]).unwrap_err();
        assert!(err.to_string().contains("lambda_one"), "{err}");
        let err = load(&write(dir.path(), BASE), &["run.lamda=[0.1,0,0]".into()]).unwrap_err();
        assert!(err.to_string().contains("lamda"), "{err}");
    }

    #[test]
    fn negative_n_names_the_key() {
        let dir = tempfile::tempdir().unwrap();
        let err = load(&write(dir.path(), &BASE.replace("[100]", "[-5]")), &[]).unwrap_err();
        assert!(err.key.starts_with("run.n"), "{err}");
    }

    #[test]
    fn overrides_are_applied_and_logged() {
        let dir = tempfile::tempdir().unwrap();
        let sets = vec!["run.trials=7".to_string(), "noise.sigma = 0.25".to_string(), "run.theorem=T3".to_string()];
        let (cfg, logged) = load(&write(dir.path(), BASE), &sets).unwrap();
        assert_eq!(cfg.run.trials, 7);
        assert_eq!(cfg.noise(), NoiseModel::Gaussian { sigma: 0.25 });
        assert_eq!(cfg.theorem(), Theorem::T3);
        assert_eq!(logged, ["run.trials=7", "noise.sigma=0.25", "run.theorem=T3"]);
    }

    #[test]
    fn missing_files_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[design]\nkind = \"file\"\npath = \"nowhere.txt\"\n";
        let err = load(&write(dir.path(), text), &[]).unwrap_err();
        assert_eq!(err.key, "design.path");
    }

    #[test]
    fn weights_follow_the_theorem() {
        let dir = tempfile::tempdir().unwrap();
        let (cfg, _) = load(&write(dir.path(), BASE), &["run.theorem=T4".into(), "run.r2=0.5".into()]).unwrap();
        let p = cfg.params(100).unwrap();
        assert_eq!((p.r1, p.r2, p.r3), (1.0, 0.5, 1.0));
        let (cfg, _) = load(&write(dir.path(), BASE), &["run.r3=2".into()]).unwrap();
        assert_eq!(cfg.params(100).unwrap_err().key, "run.r3");
    }

    #[test]
    fn template_defaults_to_decreasing_ranks() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!("{BASE}[truth]\nrank = 3\ns1_norm = 6.0\n");
        let (cfg, _) = load(&write(dir.path(), &text), &[]).unwrap();
        assert_eq!(cfg.template().unwrap(), [3.0, 2.0, 1.0]);
        let a0 = cfg.truth_at((4, 3)).unwrap();
        assert!((schatten_core::linalg::nuclear_norm(&a0).unwrap() - 6.0).abs() < 1e-12);
    }
}
