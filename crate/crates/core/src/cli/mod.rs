//! Config-driven runs: one TOML file describes the problem, the data, the
//! formulation and the solver, and each subcommand writes its reports to
//! the configured output directory.

pub mod demo;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adaptive::{self, SequentialOptions, SequentialOutcome};
use crate::error::{Error, Result};
use crate::formulations::{extract_outliers_tol, FormulationKind, FormulationSpec};
use crate::problems::{DesignProblem, ProblemSpec};
use crate::scenario::{self, expand, MultiPointDataset, PerturbationModel, Scenario, SeededSampler};
use crate::solver::{self, SolveStatus, SolverOptions};
use crate::uq::{self, AnalysisOptions, AnalysisReport};

use demo::{DemoDesign, DemoOptions, RingShape};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit status for each error class.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Io { .. } | Error::Csv(_) => 3,
        Error::InvalidStart(_) | Error::DegenerateGradient { .. } | Error::NonFinite { .. } => 2,
        _ => 1,
    }
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Where scenarios come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "source", deny_unknown_fields)]
pub enum ScenarioSource {
    /// One scenario per row, header naming the parameters.
    Csv { path: PathBuf },
    /// Uniform draws in the problem's parameter box.
    Box { n: usize, seed: u64 },
    /// Ring-shaped draws; two-parameter problems only.
    Ring { n: usize, seed: u64, shape: RingShape },
}

impl ScenarioSource {
    fn problems(&self, what: &str, base: &Path, problem: Option<&dyn DesignProblem>) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            ScenarioSource::Csv { path } => {
                let full = base.join(path);
                if !full.is_file() {
                    out.push(format!("{what}: file {} does not exist", full.display()));
                }
            }
            ScenarioSource::Box { n, .. } | ScenarioSource::Ring { n, .. } => {
                if *n == 0 {
                    out.push(format!("{what}: n must be >= 1"));
                }
            }
        }
        if let (ScenarioSource::Ring { .. }, Some(p)) = (self, problem) {
            if p.n_delta() != 2 {
                out.push(format!("{what}: ring scenarios need 2 parameters, problem has {}", p.n_delta()));
            }
        }
        out
    }

    pub fn load(&self, base: &Path, problem: &dyn DesignProblem) -> Result<Vec<Scenario>> {
        match self {
            ScenarioSource::Csv { path } => scenario::load_csv(base.join(path), problem.n_delta()),
            ScenarioSource::Box { n, seed } => {
                let b = problem.delta_box();
                Ok(scenario::sample_box(&b.lower, &b.upper, *n, &mut SeededSampler::new(*seed, 0x626f78)))
            }
            ScenarioSource::Ring { n, seed, shape } => {
                let half_width = problem.delta_box().upper[0];
                Ok(shape.sample(*n, half_width, &mut SeededSampler::new(*seed, 0x72696e67)))
            }
        }
    }
}

/// How each nominal scenario is expanded into `m` points. `m = 1` keeps
/// the nominals as they are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    pub m: usize,
    pub seed: u64,
    pub model: PerturbationModel,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            m: 1,
            seed: 0,
            model: PerturbationModel::nominal(),
        }
    }
}

impl PerturbationConfig {
    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.m == 0 {
            out.push("perturbation.m must be >= 1".to_string());
        }
        if let Err(e) = self.model.radius.validate() {
            out.push(format!("perturbation: {e}"));
        }
        out
    }

    pub fn dataset(&self, nominal: Vec<Scenario>) -> Result<MultiPointDataset> {
        if self.m == 1 {
            Ok(MultiPointDataset::nominal_only(nominal))
        } else {
            expand(&nominal, &self.model, self.m, &SeededSampler::new(self.seed, 0x7065))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub test: ScenarioSource,
    pub m_test: usize,
    pub gammas: Vec<f64>,
    pub level: f64,
    pub seed: u64,
    pub model: PerturbationModel,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let o = AnalysisOptions::default();
        Self {
            test: ScenarioSource::Box { n: 10_000, seed: 7 },
            m_test: o.m_test,
            gammas: o.gammas,
            level: o.level,
            seed: o.seed,
            model: o.model,
        }
    }
}

impl AnalysisConfig {
    pub fn options(&self) -> AnalysisOptions {
        AnalysisOptions {
            m_test: self.m_test,
            gammas: self.gammas.clone(),
            level: self.level,
            seed: self.seed,
            model: self.model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequentialConfig {
    pub batch: usize,
    pub max_iterations: usize,
    pub target: f64,
    pub level: f64,
    pub pool: ScenarioSource,
    /// Program solved at each iteration; defaults to requiring every
    /// training scenario to succeed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formulation: Option<FormulationSpec>,
}

impl Default for SequentialConfig {
    fn default() -> Self {
        let o = SequentialOptions::default();
        Self {
            batch: o.batch,
            max_iterations: o.max_iterations,
            target: o.target,
            level: o.level,
            pool: ScenarioSource::Box { n: 10_000, seed: 11 },
            formulation: None,
        }
    }
}

impl SequentialConfig {
    pub fn spec(&self) -> FormulationSpec {
        self.formulation.clone().unwrap_or_else(adaptive::default_sequential_spec)
    }
}

/// Everything one run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// Also write the solver's iteration trace for the first start.
    pub trace: bool,
    pub problem: ProblemSpec,
    pub scenarios: ScenarioSource,
    pub perturbation: PerturbationConfig,
    pub formulation: FormulationSpec,
    pub solver: SolverOptions,
    pub analysis: AnalysisConfig,
    pub sequential: SequentialConfig,
    pub demo: DemoOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            trace: false,
            problem: ProblemSpec::IntervalCover {
                lo: 0.0,
                hi: 10.0,
                delta_lo: 0.0,
                delta_hi: 4.0,
            },
            scenarios: ScenarioSource::Box { n: 20, seed: 1 },
            perturbation: PerturbationConfig::default(),
            formulation: FormulationSpec::new(FormulationKind::WorstCase).rho(10.0),
            solver: SolverOptions::default(),
            analysis: AnalysisConfig::default(),
            sequential: SequentialConfig::default(),
            demo: DemoOptions::default(),
        }
    }
}

/// The default configuration with every field spelled out.
pub fn template() -> String {
    let body = toml::to_string_pretty(&RunConfig::default()).expect("default config serializes");
    format!("# riskdesign {VERSION} run configuration\n# relative paths resolve against this file's directory\n\n{body}")
}

/// Which parts of the configuration a command relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Design,
    Analyze,
    DemoEnclosure,
    Sequential,
}

/// A parsed configuration together with its hash and the directory its
/// relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base: PathBuf,
    pub hash: String,
}

impl LoadedConfig {
    pub fn new(config: RunConfig, base: impl Into<PathBuf>) -> Self {
        let canonical = toml::to_string(&config).expect("config serializes");
        let hash = hex::encode(Sha256::digest(canonical.as_bytes()));
        Self {
            config,
            base: base.into(),
            hash,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: RunConfig = toml::from_str(&text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1).unwrap_or(0);
            Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.message().to_string(),
            }
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self::new(config, base))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base.join(&self.config.output_dir)
    }

    /// Every problem that would stop `command`, collected in one pass.
    pub fn problems(&self, command: Command) -> Vec<String> {
        let c = &self.config;
        let mut out = Vec::new();
        if c.output_dir.as_os_str().is_empty() {
            out.push("output_dir must not be empty".to_string());
        }
        out.extend(c.solver.problems().into_iter().map(|p| format!("solver: {p}")));
        if command == Command::DemoEnclosure {
            out.extend(demo_problems(&c.demo));
            return out;
        }
        let problem = match c.problem.build() {
            Ok(p) => Some(p),
            Err(e) => {
                out.push(format!("problem: {e}"));
                None
            }
        };
        let n_r = problem.as_ref().map(|p| p.n_requirements());
        out.extend(c.scenarios.problems("scenarios", &self.base, problem.as_deref()));
        match command {
            Command::Design => {
                out.extend(c.perturbation.problems());
                if let Some(n_r) = n_r {
                    out.extend(c.formulation.problems(n_r).into_iter().map(|p| format!("formulation: {p}")));
                }
            }
            Command::Analyze => {
                out.extend(c.analysis.test.problems("analysis.test", &self.base, problem.as_deref()));
                out.extend(c.analysis.options().problems());
            }
            Command::Sequential => {
                out.extend(c.perturbation.problems());
                let s = &c.sequential;
                if s.batch == 0 || s.max_iterations == 0 {
                    out.push("sequential: batch and max_iterations must be >= 1".to_string());
                }
                if !(0.0..=1.0).contains(&s.target) {
                    out.push("sequential: target must lie in [0, 1]".to_string());
                }
                if !(s.level > 0.0 && s.level < 1.0) {
                    out.push("sequential: level must lie in (0, 1)".to_string());
                }
                out.extend(s.pool.problems("sequential.pool", &self.base, problem.as_deref()));
                if let Some(n_r) = n_r {
                    out.extend(s.spec().problems(n_r).into_iter().map(|p| format!("sequential.formulation: {p}")));
                }
            }
            Command::DemoEnclosure => unreachable!(),
        }
        out
    }

    pub fn validate(&self, command: Command) -> Result<()> {
        let problems = self.problems(command);
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Leading comment line naming the toolkit version and config hash.
    fn stamp(&self, csv: &[u8]) -> Vec<u8> {
        let mut out = format!("# riskdesign {VERSION} config-sha256 {}\n", self.hash).into_bytes();
        out.extend_from_slice(csv);
        out
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let dir = self.output_dir();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join(name);
        write_atomic(&path, bytes)?;
        Ok(path)
    }

    fn write_csv(&self, name: &str, csv: &[u8]) -> Result<PathBuf> {
        self.write(name, &self.stamp(csv))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

fn demo_problems(d: &DemoOptions) -> Vec<String> {
    let mut out = Vec::new();
    if d.n_small < 3 || d.n_large < 3 {
        out.push("demo: datasets need at least 3 scenarios".to_string());
    }
    if d.m == 0 || d.m_test == 0 || d.mc_points == 0 || d.n_test == 0 {
        out.push("demo: m, m_test, mc_points and n_test must be >= 1".to_string());
    }
    if d.sigma_large >= d.n_large {
        out.push("demo: sigma_large must be below n_large".to_string());
    }
    if !(d.gamma > 0.0 && d.gamma <= 1.0) {
        out.push("demo: gamma must lie in (0, 1]".to_string());
    }
    if d.rho_ladder.is_empty() || d.rho_ladder.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        out.push("demo: rho_ladder must hold finite values >= 0".to_string());
    }
    if !(d.half_width > 0.0 && d.r_max > 0.0 && d.radius_factor >= 0.0) {
        out.push("demo: half_width and r_max must be > 0, radius_factor >= 0".to_string());
    }
    out.extend(d.solver.problems().into_iter().map(|p| format!("demo.solver: {p}")));
    out
}

/// Outcome of a design run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub version: String,
    pub config_hash: String,
    pub problem: String,
    pub formulation: FormulationKind,
    pub theta: Vec<f64>,
    pub objective: f64,
    pub sigma: usize,
    pub outliers: Vec<usize>,
    pub status: SolveStatus,
    pub max_violation: f64,
    pub outer_iterations: usize,
    pub evaluations: usize,
    pub wall_time_s: f64,
}

fn theta_csv(theta: &[f64]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["theta"])?;
    for v in theta {
        w.write_record([format!("{v:.17e}")])?;
    }
    w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Builds and solves the configured program, then writes `design.json`,
/// `theta.csv` and `outliers.csv`.
pub fn cmd_design(cfg: &LoadedConfig) -> Result<DesignReport> {
    cfg.validate(Command::Design)?;
    let started = Instant::now();
    let c = &cfg.config;
    let problem = c.problem.build()?;
    let nominal = c.scenarios.load(&cfg.base, problem.as_ref())?;
    let data = c.perturbation.dataset(nominal)?;
    let program = c.formulation.build(problem.clone(), &data)?;
    let sol = solver::multistart(&program, &c.solver)?;
    if c.trace {
        let x0 = &solver::multistart_points(&program, &c.solver)[0];
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["iteration", "objective", "max_violation", "penalty"])?;
        let mut rows = Vec::new();
        solver::solve_traced(&program, x0, &c.solver, &mut |r| rows.push(r))?;
        for r in rows {
            w.write_record([r.iteration.to_string(), uq::fmt(r.objective), uq::fmt(r.max_violation), uq::fmt(r.penalty)])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        cfg.write_csv("solver_trace.csv", &bytes)?;
    }
    let theta = program.theta(&sol.x).to_vec();
    let gamma = match &c.formulation.gamma {
        Some(g) if c.formulation.kind != FormulationKind::WorstCase => g.per_requirement(problem.n_requirements(), "gamma")?,
        _ => vec![1.0; problem.n_requirements()],
    };
    let outliers = extract_outliers_tol(problem.as_ref(), &data, &theta, &gamma, c.solver.constraint_tolerance.sqrt())?;
    let report = DesignReport {
        version: VERSION.to_string(),
        config_hash: cfg.hash.clone(),
        problem: problem.name().to_string(),
        formulation: c.formulation.kind,
        objective: problem.objective(&theta),
        theta,
        sigma: outliers.sigma,
        outliers: outliers.outliers.clone(),
        status: sol.status,
        max_violation: sol.max_violation,
        outer_iterations: sol.outer_iterations,
        evaluations: sol.evaluations,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    cfg.write_csv("theta.csv", &theta_csv(&report.theta)?)?;
    cfg.write_csv("outliers.csv", &outliers.to_csv()?)?;
    cfg.write_json("design.json", &report)?;
    Ok(report)
}

/// Reads a design vector from a `design.json` report or a one-column
/// CSV whose header is `theta`.
pub fn read_theta(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        #[derive(Deserialize)]
        struct Design {
            theta: Vec<f64>,
        }
        let d: Design = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        return Ok(d.theta);
    }
    let mut theta = Vec::new();
    let mut header = false;
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header {
            header = true;
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            message: format!("'{line}' is not a number"),
        })?;
        theta.push(v);
    }
    Ok(theta)
}

/// Reliability and robustness of the design in `design`; writes
/// `analysis.csv`.
pub fn cmd_analyze(cfg: &LoadedConfig, design: &Path) -> Result<AnalysisReport> {
    cfg.validate(Command::Analyze)?;
    let c = &cfg.config;
    let problem = c.problem.build()?;
    let theta = read_theta(design)?;
    if theta.len() != problem.n_theta() {
        return Err(Error::Dimension {
            what: format!("design {}", design.display()),
            expected: problem.n_theta(),
            found: theta.len(),
        });
    }
    problem.check_theta(&theta)?;
    let test = c.analysis.test.load(&cfg.base, problem.as_ref())?;
    let report = uq::analyze(problem.as_ref(), &theta, &test, &c.analysis.options())?;
    cfg.write_csv("analysis.csv", &report.to_csv()?)?;
    Ok(report)
}

/// Everything the enclosure demo produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoBundle {
    pub version: String,
    pub config_hash: String,
    pub table_one: Vec<DemoDesign>,
    pub table_two: Vec<DemoDesign>,
    pub analyses: Vec<AnalysisReport>,
}

/// Runs both enclosure studies and writes `table1.csv`, `table2.csv`,
/// one `classify_<design>.csv` per design, one `analysis_<design>.csv`
/// per large-data design, and `demo.json`.
pub fn cmd_demo_enclosure(cfg: &LoadedConfig) -> Result<DemoBundle> {
    cfg.validate(Command::DemoEnclosure)?;
    let options = &cfg.config.demo;
    let problem = demo::enclosure(options);

    let (one, sets) = demo::table_one(options)?;
    cfg.write_csv("table1.csv", &demo::table_one_csv(&one)?)?;
    for d in &one {
        let key = demo::dataset_key(d);
        let data = &sets.iter().find(|(k, _)| k == key).expect("dataset present").1;
        cfg.write_csv(&format!("classify_{}.csv", d.label), &demo::classification_csv(problem.as_ref(), data, d)?)?;
    }

    let (two, reports, sets) = demo::example_two(options)?;
    cfg.write_csv("table2.csv", &demo::table_two_csv(&two, &reports)?)?;
    for (d, r) in two.iter().zip(&reports) {
        let data = &sets[usize::from(d.m > 1)].1;
        cfg.write_csv(&format!("classify_{}.csv", d.label), &demo::classification_csv(problem.as_ref(), data, d)?)?;
        cfg.write_csv(&format!("analysis_{}.csv", d.label), &r.to_csv()?)?;
    }

    let bundle = DemoBundle {
        version: VERSION.to_string(),
        config_hash: cfg.hash.clone(),
        table_one: one,
        table_two: two,
        analyses: reports,
    };
    cfg.write_json("demo.json", &bundle)?;
    Ok(bundle)
}

/// Sequential design campaign; writes `sequential_trace.csv` and
/// `sequential.json`.
pub fn cmd_sequential(cfg: &LoadedConfig) -> Result<SequentialOutcome> {
    cfg.validate(Command::Sequential)?;
    let c = &cfg.config;
    let problem: Arc<dyn DesignProblem> = c.problem.build()?;
    let nominal = c.scenarios.load(&cfg.base, problem.as_ref())?;
    let initial = c.perturbation.dataset(nominal)?;
    let pool = c.sequential.pool.load(&cfg.base, problem.as_ref())?;
    let options = SequentialOptions {
        batch: c.sequential.batch,
        max_iterations: c.sequential.max_iterations,
        target: c.sequential.target,
        level: c.sequential.level,
        solver: c.solver.clone(),
    };
    let outcome = adaptive::sequential_design(problem, &initial, &c.sequential.spec(), &pool, &options)?;
    cfg.write_csv("sequential_trace.csv", &outcome.trace_csv()?)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        version: &'a str,
        config_hash: &'a str,
        status: adaptive::SequentialStatus,
        added: &'a [usize],
        theta: &'a [f64],
    }
    cfg.write_json(
        "sequential.json",
        &Summary {
            version: VERSION,
            config_hash: &cfg.hash,
            status: outcome.status,
            added: &outcome.added,
            theta: outcome.final_theta(),
        },
    )?;
    Ok(outcome)
}

/// Applies `RDO_THREADS` to the global worker pool.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("RDO_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("RDO_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_round_trips() {
        let text = template();
        let parsed: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(parsed, RunConfig::default());
    }

    #[test]
    fn hash_tracks_content() {
        let a = LoadedConfig::new(RunConfig::default(), ".");
        let b = LoadedConfig::new(RunConfig::default(), ".");
        let mut changed = RunConfig::default();
        changed.solver.seed = 9;
        let c = LoadedConfig::new(changed, ".");
        assert_eq!(a.hash, b.hash);
        assert_ne!(a.hash, c.hash);
        assert_eq!(a.hash.len(), 64);
    }

    #[test]
    fn validation_lists_every_problem() {
        let mut config = RunConfig::default();
        config.scenarios = ScenarioSource::Csv {
            path: "missing.csv".into(),
        };
        config.solver.fd_step = 0.0;
        config.formulation = FormulationSpec::new(FormulationKind::WorstCase);
        let problems = LoadedConfig::new(config, "/nonexistent").problems(Command::Design);
        assert_eq!(problems.len(), 3, "{problems:?}");
        assert!(problems.iter().any(|p| p.contains("missing.csv")));
        assert!(problems.iter().any(|p| p.contains("fd_step")));
        assert!(problems.iter().any(|p| p.contains("rho")));
    }

    #[test]
    fn exit_codes_by_class() {
        assert_eq!(exit_code(&Error::Validation(vec![])), 1);
        assert_eq!(exit_code(&Error::io("x", std::io::Error::other("boom"))), 3);
        assert_eq!(exit_code(&Error::InvalidStart("x".into())), 2);
    }

    #[test]
    fn unknown_field_is_parse_error_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "trace = true\nbogus = 1\n").unwrap();
        match LoadedConfig::load(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn theta_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("theta.csv");
        let theta = [0.1, -2.5, 1e-9];
        let cfg = LoadedConfig::new(RunConfig::default(), dir.path());
        std::fs::write(&path, cfg.stamp(&theta_csv(&theta).unwrap())).unwrap();
        assert_eq!(read_theta(&path).unwrap(), theta);
    }
}
