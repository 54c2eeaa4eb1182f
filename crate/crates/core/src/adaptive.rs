//! Cheaper robust designs: adversarial perturbations of a few scenarios,
//! and sequential augmentation of the training set from a test pool.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulations::{extract_outliers_tol, FormulationKind, FormulationSpec};
use crate::problems::DesignProblem;
use crate::scenario::{MultiPointDataset, Provenance, Scenario, SeededSampler};
use crate::solver::{self, NlpSolution, SolveStatus, SolverOptions};
use crate::uq::{self, Estimate};

const DEGENERATE_NORM: f64 = 1e-12;

/// Index and value of the largest requirement; ties go to the smallest
/// index.
pub fn worst_requirement(problem: &dyn DesignProblem, theta: &[f64], delta: &[f64]) -> (usize, f64) {
    let mut r = vec![0.0; problem.n_requirements()];
    problem.requirements(theta, delta, &mut r);
    let mut best = (0, f64::NEG_INFINITY);
    for (k, &v) in r.iter().enumerate() {
        if v > best.1 {
            best = (k, v);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialPoint {
    pub point: Vec<f64>,
    pub k_hat: usize,
    pub gradient_norm: f64,
}

/// One first-order step of length `mu` from `delta_n` along the gradient
/// of the worst requirement at the baseline design.
pub fn adversarial_point(
    problem: &dyn DesignProblem,
    theta_hat: &[f64],
    delta_n: &[f64],
    mu: f64,
    fd_step: f64,
) -> Result<AdversarialPoint> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidInput(format!("step length must be > 0, got {mu}")));
    }
    if problem.n_requirements() == 0 {
        return Err(Error::InvalidInput("problem has no requirements".into()));
    }
    let (k_hat, _) = worst_requirement(problem, theta_hat, delta_n);
    let n_r = problem.n_requirements();
    let grad = solver::finite_diff_gradient(
        |d| {
            let mut r = vec![0.0; n_r];
            problem.requirements(theta_hat, d, &mut r);
            r[k_hat]
        },
        delta_n,
        fd_step,
    )?;
    let norm = crate::scenario::norm(&grad);
    if !(norm >= DEGENERATE_NORM) {
        return Err(Error::DegenerateGradient { norm });
    }
    let point = delta_n.iter().zip(&grad).map(|(d, g)| d + mu * g / norm).collect();
    Ok(AdversarialPoint {
        point,
        k_hat,
        gradient_norm: norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Closest to the failure boundary first.
    pub indices: Vec<usize>,
    /// Every negative-valued scenario was taken while some scenario was
    /// passed over for already violating.
    pub shortage: bool,
}

/// The `count` scenarios whose worst requirement is negative and closest
/// to zero. Scenarios already violating a requirement are never chosen.
pub fn select_scenarios(
    problem: &dyn DesignProblem,
    theta_hat: &[f64],
    scenarios: &[Scenario],
    count: usize,
) -> Result<Selection> {
    if count > scenarios.len() {
        return Err(Error::InvalidInput(format!(
            "cannot select {count} of {} scenarios",
            scenarios.len()
        )));
    }
    let values: Vec<f64> = scenarios
        .iter()
        .map(|s| worst_requirement(problem, theta_hat, s.coords()).1)
        .collect();
    Ok(select_by_values(&values, count))
}

/// [`select_scenarios`] on precomputed worst-requirement values.
pub fn select_by_values(values: &[f64], count: usize) -> Selection {
    let mut negative: Vec<usize> = (0..values.len()).filter(|&i| values[i] < 0.0).collect();
    negative.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let shortage = negative.len() <= count && negative.len() < values.len();
    negative.truncate(count);
    Selection {
        indices: negative,
        shortage,
    }
}

/// Which scenarios were perturbed, along which requirement, and from
/// which baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbBudget {
    pub q: Vec<u8>,
    pub k_hat: Vec<usize>,
    pub theta_hat: Vec<f64>,
    pub mu: f64,
    pub shortage: bool,
    /// Scenarios whose gradient vanished and got a random surface point.
    pub fallbacks: Vec<usize>,
}

/// Training set where the `count` scenarios nearest the boundary of
/// `theta_hat` carry one adversarial point besides the nominal.
pub fn adversarial_dataset(
    problem: &dyn DesignProblem,
    theta_hat: &[f64],
    scenarios: &[Scenario],
    count: usize,
    mu: f64,
    fd_step: f64,
    sampler: &SeededSampler,
) -> Result<(MultiPointDataset, PerturbBudget)> {
    let selection = select_scenarios(problem, theta_hat, scenarios, count)?;
    let n = scenarios.len();
    let mut q = vec![0u8; n];
    let mut k_hat: Vec<usize> = scenarios
        .iter()
        .map(|s| worst_requirement(problem, theta_hat, s.coords()).0)
        .collect();
    let mut groups: Vec<Vec<Vec<f64>>> = scenarios.iter().map(|s| vec![s.0.clone()]).collect();
    let mut fallbacks = Vec::new();
    for &i in &selection.indices {
        let delta = scenarios[i].coords();
        let point = match adversarial_point(problem, theta_hat, delta, mu, fd_step) {
            Ok(a) => {
                k_hat[i] = a.k_hat;
                a.point
            }
            Err(Error::DegenerateGradient { .. }) => {
                fallbacks.push(i);
                let dir = sampler.fork(i as u64).unit_direction(delta.len());
                delta.iter().zip(dir).map(|(d, u)| d + mu * u).collect()
            }
            Err(e) => return Err(e),
        };
        groups[i].push(point);
        q[i] = 1;
    }
    let perturbed = selection.indices.len();
    let data = MultiPointDataset::from_groups(scenarios.to_vec(), groups, Provenance::Adversarial { perturbed })?;
    Ok((
        data,
        PerturbBudget {
            q,
            k_hat,
            theta_hat: theta_hat.to_vec(),
            mu,
            shortage: selection.shortage,
            fallbacks,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequentialStatus {
    TargetMet,
    MaxIterations,
    /// The estimate exceeds the target but no unused pool point fails.
    Anomaly,
}

impl SequentialStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SequentialStatus::TargetMet => "target-met",
            SequentialStatus::MaxIterations => "max-iterations",
            SequentialStatus::Anomaly => "anomaly",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub n_u: usize,
    pub objective: f64,
    pub sigma: usize,
    pub estimate: Estimate,
    pub solve_status: SolveStatus,
    /// False once the training set contains selected pool points.
    pub iid: bool,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialOptions {
    pub batch: usize,
    pub max_iterations: usize,
    pub target: f64,
    pub level: f64,
    pub solver: SolverOptions,
}

impl Default for SequentialOptions {
    fn default() -> Self {
        Self {
            batch: 17,
            max_iterations: 10,
            target: 0.0,
            level: 0.95,
            solver: SolverOptions::default(),
        }
    }
}

impl SequentialOptions {
    /// Pool points whose worst requirement is within the solver's
    /// constraint tolerance count as satisfied; otherwise a point added
    /// to training could keep failing by solver noise alone.
    pub fn failure_tolerance(&self) -> f64 {
        self.solver.constraint_tolerance
    }
}

#[derive(Debug, Clone)]
pub struct SequentialOutcome {
    pub status: SequentialStatus,
    pub trace: Vec<IterationRecord>,
    pub training: MultiPointDataset,
    /// Pool indices in the order they were added.
    pub added: Vec<usize>,
}

impl SequentialOutcome {
    pub fn final_theta(&self) -> &[f64] {
        &self.trace.last().expect("at least one iteration").theta
    }

    pub fn trace_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["iteration", "n_u", "objective", "sigma", "p_hat", "ci_lo", "ci_hi", "solve_status", "iid"])?;
        for r in &self.trace {
            w.write_record([
                r.iteration.to_string(),
                r.n_u.to_string(),
                uq::fmt(r.objective),
                r.sigma.to_string(),
                uq::fmt(r.estimate.p),
                uq::fmt(r.estimate.lo),
                uq::fmt(r.estimate.hi),
                r.solve_status.as_str().to_string(),
                r.iid.to_string(),
            ])?;
        }
        w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

/// Default program for sequential campaigns: no outliers, nominal
/// requirements.
pub fn default_sequential_spec() -> FormulationSpec {
    FormulationSpec::new(FormulationKind::RiskAgnosticScenario)
        .alpha(0.0)
        .gamma(1.0)
}

fn gamma_of(spec: &FormulationSpec, n_r: usize) -> Result<Vec<f64>> {
    match &spec.gamma {
        Some(g) => g.per_requirement(n_r, "gamma"),
        None => Ok(vec![1.0; n_r]),
    }
}

fn pick(a: NlpSolution, b: NlpSolution, tol: f64) -> NlpSolution {
    let better = match (a.is_feasible(tol), b.is_feasible(tol)) {
        (true, false) => false,
        (false, true) => true,
        (true, true) => b.objective < a.objective,
        (false, false) => b.max_violation < a.max_violation,
    };
    if better {
        b
    } else {
        a
    }
}

/// Solve, test on the pool, add the `batch` unused pool points with the
/// smallest positive worst requirement, and repeat until the estimated
/// failure probability reaches `target`.
pub fn sequential_design(
    problem: Arc<dyn DesignProblem>,
    initial: &MultiPointDataset,
    spec: &FormulationSpec,
    pool: &[Scenario],
    options: &SequentialOptions,
) -> Result<SequentialOutcome> {
    if options.batch == 0 || options.max_iterations == 0 {
        return Err(Error::Config("batch and max_iterations must be >= 1".into()));
    }
    if pool.is_empty() {
        return Err(Error::InvalidInput("test pool is empty".into()));
    }
    let n_r = problem.n_requirements();
    spec.validate(n_r)?;
    let gamma = gamma_of(spec, n_r)?;
    let mut training = initial.clone();
    let mut used = vec![false; pool.len()];
    let mut added = Vec::new();
    let mut trace = Vec::new();
    let mut warm: Option<Vec<f64>> = None;
    let tol = options.solver.constraint_tolerance;
    let mut status = SequentialStatus::MaxIterations;

    for iteration in 1..=options.max_iterations {
        let program = spec.build(problem.clone(), &training)?;
        let mut sol = solver::multistart(&program, &options.solver)?;
        if let Some(w) = &warm {
            let from_warm = solver::solve(&program, &program.start_from(w), &options.solver)?;
            sol = pick(sol, from_warm, tol);
        }
        let theta = program.theta(&sol.x).to_vec();
        let outliers = extract_outliers_tol(problem.as_ref(), &training, &theta, &gamma, tol.sqrt())?;
        let worst: Vec<f64> = pool
            .iter()
            .map(|s| problem.max_requirement(&theta, s.coords()))
            .collect();
        let fail_tol = options.failure_tolerance();
        let failures = worst.iter().filter(|w| **w > fail_tol || w.is_nan()).count();
        let estimate = Estimate::from_counts(failures, pool.len(), options.level)?;
        trace.push(IterationRecord {
            iteration,
            n_u: training.len(),
            objective: problem.objective(&theta),
            sigma: outliers.sigma,
            estimate,
            solve_status: sol.status,
            iid: training.is_iid(),
            theta: theta.clone(),
        });
        if estimate.p <= options.target {
            status = SequentialStatus::TargetMet;
            break;
        }
        let mut candidates: Vec<usize> = (0..pool.len()).filter(|&i| !used[i] && worst[i] > fail_tol).collect();
        if candidates.is_empty() {
            status = SequentialStatus::Anomaly;
            break;
        }
        if iteration == options.max_iterations {
            break;
        }
        candidates.sort_by(|&a, &b| worst[a].total_cmp(&worst[b]).then(a.cmp(&b)));
        candidates.truncate(options.batch);
        let extra: Vec<Scenario> = candidates.iter().map(|&i| pool[i].clone()).collect();
        training.augment(&extra)?;
        for &i in &candidates {
            used[i] = true;
        }
        added.extend(candidates);
        warm = Some(theta);
    }
    Ok(SequentialOutcome {
        status,
        trace,
        training,
        added,
    })
}
