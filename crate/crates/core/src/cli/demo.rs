//! Regenerates the data-enclosing-set studies: the ten-design sweep over
//! formulations, `m` and `σ` on a small ring-shaped dataset, and four
//! designs on a large one followed by reliability and robustness
//! analysis.
//!
//! The original datasets were never published, so both are regenerated
//! from a seeded ring-shaped distribution. The small set always contains
//! the outlier `[-3.7, -0.4]`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulations::{extract_outliers_tol, FormulationKind, FormulationSpec, Param};
use crate::problems::{DesignProblem, Enclosure};
use crate::scenario::{
    expand, MultiPointDataset, PerturbationKind, PerturbationModel, RadiusRule, Scenario, SeededSampler,
};
use crate::solver::{self, NlpProgram, NlpSolution, SolveStatus, SolverOptions};
use crate::uq::{self, AnalysisOptions, AnalysisReport};

/// The outlier every small dataset carries.
pub const OUTLIER: [f64; 2] = [-3.7, -0.4];

/// Ring-shaped scenario distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingShape {
    pub center: [f64; 2],
    pub radius: f64,
    /// Standard deviation of the radial offset.
    pub spread: f64,
    /// Probability of an extra exponential radial excursion.
    pub tail_probability: f64,
    pub tail_scale: f64,
}

impl RingShape {
    pub fn small() -> Self {
        Self {
            center: [0.0, 0.0],
            radius: 3.0,
            spread: 0.1,
            tail_probability: 0.0,
            tail_scale: 0.0,
        }
    }

    pub fn large() -> Self {
        Self {
            center: [0.3, 0.2],
            radius: 2.5,
            spread: 0.3,
            tail_probability: 0.12,
            tail_scale: 0.9,
        }
    }

    /// `n` draws kept inside the box `[-h, h]^2`.
    pub fn sample(&self, n: usize, half_width: f64, sampler: &mut SeededSampler) -> Vec<Scenario> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let angle = sampler.uniform_range(0.0, 2.0 * std::f64::consts::PI);
            let mut r = self.radius + self.spread * sampler.standard_normal();
            if sampler.uniform() < self.tail_probability {
                let excursion = -self.tail_scale * (1.0 - sampler.uniform()).ln();
                r += if sampler.uniform() < 0.5 { excursion } else { -excursion };
            }
            let r = r.abs();
            let p = [self.center[0] + r * angle.cos(), self.center[1] + r * angle.sin()];
            if p.iter().all(|v| v.abs() <= half_width) {
                out.push(Scenario::from(p.to_vec()));
            }
        }
        out
    }
}

/// Settings of the enclosure demo. Defaults reproduce the published
/// setup wherever it is stated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoOptions {
    pub seed: u64,
    pub half_width: f64,
    pub mc_points: usize,
    pub n_small: usize,
    pub small_ring: RingShape,
    pub large_ring: RingShape,
    /// Perturbed points per scenario in the robust designs.
    pub m: usize,
    pub radius_factor: f64,
    pub gamma: f64,
    pub rho_ladder: Vec<f64>,
    pub n_large: usize,
    pub sigma_large: usize,
    pub r_max: f64,
    pub n_test: usize,
    pub m_test: usize,
    pub level: f64,
    pub solver: SolverOptions,
}

impl Default for DemoOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            half_width: Enclosure::DEFAULT_HALF_WIDTH,
            mc_points: Enclosure::DEFAULT_MC_POINTS,
            n_small: 15,
            small_ring: RingShape::small(),
            large_ring: RingShape::large(),
            m: 81,
            radius_factor: 0.1,
            gamma: 0.95,
            rho_ladder: vec![100.0, 30.0, 20.0, 18.0, 16.0, 15.0, 14.0, 13.0, 12.0, 11.0, 10.0, 9.0, 8.0, 6.0, 4.0, 2.0],
            n_large: 500,
            sigma_large: 25,
            r_max: 0.5,
            n_test: 20_000,
            m_test: 200,
            level: 0.95,
            solver: SolverOptions {
                // the MC volume is piecewise linear at a fine scale; a wide
                // difference step sees its trend instead of its facets
                fd_step: 1e-3,
                multistart: 2,
                ..SolverOptions::default()
            },
        }
    }
}

/// The small dataset: `n - 1` ring draws plus [`OUTLIER`].
pub fn small_dataset(options: &DemoOptions) -> Vec<Scenario> {
    let mut sampler = SeededSampler::new(options.seed, 1);
    let mut out = options.small_ring.sample(options.n_small.saturating_sub(1), options.half_width, &mut sampler);
    out.push(Scenario::from(OUTLIER.to_vec()));
    out
}

pub fn large_dataset(options: &DemoOptions) -> Vec<Scenario> {
    let mut sampler = SeededSampler::new(options.seed, 2);
    options.large_ring.sample(options.n_large, options.half_width, &mut sampler)
}

pub fn test_dataset(options: &DemoOptions) -> Vec<Scenario> {
    let mut sampler = SeededSampler::new(options.seed, 3);
    options.large_ring.sample(options.n_test, options.half_width, &mut sampler)
}

/// One solved demo design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoDesign {
    pub label: String,
    pub formulation: FormulationKind,
    pub m: usize,
    pub target_sigma: usize,
    pub sigma: usize,
    pub objective: f64,
    pub status: SolveStatus,
    /// The tuned parameter, e.g. `rho=3` or `alpha=0.0714`.
    pub parameter: String,
    pub theta: Vec<f64>,
    pub outliers: Vec<usize>,
    pub note: Option<String>,
}

impl DemoDesign {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// Start design for a ring: common center at the data centroid, radii
/// just outside and inside the extreme points.
pub fn ring_start(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len().max(1) as f64;
    let c = [
        points.iter().map(|p| p[0]).sum::<f64>() / n,
        points.iter().map(|p| p[1]).sum::<f64>() / n,
    ];
    let d = |p: &Vec<f64>| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();
    let far = points.iter().map(d).fold(0.0, f64::max);
    let near = points.iter().map(d).fold(f64::INFINITY, f64::min);
    vec![c[0], c[1], far + 0.05, c[0], c[1], (near - 0.05).max(2e-3)]
}

/// [`ring_start`] after peeling off the `sigma` scenarios whose nominal
/// distance to the centroid of the rest deviates most from the median.
pub fn peeled_start(problem: &dyn DesignProblem, data: &MultiPointDataset, sigma: usize) -> Vec<f64> {
    let mut kept: Vec<usize> = (0..data.len()).collect();
    for _ in 0..sigma.min(data.len().saturating_sub(3)) {
        let nominal: Vec<Vec<f64>> = kept.iter().map(|&i| data.nominal()[i].coords().to_vec()).collect();
        let n = nominal.len() as f64;
        let c = [
            nominal.iter().map(|p| p[0]).sum::<f64>() / n,
            nominal.iter().map(|p| p[1]).sum::<f64>() / n,
        ];
        let d: Vec<f64> = nominal
            .iter()
            .map(|p| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt())
            .collect();
        let mut sorted = d.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let worst = (0..d.len())
            .max_by(|&a, &b| (d[a] - median).abs().total_cmp(&(d[b] - median).abs()))
            .unwrap_or(0);
        kept.remove(worst);
    }
    let points: Vec<Vec<f64>> = kept.iter().flat_map(|&i| data.points(i, problem, &[])).collect();
    ring_start(&points)
}

fn all_points(problem: &dyn DesignProblem, data: &MultiPointDataset, theta: &[f64]) -> Vec<Vec<f64>> {
    (0..data.len()).flat_map(|i| data.points(i, problem, theta)).collect()
}

fn better(a: &NlpSolution, b: &NlpSolution, tol: f64) -> bool {
    match (a.is_feasible(tol), b.is_feasible(tol)) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => a.objective < b.objective,
        (false, false) => a.max_violation < b.max_violation,
    }
}

/// Multistart plus one solve from each given design.
fn solve_from(program: &NlpProgram, starts: &[Vec<f64>], options: &SolverOptions) -> Result<NlpSolution> {
    let mut best = solver::multistart(program, options)?;
    for theta in starts {
        let sol = solver::solve(program, &program.start_from(theta), options)?;
        if better(&sol, &best, options.constraint_tolerance) {
            best = sol;
        }
    }
    Ok(best)
}

struct Candidate {
    sol: NlpSolution,
    theta: Vec<f64>,
    sigma: usize,
    outliers: Vec<usize>,
    parameter: String,
}

fn candidate(
    problem: &Arc<dyn DesignProblem>,
    data: &MultiPointDataset,
    spec: &FormulationSpec,
    starts: &[Vec<f64>],
    options: &SolverOptions,
    parameter: String,
) -> Result<Candidate> {
    let program = spec.build(problem.clone(), data)?;
    let sol = solve_from(&program, starts, options)?;
    let theta = program.theta(&sol.x).to_vec();
    let gamma = match &spec.gamma {
        Some(g) => g.per_requirement(problem.n_requirements(), "gamma")?,
        None => vec![1.0; problem.n_requirements()],
    };
    let report = extract_outliers_tol(problem.as_ref(), data, &theta, &gamma, options.constraint_tolerance.sqrt())?;
    Ok(Candidate {
        sol,
        theta,
        sigma: report.sigma,
        outliers: report.outliers,
        parameter,
    })
}

/// Best candidate reaching `target` outliers; failing that, the one
/// closest to it.
fn choose(cands: Vec<Candidate>, target: usize, tol: f64) -> Option<(Candidate, bool)> {
    let key = |c: &Candidate| {
        (
            !c.sol.is_feasible(tol),
            c.sigma.abs_diff(target),
            c.sol.objective,
        )
    };
    let best = cands
        .into_iter()
        .min_by(|a, b| {
            let (ka, kb) = (key(a), key(b));
            ka.0.cmp(&kb.0).then(ka.1.cmp(&kb.1)).then(ka.2.total_cmp(&kb.2))
        })?;
    let hit = best.sigma == target;
    Some((best, hit))
}

fn finish(
    label: &str,
    kind: FormulationKind,
    m: usize,
    target: usize,
    problem: &dyn DesignProblem,
    chosen: Option<(Candidate, bool)>,
) -> Result<DemoDesign> {
    let (c, hit) = chosen.ok_or_else(|| Error::InvalidInput(format!("no candidate for {label}")))?;
    Ok(DemoDesign {
        label: label.to_string(),
        formulation: kind,
        m,
        target_sigma: target,
        sigma: c.sigma,
        objective: problem.objective(&c.theta),
        status: c.sol.status,
        parameter: c.parameter,
        theta: c.theta,
        outliers: c.outliers,
        note: (!hit).then(|| format!("target sigma {target} not reached")),
    })
}

/// Risk-averse design with exactly `target` outliers, found by scanning
/// the penalty ladder.
#[allow(clippy::too_many_arguments)]
fn risk_averse_design(
    label: &str,
    kind: FormulationKind,
    problem: &Arc<dyn DesignProblem>,
    data: &MultiPointDataset,
    gamma: Option<f64>,
    target: usize,
    starts: &[Vec<f64>],
    options: &DemoOptions,
) -> Result<DemoDesign> {
    let mut cands = Vec::new();
    for &rho in &options.rho_ladder {
        let mut spec = FormulationSpec::new(kind).rho(rho);
        if let Some(g) = gamma {
            spec = spec.gamma(g);
        }
        let c = candidate(problem, data, &spec, starts, &options.solver, format!("rho={rho}"))?;
        let feasible = c.sol.is_feasible(options.solver.constraint_tolerance);
        let (hit, past, c_sigma) = (c.sigma == target, c.sigma > target, c.sigma);
        cands.push(c);
        // σ is noisy in ρ near the target, so keep going until well past it
        if feasible && ((hit && target == 0) || (past && c_sigma >= target + 3)) {
            break;
        }
    }
    let m = data.max_points();
    finish(label, kind, m, target, problem.as_ref(), choose(cands, target, options.solver.constraint_tolerance))
}

/// Risk-agnostic design that drops `target` scenarios. `α = σ/(n − 1)`
/// lands the quantile on an ECDF knot, so the dropped scenarios carry no
/// weight at all.
fn risk_agnostic_design(
    label: &str,
    kind: FormulationKind,
    problem: &Arc<dyn DesignProblem>,
    data: &MultiPointDataset,
    gamma: f64,
    target: usize,
    starts: &[Vec<f64>],
    options: &DemoOptions,
) -> Result<DemoDesign> {
    let n = data.len();
    let a = target as f64 / (n - 1) as f64;
    let alphas: Vec<Param> = match kind {
        FormulationKind::RiskAgnosticScenario => vec![Param::Scalar(a)],
        _ => {
            let mut v = vec![Param::Vector(vec![a, 0.0]), Param::Vector(vec![0.0, a])];
            if target >= 2 {
                let b = (target - 1) as f64 / (n - 1) as f64;
                let c = 1.0 / (n - 1) as f64;
                v.push(Param::Vector(vec![b, c]));
                v.push(Param::Vector(vec![c, b]));
            }
            v
        }
    };
    let mut cands = Vec::new();
    for alpha in alphas {
        let text = match &alpha {
            Param::Scalar(v) => format!("alpha={v:.6}"),
            Param::Vector(v) => format!(
                "alpha=[{}]",
                v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ")
            ),
        };
        let spec = FormulationSpec::new(kind).alpha(alpha).gamma(gamma);
        cands.push(candidate(problem, data, &spec, starts, &options.solver, text)?);
    }
    let m = data.max_points();
    finish(label, kind, m, target, problem.as_ref(), choose(cands, target, options.solver.constraint_tolerance))
}

/// Problem instance shared by every demo design.
pub fn enclosure(options: &DemoOptions) -> Arc<dyn DesignProblem> {
    Arc::new(Enclosure::new(options.half_width, options.mc_points, options.seed))
}

/// The ten designs of the small-data sweep, in table order.
pub fn table_one(options: &DemoOptions) -> Result<(Vec<DemoDesign>, Vec<(String, MultiPointDataset)>)> {
    let problem = enclosure(options);
    let nominal = small_dataset(options);
    let d1 = MultiPointDataset::nominal_only(nominal.clone());
    let radius = RadiusRule::ProportionalToOrigin {
        factor: options.radius_factor,
    };
    let sampler = SeededSampler::new(options.seed, 4);
    let surface = expand(
        &nominal,
        &PerturbationModel::new(PerturbationKind::BallSurface, radius),
        options.m,
        &sampler,
    )?;
    let volume = expand(
        &nominal,
        &PerturbationModel::new(PerturbationKind::BallVolume, radius),
        options.m,
        &sampler,
    )?;
    let g = options.gamma;
    let pr = problem.as_ref();
    let starts = |data: &MultiPointDataset, sigma: usize| -> Vec<Vec<f64>> {
        (0..=sigma).map(|s| peeled_start(pr, data, s)).collect()
    };
    let with = |mut base: Vec<Vec<f64>>, extra: &[&DemoDesign]| {
        base.extend(extra.iter().map(|d| d.theta.clone()));
        base
    };
    use FormulationKind::*;

    // risk-agnostic designs already exclude outliers, so they seed the
    // risk-averse searches for the same σ
    let t1 = risk_averse_design("theta_1", WorstCase, &problem, &d1, None, 0, &starts(&d1, 0), options)?;
    let t3 = risk_agnostic_design("theta_3", RiskAgnosticScenario, &problem, &d1, 1.0, 1, &with(starts(&d1, 1), &[&t1]), options)?;
    let t4 = risk_agnostic_design("theta_4", RiskAgnosticScenario, &problem, &d1, 1.0, 2, &with(starts(&d1, 2), &[&t3]), options)?;
    let t2 = risk_averse_design("theta_2", WorstCase, &problem, &d1, None, 1, &with(starts(&d1, 1), &[&t1, &t3]), options)?;

    let t5 = risk_averse_design("theta_5", WorstCase, &problem, &surface, None, 0, &with(starts(&surface, 0), &[&t1]), options)?;
    let t7 = risk_averse_design("theta_7", RiskAverseScenario, &problem, &volume, Some(g), 0, &with(starts(&volume, 0), &[&t1, &t5]), options)?;
    let t9 = risk_agnostic_design("theta_9", RiskAgnosticRequirement, &problem, &volume, g, 1, &with(starts(&volume, 1), &[&t3, &t7]), options)?;
    let t10 = risk_agnostic_design("theta_10", RiskAgnosticRequirement, &problem, &volume, g, 2, &with(starts(&volume, 2), &[&t4, &t9]), options)?;
    let t6 = risk_averse_design("theta_6", WorstCase, &problem, &surface, None, 1, &with(starts(&surface, 1), &[&t2, &t5, &t9]), options)?;
    let t8 = risk_averse_design("theta_8", RiskAverseScenario, &problem, &volume, Some(g), 1, &with(starts(&volume, 1), &[&t2, &t7, &t9]), options)?;

    let datasets = vec![
        ("m1".to_string(), d1),
        ("surface".to_string(), surface),
        ("volume".to_string(), volume),
    ];
    Ok((vec![t1, t2, t3, t4, t5, t6, t7, t8, t9, t10], datasets))
}

/// Which of the sweep's datasets a design was trained on.
pub fn dataset_key(design: &DemoDesign) -> &'static str {
    match (design.m, design.formulation) {
        (1, _) => "m1",
        (_, FormulationKind::WorstCase) => "surface",
        _ => "volume",
    }
}

/// The four large-data designs with their analyses.
pub fn example_two(options: &DemoOptions) -> Result<(Vec<DemoDesign>, Vec<AnalysisReport>, Vec<(String, MultiPointDataset)>)> {
    let problem = enclosure(options);
    let nominal = large_dataset(options);
    let d1 = MultiPointDataset::nominal_only(nominal.clone());
    let adversarial = RadiusRule::Adversarial { r_max: options.r_max };
    let model = PerturbationModel::new(PerturbationKind::BallVolume, adversarial);
    let robust = expand(&nominal, &model, options.m, &SeededSampler::new(options.seed, 5))?;
    let n = nominal.len();
    let start = ring_start(&all_points(problem.as_ref(), &d1, &[]));
    let sigma = options.sigma_large;
    let g = options.gamma;

    let design = |label: &str, data: &MultiPointDataset, target: usize, starts: &[Vec<f64>]| -> Result<DemoDesign> {
        let alpha = target as f64 / n as f64;
        let spec = FormulationSpec::new(FormulationKind::RiskAgnosticScenario)
            .alpha(alpha)
            .gamma(g);
        let c = candidate(&problem, data, &spec, starts, &options.solver, format!("alpha={alpha}"))?;
        let m = data.max_points();
        finish(label, spec.kind, m, target, problem.as_ref(), Some((c, true))).map(|mut d| {
            if d.sigma != target {
                d.note = Some(format!("sigma {} differs from alpha*n = {target}", d.sigma));
            }
            d
        })
    };
    let b = design("theta_B", &d1, 0, &[start.clone()])?;
    let a = design("theta_A", &d1, sigma, &[start.clone(), b.theta.clone()])?;
    let dd = design("theta_D", &robust, 0, &[start.clone(), b.theta.clone()])?;
    let c = design("theta_C", &robust, sigma, &[start, a.theta.clone(), dd.theta.clone()])?;

    let test = test_dataset(options);
    let analysis = AnalysisOptions {
        m_test: options.m_test,
        gammas: vec![g],
        level: options.level,
        seed: options.seed,
        model,
    };
    let designs = vec![a, b, c, dd];
    let reports = designs
        .iter()
        .map(|d| uq::analyze(problem.as_ref(), &d.theta, &test, &analysis))
        .collect::<Result<Vec<_>>>()?;
    Ok((designs, reports, vec![("m1".into(), d1), ("robust".into(), robust)]))
}

/// Per-point classification of a trained design, enough to redraw the
/// success and failure domains with any plotting tool.
pub fn classification_csv(
    problem: &dyn DesignProblem,
    data: &MultiPointDataset,
    design: &DemoDesign,
) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scenario", "point", "x", "y", "nominal", "outlier", "failed"])?;
    for i in 0..data.len() {
        let outlier = design.outliers.contains(&i);
        let nominal = data.nominal()[i].coords().to_vec();
        let mut rows = vec![(0usize, nominal, true)];
        rows.extend(
            data.points(i, problem, &design.theta)
                .into_iter()
                .enumerate()
                .map(|(j, p)| (j + 1, p, false)),
        );
        for (j, p, is_nominal) in rows {
            let failed = !problem.succeeds(&design.theta, &p);
            w.write_record([
                i.to_string(),
                j.to_string(),
                uq::fmt(p[0]),
                uq::fmt(p[1]),
                is_nominal.to_string(),
                outlier.to_string(),
                failed.to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
}

pub fn table_one_csv(designs: &[DemoDesign]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["design", "formulation", "m", "sigma", "J", "status", "parameter", "target_sigma", "note"])?;
    for d in designs {
        w.write_record([
            d.label.clone(),
            d.formulation.to_string(),
            d.m.to_string(),
            d.sigma.to_string(),
            format!("{:.4}", d.objective),
            d.status.as_str().to_string(),
            d.parameter.clone(),
            d.target_sigma.to_string(),
            d.note.clone().unwrap_or_default(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
}

pub fn table_two_csv(designs: &[DemoDesign], reports: &[AnalysisReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "design", "m", "sigma_over_n", "J", "p_nom", "p_nom_lo", "p_nom_hi", "p_per", "p_per_lo", "p_per_hi",
    ])?;
    for (d, r) in designs.iter().zip(reports) {
        let per = r.perturbational.first().map(|(_, e)| *e).unwrap_or(r.nominal);
        w.write_record([
            d.label.clone(),
            d.m.to_string(),
            format!("{:.4}", d.sigma as f64 / r_train_len(d)),
            format!("{:.4}", d.objective),
            uq::fmt(r.nominal.p),
            uq::fmt(r.nominal.lo),
            uq::fmt(r.nominal.hi),
            uq::fmt(per.p),
            uq::fmt(per.lo),
            uq::fmt(per.hi),
        ])?;
    }
    w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
}

fn r_train_len(d: &DemoDesign) -> f64 {
    // parameter text is `alpha=<σ/n>`; recover n from the target
    d.parameter
        .strip_prefix("alpha=")
        .and_then(|a| a.parse::<f64>().ok())
        .filter(|a| *a > 0.0)
        .map(|a| d.target_sigma as f64 / a)
        .unwrap_or(f64::NAN)
}
