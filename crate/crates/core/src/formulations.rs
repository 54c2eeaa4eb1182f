//! Scenario programs compiled into [`NlpProgram`]s.
//!
//! Every builder takes a problem, a multi-point dataset and a
//! [`FormulationSpec`] and returns a program whose variables are laid out
//! as `θ`, then `λ` (moment programs), then the slacks `ξ` or `ζ`.
//! Per-scenario requirement samples are reduced with the interpolated
//! inverse ECDF, so chance constraints become ordinary continuous
//! inequality constraints.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ecdf;
use crate::error::{Error, Result};
use crate::problems::DesignProblem;
use crate::scenario::MultiPointDataset;
use crate::solver::{self, NlpProgram, NlpSolution, SolverOptions, VariableLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulationKind {
    RiskAverseScenario,
    WorstCase,
    RiskAverseRequirement,
    RiskAgnosticScenario,
    RiskAgnosticRequirement,
    MomentRiskAverse,
    MomentRiskAgnostic,
}

impl FormulationKind {
    pub const ALL: [FormulationKind; 7] = [
        FormulationKind::RiskAverseScenario,
        FormulationKind::WorstCase,
        FormulationKind::RiskAverseRequirement,
        FormulationKind::RiskAgnosticScenario,
        FormulationKind::RiskAgnosticRequirement,
        FormulationKind::MomentRiskAverse,
        FormulationKind::MomentRiskAgnostic,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FormulationKind::RiskAverseScenario => "risk-averse-scenario",
            FormulationKind::WorstCase => "worst-case",
            FormulationKind::RiskAverseRequirement => "risk-averse-requirement",
            FormulationKind::RiskAgnosticScenario => "risk-agnostic-scenario",
            FormulationKind::RiskAgnosticRequirement => "risk-agnostic-requirement",
            FormulationKind::MomentRiskAverse => "moment-risk-averse",
            FormulationKind::MomentRiskAgnostic => "moment-risk-agnostic",
        }
    }

    fn uses_rho(&self) -> bool {
        matches!(
            self,
            FormulationKind::RiskAverseScenario
                | FormulationKind::WorstCase
                | FormulationKind::RiskAverseRequirement
                | FormulationKind::MomentRiskAverse
        )
    }

    fn uses_gamma(&self) -> bool {
        !matches!(self, FormulationKind::WorstCase)
    }

    fn uses_alpha(&self) -> bool {
        matches!(
            self,
            FormulationKind::RiskAgnosticScenario
                | FormulationKind::RiskAgnosticRequirement
                | FormulationKind::MomentRiskAgnostic
        )
    }

    pub fn is_risk_averse(&self) -> bool {
        self.uses_rho()
    }
}

impl std::fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A scalar, or one value per requirement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Param {
    /// Broadcasts a scalar to `n` entries; vectors must have length `n`.
    pub fn per_requirement(&self, n: usize, name: &str) -> Result<Vec<f64>> {
        match self {
            Param::Scalar(v) => Ok(vec![*v; n]),
            Param::Vector(v) if v.len() == n => Ok(v.clone()),
            Param::Vector(v) => Err(Error::Config(format!(
                "{name} has {} entries, the problem has {n} requirements",
                v.len()
            ))),
        }
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        match self {
            Param::Scalar(v) => Ok(*v),
            Param::Vector(v) if v.len() == 1 => Ok(v[0]),
            Param::Vector(_) => Err(Error::Config(format!("{name} must be a scalar"))),
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            Param::Scalar(v) => std::slice::from_ref(v),
            Param::Vector(v) => v,
        }
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Scalar(v)
    }
}

impl From<Vec<f64>> for Param {
    fn from(v: Vec<f64>) -> Self {
        Param::Vector(v)
    }
}

/// Which program to build and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulationSpec {
    pub kind: FormulationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Param>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Param>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Param>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

impl FormulationSpec {
    pub fn new(kind: FormulationKind) -> Self {
        Self {
            kind,
            rho: None,
            gamma: None,
            alpha: None,
            kappa: None,
        }
    }

    pub fn rho(mut self, rho: impl Into<Param>) -> Self {
        self.rho = Some(rho.into());
        self
    }

    pub fn gamma(mut self, gamma: impl Into<Param>) -> Self {
        self.gamma = Some(gamma.into());
        self
    }

    pub fn alpha(mut self, alpha: impl Into<Param>) -> Self {
        self.alpha = Some(alpha.into());
        self
    }

    pub fn kappa(mut self, kappa: f64) -> Self {
        self.kappa = Some(kappa);
        self
    }

    /// All problems with the spec for a problem with `n_r` requirements,
    /// as one list.
    pub fn problems(&self, n_r: usize) -> Vec<String> {
        let mut out = Vec::new();
        let kind = self.kind;
        let needs_vector = matches!(
            kind,
            FormulationKind::RiskAverseRequirement | FormulationKind::RiskAgnosticRequirement
        );
        if kind.uses_rho() {
            match &self.rho {
                None => out.push(format!("{kind} requires rho")),
                Some(p) => {
                    if p.values().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                        out.push("rho must be finite and >= 0".into());
                    }
                    if needs_vector {
                        if let Err(e) = p.per_requirement(n_r, "rho") {
                            out.push(strip(e));
                        }
                    } else if let Err(e) = p.scalar("rho") {
                        out.push(strip(e));
                    }
                }
            }
        }
        if kind.uses_gamma() {
            match &self.gamma {
                None => out.push(format!("{kind} requires gamma")),
                Some(p) => {
                    if p.values().iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
                        out.push("gamma entries must lie in (0, 1]".into());
                    }
                    if let Err(e) = p.per_requirement(n_r, "gamma") {
                        out.push(strip(e));
                    }
                }
            }
        }
        if kind.uses_alpha() {
            match &self.alpha {
                None => out.push(format!("{kind} requires alpha")),
                Some(p) => {
                    if p.values().iter().any(|v| !(*v >= 0.0 && *v < 1.0)) {
                        out.push("alpha entries must lie in [0, 1)".into());
                    }
                    if needs_vector {
                        if let Err(e) = p.per_requirement(n_r, "alpha") {
                            out.push(strip(e));
                        }
                    } else if let Err(e) = p.scalar("alpha") {
                        out.push(strip(e));
                    }
                }
            }
        }
        if kind == FormulationKind::MomentRiskAverse {
            match self.kappa {
                None => out.push("moment-risk-averse requires kappa".into()),
                Some(k) if !(k >= 1.0 && k.is_finite()) => out.push("kappa must be >= 1".into()),
                _ => {}
            }
        }
        out
    }

    pub fn validate(&self, n_r: usize) -> Result<()> {
        let problems = self.problems(n_r);
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    fn gamma_vec(&self, n_r: usize) -> Result<Vec<f64>> {
        match &self.gamma {
            Some(g) => g.per_requirement(n_r, "gamma"),
            None => Ok(vec![1.0; n_r]),
        }
    }

    /// Builds the program this spec describes.
    pub fn build(&self, problem: Arc<dyn DesignProblem>, data: &MultiPointDataset) -> Result<NlpProgram> {
        match self.kind {
            FormulationKind::RiskAverseScenario => build_risk_averse_scenario(problem, data, self),
            FormulationKind::WorstCase => build_worst_case(problem, data, self),
            FormulationKind::RiskAverseRequirement => build_risk_averse_requirement(problem, data, self),
            FormulationKind::RiskAgnosticScenario => build_risk_agnostic_scenario(problem, data, self),
            FormulationKind::RiskAgnosticRequirement => build_risk_agnostic_requirement(problem, data, self),
            FormulationKind::MomentRiskAverse => build_moment_risk_averse(problem, data, self),
            FormulationKind::MomentRiskAgnostic => build_moment_risk_agnostic(problem, data, self),
        }
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(s) => s,
        other => other.to_string(),
    }
}

fn check_kind(spec: &FormulationSpec, expected: FormulationKind) -> Result<()> {
    if spec.kind != expected {
        return Err(Error::Config(format!(
            "spec is for {}, builder is for {expected}",
            spec.kind
        )));
    }
    Ok(())
}

fn check_data(problem: &dyn DesignProblem, data: &MultiPointDataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidInput("training dataset is empty".into()));
    }
    for s in data.nominal() {
        if s.dim() != problem.n_delta() {
            return Err(Error::Dimension {
                what: "scenario".into(),
                expected: problem.n_delta(),
                found: s.dim(),
            });
        }
    }
    Ok(())
}

/// `out[i * n_r + k]` is the `γ_k`-quantile of requirement `k` over the
/// points of scenario `i`.
pub fn scenario_quantiles(
    problem: &dyn DesignProblem,
    data: &MultiPointDataset,
    gamma: &[f64],
    theta: &[f64],
    out: &mut [f64],
) {
    let n_r = problem.n_requirements();
    let mut point = vec![0.0; problem.n_delta()];
    let mut r = vec![0.0; n_r];
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(data.max_points()); n_r];
    for i in 0..data.len() {
        let radius = data.radius(i, problem, theta);
        samples.iter_mut().for_each(Vec::clear);
        for j in 0..data.points_in(i) {
            data.point_into(i, j, radius, &mut point);
            problem.requirements(theta, &point, &mut r);
            for (s, &v) in samples.iter_mut().zip(&r) {
                s.push(v);
            }
        }
        for (k, s) in samples.iter_mut().enumerate() {
            out[i * n_r + k] = quantile_or_nan(s, gamma[k]);
        }
    }
}

/// Worst quantile per scenario, `Z_i = max_k F⁻¹_{N_ik}(γ_k)`.
pub fn worst_quantiles(problem: &dyn DesignProblem, data: &MultiPointDataset, gamma: &[f64], theta: &[f64]) -> Vec<f64> {
    let n_r = problem.n_requirements();
    let n = data.len();
    if n_r == 0 {
        return vec![f64::NEG_INFINITY; n];
    }
    let mut q = vec![0.0; n * n_r];
    scenario_quantiles(problem, data, gamma, theta, &mut q);
    q.chunks(n_r)
        .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// Mean response over the points of each scenario.
pub fn mean_responses(problem: &dyn DesignProblem, data: &MultiPointDataset, theta: &[f64]) -> Vec<f64> {
    let mut point = vec![0.0; problem.n_delta()];
    (0..data.len())
        .map(|i| {
            let radius = data.radius(i, problem, theta);
            let m = data.points_in(i);
            let mut acc = 0.0;
            for j in 0..m {
                data.point_into(i, j, radius, &mut point);
                acc += problem.response(theta, &point).unwrap_or(f64::NAN);
            }
            acc / m as f64
        })
        .collect()
}

/// Owned evaluation context captured by program closures.
struct Evaluation {
    problem: Arc<dyn DesignProblem>,
    data: MultiPointDataset,
    gamma: Vec<f64>,
}

impl Evaluation {
    fn new(problem: Arc<dyn DesignProblem>, data: &MultiPointDataset, gamma: Vec<f64>) -> Result<Self> {
        check_data(problem.as_ref(), data)?;
        Ok(Self {
            problem,
            data: data.clone(),
            gamma,
        })
    }

    fn n(&self) -> usize {
        self.data.len()
    }

    fn quantiles(&self, theta: &[f64], out: &mut [f64]) {
        scenario_quantiles(self.problem.as_ref(), &self.data, &self.gamma, theta, out)
    }

    fn worst(&self, theta: &[f64]) -> Vec<f64> {
        worst_quantiles(self.problem.as_ref(), &self.data, &self.gamma, theta)
    }

    fn mean_responses(&self, theta: &[f64]) -> Vec<f64> {
        mean_responses(self.problem.as_ref(), &self.data, theta)
    }
}

fn quantile_or_nan(values: &mut [f64], alpha: f64) -> f64 {
    ecdf::quantile(values, alpha).unwrap_or(f64::NAN)
}

/// Bounds for `θ` followed by `extra` more variables.
fn bounds_with(problem: &dyn DesignProblem, extra: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    let b = problem.theta_bounds();
    let mut lower = b.lower.clone();
    let mut upper = b.upper.clone();
    for &(l, u) in extra {
        lower.push(l);
        upper.push(u);
    }
    (lower, upper)
}

fn design_constraints(problem: &dyn DesignProblem, theta: &[f64], out: &mut [f64]) {
    if problem.n_design_constraints() > 0 {
        problem.design_constraints(theta, out);
    }
}

/// Variables `(θ, ξ ≥ 0)`, objective `J + ρ Σ ξ`, and
/// `F⁻¹_{N_ik}(γ_k) − ξ_i ≤ 0` for every scenario and requirement.
pub fn build_risk_averse_scenario(
    problem: Arc<dyn DesignProblem>,
    data: &MultiPointDataset,
    spec: &FormulationSpec,
) -> Result<NlpProgram> {
    check_kind(spec, FormulationKind::RiskAverseScenario)?;
    risk_averse_scenario(problem, data, spec, true)
}

fn risk_averse_scenario(
    problem: Arc<dyn DesignProblem>,
    data: &MultiPointDataset,
    spec: &FormulationSpec,
    with_objective: bool,
) -> Result<NlpProgram> {
    let n_r = problem.n_requirements();
    spec.validate(n_r)?;
    let rho = spec.rho.as_ref().expect("validated").scalar("rho")?;
    let eval = Arc::new(Evaluation::new(problem.clone(), data, spec.gamma_vec(n_r)?)?);
    let n = eval.n();
    let nt = problem.n_theta();
    let n_dc = problem.n_design_constraints();
    let (lower, upper) = bounds_with(problem.as_ref(), &vec![(0.0, f64::INFINITY); n]);

    let p = problem.clone();
    let objective = move |x: &[f64]| {
        let j = if with_objective { p.objective(&x[..nt]) } else { 0.0 };
        j + rho * x[nt..].iter().sum::<f64>()
    };
    let e = eval.clone();
    let constraints = move |x: &[f64], g: &mut [f64]| {
        let theta = &x[..nt];
        let (q, rest) = g.split_at_mut(n * n_r);
        e.quantiles(theta, q);
        for i in 0..n {
            for k in 0..n_r {
                q[i * n_r + k] -= x[nt + i];
            }
        }
        design_constraints(e.problem.as_ref(), theta, rest);
    };
    let e = eval;
    let start = move |x: &mut [f64]| {
        let worst = e.worst(&x[..nt]);
        for (xi, w) in x[nt..].iter_mut().zip(worst) {
            *xi = if w.is_finite() { w.max(0.0) } else { 0.0 };
        }
    };
    Ok(NlpProgram::new(lower, upper, objective)
        .with_constraints(n * n_r + n_dc, constraints)
        .with_layout(VariableLayout {
            theta: 0..nt,
            xi: Some(nt..nt + n),
            ..Default::default()
        })
        .with_start(start))
}

/// Variables `(θ, ξ ≥ 0)`, objective `J + ρ Σ ξ`, and the raw constraints
/// `r_k(θ, δ^(i,j)) − ξ_i ≤ 0` at every point.
pub fn build_worst_case(
    problem: Arc<dyn DesignProblem>,
    data: &MultiPointDataset,
    spec: &FormulationSpec,
) -> Result<NlpProgram> {
    check_kind(spec, FormulationKind::WorstCase)?;
    let n_r = problem.n_requirements();
    spec.validate(n_r)?;
    let rho = spec.rho.as_ref().expect("validated").scalar("rho")?;
    let eval = Arc::new(Evaluation::new(problem.clone(), data, vec![1.0; n_r])?);
    let n = eval.n();
    let nt = problem.n_theta();
    let n_dc = problem.n_design_constraints();
    let total = data.total_points() * n_r;
    let (lower, upper) = bounds_with(problem.as_ref(), &vec![(0.0, f64::INFINITY); n]);

    let p = problem.clone();
    let objective = move |x: &[f64]| p.objective(&x[..nt]) + rho * x[nt..].iter().sum::<f64>();
    let e = eval.clone();
    let constraints = move |x: &[f64], g: &mut [f64]| {
        let theta = &x[..nt];
        let (raw, rest) = g.split_at_mut(total);
        let mut point = vec![0.0; e.problem.n_delta()];
        let mut at = 0;
        for i in 0..n {
            let radius = e.data.radius(i, e.problem.as_ref(), theta);
            for j in 0..e.data.points_in(i) {
                e.data.point_into(i, j, radius, &mut point);
                let out = &mut raw[at..at + n_r];
                e.problem.requirements(theta, &point, out);
                for v in out.iter_mut() {
                    *v -= x[nt + i];
                }
                at += n_r;
            }
        }
        design_constraints(e.problem.as_ref(), theta, rest);
    };
    let e = eval;
    let start = move |x: &mut [f64]| {
        let worst = e.worst(&x[..nt]);
        for (xi, w) in x[nt..].iter_mut().zip(worst) {
            *xi = if w.is_finite() { w.max(0.0) } else { 0.0 };
        }
    };
    Ok(NlpProgram::new(lower, upper, objective)
        .with_constraints(total + n_dc, constraints)
        .with_layout(VariableLayout {
            theta: 0..nt,
            xi: Some(nt..nt + n),
            ..Default::default()
        })
        .with_start(start))
}

/// Variables `(θ, ζ ∈ [0,1]^{n_r})`, objective `J + ρᵀζ`, and
/// `F⁻¹_{Y_k}(1 − ζ_k) ≤ 0` where `Y_k` collects the per-scenario
/// `γ_k`-quantiles of requirement `k`.
pub fn build_risk_averse_requirement(
    problem: Arc<dyn DesignProblem>,
    data: &MultiPointDataset,
    spec: &FormulationSpec,
) -> Result<NlpProgram> {
    check_kind(spec, FormulationKind::RiskAverseRequirement)?;
    let n_r = problem.n_requirements();
    spec.validate(n_r)?;
    let rho = spec.rho.as_ref().expect("validated").per_requirement(n_r, "rho")?;
    let eval = Arc::new(Evaluation::new(problem.clone(), data, spec.gamma_vec(n_r)?)?);
    let n = eval.n();
    let nt = problem.n_theta();
    let n_dc = problem.n_design_constraints();
    let (lower, upper) = bounds_with(problem.as_ref(), &vec![(0.0, 1.0); n_r]);

    let p = problem.clone();
    let objective = move |x: &[f64]| {
        p.objective(&x[..nt]) + rho.iter().zip(&x[nt..]).map(|(r, z)| r * z).sum::<f64>()
    };
    let e = eval.clone();
    let constraints = move |x: &[f64], g: &mut [f64]| {
        let theta = &x[..nt];
        let mut q = vec![0.0; n * n_r];
        e.quantiles(theta, &mut q);
        let mut y = vec![0.0; n];
        for k in 0..n_r {
            for i in 0..n {
                y[i] = q[i * n_r + k];
            }
            let level = (1.0 - x[nt + k]).clamp(0.0, 1.0);
            g[k] = quantile_or_nan(&mut y, level);
        }
        design_constraints(e.problem.as_ref(), theta, &mut g[n_r..]);
    };
    let e = eval;
    let start = move |x: &mut [f64]| {
        let mut q = vec![0.0; n * n_r];
        e.quantiles(&x[..nt], &mut q);
        for k in 0..n_r {
            let mut y: Vec<f64> = (0..n).map(|i| q[i * n_r + k]).collect();
            // largest level whose quantile is still nonpositive
            let share = ecdf::cdf(&mut y, 0.0).unwrap_or(0.0);
            x[nt + k] = 1.0 - share;
        }
    };
    Ok(NlpProgram::new(lower, upper, objective)
        .with_constraints(n_r + n_dc, constraints)
        .with_layout(VariableLayout {
            theta: 0..nt,
            zeta: Some(nt..nt + n_r),
            ..Default::default()
        })
        .with_start(start))
}

/// Variables `θ`; one constraint `F⁻¹_Z(1 − α) ≤ 0` with
/// `Z_i = max_k F⁻¹_{N_ik}(γ_k)`.
pub fn build_risk_agnostic_scenario(
    problem: Arc<dyn DesignProblem>,
    data: &MultiPointDataset,
    spec: &FormulationSpec,
) -> Result<NlpProgram> {
    check_kind(spec, FormulationKind::RiskAgnosticScenario)?;
    let n_r = problem.n_requirements();
    spec.validate(n_r)?;
    let alpha = spec.alpha.as_ref().expect("validated").scalar("alpha")?;
    let eval = Arc::new(Evaluation::new(problem.clone(), data, spec.gamma_vec(n_r)?)?);
    let nt = problem.n_theta();
    let n_dc = problem.n_design_constraints();
    let (lower, upper) = bounds_with(problem.as_ref(), &[]);

    let p = problem.clone();
    let objective = move |x: &[f64]| p.objective(x);
    let e = eval;
    let constraints = move |x: &[f64], g: &mut [f64]| {
        let mut z = e.worst(x);
        g[0] = quantile_or_nan(&mut z, 1.0 - alpha);
        design_constraints(e.problem.as_ref(), x, &mut g[1..]);
    };
    Ok(NlpProgram::new(lower, upper, objective)
        .with_constraints(1 + n_dc, constraints)
        .with_layout(VariableLayout {
            theta: 0..nt,
            ..Default::default()
        }))
}

/// Variables `θ`; `n_r` constraints `F⁻¹_{Y_k}(1 − α_k) ≤ 0`.
pub fn build_risk_agnostic_requirement(
    problem: Arc<dyn DesignProblem>,
    data: &MultiPointDataset,
    spec: &FormulationSpec,
) -> Result<NlpProgram> {
    check_kind(spec, FormulationKind::RiskAgnosticRequirement)?;
    let n_r = problem.n_requirements();
    spec.validate(n_r)?;
    let alpha = spec.alpha.as_ref().expect("validated").per_requirement(n_r, "alpha")?;
    let eval = Arc::new(Evaluation::new(problem.clone(), data, spec.gamma_vec(n_r)?)?);
    let n = eval.n();
    let nt = problem.n_theta();
    let n_dc = problem.n_design_constraints();
    let (lower, upper) = bounds_with(problem.as_ref(), &[]);

    let p = problem.clone();
    let objective = move |x: &[f64]| p.objective(x);
    let e = eval;
    let constraints = move |x: &[f64], g: &mut [f64]| {
        let mut q = vec![0.0; n * n_r];
        e.quantiles(x, &mut q);
        let mut y = vec![0.0; n];
        for k in 0..n_r {
            for i in 0..n {
                y[i] = q[i * n_r + k];
            }
            g[k] = quantile_or_nan(&mut y, 1.0 - alpha[k]);
        }
        design_constraints(e.problem.as_ref(), x, &mut g[n_r..]);
    };
    Ok(NlpProgram::new(lower, upper, objective)
        .with_constraints(n_r + n_dc, constraints)
        .with_layout(VariableLayout {
            theta: 0..nt,
            ..Default::default()
        }))
}

/// Weighted empirical mean of the response:
/// `Σ_i w_i mean_j h(θ, δ^(i,j)) / Σ_i w_i`.
pub fn weighted_mean(
    problem: &dyn DesignProblem,
    data: &MultiPointDataset,
    theta: &[f64],
    weights: &[f64],
) -> Result<f64> {
    if !problem.has_response() {
        return Err(Error::Config(format!("problem {} defines no response", problem.name())));
    }
    if weights.len() != data.len() {
        return Err(Error::Dimension {
            what: "weights".into(),
            expected: data.len(),
            found: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || weights.iter().all(|w| *w == 0.0) {
        return Err(Error::InvalidInput("weights must be nonnegative and not all zero".into()));
    }
    let means = mean_responses(problem, data, theta);
    let num: f64 = weights.iter().zip(&means).filter(|(w, _)| **w > 0.0).map(|(w, u)| w * u).sum();
    Ok(num / weights.iter().sum::<f64>())
}

/// `Σ_i exp(−κ ξ_i) U_i / Σ_i exp(−κ ξ_i)`, shifted by `min ξ` so the
/// weights never all underflow.
fn soft_inlier_mean(means: &[f64], xi: &[f64], kappa: f64) -> f64 {
    let lo = xi.iter().copied().fold(f64::INFINITY, f64::min);
    let mut num = 0.0;
    let mut den = 0.0;
    for (&u, &x) in means.iter().zip(xi) {
        let w = (-kappa * (x - lo)).exp();
        num += w * u;
        den += w;
    }
    num / den
}

/// Variables `(θ, λ, ξ ≥ 0)`, objective `λ + ρ Σ ξ`, the quantile
/// constraints of the risk-averse scenario program, and a soft-weighted
/// response mean `≤ λ` with weights `exp(−κ ξ_i)`.
pub fn build_moment_risk_averse(
    problem: Arc<dyn DesignProblem>,
    data: &MultiPointDataset,
    spec: &FormulationSpec,
) -> Result<NlpProgram> {
    check_kind(spec, FormulationKind::MomentRiskAverse)?;
    if !problem.has_response() {
        return Err(Error::Config(format!("problem {} defines no response", problem.name())));
    }
    let n_r = problem.n_requirements();
    spec.validate(n_r)?;
    let rho = spec.rho.as_ref().expect("validated").scalar("rho")?;
    let kappa = spec.kappa.expect("validated");
    let eval = Arc::new(Evaluation::new(problem.clone(), data, spec.gamma_vec(n_r)?)?);
    let n = eval.n();
    let nt = problem.n_theta();
    let n_dc = problem.n_design_constraints();
    let mut extra = vec![(f64::NEG_INFINITY, f64::INFINITY)];
    extra.extend(std::iter::repeat_n((0.0, f64::INFINITY), n));
    let (lower, upper) = bounds_with(problem.as_ref(), &extra);
    let lam = nt;
    let xi0 = nt + 1;

    let objective = move |x: &[f64]| x[lam] + rho * x[xi0..].iter().sum::<f64>();
    let e = eval.clone();
    let constraints = move |x: &[f64], g: &mut [f64]| {
        let theta = &x[..nt];
        let xi = &x[xi0..];
        let (q, rest) = g.split_at_mut(n * n_r);
        e.quantiles(theta, q);
        for i in 0..n {
            for k in 0..n_r {
                q[i * n_r + k] -= xi[i];
            }
        }
        let means = e.mean_responses(theta);
        rest[0] = soft_inlier_mean(&means, xi, kappa) - x[lam];
        design_constraints(e.problem.as_ref(), theta, &mut rest[1..]);
    };
    let e = eval;
    let start = move |x: &mut [f64]| {
        let theta = x[..nt].to_vec();
        let worst = e.worst(&theta);
        for (xi, w) in x[xi0..].iter_mut().zip(worst) {
            *xi = if w.is_finite() { w.max(0.0) } else { 0.0 };
        }
        let means = e.mean_responses(&theta);
        x[lam] = soft_inlier_mean(&means, &x[xi0..], kappa);
    };
    Ok(NlpProgram::new(lower, upper, objective)
        .with_constraints(n * n_r + 1 + n_dc, constraints)
        .with_layout(VariableLayout {
            theta: 0..nt,
            xi: Some(xi0..xi0 + n),
            lambda: Some(lam),
            ..Default::default()
        })
        .with_start(start))
}

/// `V(i)`: mean of the per-scenario means not exceeding `U_i`.
pub fn lower_subsequence_means(means: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; means.len()];
    let mut acc = 0.0;
    let mut count = 0usize;
    let mut k = 0;
    while k < order.len() {
        // equal means share one subsequence
        let mut end = k;
        while end < order.len() && means[order[end]] == means[order[k]] {
            acc += means[order[end]];
            count += 1;
            end += 1;
        }
        let v = acc / count as f64;
        for &i in &order[k..end] {
            out[i] = v;
        }
        k = end;
    }
    out
}

/// Variables `(θ, λ)`, objective `λ`, and one constraint
/// `F⁻¹_E(1 − α) ≤ 0` with `E_i = max(V(i) − λ, max_k F⁻¹_{N_ik}(γ_k))`.
pub fn build_moment_risk_agnostic(
    problem: Arc<dyn DesignProblem>,
    data: &MultiPointDataset,
    spec: &FormulationSpec,
) -> Result<NlpProgram> {
    check_kind(spec, FormulationKind::MomentRiskAgnostic)?;
    if !problem.has_response() {
        return Err(Error::Config(format!("problem {} defines no response", problem.name())));
    }
    let n_r = problem.n_requirements();
    spec.validate(n_r)?;
    let alpha = spec.alpha.as_ref().expect("validated").scalar("alpha")?;
    let eval = Arc::new(Evaluation::new(problem.clone(), data, spec.gamma_vec(n_r)?)?);
    let nt = problem.n_theta();
    let n_dc = problem.n_design_constraints();
    let (lower, upper) = bounds_with(problem.as_ref(), &[(f64::NEG_INFINITY, f64::INFINITY)]);
    let lam = nt;

    let objective = move |x: &[f64]| x[lam];
    let e = eval.clone();
    let constraints = move |x: &[f64], g: &mut [f64]| {
        let theta = &x[..nt];
        let mut big_e = moment_scores(&e, theta, x[lam]);
        g[0] = quantile_or_nan(&mut big_e, 1.0 - alpha);
        design_constraints(e.problem.as_ref(), theta, &mut g[1..]);
    };
    let e = eval;
    let start = move |x: &mut [f64]| {
        let means = e.mean_responses(&x[..nt]);
        x[lam] = means.iter().sum::<f64>() / means.len() as f64;
    };
    Ok(NlpProgram::new(lower, upper, objective)
        .with_constraints(1 + n_dc, constraints)
        .with_layout(VariableLayout {
            theta: 0..nt,
            lambda: Some(lam),
            ..Default::default()
        })
        .with_start(start))
}

fn moment_scores(e: &Evaluation, theta: &[f64], lambda: f64) -> Vec<f64> {
    let v = lower_subsequence_means(&e.mean_responses(theta));
    let worst = e.worst(theta);
    v.iter().zip(worst).map(|(vi, w)| (vi - lambda).max(w)).collect()
}

/// Outliers of a design: scenarios whose worst requirement quantile is
/// positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub outliers: Vec<usize>,
    pub inliers: Vec<usize>,
    pub sigma: usize,
    /// `max_k F⁻¹_{N_ik}(γ_k)` per scenario.
    pub worst_quantiles: Vec<f64>,
}

impl OutlierReport {
    pub fn fraction(&self) -> f64 {
        self.sigma as f64 / self.worst_quantiles.len() as f64
    }

    pub fn is_outlier(&self, i: usize) -> bool {
        self.outliers.binary_search(&i).is_ok()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["index", "worst_quantile", "is_outlier"])?;
        for (i, q) in self.worst_quantiles.iter().enumerate() {
            w.write_record([i.to_string(), format!("{q:.12e}"), self.is_outlier(i).to_string()])?;
        }
        w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::cli::write_atomic(path, &self.to_csv()?)
    }
}

/// Scenarios with `max_k F⁻¹_{N_ik}(γ_k) > 0`.
pub fn extract_outliers(
    problem: &dyn DesignProblem,
    data: &MultiPointDataset,
    theta: &[f64],
    gamma: &[f64],
) -> Result<OutlierReport> {
    extract_outliers_tol(problem, data, theta, gamma, 0.0)
}

/// [`extract_outliers`] with a tolerance absorbing solver-level
/// constraint violations.
pub fn extract_outliers_tol(
    problem: &dyn DesignProblem,
    data: &MultiPointDataset,
    theta: &[f64],
    gamma: &[f64],
    tol: f64,
) -> Result<OutlierReport> {
    check_data(problem, data)?;
    let n_r = problem.n_requirements();
    if gamma.len() != n_r {
        return Err(Error::Dimension {
            what: "gamma".into(),
            expected: n_r,
            found: gamma.len(),
        });
    }
    let worst = worst_quantiles(problem, data, gamma, theta);
    if let Some(i) = worst.iter().position(|w| !w.is_finite()) {
        return Err(Error::NonFinite {
            component: i,
            value: worst[i],
        });
    }
    let (outliers, inliers): (Vec<usize>, Vec<usize>) = (0..worst.len()).partition(|&i| worst[i] > tol);
    Ok(OutlierReport {
        sigma: outliers.len(),
        outliers,
        inliers,
        worst_quantiles: worst,
    })
}

/// Smallest outlier fraction reachable on `data`: solves the risk-averse
/// scenario program with the design objective dropped and a large
/// penalty, then counts outliers.
pub fn max_feasible_alpha(
    problem: Arc<dyn DesignProblem>,
    data: &MultiPointDataset,
    gamma: &[f64],
    options: &SolverOptions,
) -> Result<(f64, NlpSolution)> {
    let spec = FormulationSpec::new(FormulationKind::RiskAverseScenario)
        .rho(1e3)
        .gamma(gamma.to_vec());
    let program = risk_averse_scenario(problem.clone(), data, &spec, false)?;
    let sol = solver::multistart(&program, options)?;
    let theta = program.theta(&sol.x);
    let report = extract_outliers_tol(problem.as_ref(), data, theta, gamma, options.constraint_tolerance.sqrt())?;
    Ok((report.fraction(), sol))
}
