//! Monte Carlo reliability and robustness analysis of a fixed design.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::inv_beta_reg;

use crate::error::{Error, Result};
use crate::problems::DesignProblem;
use crate::scenario::{PerturbationModel, Scenario, SeededSampler};

/// Exact two-sided Clopper-Pearson interval for a binomial proportion.
pub fn binomial_ci(successes: u64, trials: u64, level: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::InvalidInput(format!(
            "need 0 <= successes <= trials and trials > 0, got {successes}/{trials}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let (x, n) = (successes as f64, trials as f64);
    let tail = 0.5 * (1.0 - level);
    let lo = if successes == 0 {
        0.0
    } else {
        inv_beta_reg(x, n - x + 1.0, tail)
    };
    let hi = if successes == trials {
        1.0
    } else {
        inv_beta_reg(x + 1.0, n - x, 1.0 - tail)
    };
    let p = x / n;
    Ok((lo.clamp(0.0, p), hi.clamp(p, 1.0)))
}

/// A failure-probability estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub failures: usize,
    pub trials: usize,
    pub p: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Estimate {
    pub fn from_counts(failures: usize, trials: usize, level: f64) -> Result<Self> {
        let (lo, hi) = binomial_ci(failures as u64, trials as u64, level)?;
        Ok(Self {
            failures,
            trials,
            p: failures as f64 / trials as f64,
            lo,
            hi,
        })
    }

    pub fn covers(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }
}

fn check_inputs(problem: &dyn DesignProblem, theta: &[f64], scenarios: &[Scenario]) -> Result<()> {
    problem.check_theta(theta)?;
    if scenarios.is_empty() {
        return Err(Error::InvalidInput("no test scenarios".into()));
    }
    if let Some(s) = scenarios.iter().find(|s| s.dim() != problem.n_delta()) {
        return Err(Error::Dimension {
            what: "test scenario".into(),
            expected: problem.n_delta(),
            found: s.dim(),
        });
    }
    Ok(())
}

/// Nominal failure probability: the share of scenarios with
/// `max_k r_k(θ, δ) > 0`.
pub fn reliability(problem: &dyn DesignProblem, theta: &[f64], scenarios: &[Scenario], level: f64) -> Result<Estimate> {
    check_inputs(problem, theta, scenarios)?;
    let failures = scenarios
        .par_iter()
        .filter(|s| !problem.succeeds(theta, s.coords()))
        .count();
    Estimate::from_counts(failures, scenarios.len(), level)
}

/// Number of failing points among `m` perturbations of each scenario.
/// Scenario `i` draws from `sampler.fork(i)`, so the counts do not depend
/// on thread scheduling.
pub fn perturbed_failure_counts(
    problem: &dyn DesignProblem,
    theta: &[f64],
    scenarios: &[Scenario],
    model: &PerturbationModel,
    m: usize,
    sampler: &SeededSampler,
) -> Result<Vec<usize>> {
    check_inputs(problem, theta, scenarios)?;
    if m == 0 {
        return Err(Error::InvalidInput("m' must be >= 1".into()));
    }
    model.radius.validate()?;
    let dim = problem.n_delta();
    scenarios
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = sampler.fork(i as u64);
            let radius = model.radius.radius(s.coords(), Some((problem, theta)))?;
            let offsets = model.unit_offsets(dim, m, &mut rng);
            let mut point = vec![0.0; dim];
            let mut failing = 0;
            for off in &offsets {
                for ((p, &c), &o) in point.iter_mut().zip(s.coords()).zip(off) {
                    *p = c + radius * o;
                }
                if !problem.succeeds(theta, &point) {
                    failing += 1;
                }
            }
            Ok(failing)
        })
        .collect()
}

/// `⌈m (1 − γ)⌉`, ignoring floating-point dust such as
/// `200 * (1 - 0.95) = 10.000000000000002`.
pub fn failure_threshold(m: usize, gamma: f64) -> usize {
    let t = m as f64 * (1.0 - gamma);
    (t - 1e-9 * t.max(1.0)).ceil().max(0.0) as usize
}

/// Perturbational failure probability: a scenario fails when more than
/// `⌈m (1 − γ)⌉` of its `m` perturbed points fail.
#[allow(clippy::too_many_arguments)]
pub fn robustness(
    problem: &dyn DesignProblem,
    theta: &[f64],
    scenarios: &[Scenario],
    model: &PerturbationModel,
    m: usize,
    gamma: f64,
    sampler: &SeededSampler,
    level: f64,
) -> Result<Estimate> {
    check_gamma(gamma)?;
    let counts = perturbed_failure_counts(problem, theta, scenarios, model, m, sampler)?;
    perturbational_estimate(&counts, m, gamma, level)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidInput(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    Ok(())
}

/// Estimate from precomputed per-scenario failure counts.
pub fn perturbational_estimate(counts: &[usize], m: usize, gamma: f64, level: f64) -> Result<Estimate> {
    check_gamma(gamma)?;
    let threshold = failure_threshold(m, gamma);
    let failures = counts.iter().filter(|&&c| c > threshold).count();
    Estimate::from_counts(failures, counts.len(), level)
}

/// `ℓ_k`: mean of the positive values of requirement `k`, or 0 when it is
/// never violated.
pub fn loss_from_values(values: &[f64]) -> f64 {
    let (sum, count) = values
        .iter()
        .filter(|v| **v > 0.0)
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Loss measures of every requirement over the test scenarios.
pub fn loss_measures(problem: &dyn DesignProblem, theta: &[f64], scenarios: &[Scenario]) -> Result<Vec<f64>> {
    Ok(nominal_pass(problem, theta, scenarios)?.loss)
}

struct NominalPass {
    any: usize,
    per_requirement: Vec<usize>,
    loss: Vec<f64>,
    mean_response: Option<f64>,
}

fn nominal_pass(problem: &dyn DesignProblem, theta: &[f64], scenarios: &[Scenario]) -> Result<NominalPass> {
    check_inputs(problem, theta, scenarios)?;
    let n_r = problem.n_requirements();
    // ordered collection keeps floating sums independent of scheduling
    let rows: Vec<(Vec<f64>, Option<f64>)> = scenarios
        .par_iter()
        .map(|s| {
            let mut r = vec![0.0; n_r];
            problem.requirements(theta, s.coords(), &mut r);
            (r, problem.response(theta, s.coords()))
        })
        .collect();
    let mut per_requirement = vec![0; n_r];
    let mut any = 0;
    let mut column = Vec::with_capacity(rows.len());
    let mut loss = Vec::with_capacity(n_r);
    for k in 0..n_r {
        column.clear();
        column.extend(rows.iter().map(|(r, _)| r[k]));
        per_requirement[k] = column.iter().filter(|v| **v > 0.0).count();
        loss.push(loss_from_values(&column));
    }
    for (r, _) in &rows {
        if r.iter().any(|v| *v > 0.0 || v.is_nan()) {
            any += 1;
        }
    }
    let mean_response = if problem.has_response() {
        let sum: f64 = rows.iter().map(|(_, h)| h.unwrap_or(f64::NAN)).sum();
        Some(sum / rows.len() as f64)
    } else {
        None
    };
    Ok(NominalPass {
        any,
        per_requirement,
        loss,
        mean_response,
    })
}

/// Settings of an analysis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    /// Points per test scenario for the perturbational estimate.
    pub m_test: usize,
    pub gammas: Vec<f64>,
    pub level: f64,
    pub seed: u64,
    pub model: PerturbationModel,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            m_test: 200,
            gammas: vec![0.95],
            level: 0.95,
            seed: 0,
            model: PerturbationModel::nominal(),
        }
    }
}

impl AnalysisOptions {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.m_test == 0 {
            out.push("analysis m_test must be >= 1".to_string());
        }
        if self.gammas.iter().any(|g| !(*g > 0.0 && *g <= 1.0)) {
            out.push("analysis gammas must lie in (0, 1]".to_string());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            out.push("analysis level must lie in (0, 1)".to_string());
        }
        if let Err(e) = self.model.radius.validate() {
            out.push(e.to_string());
        }
        out
    }
}

/// Reliability and robustness of one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub problem: String,
    pub synthetic: bool,
    pub n_test: usize,
    pub m_test: usize,
    pub level: f64,
    pub nominal: Estimate,
    /// One estimate per analyzed `γ`.
    pub perturbational: Vec<(f64, Estimate)>,
    pub per_requirement: Vec<Estimate>,
    pub loss: Vec<f64>,
    pub mean_response: Option<f64>,
}

/// Runs the nominal and perturbational analyses on shared samples.
pub fn analyze(
    problem: &dyn DesignProblem,
    theta: &[f64],
    scenarios: &[Scenario],
    options: &AnalysisOptions,
) -> Result<AnalysisReport> {
    let problems = options.problems();
    if !problems.is_empty() {
        return Err(Error::Config(problems.join("; ")));
    }
    let pass = nominal_pass(problem, theta, scenarios)?;
    let n = scenarios.len();
    let sampler = SeededSampler::new(options.seed, 0x7571);
    let counts = perturbed_failure_counts(problem, theta, scenarios, &options.model, options.m_test, &sampler)?;
    let perturbational = options
        .gammas
        .iter()
        .map(|&g| Ok((g, perturbational_estimate(&counts, options.m_test, g, options.level)?)))
        .collect::<Result<Vec<_>>>()?;
    let per_requirement = pass
        .per_requirement
        .iter()
        .map(|&c| Estimate::from_counts(c, n, options.level))
        .collect::<Result<Vec<_>>>()?;
    Ok(AnalysisReport {
        problem: problem.name().to_string(),
        synthetic: problem.is_synthetic(),
        n_test: n,
        m_test: options.m_test,
        level: options.level,
        nominal: Estimate::from_counts(pass.any, n, options.level)?,
        perturbational,
        per_requirement,
        loss: pass.loss,
        mean_response: pass.mean_response,
    })
}

impl AnalysisReport {
    /// Long-format CSV: `metric,value,ci_lo,ci_hi`.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "value", "ci_lo", "ci_hi"])?;
        let est = |w: &mut csv::Writer<Vec<u8>>, name: String, e: &Estimate| -> Result<()> {
            w.write_record([name, fmt(e.p), fmt(e.lo), fmt(e.hi)])?;
            Ok(())
        };
        w.write_record(["n_test".to_string(), self.n_test.to_string(), String::new(), String::new()])?;
        w.write_record(["m_test".to_string(), self.m_test.to_string(), String::new(), String::new()])?;
        est(&mut w, "p_nom".into(), &self.nominal)?;
        for (g, e) in &self.perturbational {
            est(&mut w, format!("p_per@{g}"), e)?;
        }
        for (k, e) in self.per_requirement.iter().enumerate() {
            est(&mut w, format!("p_fail_r{}", k + 1), e)?;
        }
        for (k, l) in self.loss.iter().enumerate() {
            w.write_record([format!("loss_r{}", k + 1), fmt(*l), String::new(), String::new()])?;
        }
        if let Some(h) = self.mean_response {
            w.write_record(["mean_response".to_string(), fmt(h), String::new(), String::new()])?;
        }
        w.write_record([
            "synthetic".to_string(),
            self.synthetic.to_string(),
            String::new(),
            String::new(),
        ])?;
        w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

pub(crate) fn fmt(v: f64) -> String {
    format!("{v:.6e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::interval_cover_problem;
    use crate::scenario::{sample_box, PerturbationKind, RadiusRule};

    /// Independent oracle: bisection on the binomial tail sums.
    fn binom_tail_ge(x: u64, n: u64, p: f64) -> f64 {
        (x..=n).map(|k| binom_pmf(k, n, p)).sum()
    }

    fn binom_pmf(k: u64, n: u64, p: f64) -> f64 {
        let ln_c: f64 = (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum();
        (ln_c + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
    }

    fn bisect(f: impl Fn(f64) -> f64) -> f64 {
        let (mut a, mut b) = (1e-12, 1.0 - 1e-12);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if f(mid) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn clopper_pearson_against_tail_inversion() {
        for (x, n) in [(20u64, 100u64), (3, 50), (47, 60), (1, 10)] {
            let (lo, hi) = binomial_ci(x, n, 0.95).unwrap();
            let lo_ref = bisect(|p| binom_tail_ge(x, n, p) - 0.025);
            let hi_ref = bisect(|p| 0.025 - (1.0 - binom_tail_ge(x + 1, n, p)));
            assert!((lo - lo_ref).abs() < 1e-8, "{x}/{n}: {lo} vs {lo_ref}");
            assert!((hi - hi_ref).abs() < 1e-8, "{x}/{n}: {hi} vs {hi_ref}");
        }
        let (lo, hi) = binomial_ci(20, 100, 0.95).unwrap();
        assert!((lo - 0.127).abs() < 5e-4 && (hi - 0.292).abs() < 5e-4);
    }

    #[test]
    fn clopper_pearson_edges() {
        assert_eq!(binomial_ci(0, 100, 0.95).unwrap().0, 0.0);
        assert_eq!(binomial_ci(100, 100, 0.95).unwrap().1, 1.0);
        assert!(binomial_ci(3, 2, 0.95).is_err());
        assert!(binomial_ci(0, 0, 0.95).is_err());
    }

    #[test]
    fn threshold_arithmetic() {
        assert_eq!(failure_threshold(200, 0.95), 10);
        assert_eq!(failure_threshold(200, 1.0), 0);
        assert_eq!(failure_threshold(81, 0.95), 5);
        assert_eq!(failure_threshold(3, 0.5), 2);
    }

    #[test]
    fn reliability_of_interval_cover() {
        let p = interval_cover_problem(0.0, 10.0);
        let mut s = SeededSampler::new(3, 0);
        let test = sample_box(&[0.0], &[4.0], 10_000, &mut s);
        let e = reliability(&p, &[3.0], &test, 0.95).unwrap();
        assert!(e.covers(0.25), "{e:?}");
        let e = reliability(&p, &[4.0], &test, 0.95).unwrap();
        assert_eq!((e.p, e.lo), (0.0, 0.0));
        let e = reliability(&p, &[3.0], &[Scenario::from(vec![3.5])], 0.95).unwrap();
        assert_eq!(e.p, 1.0);
    }

    #[test]
    fn robustness_of_interval_cover() {
        let p = interval_cover_problem(0.0, 10.0);
        let mut s = SeededSampler::new(4, 0);
        let test = sample_box(&[0.0], &[4.0], 10_000, &mut s);
        let model = PerturbationModel::new(PerturbationKind::BallVolume, RadiusRule::Constant { radius: 0.5 });
        let e = robustness(&p, &[3.0], &test, &model, 2000, 0.95, &SeededSampler::new(5, 1), 0.95).unwrap();
        assert!(e.covers(0.3625), "{e:?}");
    }

    #[test]
    fn zero_radius_robustness_is_reliability() {
        let p = interval_cover_problem(0.0, 10.0);
        let mut s = SeededSampler::new(6, 0);
        let test = sample_box(&[0.0], &[4.0], 500, &mut s);
        let a = reliability(&p, &[2.2], &test, 0.95).unwrap();
        let b = robustness(
            &p,
            &[2.2],
            &test,
            &PerturbationModel::nominal(),
            7,
            1.0,
            &SeededSampler::new(1, 1),
            0.95,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss_from_values(&[-1.0, 0.5, 1.5]), 1.0);
        assert_eq!(loss_from_values(&[-1.0, -2.0]), 0.0);
        assert_eq!(loss_from_values(&[0.2]), 0.2);
    }

    #[test]
    fn analysis_is_reproducible() {
        let p = interval_cover_problem(0.0, 10.0);
        let mut s = SeededSampler::new(8, 0);
        let test = sample_box(&[0.0], &[4.0], 1000, &mut s);
        let opts = AnalysisOptions {
            m_test: 50,
            gammas: vec![0.9, 0.95, 1.0],
            model: PerturbationModel::new(PerturbationKind::BallVolume, RadiusRule::Constant { radius: 0.3 }),
            ..Default::default()
        };
        let a = analyze(&p, &[3.0], &test, &opts).unwrap();
        let b = analyze(&p, &[3.0], &test, &opts).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        // non-decreasing in gamma on shared samples
        let ps: Vec<f64> = a.perturbational.iter().map(|(_, e)| e.p).collect();
        assert!(ps.windows(2).all(|w| w[0] <= w[1]), "{ps:?}");
        assert_eq!(a.mean_response.map(|h| (h - 2.0).abs() < 0.2), Some(true));
    }
}
