//! Box-constrained nonlinear programming with inequality constraints.
//!
//! Solves `min f(x)` subject to `g_j(x) <= 0` and `lower <= x <= upper`
//! with a Powell-Hestenes-Rockafellar augmented Lagrangian. Each
//! subproblem is minimized by projected L-BFGS with an Armijo search along
//! the projected path. Gradients are central finite differences, so `f`
//! and `g` only need to be continuous; the kinks of ECDF quantiles and
//! max-compositions are tolerated, not exploited.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::SeededSampler;

pub type ObjectiveFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
pub type ConstraintFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
pub type StartFn = dyn Fn(&mut [f64]) + Send + Sync;

/// Where each decision block sits inside the variable vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariableLayout {
    pub theta: Range<usize>,
    /// Per-scenario slacks.
    pub xi: Option<Range<usize>>,
    /// Per-requirement slacks.
    pub zeta: Option<Range<usize>>,
    /// Moment level.
    pub lambda: Option<usize>,
}

/// A smooth-ish program with box bounds and `g(x) <= 0` constraints.
pub struct NlpProgram {
    lower: Vec<f64>,
    upper: Vec<f64>,
    n_constraints: usize,
    objective: Box<ObjectiveFn>,
    constraints: Box<ConstraintFn>,
    layout: VariableLayout,
    start: Option<Box<StartFn>>,
}

impl std::fmt::Debug for NlpProgram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NlpProgram")
            .field("dim", &self.dim())
            .field("n_constraints", &self.n_constraints)
            .field("layout", &self.layout)
            .finish()
    }
}

impl NlpProgram {
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        objective: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let n = lower.len();
        assert_eq!(n, upper.len(), "bound vectors differ in length");
        Self {
            lower,
            upper,
            n_constraints: 0,
            objective: Box::new(objective),
            constraints: Box::new(|_, _| {}),
            layout: VariableLayout {
                theta: 0..n,
                ..Default::default()
            },
            start: None,
        }
    }

    pub fn with_constraints(
        mut self,
        count: usize,
        constraints: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.n_constraints = count;
        self.constraints = Box::new(constraints);
        self
    }

    pub fn with_layout(mut self, layout: VariableLayout) -> Self {
        self.layout = layout;
        self
    }

    /// Hook that fills auxiliary variables from the design block of a
    /// start point.
    pub fn with_start(mut self, start: impl Fn(&mut [f64]) + Send + Sync + 'static) -> Self {
        self.start = Some(Box::new(start));
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.n_constraints
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn layout(&self) -> &VariableLayout {
        &self.layout
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        (self.objective)(x)
    }

    pub fn constraints(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_constraints];
        (self.constraints)(x, &mut out);
        out
    }

    pub fn constraints_into(&self, x: &[f64], out: &mut [f64]) {
        (self.constraints)(x, out)
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints(x).into_iter().fold(0.0, |a, g| a.max(g))
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, &l), &u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(l, u);
        }
    }

    /// A full start vector from a design: other blocks are filled by the
    /// program's start hook, or placed at the box center.
    pub fn start_from(&self, theta: &[f64]) -> Vec<f64> {
        let mut x = self.box_center();
        for (dst, &src) in x[self.layout.theta.clone()].iter_mut().zip(theta) {
            *dst = src;
        }
        self.project(&mut x);
        if let Some(start) = &self.start {
            start(&mut x);
            self.project(&mut x);
        }
        x
    }

    /// Midpoint of each bounded coordinate; a finite bound for half-open
    /// ones; zero otherwise.
    pub fn box_center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| match (l.is_finite(), u.is_finite()) {
                (true, true) => 0.5 * (l + u),
                (true, false) => l,
                (false, true) => u,
                (false, false) => 0.0,
            })
            .collect()
    }

    /// Design block of `x`.
    pub fn theta<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.layout.theta.clone()]
    }
}

/// Solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_outer_iterations: usize,
    pub max_inner_iterations: usize,
    pub constraint_tolerance: f64,
    pub objective_tolerance: f64,
    /// Relative central-difference step.
    pub fd_step: f64,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub multistart: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_outer_iterations: 50,
            max_inner_iterations: 400,
            constraint_tolerance: 1e-6,
            objective_tolerance: 1e-8,
            fd_step: 1e-6,
            initial_penalty: 10.0,
            penalty_growth: 10.0,
            multistart: 1,
            seed: 0,
        }
    }
}

impl SolverOptions {
    /// Every out-of-range field, as messages.
    pub fn problems(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !(self.constraint_tolerance > 0.0) {
            problems.push("constraint_tolerance must be > 0");
        }
        if !(self.objective_tolerance > 0.0) {
            problems.push("objective_tolerance must be > 0");
        }
        if !(self.fd_step > 0.0) {
            problems.push("fd_step must be > 0");
        }
        if !(self.penalty_growth > 1.0) {
            problems.push("penalty_growth must be > 1");
        }
        if !(self.initial_penalty > 0.0) {
            problems.push("initial_penalty must be > 0");
        }
        if self.multistart == 0 {
            problems.push("multistart must be >= 1");
        }
        if self.max_outer_iterations == 0 || self.max_inner_iterations == 0 {
            problems.push("iteration limits must be >= 1");
        }
        problems.into_iter().map(String::from).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    InfeasiblePoint,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIter => "max-iter",
            SolveStatus::InfeasiblePoint => "infeasible-point",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    pub status: SolveStatus,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub evaluations: usize,
}

impl NlpSolution {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

/// One outer iteration of the augmented Lagrangian loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub max_violation: f64,
    pub penalty: f64,
}

/// Central-difference gradient with steps `step * max(1, |x_j|)`.
/// Uses exactly `2 * x.len()` evaluations of `f`.
pub fn finite_diff_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for j in 0..x.len() {
        let h = step * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        let fp = f(&probe);
        probe[j] = x[j] - h;
        let fm = f(&probe);
        probe[j] = x[j];
        for v in [fp, fm] {
            if !v.is_finite() {
                return Err(Error::NonFinite { component: j, value: v });
            }
        }
        grad[j] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

struct Evaluator<'a> {
    program: &'a NlpProgram,
    evaluations: usize,
    step: f64,
}

impl Evaluator<'_> {
    fn eval(&mut self, x: &[f64], g: &mut [f64]) -> f64 {
        self.evaluations += 1;
        self.program.constraints_into(x, g);
        self.program.objective(x)
    }

    /// Gradient of `f` and Jacobian rows of `g` in one pass of `2 * dim`
    /// evaluations.
    fn derivatives(&mut self, x: &[f64], grad_f: &mut [f64], jac: &mut [Vec<f64>]) -> Result<()> {
        let p = self.program.n_constraints();
        let mut probe = x.to_vec();
        let mut gp = vec![0.0; p];
        let mut gm = vec![0.0; p];
        for j in 0..x.len() {
            let h = self.step * x[j].abs().max(1.0);
            probe[j] = x[j] + h;
            let fp = self.eval(&probe, &mut gp);
            probe[j] = x[j] - h;
            let fm = self.eval(&probe, &mut gm);
            probe[j] = x[j];
            if !fp.is_finite() || !fm.is_finite() {
                return Err(Error::NonFinite {
                    component: j,
                    value: if fp.is_finite() { fm } else { fp },
                });
            }
            grad_f[j] = (fp - fm) / (2.0 * h);
            for c in 0..p {
                jac[c][j] = (gp[c] - gm[c]) / (2.0 * h);
            }
        }
        Ok(())
    }
}

struct Augmented<'a> {
    multipliers: &'a [f64],
    penalty: f64,
}

impl Augmented<'_> {
    fn value(&self, f: f64, g: &[f64]) -> f64 {
        let rho = self.penalty;
        let mut acc = f;
        for (&gj, &lj) in g.iter().zip(self.multipliers) {
            let s = (gj + lj / rho).max(0.0);
            acc += 0.5 * rho * s * s - 0.5 * lj * lj / rho;
        }
        acc
    }

    fn gradient(&self, g: &[f64], grad_f: &[f64], jac: &[Vec<f64>], out: &mut [f64]) {
        out.copy_from_slice(grad_f);
        let rho = self.penalty;
        for ((&gj, &lj), row) in g.iter().zip(self.multipliers).zip(jac) {
            let s = (gj + lj / rho).max(0.0);
            if s > 0.0 {
                for (o, &d) in out.iter_mut().zip(row) {
                    *o += rho * s * d;
                }
            }
        }
    }
}

fn max_violation(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |a, &v| a.max(v))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `program` from `x0` (projected into the box).
pub fn solve(program: &NlpProgram, x0: &[f64], options: &SolverOptions) -> Result<NlpSolution> {
    solve_traced(program, x0, options, &mut |_| {})
}

/// [`solve`] reporting every outer iteration to `trace`.
pub fn solve_traced(
    program: &NlpProgram,
    x0: &[f64],
    options: &SolverOptions,
    trace: &mut dyn FnMut(TraceRow),
) -> Result<NlpSolution> {
    options.validate()?;
    let n = program.dim();
    if x0.len() != n {
        return Err(Error::Dimension {
            what: "start point".into(),
            expected: n,
            found: x0.len(),
        });
    }
    let p = program.n_constraints();
    let mut x = x0.to_vec();
    program.project(&mut x);

    let mut ev = Evaluator {
        program,
        evaluations: 0,
        step: options.fd_step,
    };
    let mut g = vec![0.0; p];
    let mut f = ev.eval(&x, &mut g);
    if !f.is_finite() {
        return Err(Error::InvalidStart(format!("objective is {f}")));
    }
    if let Some(j) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidStart(format!("constraint {j} is {}", g[j])));
    }

    let ctol = options.constraint_tolerance;
    let mut multipliers = vec![0.0; p];
    let mut penalty = options.initial_penalty;
    let mut viol = max_violation(&g);
    let mut best_feasible: Option<(Vec<f64>, f64, f64)> = (viol <= ctol).then(|| (x.clone(), f, viol));
    let mut least_violation = (x.clone(), f, viol);
    let mut converged = false;
    let mut outer = 0;
    let mut inner_total = 0;
    let mut prev_f = f;
    let mut prev_x = x.clone();

    while outer < options.max_outer_iterations {
        outer += 1;
        let aug = Augmented {
            multipliers: &multipliers,
            penalty,
        };
        let (xn, iters) = minimize_subproblem(&mut ev, &aug, &x, options)?;
        inner_total += iters;
        x = xn;
        f = ev.eval(&x, &mut g);
        let new_viol = max_violation(&g);

        for (l, &gj) in multipliers.iter_mut().zip(&g) {
            *l = (*l + penalty * gj).max(0.0);
        }
        trace(TraceRow {
            iteration: outer,
            objective: f,
            max_violation: new_viol,
            penalty,
        });

        if new_viol <= ctol {
            if best_feasible.as_ref().is_none_or(|b| f < b.1) {
                best_feasible = Some((x.clone(), f, new_viol));
            }
        } else if new_viol < least_violation.2 {
            least_violation = (x.clone(), f, new_viol);
        }

        let x_scale = x.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let dx = x.iter().zip(&prev_x).fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
        let df = (f - prev_f).abs();
        if outer > 1
            && new_viol <= ctol
            && (df <= options.objective_tolerance * (1.0 + f.abs()) || dx <= 1e-10 * x_scale)
        {
            converged = true;
            // the final iterate is feasible; keep it even if an earlier
            // feasible iterate had a marginally lower objective from noise
            best_feasible = Some((x.clone(), f, new_viol));
            break;
        }
        if new_viol > ctol && new_viol > 0.25 * viol {
            penalty = (penalty * options.penalty_growth).min(1e12);
        }
        viol = new_viol;
        prev_f = f;
        prev_x = x.clone();
    }

    let (x, objective, max_violation, status) = match best_feasible {
        Some((x, f, v)) => (
            x,
            f,
            v,
            if converged {
                SolveStatus::Converged
            } else {
                SolveStatus::MaxIter
            },
        ),
        None => {
            let (x, f, v) = least_violation;
            (x, f, v, SolveStatus::InfeasiblePoint)
        }
    };
    Ok(NlpSolution {
        x,
        objective,
        max_violation,
        status,
        outer_iterations: outer,
        inner_iterations: inner_total,
        evaluations: ev.evaluations,
    })
}

/// Projected L-BFGS on the augmented Lagrangian.
fn minimize_subproblem(
    ev: &mut Evaluator<'_>,
    aug: &Augmented<'_>,
    x0: &[f64],
    options: &SolverOptions,
) -> Result<(Vec<f64>, usize)> {
    const MEMORY: usize = 10;
    const ARMIJO: f64 = 1e-4;
    let program = ev.program;
    let n = program.dim();
    let p = program.n_constraints();
    let lower = program.lower();
    let upper = program.upper();

    let mut x = x0.to_vec();
    let mut g = vec![0.0; p];
    let fx = ev.eval(&x, &mut g);
    let mut val = aug.value(fx, &g);

    let mut grad_f = vec![0.0; n];
    let mut jac = vec![vec![0.0; n]; p];
    let mut grad = vec![0.0; n];
    let mut refresh_grad = |ev: &mut Evaluator<'_>, x: &[f64], g: &[f64], out: &mut [f64]| -> Result<()> {
        ev.derivatives(x, &mut grad_f, &mut jac)?;
        aug.gradient(g, &grad_f, &jac, out);
        Ok(())
    };
    refresh_grad(ev, &x, &g, &mut grad)?;

    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut stalls = 0;
    let mut iters = 0;
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; p];
    let mut grad_new = vec![0.0; n];

    while iters < options.max_inner_iterations {
        iters += 1;
        // variables pinned at a bound with the gradient pushing outward
        let free: Vec<bool> = (0..n)
            .map(|j| {
                let at_lo = x[j] <= lower[j] && grad[j] > 0.0;
                let at_hi = x[j] >= upper[j] && grad[j] < 0.0;
                !(at_lo || at_hi)
            })
            .collect();
        let pg_norm = (0..n).filter(|&j| free[j]).fold(0.0f64, |a, j| a.max(grad[j].abs()));
        if pg_norm <= 1e-10 * (1.0 + val.abs()) {
            break;
        }

        let mut dir = two_loop(&grad, &free, &s_hist, &y_hist);
        let mut slope = dot(&dir, &grad);
        if !(slope < 0.0) {
            s_hist.clear();
            y_hist.clear();
            dir = (0..n).map(|j| if free[j] { -grad[j] } else { 0.0 }).collect();
            slope = dot(&dir, &grad);
        }
        if s_hist.is_empty() {
            // first step: unit-length move along the steepest direction
            let dn = dir.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if dn > 0.0 {
                let scale = x.iter().fold(1.0f64, |a, v| a.max(v.abs())).min(1e3) / dn;
                let scale = scale.min(1.0 / dn.max(1e-300)).max(1e-12);
                for d in dir.iter_mut() {
                    *d *= scale;
                }
            }
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            for j in 0..n {
                trial[j] = (x[j] + t * dir[j]).clamp(lower[j], upper[j]);
            }
            let ft = ev.eval(&trial, &mut g_trial);
            let vt = aug.value(ft, &g_trial);
            let decrease: f64 = (0..n).map(|j| grad[j] * (trial[j] - x[j])).sum();
            if vt.is_finite() && vt <= val + ARMIJO * decrease.min(0.0) && (vt < val || decrease == 0.0) {
                accepted = Some(vt);
                break;
            }
            t *= 0.5;
        }
        let Some(vt) = accepted else {
            if s_hist.is_empty() {
                break;
            }
            s_hist.clear();
            y_hist.clear();
            continue;
        };
        let _ = slope;

        refresh_grad(ev, &trial, &g_trial, &mut grad_new)?;
        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }

        let rel = (val - vt).abs() / val.abs().max(1.0);
        x.copy_from_slice(&trial);
        g.copy_from_slice(&g_trial);
        grad.copy_from_slice(&grad_new);
        val = vt;
        if rel <= options.objective_tolerance * 1e-2 {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    Ok((x, iters))
}

/// L-BFGS two-loop recursion restricted to free variables.
fn two_loop(grad: &[f64], free: &[bool], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>]) -> Vec<f64> {
    let masked = |v: &[f64]| -> Vec<f64> { v.iter().zip(free).map(|(&a, &f)| if f { a } else { 0.0 }).collect() };
    let mut q = masked(grad);
    let k = s_hist.len();
    let mut alpha = vec![0.0; k];
    let s_m: Vec<Vec<f64>> = s_hist.iter().map(|s| masked(s)).collect();
    let y_m: Vec<Vec<f64>> = y_hist.iter().map(|y| masked(y)).collect();
    let mut rho = vec![0.0; k];
    for i in 0..k {
        let sy = dot(&s_m[i], &y_m[i]);
        rho[i] = if sy > 1e-300 { 1.0 / sy } else { 0.0 };
    }
    for i in (0..k).rev() {
        alpha[i] = rho[i] * dot(&s_m[i], &q);
        for (qj, yj) in q.iter_mut().zip(&y_m[i]) {
            *qj -= alpha[i] * yj;
        }
    }
    if k > 0 {
        let yy = dot(&y_m[k - 1], &y_m[k - 1]);
        let sy = dot(&s_m[k - 1], &y_m[k - 1]);
        if yy > 0.0 && sy > 0.0 {
            let gamma = sy / yy;
            for qj in q.iter_mut() {
                *qj *= gamma;
            }
        }
    }
    for i in 0..k {
        let beta = rho[i] * dot(&y_m[i], &q);
        for (qj, sj) in q.iter_mut().zip(&s_m[i]) {
            *qj += (alpha[i] - beta) * sj;
        }
    }
    q.iter().zip(free).map(|(&v, &f)| if f { -v } else { 0.0 }).collect()
}

/// Solves from `options.multistart` starts: the box center, then seeded
/// uniform draws of the design block. Returns the feasible solution with
/// the lowest objective, else the least infeasible one.
pub fn multistart(program: &NlpProgram, options: &SolverOptions) -> Result<NlpSolution> {
    options.validate()?;
    let starts = multistart_points(program, options);
    let results: Vec<Result<NlpSolution>> = starts.par_iter().map(|x0| solve(program, x0, options)).collect();
    let mut best: Option<NlpSolution> = None;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(sol) => {
                if best.as_ref().is_none_or(|b| better(&sol, b, options.constraint_tolerance)) {
                    best = Some(sol);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::InvalidStart("no start points".into())),
    }
}

fn better(a: &NlpSolution, b: &NlpSolution, tol: f64) -> bool {
    match (a.is_feasible(tol), b.is_feasible(tol)) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => a.objective < b.objective,
        (false, false) => a.max_violation < b.max_violation,
    }
}

/// Start points used by [`multistart`].
pub fn multistart_points(program: &NlpProgram, options: &SolverOptions) -> Vec<Vec<f64>> {
    let layout = program.layout().theta.clone();
    let center = program.box_center();
    let mut sampler = SeededSampler::new(options.seed, 0x6d73);
    (0..options.multistart)
        .map(|k| {
            let theta: Vec<f64> = if k == 0 {
                center[layout.clone()].to_vec()
            } else {
                layout
                    .clone()
                    .map(|j| {
                        let (l, u) = (program.lower()[j], program.upper()[j]);
                        if l.is_finite() && u.is_finite() {
                            sampler.uniform_range(l, u)
                        } else {
                            center[j] + sampler.standard_normal()
                        }
                    })
                    .collect()
            };
            program.start_from(&theta)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unbounded(n: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])
    }

    #[test]
    fn fd_gradient_examples() {
        let g = finite_diff_gradient(|x| x[0] * x[0], &[3.0], 1e-6).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
        let g = finite_diff_gradient(|_| 4.2, &[1.0, -2.0], 1e-6).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        let g = finite_diff_gradient(|x| x[0] * x[1], &[2.0, 3.0], 1e-6).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-6 && (g[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn fd_gradient_counts_and_errors() {
        let calls = std::cell::Cell::new(0);
        finite_diff_gradient(
            |x| {
                calls.set(calls.get() + 1);
                x.iter().sum()
            },
            &[1.0, 2.0, 3.0],
            1e-6,
        )
        .unwrap();
        assert_eq!(calls.get(), 6);
        let err = finite_diff_gradient(|x| if x[1] > 2.0 { f64::NAN } else { 0.0 }, &[0.0, 2.0], 1e-6);
        assert!(matches!(err, Err(Error::NonFinite { component: 1, .. })));
    }

    #[test]
    fn unconstrained_quadratic() {
        let (l, u) = unbounded(1);
        let p = NlpProgram::new(l, u, |x| (x[0] - 2.0).powi(2));
        let s = solve(&p, &[0.0], &SolverOptions::default()).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-6, "{s:?}");
        assert!(s.objective < 1e-6);
        assert_eq!(s.status, SolveStatus::Converged);
    }

    #[test]
    fn active_constraint() {
        let (l, u) = unbounded(1);
        let p = NlpProgram::new(l, u, |x| x[0]).with_constraints(1, |x, g| g[0] = 1.0 - x[0]);
        let s = solve(&p, &[5.0], &SolverOptions::default()).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-5, "{s:?}");
        assert_eq!(s.status, SolveStatus::Converged);
    }

    #[test]
    fn contradictory_constraints() {
        let (l, u) = unbounded(1);
        let p = NlpProgram::new(l, u, |x| x[0]).with_constraints(2, |x, g| {
            g[0] = x[0];
            g[1] = 1.0 - x[0];
        });
        let s = solve(&p, &[0.0], &SolverOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::InfeasiblePoint);
        assert!(s.max_violation >= 0.5 - 1e-9);
    }

    #[test]
    fn non_finite_start_is_rejected() {
        let (l, u) = unbounded(1);
        let p = NlpProgram::new(l, u, |x| if x[0] < 1.0 { f64::NAN } else { x[0] });
        assert!(matches!(solve(&p, &[0.0], &SolverOptions::default()), Err(Error::InvalidStart(_))));
    }

    #[test]
    fn start_is_projected() {
        let p = NlpProgram::new(vec![0.0], vec![1.0], |x| -x[0]);
        let s = solve(&p, &[7.0], &SolverOptions::default()).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonsmooth_abs() {
        let (l, u) = unbounded(1);
        let p = NlpProgram::new(l, u, |x| x[0].max(-x[0]));
        let s = solve(&p, &[3.7], &SolverOptions::default()).unwrap();
        assert!(s.x[0].abs() < 1e-4, "{s:?}");
    }

    #[test]
    fn rosenbrock_in_a_box() {
        let p = NlpProgram::new(vec![-2.0, -2.0], vec![2.0, 2.0], |x| {
            100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)
        });
        let s = solve(&p, &[-1.2, 1.0], &SolverOptions::default()).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-4 && (s.x[1] - 1.0).abs() < 1e-4, "{s:?}");
    }

    /// Bimodal 1-D function: a shallow basin near -1 and the global one
    /// near 2.
    fn bimodal(x: f64) -> f64 {
        0.3 * (x + 1.0).powi(2) * (x - 2.0).powi(2) + 0.5 * x * x - x
    }

    #[test]
    fn multistart_finds_global_basin() {
        // grid oracle
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=80_000 {
            let x = -4.0 + 8.0 * k as f64 / 80_000.0;
            if bimodal(x) < best.0 {
                best = (bimodal(x), x);
            }
        }
        let p = NlpProgram::new(vec![-4.0], vec![4.0], |x| bimodal(x[0]));
        let opts = SolverOptions {
            multistart: 8,
            seed: 1,
            ..Default::default()
        };
        let s = multistart(&p, &opts).unwrap();
        assert!((s.x[0] - best.1).abs() < 1e-3, "{s:?} vs {best:?}");
        assert!(s.objective <= best.0 + 1e-8);
    }

    #[test]
    fn single_start_equals_center_solve() {
        let p = NlpProgram::new(vec![-4.0], vec![4.0], |x| bimodal(x[0]));
        let opts = SolverOptions::default();
        let a = multistart(&p, &opts).unwrap();
        let b = solve(&p, &[0.0], &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn multistart_all_infeasible_returns_least_violation() {
        let p = NlpProgram::new(vec![-3.0], vec![3.0], |x| x[0]).with_constraints(2, |x, g| {
            g[0] = x[0] - 1.0;
            g[1] = 2.0 - x[0];
        });
        let opts = SolverOptions {
            multistart: 4,
            max_outer_iterations: 20,
            ..Default::default()
        };
        let s = multistart(&p, &opts).unwrap();
        assert_eq!(s.status, SolveStatus::InfeasiblePoint);
        assert!((s.max_violation - 0.5).abs() < 1e-3, "{s:?}");
    }

    #[test]
    fn deterministic() {
        let p = NlpProgram::new(vec![-2.0, -2.0], vec![2.0, 2.0], |x| (x[0] - 0.3).powi(2) + (x[0] * x[1] - 1.0).powi(2))
            .with_constraints(1, |x, g| g[0] = x[0] + x[1] - 1.5);
        let opts = SolverOptions {
            multistart: 3,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(multistart(&p, &opts).unwrap(), multistart(&p, &opts).unwrap());
    }

    #[test]
    fn options_validation_lists_all_problems() {
        let o = SolverOptions {
            constraint_tolerance: 0.0,
            multistart: 0,
            ..Default::default()
        };
        let Err(Error::Config(msg)) = o.validate() else { panic!() };
        assert!(msg.contains("constraint_tolerance") && msg.contains("multistart"));
    }
}
