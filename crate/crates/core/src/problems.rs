//! Design problems: objective, requirement functions and parameter box.
//!
//! A design `theta` succeeds at parameter point `delta` when every
//! requirement `r_k(theta, delta) <= 0`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ecdf;
use crate::error::{Error, Result};
use crate::scenario::{norm, SeededSampler};

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                what: "upper bound".into(),
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Config("lower bound exceeds upper bound".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.lower).zip(&self.upper).all(|((v, l), u)| l <= v && v <= u)
    }
}

/// The design problem abstraction.
///
/// Implementations must be pure: evaluating at distinct points from several
/// threads is always allowed.
pub trait DesignProblem: Send + Sync {
    fn name(&self) -> &str;
    fn n_theta(&self) -> usize;
    fn n_delta(&self) -> usize;
    fn n_requirements(&self) -> usize;
    /// The decision box `Theta`.
    fn theta_bounds(&self) -> &Bounds;
    /// Parameter box used to generate test data.
    fn delta_box(&self) -> &Bounds;
    fn objective(&self, theta: &[f64]) -> f64;
    /// Writes `r_k(theta, delta)` for all `k` into `out`.
    fn requirements(&self, theta: &[f64], delta: &[f64], out: &mut [f64]);

    fn has_response(&self) -> bool {
        false
    }

    /// Response `h(theta, delta)` for moment formulations.
    fn response(&self, _theta: &[f64], _delta: &[f64]) -> Option<f64> {
        None
    }

    /// Decision-space validity constraints `c(theta) <= 0`, appended to
    /// every built program without relaxation.
    fn n_design_constraints(&self) -> usize {
        0
    }

    fn design_constraints(&self, _theta: &[f64], _out: &mut [f64]) {}

    /// True for stand-ins that do not model real physics.
    fn is_synthetic(&self) -> bool {
        false
    }

    fn max_requirement(&self, theta: &[f64], delta: &[f64]) -> f64 {
        let mut r = vec![0.0; self.n_requirements()];
        self.requirements(theta, delta, &mut r);
        r.into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `delta` lies in the success domain of `theta`.
    fn succeeds(&self, theta: &[f64], delta: &[f64]) -> bool {
        self.max_requirement(theta, delta) <= 0.0
    }

    /// Checks a design vector against the problem dimensions.
    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_theta() {
            return Err(Error::Dimension {
                what: "design".into(),
                expected: self.n_theta(),
                found: theta.len(),
            });
        }
        Ok(())
    }
}

/// One-dimensional oracle problem: cover every scenario from above with
/// the smallest `theta`. `J(theta) = theta`, `r(theta, delta) = delta - theta`.
#[derive(Debug, Clone)]
pub struct IntervalCover {
    theta: Bounds,
    delta: Bounds,
}

impl IntervalCover {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self::with_delta_box(lo, hi, lo, hi)
    }

    pub fn with_delta_box(lo: f64, hi: f64, delta_lo: f64, delta_hi: f64) -> Self {
        Self {
            theta: Bounds {
                lower: vec![lo],
                upper: vec![hi],
            },
            delta: Bounds {
                lower: vec![delta_lo],
                upper: vec![delta_hi],
            },
        }
    }
}

/// `interval_cover` with `Theta = [lo, hi]` and `Delta = [0, 4]`.
pub fn interval_cover_problem(lo: f64, hi: f64) -> IntervalCover {
    IntervalCover::with_delta_box(lo, hi, 0.0, 4.0)
}

impl DesignProblem for IntervalCover {
    fn name(&self) -> &str {
        "interval-cover"
    }
    fn n_theta(&self) -> usize {
        1
    }
    fn n_delta(&self) -> usize {
        1
    }
    fn n_requirements(&self) -> usize {
        1
    }
    fn theta_bounds(&self) -> &Bounds {
        &self.theta
    }
    fn delta_box(&self) -> &Bounds {
        &self.delta
    }
    fn objective(&self, theta: &[f64]) -> f64 {
        theta[0]
    }
    fn requirements(&self, theta: &[f64], delta: &[f64], out: &mut [f64]) {
        out[0] = delta[0] - theta[0];
    }
    fn has_response(&self) -> bool {
        true
    }
    /// `h(theta, delta) = delta`, so per-scenario means are the data itself.
    fn response(&self, _theta: &[f64], delta: &[f64]) -> Option<f64> {
        Some(delta[0])
    }
}

/// Unpacked enclosure design `theta = [c1, u1, c2, u2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnclosureDesign {
    pub c1: [f64; 2],
    pub u1: f64,
    pub c2: [f64; 2],
    pub u2: f64,
}

impl EnclosureDesign {
    pub fn from_theta(theta: &[f64]) -> Self {
        Self {
            c1: [theta[0], theta[1]],
            u1: theta[2],
            c2: [theta[3], theta[4]],
            u2: theta[5],
        }
    }

    pub fn to_theta(&self) -> Vec<f64> {
        vec![self.c1[0], self.c1[1], self.u1, self.c2[0], self.c2[1], self.u2]
    }

    /// `u1 > 0`, `u2 > 0` and the inner center inside the outer circle.
    pub fn is_valid(&self) -> bool {
        self.u1 > 0.0 && self.u2 > 0.0 && dist(self.c1, self.c2) <= self.u1
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// `(r1, r2)`: outside the outer circle, inside the inner circle.
pub fn enclosure_requirements(design: &EnclosureDesign, delta: &[f64]) -> (f64, f64) {
    let d = [delta[0], delta[1]];
    (dist(d, design.c1) - design.u1, design.u2 - dist(d, design.c2))
}

/// Monte Carlo area of the success ring inside `domain`:
/// `Vol(domain) * F_Z(0)` with `Z = {max_k r_k(theta, u_i)}` over
/// `mc_points` uniform samples.
pub fn enclosure_volume(theta: &[f64], domain: &Bounds, mc_points: usize, sampler: &mut SeededSampler) -> f64 {
    let points: Vec<[f64; 2]> = (0..mc_points.max(1))
        .map(|_| {
            let p = sampler.uniform_in_box(&domain.lower, &domain.upper);
            [p[0], p[1]]
        })
        .collect();
    volume_on_points(theta, domain.volume(), &points)
}

fn volume_on_points(theta: &[f64], box_volume: f64, points: &[[f64; 2]]) -> f64 {
    let design = EnclosureDesign::from_theta(theta);
    let mut z: Vec<f64> = points
        .iter()
        .map(|p| {
            let (r1, r2) = enclosure_requirements(&design, p);
            r1.max(r2)
        })
        .collect();
    box_volume * ecdf::cdf_unsorted(&mut z, 0.0)
}

/// Minimal-volume ring `{inside C1, outside C2}` enclosing the data.
#[derive(Debug, Clone)]
pub struct Enclosure {
    theta: Bounds,
    delta: Bounds,
    mc_points: Vec<[f64; 2]>,
}

impl Enclosure {
    /// Default data box `[-6, 6]^2` and `2e4` volume points.
    pub const DEFAULT_HALF_WIDTH: f64 = 6.0;
    pub const DEFAULT_MC_POINTS: usize = 20_000;

    pub fn new(half_width: f64, mc_points: usize, seed: u64) -> Self {
        let h = half_width;
        let u_max = 2.0 * h * std::f64::consts::SQRT_2;
        let delta = Bounds {
            lower: vec![-h, -h],
            upper: vec![h, h],
        };
        let mut sampler = SeededSampler::new(seed, 0x766f_6c75_6d65);
        let mc_points = (0..mc_points.max(1))
            .map(|_| {
                let p = sampler.uniform_in_box(&delta.lower, &delta.upper);
                [p[0], p[1]]
            })
            .collect();
        Self {
            theta: Bounds {
                lower: vec![-h, -h, 1e-3, -h, -h, 1e-3],
                upper: vec![h, h, u_max, h, h, u_max],
            },
            delta,
            mc_points,
        }
    }

    pub fn mc_points(&self) -> usize {
        self.mc_points.len()
    }

    /// Exact area of the ring when both circles lie inside the box and the
    /// inner circle lies inside the outer one.
    pub fn analytic_area(design: &EnclosureDesign) -> f64 {
        PI * (design.u1 * design.u1 - design.u2 * design.u2)
    }
}

impl Default for Enclosure {
    fn default() -> Self {
        Self::new(Self::DEFAULT_HALF_WIDTH, Self::DEFAULT_MC_POINTS, 0)
    }
}

impl DesignProblem for Enclosure {
    fn name(&self) -> &str {
        "enclosure"
    }
    fn n_theta(&self) -> usize {
        6
    }
    fn n_delta(&self) -> usize {
        2
    }
    fn n_requirements(&self) -> usize {
        2
    }
    fn theta_bounds(&self) -> &Bounds {
        &self.theta
    }
    fn delta_box(&self) -> &Bounds {
        &self.delta
    }
    fn objective(&self, theta: &[f64]) -> f64 {
        volume_on_points(theta, self.delta.volume(), &self.mc_points)
    }
    fn requirements(&self, theta: &[f64], delta: &[f64], out: &mut [f64]) {
        let (r1, r2) = enclosure_requirements(&EnclosureDesign::from_theta(theta), delta);
        out[0] = r1;
        out[1] = r2;
    }
    fn n_design_constraints(&self) -> usize {
        1
    }
    fn design_constraints(&self, theta: &[f64], out: &mut [f64]) {
        let d = EnclosureDesign::from_theta(theta);
        out[0] = dist(d.c1, d.c2) - d.u1;
    }
}

/// Synthetic wing-like problem with 9 design variables, 6 uncertain
/// parameters and 2 requirements (flutter margin, aggregated stress).
///
/// Everything here is an analytic stand-in built from smooth functions; it
/// exercises the pipeline at realistic dimensions and is labeled synthetic
/// in every report.
///
/// Design variables live in `[-1, 1]`: root chord, tip chord, semispan,
/// sweep (each `+-5` inches about 22, 14.5, 30, 32) and five thickness
/// control points (`1 +- 0.75` inches). Parameters are static Mach, flutter
/// Mach, mass- and stiffness-proportional damping, kinematic viscosity and
/// trim lift coefficient.
#[derive(Debug, Clone)]
pub struct WingSurrogate {
    theta: Bounds,
    delta: Bounds,
    coeff: WingCoefficients,
    feasible_probe_found: bool,
}

#[derive(Debug, Clone)]
struct WingCoefficients {
    flutter_scale: f64,
    stiffness_weights: [f64; 5],
    mach_drop: f64,
    sweep_gain: f64,
    damping_gain: [f64; 2],
    bump_amp: f64,
    bump_dir: [f64; 9],
    bump_phase: f64,
    stress_scale: f64,
    mach_load: f64,
    drag_weight: f64,
}

const WING_STATIONS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
const KS_RHO: f64 = 20.0;

impl WingSurrogate {
    pub fn new(seed: u64) -> Self {
        let mut s = SeededSampler::new(seed, 0x7769_6e67);
        let mut jitter = |base: f64| base * (1.0 + 0.05 * (2.0 * s.uniform() - 1.0));
        let flutter_scale = jitter(2.6);
        let stiffness_weights = [jitter(0.35), jitter(0.25), jitter(0.2), jitter(0.12), jitter(0.08)];
        let mach_drop = jitter(0.6);
        let sweep_gain = jitter(0.1);
        let damping_gain = [jitter(0.15), jitter(0.1)];
        let stress_scale = jitter(1.0);
        let mach_load = jitter(0.1);
        let drag_weight = jitter(1.0);
        let dir = s.unit_direction(9);
        let mut bump_dir = [0.0; 9];
        bump_dir.copy_from_slice(&dir);
        let bump_phase = 2.0 * PI * s.uniform();
        let coeff = WingCoefficients {
            flutter_scale,
            stiffness_weights,
            mach_drop,
            sweep_gain,
            damping_gain,
            bump_amp: 0.03,
            bump_dir,
            bump_phase,
            stress_scale,
            mach_load,
            drag_weight,
        };
        let delta = Bounds {
            lower: vec![0.4, 0.4, 0.0, 0.0, 0.8e-5, 0.4],
            upper: vec![0.9, 0.9, 25.0, 0.001, 1.2e-5, 0.6],
        };
        let mut wing = Self {
            theta: Bounds {
                lower: vec![-1.0; 9],
                upper: vec![1.0; 9],
            },
            delta,
            coeff,
            feasible_probe_found: false,
        };
        wing.feasible_probe_found = wing.probe_feasibility(seed);
        wing
    }

    /// Whether construction found a feasible `(theta, delta)` probe.
    pub fn feasible_probe_found(&self) -> bool {
        self.feasible_probe_found
    }

    fn probe_feasibility(&self, seed: u64) -> bool {
        let mut s = SeededSampler::new(seed, 0x7072_6f62_65);
        let stiff = [0.0, 0.0, 0.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        (0..64).any(|_| {
            let d = s.uniform_in_box(&self.delta.lower, &self.delta.upper);
            self.succeeds(&stiff, &d)
        })
    }

    fn normalized(&self, delta: &[f64]) -> [f64; 6] {
        let mut x = [0.0; 6];
        for k in 0..6 {
            x[k] = (delta[k] - self.delta.lower[k]) / (self.delta.upper[k] - self.delta.lower[k]);
        }
        x
    }

    fn geometry(theta: &[f64]) -> Geometry {
        let root = 22.0 + 5.0 * theta[0];
        let tip = 14.5 + 5.0 * theta[1];
        let span = 30.0 + 5.0 * theta[2];
        let sweep = theta[3];
        let mut thick = [0.0; 5];
        for (i, t) in thick.iter_mut().enumerate() {
            *t = 1.0 + 0.75 * theta[4 + i];
        }
        Geometry {
            root,
            tip,
            span,
            sweep,
            thick,
        }
    }

    fn mass(g: &Geometry) -> f64 {
        // trapezoid over stations of chord * thickness, normalized to baseline
        let mut acc = 0.0;
        for i in 0..4 {
            let a = g.chord(WING_STATIONS[i]) * g.thick[i];
            let b = g.chord(WING_STATIONS[i + 1]) * g.thick[i + 1];
            acc += 0.5 * (a + b) * 0.25;
        }
        acc * g.span / (18.25 * 30.0)
    }

    fn drag(&self, g: &Geometry, x: &[f64; 6]) -> f64 {
        let area = g.span * 0.5 * (g.root + g.tip);
        let aspect = 2.0 * g.span * g.span / area;
        let cl = 0.4 + 0.2 * x[5];
        let nu = 0.8 + 0.4 * x[4];
        let t_mean = g.thick.iter().sum::<f64>() / 5.0;
        let cd0 = 0.008 * nu.powf(0.2) * (1.0 + 0.05 * t_mean) * (1.0 + 0.2 * (x[0] - 0.5).powi(2));
        cd0 + cl * cl / (PI * 0.85 * aspect)
    }

    fn flutter_pressure(&self, theta: &[f64], g: &Geometry, x: &[f64; 6]) -> f64 {
        let c = &self.coeff;
        let stiff: f64 = c
            .stiffness_weights
            .iter()
            .zip(&g.thick)
            .map(|(w, t)| w * t.powf(1.5))
            .sum::<f64>()
            / c.stiffness_weights.iter().sum::<f64>();
        let c_avg = 0.5 * (g.root + g.tip);
        let geom = (c_avg / 18.25).sqrt() * (30.0 / g.span).powi(2) * (1.0 - c.sweep_gain * g.sweep);
        let mach = 1.0 - c.mach_drop * x[1] * x[1];
        let damp = 1.0 + c.damping_gain[0] * x[2] + c.damping_gain[1] * x[3];
        let proj: f64 = c.bump_dir.iter().zip(theta).map(|(a, b)| a * b).sum();
        let bump = 1.0 + c.bump_amp * (3.0 * proj + c.bump_phase).sin();
        c.flutter_scale * stiff * geom * mach * damp * bump
    }

    fn stress_ks(&self, g: &Geometry, x: &[f64; 6]) -> f64 {
        let c = &self.coeff;
        let cl = 0.4 + 0.2 * x[5];
        let area = g.span * 0.5 * (g.root + g.tip);
        let load = (cl / 0.5) * (area / (30.0 * 18.25)) * (g.span / 30.0) * (1.0 + c.mach_load * x[0]);
        let stations: Vec<f64> = WING_STATIONS[..4]
            .iter()
            .zip(&g.thick)
            .map(|(&y, t)| {
                let moment = load * (1.0 - y).powi(2);
                let modulus = (g.chord(y) / 22.0) * t * t;
                c.stress_scale * moment / modulus / 1.05
            })
            .collect();
        let peak = stations.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        peak + (stations.iter().map(|s| (KS_RHO * (s - peak)).exp()).sum::<f64>()).ln() / KS_RHO
    }
}

struct Geometry {
    root: f64,
    tip: f64,
    span: f64,
    sweep: f64,
    thick: [f64; 5],
}

impl Geometry {
    fn chord(&self, y: f64) -> f64 {
        self.root + (self.tip - self.root) * y
    }
}

/// Builds the synthetic wing problem for `seed`.
pub fn wing_surrogate_problem(seed: u64) -> WingSurrogate {
    WingSurrogate::new(seed)
}

impl DesignProblem for WingSurrogate {
    fn name(&self) -> &str {
        "wing-surrogate"
    }
    fn n_theta(&self) -> usize {
        9
    }
    fn n_delta(&self) -> usize {
        6
    }
    fn n_requirements(&self) -> usize {
        2
    }
    fn theta_bounds(&self) -> &Bounds {
        &self.theta
    }
    fn delta_box(&self) -> &Bounds {
        &self.delta
    }
    fn objective(&self, theta: &[f64]) -> f64 {
        let center = self.delta.center();
        self.response(theta, &center).unwrap_or(f64::NAN)
    }
    fn requirements(&self, theta: &[f64], delta: &[f64], out: &mut [f64]) {
        let g = Self::geometry(theta);
        let x = self.normalized(delta);
        out[0] = 1.0 - self.flutter_pressure(theta, &g, &x) / 2.0;
        out[1] = self.stress_ks(&g, &x) - 1.0;
    }
    fn has_response(&self) -> bool {
        true
    }
    fn response(&self, theta: &[f64], delta: &[f64]) -> Option<f64> {
        let g = Self::geometry(theta);
        let x = self.normalized(delta);
        Some(Self::mass(&g) + self.coeff.drag_weight * self.drag(&g, &x) / 0.02)
    }
    fn is_synthetic(&self) -> bool {
        true
    }
}

/// Problems selectable by name in a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "name", deny_unknown_fields)]
pub enum ProblemSpec {
    IntervalCover {
        lo: f64,
        hi: f64,
        #[serde(default = "default_delta_lo")]
        delta_lo: f64,
        #[serde(default = "default_delta_hi")]
        delta_hi: f64,
    },
    Enclosure {
        #[serde(default = "default_half_width")]
        half_width: f64,
        #[serde(default = "default_mc_points")]
        mc_points: usize,
        #[serde(default)]
        seed: u64,
    },
    WingSurrogate {
        #[serde(default)]
        seed: u64,
    },
}

fn default_delta_lo() -> f64 {
    0.0
}
fn default_delta_hi() -> f64 {
    4.0
}
fn default_half_width() -> f64 {
    Enclosure::DEFAULT_HALF_WIDTH
}
fn default_mc_points() -> usize {
    Enclosure::DEFAULT_MC_POINTS
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Arc<dyn DesignProblem>> {
        Ok(match *self {
            ProblemSpec::IntervalCover {
                lo,
                hi,
                delta_lo,
                delta_hi,
            } => {
                if !(lo <= hi) || !(delta_lo <= delta_hi) {
                    return Err(Error::Config("interval-cover bounds are inverted".into()));
                }
                Arc::new(IntervalCover::with_delta_box(lo, hi, delta_lo, delta_hi))
            }
            ProblemSpec::Enclosure {
                half_width,
                mc_points,
                seed,
            } => {
                if !(half_width > 0.0) || mc_points == 0 {
                    return Err(Error::Config("enclosure needs half_width > 0 and mc_points >= 1".into()));
                }
                Arc::new(Enclosure::new(half_width, mc_points, seed))
            }
            ProblemSpec::WingSurrogate { seed } => {
                let w = WingSurrogate::new(seed);
                if !w.feasible_probe_found() {
                    return Err(Error::Config(format!("wing surrogate seed {seed} has no feasible probe")));
                }
                Arc::new(w)
            }
        })
    }

    pub fn n_delta(&self) -> usize {
        match self {
            ProblemSpec::IntervalCover { .. } => 1,
            ProblemSpec::Enclosure { .. } => 2,
            ProblemSpec::WingSurrogate { .. } => 6,
        }
    }
}

/// Geometric point-in-annulus test, independent of the requirement code.
pub fn in_enclosure_ring(design: &EnclosureDesign, delta: &[f64]) -> bool {
    let d1 = norm(&[delta[0] - design.c1[0], delta[1] - design.c1[1]]);
    let d2 = norm(&[delta[0] - design.c2[0], delta[1] - design.c2[1]]);
    d1 <= design.u1 && d2 >= design.u2
}
