//! Scenario datasets, perturbation models and seeded sampling.
//!
//! A [`MultiPointDataset`] stores, for every nominal scenario, a cloud of
//! displacements at unit radius. The physical points are
//! `nominal + radius * offset`, where the radius comes from a
//! [`RadiusRule`]. Keeping the radius separate lets the design-dependent
//! rule `r_max * exp(-(max_k r_k)^2)` be re-evaluated at every design
//! without resampling.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::DesignProblem;

/// One realization of the uncertain parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Scenario(pub Vec<f64>);

impl Scenario {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(component) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                component,
                value: coords[component],
            });
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl From<Vec<f64>> for Scenario {
    fn from(v: Vec<f64>) -> Self {
        Scenario(v)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Deterministic, platform-independent random source.
///
/// ChaCha8 keyed by `seed`, with `stream` selecting an independent
/// keystream. No global RNG is ever used by the toolkit.
#[derive(Debug, Clone)]
pub struct SeededSampler {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl SeededSampler {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// An independent sampler for work item `index`, derived only from
    /// this sampler's identity (not its position), so parallel work items
    /// see the same numbers regardless of scheduling.
    pub fn fork(&self, index: u64) -> SeededSampler {
        SeededSampler::new(splitmix64(self.seed ^ splitmix64(self.stream)), index)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform_in_box(&mut self, lower: &[f64], upper: &[f64]) -> Vec<f64> {
        lower
            .iter()
            .zip(upper)
            .map(|(&lo, &hi)| self.uniform_range(lo, hi))
            .collect()
    }

    /// Uniformly distributed unit vector in `dim` dimensions.
    pub fn unit_direction(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| self.standard_normal()).collect();
            let n = norm(&v);
            if n > 1e-12 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }

    /// Uniform point in the unit ball.
    pub fn in_unit_ball(&mut self, dim: usize) -> Vec<f64> {
        let dir = self.unit_direction(dim);
        let r = self.uniform().powf(1.0 / dim as f64);
        dir.into_iter().map(|x| x * r).collect()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Where the perturbed points lie relative to the perturbation ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PerturbationKind {
    /// On the sphere of radius `mu`.
    BallSurface,
    /// Uniform in the ball of radius `mu`.
    BallVolume,
    /// Drawn from a distribution supported on the ball.
    Distribution { family: DistributionFamily },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum DistributionFamily {
    UniformInBall,
    /// Isotropic gaussian with standard deviation `scale * mu`, rejected
    /// outside the ball.
    GaussianTruncatedToBall { scale: f64 },
}

impl PerturbationKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "ball-surface" => Ok(Self::BallSurface),
            "ball-volume" => Ok(Self::BallVolume),
            "uniform-in-ball" => Ok(Self::Distribution {
                family: DistributionFamily::UniformInBall,
            }),
            "gaussian-truncated-to-ball" => Ok(Self::Distribution {
                family: DistributionFamily::GaussianTruncatedToBall { scale: 0.5 },
            }),
            other => Err(Error::Config(format!("unknown perturbation model kind '{other}'"))),
        }
    }
}

/// Rule assigning a perturbation radius to each nominal scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", deny_unknown_fields)]
pub enum RadiusRule {
    Constant { radius: f64 },
    /// `factor * ||delta||`.
    ProportionalToOrigin { factor: f64 },
    /// `r_max * exp(-(max_k r_k(theta, delta))^2)`; larger near the
    /// failure boundary of the design.
    Adversarial { r_max: f64 },
}

impl RadiusRule {
    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            RadiusRule::Constant { radius } => radius,
            RadiusRule::ProportionalToOrigin { factor } => factor,
            RadiusRule::Adversarial { r_max } => r_max,
        };
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Config(format!("radius rule parameter must be >= 0, got {v}")));
        }
        Ok(())
    }

    pub fn depends_on_design(&self) -> bool {
        matches!(self, RadiusRule::Adversarial { .. })
    }

    /// Radius at `delta`. The adversarial rule needs the design context.
    pub fn radius(
        &self,
        delta: &[f64],
        design: Option<(&dyn DesignProblem, &[f64])>,
    ) -> Result<f64> {
        match *self {
            RadiusRule::Constant { radius } => Ok(radius),
            RadiusRule::ProportionalToOrigin { factor } => Ok(factor * norm(delta)),
            RadiusRule::Adversarial { r_max } => {
                let (problem, theta) = design.ok_or_else(|| {
                    Error::Config("adversarial radius rule requires a design".into())
                })?;
                adversarial_radius(delta, theta, problem, r_max)
            }
        }
    }
}

/// Perturbation radius `r_max * exp(-(max_k r_k(theta, delta))^2)`.
pub fn adversarial_radius(
    delta: &[f64],
    theta: &[f64],
    problem: &dyn DesignProblem,
    r_max: f64,
) -> Result<f64> {
    if !(r_max > 0.0) {
        return Err(Error::Config(format!("r_max must be > 0, got {r_max}")));
    }
    let worst = problem.max_requirement(theta, delta);
    if !worst.is_finite() {
        return Err(Error::NonFinite {
            component: 0,
            value: worst,
        });
    }
    Ok(r_max * (-(worst * worst)).exp())
}

/// Full description of how perturbed points are generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationModel {
    #[serde(flatten)]
    pub kind: PerturbationKind,
    pub radius: RadiusRule,
}

impl PerturbationModel {
    pub fn new(kind: PerturbationKind, radius: RadiusRule) -> Self {
        Self { kind, radius }
    }

    /// Zero-radius model: every point coincides with its nominal.
    pub fn nominal() -> Self {
        Self::new(PerturbationKind::BallVolume, RadiusRule::Constant { radius: 0.0 })
    }

    /// `m` displacements at unit radius for one scenario.
    pub fn unit_offsets(&self, dim: usize, m: usize, sampler: &mut SeededSampler) -> Vec<Vec<f64>> {
        match self.kind {
            PerturbationKind::BallSurface if dim == 2 => (0..m)
                .map(|j| {
                    let a = 2.0 * PI * j as f64 / m as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect(),
            PerturbationKind::BallSurface => (0..m).map(|_| sampler.unit_direction(dim)).collect(),
            PerturbationKind::BallVolume
            | PerturbationKind::Distribution {
                family: DistributionFamily::UniformInBall,
            } => (0..m).map(|_| sampler.in_unit_ball(dim)).collect(),
            PerturbationKind::Distribution {
                family: DistributionFamily::GaussianTruncatedToBall { scale },
            } => (0..m)
                .map(|_| loop {
                    let v: Vec<f64> = (0..dim).map(|_| scale * sampler.standard_normal()).collect();
                    if norm(&v) <= 1.0 {
                        break v;
                    }
                })
                .collect(),
        }
    }
}

/// How a dataset came to be. Augmented datasets are not IID draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "source")]
pub enum Provenance {
    Nominal,
    Perturbed {
        model: PerturbationModel,
        m: usize,
        seed: u64,
        stream: u64,
    },
    Adversarial {
        perturbed: usize,
    },
    Explicit,
}

/// Radii of the perturbation balls.
#[derive(Debug, Clone, PartialEq)]
pub enum Radii {
    Fixed(Vec<f64>),
    /// Re-evaluated at every design.
    Adversarial { r_max: f64 },
}

/// Nominal scenarios together with their perturbed point clouds.
#[derive(Debug, Clone)]
pub struct MultiPointDataset {
    nominal: Vec<Scenario>,
    offsets: Vec<Vec<Vec<f64>>>,
    radii: Radii,
    provenance: Provenance,
    iid: bool,
}

impl MultiPointDataset {
    /// One point per scenario, equal to the nominal.
    pub fn nominal_only(scenarios: Vec<Scenario>) -> Self {
        let n = scenarios.len();
        let offsets = scenarios.iter().map(|s| vec![vec![0.0; s.dim()]]).collect();
        Self {
            nominal: scenarios,
            offsets,
            radii: Radii::Fixed(vec![0.0; n]),
            provenance: Provenance::Nominal,
            iid: true,
        }
    }

    /// Explicit point groups. Every group must be non-empty and match the
    /// dimension of its nominal.
    pub fn from_groups(
        nominal: Vec<Scenario>,
        groups: Vec<Vec<Vec<f64>>>,
        provenance: Provenance,
    ) -> Result<Self> {
        if nominal.len() != groups.len() {
            return Err(Error::Dimension {
                what: "point groups".into(),
                expected: nominal.len(),
                found: groups.len(),
            });
        }
        let mut offsets = Vec::with_capacity(groups.len());
        for (s, g) in nominal.iter().zip(groups) {
            if g.is_empty() {
                return Err(Error::InvalidInput("every scenario needs at least one point".into()));
            }
            let mut off = Vec::with_capacity(g.len());
            for p in g {
                if p.len() != s.dim() {
                    return Err(Error::Dimension {
                        what: "perturbed point".into(),
                        expected: s.dim(),
                        found: p.len(),
                    });
                }
                off.push(p.iter().zip(s.coords()).map(|(a, b)| a - b).collect());
            }
            offsets.push(off);
        }
        let n = nominal.len();
        let iid = matches!(provenance, Provenance::Nominal | Provenance::Perturbed { .. });
        Ok(Self {
            nominal,
            offsets,
            radii: Radii::Fixed(vec![1.0; n]),
            provenance,
            iid,
        })
    }

    pub fn len(&self) -> usize {
        self.nominal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nominal.is_empty()
    }

    pub fn nominal(&self) -> &[Scenario] {
        &self.nominal
    }

    pub fn points_in(&self, i: usize) -> usize {
        self.offsets[i].len()
    }

    /// `m` when every scenario has the same number of points.
    pub fn uniform_m(&self) -> Option<usize> {
        let m = self.offsets.first()?.len();
        self.offsets.iter().all(|o| o.len() == m).then_some(m)
    }

    pub fn max_points(&self) -> usize {
        self.offsets.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn total_points(&self) -> usize {
        self.offsets.iter().map(Vec::len).sum()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn radii(&self) -> &Radii {
        &self.radii
    }

    /// False once the dataset has been augmented with selected points.
    pub fn is_iid(&self) -> bool {
        self.iid
    }

    pub fn depends_on_design(&self) -> bool {
        matches!(self.radii, Radii::Adversarial { .. })
    }

    /// Radius of scenario `i` at design `theta`.
    pub fn radius(&self, i: usize, problem: &dyn DesignProblem, theta: &[f64]) -> f64 {
        match &self.radii {
            Radii::Fixed(r) => r[i],
            Radii::Adversarial { r_max } => {
                let w = problem.max_requirement(theta, self.nominal[i].coords());
                r_max * (-(w * w)).exp()
            }
        }
    }

    /// Writes point `j` of scenario `i` for a given radius into `buf`.
    #[inline]
    pub fn point_into(&self, i: usize, j: usize, radius: f64, buf: &mut [f64]) {
        let base = self.nominal[i].coords();
        let off = &self.offsets[i][j];
        for ((b, &c), &o) in buf.iter_mut().zip(base).zip(off) {
            *b = c + radius * o;
        }
    }

    /// All points of scenario `i` at design `theta`.
    pub fn points(&self, i: usize, problem: &dyn DesignProblem, theta: &[f64]) -> Vec<Vec<f64>> {
        let r = self.radius(i, problem, theta);
        let dim = self.nominal[i].dim();
        (0..self.points_in(i))
            .map(|j| {
                let mut p = vec![0.0; dim];
                self.point_into(i, j, r, &mut p);
                p
            })
            .collect()
    }

    /// Points of scenario `i` for datasets whose radii do not depend on
    /// the design.
    pub fn fixed_points(&self, i: usize) -> Option<Vec<Vec<f64>>> {
        let Radii::Fixed(r) = &self.radii else {
            return None;
        };
        let dim = self.nominal[i].dim();
        Some(
            (0..self.points_in(i))
                .map(|j| {
                    let mut p = vec![0.0; dim];
                    self.point_into(i, j, r[i], &mut p);
                    p
                })
                .collect(),
        )
    }

    /// Subset of scenarios, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let radii = match &self.radii {
            Radii::Fixed(r) => Radii::Fixed(indices.iter().map(|&i| r[i]).collect()),
            other => other.clone(),
        };
        Self {
            nominal: indices.iter().map(|&i| self.nominal[i].clone()).collect(),
            offsets: indices.iter().map(|&i| self.offsets[i].clone()).collect(),
            radii,
            provenance: self.provenance.clone(),
            iid: self.iid,
        }
    }

    /// Appends nominal-only scenarios chosen from outside the IID draw.
    /// The result is flagged non-IID.
    pub fn augment(&mut self, extra: &[Scenario]) -> Result<()> {
        let Radii::Fixed(r) = &mut self.radii else {
            return Err(Error::Config(
                "cannot augment a dataset with design-dependent radii".into(),
            ));
        };
        for s in extra {
            r.push(0.0);
            self.offsets.push(vec![vec![0.0; s.dim()]]);
            self.nominal.push(s.clone());
        }
        if !extra.is_empty() {
            self.iid = false;
        }
        Ok(())
    }
}

/// Expands nominal scenarios into `m`-point clouds under `model`.
///
/// The adversarial radius rule leaves the radii design-dependent; the
/// unit offsets are drawn here once and scaled at evaluation time.
pub fn expand(
    scenarios: &[Scenario],
    model: &PerturbationModel,
    m: usize,
    sampler: &SeededSampler,
) -> Result<MultiPointDataset> {
    if m == 0 {
        return Err(Error::Config("m must be at least 1".into()));
    }
    model.radius.validate()?;
    let mut offsets = Vec::with_capacity(scenarios.len());
    for (i, s) in scenarios.iter().enumerate() {
        let mut local = sampler.fork(i as u64);
        offsets.push(model.unit_offsets(s.dim(), m, &mut local));
    }
    let radii = match model.radius {
        RadiusRule::Adversarial { r_max } => Radii::Adversarial { r_max },
        rule => Radii::Fixed(
            scenarios
                .iter()
                .map(|s| rule.radius(s.coords(), None))
                .collect::<Result<_>>()?,
        ),
    };
    Ok(MultiPointDataset {
        nominal: scenarios.to_vec(),
        offsets,
        radii,
        provenance: Provenance::Perturbed {
            model: *model,
            m,
            seed: sampler.seed(),
            stream: sampler.stream(),
        },
        iid: true,
    })
}

/// Reads scenarios from a CSV file whose header names `n_delta` columns.
pub fn load_csv(path: impl AsRef<Path>, n_delta: usize) -> Result<Vec<Scenario>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, path, n_delta)
}

pub(crate) fn read_csv<R: std::io::Read>(reader: R, path: &Path, n_delta: usize) -> Result<Vec<Scenario>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.len() != n_delta {
        return Err(parse_err(
            1,
            format!("header names {} columns, expected {n_delta}", headers.len()),
        ));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != n_delta {
            return Err(parse_err(
                line,
                format!("row has {} fields, expected {n_delta}", record.len()),
            ));
        }
        let coords = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("'{f}' is not a finite number")))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(Scenario(coords));
    }
    Ok(out)
}

/// Writes scenarios to CSV with columns `d1..dn`.
pub fn write_csv(path: impl AsRef<Path>, scenarios: &[Scenario]) -> Result<()> {
    let path = path.as_ref();
    let dim = scenarios.first().map_or(0, Scenario::dim);
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record((1..=dim).map(|k| format!("d{k}")))?;
        for s in scenarios {
            w.write_record(s.coords().iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    crate::cli::write_atomic(path, &buf)
}

/// Seeded IID draws uniform in a box.
pub fn sample_box(lower: &[f64], upper: &[f64], n: usize, sampler: &mut SeededSampler) -> Vec<Scenario> {
    (0..n).map(|_| Scenario(sampler.uniform_in_box(lower, upper))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::IntervalCover;

    #[test]
    fn csv_parses_rows() {
        let data = "a,b\n1,2\n3,4\n";
        let s = read_csv(data.as_bytes(), Path::new("mem.csv"), 2).unwrap();
        assert_eq!(s, vec![Scenario(vec![1.0, 2.0]), Scenario(vec![3.0, 4.0])]);
    }

    #[test]
    fn csv_empty_data_section() {
        let s = read_csv("a,b\n".as_bytes(), Path::new("mem.csv"), 2).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn csv_bad_value_reports_line() {
        let err = read_csv("a,b\n1,abc\n".as_bytes(), Path::new("mem.csv"), 2).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_wrong_arity_reports_line() {
        let err = read_csv("a,b\n1,2\n3\n".as_bytes(), Path::new("mem.csv"), 2).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = read_csv("a\n1\n".as_bytes(), Path::new("mem.csv"), 2).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn unknown_kind_is_config_error() {
        assert!(matches!(PerturbationKind::parse("cube"), Err(Error::Config(_))));
        assert_eq!(PerturbationKind::parse("ball-surface").unwrap(), PerturbationKind::BallSurface);
    }

    #[test]
    fn expand_shapes_and_surface_radius() {
        let mut s = SeededSampler::new(7, 0);
        let scen: Vec<Scenario> = (0..15)
            .map(|_| Scenario(vec![s.uniform_range(-3.0, 3.0), s.uniform_range(-3.0, 3.0)]))
            .collect();
        let model = PerturbationModel::new(
            PerturbationKind::BallSurface,
            RadiusRule::ProportionalToOrigin { factor: 0.1 },
        );
        let d = expand(&scen, &model, 81, &SeededSampler::new(1, 0)).unwrap();
        assert_eq!(d.len(), 15);
        assert_eq!(d.uniform_m(), Some(81));
        for i in 0..15 {
            let mu = 0.1 * scen[i].norm();
            for p in d.fixed_points(i).unwrap() {
                let dist = norm(&[p[0] - scen[i].0[0], p[1] - scen[i].0[1]]);
                assert!((dist - mu).abs() <= 1e-12 * mu.max(1.0));
            }
        }
    }

    #[test]
    fn expand_origin_surface_has_norm_two() {
        let model = PerturbationModel::new(PerturbationKind::BallSurface, RadiusRule::Constant { radius: 2.0 });
        for m in [1, 5, 81] {
            let d = expand(&[Scenario(vec![0.0, 0.0])], &model, m, &SeededSampler::new(3, 0)).unwrap();
            for p in d.fixed_points(0).unwrap() {
                assert!((norm(&p) - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn expand_zero_radius_reproduces_nominals() {
        let scen = vec![Scenario(vec![1.5, -2.0]), Scenario(vec![0.0, 3.0])];
        let d = expand(&scen, &PerturbationModel::nominal(), 1, &SeededSampler::new(0, 0)).unwrap();
        for i in 0..2 {
            assert_eq!(d.fixed_points(i).unwrap(), vec![scen[i].0.clone()]);
        }
    }

    #[test]
    fn expand_rejects_zero_m() {
        let r = expand(&[Scenario(vec![0.0])], &PerturbationModel::nominal(), 0, &SeededSampler::new(0, 0));
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn expansion_is_reproducible() {
        let scen: Vec<Scenario> = (0..5).map(|i| Scenario(vec![i as f64, 1.0, -1.0])).collect();
        let model = PerturbationModel::new(PerturbationKind::BallVolume, RadiusRule::Constant { radius: 0.3 });
        let a = expand(&scen, &model, 20, &SeededSampler::new(11, 2)).unwrap();
        let b = expand(&scen, &model, 20, &SeededSampler::new(11, 2)).unwrap();
        let c = expand(&scen, &model, 20, &SeededSampler::new(11, 3)).unwrap();
        for i in 0..5 {
            assert_eq!(a.fixed_points(i), b.fixed_points(i));
            assert_ne!(a.fixed_points(i), c.fixed_points(i));
        }
    }

    #[test]
    fn ball_volume_mean_converges_to_nominal() {
        let mu = 1.5;
        let m = 400;
        let scen = vec![Scenario(vec![2.0, -1.0, 0.5])];
        let model = PerturbationModel::new(PerturbationKind::BallVolume, RadiusRule::Constant { radius: mu });
        for seed in 0..10 {
            let d = expand(&scen, &model, m, &SeededSampler::new(seed, 0)).unwrap();
            let pts = d.fixed_points(0).unwrap();
            let mut mean = [0.0; 3];
            for p in &pts {
                assert!(norm(&[p[0] - 2.0, p[1] + 1.0, p[2] - 0.5]) <= mu + 1e-12);
                for k in 0..3 {
                    mean[k] += p[k] / m as f64;
                }
            }
            let dev = norm(&[mean[0] - 2.0, mean[1] + 1.0, mean[2] - 0.5]);
            assert!(dev <= 3.0 * mu / (m as f64).sqrt(), "seed {seed}: {dev}");
        }
    }

    #[test]
    fn truncated_gaussian_stays_in_ball() {
        let model = PerturbationModel::new(
            PerturbationKind::parse("gaussian-truncated-to-ball").unwrap(),
            RadiusRule::Constant { radius: 0.7 },
        );
        let d = expand(&[Scenario(vec![0.0, 0.0])], &model, 200, &SeededSampler::new(5, 0)).unwrap();
        assert!(d.fixed_points(0).unwrap().iter().all(|p| norm(p) <= 0.7 + 1e-12));
    }

    #[test]
    fn adversarial_radius_values() {
        // interval cover: r(theta, delta) = delta - theta
        let p = IntervalCover::new(-10.0, 10.0);
        assert_eq!(adversarial_radius(&[2.0], &[2.0], &p, 1.5).unwrap(), 1.5);
        let a = adversarial_radius(&[3.0], &[2.0], &p, 1.0).unwrap();
        let b = adversarial_radius(&[1.0], &[2.0], &p, 1.0).unwrap();
        assert!((a - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(a, b);
        assert!(adversarial_radius(&[1.0], &[2.0], &p, 0.0).is_err());
        // closer to the boundary means a larger radius
        let near = adversarial_radius(&[1.9], &[2.0], &p, 1.0).unwrap();
        let far = adversarial_radius(&[0.5], &[2.0], &p, 1.0).unwrap();
        assert!(near > far);
    }

    #[test]
    fn augment_marks_non_iid() {
        let mut d = MultiPointDataset::nominal_only(vec![Scenario(vec![1.0])]);
        assert!(d.is_iid());
        d.augment(&[Scenario(vec![2.0])]).unwrap();
        assert_eq!(d.len(), 2);
        assert!(!d.is_iid());
    }
}
