//! Declarative experiment description, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{MonotoneGraph, SelectionPolicy};
use crate::mirror::{DensityField, Grid1D};
use crate::numerics::integrate;
use crate::particle::{Estimator, ParticleConfig, Scheme};
use crate::pde::SolverOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Pde,
    Route,
    Particle,
    Compare,
    Verify,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Identity,
    Power { m: f64 },
    StoppedLinear { u_c: f64 },
    Saturating,
    Jump { a: f64, lo: f64, hi: f64 },
    Table { points: Vec<(f64, f64)> },
}

impl GraphSpec {
    pub fn build(&self) -> Result<MonotoneGraph> {
        let g = match *self {
            GraphSpec::Identity => Ok(MonotoneGraph::identity()),
            GraphSpec::Power { m } => MonotoneGraph::power(m),
            GraphSpec::StoppedLinear { u_c } => MonotoneGraph::stopped_linear(u_c),
            GraphSpec::Saturating => Ok(MonotoneGraph::saturating()),
            GraphSpec::Jump { a, lo, hi } => MonotoneGraph::jump(a, lo, hi),
            GraphSpec::Table { ref points } => MonotoneGraph::from_table(points),
        };
        g.map_err(|e| Error::config("graph", e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Uniform density on `[a, b]`.
    Indicator { a: f64, b: f64 },
    /// Tent peaked at `center` with half-width `half_width`, cut at 0.
    Triangle { center: f64, half_width: f64 },
    /// Normal profile restricted to `[0, cut]`.
    TruncatedGaussian { mean: f64, sd: f64, cut: f64 },
    /// Piecewise-linear through `(x, value)` points, zero outside.
    Table { points: Vec<(f64, f64)> },
}

impl InitialSpec {
    /// Cell averages on `grid`, normalised to unit discrete mass.
    pub fn build(&self, grid: Grid1D) -> Result<DensityField> {
        let err = |m: &str| Error::config("initial", m.to_string());
        match *self {
            InitialSpec::Indicator { a, b } => {
                if !(0.0 <= a && a < b) {
                    return Err(err("indicator needs 0 <= a < b"));
                }
                let values = (0..grid.n)
                    .map(|i| {
                        let (x0, x1) = (i as f64 * grid.dx, (i + 1) as f64 * grid.dx);
                        (x1.min(b) - x0.max(a)).max(0.0) / ((b - a) * grid.dx)
                    })
                    .collect();
                DensityField::new(grid, values, 0.0)?.normalized()
            }
            InitialSpec::Triangle { center, half_width } => {
                if !(half_width > 0.0) {
                    return Err(err("triangle needs half_width > 0"));
                }
                averaged(
                    grid,
                    move |x| (1.0 - (x - center).abs() / half_width).max(0.0),
                    &[center - half_width, center, center + half_width],
                )
            }
            InitialSpec::TruncatedGaussian { mean, sd, cut } => {
                if !(sd > 0.0 && cut > 0.0) {
                    return Err(err("truncated_gaussian needs sd > 0 and cut > 0"));
                }
                averaged(
                    grid,
                    move |x| {
                        if x <= cut {
                            (-0.5 * ((x - mean) / sd).powi(2)).exp()
                        } else {
                            0.0
                        }
                    },
                    &[cut],
                )
            }
            InitialSpec::Table { ref points } => {
                if points.len() < 2 || points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(err("table needs at least two points with increasing x"));
                }
                if points.iter().any(|p| p.0 < 0.0 || p.1 < 0.0) {
                    return Err(err("table points must be non-negative"));
                }
                let pts = points.clone();
                let knots: Vec<f64> = pts.iter().map(|p| p.0).collect();
                averaged(
                    grid,
                    move |x| {
                        let k = pts.partition_point(|p| p.0 <= x);
                        if k == 0 || k == pts.len() {
                            return 0.0;
                        }
                        let (a, b) = (pts[k - 1], pts[k]);
                        a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
                    },
                    &knots,
                )
            }
        }
    }

    /// Right end of the support.
    pub fn support_end(&self) -> f64 {
        match *self {
            InitialSpec::Indicator { b, .. } => b,
            InitialSpec::Triangle { center, half_width } => center + half_width,
            InitialSpec::TruncatedGaussian { cut, .. } => cut,
            InitialSpec::Table { ref points } => points.last().map_or(0.0, |p| p.0),
        }
    }
}

/// Cell averages of `f`, splitting cells at the kinks of `f`.
fn averaged<F: Fn(f64) -> f64>(grid: Grid1D, f: F, kinks: &[f64]) -> Result<DensityField> {
    let values = (0..grid.n)
        .map(|i| {
            let (x0, x1) = (i as f64 * grid.dx, (i + 1) as f64 * grid.dx);
            let mut cuts = vec![x0];
            cuts.extend(kinks.iter().copied().filter(|&k| k > x0 && k < x1));
            cuts.push(x1);
            cuts.windows(2)
                .map(|w| integrate(&f, w[0], w[1], 1))
                .sum::<f64>()
                / grid.dx
        })
        .collect();
    DensityField::new(grid, values, 0.0)?
        .normalized()
        .map_err(|e| Error::config("initial", e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    pub x_max: f64,
    pub dx: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBlock {
    pub t_final: f64,
    pub dt: f64,
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticleBlock {
    pub n: usize,
    pub dt: f64,
    /// Schemes to run; the first drives the comparison with the PDE.
    pub schemes: Vec<Scheme>,
    pub estimator: Estimator,
    pub bin_width: f64,
    pub k_sync: usize,
    pub seed: Option<u64>,
    pub policy: SelectionPolicy,
    pub symmetrize: bool,
    pub local_time_eps: Option<f64>,
    pub start_at_origin: bool,
}

impl Default for ParticleBlock {
    fn default() -> Self {
        let p = ParticleConfig::default();
        ParticleBlock {
            n: p.n,
            dt: p.dt,
            schemes: vec![Scheme::DirectReflect],
            estimator: p.estimator,
            bin_width: p.bin_width,
            k_sync: p.k_sync,
            seed: None,
            policy: p.policy,
            symmetrize: p.symmetrize,
            local_time_eps: None,
            start_at_origin: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerificationBlock {
    /// How many members of the standard family to use (at most 12).
    pub family_size: usize,
    pub cutoff_ladder: Vec<f64>,
    /// Rerun with `dx/2, dt/2` to measure the residual reduction.
    pub refine: bool,
}

impl Default for VerificationBlock {
    fn default() -> Self {
        VerificationBlock {
            family_size: 12,
            cutoff_ladder: vec![0.2, 0.1, 0.05],
            refine: true,
        }
    }
}

/// Declared tolerances; each is tied to a named acceptance rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub oracle_l1: f64,
    pub route_gap: f64,
    pub mass: f64,
    pub positivity: f64,
    pub asymmetry: f64,
    pub residual: f64,
    pub refinement_ratio: f64,
    pub particle_l1: f64,
    pub particle_l1_degenerate: f64,
    pub scheme_l1: f64,
    pub local_time_rel: f64,
    pub local_time_ratio: (f64, f64),
    pub complementarity_factor: f64,
    pub plateau_change: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            oracle_l1: 1e-2,
            route_gap: 1e-6,
            mass: 1e-10,
            positivity: 1e-10,
            asymmetry: 1e-12,
            residual: 5e-2,
            refinement_ratio: 1.5,
            particle_l1: 0.05,
            particle_l1_degenerate: 0.08,
            scheme_l1: 0.05,
            local_time_rel: 0.10,
            local_time_ratio: (0.45, 0.55),
            complementarity_factor: 5.0,
            plateau_change: 1e-12,
        }
    }
}

/// A one-parameter sweep; `parameter` is a dotted path into the config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_pipelines")]
    pub pipelines: Vec<Pipeline>,
    #[serde(default)]
    pub seed: u64,
    pub graph: GraphSpec,
    pub initial: InitialSpec,
    pub domain: DomainBlock,
    pub time: TimeBlock,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub particle: ParticleBlock,
    #[serde(default)]
    pub verification: VerificationBlock,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    /// Run even when the structural assumptions on `β` fail to verify.
    #[serde(default)]
    pub override_assumptions: bool,
}

fn default_pipelines() -> Vec<Pipeline> {
    vec![Pipeline::Pde]
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        positive("domain.dx", self.domain.dx)?;
        positive("domain.x_max", self.domain.x_max)?;
        if self.domain.dx > self.domain.x_max {
            return Err(Error::config("domain.dx", "larger than domain.x_max"));
        }
        positive("time.t_final", self.time.t_final)?;
        positive("time.dt", self.time.dt)?;
        if let Some(t) = self
            .time
            .snapshots
            .iter()
            .find(|t| !(0.0..=self.time.t_final).contains(*t))
        {
            return Err(Error::config(
                "time.snapshots",
                format!("{t} outside [0, T]"),
            ));
        }
        positive("solver.tol", self.solver.tol)?;
        let p = &self.particle;
        if p.n == 0 {
            return Err(Error::config("particle.n", "must be at least 1"));
        }
        positive("particle.dt", p.dt)?;
        positive("particle.bin_width", p.bin_width)?;
        if p.k_sync == 0 {
            return Err(Error::config("particle.k_sync", "must be at least 1"));
        }
        if let Estimator::GaussianKde { bandwidth } = p.estimator {
            positive("particle.estimator.bandwidth", bandwidth)?;
        }
        if let Some(eps) = p.local_time_eps {
            positive("particle.local_time_eps", eps)?;
        }
        if p.schemes.is_empty() {
            return Err(Error::config(
                "particle.schemes",
                "needs at least one scheme",
            ));
        }
        let v = &self.verification;
        if v.family_size == 0 || v.family_size > 12 {
            return Err(Error::config(
                "verification.family_size",
                "must be in 1..=12",
            ));
        }
        for &e in &v.cutoff_ladder {
            positive("verification.cutoff_ladder", e)?;
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::config("sweep.values", "empty sweep"));
            }
            self.with_override(&s.parameter, s.values[0])?;
        }
        self.graph.build()?;
        self.initial.build(self.half_grid()?)?;
        Ok(())
    }

    pub fn half_grid(&self) -> Result<Grid1D> {
        Grid1D::half_line(self.domain.dx, self.domain.x_max)
            .map_err(|e| Error::config("domain", e.to_string()))
    }

    /// Snapshot times, always including `T`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut t = self.time.snapshots.clone();
        t.push(self.time.t_final);
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    pub fn particle_config(&self, scheme: Scheme, seed: u64) -> ParticleConfig {
        let p = &self.particle;
        ParticleConfig {
            n: p.n,
            dt: p.dt,
            t_final: self.time.t_final,
            scheme,
            estimator: p.estimator,
            bin_width: p.bin_width,
            extent: self.domain.x_max,
            k_sync: p.k_sync,
            seed,
            policy: p.policy,
            symmetrize: p.symmetrize,
            local_time_eps: p.local_time_eps,
            snapshot_times: self.snapshot_times(),
            start_at_origin: p.start_at_origin,
        }
    }

    /// Copy with one numeric field replaced, addressed by its dotted path.
    pub fn with_override(&self, path: &str, value: f64) -> Result<Self> {
        let mut c = self.clone();
        let as_count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::config(
                    path,
                    format!("{value} is not a positive integer"),
                ))
            }
        };
        match path {
            "domain.dx" => c.domain.dx = value,
            "domain.x_max" => c.domain.x_max = value,
            "time.dt" => c.time.dt = value,
            "time.t_final" => c.time.t_final = value,
            "particle.n" => c.particle.n = as_count()?,
            "particle.dt" => c.particle.dt = value,
            "particle.k_sync" => c.particle.k_sync = as_count()?,
            "particle.bin_width" => c.particle.bin_width = value,
            "particle.bandwidth" => {
                c.particle.estimator = Estimator::GaussianKde { bandwidth: value }
            }
            "particle.local_time_eps" => c.particle.local_time_eps = Some(value),
            "seed" => c.seed = value as u64,
            _ => {
                return Err(Error::config(
                    "sweep.parameter",
                    format!("unknown parameter `{path}`"),
                ))
            }
        }
        Ok(c)
    }
}
