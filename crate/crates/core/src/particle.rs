//! Interacting particle approximation of the reflected nonlinear diffusion
//! `dX = Φ(v(t, X)) dB + dK` on the half-line, where `v(t, ·)` is the law
//! density of `X_t`.
//!
//! Two schemes are provided. The fold scheme simulates the whole-line
//! process `dY = Φ̄(ū(t, Y)) dB` with `ū` the law density of `Y` and reports
//! `X = |Y|`. The direct scheme reflects `X` itself at 0 by the mirror map
//! `X ← |X + increment|`, recording the pushing `ΔK = |p| - p`.
//!
//! Densities entering the coefficient are estimated from the ensemble on a
//! histogram grid; every draw comes from a counter-based stream keyed by
//! `(seed, particle, step)`, so results do not depend on thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    make_selection, phi_from_beta, MonotoneGraph, PhiGraph, Selection, SelectionPolicy, MASS_TOL,
};
use crate::mirror::{extend_phi, DensityField, Grid1D, GridKind};
use crate::numerics::normal_cdf;
use crate::rng::{NoiseStream, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    WholelineFold,
    DirectReflect,
}

#[derive(Clone, Debug)]
pub struct ParticleEnsemble {
    pub positions: Vec<f64>,
    pub scheme: Scheme,
    pub time: f64,
    pub step: u64,
    pub stream: NoiseStream,
    /// Accumulated reflection per particle (direct scheme only).
    pub k: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// All particles at the origin.
    pub fn at_origin(n: usize, seed: u64, scheme: Scheme) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("ensemble needs at least one particle".into()));
        }
        Ok(Self::from_positions(vec![0.0; n], seed, scheme))
    }

    pub fn from_positions(positions: Vec<f64>, seed: u64, scheme: Scheme) -> Self {
        let n = positions.len();
        ParticleEnsemble {
            positions,
            scheme,
            time: 0.0,
            step: 0,
            stream: NoiseStream::new(seed),
            k: if scheme == Scheme::DirectReflect {
                vec![0.0; n]
            } else {
                Vec::new()
            },
        }
    }

    /// Negated positions driven by the negated noise.
    pub fn mirrored(&self) -> Self {
        ParticleEnsemble {
            positions: self.positions.iter().map(|x| -x).collect(),
            stream: self.stream.mirrored(),
            ..self.clone()
        }
    }
}

/// Inverse-CDF sampling from a half-line density, linear within cells. The
/// fold scheme flips each sign with probability ½, which samples
/// `ū₀(x) = ½ u₀(|x|)`.
pub fn sample_initial(
    u0: &DensityField,
    n: usize,
    seed: u64,
    scheme: Scheme,
) -> Result<ParticleEnsemble> {
    if n == 0 {
        return Err(Error::Domain("ensemble needs at least one particle".into()));
    }
    if u0.grid().kind != GridKind::HalfLine {
        return Err(Error::Domain(
            "initial density must live on the half-line".into(),
        ));
    }
    if (u0.mass() - 1.0).abs() > MASS_TOL {
        return Err(Error::Validation(format!(
            "initial mass {} is not 1",
            u0.mass()
        )));
    }
    let dx = u0.grid().dx;
    let mut cdf = Vec::with_capacity(u0.values().len());
    let mut acc = 0.0;
    for v in u0.values() {
        acc += v.max(0.0) * dx;
        cdf.push(acc);
    }
    let total = acc;
    let stream = NoiseStream::new(seed);
    let positions = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let target = stream.uniform(i, Purpose::InitialPosition) * total;
            let c = cdf.partition_point(|&c| c < target).min(cdf.len() - 1);
            let below = if c == 0 { 0.0 } else { cdf[c - 1] };
            let width = cdf[c] - below;
            let frac = if width > 0.0 {
                ((target - below) / width).clamp(0.0, 1.0)
            } else {
                0.5
            };
            let x = (c as f64 + frac) * dx;
            if scheme == Scheme::WholelineFold && stream.uniform(i, Purpose::InitialSign) < 0.5 {
                -x
            } else {
                x
            }
        })
        .collect();
    Ok(ParticleEnsemble::from_positions(positions, seed, scheme))
}

/// `X = |Y|`.
pub fn fold(ens: &ParticleEnsemble) -> ParticleEnsemble {
    ParticleEnsemble {
        positions: ens.positions.iter().map(|y| y.abs()).collect(),
        ..ens.clone()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    Histogram,
    GaussianKde {
        bandwidth: f64,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityEstimate {
    pub method: Estimator,
    pub symmetrized: bool,
    pub field: DensityField,
    /// Particles outside the grid, counted into the edge cells.
    pub overflow: usize,
}

/// Cell of `x`, clamped into the grid; whole-line grids are indexed through
/// `|x|` so that `x` and `-x` land in mirror cells exactly.
#[inline]
fn cell_of(grid: &Grid1D, x: f64) -> (usize, bool) {
    match grid.kind {
        GridKind::HalfLine => {
            let k = (x.max(0.0) / grid.dx).floor();
            let inside = x >= 0.0 && (k as usize) < grid.n;
            ((k as usize).min(grid.n - 1), inside)
        }
        GridKind::SymmetricWholeLine => {
            let m = grid.n / 2;
            let k = (x.abs() / grid.dx).floor();
            let inside = (k as usize) < m;
            let k = (k as usize).min(m - 1);
            (if x >= 0.0 { m + k } else { m - 1 - k }, inside)
        }
    }
}

pub fn estimate_density(
    ens: &ParticleEnsemble,
    grid: &Grid1D,
    method: Estimator,
    symmetrize: bool,
) -> Result<DensityEstimate> {
    if symmetrize && grid.kind != GridKind::SymmetricWholeLine {
        return Err(Error::Domain(
            "symmetrization needs a whole-line grid".into(),
        ));
    }
    if let Estimator::GaussianKde { bandwidth } = method {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Domain(format!(
                "bandwidth {bandwidth} must be positive"
            )));
        }
    }
    let n = ens.positions.len();
    let mut counts = vec![0.0f64; grid.n];
    let mut overflow = 0;
    for &x in &ens.positions {
        let (c, inside) = cell_of(grid, x);
        counts[c] += 1.0;
        overflow += !inside as usize;
    }
    let norm = 1.0 / (n as f64 * grid.dx);
    let mut values: Vec<f64> = counts.iter().map(|c| c * norm).collect();
    if let Estimator::GaussianKde { bandwidth } = method {
        values = kde_smooth(&values, grid, bandwidth);
    }
    if symmetrize {
        let m = grid.n;
        for i in m / 2..m {
            let j = m - 1 - i;
            let avg = 0.5 * (values[i] + values[j]);
            values[i] = avg;
            values[j] = avg;
        }
    }
    Ok(DensityEstimate {
        method,
        symmetrized: symmetrize,
        field: DensityField::new(*grid, values, ens.time)?,
        overflow,
    })
}

/// Binned Gaussian smoothing with cell-integrated weights. Mass leaving a
/// half-line grid through 0 is reflected back; everything is renormalised
/// to the input mass.
fn kde_smooth(values: &[f64], grid: &Grid1D, h: f64) -> Vec<f64> {
    let n = values.len() as isize;
    let reach = ((5.0 * h / grid.dx).ceil() as isize).max(1);
    let weights: Vec<f64> = (-reach..=reach)
        .map(|k| {
            normal_cdf((k as f64 + 0.5) * grid.dx / h) - normal_cdf((k as f64 - 0.5) * grid.dx / h)
        })
        .collect();
    let mut out = vec![0.0; values.len()];
    for (i, &v) in values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        for (w, k) in weights.iter().zip(-reach..=reach) {
            let mut j = i as isize + k;
            if j < 0 && grid.kind == GridKind::HalfLine {
                j = -1 - j;
            }
            if (0..n).contains(&j) {
                out[j as usize] += v * w;
            }
        }
    }
    let before: f64 = values.iter().sum();
    let after: f64 = out.iter().sum();
    if after > 0.0 {
        let s = before / after;
        out.iter_mut().for_each(|v| *v *= s);
    }
    out
}

/// Per-particle running sums, kept separately so that the ensemble means
/// are summed in a fixed order.
#[derive(Clone, Copy, Debug, Default)]
struct Acc {
    lt_sym: f64,
    lt_one: f64,
    zero_hits: u32,
    zero_occupation: f64,
    exposure: u32,
    skorokhod: f64,
    x_max: f64,
    monotone_ok: bool,
}

/// Selection of the coefficient per histogram cell, refreshed at sync steps.
struct Coefficient {
    constant: Option<f64>,
    at_zero: f64,
    cells: Vec<f64>,
    empty: Vec<bool>,
    grid: Grid1D,
}

impl Coefficient {
    #[inline]
    fn lookup(&self, x: f64) -> (f64, bool) {
        if let Some(c) = self.constant {
            return (c, false);
        }
        let (c, inside) = cell_of(&self.grid, x);
        if !inside || self.empty[c] {
            (self.at_zero, true)
        } else {
            (self.cells[c], false)
        }
    }
}

pub fn em_step_wholeline(
    ens: &mut ParticleEnsemble,
    chi_bar: &Selection,
    dens: &DensityEstimate,
    dt: f64,
) -> Result<()> {
    if ens.scheme != Scheme::WholelineFold {
        return Err(Error::Domain(
            "em_step_wholeline needs a fold ensemble".into(),
        ));
    }
    let coef = coefficient_from(chi_bar, dens);
    let mut acc = vec![Acc::default(); ens.len()];
    advance(ens, &coef, dt, None, &mut acc);
    Ok(())
}

pub fn reflected_step(
    ens: &mut ParticleEnsemble,
    chi: &Selection,
    dens: &DensityEstimate,
    dt: f64,
) -> Result<Vec<f64>> {
    if ens.scheme != Scheme::DirectReflect {
        return Err(Error::Domain(
            "reflected_step needs a direct ensemble".into(),
        ));
    }
    let coef = coefficient_from(chi, dens);
    let before = ens.k.clone();
    let mut acc = vec![Acc::default(); ens.len()];
    advance(ens, &coef, dt, None, &mut acc);
    Ok(ens.k.iter().zip(before).map(|(a, b)| a - b).collect())
}

fn coefficient_from(sel: &Selection, dens: &DensityEstimate) -> Coefficient {
    let values = dens.field.values();
    Coefficient {
        constant: None,
        at_zero: sel.select(0.0),
        cells: values.iter().map(|&v| sel.select(v.max(0.0))).collect(),
        empty: values.iter().map(|&v| v <= 0.0).collect(),
        grid: *dens.field.grid(),
    }
}

/// One Euler step of every particle. Occupation sums use the position and
/// coefficient at the start of the step.
fn advance(
    ens: &mut ParticleEnsemble,
    coef: &Coefficient,
    dt: f64,
    lt_eps: Option<f64>,
    acc: &mut [Acc],
) {
    let sdt = dt.sqrt();
    let stream = ens.stream;
    let step = ens.step;
    let scheme = ens.scheme;
    let eps = lt_eps.unwrap_or(0.0);
    let update = |i: usize, pos: &mut f64, k: Option<&mut f64>, a: &mut Acc| {
        let x = *pos;
        let (chi, exposed) = coef.lookup(x);
        a.exposure += exposed as u32;
        let q = chi * chi * dt;
        if eps > 0.0 {
            let ax = x.abs();
            if ax < eps {
                a.lt_sym += q / (2.0 * eps);
                a.lt_one += q / eps;
            }
        }
        if x == 0.0 {
            a.zero_hits += 1;
            a.zero_occupation += q;
        }
        let inc = if chi == 0.0 {
            0.0
        } else {
            chi * sdt * stream.normal(i as u64, step)
        };
        match scheme {
            Scheme::WholelineFold => *pos = x + inc,
            Scheme::DirectReflect => {
                let p = x + inc;
                let xn = p.abs();
                let dk = xn - p;
                if let Some(k) = k {
                    *k += dk;
                }
                a.monotone_ok &= dk >= 0.0;
                a.skorokhod += xn * dk;
                *pos = xn;
            }
        }
        a.x_max = a.x_max.max(pos.abs());
    };
    match scheme {
        Scheme::WholelineFold => ens
            .positions
            .par_iter_mut()
            .zip(acc.par_iter_mut())
            .enumerate()
            .with_min_len(4096)
            .for_each(|(i, (p, a))| update(i, p, None, a)),
        Scheme::DirectReflect => ens
            .positions
            .par_iter_mut()
            .zip(ens.k.par_iter_mut())
            .zip(acc.par_iter_mut())
            .enumerate()
            .with_min_len(4096)
            .for_each(|(i, ((p, k), a))| update(i, p, Some(k), a)),
    }
    ens.step += 1;
    ens.time = ens.step as f64 * dt;
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ParticleConfig {
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub estimator: Estimator,
    /// Histogram cell width for the coefficient and the reported marginals.
    pub bin_width: f64,
    /// Right end of the histogram grid.
    pub extent: f64,
    /// Steps between density re-estimations.
    pub k_sync: usize,
    pub seed: u64,
    pub policy: SelectionPolicy,
    /// Average mirror cells of the whole-line estimate (fold scheme).
    pub symmetrize: bool,
    pub local_time_eps: Option<f64>,
    pub snapshot_times: Vec<f64>,
    pub start_at_origin: bool,
}

impl Default for ParticleConfig {
    fn default() -> Self {
        ParticleConfig {
            n: 100_000,
            dt: 1e-3,
            t_final: 0.5,
            scheme: Scheme::DirectReflect,
            estimator: Estimator::Histogram,
            bin_width: 0.05,
            extent: 6.0,
            k_sync: 1,
            seed: 1,
            policy: SelectionPolicy::Midpoint,
            symmetrize: true,
            local_time_eps: None,
            snapshot_times: vec![0.5],
            start_at_origin: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalTimeTrace {
    pub eps: f64,
    /// `one_sided` uses `(1/ε) 1{0 ≤ |x| < ε}`, `symmetric` uses
    /// `(1/2ε) 1{|x| < ε}`.
    pub times: Vec<f64>,
    pub symmetric: Vec<f64>,
    pub one_sided: Vec<f64>,
    pub undersampled: bool,
}

impl LocalTimeTrace {
    pub fn final_symmetric(&self) -> f64 {
        self.symmetric.last().copied().unwrap_or(0.0)
    }

    pub fn final_one_sided(&self) -> f64 {
        self.one_sided.last().copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SkorokhodReport {
    pub complementarity: f64,
    pub monotone_ok: bool,
    pub nonneg_ok: bool,
    pub mean_k: f64,
    pub sup_x: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroSetReport {
    /// Fraction of (particle, step) pairs sitting exactly at 0.
    pub zero_fraction: f64,
    /// Ensemble mean of `Σ 1{x = 0} χ² dt`.
    pub zero_occupation: f64,
    /// Fraction of coefficient lookups that fell on an empty cell and
    /// used the value at 0.
    pub phi0_exposure: f64,
    pub phi0_lookups: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MarginalSnapshot {
    pub time: f64,
    pub step: usize,
    /// Histogram of `|position|` on the half-line grid.
    pub density: DensityField,
    pub overflow: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ParticleRun {
    pub scheme: Scheme,
    pub n: usize,
    pub dt: f64,
    pub seed: u64,
    pub snapshots: Vec<MarginalSnapshot>,
    pub local_time: Option<LocalTimeTrace>,
    pub skorokhod: Option<SkorokhodReport>,
    pub zero_set: ZeroSetReport,
    /// `max_i |x_i(T) - x_i(0)|`.
    pub max_displacement: f64,
    #[serde(skip)]
    pub ensemble: ParticleEnsemble,
}

impl ParticleRun {
    pub fn at(&self, t: f64) -> Result<&MarginalSnapshot> {
        self.snapshots
            .iter()
            .find(|s| (s.time - t).abs() <= 0.5 * self.dt)
            .ok_or_else(|| Error::Domain(format!("no particle snapshot at t = {t}")))
    }
}

/// The coefficient graph for a scheme: `Φ` for direct reflection, `Φ̄` for
/// the fold.
pub fn coefficient_graph(beta: &MonotoneGraph, scheme: Scheme) -> PhiGraph {
    let phi = phi_from_beta(beta);
    match scheme {
        Scheme::DirectReflect => phi,
        Scheme::WholelineFold => extend_phi(&phi),
    }
}

pub fn simulate(
    u0: &DensityField,
    beta: &MonotoneGraph,
    cfg: &ParticleConfig,
) -> Result<ParticleRun> {
    validate_config(cfg)?;
    let mut ens = if cfg.start_at_origin {
        ParticleEnsemble::at_origin(cfg.n, cfg.seed, cfg.scheme)?
    } else {
        sample_initial(u0, cfg.n, cfg.seed, cfg.scheme)?
    };
    let start = ens.positions.clone();
    let (n_steps, dt) = crate::pde::step_count(cfg.t_final, cfg.dt)?;
    let half = Grid1D::half_line(cfg.bin_width, cfg.extent)?;
    let dens_grid = match cfg.scheme {
        Scheme::DirectReflect => half,
        Scheme::WholelineFold => half.mirror(),
    };
    let phi = coefficient_graph(beta, cfg.scheme);
    let sel = make_selection(&phi, cfg.policy);
    let mut coef = Coefficient {
        constant: phi.constant_value(),
        at_zero: sel.select(0.0),
        cells: Vec::new(),
        empty: Vec::new(),
        grid: dens_grid,
    };
    let symmetrize = cfg.symmetrize && cfg.scheme == Scheme::WholelineFold;
    let mut snap_steps: Vec<usize> = cfg
        .snapshot_times
        .iter()
        .map(|t| ((t / dt).round() as usize).min(n_steps))
        .collect();
    snap_steps.sort_unstable();
    snap_steps.dedup();

    let lt_every = (n_steps / 100).max(1);
    let mut lt = cfg.local_time_eps.map(|eps| LocalTimeTrace {
        eps,
        times: vec![0.0],
        symmetric: vec![0.0],
        one_sided: vec![0.0],
        undersampled: false,
    });
    let mut acc = vec![
        Acc {
            monotone_ok: true,
            ..Default::default()
        };
        cfg.n
    ];
    let mut snapshots = Vec::new();
    let mut chi_max: f64 = 0.0;
    let push_snapshot =
        |ens: &ParticleEnsemble, step: usize, snaps: &mut Vec<MarginalSnapshot>| -> Result<()> {
            let folded = fold(ens);
            let est = estimate_density(&folded, &half, Estimator::Histogram, false)?;
            snaps.push(MarginalSnapshot {
                time: step as f64 * dt,
                step,
                density: est.field,
                overflow: est.overflow,
            });
            Ok(())
        };
    if snap_steps.first() == Some(&0) {
        push_snapshot(&ens, 0, &mut snapshots)?;
    }
    for k in 0..n_steps {
        if coef.constant.is_none() && k % cfg.k_sync == 0 {
            let est = estimate_density(&ens, &dens_grid, cfg.estimator, symmetrize)?;
            let values = est.field.values();
            coef.cells = values.iter().map(|&v| sel.select(v.max(0.0))).collect();
            coef.empty = values.iter().map(|&v| v <= 0.0).collect();
        }
        chi_max = chi_max.max(
            coef.constant
                .unwrap_or_else(|| coef.cells.iter().cloned().fold(coef.at_zero, f64::max)),
        );
        advance(&mut ens, &coef, dt, cfg.local_time_eps, &mut acc);
        let step = k + 1;
        if let Some(tr) = lt.as_mut() {
            if step % lt_every == 0 || step == n_steps {
                let n = cfg.n as f64;
                tr.times.push(step as f64 * dt);
                tr.symmetric
                    .push(acc.iter().map(|a| a.lt_sym).sum::<f64>() / n);
                tr.one_sided
                    .push(acc.iter().map(|a| a.lt_one).sum::<f64>() / n);
            }
        }
        if snap_steps.binary_search(&step).is_ok() {
            push_snapshot(&ens, step, &mut snapshots)?;
        }
    }
    if let Some(tr) = lt.as_mut() {
        tr.undersampled = tr.eps < dt.sqrt() * chi_max;
        if tr.undersampled {
            log::warn!(
                "local-time window {} is below the typical step {}",
                tr.eps,
                dt.sqrt() * chi_max
            );
        }
    }
    let n = cfg.n as f64;
    let lookups = (cfg.n * n_steps) as u64;
    let exposure: u64 = acc.iter().map(|a| a.exposure as u64).sum();
    let zero_set = ZeroSetReport {
        zero_fraction: acc.iter().map(|a| a.zero_hits as f64).sum::<f64>() / lookups.max(1) as f64,
        zero_occupation: acc.iter().map(|a| a.zero_occupation).sum::<f64>() / n,
        phi0_exposure: exposure as f64 / lookups.max(1) as f64,
        phi0_lookups: exposure,
    };
    let skorokhod = (cfg.scheme == Scheme::DirectReflect).then(|| {
        let sup_x = acc.iter().map(|a| a.x_max).fold(0.0, f64::max);
        let total_k: f64 = ens.k.iter().sum();
        let comp: f64 = acc.iter().map(|a| a.skorokhod).sum();
        SkorokhodReport {
            complementarity: if total_k > 0.0 && sup_x > 0.0 {
                comp / (sup_x * total_k)
            } else {
                0.0
            },
            monotone_ok: acc.iter().all(|a| a.monotone_ok),
            nonneg_ok: ens.positions.iter().all(|&x| x >= 0.0),
            mean_k: total_k / n,
            sup_x,
        }
    });
    let max_displacement = ens
        .positions
        .iter()
        .zip(&start)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ParticleRun {
        scheme: cfg.scheme,
        n: cfg.n,
        dt,
        seed: cfg.seed,
        snapshots,
        local_time: lt,
        skorokhod,
        zero_set,
        max_displacement,
        ensemble: ens,
    })
}

fn validate_config(cfg: &ParticleConfig) -> Result<()> {
    if cfg.n == 0 {
        return Err(Error::config("particle.n", "must be at least 1"));
    }
    for (field, v) in [
        ("particle.dt", cfg.dt),
        ("particle.bin_width", cfg.bin_width),
        ("particle.extent", cfg.extent),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::config(field, format!("{v} must be positive")));
        }
    }
    if cfg.k_sync == 0 {
        return Err(Error::config("particle.k_sync", "must be at least 1"));
    }
    if let Some(eps) = cfg.local_time_eps {
        if !(eps > 0.0) {
            return Err(Error::config("particle.local_time_eps", "must be positive"));
        }
    }
    Ok(())
}

/// `Σ 1{x_s = 0} χ_s² dt` along one recorded path.
pub fn zero_occupation(path: &[f64], chi: &[f64], dt: f64) -> f64 {
    path.iter()
        .zip(chi)
        .filter(|(x, _)| **x == 0.0)
        .map(|(_, c)| c * c * dt)
        .sum()
}

/// Skorokhod diagnostics from recorded paths `x[s]` (after each step) and
/// increments `dk[s]`.
pub fn skorokhod_check(paths: &[Vec<f64>], dks: &[Vec<f64>]) -> SkorokhodReport {
    let mut comp = 0.0;
    let mut total_k = 0.0;
    let mut sup_x: f64 = 0.0;
    let mut monotone_ok = true;
    let mut nonneg_ok = true;
    for (xs, ks) in paths.iter().zip(dks) {
        for (&x, &dk) in xs.iter().zip(ks) {
            comp += x * dk;
            total_k += dk;
            sup_x = sup_x.max(x);
            monotone_ok &= dk >= 0.0;
            nonneg_ok &= x >= 0.0;
        }
    }
    SkorokhodReport {
        complementarity: if total_k > 0.0 && sup_x > 0.0 {
            comp / (sup_x * total_k)
        } else {
            0.0
        },
        monotone_ok,
        nonneg_ok,
        mean_k: total_k / paths.len().max(1) as f64,
        sup_x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::normal_pdf;

    fn indicator(dx: f64) -> DensityField {
        DensityField::from_fn(Grid1D::half_line(dx, 4.0).unwrap(), |x| {
            if x < 1.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn sampling_matches_cdf() {
        let u0 = indicator(0.01);
        let ens = sample_initial(&u0, 100_000, 5, Scheme::DirectReflect).unwrap();
        let mut xs = ens.positions.clone();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Kolmogorov distance against F(x) = min(x, 1)
        let n = xs.len() as f64;
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = x.min(1.0);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 0.01, "KS distance {d}");
        assert!(sample_initial(&u0, 0, 5, Scheme::DirectReflect).is_err());
    }

    #[test]
    fn fold_sampling_balances_signs() {
        let u0 = indicator(0.01);
        let ens = sample_initial(&u0, 100_000, 6, Scheme::WholelineFold).unwrap();
        let pos = ens.positions.iter().filter(|&&y| y > 0.0).count() as f64;
        let neg = ens.positions.iter().filter(|&&y| y < 0.0).count() as f64;
        assert!((pos - neg).abs() / 1e5 <= 0.01);
        let direct = sample_initial(&u0, 100_000, 6, Scheme::DirectReflect).unwrap();
        assert_eq!(fold(&ens).positions, direct.positions);
    }

    #[test]
    fn fold_examples() {
        let e = ParticleEnsemble::from_positions(vec![-1.0, 2.0, -3.0], 0, Scheme::WholelineFold);
        assert_eq!(fold(&e).positions, vec![1.0, 2.0, 3.0]);
        assert_eq!(fold(&fold(&e)).positions, fold(&e).positions);
    }

    #[test]
    fn histogram_examples() {
        let g = Grid1D::half_line(0.1, 1.0).unwrap();
        let e = ParticleEnsemble::from_positions(vec![0.55; 10], 0, Scheme::DirectReflect);
        let d = estimate_density(&e, &g, Estimator::Histogram, false).unwrap();
        for (i, &v) in d.field.values().iter().enumerate() {
            assert!((v - if i == 5 { 10.0 } else { 0.0 }).abs() < 1e-12);
        }
        let w = g.mirror();
        let e =
            ParticleEnsemble::from_positions(vec![-0.3, 0.1, 0.12, 0.7], 0, Scheme::WholelineFold);
        let d = estimate_density(&e, &w, Estimator::Histogram, true).unwrap();
        assert_eq!(crate::mirror::check_even(&d.field).unwrap(), 0.0);
        assert!((d.field.mass() - 1.0).abs() < 1e-12);
        assert!(
            estimate_density(&e, &w, Estimator::GaussianKde { bandwidth: 0.0 }, false).is_err()
        );
    }

    #[test]
    fn normal_histogram_and_kde() {
        let n = 100_000u64;
        let s = NoiseStream::new(11);
        let ys: Vec<f64> = (0..n).map(|i| s.normal(i, 0)).collect();
        let e = ParticleEnsemble::from_positions(ys, 0, Scheme::WholelineFold);
        let g = Grid1D::symmetric(0.05, 6.0).unwrap();
        for method in [
            Estimator::Histogram,
            Estimator::GaussianKde { bandwidth: 0.05 },
        ] {
            let d = estimate_density(&e, &g, method, false).unwrap();
            assert!((d.field.mass() - 1.0).abs() < 1e-12);
            // exact cell averages of the normal density
            let l1: f64 = (0..g.n)
                .map(|i| {
                    let a = g.center(i) - 0.025;
                    let p = (normal_cdf(a + 0.05) - normal_cdf(a)) / 0.05;
                    (d.field.values()[i] - p).abs()
                })
                .sum::<f64>()
                * 0.05;
            assert!(l1 < 0.05, "{method:?}: {l1}");
        }
        // folded sample against the half-normal 2φ
        let half = Grid1D::half_line(0.05, 6.0).unwrap();
        let d = estimate_density(&fold(&e), &half, Estimator::Histogram, false).unwrap();
        let l1: f64 = (0..half.n)
            .map(|i| (d.field.values()[i] - 2.0 * normal_pdf(half.center(i))).abs())
            .sum::<f64>()
            * 0.05;
        assert!(l1 < 0.05, "{l1}");
    }

    #[test]
    fn kde_conserves_mass_on_half_line() {
        let g = Grid1D::half_line(0.05, 3.0).unwrap();
        let e =
            ParticleEnsemble::from_positions(vec![0.01, 0.02, 0.5, 1.0], 0, Scheme::DirectReflect);
        let d = estimate_density(&e, &g, Estimator::GaussianKde { bandwidth: 0.2 }, false).unwrap();
        assert!((d.field.mass() - 1.0).abs() < 1e-12);
        assert!(d.field.min() >= 0.0);
    }

    fn sel_const(beta: &MonotoneGraph) -> Selection {
        make_selection(&phi_from_beta(beta), SelectionPolicy::Midpoint)
    }

    fn flat_estimate(grid: Grid1D, value: f64) -> DensityEstimate {
        DensityEstimate {
            method: Estimator::Histogram,
            symmetrized: false,
            field: DensityField::new(grid, vec![value; grid.n], 0.0).unwrap(),
            overflow: 0,
        }
    }

    #[test]
    fn reflected_step_examples() {
        let g = Grid1D::half_line(0.1, 10.0).unwrap();
        let dens = flat_estimate(g, 0.1);
        let sel = sel_const(&MonotoneGraph::identity());
        let dt = 0.01;
        // find a particle index whose first draw is negative
        let stream = NoiseStream::new(3);
        let i = (0..100u64).find(|&i| stream.normal(i, 0) < 0.0).unwrap() as usize;
        let mut e = ParticleEnsemble::from_positions(vec![0.0; i + 1], 3, Scheme::DirectReflect);
        let dk = reflected_step(&mut e, &sel, &dens, dt).unwrap();
        let xi = stream.normal(i as u64, 0);
        assert_eq!(e.positions[i], dt.sqrt() * xi.abs());
        assert!((dk[i] - 2.0 * dt.sqrt() * xi.abs()).abs() < 1e-15);

        let mut far = ParticleEnsemble::from_positions(vec![5.0; 50], 3, Scheme::DirectReflect);
        let dk = reflected_step(&mut far, &sel, &dens, dt).unwrap();
        assert!(dk.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn zero_coefficient_freezes() {
        let g = Grid1D::symmetric(0.1, 5.0).unwrap();
        let dens = flat_estimate(g, 0.1);
        let sel = sel_const(&MonotoneGraph::zero());
        let mut e =
            ParticleEnsemble::from_positions(vec![-0.3, 0.2, 1.7], 1, Scheme::WholelineFold);
        let before = e.positions.clone();
        em_step_wholeline(&mut e, &sel, &dens, 0.1).unwrap();
        assert_eq!(e.positions, before);
    }

    #[test]
    fn brownian_variance_grows_by_dt() {
        let g = Grid1D::symmetric(0.1, 5.0).unwrap();
        let dens = flat_estimate(g, 0.1);
        let sel = sel_const(&MonotoneGraph::identity());
        let s = NoiseStream::new(2);
        let n = 100_000u64;
        let mut e = ParticleEnsemble::from_positions(
            (0..n).map(|i| s.normal(i, 99)).collect(),
            4,
            Scheme::WholelineFold,
        );
        let var = |p: &[f64]| {
            let m = p.iter().sum::<f64>() / p.len() as f64;
            p.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / p.len() as f64
        };
        let v0 = var(&e.positions);
        let dt = 0.5;
        em_step_wholeline(&mut e, &sel, &dens, dt).unwrap();
        let growth = var(&e.positions) - v0;
        assert!((growth / dt - 1.0).abs() < 0.03, "{growth}");
    }

    #[test]
    fn mirrored_ensemble_is_exact() {
        let u0 = indicator(0.01);
        let beta = MonotoneGraph::saturating();
        let cfg = ParticleConfig {
            n: 2000,
            dt: 0.01,
            t_final: 0.2,
            scheme: Scheme::WholelineFold,
            ..Default::default()
        };
        let ens = sample_initial(&u0, cfg.n, 9, Scheme::WholelineFold).unwrap();
        let mut a = ens.clone();
        let mut b = ens.mirrored();
        let grid = Grid1D::symmetric(0.05, 6.0).unwrap();
        let sel = make_selection(
            &coefficient_graph(&beta, Scheme::WholelineFold),
            SelectionPolicy::Midpoint,
        );
        for _ in 0..20 {
            let da = estimate_density(&a, &grid, Estimator::Histogram, true).unwrap();
            let db = estimate_density(&b, &grid, Estimator::Histogram, true).unwrap();
            em_step_wholeline(&mut a, &sel, &da, cfg.dt).unwrap();
            em_step_wholeline(&mut b, &sel, &db, cfg.dt).unwrap();
        }
        for (x, y) in a.positions.iter().zip(&b.positions) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn simulate_is_deterministic_across_thread_counts() {
        let u0 = indicator(0.01);
        let cfg = ParticleConfig {
            n: 20_000,
            dt: 0.01,
            t_final: 0.1,
            local_time_eps: Some(0.1),
            ..Default::default()
        };
        let beta = MonotoneGraph::saturating();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| simulate(&u0, &beta, &cfg).unwrap());
        let b = four.install(|| simulate(&u0, &beta, &cfg).unwrap());
        assert_eq!(a.ensemble.positions, b.ensemble.positions);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn zero_set_examples() {
        assert!((zero_occupation(&[0.0; 100], &[1.0; 100], 0.01) - 1.0).abs() < 1e-12);
        assert_eq!(zero_occupation(&[0.3, 0.1], &[1.0, 1.0], 0.01), 0.0);
        let u0 = indicator(0.01);
        let cfg = ParticleConfig {
            n: 10_000,
            dt: 0.01,
            t_final: 0.2,
            ..Default::default()
        };
        let run = simulate(&u0, &MonotoneGraph::identity(), &cfg).unwrap();
        assert_eq!(run.zero_set.zero_fraction, 0.0);
        assert_eq!(run.zero_set.zero_occupation, 0.0);
    }

    #[test]
    fn skorokhod_examples() {
        let r = skorokhod_check(&[vec![1.0, 1.2, 0.9]], &[vec![0.0, 0.0, 0.0]]);
        assert_eq!(r.complementarity, 0.0);
        assert_eq!(r.mean_k, 0.0);
        assert!(r.monotone_ok && r.nonneg_ok);
        let bad = skorokhod_check(&[vec![0.1, -0.1]], &[vec![0.2, -0.1]]);
        assert!(!bad.monotone_ok && !bad.nonneg_ok);
    }
}
