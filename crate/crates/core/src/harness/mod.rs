//! Experiment orchestration: run the PDE and particle pipelines described by
//! an [`ExperimentConfig`], compare them, and write a reproducible run
//! directory (`report.json`, `metrics.csv`, per-snapshot CSVs).

mod config;
mod metrics;

pub use config::{
    DomainBlock, ExperimentConfig, GraphSpec, InitialSpec, ParticleBlock, Pipeline, SweepBlock,
    TimeBlock, Tolerances, VerificationBlock,
};
pub use metrics::{compare_densities, resample, Distances};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{classify, phi_from_beta, zero_plateau, DegeneracyClass, MonotoneGraph};
use crate::mirror::{extend_beta, extend_initial, restrict_solution, DensityField, Grid1D};
use crate::particle::{simulate, ParticleRun, Scheme, SkorokhodReport, ZeroSetReport};
use crate::pde::{
    images_indicator, solve, ConservationLedger, PdeTrajectory, SolveOptions, SolverTotals,
};
use crate::testfn::{
    boundary_form_residual, cutoff_ladder, equivalence_constant, make_bump, residual_suite,
    standard_family, CutoffRung, ResidualForm, ResidualReport,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "op", content = "bound", rename_all = "snake_case")]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Within(f64, f64),
}

impl Bound {
    pub fn holds(self, v: f64) -> bool {
        match self {
            Bound::AtMost(b) => v <= b,
            Bound::AtLeast(b) => v >= b,
            Bound::Within(lo, hi) => (lo..=hi).contains(&v),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Metric {
    pub rule: String,
    pub name: String,
    pub value: f64,
    pub bound: Option<Bound>,
    pub passed: Option<bool>,
    pub artifact: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RouteGap {
    pub time: f64,
    pub l1: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RouteSection {
    pub gaps: Vec<RouteGap>,
    pub max_gap: f64,
    pub mirror_conservation: ConservationLedger,
}

#[derive(Clone, Debug, Serialize)]
pub struct PdeSection {
    pub beta: String,
    pub class: DegeneracyClass,
    pub grid: Grid1D,
    pub dt: f64,
    pub conservation: ConservationLedger,
    pub solver: SolverTotals,
}

#[derive(Clone, Debug, Serialize)]
pub struct ParticleSection {
    pub scheme: Scheme,
    pub n: usize,
    pub dt: f64,
    pub seed: u64,
    pub zero_set: ZeroSetReport,
    pub skorokhod: Option<SkorokhodReport>,
    pub local_time_symmetric: Option<f64>,
    pub local_time_one_sided: Option<f64>,
    pub max_displacement: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub pde: Option<PdeSection>,
    pub route: Option<RouteSection>,
    pub particles: Vec<ParticleSection>,
    pub metrics: Vec<Metric>,
    pub passed: bool,
}

impl Report {
    pub fn failures(&self) -> Vec<&Metric> {
        self.metrics
            .iter()
            .filter(|m| m.passed == Some(false))
            .collect()
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn metrics_named<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Metric> + 'a {
        self.metrics
            .iter()
            .filter(move |m| m.name.starts_with(prefix))
    }
}

/// Content hash of the canonical JSON form of the config, computed like a
/// git blob id but with SHA-256.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let body = serde_json::to_string(cfg)?;
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(body.as_bytes());
    Ok(h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

fn time_tag(t: f64) -> String {
    format!("{t:.4}")
}

struct Metrics(Vec<Metric>);

impl Metrics {
    fn push(
        &mut self,
        rule: &str,
        name: impl Into<String>,
        value: f64,
        bound: Option<Bound>,
        artifact: impl Into<String>,
    ) {
        self.0.push(Metric {
            rule: rule.into(),
            name: name.into(),
            value,
            passed: bound.map(|b| b.holds(value)),
            bound,
            artifact: artifact.into(),
        });
    }
}

struct RunDir(PathBuf);

impl RunDir {
    fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path)?;
        Ok(RunDir(path.to_path_buf()))
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.0.join(name), contents)?;
        Ok(())
    }

    fn write_field(&self, name: &str, f: &DensityField) -> Result<()> {
        let mut buf = Vec::new();
        f.write_csv(&mut buf)?;
        fs::write(self.0.join(name), buf)?;
        Ok(())
    }
}

fn initial_oracle(cfg: &ExperimentConfig) -> Option<f64> {
    match (&cfg.graph, &cfg.initial) {
        (GraphSpec::Identity, InitialSpec::Indicator { a, b }) if *a == 0.0 => Some(*b),
        _ => None,
    }
}

/// `Some(u_c)` when `β` vanishes on `[0, u_c]` and `u0` stays below `u_c`.
fn frozen_plateau(beta: &MonotoneGraph, u0: &DensityField) -> Option<f64> {
    zero_plateau(beta).filter(|&uc| uc > 0.0 && u0.sup() < uc)
}

fn solve_pde(
    cfg: &ExperimentConfig,
    beta: &MonotoneGraph,
    u0: &DensityField,
    dt: f64,
) -> Result<PdeTrajectory> {
    let opts = SolveOptions::new(cfg.time.t_final, dt)
        .snapshots(&cfg.snapshot_times())
        .solver(cfg.solver)
        .skip_validation(cfg.override_assumptions);
    solve(u0, beta, &opts)
}

/// Direct half-line solve against the mirror route: extend, solve on the
/// whole line, restrict. Reports the L1 gap at every snapshot.
pub fn route_equivalence(cfg: &ExperimentConfig) -> Result<RouteSection> {
    let beta = cfg.graph.build()?;
    let u0 = cfg.initial.build(cfg.half_grid()?)?;
    route_from(cfg, &beta, &u0, None).map(|(s, _)| s)
}

fn route_from(
    cfg: &ExperimentConfig,
    beta: &MonotoneGraph,
    u0: &DensityField,
    direct: Option<&PdeTrajectory>,
) -> Result<(RouteSection, Vec<(f64, DensityField)>)> {
    let own;
    let direct = match direct {
        Some(d) => d,
        None => {
            own = solve_pde(cfg, beta, u0, cfg.time.dt)?;
            &own
        }
    };
    let ubar0 = extend_initial(u0)?;
    let mirror = solve_pde(cfg, &extend_beta(beta), &ubar0, cfg.time.dt)?;
    let mut gaps = Vec::new();
    let mut restricted = Vec::new();
    for (a, b) in direct.snapshots.iter().zip(&mirror.snapshots) {
        let v = restrict_solution(&b.u)?;
        let d = compare_densities(&a.u, &v, true)?;
        gaps.push(RouteGap {
            time: a.time,
            l1: d.l1,
        });
        restricted.push((a.time, v));
    }
    let max_gap = gaps.iter().map(|g| g.l1).fold(0.0, f64::max);
    Ok((
        RouteSection {
            gaps,
            max_gap,
            mirror_conservation: mirror.conservation,
        },
        restricted,
    ))
}

/// Run the pipelines named in `cfg.pipelines`, writing artifacts to `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Report> {
    cfg.validate()?;
    let dir = RunDir::create(out)?;
    let tol = &cfg.tolerances;
    let want = |p| cfg.pipelines.contains(&p);
    let beta = cfg.graph.build()?;
    let grid = cfg.half_grid()?;
    let u0 = cfg.initial.build(grid)?;
    let class = classify(&beta);
    let plateau = frozen_plateau(&beta, &u0);
    let mut m = Metrics(Vec::new());

    let need_pde = want(Pipeline::Pde)
        || want(Pipeline::Compare)
        || want(Pipeline::Verify)
        || want(Pipeline::Route);
    let need_particles = want(Pipeline::Particle) || want(Pipeline::Compare);
    let (pde, particles) = rayon::join(
        || need_pde.then(|| solve_pde(cfg, &beta, &u0, cfg.time.dt).map_err(|e| e.at_stage("pde"))),
        || {
            need_particles
                .then(|| run_particles(cfg, &beta, &u0).map_err(|e| e.at_stage("particle")))
        },
    );
    let pde = pde.transpose()?;
    let particles = particles.transpose()?.unwrap_or_default();

    if let Some(traj) = &pde {
        pde_metrics(cfg, traj, plateau, &dir, &mut m).map_err(|e| e.at_stage("pde"))?;
    }
    let route = if want(Pipeline::Route) {
        let (section, restricted) =
            route_from(cfg, &beta, &u0, pde.as_ref()).map_err(|e| e.at_stage("route"))?;
        let mut csv = String::from("t,l1_gap\n");
        for g in &section.gaps {
            let _ = writeln!(csv, "{},{}", g.time, g.l1);
        }
        dir.write("route.csv", &csv)?;
        for (t, v) in &restricted {
            dir.write_field(&format!("mirror_density_t{}.csv", time_tag(*t)), v)?;
        }
        m.push(
            "route-equivalence",
            "route.max_l1_gap",
            section.max_gap,
            Some(Bound::AtMost(tol.route_gap)),
            "route.csv",
        );
        if let Some(a) = section.mirror_conservation.max_asymmetry {
            m.push(
                "evenness",
                "route.mirror_asymmetry",
                a,
                Some(Bound::AtMost(tol.asymmetry)),
                "metrics.csv",
            );
        }
        m.push(
            "conservation",
            "route.mirror_mass_deviation",
            section.mirror_conservation.max_mass_deviation,
            Some(Bound::AtMost(tol.mass)),
            "metrics.csv",
        );
        m.push(
            "positivity",
            "route.mirror_min_value",
            section.mirror_conservation.min_value,
            Some(Bound::AtLeast(-tol.positivity)),
            "metrics.csv",
        );
        Some(section)
    } else {
        None
    };
    if !particles.is_empty() {
        particle_metrics(cfg, &beta, &particles, plateau, &dir, &mut m)
            .map_err(|e| e.at_stage("particle"))?;
    }
    if want(Pipeline::Compare) {
        let traj = pde.as_ref().expect("pde runs for compare");
        compare_metrics(cfg, &class, traj, &particles[0], &dir, &mut m)
            .map_err(|e| e.at_stage("compare"))?;
    }
    if want(Pipeline::Verify) {
        let traj = pde.as_ref().expect("pde runs for verify");
        verify_metrics(cfg, &beta, traj, &dir, &mut m).map_err(|e| e.at_stage("verify"))?;
    }

    let report = Report {
        config: cfg.clone(),
        config_hash: config_hash(cfg)?,
        seed: cfg.seed,
        pde: pde.as_ref().map(|t| PdeSection {
            beta: t.beta_label.clone(),
            class,
            grid: t.grid,
            dt: t.dt,
            conservation: t.conservation.clone(),
            solver: t.solver.clone(),
        }),
        route,
        particles: particles.iter().map(particle_section).collect(),
        passed: m.0.iter().all(|x| x.passed != Some(false)),
        metrics: m.0,
    };
    write_report(&dir, &report)?;
    Ok(report)
}

fn write_report(dir: &RunDir, report: &Report) -> Result<()> {
    let mut csv = String::from("rule,name,value,bound,passed,artifact\n");
    for x in &report.metrics {
        let bound = match x.bound {
            None => String::new(),
            Some(Bound::AtMost(b)) => format!("<= {b}"),
            Some(Bound::AtLeast(b)) => format!(">= {b}"),
            Some(Bound::Within(lo, hi)) => format!("in [{lo} {hi}]"),
        };
        let passed = x.passed.map_or(String::new(), |p| p.to_string());
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            x.rule, x.name, x.value, bound, passed, x.artifact
        );
    }
    dir.write("metrics.csv", &csv)?;
    dir.write("report.json", &serde_json::to_string_pretty(report)?)
}

fn particle_section(r: &ParticleRun) -> ParticleSection {
    ParticleSection {
        scheme: r.scheme,
        n: r.n,
        dt: r.dt,
        seed: r.seed,
        zero_set: r.zero_set.clone(),
        skorokhod: r.skorokhod.clone(),
        local_time_symmetric: r.local_time.as_ref().map(|l| l.final_symmetric()),
        local_time_one_sided: r.local_time.as_ref().map(|l| l.final_one_sided()),
        max_displacement: r.max_displacement,
    }
}

fn pde_metrics(
    cfg: &ExperimentConfig,
    traj: &PdeTrajectory,
    plateau: Option<f64>,
    dir: &RunDir,
    m: &mut Metrics,
) -> Result<()> {
    let tol = &cfg.tolerances;
    for s in &traj.snapshots {
        let tag = time_tag(s.time);
        dir.write_field(&format!("density_t{tag}.csv"), &s.u)?;
        let mut csv = String::from("x,eta,eta_time_integral\n");
        for (i, (e, h)) in s.eta.values.iter().zip(&s.eta_time_integral).enumerate() {
            let _ = writeln!(csv, "{},{},{}", traj.grid.center(i), e, h);
        }
        dir.write(&format!("eta_t{tag}.csv"), &csv)?;
    }
    let c = &traj.conservation;
    m.push(
        "conservation",
        "pde.max_mass_deviation",
        c.max_mass_deviation,
        Some(Bound::AtMost(tol.mass)),
        "metrics.csv",
    );
    m.push(
        "positivity",
        "pde.min_value",
        c.min_value,
        Some(Bound::AtLeast(-tol.positivity)),
        "metrics.csv",
    );
    if let Some(a) = initial_oracle(cfg) {
        for s in traj.snapshots.iter().filter(|s| s.time > 0.0) {
            let exact = images_indicator(traj.grid, a, s.time)?;
            let d = compare_densities(&s.u, &exact, false)?;
            let tag = time_tag(s.time);
            m.push(
                "linear-oracle",
                format!("pde.l1_vs_images@t={tag}"),
                d.l1,
                Some(Bound::AtMost(tol.oracle_l1)),
                format!("density_t{tag}.csv"),
            );
        }
    }
    if plateau.is_some() {
        m.push(
            "degenerate-plateau",
            "pde.sup_change",
            traj.sup_change(),
            Some(Bound::AtMost(tol.plateau_change)),
            "metrics.csv",
        );
    }
    Ok(())
}

/// Seeds: the configured particle seed (or the run seed) for the first
/// scheme, then consecutive seeds so the ensembles are independent.
fn run_particles(
    cfg: &ExperimentConfig,
    beta: &MonotoneGraph,
    u0: &DensityField,
) -> Result<Vec<ParticleRun>> {
    let base = cfg.particle.seed.unwrap_or(cfg.seed);
    cfg.particle
        .schemes
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            simulate(
                u0,
                beta,
                &cfg.particle_config(s, base.wrapping_add(i as u64)),
            )
        })
        .collect()
}

fn scheme_tag(s: Scheme) -> &'static str {
    match s {
        Scheme::WholelineFold => "fold",
        Scheme::DirectReflect => "direct",
    }
}

fn particle_metrics(
    cfg: &ExperimentConfig,
    beta: &MonotoneGraph,
    runs: &[ParticleRun],
    plateau: Option<f64>,
    dir: &RunDir,
    m: &mut Metrics,
) -> Result<()> {
    let tol = &cfg.tolerances;
    for r in runs {
        let tag = scheme_tag(r.scheme);
        for s in &r.snapshots {
            dir.write_field(
                &format!("particle_{tag}_t{}.csv", time_tag(s.time)),
                &s.density,
            )?;
        }
        if let Some(sk) = &r.skorokhod {
            let bound = tol.complementarity_factor * r.dt.sqrt();
            m.push(
                "skorokhod",
                format!("{tag}.monotone_ok"),
                sk.monotone_ok as u8 as f64,
                Some(Bound::AtLeast(1.0)),
                "metrics.csv",
            );
            m.push(
                "skorokhod",
                format!("{tag}.nonneg_ok"),
                sk.nonneg_ok as u8 as f64,
                Some(Bound::AtLeast(1.0)),
                "metrics.csv",
            );
            m.push(
                "skorokhod",
                format!("{tag}.complementarity"),
                sk.complementarity,
                Some(Bound::AtMost(bound)),
                "metrics.csv",
            );
            m.push(
                "skorokhod",
                format!("{tag}.mean_k"),
                sk.mean_k,
                None,
                "metrics.csv",
            );
        }
        m.push(
            "zero-set",
            format!("{tag}.zero_occupation"),
            r.zero_set.zero_occupation,
            None,
            "metrics.csv",
        );
        m.push(
            "zero-set",
            format!("{tag}.phi0_exposure"),
            r.zero_set.phi0_exposure,
            None,
            "metrics.csv",
        );
        if plateau.is_some() {
            m.push(
                "degenerate-plateau",
                format!("{tag}.max_displacement"),
                r.max_displacement,
                Some(Bound::AtMost(0.0)),
                "metrics.csv",
            );
            m.push(
                "degenerate-plateau",
                format!("{tag}.phi0_exposure_count"),
                r.zero_set.phi0_lookups as f64,
                Some(Bound::AtMost(0.0)),
                "metrics.csv",
            );
        }
    }

    if runs.iter().any(|r| r.local_time.is_some()) {
        let mut csv = String::from("scheme,t,symmetric,one_sided\n");
        for r in runs {
            if let Some(lt) = &r.local_time {
                for i in 0..lt.times.len() {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{}",
                        scheme_tag(r.scheme),
                        lt.times[i],
                        lt.symmetric[i],
                        lt.one_sided[i]
                    );
                }
            }
        }
        dir.write("localtime.csv", &csv)?;
        let ly = runs
            .iter()
            .find(|r| r.scheme == Scheme::WholelineFold)
            .and_then(|r| r.local_time.as_ref())
            .map(|l| l.final_symmetric());
        let lx = runs
            .iter()
            .find(|r| r.scheme == Scheme::DirectReflect)
            .and_then(|r| r.local_time.as_ref())
            .map(|l| l.final_one_sided());
        let unit_speed = phi_from_beta(beta).constant_value() == Some(1.0);
        if let Some(ly) = ly {
            m.push("local-time", "local_time.y", ly, None, "localtime.csv");
            if unit_speed && cfg.particle.start_at_origin {
                // E L_T = E|W_T| for a Brownian motion started at 0
                let exact = (2.0 * cfg.time.t_final / std::f64::consts::PI).sqrt();
                m.push(
                    "local-time",
                    "local_time.y_rel_error",
                    (ly - exact).abs() / exact,
                    Some(Bound::AtMost(tol.local_time_rel)),
                    "localtime.csv",
                );
            }
        }
        if let Some(lx) = lx {
            m.push("local-time", "local_time.x", lx, None, "localtime.csv");
        }
        if let (Some(ly), Some(lx)) = (ly, lx) {
            let (lo, hi) = tol.local_time_ratio;
            m.push(
                "local-time",
                "local_time.ratio_y_over_x",
                ly / lx,
                Some(Bound::Within(lo, hi)),
                "localtime.csv",
            );
        }
    }

    let fold = runs.iter().find(|r| r.scheme == Scheme::WholelineFold);
    let direct = runs.iter().find(|r| r.scheme == Scheme::DirectReflect);
    if let (Some(f), Some(d)) = (fold, direct) {
        for (a, b) in f
            .snapshots
            .iter()
            .zip(&d.snapshots)
            .filter(|(a, _)| a.time > 0.0)
        {
            let dist = compare_densities(&a.density, &b.density, false)?;
            let tag = time_tag(a.time);
            m.push(
                "scheme-equivalence",
                format!("schemes.l1@t={tag}"),
                dist.l1,
                Some(Bound::AtMost(tol.scheme_l1)),
                format!("particle_fold_t{tag}.csv"),
            );
        }
    }
    Ok(())
}

fn compare_metrics(
    cfg: &ExperimentConfig,
    class: &DegeneracyClass,
    traj: &PdeTrajectory,
    run: &ParticleRun,
    dir: &RunDir,
    m: &mut Metrics,
) -> Result<()> {
    let tol = &cfg.tolerances;
    let bound = match class {
        DegeneracyClass::NonDegenerate { .. } => tol.particle_l1,
        _ => tol.particle_l1_degenerate,
    };
    let tag = scheme_tag(run.scheme);
    let mut csv = String::from("t,l1,w1,l1_exact\n");
    for snap in run.snapshots.iter().filter(|s| s.time > 0.0) {
        let pde = traj.at(snap.time)?;
        // the PDE density averaged onto the histogram cells
        let coarse = resample(&pde.u, *snap.density.grid())?;
        let d = compare_densities(&snap.density, &coarse, false)?;
        let tt = time_tag(snap.time);
        m.push(
            "particle-vs-pde",
            format!("compare.{tag}.l1@t={tt}"),
            d.l1,
            Some(Bound::AtMost(bound)),
            "compare.csv",
        );
        m.push(
            "particle-vs-pde",
            format!("compare.{tag}.w1@t={tt}"),
            d.w1,
            None,
            "compare.csv",
        );
        let mut exact_l1 = f64::NAN;
        if let Some(a) = initial_oracle(cfg) {
            let exact = images_indicator(*snap.density.grid(), a, snap.time)?;
            exact_l1 = compare_densities(&snap.density, &exact, false)?.l1;
            m.push(
                "particle-vs-pde",
                format!("compare.{tag}.l1_vs_images@t={tt}"),
                exact_l1,
                Some(Bound::AtMost(tol.particle_l1)),
                "compare.csv",
            );
        }
        let _ = writeln!(csv, "{},{},{},{}", snap.time, d.l1, d.w1, exact_l1);
    }
    dir.write("compare.csv", &csv)
}

#[derive(Serialize)]
struct ResidualsArtifact<'a> {
    coarse: &'a ResidualReport,
    refined: Option<&'a ResidualReport>,
    equivalence_constant: f64,
    cutoff_ladder: Vec<CutoffRung>,
    boundary_reference: f64,
}

fn verify_metrics(
    cfg: &ExperimentConfig,
    beta: &MonotoneGraph,
    traj: &PdeTrajectory,
    dir: &RunDir,
    m: &mut Metrics,
) -> Result<()> {
    let tol = &cfg.tolerances;
    let family: Vec<_> = standard_family()
        .into_iter()
        .take(cfg.verification.family_size)
        .collect();
    let times: Vec<f64> = cfg
        .snapshot_times()
        .into_iter()
        .filter(|&t| t > 0.0)
        .collect();
    let worst = |r: &ResidualReport| {
        r.max_abs(ResidualForm::Generalized)
            .max(r.max_abs(ResidualForm::Weak))
    };

    let coarse = residual_suite(traj, &family, &times)?;
    let c = equivalence_constant(traj, &family, &times)?;
    let max_coarse = worst(&coarse);
    m.push(
        "residual-suite",
        "verify.max_residual",
        max_coarse,
        Some(Bound::AtMost(tol.residual)),
        "residuals.json",
    );
    m.push(
        "residual-suite",
        "verify.equivalence_constant",
        c,
        None,
        "residuals.json",
    );

    let refined = if cfg.verification.refine {
        let fine_grid = Grid1D::half_line(cfg.domain.dx / 2.0, cfg.domain.x_max)?;
        let u0f = cfg.initial.build(fine_grid)?;
        let fine = solve_pde(cfg, beta, &u0f, cfg.time.dt / 2.0)?;
        let r = residual_suite(&fine, &family, &times)?;
        m.push(
            "residual-suite",
            "verify.max_residual_refined",
            worst(&r),
            None,
            "residuals.json",
        );
        m.push(
            "residual-suite",
            "verify.refinement_ratio",
            max_coarse / worst(&r),
            Some(Bound::AtLeast(tol.refinement_ratio)),
            "residuals.json",
        );
        Some(r)
    } else {
        None
    };

    // cutoff ladder on a test function with φ'(0) ≠ 0
    let t = cfg.time.t_final;
    let phi = make_bump(0.5, 1.0, false)?;
    let reference = boundary_form_residual(traj, &phi, t)?;
    let ladder = cutoff_ladder(traj, &phi, &cfg.verification.cutoff_ladder, t)?;
    if ladder.len() >= 2 {
        let step = |f: fn(&CutoffRung) -> f64| {
            ladder
                .windows(2)
                .map(|w| f(&w[1]) / f(&w[0]))
                .fold(0.0, f64::max)
        };
        m.push(
            "cutoff-ladder",
            "verify.cutoff_mass_gap_max_step_ratio",
            step(|r| r.mass_gap),
            Some(Bound::AtMost(1.0)),
            "residuals.json",
        );
        m.push(
            "cutoff-ladder",
            "verify.cutoff_flux_gap_max_step_ratio",
            step(|r| r.flux_gap),
            Some(Bound::AtMost(1.0)),
            "residuals.json",
        );
    }
    for r in &ladder {
        m.push(
            "cutoff-ladder",
            format!("verify.cutoff_flux_gap@eps={}", r.eps),
            r.flux_gap,
            None,
            "residuals.json",
        );
        m.push(
            "cutoff-ladder",
            format!("verify.cutoff_mass_gap@eps={}", r.eps),
            r.mass_gap,
            None,
            "residuals.json",
        );
    }
    let art = ResidualsArtifact {
        coarse: &coarse,
        refined: refined.as_ref(),
        equivalence_constant: c,
        cutoff_ladder: ladder,
        boundary_reference: reference,
    };
    dir.write("residuals.json", &serde_json::to_string_pretty(&art)?)
}

/// One run per value of the swept parameter, each in its own
/// subdirectory; metric names are prefixed with `parameter=value:`.
pub fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Report> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep", "missing [sweep] block"))?;
    let dir = RunDir::create(out)?;
    let points: Vec<(f64, ExperimentConfig)> = sweep
        .values
        .iter()
        .map(|&v| {
            cfg.with_override(&sweep.parameter, v)
                .map(|c| (v, ExperimentConfig { sweep: None, ..c }))
        })
        .collect::<Result<_>>()?;
    let reports: Vec<Report> = points
        .par_iter()
        .enumerate()
        .map(|(i, (_, c))| {
            run(c, &out.join(format!("point_{i:03}"))).map_err(|e| e.at_stage("sweep"))
        })
        .collect::<Result<_>>()?;
    let mut metrics = Vec::new();
    let mut csv = String::from("parameter,value,rule,name,metric,passed\n");
    for ((v, _), r) in points.iter().zip(&reports) {
        for x in &r.metrics {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                sweep.parameter,
                v,
                x.rule,
                x.name,
                x.value,
                x.passed.map_or(String::new(), |p| p.to_string())
            );
            metrics.push(Metric {
                name: format!("{}={}:{}", sweep.parameter, v, x.name),
                ..x.clone()
            });
        }
    }
    dir.write("sweep.csv", &csv)?;
    let report = Report {
        config: cfg.clone(),
        config_hash: config_hash(cfg)?,
        seed: cfg.seed,
        pde: None,
        route: None,
        particles: Vec::new(),
        passed: metrics.iter().all(|x| x.passed != Some(false)),
        metrics,
    };
    write_report(&dir, &report)?;
    Ok(report)
}
