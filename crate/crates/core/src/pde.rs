//! Implicit finite-volume solver for `∂t u = ½ ∂xx β(u)` on the half-line
//! with a zero-flux face at 0, or on a symmetric whole-line grid.
//!
//! Each step solves the cell balance
//! `u_i - λ Σ_j (η_j - η_i) = f_i`, `η_i ∈ β(u_i)`, `λ = dt / (2 dx²)`,
//! where `j` runs over the existing neighbours of `i`. Missing neighbours are
//! ghost cells carrying `η_ghost = η_i`, so every outer face has zero flux.
//!
//! The nonlinear system is solved either by nonlinear Gauss-Seidel with a
//! scalar resolvent per cell, or by a semismooth Newton iteration in the
//! variable `w = u + η` (`u = (I + β)^{-1} w`, `η = w - u`). Newton is the
//! default and falls back to Gauss-Seidel when it stalls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{validate_assumptions, MonotoneGraph};
use crate::mirror::{asymmetry, DensityField, Grid1D, GridKind, EVEN_TOL};
use crate::numerics::{normal_cdf, normal_pdf, normal_sf};

/// Gridded selection `η_i ∈ β(u_i)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EtaField {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    pub time: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    #[default]
    Newton,
    GaussSeidel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub method: SolverMethod,
    /// Stop when the sup-norm update or the balance residual drops below.
    pub tol: f64,
    pub max_sweeps: usize,
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: SolverMethod::Newton,
            tol: 1e-10,
            max_sweeps: 10_000,
            max_newton: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub iterations: usize,
    pub residual: f64,
    pub fell_back: bool,
}

const POLISH_STEPS: usize = 2;

/// Negative cell values below `-SCHEME_FAULT_TOL` abort the run.
pub const SCHEME_FAULT_TOL: f64 = 1e-10;

/// Reusable implicit stepper with a warm start.
pub struct ImplicitStepper<'a> {
    beta: &'a MonotoneGraph,
    grid: Grid1D,
    lambda: f64,
    opts: SolverOptions,
    w: Vec<f64>,
    work: Work,
    steps: usize,
    d0: f64,
}

#[derive(Default)]
struct Work {
    u: Vec<f64>,
    eta: Vec<f64>,
    d: Vec<f64>,
    r: Vec<f64>,
    ut: Vec<f64>,
    etat: Vec<f64>,
    dt: Vec<f64>,
    rt: Vec<f64>,
    wt: Vec<f64>,
    delta: Vec<f64>,
    tri: Tridiag,
}

impl<'a> ImplicitStepper<'a> {
    pub fn new(
        beta: &'a MonotoneGraph,
        grid: Grid1D,
        dt: f64,
        opts: SolverOptions,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("dt = {dt} must be positive")));
        }
        if grid.kind == GridKind::SymmetricWholeLine && grid.n % 2 != 0 {
            return Err(Error::Domain(
                "whole-line grid must have an even number of cells".into(),
            ));
        }
        let n = grid.n;
        let z = || vec![0.0; n];
        Ok(ImplicitStepper {
            beta,
            grid,
            lambda: dt / (2.0 * grid.dx * grid.dx),
            opts,
            w: Vec::new(),
            work: Work {
                u: z(),
                eta: z(),
                d: z(),
                r: z(),
                ut: z(),
                etat: z(),
                dt: z(),
                rt: z(),
                wt: z(),
                delta: z(),
                tri: Tridiag::new(n),
            },
            steps: 0,
            d0: beta.resolvent_with_slope(1.0, 0.0)?.2,
        })
    }

    /// Advance `f` by one step; returns `(u, η)`.
    pub fn step(&mut self, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>, StepStats)> {
        let n = self.grid.n;
        if f.len() != n {
            return Err(Error::GridMismatch(format!(
                "{} values for {n} cells",
                f.len()
            )));
        }
        self.steps += 1;
        if n == 1 {
            let eta = self.beta.eval(f[0].max(0.0))?.mid();
            return Ok((f.to_vec(), vec![eta], StepStats::default()));
        }
        if self.w.len() != n {
            self.w = f
                .iter()
                .map(|&v| {
                    let v = v.max(0.0);
                    v + self.beta.eval(v).map(|iv| iv.mid()).unwrap_or(0.0)
                })
                .collect();
        }
        let mut stats = StepStats::default();
        let eta = match self.opts.method {
            SolverMethod::Newton => match self.newton(f)? {
                Ok((it, res)) => {
                    stats.iterations = it;
                    stats.residual = res;
                    self.work.eta.clone()
                }
                Err((it, res)) => {
                    log::debug!(
                        "newton stalled at step {} (residual {res:e}), falling back",
                        self.steps
                    );
                    stats.fell_back = true;
                    let mut eta = self.work.eta.clone();
                    let (gs_it, gs_res) = self.gauss_seidel(f, &mut eta)?;
                    stats.iterations = it + gs_it;
                    stats.residual = gs_res;
                    eta
                }
            },
            SolverMethod::GaussSeidel => {
                let mut eta = self.work.eta.clone();
                if self.steps == 1 {
                    for (e, &w) in eta.iter_mut().zip(&self.w) {
                        *e = self.beta.resolvent(1.0, w.max(0.0))?.1;
                    }
                }
                let (it, res) = self.gauss_seidel(f, &mut eta)?;
                stats.iterations = it;
                stats.residual = res;
                eta
            }
        };
        let u = flux_form(f, &eta, self.lambda);
        for (i, &v) in u.iter().enumerate() {
            if v < -SCHEME_FAULT_TOL || !v.is_finite() {
                return Err(Error::SchemeFault {
                    step: self.steps,
                    cell: i,
                    value: v,
                });
            }
        }
        for i in 0..n {
            self.w[i] = u[i].max(0.0) + eta[i];
        }
        self.work.eta.copy_from_slice(&eta);
        Ok((u, eta, stats))
    }

    /// Ok((iterations, residual)) on convergence, inner Err on a stall.
    #[allow(clippy::type_complexity)]
    fn newton(&mut self, f: &[f64]) -> Result<std::result::Result<(usize, f64), (usize, f64)>> {
        let lambda = self.lambda;
        let tol = self.opts.tol;
        let beta = self.beta;
        let wk = &mut self.work;
        eval_state(beta, self.d0, &self.w, &mut wk.u, &mut wk.eta, &mut wk.d)?;
        let mut norm = residual(f, &wk.u, &wk.eta, lambda, &mut wk.r);
        let mut polish = 0;
        for it in 0..self.opts.max_newton {
            if norm <= tol {
                // quadratic convergence makes a couple of extra steps cheap
                polish += 1;
                if polish > POLISH_STEPS || norm == 0.0 {
                    return Ok(Ok((it, norm)));
                }
            }
            let n = f.len();
            for i in 0..n {
                let k = (i > 0) as usize + (i + 1 < n) as usize;
                wk.tri.b[i] = wk.d[i] + lambda * k as f64 * (1.0 - wk.d[i]);
                wk.tri.a[i] = if i > 0 {
                    -lambda * (1.0 - wk.d[i - 1])
                } else {
                    0.0
                };
                wk.tri.c[i] = if i + 1 < n {
                    -lambda * (1.0 - wk.d[i + 1])
                } else {
                    0.0
                };
                wk.delta[i] = -wk.r[i];
            }
            if !wk.tri.solve_twisted(&mut wk.delta) {
                return Ok(Err((it, norm)));
            }
            let mut s = 1.0;
            loop {
                for i in 0..n {
                    wk.wt[i] = self.w[i] + s * wk.delta[i];
                }
                eval_state(beta, self.d0, &wk.wt, &mut wk.ut, &mut wk.etat, &mut wk.dt)?;
                let nt = residual(f, &wk.ut, &wk.etat, lambda, &mut wk.rt);
                if nt <= (1.0 - 1e-4 * s) * norm || nt <= tol {
                    std::mem::swap(&mut self.w, &mut wk.wt);
                    std::mem::swap(&mut wk.u, &mut wk.ut);
                    std::mem::swap(&mut wk.eta, &mut wk.etat);
                    std::mem::swap(&mut wk.d, &mut wk.dt);
                    std::mem::swap(&mut wk.r, &mut wk.rt);
                    norm = nt;
                    break;
                }
                s *= 0.5;
                if s < 1e-6 {
                    return Ok(if norm <= tol {
                        Ok((it, norm))
                    } else {
                        Err((it, norm))
                    });
                }
            }
        }
        if norm <= tol {
            Ok(Ok((self.opts.max_newton, norm)))
        } else {
            Ok(Err((self.opts.max_newton, norm)))
        }
    }

    /// Nonlinear Gauss-Seidel on `η`. On symmetric grids cells are visited
    /// in mirror pairs from the centre outward and both cells of a pair are
    /// updated from the same state, which keeps the iterates exactly even.
    fn gauss_seidel(&self, f: &[f64], eta: &mut [f64]) -> Result<(usize, f64)> {
        let n = f.len();
        let lambda = self.lambda;
        let mut u = vec![0.0; n];
        let mut r = vec![0.0; n];
        let pairs: Vec<(usize, Option<usize>)> = match self.grid.kind {
            GridKind::HalfLine => (0..n).map(|i| (i, None)).collect(),
            GridKind::SymmetricWholeLine => {
                let m = n / 2;
                (0..m).map(|p| (m - 1 - p, Some(m + p))).collect()
            }
        };
        let solve_cell = |i: usize, eta: &[f64]| -> Result<(f64, f64)> {
            let mut nb = 0.0;
            let mut k = 0.0;
            if i > 0 {
                nb += eta[i - 1];
                k += 1.0;
            }
            if i + 1 < n {
                nb += eta[i + 1];
                k += 1.0;
            }
            if k == 0.0 {
                return Ok((f[i], self.beta.eval(f[i].max(0.0))?.mid()));
            }
            let y = (f[i] + lambda * nb).max(0.0);
            self.beta.resolvent(lambda * k, y)
        };
        let mut last = (0.0, f64::INFINITY);
        for sweep in 1..=self.opts.max_sweeps {
            let mut update: f64 = 0.0;
            for &(i, j) in &pairs {
                let (ui, ei) = solve_cell(i, eta)?;
                let other = match j {
                    Some(j) => Some((j, solve_cell(j, eta)?)),
                    None => None,
                };
                update = update.max((ei - eta[i]).abs());
                eta[i] = ei;
                u[i] = ui;
                if let Some((j, (uj, ej))) = other {
                    update = update.max((ej - eta[j]).abs());
                    eta[j] = ej;
                    u[j] = uj;
                }
            }
            let res = residual(f, &u, eta, lambda, &mut r);
            last = (update, res);
            if update < self.opts.tol || res < self.opts.tol {
                return Ok((sweep, res));
            }
        }
        Err(Error::NoConvergence {
            sweeps: self.opts.max_sweeps,
            residual: last.1,
            update: last.0,
        })
    }
}

/// `u = J(w)`, `η = w - u`, `d = J'(w)`. Below 0 the graph is continued
/// linearly with its right slope at 0.
fn eval_state(
    beta: &MonotoneGraph,
    d0: f64,
    w: &[f64],
    u: &mut [f64],
    eta: &mut [f64],
    d: &mut [f64],
) -> Result<()> {
    for i in 0..w.len() {
        if w[i] <= 0.0 {
            u[i] = d0 * w[i];
            eta[i] = w[i] - u[i];
            d[i] = d0;
        } else {
            let (ui, ei, di) = beta.resolvent_with_slope(1.0, w[i])?;
            u[i] = ui;
            eta[i] = ei;
            d[i] = di;
        }
    }
    Ok(())
}

/// Discrete `Σ_j (η_j - η_i)` over existing neighbours.
#[inline]
fn lap(eta: &[f64], i: usize) -> f64 {
    let left = if i > 0 { eta[i - 1] - eta[i] } else { 0.0 };
    let right = if i + 1 < eta.len() {
        eta[i + 1] - eta[i]
    } else {
        0.0
    };
    left + right
}

fn residual(f: &[f64], u: &[f64], eta: &[f64], lambda: f64, r: &mut [f64]) -> f64 {
    let mut norm: f64 = 0.0;
    for i in 0..f.len() {
        r[i] = u[i] - lambda * lap(eta, i) - f[i];
        norm = norm.max(r[i].abs());
    }
    norm
}

/// `u_i = f_i + λ Σ_j (η_j - η_i)`: conservative reconstruction of `u`.
fn flux_form(f: &[f64], eta: &[f64], lambda: f64) -> Vec<f64> {
    (0..f.len()).map(|i| f[i] + lambda * lap(eta, i)).collect()
}

/// Tridiagonal system solved from both ends toward the middle, so a
/// mirror-symmetric system gets a bit-for-bit mirror-symmetric solution.
#[derive(Default)]
struct Tridiag {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    bp: Vec<f64>,
}

impl Tridiag {
    fn new(n: usize) -> Self {
        Tridiag {
            a: vec![0.0; n],
            b: vec![0.0; n],
            c: vec![0.0; n],
            bp: vec![0.0; n],
        }
    }

    /// Solves in place; false on a zero or non-finite pivot.
    fn solve_twisted(&mut self, r: &mut [f64]) -> bool {
        let n = r.len();
        if n == 1 {
            r[0] /= self.b[0];
            return r[0].is_finite();
        }
        let m = n / 2;
        let (a, b, c, bp) = (&self.a, &self.b, &self.c, &mut self.bp);
        let ok = |p: f64| p != 0.0 && p.is_finite();
        // rows 0..m from the left: bp_i x_i + c_i x_{i+1} = r_i
        bp[0] = b[0];
        for i in 1..m {
            if !ok(bp[i - 1]) {
                return false;
            }
            let l = a[i] / bp[i - 1];
            bp[i] = b[i] - l * c[i - 1];
            r[i] -= l * r[i - 1];
        }
        // rows from the right down to the first row after the middle:
        // a_i x_{i-1} + bp_i x_i = r_i
        let right_end = if n % 2 == 0 { m } else { m + 1 };
        bp[n - 1] = b[n - 1];
        for i in (right_end..n - 1).rev() {
            if !ok(bp[i + 1]) {
                return false;
            }
            let l = c[i] / bp[i + 1];
            bp[i] = b[i] - l * a[i + 1];
            r[i] -= l * r[i + 1];
        }
        if n % 2 == 0 {
            // 2x2 block on rows m-1, m
            let (p, q, s, t) = (bp[m - 1], c[m - 1], a[m], bp[m]);
            let det = p * t - q * s;
            if !ok(det) {
                return false;
            }
            let (r0, r1) = (r[m - 1], r[m]);
            r[m - 1] = (r0 * t - q * r1) / det;
            r[m] = (p * r1 - s * r0) / det;
        } else {
            // middle row m couples to reduced rows m-1 and m+1
            if !ok(bp[m - 1]) || !ok(bp[m + 1]) {
                return false;
            }
            let gl = a[m] / bp[m - 1];
            let gr = c[m] / bp[m + 1];
            let piv = b[m] - gl * c[m - 1] - gr * a[m + 1];
            if !ok(piv) {
                return false;
            }
            r[m] = (r[m] - gl * r[m - 1] - gr * r[m + 1]) / piv;
        }
        let left_start = if n % 2 == 0 { m - 1 } else { m };
        for i in (0..left_start).rev() {
            r[i] = (r[i] - c[i] * r[i + 1]) / bp[i];
        }
        for i in m + 1..n {
            r[i] = (r[i] - a[i] * r[i - 1]) / bp[i];
        }
        r.iter().all(|v| v.is_finite())
    }
}

/// One implicit step with default solver options.
pub fn step_implicit(
    u_n: &DensityField,
    beta: &MonotoneGraph,
    dt: f64,
) -> Result<(DensityField, EtaField)> {
    let mut st = ImplicitStepper::new(beta, *u_n.grid(), dt, SolverOptions::default())?;
    let (u, eta, _) = st.step(u_n.values())?;
    let t = u_n.time() + dt;
    let grid = *u_n.grid();
    Ok((
        DensityField::new(grid, u, t)?,
        EtaField {
            grid,
            values: eta,
            time: t,
        },
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub u: DensityField,
    pub eta: EtaField,
    /// `Σ_{k ≤ step} dt η_k` per cell: the time integral of `η` by the
    /// right-endpoint rule, which is the quadrature the implicit step obeys.
    pub eta_time_integral: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ConservationLedger {
    pub mass0: f64,
    pub max_mass_deviation: f64,
    pub min_value: f64,
    pub max_asymmetry: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolverTotals {
    pub steps: usize,
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub fallbacks: usize,
    pub max_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PdeTrajectory {
    pub grid: Grid1D,
    pub dt: f64,
    pub beta_label: String,
    pub snapshots: Vec<Snapshot>,
    pub conservation: ConservationLedger,
    pub solver: SolverTotals,
}

impl PdeTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn initial(&self) -> &Snapshot {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().unwrap()
    }

    /// Snapshot at time `t` (to within half a step).
    pub fn at(&self, t: f64) -> Result<&Snapshot> {
        self.snapshots
            .iter()
            .find(|s| (s.time - t).abs() <= 0.5 * self.dt)
            .ok_or_else(|| Error::Domain(format!("no snapshot at t = {t}")))
    }

    /// Largest `sup_i |u_i(t) - u_i(0)|` over the snapshots.
    pub fn sup_change(&self) -> f64 {
        let u0 = self.snapshots[0].u.values();
        self.snapshots
            .iter()
            .flat_map(|s| s.u.values().iter().zip(u0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub t_final: f64,
    pub dt: f64,
    pub snapshot_times: Vec<f64>,
    pub solver: SolverOptions,
    pub skip_validation: bool,
}

impl SolveOptions {
    pub fn new(t_final: f64, dt: f64) -> Self {
        SolveOptions {
            t_final,
            dt,
            snapshot_times: vec![t_final],
            solver: SolverOptions::default(),
            skip_validation: false,
        }
    }

    pub fn snapshots(mut self, times: &[f64]) -> Self {
        self.snapshot_times = times.to_vec();
        self
    }

    pub fn solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn skip_validation(mut self, skip: bool) -> Self {
        self.skip_validation = skip;
        self
    }
}

/// Number of steps and the step actually used to land on `t_final`.
pub fn step_count(t_final: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("dt = {dt} must be positive")));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::Domain(format!("T = {t_final} must be >= 0")));
    }
    let r = t_final / dt;
    let k = r.round();
    let n = if (r - k).abs() <= 1e-9 * r.max(1.0) {
        k
    } else {
        r.ceil()
    } as usize;
    Ok((n, if n == 0 { dt } else { t_final / n as f64 }))
}

pub fn solve(
    u0: &DensityField,
    beta: &MonotoneGraph,
    opts: &SolveOptions,
) -> Result<PdeTrajectory> {
    if !opts.skip_validation {
        let rep = validate_assumptions(beta, u0, None);
        if !rep.passed() {
            let msg = rep
                .failures()
                .iter()
                .map(|c| format!("{} ({})", c.name, c.detail))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::Validation(msg));
        }
    }
    let (n_steps, dt) = step_count(opts.t_final, opts.dt)?;
    let mut snap_steps: Vec<usize> = Vec::new();
    for &t in &opts.snapshot_times {
        if !(0.0..=opts.t_final * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::Domain(format!(
                "snapshot time {t} outside [0, {}]",
                opts.t_final
            )));
        }
        snap_steps.push(((t / dt).round() as usize).min(n_steps));
    }
    snap_steps.sort_unstable();
    snap_steps.dedup();

    let grid = *u0.grid();
    let even = grid.kind == GridKind::SymmetricWholeLine;
    let mut stepper = ImplicitStepper::new(beta, grid, dt, opts.solver)?;
    let eta0: Vec<f64> = u0
        .values()
        .iter()
        .map(|&v| beta.eval(v.max(0.0)).map(|iv| iv.mid()))
        .collect::<Result<_>>()?;
    let mut h = vec![0.0; grid.n];
    let mut ledger = ConservationLedger {
        mass0: u0.mass(),
        max_mass_deviation: 0.0,
        min_value: u0.min(),
        max_asymmetry: if even {
            Some(asymmetry(&grid, u0.values())?)
        } else {
            None
        },
    };
    let mut totals = SolverTotals::default();
    let mut snapshots = vec![Snapshot {
        step: 0,
        time: u0.time(),
        u: u0.clone(),
        eta: EtaField {
            grid,
            values: eta0,
            time: u0.time(),
        },
        eta_time_integral: h.clone(),
    }];
    let mut u = u0.values().to_vec();
    for k in 1..=n_steps {
        let (un, eta, stats) = stepper.step(&u)?;
        totals.steps += 1;
        totals.total_iterations += stats.iterations;
        totals.max_iterations = totals.max_iterations.max(stats.iterations);
        totals.fallbacks += stats.fell_back as usize;
        totals.max_residual = totals.max_residual.max(stats.residual);
        for (hi, e) in h.iter_mut().zip(&eta) {
            *hi += dt * e;
        }
        let mass = un.iter().sum::<f64>() * grid.dx;
        ledger.max_mass_deviation = ledger.max_mass_deviation.max((mass - ledger.mass0).abs());
        ledger.min_value = un.iter().cloned().fold(ledger.min_value, f64::min);
        if even {
            let a = asymmetry(&grid, &un)?;
            if a > EVEN_TOL {
                return Err(Error::NotEven {
                    asymmetry: a,
                    tolerance: EVEN_TOL,
                });
            }
            ledger.max_asymmetry = ledger.max_asymmetry.map(|m| m.max(a));
        }
        u = un;
        if snap_steps.binary_search(&k).is_ok() {
            let t = u0.time() + k as f64 * dt;
            snapshots.push(Snapshot {
                step: k,
                time: t,
                u: DensityField::new(grid, u.clone(), t)?,
                eta: EtaField {
                    grid,
                    values: eta,
                    time: t,
                },
                eta_time_integral: h.clone(),
            });
        }
    }
    Ok(PdeTrajectory {
        grid,
        dt,
        beta_label: beta.label().to_string(),
        snapshots,
        conservation: ledger,
        solver: totals,
    })
}

/// Slack in `u` when testing `η ∈ β(u)`: the flux-form `u` differs from the
/// resolvent's `u` by the solver tolerance, which matters next to a jump.
pub const SELECTION_SLACK: f64 = 1e-8;

/// Largest distance of `η_i` from the filled graph over `[u_i - s, u_i + s]`.
pub fn selection_violation(u: &DensityField, eta: &EtaField, beta: &MonotoneGraph) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (&ui, &ei) in u.values().iter().zip(&eta.values) {
        let lo = beta.eval((ui - SELECTION_SLACK).max(0.0))?.lo;
        let hi = beta.eval(ui.max(0.0) + SELECTION_SLACK)?.hi;
        worst = worst.max(lo - ei).max(ei - hi);
    }
    Ok(worst)
}

/// Flux `-½ (η_ghost - η_0)/dx` across the face at 0. The ghost cell makes
/// it vanish identically.
pub fn boundary_flux(eta: &EtaField) -> Result<f64> {
    if eta.grid.kind != GridKind::HalfLine {
        return Err(Error::Domain(
            "a whole-line field has no boundary face".into(),
        ));
    }
    let e0 = eta.values[0];
    let ghost = e0;
    Ok(-0.5 * (e0 - ghost) / eta.grid.dx)
}

/// Flux `-½ (η_face - η_{face-1})/dx` across the interior face left of
/// cell `face`.
pub fn interior_face_flux(eta: &EtaField, face: usize) -> Result<f64> {
    if face == 0 || face >= eta.values.len() {
        return Err(Error::Domain(format!("face {face} is not interior")));
    }
    Ok(-0.5 * (eta.values[face] - eta.values[face - 1]) / eta.grid.dx)
}

/// `Σ |η_{i+1} - η_i|`: discrete total variation of `η`, the quantity that
/// stays bounded when `η` has a locally integrable derivative.
pub fn eta_variation(eta: &EtaField) -> f64 {
    eta.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

pub fn mass(u: &DensityField) -> f64 {
    u.mass()
}

/// Right end `X` beyond which the heat bound `2 Q((X - a)/√(cT))` on the
/// escaped mass is below `tol`.
pub fn truncation_extent(support_end: f64, t_final: f64, growth: f64, tol: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 40.0);
    for _ in 0..200 {
        let z = 0.5 * (lo + hi);
        if 2.0 * normal_sf(z) < tol {
            hi = z;
        } else {
            lo = z;
        }
    }
    support_end + hi * (growth * t_final).sqrt()
}

/// Cell averages of the reflected heat solution with `u0 = 1_[0,a]`:
/// `v(t,x) = N((x+a)/√t) - N((x-a)/√t)`.
pub fn images_indicator(grid: Grid1D, a: f64, t: f64) -> Result<DensityField> {
    if grid.kind != GridKind::HalfLine {
        return Err(Error::Domain(
            "images solution lives on the half-line".into(),
        ));
    }
    let s = t.sqrt();
    // ∫ N(z) dz = z N(z) + n(z)
    let prim = |z: f64| z * normal_cdf(z) + normal_pdf(z);
    let values = (0..grid.n)
        .map(|i| {
            let (x0, x1) = (i as f64 * grid.dx, (i + 1) as f64 * grid.dx);
            let p = |c: f64| s * (prim((x1 + c) / s) - prim((x0 + c) / s));
            ((p(a) - p(-a)) / grid.dx).max(0.0)
        })
        .collect();
    DensityField::new(grid, values, t)
}
