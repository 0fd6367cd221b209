//! Test functions and the integral identities a solution must satisfy.
//!
//! With `H(t, x) = ∫_0^t η(s, x) ds` the three residuals at time `t` are
//!
//! * generalized: `∫φ u(t) - ∫φ u0 - ½ ∫φ'' H`, for `φ'(0) = 0`;
//! * weak: `∫φ u(t) - ∫φ u0 + ½ ∫φ' ∂x H`;
//! * boundary form: `∫φ u(t) - ∫φ u0 - ½ φ'(0) H(t, 0) - ½ ∫φ'' H`.
//!
//! The last two agree by one integration by parts and reduce to the first
//! when `φ'(0) = 0`.

use std::fmt;
use std::ops::Neg;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mirror::GridKind;
use crate::numerics::{integrate, Jet};
use crate::pde::{PdeTrajectory, Snapshot};

type JetFn = dyn Fn(f64) -> Jet + Send + Sync;

/// A compactly supported smooth function with exact first and second
/// derivatives.
#[derive(Clone)]
pub struct TestFunction {
    pub id: String,
    eval: Arc<JetFn>,
    pub support: (f64, f64),
    pub derivative_zero_at_origin: bool,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("id", &self.id)
            .field("support", &self.support)
            .field("derivative_zero_at_origin", &self.derivative_zero_at_origin)
            .finish()
    }
}

impl TestFunction {
    pub fn new<F>(id: impl Into<String>, support: (f64, f64), f: F) -> Self
    where
        F: Fn(f64) -> Jet + Send + Sync + 'static,
    {
        let d0 = f(0.0).d1;
        let scale = f(0.5 * (support.0 + support.1)).v.abs().max(1.0);
        TestFunction {
            id: id.into(),
            eval: Arc::new(f),
            support,
            derivative_zero_at_origin: d0.abs() <= 1e-13 * scale,
        }
    }

    /// `(φ, φ', φ'')` at `x`.
    #[inline]
    pub fn jet(&self, x: f64) -> Jet {
        (self.eval)(x)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.jet(x).v
    }

    pub fn d1(&self, x: f64) -> f64 {
        self.jet(x).d1
    }

    pub fn d2(&self, x: f64) -> f64 {
        self.jet(x).d2
    }
}

/// `exp(-1/(1 - s^2))` for `|s| < 1`, zero otherwise.
fn bump_jet(s: Jet) -> Jet {
    if s.v.abs() >= 1.0 {
        return Jet::constant(0.0);
    }
    (Jet::constant(1.0) - s.sqr()).recip().neg().exp()
}

/// Standard bump on `[center - radius, center + radius]`. With
/// `flat_at_zero` and a support reaching past 0 the function is replaced
/// by its symmetrisation `b(x) + b(-x)`, whose derivative vanishes at 0.
pub fn make_bump(center: f64, radius: f64, flat_at_zero: bool) -> Result<TestFunction> {
    if !(radius > 0.0 && radius.is_finite() && center.is_finite()) {
        return Err(Error::Domain(format!(
            "bump radius {radius} must be positive"
        )));
    }
    let hi = center + radius;
    if hi <= 0.0 {
        return Err(Error::Domain(format!(
            "bump support [{}, {hi}] misses the half-line",
            center - radius
        )));
    }
    let id = format!(
        "bump({center},{radius}{})",
        if flat_at_zero { ",flat" } else { "" }
    );
    let b = move |x: f64| bump_jet((Jet::var(x) - Jet::constant(center)).scale(1.0 / radius));
    let support = ((center - radius).max(0.0), hi);
    if flat_at_zero && center - radius < 0.0 {
        Ok(TestFunction::new(
            id,
            (0.0, hi.max(radius - center)),
            move |x| {
                let m = b(-x);
                b(x) + Jet {
                    v: m.v,
                    d1: -m.d1,
                    d2: m.d2,
                }
            },
        ))
    } else {
        Ok(TestFunction::new(id, support, b))
    }
}

/// Smooth plateau: 1 on `[0, flat]`, 0 beyond `flat + ramp`.
pub fn make_plateau(flat: f64, ramp: f64) -> Result<TestFunction> {
    if !(flat >= 0.0 && ramp > 0.0) {
        return Err(Error::Domain("plateau needs flat >= 0 and ramp > 0".into()));
    }
    let e = |s: Jet| {
        if s.v <= 0.0 {
            Jet::constant(0.0)
        } else {
            s.recip().neg().exp()
        }
    };
    Ok(TestFunction::new(
        format!("plateau({flat},{ramp})"),
        (0.0, flat + ramp),
        move |x| {
            let s = (Jet::var(x) - Jet::constant(flat)).scale(1.0 / ramp);
            if s.v <= 0.0 {
                return Jet::constant(1.0);
            }
            if s.v >= 1.0 {
                return Jet::constant(0.0);
            }
            let a = e(Jet::constant(1.0) - s);
            a / (a + e(s))
        },
    ))
}

/// Twelve admissible test functions (`φ'(0) = 0`) covering the boundary
/// layer, the bulk and the tail of a unit-scale solution.
pub fn standard_family() -> Vec<TestFunction> {
    let specs: [(f64, f64, bool); 11] = [
        (0.0, 0.5, true),
        (0.0, 1.0, true),
        (0.0, 2.0, true),
        (0.3, 0.8, true),
        (0.5, 0.5, false),
        (1.0, 0.5, false),
        (1.0, 1.0, false),
        (1.5, 0.7, false),
        (2.0, 1.0, false),
        (2.5, 0.5, false),
        (3.0, 1.5, false),
    ];
    let mut fam: Vec<TestFunction> = specs
        .iter()
        .map(|&(c, r, flat)| make_bump(c, r, flat).expect("valid bump"))
        .collect();
    fam.push(make_plateau(1.0, 1.5).expect("valid plateau"));
    fam
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualForm {
    Generalized,
    Weak,
    BoundaryCorrected,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualEntry {
    pub form: ResidualForm,
    pub phi_id: String,
    pub t: f64,
    pub value: f64,
    pub dx: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
    pub quadrature: &'static str,
}

impl ResidualReport {
    pub fn max_abs(&self, form: ResidualForm) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.form == form)
            .map(|e| e.value.abs())
            .fold(0.0, f64::max)
    }
}

struct Sampled {
    phi: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

fn sample(traj: &PdeTrajectory, phi: &TestFunction) -> Result<Sampled> {
    if traj.grid.kind != GridKind::HalfLine {
        return Err(Error::Domain(
            "residuals are defined for half-line trajectories".into(),
        ));
    }
    let mut s = Sampled {
        phi: Vec::with_capacity(traj.grid.n),
        d1: Vec::with_capacity(traj.grid.n),
        d2: Vec::with_capacity(traj.grid.n),
    };
    for x in traj.grid.centers() {
        let j = phi.jet(x);
        s.phi.push(j.v);
        s.d1.push(j.d1);
        s.d2.push(j.d2);
    }
    Ok(s)
}

/// `∫φ (u(t) - u0)` by the midpoint rule.
fn mass_change(traj: &PdeTrajectory, snap: &Snapshot, phi: &[f64]) -> f64 {
    let u0 = traj.initial().u.values();
    let ut = snap.u.values();
    (0..phi.len())
        .map(|i| phi[i] * (ut[i] - u0[i]))
        .sum::<f64>()
        * traj.grid.dx
}

fn second_order_term(phi2: &[f64], h: &[f64], dx: f64) -> f64 {
    0.5 * phi2.iter().zip(h).map(|(p, h)| p * h).sum::<f64>() * dx
}

pub fn generalized_residual(traj: &PdeTrajectory, phi: &TestFunction, t: f64) -> Result<f64> {
    if !phi.derivative_zero_at_origin {
        return Err(Error::Precondition(format!(
            "{} has phi'(0) = {} != 0",
            phi.id,
            phi.d1(0.0)
        )));
    }
    let snap = traj.at(t)?;
    let s = sample(traj, phi)?;
    Ok(mass_change(traj, snap, &s.phi)
        - second_order_term(&s.d2, &snap.eta_time_integral, traj.grid.dx))
}

pub fn weak_residual(traj: &PdeTrajectory, phi: &TestFunction, t: f64) -> Result<f64> {
    let snap = traj.at(t)?;
    let s = sample(traj, phi)?;
    let h = &snap.eta_time_integral;
    let n = h.len();
    let dx = traj.grid.dx;
    let dh = |i: usize| -> f64 {
        if n == 1 {
            0.0
        } else if i == 0 {
            (h[1] - h[0]) / dx
        } else if i == n - 1 {
            (h[n - 1] - h[n - 2]) / dx
        } else {
            (h[i + 1] - h[i - 1]) / (2.0 * dx)
        }
    };
    let grad: f64 = (0..n).map(|i| s.d1[i] * dh(i)).sum::<f64>() * dx;
    Ok(mass_change(traj, snap, &s.phi) + 0.5 * grad)
}

/// `H(t, 0)` is read from the first cell.
pub fn boundary_form_residual(traj: &PdeTrajectory, phi: &TestFunction, t: f64) -> Result<f64> {
    let snap = traj.at(t)?;
    let s = sample(traj, phi)?;
    let h = &snap.eta_time_integral;
    let boundary = if phi.derivative_zero_at_origin {
        0.0
    } else {
        0.5 * phi.d1(0.0) * h[0]
    };
    Ok(mass_change(traj, snap, &s.phi) - boundary - second_order_term(&s.d2, h, traj.grid.dx))
}

/// All three forms for every function and snapshot time (the generalized
/// form only where admissible).
pub fn residual_suite(
    traj: &PdeTrajectory,
    family: &[TestFunction],
    times: &[f64],
) -> Result<ResidualReport> {
    let mut entries = Vec::new();
    let mk = |form, phi: &TestFunction, t, value| ResidualEntry {
        form,
        phi_id: phi.id.clone(),
        t,
        value,
        dx: traj.grid.dx,
        dt: traj.dt,
    };
    for &t in times {
        for phi in family {
            if phi.derivative_zero_at_origin {
                entries.push(mk(
                    ResidualForm::Generalized,
                    phi,
                    t,
                    generalized_residual(traj, phi, t)?,
                ));
            }
            entries.push(mk(ResidualForm::Weak, phi, t, weak_residual(traj, phi, t)?));
            entries.push(mk(
                ResidualForm::BoundaryCorrected,
                phi,
                t,
                boundary_form_residual(traj, phi, t)?,
            ));
        }
    }
    Ok(ResidualReport {
        entries,
        quadrature: "midpoint in space, right-endpoint sum over solver steps in time",
    })
}

/// `max |generalized - weak| / dx` over admissible functions and times.
pub fn equivalence_constant(
    traj: &PdeTrajectory,
    family: &[TestFunction],
    times: &[f64],
) -> Result<f64> {
    let mut c: f64 = 0.0;
    for &t in times {
        for phi in family.iter().filter(|p| p.derivative_zero_at_origin) {
            let g = generalized_residual(traj, phi, t)?;
            let w = weak_residual(traj, phi, t)?;
            c = c.max((g - w).abs() / traj.grid.dx);
        }
    }
    Ok(c)
}

#[derive(Clone, Debug, Serialize)]
pub struct CutoffRung {
    pub eps: f64,
    pub mass_gap: f64,
    pub flux_gap: f64,
    /// Generalized residual of `φ_ε`.
    pub residual: f64,
}

/// Term-by-term approach of `φ_ε` to `φ` at time `t`, widest `ε` first:
/// `mass_gap = |∫(φ_ε - φ)(u_t - u_0)|` and
/// `flux_gap = |½∫(φ_ε'' - φ'')H - ½φ'(0)H(t, 0)|`. Both vanish as `ε → 0`
/// for any solution, whereas the residuals themselves only carry the
/// discretization error.
pub fn cutoff_ladder(
    traj: &PdeTrajectory,
    phi: &TestFunction,
    eps: &[f64],
    t: f64,
) -> Result<Vec<CutoffRung>> {
    let snap = traj.at(t)?;
    let base = sample(traj, phi)?;
    let h = &snap.eta_time_integral;
    let dx = traj.grid.dx;
    let mut eps = eps.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.into_iter()
        .map(|e| {
            let pe = cutoff_transform(phi, e)?;
            let s = sample(traj, &pe)?;
            let dphi: Vec<f64> = s.phi.iter().zip(&base.phi).map(|(a, b)| a - b).collect();
            let dphi2: Vec<f64> = s.d2.iter().zip(&base.d2).map(|(a, b)| a - b).collect();
            Ok(CutoffRung {
                eps: e,
                mass_gap: mass_change(traj, snap, &dphi).abs(),
                flux_gap: (second_order_term(&dphi2, h, dx) - 0.5 * phi.d1(0.0) * h[0]).abs(),
                residual: generalized_residual(traj, &pe, t)?,
            })
        })
        .collect()
}

/// Quintic smoothstep from 0 at `ε` to 1 at `2ε`, with two derivatives.
pub fn cutoff_ramp(x: f64, eps: f64) -> Jet {
    let s = (x - eps) / eps;
    if s <= 0.0 {
        return Jet::constant(0.0);
    }
    if s >= 1.0 {
        return Jet::constant(1.0);
    }
    let v = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    let d1 = 30.0 * s * s * (1.0 - s) * (1.0 - s) / eps;
    let d2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (eps * eps);
    Jet { v, d1, d2 }
}

/// `φ_ε' = χ_ε φ'` with the constant fixed so that `φ_ε = φ` beyond `2ε`:
/// `φ_ε(x) = φ(x) + ∫_x^{2ε} (1 - χ_ε) φ'`.
pub fn cutoff_transform(phi: &TestFunction, eps: f64) -> Result<TestFunction> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!(
            "cutoff width {eps} must be positive"
        )));
    }
    let inner = phi.clone();
    let id = format!("{}~cut({eps})", phi.id);
    let support = (phi.support.0, phi.support.1.max(2.0 * eps));
    let f = move |x: f64| {
        let j = inner.jet(x);
        let chi = cutoff_ramp(x, eps);
        let mut v = j.v;
        if x < 2.0 * eps {
            let g = |y: f64| (1.0 - cutoff_ramp(y, eps).v) * inner.d1(y);
            v += if x < eps {
                integrate(g, x, eps, 4) + integrate(g, eps, 2.0 * eps, 4)
            } else {
                integrate(g, x, 2.0 * eps, 4)
            };
        }
        Jet {
            v,
            d1: chi.v * j.d1,
            d2: chi.d1 * j.d1 + chi.v * j.d2,
        }
    };
    let mut out = TestFunction::new(id, support, f);
    out.derivative_zero_at_origin = true;
    Ok(out)
}

fn rho_raw(z: f64) -> f64 {
    if z.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - z * z)).exp()
    }
}

fn rho_norm() -> f64 {
    static Z: OnceLock<f64> = OnceLock::new();
    *Z.get_or_init(|| integrate(rho_raw, -1.0, 1.0, 64))
}

/// Normalised even mollifier on `(-1, 1)`.
pub fn rho(z: f64) -> f64 {
    rho_raw(z) / rho_norm()
}

/// `ρ_ε ⋆ φ̄` with `φ̄(x) = φ(|x|)`, a function on the whole line.
///
/// Derivatives are convolved directly: `φ̄' = sign(x) φ'(|x|)` and
/// `φ̄'' = φ''(|x|) + 2 φ'(0) δ_0`.
pub fn mollify_even(phi: &TestFunction, eps: f64) -> Result<TestFunction> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!(
            "mollifier width {eps} must be positive"
        )));
    }
    let inner = phi.clone();
    let kink = phi.d1(0.0);
    let reach = phi.support.1 + eps;
    let f = move |x: f64| {
        let acc = |z: f64| {
            let y = x - eps * z;
            let j = inner.jet(y.abs());
            let w = rho(z);
            (w * j.v, w * y.signum() * j.d1, w * j.d2)
        };
        // split at the kink of φ̄ when it falls inside the kernel
        let zk = x / eps;
        let parts: Vec<(f64, f64)> = if zk > -1.0 && zk < 1.0 {
            vec![(-1.0, zk), (zk, 1.0)]
        } else {
            vec![(-1.0, 1.0)]
        };
        let mut out = Jet::constant(0.0);
        for (a, b) in parts {
            out.v += integrate(|z| acc(z).0, a, b, 24);
            out.d1 += integrate(|z| acc(z).1, a, b, 24);
            out.d2 += integrate(|z| acc(z).2, a, b, 24);
        }
        out.d2 += 2.0 * kink * rho(x / eps) / eps;
        out
    };
    let mut out = TestFunction::new(format!("{}~moll({eps})", phi.id), (-reach, reach), f);
    out.derivative_zero_at_origin = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MonotoneGraph;
    use crate::mirror::{DensityField, Grid1D};
    use crate::pde::{images_indicator, solve, truncation_extent, EtaField, SolveOptions};

    /// Richardson-extrapolated central differences of the value.
    fn fd_check(phi: &TestFunction, x: f64) {
        fd_check_h(phi, x, 1e-3)
    }

    fn fd_check_h(phi: &TestFunction, x: f64, h: f64) {
        let d1h = |h: f64| (phi.value(x + h) - phi.value(x - h)) / (2.0 * h);
        let d2h = |h: f64| (phi.value(x + h) - 2.0 * phi.value(x) + phi.value(x - h)) / (h * h);
        let d1 = (4.0 * d1h(0.5 * h) - d1h(h)) / 3.0;
        let d2 = (4.0 * d2h(0.5 * h) - d2h(h)) / 3.0;
        let j = phi.jet(x);
        let s1 = j.d1.abs().max(1e-2);
        let s2 = j.d2.abs().max(1e-1);
        assert!(
            (d1 - j.d1).abs() / s1 < 1e-6,
            "{} d1 at {x}: {d1} vs {}",
            phi.id,
            j.d1
        );
        assert!(
            (d2 - j.d2).abs() / s2 < 1e-6,
            "{} d2 at {x}: {d2} vs {}",
            phi.id,
            j.d2
        );
    }

    #[test]
    fn family_is_admissible_and_smooth() {
        let fam = standard_family();
        assert_eq!(fam.len(), 12);
        for phi in &fam {
            assert!(phi.derivative_zero_at_origin, "{}", phi.id);
            let (a, b) = phi.support;
            // spot checks away from the support edges
            for k in 4..37 {
                fd_check(phi, a + (b - a) * (k as f64 + 0.37) / 41.0);
            }
            assert_eq!(phi.value(b + 0.01), 0.0);
        }
    }

    #[test]
    fn bump_examples() {
        let away = make_bump(2.0, 1.0, false).unwrap();
        assert!(away.derivative_zero_at_origin);
        let flat = make_bump(0.2, 1.0, true).unwrap();
        assert!(flat.derivative_zero_at_origin);
        assert_eq!(flat.d1(0.0), 0.0);
        let raw = make_bump(0.2, 1.0, false).unwrap();
        assert!(!raw.derivative_zero_at_origin);
        assert!(make_bump(1.0, 0.0, false).is_err());
    }

    fn static_traj(extent: f64) -> PdeTrajectory {
        let u0 = DensityField::from_fn(Grid1D::half_line(0.05, extent).unwrap(), |x| {
            if x < 1.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        // β ≡ 0 is degenerate without breakpoints, so validation is skipped
        let opts = SolveOptions::new(0.5, 0.05)
            .snapshots(&[0.25, 0.5])
            .skip_validation(true);
        solve(&u0, &MonotoneGraph::zero(), &opts).unwrap()
    }

    #[test]
    fn static_case_has_zero_residuals() {
        let traj = static_traj(4.0);
        let raw = make_bump(0.2, 1.0, false).unwrap();
        for phi in standard_family().iter().chain([&raw]) {
            if phi.derivative_zero_at_origin {
                assert_eq!(generalized_residual(&traj, phi, 0.5).unwrap(), 0.0);
            }
            assert_eq!(weak_residual(&traj, phi, 0.5).unwrap(), 0.0);
            assert_eq!(boundary_form_residual(&traj, phi, 0.5).unwrap(), 0.0);
        }
        assert!(matches!(
            generalized_residual(&traj, &raw, 0.5),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn constant_test_function_measures_mass() {
        let u0 = DensityField::from_fn(Grid1D::half_line(0.02, 5.0).unwrap(), |x| {
            if x < 1.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let traj = solve(
            &u0,
            &MonotoneGraph::identity(),
            &SolveOptions::new(0.2, 0.01),
        )
        .unwrap();
        // plateau equals 1 on the whole grid
        let phi = make_plateau(6.0, 1.0).unwrap();
        let r = generalized_residual(&traj, &phi, 0.2).unwrap();
        assert!(r.abs() < 1e-13, "{r}");
    }

    /// Images solution sampled on a grid, with η = u and H from a fine
    /// time quadrature of the analytic cell averages.
    fn images_traj(dx: f64, t: f64) -> PdeTrajectory {
        let grid = Grid1D::half_line(dx, truncation_extent(1.0, t, 1.0, 1e-12)).unwrap();
        let u0 = DensityField::from_fn(grid, |x| if x < 1.0 { 1.0 } else { 0.0 }).unwrap();
        let ut = images_indicator(grid, 1.0, t).unwrap();
        let steps = 4000;
        let mut h = vec![0.0; grid.n];
        for k in 0..steps {
            // midpoint rule in time, exact cell averages in space
            let s = (k as f64 + 0.5) * t / steps as f64;
            let v = images_indicator(grid, 1.0, s).unwrap();
            for (hi, vi) in h.iter_mut().zip(v.values()) {
                *hi += vi * t / steps as f64;
            }
        }
        let eta = |f: &DensityField, time| EtaField {
            grid,
            values: f.values().to_vec(),
            time,
        };
        PdeTrajectory {
            grid,
            dt: t / steps as f64,
            beta_label: "identity".into(),
            snapshots: vec![
                Snapshot {
                    step: 0,
                    time: 0.0,
                    u: u0.clone(),
                    eta: eta(&u0, 0.0),
                    eta_time_integral: vec![0.0; grid.n],
                },
                Snapshot {
                    step: steps,
                    time: t,
                    u: ut.clone(),
                    eta: eta(&ut, t),
                    eta_time_integral: h,
                },
            ],
            conservation: Default::default(),
            solver: Default::default(),
        }
    }

    #[test]
    fn images_oracle_residuals_are_small() {
        let t = 0.25;
        let (coarse, fine) = (images_traj(0.02, t), images_traj(0.01, t));
        let far = make_bump(2.5, 0.5, false).unwrap();
        let (rc, rf) = (
            generalized_residual(&coarse, &far, t).unwrap(),
            generalized_residual(&fine, &far, t).unwrap(),
        );
        assert!(rc.abs() < 1e-4 && rf.abs() < rc.abs(), "{rc} {rf}");
        let kinked = make_bump(0.3, 1.0, false).unwrap();
        for traj in [&coarse, &fine] {
            let w = weak_residual(traj, &kinked, t).unwrap();
            let b = boundary_form_residual(traj, &kinked, t).unwrap();
            assert!(w.abs() < 2e-3 && b.abs() < 2e-3, "weak {w}, boundary {b}");
        }
    }

    #[test]
    fn cutoff_examples() {
        let far = make_bump(3.5, 0.5, false).unwrap();
        let cut = cutoff_transform(&far, 0.5).unwrap();
        for k in 0..50 {
            let x = 0.1 * k as f64;
            assert!((cut.value(x) - far.value(x)).abs() < 1e-15);
        }
        let phi = make_bump(0.3, 1.0, false).unwrap();
        let total_var = integrate(|y| phi.d1(y).abs(), 0.0, 1.3, 64);
        for &eps in &[0.2, 0.1, 0.05] {
            let c = cutoff_transform(&phi, eps).unwrap();
            assert!(c.derivative_zero_at_origin && c.d1(0.0) == 0.0);
            let sup_c = integrate(
                |y| (1.0 - cutoff_ramp(y, eps).v) * phi.d1(y).abs(),
                0.0,
                2.0 * eps,
                16,
            );
            for k in 0..100 {
                let x = 0.015 * k as f64;
                assert!(c.value(x).abs() <= total_var + phi.value(0.0) + sup_c + 1e-12);
            }
            // the ramp is C² at ε and 2ε, so stay clear of both
            for k in 1..19 {
                fd_check_h(&c, eps * (1.0 + (k as f64 + 0.5) / 20.0), eps / 200.0);
                fd_check(&c, 2.0 * eps + 0.005 + 0.01 * k as f64);
            }
            // the constant is chosen so that φ_ε(x) - φ(x) = ∫_x^{2ε} (1-χ)φ'
            let diff = c.value(0.0) - phi.value(0.0);
            let expect = integrate(
                |y| (1.0 - cutoff_ramp(y, eps).v) * phi.d1(y),
                0.0,
                2.0 * eps,
                32,
            );
            assert!((diff - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn mollifier_examples() {
        assert!((integrate(rho, -1.0, 1.0, 64) - 1.0).abs() < 1e-13);
        let eps = 0.1;
        let rho_eps_mass = integrate(|x| rho(x / eps) / eps, -eps, eps, 64);
        assert!((rho_eps_mass - 1.0).abs() < 1e-13);

        let phi = make_bump(0.0, 1.5, true).unwrap();
        let mut prev = f64::INFINITY;
        for &eps in &[0.2, 0.1, 0.05, 0.025] {
            let m = mollify_even(&phi, eps).unwrap();
            let mut sup: f64 = 0.0;
            for k in -60..=60 {
                let x = 0.025 * k as f64 + 0.0013;
                assert!((m.value(x) - m.value(-x)).abs() < 1e-12);
                sup = sup.max((m.value(x) - phi.value(x.abs())).abs());
            }
            assert!(sup < prev, "sup {sup} at eps {eps}");
            prev = sup;
            let total = integrate(|x| m.value(x), -2.0, 2.0, 64);
            let exact = 2.0 * integrate(|x| phi.value(x), 0.0, 1.5, 64);
            assert!((total - exact).abs() < 1e-12, "{total} vs {exact}");
        }
    }

    #[test]
    fn mollified_second_derivative_matches_mollified_phi2() {
        // (φ̄_ε)'' checked against a finite difference of φ̄_ε and against
        // ρ_ε ⋆ φ̄'' computed independently on ℝ₊
        let phi = make_bump(0.6, 0.9, false).unwrap();
        let eps = 0.05;
        let m = mollify_even(&phi, eps).unwrap();
        for &x in &[0.3, 0.55, 0.8, 1.2] {
            let h = 1e-3;
            let fd = (m.value(x + h) - 2.0 * m.value(x) + m.value(x - h)) / (h * h);
            assert!(
                (fd - m.d2(x)).abs() < 1e-4 * m.d2(x).abs().max(1.0),
                "{x}: {fd} vs {}",
                m.d2(x)
            );
            let direct = integrate(|z| rho(z) * phi.d2((x - eps * z).abs()), -1.0, 1.0, 48);
            assert!((direct - m.d2(x)).abs() < 1e-10);
        }
    }
}
