//! Grids, gridded densities and the even-extension dictionary between the
//! half-line Neumann problem and the whole-line problem.
//!
//! A half-line grid with `n` cells of width `dx` and its mirror grid with
//! `2n` cells share cell geometry, so extension and restriction are index
//! arithmetic.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{MonotoneGraph, PhiGraph, MASS_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    HalfLine,
    SymmetricWholeLine,
}

/// Uniform cell-centred grid. Half-line cells are `[i dx, (i+1) dx)`;
/// whole-line cells are `[(i - n/2) dx, (i - n/2 + 1) dx)` with `n` even.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub kind: GridKind,
    pub dx: f64,
    pub n: usize,
}

impl Grid1D {
    /// Half-line grid covering `[0, extent]`, rounded up to whole cells.
    pub fn half_line(dx: f64, extent: f64) -> Result<Self> {
        check_dx(dx)?;
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::Domain(format!("extent {extent} must be positive")));
        }
        Ok(Grid1D {
            kind: GridKind::HalfLine,
            dx,
            n: cells_for(extent, dx),
        })
    }

    pub fn half_line_cells(dx: f64, n: usize) -> Result<Self> {
        check_dx(dx)?;
        if n == 0 {
            return Err(Error::Domain("grid needs at least one cell".into()));
        }
        Ok(Grid1D {
            kind: GridKind::HalfLine,
            dx,
            n,
        })
    }

    /// Symmetric grid covering `[-extent, extent]`.
    pub fn symmetric(dx: f64, extent: f64) -> Result<Self> {
        Ok(Self::half_line(dx, extent)?.mirror())
    }

    /// The whole-line grid whose positive half is `self`.
    pub fn mirror(&self) -> Self {
        match self.kind {
            GridKind::HalfLine => Grid1D {
                kind: GridKind::SymmetricWholeLine,
                dx: self.dx,
                n: 2 * self.n,
            },
            GridKind::SymmetricWholeLine => *self,
        }
    }

    /// The half-line grid matching the positive half of `self`.
    pub fn half(&self) -> Self {
        match self.kind {
            GridKind::HalfLine => *self,
            GridKind::SymmetricWholeLine => Grid1D {
                kind: GridKind::HalfLine,
                dx: self.dx,
                n: self.n / 2,
            },
        }
    }

    pub fn is_half_line(&self) -> bool {
        self.kind == GridKind::HalfLine
    }

    /// Right end of the covered region.
    pub fn extent(&self) -> f64 {
        match self.kind {
            GridKind::HalfLine => self.n as f64 * self.dx,
            GridKind::SymmetricWholeLine => (self.n / 2) as f64 * self.dx,
        }
    }

    /// Left end of the covered region.
    pub fn left(&self) -> f64 {
        match self.kind {
            GridKind::HalfLine => 0.0,
            GridKind::SymmetricWholeLine => -self.extent(),
        }
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        match self.kind {
            GridKind::HalfLine => (i as f64 + 0.5) * self.dx,
            GridKind::SymmetricWholeLine => (i as f64 - (self.n / 2) as f64 + 0.5) * self.dx,
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }

    /// Index of the cell containing `x`, if any.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let k = ((x - self.left()) / self.dx).floor();
        (k >= 0.0 && (k as usize) < self.n).then_some(k as usize)
    }

    /// Index of the mirror cell of `i` on a whole-line grid.
    #[inline]
    pub fn mirror_index(&self, i: usize) -> usize {
        self.n - 1 - i
    }

    pub fn same_geometry(&self, other: &Grid1D) -> bool {
        self.kind == other.kind
            && self.n == other.n
            && (self.dx - other.dx).abs() <= 1e-15 * self.dx
    }
}

fn check_dx(dx: f64) -> Result<()> {
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(Error::Domain(format!("dx = {dx} must be positive")));
    }
    Ok(())
}

fn cells_for(extent: f64, dx: f64) -> usize {
    let r = extent / dx;
    let k = r.round();
    let n = if (r - k).abs() <= 1e-9 * r.max(1.0) {
        k
    } else {
        r.ceil()
    };
    (n as usize).max(1)
}

/// Midpoint-rule integral of gridded values.
pub fn midpoint_mass(values: &[f64], dx: f64) -> f64 {
    values.iter().sum::<f64>() * dx
}

/// A gridded probability density at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityField {
    grid: Grid1D,
    values: Vec<f64>,
    time: f64,
    mass: f64,
}

/// Values below this are a hard error when building a field.
pub const NEGATIVE_TOL: f64 = 1e-10;

impl DensityField {
    pub fn new(grid: Grid1D, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.n
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < -NEGATIVE_TOL)
        {
            return Err(Error::Validation(format!(
                "cell {i} has invalid density {v}"
            )));
        }
        let mass = midpoint_mass(&values, grid.dx);
        Ok(DensityField {
            grid,
            values,
            time,
            mass,
        })
    }

    /// Cell values of `f` sampled at centres.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid1D, f: F) -> Result<Self> {
        let values = grid.centers().into_iter().map(f).collect();
        Self::new(grid, values, 0.0)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Rescale to unit discrete mass.
    pub fn normalized(self) -> Result<Self> {
        if !(self.mass > 0.0) {
            return Err(Error::Validation(
                "cannot normalize a field of zero mass".into(),
            ));
        }
        let m = self.mass;
        let values = self.values.iter().map(|v| v / m).collect();
        Self::new(self.grid, values, self.time)
    }

    /// Value at `x` by cell lookup, zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        self.grid.index_of(x).map_or(0.0, |i| self.values[i])
    }

    /// `x,value` rows with a header; negative round-off clipped to 0.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.grid.center(i), v.max(0.0))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// `ū₀(x) = ½ u₀(|x|)` on the mirror grid.
pub fn extend_initial(u0: &DensityField) -> Result<DensityField> {
    if !u0.grid.is_half_line() {
        return Err(Error::Domain(
            "extend_initial needs a half-line field".into(),
        ));
    }
    if (u0.mass - 1.0).abs() > MASS_TOL {
        return Err(Error::Validation(format!(
            "initial mass {} is not 1",
            u0.mass
        )));
    }
    let n = u0.grid.n;
    let grid = u0.grid.mirror();
    let values = (0..2 * n)
        .map(|j| 0.5 * u0.values[if j >= n { j - n } else { n - 1 - j }])
        .collect();
    DensityField::new(grid, values, u0.time)
}

/// `β̄(u) = ½ β(2u)`.
pub fn extend_beta(beta: &MonotoneGraph) -> MonotoneGraph {
    beta.rescaled(0.5, 2.0, format!("bar({})", beta.label()))
}

/// `Φ̄(u) = Φ(2u)`.
pub fn extend_phi(phi: &PhiGraph) -> PhiGraph {
    phi.rescaled_argument(2.0)
}

/// Tolerance on the asymmetry accepted by `restrict_solution`.
pub const EVEN_TOL: f64 = 1e-8;

/// `v = 2 ū` on the positive half.
pub fn restrict_solution(ubar: &DensityField) -> Result<DensityField> {
    let asymmetry = check_even(ubar)?;
    if asymmetry > EVEN_TOL {
        return Err(Error::NotEven {
            asymmetry,
            tolerance: EVEN_TOL,
        });
    }
    let half = ubar.grid.half();
    let values = restrict_values(&ubar.values);
    DensityField::new(half, values, ubar.time)
}

pub(crate) fn restrict_values(values: &[f64]) -> Vec<f64> {
    let m = values.len() / 2;
    values[m..].iter().map(|v| 2.0 * v).collect()
}

/// `Σ |f(x) - f(-x)| dx` over the positive cells, each mirror pair once.
pub fn check_even(f: &DensityField) -> Result<f64> {
    asymmetry(&f.grid, &f.values)
}

pub fn asymmetry(grid: &Grid1D, values: &[f64]) -> Result<f64> {
    if grid.kind != GridKind::SymmetricWholeLine || grid.n % 2 != 0 {
        return Err(Error::Domain(
            "evenness is only defined on a symmetric grid".into(),
        ));
    }
    let n = grid.n;
    let s: f64 = (n / 2..n)
        .map(|i| (values[i] - values[n - 1 - i]).abs())
        .sum();
    Ok(s * grid.dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{phi_from_beta, Interval};
    use proptest::prelude::*;

    fn indicator01(dx: f64, extent: f64) -> DensityField {
        DensityField::from_fn(Grid1D::half_line(dx, extent).unwrap(), |x| {
            if x < 1.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn grid_geometry() {
        let h = Grid1D::half_line(0.25, 2.0).unwrap();
        assert_eq!(h.n, 8);
        assert_eq!(h.center(0), 0.125);
        let w = h.mirror();
        assert_eq!(w.n, 16);
        for i in 0..w.n {
            assert_eq!(w.center(i), -w.center(w.mirror_index(i)));
        }
        assert_eq!(w.center(8), 0.125);
        assert_eq!(w.index_of(-0.01), Some(7));
        assert_eq!(w.index_of(0.0), Some(8));
        assert_eq!(h.index_of(2.0), None);
        assert!(Grid1D::half_line(0.0, 1.0).is_err());
    }

    #[test]
    fn extend_examples() {
        let u0 = indicator01(0.01, 3.0);
        let ub = extend_initial(&u0).unwrap();
        assert!((ub.mass() - 1.0).abs() < 1e-14);
        for (i, &v) in ub.values().iter().enumerate() {
            let x = ub.grid().center(i);
            assert_eq!(v, if x.abs() < 1.0 { 0.5 } else { 0.0 });
        }
        let tri = DensityField::from_fn(Grid1D::half_line(0.01, 2.0).unwrap(), |x| {
            if x < 1.0 {
                2.0 * x
            } else {
                0.0
            }
        })
        .unwrap();
        let tb = extend_initial(&tri).unwrap();
        for (i, &v) in tb.values().iter().enumerate() {
            let x = tb.grid().center(i);
            let expect = if x.abs() < 1.0 { x.abs() } else { 0.0 };
            assert!((v - expect).abs() < 1e-15);
        }
        let heavy = DensityField::from_fn(Grid1D::half_line(0.01, 2.0).unwrap(), |_| 1.0).unwrap();
        assert!(matches!(extend_initial(&heavy), Err(Error::Validation(_))));
    }

    #[test]
    fn extend_beta_examples() {
        let id = extend_beta(&MonotoneGraph::identity());
        for k in 0..20 {
            let u = 0.3 * k as f64;
            assert!((id.eval(u).unwrap().lo - u).abs() < 1e-15);
        }
        let st = extend_beta(&MonotoneGraph::stopped_linear(1.0).unwrap());
        for k in 0..40 {
            let u = 0.05 * k as f64;
            assert!((st.eval(u).unwrap().lo - (u - 0.5).max(0.0)).abs() < 1e-15);
        }
        let j = extend_beta(&MonotoneGraph::jump(1.0, 1.0, 2.0).unwrap());
        assert_eq!(j.eval(0.5).unwrap(), Interval::new(0.5, 1.0));
    }

    #[test]
    fn extend_phi_examples() {
        let sat = phi_from_beta(&MonotoneGraph::saturating());
        let bar = extend_phi(&sat);
        let beta_bar = extend_beta(&MonotoneGraph::saturating());
        for k in 1..100 {
            let u = 0.07 * k as f64;
            let p = bar.eval(u).unwrap().lo;
            assert!((p - (2.0 * u / (1.0 + 2.0 * u)).sqrt()).abs() < 1e-14);
            assert!((p * p * u - beta_bar.eval(u).unwrap().lo).abs() < 1e-13);
        }
        assert_eq!(bar.value_at_zero(), sat.value_at_zero());
        let one = extend_phi(&phi_from_beta(&MonotoneGraph::identity()));
        assert_eq!(one.eval(3.0).unwrap().lo, 1.0);
    }

    #[test]
    fn extend_beta_commutes_with_phi() {
        for b in [
            MonotoneGraph::identity(),
            MonotoneGraph::saturating(),
            MonotoneGraph::stopped_linear(1.0).unwrap(),
            MonotoneGraph::jump(1.0, 1.0, 2.0).unwrap(),
        ] {
            let lhs = phi_from_beta(&extend_beta(&b));
            let rhs = extend_phi(&phi_from_beta(&b));
            assert_eq!(lhs.value_at_zero(), rhs.value_at_zero());
            for k in 1..400 {
                let u = 0.0125 * k as f64;
                let (a, c) = (lhs.eval(u).unwrap(), rhs.eval(u).unwrap());
                assert!(
                    (a.lo - c.lo).abs() < 1e-10 && (a.hi - c.hi).abs() < 1e-10,
                    "{} at {u}",
                    b.label()
                );
            }
        }
    }

    #[test]
    fn restrict_examples() {
        let g = Grid1D::symmetric(0.01, 2.0).unwrap();
        let ub = DensityField::from_fn(g, |x| if x.abs() < 1.0 { 0.5 } else { 0.0 }).unwrap();
        let v = restrict_solution(&ub).unwrap();
        assert_eq!(v, indicator01(0.01, 2.0));

        let g = Grid1D::symmetric(0.01, 8.0).unwrap();
        let gauss = DensityField::from_fn(g, crate::numerics::normal_pdf).unwrap();
        let v = restrict_solution(&gauss).unwrap();
        for (i, &val) in v.values().iter().enumerate() {
            assert_eq!(val, 2.0 * crate::numerics::normal_pdf(v.grid().center(i)));
        }
        assert!((v.mass() - gauss.mass()).abs() < 1e-14);

        let skew =
            DensityField::from_fn(g, |x| if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 }).unwrap();
        assert!(matches!(
            restrict_solution(&skew),
            Err(Error::NotEven { .. })
        ));
    }

    #[test]
    fn check_even_examples() {
        let g = Grid1D::symmetric(0.01, 2.0).unwrap();
        let f =
            DensityField::from_fn(g, |x| if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 }).unwrap();
        assert!((check_even(&f).unwrap() - 1.0).abs() < 1e-12);
        let eps = 1e-6;
        let p = DensityField::from_fn(g, |x| {
            if x.abs() < 1.0 {
                0.5 + eps * x.signum()
            } else {
                0.0
            }
        })
        .unwrap();
        assert!((check_even(&p).unwrap() - 2.0 * eps).abs() < 1e-15);
        assert!(check_even(&indicator01(0.1, 1.0)).is_err());
    }

    proptest! {
        #[test]
        fn extend_then_restrict_is_identity(vals in prop::collection::vec(0.0f64..5.0, 1..60)) {
            prop_assume!(vals.iter().sum::<f64>() > 1e-3);
            let grid = Grid1D::half_line_cells(0.1, vals.len()).unwrap();
            let u0 = DensityField::new(grid, vals, 0.0).unwrap().normalized().unwrap();
            prop_assume!((u0.mass() - 1.0).abs() <= MASS_TOL);
            let ub = extend_initial(&u0).unwrap();
            prop_assert_eq!(check_even(&ub).unwrap(), 0.0);
            prop_assert!((ub.mass() - u0.mass()).abs() < 1e-14);
            let back = restrict_solution(&ub).unwrap();
            for (a, b) in back.values().iter().zip(u0.values()) {
                prop_assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
            }
        }

        #[test]
        fn restrict_preserves_mass(vals in prop::collection::vec(0.0f64..3.0, 1..40)) {
            let n = vals.len();
            let grid = Grid1D::half_line_cells(0.05, n).unwrap().mirror();
            let full: Vec<f64> = (0..2 * n).map(|j| vals[if j >= n { j - n } else { n - 1 - j }]).collect();
            let ub = DensityField::new(grid, full, 0.0).unwrap();
            let v = restrict_solution(&ub).unwrap();
            prop_assert!((v.mass() - ub.mass()).abs() <= 1e-12 * ub.mass().max(1.0));
        }
    }
}
