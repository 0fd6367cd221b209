//! Distances between gridded densities.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mirror::{DensityField, Grid1D};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Distances {
    pub l1: f64,
    pub w1: f64,
}

/// `L1 = Σ|a - b| dx` and `W1 = Σ|A - B| dx` with `A, B` the cumulative
/// masses at the right cell edges. Different grids are an error unless
/// `allow_resample`, in which case the finer field is averaged onto the
/// coarser grid.
pub fn compare_densities(
    a: &DensityField,
    b: &DensityField,
    allow_resample: bool,
) -> Result<Distances> {
    if a.grid().same_geometry(b.grid()) {
        return Ok(distances(a.values(), b.values(), a.grid().dx));
    }
    if !allow_resample {
        return Err(Error::GridMismatch(format!(
            "{:?} vs {:?}; enable resampling to compare",
            a.grid(),
            b.grid()
        )));
    }
    if a.grid().kind != b.grid().kind {
        return Err(Error::GridMismatch(
            "cannot compare half-line and whole-line fields".into(),
        ));
    }
    let target = if a.grid().dx >= b.grid().dx {
        *a.grid()
    } else {
        *b.grid()
    };
    let ra = resample(a, target)?;
    let rb = resample(b, target)?;
    Ok(distances(ra.values(), rb.values(), target.dx))
}

fn distances(a: &[f64], b: &[f64], dx: f64) -> Distances {
    let mut l1 = 0.0;
    let mut w1 = 0.0;
    let mut ca = 0.0;
    let mut cb = 0.0;
    for (x, y) in a.iter().zip(b) {
        l1 += (x - y).abs();
        ca += x;
        cb += y;
        w1 += (ca - cb).abs();
    }
    Distances {
        l1: l1 * dx,
        w1: w1 * dx * dx,
    }
}

/// Cell averages of a piecewise-constant field over the cells of `target`
/// (exact overlap weights, so aligned coarsening conserves mass exactly).
pub fn resample(f: &DensityField, target: Grid1D) -> Result<DensityField> {
    if f.grid().same_geometry(&target) {
        return Ok(f.clone());
    }
    if f.grid().kind != target.kind {
        return Err(Error::GridMismatch("resampling across grid kinds".into()));
    }
    let src = f.grid();
    let (s0, t0) = (src.left(), target.left());
    let mut out = vec![0.0; target.n];
    for (i, &v) in f.values().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let (a, b) = (s0 + i as f64 * src.dx, s0 + (i + 1) as f64 * src.dx);
        let first = ((a - t0) / target.dx).floor().max(0.0) as usize;
        let mut j = first;
        while j < target.n {
            let (c, d) = (t0 + j as f64 * target.dx, t0 + (j + 1) as f64 * target.dx);
            if c >= b {
                break;
            }
            let overlap = (b.min(d) - a.max(c)).max(0.0);
            out[j] += v * overlap / target.dx;
            j += 1;
        }
    }
    DensityField::new(target, out, f.time())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field(dx: f64, extent: f64, f: impl Fn(f64) -> f64) -> DensityField {
        DensityField::from_fn(Grid1D::half_line(dx, extent).unwrap(), f).unwrap()
    }

    #[test]
    fn disjoint_indicators() {
        let a = field(0.1, 3.0, |x| if x < 1.0 { 1.0 } else { 0.0 });
        let b = field(
            0.1,
            3.0,
            |x| if (1.0..2.0).contains(&x) { 1.0 } else { 0.0 },
        );
        let d = compare_densities(&a, &b, false).unwrap();
        assert!((d.l1 - 2.0).abs() < 1e-12);
        assert!((d.w1 - 1.0).abs() < 1e-12);
        assert_eq!(
            compare_densities(&a, &a, false).unwrap(),
            Distances { l1: 0.0, w1: 0.0 }
        );
    }

    #[test]
    fn mismatch_needs_resampling() {
        let a = field(0.1, 3.0, |x| if x < 1.0 { 1.0 } else { 0.0 });
        let b = field(0.05, 3.0, |x| if x < 1.0 { 1.0 } else { 0.0 });
        assert!(matches!(
            compare_densities(&a, &b, false),
            Err(Error::GridMismatch(_))
        ));
        let d = compare_densities(&a, &b, true).unwrap();
        assert!(d.l1 < 1e-12 && d.w1 < 1e-12);
    }

    #[test]
    fn aligned_coarsening_conserves_mass() {
        let f = field(0.01, 2.0, |x| (-x * x).exp());
        let g = resample(&f, Grid1D::half_line(0.05, 2.0).unwrap()).unwrap();
        assert!((g.mass() - f.mass()).abs() < 1e-12);
        let w = Grid1D::symmetric(0.01, 1.0).unwrap();
        let e = DensityField::from_fn(w, |x| 1.0 - x.abs()).unwrap();
        let c = resample(&e, Grid1D::symmetric(0.1, 1.0).unwrap()).unwrap();
        assert!((c.mass() - e.mass()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn metrics_are_symmetric(a in proptest::collection::vec(0.0f64..3.0, 20), b in proptest::collection::vec(0.0f64..3.0, 20)) {
            let g = Grid1D::half_line_cells(0.1, 20).unwrap();
            let fa = DensityField::new(g, a, 0.0).unwrap();
            let fb = DensityField::new(g, b, 0.0).unwrap();
            let x = compare_densities(&fa, &fb, false).unwrap();
            let y = compare_densities(&fb, &fa, false).unwrap();
            prop_assert!((x.l1 - y.l1).abs() <= 1e-12 && (x.w1 - y.w1).abs() <= 1e-12);
            prop_assert!(x.w1 >= 0.0 && x.l1 >= 0.0);
        }
    }
}
