//! Maximal monotone graphs on the half-line and the coefficient graph Φ.
//!
//! A graph is stored as closed-form branches on consecutive intervals
//! `[lo, hi)` covering `[0, ∞)`. Wherever two neighbouring branches
//! disagree at their common endpoint the graph is filled: its value there
//! is the whole interval between the left and the right limit.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mirror::DensityField;

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }
}

/// A continuous scalar function used on one piece of a graph.
#[derive(Clone)]
pub enum Branch {
    /// `intercept + slope * u`
    Affine { intercept: f64, slope: f64 },
    /// `coeff * u^exponent`
    Power { coeff: f64, exponent: f64 },
    /// `u^2 / (1 + u)`
    Saturating,
    /// `outer * base(inner * u)`
    Scaled {
        outer: f64,
        inner: f64,
        base: Arc<Branch>,
    },
    /// `sqrt(base(u) / u)`, the Φ associated with a β branch.
    SqrtRatio(Arc<Branch>),
    /// A user-supplied monotone callable.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Branch::Affine { intercept, slope } => write!(f, "{intercept} + {slope}*u"),
            Branch::Power { coeff, exponent } => write!(f, "{coeff}*u^{exponent}"),
            Branch::Saturating => write!(f, "u^2/(1+u)"),
            Branch::Scaled { outer, inner, base } => write!(f, "{outer}*[{base:?}]({inner}*u)"),
            Branch::SqrtRatio(b) => write!(f, "sqrt([{b:?}]/u)"),
            Branch::Custom(_) => write!(f, "<custom>"),
        }
    }
}

impl Branch {
    pub fn value(&self, u: f64) -> f64 {
        match self {
            Branch::Affine { intercept, slope } => intercept + slope * u,
            Branch::Power { coeff, exponent } => coeff * u.powf(*exponent),
            Branch::Saturating => u * u / (1.0 + u),
            Branch::Scaled { outer, inner, base } => outer * base.value(inner * u),
            Branch::SqrtRatio(b) => {
                if u > 0.0 {
                    (b.value(u).max(0.0) / u).sqrt()
                } else {
                    b.ratio_limit_at_zero().map(f64::sqrt).unwrap_or(f64::NAN)
                }
            }
            Branch::Custom(f) => f(u),
        }
    }

    /// Right derivative.
    pub fn slope(&self, u: f64) -> f64 {
        match self {
            Branch::Affine { slope, .. } => *slope,
            Branch::Power { coeff, exponent } => {
                if *exponent == 1.0 {
                    *coeff
                } else if u == 0.0 {
                    if *exponent > 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    coeff * exponent * u.powf(exponent - 1.0)
                }
            }
            Branch::Saturating => {
                let d = 1.0 + u;
                u * (u + 2.0) / (d * d)
            }
            Branch::Scaled { outer, inner, base } => outer * inner * base.slope(inner * u),
            Branch::SqrtRatio(_) | Branch::Custom(_) => {
                let h = 1e-7 * u.abs().max(1e-3);
                (self.value(u + h) - self.value(u)) / h
            }
        }
    }

    /// Closed-form root of `u + mu * value(u) = y`, when one is known.
    fn solve_resolvent(&self, mu: f64, y: f64) -> Option<f64> {
        match self {
            Branch::Affine { intercept, slope } => Some((y - mu * intercept) / (1.0 + mu * slope)),
            Branch::Power { coeff, exponent } if *exponent == 1.0 => Some(y / (1.0 + mu * coeff)),
            Branch::Saturating => {
                // (1 + mu) u^2 + (1 - y) u - y = 0, positive root
                let a = 1.0 + mu;
                let b = 1.0 - y;
                let disc = (b * b + 4.0 * a * y).sqrt();
                let u = if b <= 0.0 {
                    (-b + disc) / (2.0 * a)
                } else {
                    2.0 * y / (b + disc)
                };
                Some(u)
            }
            Branch::Scaled { outer, inner, base } => {
                // s = inner*u solves s + mu*outer*inner*base(s) = inner*y
                base.solve_resolvent(mu * outer * inner, inner * y)
                    .map(|s| s / inner)
            }
            _ => None,
        }
    }

    /// `lim_{u -> 0+} value(u) / u`, when known in closed form.
    pub fn ratio_limit_at_zero(&self) -> Option<f64> {
        match self {
            Branch::Affine { intercept, slope } if *intercept == 0.0 => Some(*slope),
            Branch::Power { coeff, exponent } => Some(if *exponent > 1.0 {
                0.0
            } else if *exponent == 1.0 {
                *coeff
            } else {
                f64::INFINITY
            }),
            Branch::Saturating => Some(0.0),
            Branch::Scaled { outer, inner, base } => {
                base.ratio_limit_at_zero().map(|r| outer * inner * r)
            }
            _ => None,
        }
    }

    fn is_identically_zero(&self) -> bool {
        match self {
            Branch::Affine { intercept, slope } => *intercept == 0.0 && *slope == 0.0,
            Branch::Power { coeff, .. } => *coeff == 0.0,
            Branch::Scaled { outer, base, .. } => *outer == 0.0 || base.is_identically_zero(),
            Branch::SqrtRatio(b) => b.is_identically_zero(),
            _ => false,
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            Branch::Affine { slope, .. } => *slope == 0.0,
            Branch::Power { coeff, exponent } => *coeff == 0.0 || *exponent == 0.0,
            Branch::Scaled { outer, base, .. } => *outer == 0.0 || base.is_constant(),
            Branch::SqrtRatio(b) => match b.as_ref() {
                Branch::Affine { intercept, .. } => *intercept == 0.0,
                Branch::Power { exponent, .. } => *exponent == 1.0,
                other => other.is_identically_zero(),
            },
            _ => false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub branch: Branch,
}

/// A jump of the filled graph: `value(at) = [left, right]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Jump {
    pub at: f64,
    pub left: f64,
    pub right: f64,
}

/// Piecewise-continuous function on `[0, ∞)` with filled jumps.
#[derive(Clone, Debug)]
pub struct PiecewiseGraph {
    pieces: Arc<[Piece]>,
    jumps: Vec<Jump>,
}

impl PiecewiseGraph {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidGraph("no pieces".into()));
        }
        if pieces[0].lo != 0.0 {
            return Err(Error::InvalidGraph("first piece must start at 0".into()));
        }
        if pieces.last().unwrap().hi != f64::INFINITY {
            return Err(Error::InvalidGraph(
                "last piece must extend to infinity".into(),
            ));
        }
        for w in pieces.windows(2) {
            if w[0].hi != w[1].lo {
                return Err(Error::InvalidGraph(format!(
                    "pieces are not contiguous at {} / {}",
                    w[0].hi, w[1].lo
                )));
            }
        }
        for p in &pieces {
            if p.lo.is_nan() || p.hi.is_nan() || p.hi <= p.lo {
                return Err(Error::InvalidGraph(format!(
                    "empty piece [{}, {})",
                    p.lo, p.hi
                )));
            }
        }
        let mut jumps = Vec::new();
        for w in pieces.windows(2) {
            let at = w[0].hi;
            let left = w[0].branch.value(at);
            let right = w[1].branch.value(at);
            let scale = left.abs().max(right.abs()).max(1.0);
            if (left - right).abs() > 1e-14 * scale {
                jumps.push(Jump { at, left, right });
            }
        }
        Ok(PiecewiseGraph {
            pieces: pieces.into(),
            jumps,
        })
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    fn piece_index(&self, u: f64) -> usize {
        self.pieces.partition_point(|p| p.lo <= u).saturating_sub(1)
    }

    fn jump_at(&self, u: f64) -> Option<&Jump> {
        self.jumps
            .binary_search_by(|j| j.at.partial_cmp(&u).unwrap())
            .ok()
            .map(|i| &self.jumps[i])
    }

    /// Single-valued evaluation away from jumps (right-continuous).
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        self.pieces[self.piece_index(u)].branch.value(u)
    }

    /// The filled graph at `u`: `[f(u-), f(u+)]`.
    pub fn eval(&self, u: f64) -> Result<Interval> {
        if u.is_nan() || u < 0.0 {
            return Err(Error::Domain(format!("graph evaluated at u = {u} < 0")));
        }
        if let Some(j) = self.jump_at(u) {
            return Ok(Interval::new(j.left.min(j.right), j.left.max(j.right)));
        }
        Ok(Interval::point(self.value(u)))
    }

    /// `outer * f(inner * u)`: pieces and jumps move to `at / inner`.
    pub fn rescaled(&self, outer: f64, inner: f64) -> Self {
        let pieces: Vec<Piece> = self
            .pieces
            .iter()
            .map(|p| Piece {
                lo: p.lo / inner,
                hi: p.hi / inner,
                branch: Branch::Scaled {
                    outer,
                    inner,
                    base: Arc::new(p.branch.clone()),
                },
            })
            .collect();
        let jumps = self
            .jumps
            .iter()
            .map(|j| Jump {
                at: j.at / inner,
                left: outer * j.left,
                right: outer * j.right,
            })
            .collect();
        PiecewiseGraph {
            pieces: pieces.into(),
            jumps,
        }
    }

    /// Sample points used by the grid-based checks: the geometric ladder
    /// `2^-k * u_max`, a few interior points per finite piece, and both
    /// sides of every breakpoint.
    fn sample_points(&self, u_max: f64, levels: usize) -> Vec<f64> {
        let mut pts: Vec<f64> = (0..=levels)
            .map(|k| u_max * 0.5f64.powi(k as i32))
            .collect();
        for p in self.pieces.iter() {
            let hi = if p.hi.is_finite() {
                p.hi
            } else {
                u_max.max(p.lo * 2.0 + 1.0)
            };
            if p.lo >= u_max && p.lo > 0.0 {
                continue;
            }
            for i in 0..=32 {
                let u = p.lo + (hi - p.lo) * i as f64 / 32.0;
                if u > 0.0 && u <= u_max {
                    pts.push(u);
                }
            }
        }
        pts.retain(|u| *u > 0.0 && u.is_finite());
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }
}

/// A maximal monotone graph β on `[0, ∞)` with `0 ∈ β(0)` and a declared
/// linear-growth constant `c` (`|β(u)| ≤ c u`).
#[derive(Clone, Debug)]
pub struct MonotoneGraph {
    graph: PiecewiseGraph,
    growth: f64,
    label: String,
}

/// Validation grid size used by checks on a graph.
pub const DEFAULT_GRID_LEVELS: usize = 40;

impl MonotoneGraph {
    pub fn new(pieces: Vec<Piece>, growth: f64, label: impl Into<String>) -> Result<Self> {
        let graph = PiecewiseGraph::new(pieces)?;
        Self::from_graph(graph, growth, label.into())
    }

    fn from_graph(graph: PiecewiseGraph, growth: f64, label: String) -> Result<Self> {
        if !(growth > 0.0 && growth.is_finite()) {
            return Err(Error::InvalidGraph(format!(
                "growth constant {growth} must be positive"
            )));
        }
        let at0 = graph.eval(0.0)?;
        if !at0.contains(0.0, 1e-14) {
            return Err(Error::InvalidGraph(format!(
                "beta(0) = {at0:?} does not contain 0"
            )));
        }
        let g = MonotoneGraph {
            graph,
            growth,
            label,
        };
        g.check_monotone(64.0)?;
        Ok(g)
    }

    pub fn identity() -> Self {
        Self::linear(1.0).relabel("identity")
    }

    pub fn linear(slope: f64) -> Self {
        Self::single(
            Branch::Affine {
                intercept: 0.0,
                slope,
            },
            slope.max(f64::MIN_POSITIVE),
            format!("linear({slope})"),
        )
    }

    /// `β ≡ 0`, the stopped graph with an infinite threshold.
    pub fn zero() -> Self {
        Self::single(
            Branch::Affine {
                intercept: 0.0,
                slope: 0.0,
            },
            1.0,
            "zero".into(),
        )
    }

    /// `β(u) = u^m`. Linear growth fails for `m ≠ 1`; validation reports it.
    pub fn power(m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidGraph(format!(
                "power exponent {m} must be positive"
            )));
        }
        if m != 1.0 {
            log::warn!("power({m}) does not satisfy |beta(u)| <= c u on all of R+");
        }
        let g = MonotoneGraph::new(
            vec![Piece {
                lo: 0.0,
                hi: f64::INFINITY,
                branch: Branch::Power {
                    coeff: 1.0,
                    exponent: m,
                },
            }],
            1.0,
            format!("power({m})"),
        )?;
        Ok(g)
    }

    /// `β(u) = (u - u_c)^+`.
    pub fn stopped_linear(u_c: f64) -> Result<Self> {
        if u_c.is_nan() || u_c < 0.0 {
            return Err(Error::InvalidGraph(format!(
                "threshold u_c = {u_c} must be >= 0"
            )));
        }
        if u_c == f64::INFINITY {
            return Ok(Self::zero().relabel("stopped_linear(inf)"));
        }
        if u_c == 0.0 {
            return Ok(Self::identity().relabel("stopped_linear(0)"));
        }
        MonotoneGraph::new(
            vec![
                Piece {
                    lo: 0.0,
                    hi: u_c,
                    branch: Branch::Affine {
                        intercept: 0.0,
                        slope: 0.0,
                    },
                },
                Piece {
                    lo: u_c,
                    hi: f64::INFINITY,
                    branch: Branch::Affine {
                        intercept: -u_c,
                        slope: 1.0,
                    },
                },
            ],
            1.0,
            format!("stopped_linear({u_c})"),
        )
    }

    /// `β(u) = u^2 / (1 + u)`.
    pub fn saturating() -> Self {
        Self::single(Branch::Saturating, 1.0, "saturating".into())
    }

    /// Linear up to `a` with `β(a-) = lo`, then a jump to `β(a+) = hi` and
    /// the same slope afterwards.
    pub fn jump(a: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || lo < 0.0 || hi < lo {
            return Err(Error::InvalidGraph(format!(
                "jump({a}, {lo}, {hi}) needs a > 0 and 0 <= lo <= hi"
            )));
        }
        let slope = lo / a;
        MonotoneGraph::new(
            vec![
                Piece {
                    lo: 0.0,
                    hi: a,
                    branch: Branch::Affine {
                        intercept: 0.0,
                        slope,
                    },
                },
                Piece {
                    lo: a,
                    hi: f64::INFINITY,
                    branch: Branch::Affine {
                        intercept: hi - lo,
                        slope,
                    },
                },
            ],
            (hi / a).max(slope).max(f64::MIN_POSITIVE),
            format!("jump({a}, {lo}, {hi})"),
        )
    }

    /// Piecewise-linear interpolation of `(u, β)` points starting at
    /// `(0, 0)`. A repeated abscissa declares a jump. The last segment's
    /// slope continues to infinity.
    pub fn from_table(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGraph(
                "table needs at least two points".into(),
            ));
        }
        if points[0] != (0.0, 0.0) {
            return Err(Error::InvalidGraph("table must start at (0, 0)".into()));
        }
        let mut segs: Vec<(f64, f64, f64, f64)> = Vec::new();
        for w in points.windows(2) {
            let ((u0, b0), (u1, b1)) = (w[0], w[1]);
            if u1 < u0 {
                return Err(Error::InvalidGraph(
                    "table abscissae must be non-decreasing".into(),
                ));
            }
            if u1 > u0 {
                segs.push((u0, u1, b0, b1));
            }
        }
        if segs.is_empty() {
            return Err(Error::InvalidGraph(
                "table has no segment of positive length".into(),
            ));
        }
        let mut pieces = Vec::with_capacity(segs.len());
        let last = segs.len() - 1;
        let mut growth: f64 = 0.0;
        for (k, &(u0, u1, b0, b1)) in segs.iter().enumerate() {
            let slope = (b1 - b0) / (u1 - u0);
            let hi = if k == last { f64::INFINITY } else { u1 };
            if k == last {
                growth = growth.max(slope);
            }
            growth = growth.max(b1 / u1);
            if u0 > 0.0 {
                growth = growth.max(b0 / u0);
            } else {
                growth = growth.max(slope);
            }
            pieces.push(Piece {
                lo: u0,
                hi,
                branch: Branch::Affine {
                    intercept: b0 - slope * u0,
                    slope,
                },
            });
        }
        MonotoneGraph::new(pieces, growth.max(f64::MIN_POSITIVE), "table")
    }

    fn single(branch: Branch, growth: f64, label: String) -> Self {
        MonotoneGraph {
            graph: PiecewiseGraph {
                pieces: vec![Piece {
                    lo: 0.0,
                    hi: f64::INFINITY,
                    branch,
                }]
                .into(),
                jumps: Vec::new(),
            },
            growth,
            label,
        }
    }

    pub fn relabel(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_growth(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidGraph(format!(
                "growth constant {c} must be positive"
            )));
        }
        self.growth = c;
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }

    pub fn graph(&self) -> &PiecewiseGraph {
        &self.graph
    }

    pub fn jumps(&self) -> &[Jump] {
        self.graph.jumps()
    }

    pub fn eval(&self, u: f64) -> Result<Interval> {
        self.graph.eval(u)
    }

    pub(crate) fn rescaled(&self, outer: f64, inner: f64, label: String) -> Self {
        MonotoneGraph {
            graph: self.graph.rescaled(outer, inner),
            growth: self.growth * outer * inner,
            label,
        }
    }

    /// Whether `u ↦ β(u)` is constant on `[0, ∞)` (then `β ≡ 0`).
    pub fn is_zero(&self) -> bool {
        self.graph
            .pieces
            .iter()
            .all(|p| p.branch.is_identically_zero())
    }

    fn check_monotone(&self, u_max: f64) -> Result<()> {
        let pts = self.graph.sample_points(u_max, DEFAULT_GRID_LEVELS);
        let mut prev_hi = 0.0f64;
        let mut prev_u = 0.0;
        for &u in &pts {
            let iv = self.eval(u)?;
            if !(iv.lo.is_finite() && iv.hi.is_finite()) {
                return Err(Error::InvalidGraph(format!("non-finite value at u = {u}")));
            }
            if iv.lo < prev_hi - 1e-12 * prev_hi.abs().max(1.0) {
                return Err(Error::InvalidGraph(format!(
                    "not monotone: beta({prev_u}) reaches {prev_hi} > beta({u}) = {}",
                    iv.lo
                )));
            }
            prev_hi = iv.hi;
            prev_u = u;
        }
        Ok(())
    }

    /// Unique `(u, η)` with `u + μ η = y`, `η ∈ β(u)`, `u ≥ 0`.
    ///
    /// Jumps are resolved by an interval test; on a continuous piece a
    /// closed-form root is used when the branch has one, bisection
    /// otherwise.
    pub fn resolvent(&self, mu: f64, y: f64) -> Result<(f64, f64)> {
        let (u, eta, _) = self.resolvent_with_slope(mu, y)?;
        Ok((u, eta))
    }

    /// Resolvent together with `du/dy` (zero inside a jump).
    pub fn resolvent_with_slope(&self, mu: f64, y: f64) -> Result<(f64, f64, f64)> {
        check_resolvent_args(mu, y)?;
        if y == 0.0 {
            return Ok((
                0.0,
                0.0,
                1.0 / (1.0 + mu * self.graph.pieces[0].branch.slope(0.0)),
            ));
        }
        if let Some(j) = self.jump_containing(mu, y) {
            return Ok((j.at, (y - j.at) / mu, 0.0));
        }
        let pieces = &self.graph.pieces;
        // first piece whose upper end maps above y
        let k = pieces
            .partition_point(|p| p.hi.is_finite() && p.hi + mu * p.branch.value(p.hi) <= y)
            .min(pieces.len() - 1);
        let p = &pieces[k];
        let hi = p.hi.min(y);
        let u = match p.branch.solve_resolvent(mu, y) {
            Some(u) if u.is_finite() && u >= p.lo - 1e-12 * p.lo.max(1.0) && u <= p.hi => {
                u.max(p.lo)
            }
            _ => bisect(|u| u + mu * p.branch.value(u), p.lo, hi, y)?,
        };
        let slope = p.branch.slope(u);
        let du = if slope.is_finite() {
            1.0 / (1.0 + mu * slope)
        } else {
            0.0
        };
        Ok((u, (y - u) / mu, du))
    }

    /// Reference resolvent: jump test followed by plain bisection of the
    /// filled map `u ↦ u + μ β(u)` on `[0, y]`, no closed forms.
    pub fn resolvent_bisection(&self, mu: f64, y: f64) -> Result<(f64, f64)> {
        check_resolvent_args(mu, y)?;
        if y == 0.0 {
            return Ok((0.0, 0.0));
        }
        if let Some(j) = self.jump_containing(mu, y) {
            return Ok((j.at, (y - j.at) / mu));
        }
        let (mut lo, mut hi) = (0.0, y);
        for _ in 0..BISECTION_MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let iv = self.eval(mid)?;
            let (g_lo, g_hi) = (mid + mu * iv.lo, mid + mu * iv.hi);
            if !(g_lo.is_finite() && g_hi.is_finite()) {
                break;
            }
            if y < g_lo {
                hi = mid;
            } else if y > g_hi {
                lo = mid;
            } else {
                return Ok((mid, (y - mid) / mu));
            }
            if hi - lo <= BISECTION_TOL * y.max(1.0) {
                break;
            }
        }
        if hi - lo <= BISECTION_TOL * y.max(1.0) || 0.5 * (lo + hi) <= lo || 0.5 * (lo + hi) >= hi {
            let u = 0.5 * (lo + hi);
            return Ok((u, (y - u) / mu));
        }
        Err(Error::BisectionDiverged {
            iterations: BISECTION_MAX_ITER,
            lo,
            hi,
            target: y,
        })
    }

    fn jump_containing(&self, mu: f64, y: f64) -> Option<Jump> {
        self.graph
            .jumps
            .iter()
            .find(|j| j.at + mu * j.left <= y && y <= j.at + mu * j.right)
            .copied()
    }
}

pub const BISECTION_TOL: f64 = 1e-12;
pub const BISECTION_MAX_ITER: usize = 200;

fn check_resolvent_args(mu: f64, y: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Domain(format!(
            "resolvent parameter mu = {mu} must be positive"
        )));
    }
    if !(y >= 0.0 && y.is_finite()) {
        return Err(Error::Domain(format!(
            "resolvent argument y = {y} must be >= 0"
        )));
    }
    Ok(())
}

/// Bisection for an increasing scalar map `g` on `[lo, hi]` with
/// `g(lo) <= target <= g(hi)`.
fn bisect<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64, target: f64) -> Result<f64> {
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let v = g(mid);
        if !v.is_finite() {
            break;
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= BISECTION_TOL * target.max(1.0) {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::BisectionDiverged {
        iterations: BISECTION_MAX_ITER,
        lo,
        hi,
        target,
    })
}

/// The non-negative graph Φ with `Φ(u)^2 u ∈ β(u)` for `u > 0`, plus its
/// value at zero `[liminf, limsup]` of Φ as `u → 0+`.
#[derive(Clone, Debug)]
pub struct PhiGraph {
    graph: PiecewiseGraph,
    at_zero: Interval,
}

impl PhiGraph {
    pub fn graph(&self) -> &PiecewiseGraph {
        &self.graph
    }

    pub fn value_at_zero(&self) -> Interval {
        self.at_zero
    }

    pub fn eval(&self, u: f64) -> Result<Interval> {
        if u == 0.0 {
            return Ok(self.at_zero);
        }
        self.graph.eval(u)
    }

    /// Whether Φ is the same constant everywhere (then the particle
    /// coefficient does not depend on the density).
    pub fn constant_value(&self) -> Option<f64> {
        let p = self.graph.pieces();
        if p.len() == 1 && p[0].branch.is_constant() && self.at_zero.is_point() {
            let v = p[0].branch.value(1.0);
            (v == self.at_zero.lo).then_some(v)
        } else {
            None
        }
    }

    pub(crate) fn rescaled_argument(&self, inner: f64) -> Self {
        PhiGraph {
            graph: self.graph.rescaled(1.0, inner),
            at_zero: self.at_zero,
        }
    }
}

/// `Φ(u) = sqrt(β(u)/u)` piece by piece.
pub fn phi_from_beta(beta: &MonotoneGraph) -> PhiGraph {
    let pieces: Vec<Piece> = beta
        .graph
        .pieces
        .iter()
        .map(|p| Piece {
            lo: p.lo,
            hi: p.hi,
            branch: Branch::SqrtRatio(Arc::new(p.branch.clone())),
        })
        .collect();
    let first = &beta.graph.pieces[0].branch;
    let at_zero = match first.ratio_limit_at_zero() {
        Some(r) => Interval::point(r.sqrt()),
        None => {
            // liminf / limsup over a decreasing ladder
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for k in 30..=60 {
                let u = 0.5f64.powi(k);
                let phi = (first.value(u).max(0.0) / u).sqrt();
                lo = lo.min(phi);
                hi = hi.max(phi);
            }
            Interval::new(lo, hi)
        }
    };
    let graph = PiecewiseGraph::new(pieces).expect("pieces copied from a valid graph");
    PhiGraph { graph, at_zero }
}

/// How a single value is picked from a filled interval.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    RightLimit,
    LeftLimit,
    #[default]
    Midpoint,
}

impl SelectionPolicy {
    pub fn pick(self, iv: Interval) -> f64 {
        match self {
            SelectionPolicy::RightLimit => iv.hi,
            SelectionPolicy::LeftLimit => iv.lo,
            SelectionPolicy::Midpoint => iv.mid(),
        }
    }
}

/// A single-valued selection of a filled graph.
#[derive(Clone, Debug)]
pub struct Selection {
    pub policy: SelectionPolicy,
    graph: PiecewiseGraph,
    at_zero: Interval,
}

impl Selection {
    pub fn select(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.policy.pick(self.at_zero);
        }
        match self.graph.eval(u) {
            Ok(iv) => self.policy.pick(iv),
            Err(_) => f64::NAN,
        }
    }

    pub fn interval(&self, u: f64) -> Result<Interval> {
        if u == 0.0 {
            Ok(self.at_zero)
        } else {
            self.graph.eval(u)
        }
    }
}

pub trait Selectable {
    fn make_selection(&self, policy: SelectionPolicy) -> Selection;
}

impl Selectable for MonotoneGraph {
    fn make_selection(&self, policy: SelectionPolicy) -> Selection {
        Selection {
            policy,
            graph: self.graph.clone(),
            at_zero: self.graph.eval(0.0).unwrap_or(Interval::point(0.0)),
        }
    }
}

impl Selectable for PhiGraph {
    fn make_selection(&self, policy: SelectionPolicy) -> Selection {
        Selection {
            policy,
            graph: self.graph.clone(),
            at_zero: self.at_zero,
        }
    }
}

pub fn make_selection<G: Selectable>(graph: &G, policy: SelectionPolicy) -> Selection {
    graph.make_selection(policy)
}

/// Degeneracy class of β.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum DegeneracyClass {
    NonDegenerate { c0: f64 },
    Degenerate,
    StrictlyIncreasingAfterZero { u_c: f64 },
    Unclassified,
}

/// Grid used by `classify` and the assumption checks.
#[derive(Clone, Copy, Debug)]
pub struct ClassifyOptions {
    pub u_max: f64,
    pub levels: usize,
    /// Φ values at or below this count as zero.
    pub zero_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            u_max: 64.0,
            levels: DEFAULT_GRID_LEVELS,
            zero_tol: 1e-8,
        }
    }
}

/// Classify β. Precedence: non-degenerate, then strictly increasing after a
/// positive zero `u_c`, then degenerate.
pub fn classify(beta: &MonotoneGraph) -> DegeneracyClass {
    classify_with(beta, ClassifyOptions::default())
}

pub fn classify_with(beta: &MonotoneGraph, opts: ClassifyOptions) -> DegeneracyClass {
    let phi = phi_from_beta(beta);
    let pts = beta.graph.sample_points(opts.u_max, opts.levels);
    let mut c0 = phi.at_zero.lo;
    for &u in &pts {
        if let Ok(iv) = phi.eval(u) {
            c0 = c0.min(iv.lo);
        }
    }
    if c0 > opts.zero_tol {
        return DegeneracyClass::NonDegenerate { c0 };
    }
    if let Some(u_c) = zero_plateau_with(beta, opts) {
        if u_c > 0.0 {
            return DegeneracyClass::StrictlyIncreasingAfterZero { u_c };
        }
    }
    if phi.at_zero.hi <= opts.zero_tol {
        return DegeneracyClass::Degenerate;
    }
    DegeneracyClass::Unclassified
}

/// The `u_c ≥ 0` such that β vanishes on `[0, u_c)` and is strictly
/// increasing on `[u_c, ∞)`, if there is one.
pub fn zero_plateau(beta: &MonotoneGraph) -> Option<f64> {
    zero_plateau_with(beta, ClassifyOptions::default())
}

fn zero_plateau_with(beta: &MonotoneGraph, opts: ClassifyOptions) -> Option<f64> {
    let pieces = beta.graph.pieces();
    let mut u_c = 0.0;
    let mut start = 0;
    for p in pieces {
        if p.branch.is_identically_zero() {
            u_c = p.hi;
            start += 1;
        } else {
            break;
        }
    }
    if start == pieces.len() {
        return None;
    }
    let u_max = opts.u_max.max(2.0 * u_c);
    let mut pts: Vec<f64> = beta
        .graph
        .sample_points(u_max, opts.levels)
        .into_iter()
        .filter(|u| *u > u_c)
        .collect();
    pts.insert(0, u_c);
    let mut prev = f64::NEG_INFINITY;
    for u in pts {
        let iv = beta.eval(u).ok()?;
        if iv.lo <= prev {
            return None;
        }
        prev = iv.hi;
    }
    Some(u_c)
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub class: DegeneracyClass,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Breakpoints `e_k` the user declares for the bounded-variation variant of
/// the degenerate case. Not verified.
#[derive(Clone, Debug, Default)]
pub struct DeclaredBreakpoints(pub Vec<f64>);

pub fn validate_assumptions(
    beta: &MonotoneGraph,
    u0: &DensityField,
    declared: Option<&DeclaredBreakpoints>,
) -> ValidationReport {
    let mut checks = Vec::new();
    let values = u0.values();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let sup = values.iter().cloned().fold(0.0f64, f64::max);
    let finite = values.iter().all(|v| v.is_finite());

    checks.push(Check {
        name: "non-negative",
        passed: min >= -1e-12,
        detail: format!("min u0 = {min:e}"),
    });
    checks.push(Check {
        name: "bounded",
        passed: finite,
        detail: format!("sup u0 = {sup:e}"),
    });
    let mass = u0.mass();
    checks.push(Check {
        name: "unit mass",
        passed: (mass - 1.0).abs() <= MASS_TOL,
        detail: format!("mass u0 = {mass:.15}"),
    });

    let at0 = beta.eval(0.0);
    checks.push(Check {
        name: "beta(0) = 0",
        passed: matches!(at0, Ok(iv) if iv.contains(0.0, 1e-14)),
        detail: format!("beta(0) = {at0:?}"),
    });
    let mono = beta.check_monotone(2.0 * sup.max(1.0));
    checks.push(Check {
        name: "monotone",
        passed: mono.is_ok(),
        detail: mono.err().map(|e| e.to_string()).unwrap_or_default(),
    });

    let u_max = 2.0 * sup.max(1.0);
    let c = beta.growth();
    let mut worst = (0.0, 0.0);
    for u in beta.graph.sample_points(u_max, DEFAULT_GRID_LEVELS) {
        if let Ok(iv) = beta.eval(u) {
            let r = iv.lo.abs().max(iv.hi.abs()) / u;
            if r > worst.1 {
                worst = (u, r);
            }
        }
    }
    checks.push(Check {
        name: "|beta(u)| <= c u",
        passed: worst.1 <= c * (1.0 + 1e-12),
        detail: format!("c = {c}, max |beta(u)|/u = {} at u = {}", worst.1, worst.0),
    });

    let class = classify_with(
        beta,
        ClassifyOptions {
            u_max,
            ..Default::default()
        },
    );
    let plateau = zero_plateau(beta);
    let declared_ok = declared.is_some_and(|d| !d.0.is_empty());
    let (ok, how) = match class {
        DegeneracyClass::NonDegenerate { c0 } => (true, format!("non-degenerate, c0 = {c0}")),
        _ if plateau.is_some() => (
            true,
            format!("strictly increasing after u_c = {}", plateau.unwrap()),
        ),
        DegeneracyClass::Degenerate if declared_ok => {
            (true, "degenerate with declared breakpoints".into())
        }
        other => (false, format!("{other:?} without declared breakpoints")),
    };
    checks.push(Check {
        name: "degeneracy structure",
        passed: ok,
        detail: how,
    });
    ValidationReport { checks, class }
}

/// Tolerance on `|∫u0 - 1|`.
pub const MASS_TOL: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mirror::Grid1D;

    fn indicator_field(n_per_unit: usize, extent: f64, height: f64) -> DensityField {
        let grid = Grid1D::half_line(1.0 / n_per_unit as f64, extent).unwrap();
        let vals = grid
            .centers()
            .iter()
            .map(|&x| if x < 1.0 { height } else { 0.0 })
            .collect();
        DensityField::new(grid, vals, 0.0).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(
            MonotoneGraph::identity().eval(3.0).unwrap(),
            Interval::point(3.0)
        );
        let j = MonotoneGraph::jump(1.0, 1.0, 2.0).unwrap();
        assert_eq!(j.eval(1.0).unwrap(), Interval::new(1.0, 2.0));
        let s = MonotoneGraph::stopped_linear(1.0).unwrap();
        assert_eq!(s.eval(0.5).unwrap(), Interval::point(0.0));
        assert!(matches!(s.eval(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn resolvent_examples() {
        let (u, eta) = MonotoneGraph::identity().resolvent(1.0, 2.0).unwrap();
        assert!((u - 1.0).abs() < 1e-15 && (eta - 1.0).abs() < 1e-15);
        assert_eq!(
            MonotoneGraph::zero().resolvent(3.7, 5.0).unwrap(),
            (5.0, 0.0)
        );
        assert_eq!(
            MonotoneGraph::stopped_linear(f64::INFINITY)
                .unwrap()
                .resolvent(0.2, 5.0)
                .unwrap(),
            (5.0, 0.0)
        );
    }

    #[test]
    fn resolvent_absorbs_jump() {
        // oracle: bisection of the monotone map u -> u + beta(u); the jump
        // at u = 1 covers y in [2, 3]
        let j = MonotoneGraph::jump(1.0, 1.0, 2.0).unwrap();
        let g = |u: f64| if u < 1.0 { 2.0 * u } else { 2.0 * u + 1.0 };
        let (mut lo, mut hi) = (0.0, 2.5);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if g(m) < 2.5 {
                lo = m
            } else {
                hi = m
            }
        }
        assert!((lo - 1.0).abs() < 1e-12);
        let (u, eta) = j.resolvent(1.0, 2.5).unwrap();
        assert_eq!(u, 1.0);
        assert!((eta - 1.5).abs() < 1e-15);
        let (ub, etab) = j.resolvent_bisection(1.0, 2.5).unwrap();
        assert_eq!((ub, etab), (1.0, 1.5));
    }

    #[test]
    fn resolvent_rejects_bad_arguments() {
        let g = MonotoneGraph::identity();
        assert!(g.resolvent(0.0, 1.0).is_err());
        assert!(g.resolvent(1.0, -1.0).is_err());
    }

    #[test]
    fn bisection_failure_reports_bracket() {
        let bad = MonotoneGraph {
            graph: PiecewiseGraph::new(vec![Piece {
                lo: 0.0,
                hi: f64::INFINITY,
                branch: Branch::Custom(Arc::new(|u: f64| if u > 0.25 { f64::NAN } else { u })),
            }])
            .unwrap(),
            growth: 1.0,
            label: "bad".into(),
        };
        match bad.resolvent(1.0, 2.0) {
            Err(Error::BisectionDiverged { lo, hi, .. }) => assert!(lo <= hi),
            other => panic!("expected bisection failure, got {other:?}"),
        }
    }

    #[test]
    fn closed_forms_agree_with_bisection() {
        let graphs = [
            MonotoneGraph::identity(),
            MonotoneGraph::saturating(),
            MonotoneGraph::stopped_linear(1.0).unwrap(),
            MonotoneGraph::jump(1.0, 1.0, 2.0).unwrap(),
            MonotoneGraph::saturating().rescaled(0.5, 2.0, "bar".into()),
        ];
        for g in &graphs {
            for &mu in &[0.01, 0.5, 1.0, 8.0, 100.0] {
                for k in 0..50 {
                    let y = 0.1 * k as f64;
                    let (u1, e1) = g.resolvent(mu, y).unwrap();
                    let (u2, e2) = g.resolvent_bisection(mu, y).unwrap();
                    assert!(
                        (u1 - u2).abs() < 1e-10,
                        "{} mu={mu} y={y}: {u1} vs {u2}",
                        g.label()
                    );
                    assert!((e1 - e2).abs() < 1e-9 / mu.min(1.0));
                }
            }
        }
    }

    #[test]
    fn phi_examples() {
        let phi = phi_from_beta(&MonotoneGraph::identity());
        assert_eq!(phi.value_at_zero(), Interval::point(1.0));
        assert!((phi.eval(2.5).unwrap().lo - 1.0).abs() < 1e-15);

        // oracle: pointwise sqrt(beta/u) against the simplified form
        let sat = MonotoneGraph::saturating();
        let phi = phi_from_beta(&sat);
        assert_eq!(phi.value_at_zero(), Interval::point(0.0));
        for k in 1..200 {
            let u = 0.05 * k as f64;
            let direct = ((u * u / (1.0 + u)) / u).sqrt();
            let simplified = (u / (1.0 + u)).sqrt();
            assert!((direct - simplified).abs() < 1e-14);
            assert!((phi.eval(u).unwrap().lo - simplified).abs() < 1e-14);
        }

        let st = phi_from_beta(&MonotoneGraph::stopped_linear(1.0).unwrap());
        assert_eq!(st.value_at_zero(), Interval::point(0.0));
        assert_eq!(st.eval(0.5).unwrap(), Interval::point(0.0));
        assert!((st.eval(3.0).unwrap().lo - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn phi_of_jump_graph_is_filled() {
        // beta(u) = u below 1 and u + 3 above: Phi jumps from 1 to 2 at u = 1
        let b = MonotoneGraph::jump(1.0, 1.0, 4.0).unwrap();
        let phi = phi_from_beta(&b);
        let iv = phi.eval(1.0).unwrap();
        assert!((iv.lo - 1.0).abs() < 1e-15 && (iv.hi - 2.0).abs() < 1e-15);
        let sel = make_selection(&phi, SelectionPolicy::Midpoint);
        assert!((sel.select(1.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn selection_examples() {
        let id = MonotoneGraph::identity();
        for policy in [
            SelectionPolicy::LeftLimit,
            SelectionPolicy::RightLimit,
            SelectionPolicy::Midpoint,
        ] {
            assert_eq!(make_selection(&id, policy).select(0.7), 0.7);
        }
        let st = MonotoneGraph::stopped_linear(1.0).unwrap();
        assert_eq!(
            make_selection(&st, SelectionPolicy::RightLimit).select(1.0),
            0.0
        );
        let phi = phi_from_beta(&MonotoneGraph::identity());
        assert_eq!(
            make_selection(&phi, SelectionPolicy::Midpoint).select(0.0),
            1.0
        );
    }

    #[test]
    fn classify_examples() {
        assert_eq!(
            classify(&MonotoneGraph::identity()),
            DegeneracyClass::NonDegenerate { c0: 1.0 }
        );
        assert_eq!(
            classify(&MonotoneGraph::saturating()),
            DegeneracyClass::Degenerate
        );
        assert_eq!(
            classify(&MonotoneGraph::stopped_linear(1.0).unwrap()),
            DegeneracyClass::StrictlyIncreasingAfterZero { u_c: 1.0 }
        );
        assert_eq!(
            classify(&MonotoneGraph::zero()),
            DegeneracyClass::Degenerate
        );
        assert!(matches!(
            classify(&MonotoneGraph::jump(1.0, 1.0, 2.0).unwrap()),
            DegeneracyClass::NonDegenerate { .. }
        ));
    }

    #[test]
    fn saturating_phi_decays_along_decreasing_grid() {
        // the degenerate classification should match direct evaluation
        let phi = phi_from_beta(&MonotoneGraph::saturating());
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let v = phi.eval(0.5f64.powi(k)).unwrap().lo;
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn validation_examples() {
        let u0 = indicator_field(100, 4.0, 1.0);
        let ok = validate_assumptions(&MonotoneGraph::identity(), &u0, None);
        assert!(ok.passed(), "{:?}", ok.failures());

        let heavy = indicator_field(100, 4.0, 2.0);
        let rep = validate_assumptions(&MonotoneGraph::identity(), &heavy, None);
        assert!(!rep.check("unit mass").unwrap().passed);

        let sq = MonotoneGraph::power(2.0).unwrap();
        let rep = validate_assumptions(&sq, &u0, None);
        assert!(!rep.check("|beta(u)| <= c u").unwrap().passed);

        for g in [
            MonotoneGraph::saturating(),
            MonotoneGraph::stopped_linear(1.0).unwrap(),
        ] {
            let rep = validate_assumptions(&g, &u0, None);
            assert!(rep.passed(), "{}: {:?}", g.label(), rep.failures());
        }
    }

    #[test]
    fn construction_rejects_non_monotone_tables() {
        assert!(MonotoneGraph::from_table(&[(0.0, 0.0), (1.0, 2.0), (2.0, 1.0)]).is_err());
        assert!(MonotoneGraph::from_table(&[(0.0, 0.5), (1.0, 2.0)]).is_err());
        let t =
            MonotoneGraph::from_table(&[(0.0, 0.0), (1.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).unwrap();
        assert_eq!(t.jumps().len(), 1);
        assert_eq!(t.eval(1.0).unwrap(), Interval::new(1.0, 2.0));
        assert_eq!(t.growth(), 2.0);
    }
}
