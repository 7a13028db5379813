//! Monodromy matrices by analytic continuation along loops in the x-plane.
//!
//! The fundamental solution is normalised by `Y(x₀) = I`; continuing it once
//! around a loop `γ` gives `Y·M_γ`, and `M_γ` is read off at `x₀`. With this
//! right action, traversing `γ_a` and then `γ_b` yields `M_b·M_a`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::ParameterPoint;
use crate::linalg::{self, CMat, TWO_PI_I};
use crate::ode::{self, OdeOptions, StepReport};
use crate::sysmodel::{FrozenSystem, ParamRationalMatrix, SysTolerances};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoopTarget {
    Pole(usize),
    /// Clockwise circle enclosing every finite pole.
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoopRadius {
    /// Half the distance to the nearest other pole, capped by `|x₀ − α|`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSpec {
    pub base: Complex64,
    pub target: LoopTarget,
    pub radius: LoopRadius,
}

impl LoopSpec {
    pub fn around(base: Complex64, pole: usize) -> Self {
        LoopSpec { base, target: LoopTarget::Pole(pole), radius: LoopRadius::Auto }
    }

    pub fn around_infinity(base: Complex64) -> Self {
        LoopSpec { base, target: LoopTarget::Infinity, radius: LoopRadius::Auto }
    }

    pub fn with_radius(mut self, r: f64) -> Self {
        self.radius = LoopRadius::Fixed(r);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathPiece {
    Segment {
        from: Complex64,
        to: Complex64,
    },
    /// `center + radius·e^{i(start + sweep·s)}`, `s ∈ [0, 1]`.
    Arc {
        center: Complex64,
        radius: f64,
        start: f64,
        sweep: f64,
    },
}

impl PathPiece {
    pub fn point(&self, s: f64) -> Complex64 {
        match *self {
            PathPiece::Segment { from, to } => from + (to - from) * s,
            PathPiece::Arc { center, radius, start, sweep } => {
                center + Complex64::from_polar(radius, start + sweep * s)
            }
        }
    }

    /// `dx/ds`.
    pub fn velocity(&self, s: f64) -> Complex64 {
        match *self {
            PathPiece::Segment { from, to } => to - from,
            PathPiece::Arc { radius, start, sweep, .. } => {
                Complex64::new(0.0, sweep) * Complex64::from_polar(radius, start + sweep * s)
            }
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            PathPiece::Segment { from, to } => (to - from).norm(),
            PathPiece::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Closest point of the piece to `p` and its distance.
    pub fn closest(&self, p: Complex64) -> (Complex64, f64) {
        match *self {
            PathPiece::Segment { from, to } => {
                let d = to - from;
                let len2 = d.norm_sqr();
                let s = if len2 == 0.0 { 0.0 } else { ((p - from) * d.conj()).re / len2 };
                let q = from + d * s.clamp(0.0, 1.0);
                (q, (p - q).norm())
            }
            PathPiece::Arc { center, radius, start, sweep } => {
                let v = p - center;
                let ang = v.arg();
                // angle of v relative to the arc start, in the sweep direction
                let rel = ((ang - start) * sweep.signum()).rem_euclid(2.0 * PI);
                let cands = if rel <= sweep.abs() { vec![ang] } else { vec![start, start + sweep] };
                cands
                    .into_iter()
                    .map(|a| {
                        let q = center + Complex64::from_polar(radius, a);
                        (q, (p - q).norm())
                    })
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Path {
    pub pieces: Vec<PathPiece>,
}

impl Path {
    pub fn length(&self) -> f64 {
        self.pieces.iter().map(PathPiece::length).sum()
    }

    /// Minimum distance from the path to `p`, with the closest point.
    pub fn distance(&self, p: Complex64) -> (Complex64, f64) {
        self.pieces.iter().map(|pc| pc.closest(p)).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap_or((p, f64::INFINITY))
    }
}

/// A loop made concrete at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedLoop {
    pub path: Path,
    pub center: Complex64,
    pub radius: f64,
    pub margin: f64,
}

/// Direction (bisector of the widest angular gap) in which no pole is seen
/// from `x0`; elementary loops are ordered starting from this cut.
pub fn cut_direction(x0: Complex64, poles: &[Complex64]) -> f64 {
    let mut angs: Vec<f64> = poles.iter().map(|p| (p - x0).arg()).collect();
    if angs.is_empty() {
        return 0.0;
    }
    angs.sort_by(f64::total_cmp);
    let mut best = (angs[0] + 2.0 * PI - angs[angs.len() - 1], angs[angs.len() - 1]);
    for w in angs.windows(2) {
        if w[1] - w[0] > best.0 {
            best = (w[1] - w[0], w[0]);
        }
    }
    best.1 + best.0 / 2.0
}

/// Loop order for which the literal product `M_{o_1}·M_{o_2}⋯` equals `I`
/// when no other singularity is present. Poles are swept counter-clockwise
/// from the cut; the product lists them in reverse sweep order, preceded by
/// the loop around infinity when requested.
pub fn standard_order(x0: Complex64, poles: &[Complex64], include_infinity: bool) -> Vec<LoopTarget> {
    let cut = cut_direction(x0, poles);
    let mut idx: Vec<(usize, f64)> =
        poles.iter().enumerate().map(|(i, p)| (i, ((p - x0).arg() - cut).rem_euclid(2.0 * PI))).collect();
    idx.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut out = Vec::new();
    if include_infinity {
        out.push(LoopTarget::Infinity);
    }
    out.extend(idx.into_iter().map(|(i, _)| LoopTarget::Pole(i)));
    out
}

fn near_pole(x: Complex64, pole: usize, guard: f64) -> Error {
    Error::NearPole { x: format!("{x}"), pole, guard }
}

pub fn resolve_loop(frozen: &FrozenSystem, spec: &LoopSpec) -> Result<ResolvedLoop> {
    let x0 = spec.base;
    let locs = frozen.locations();
    for (i, p) in locs.iter().enumerate() {
        if (x0 - p).norm() < frozen.guard {
            return Err(near_pole(x0, i, frozen.guard));
        }
    }
    let resolved = match spec.target {
        LoopTarget::Pole(i) => {
            let alpha = *locs.get(i).ok_or_else(|| Error::InvalidLoop(format!("no pole with index {i}")))?;
            let d0 = (x0 - alpha).norm();
            let d_other = locs
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, p)| (p - alpha).norm())
                .fold(f64::INFINITY, f64::min);
            let radius = match spec.radius {
                LoopRadius::Auto => (0.5 * d_other).min(d0),
                LoopRadius::Fixed(r) if r > 0.0 && r.is_finite() => r,
                LoopRadius::Fixed(r) => return Err(Error::InvalidLoop(format!("radius {r} must be positive"))),
            };
            if d_other <= radius {
                return Err(Error::InvalidLoop(format!(
                    "circle of radius {radius} around pole {i} encloses another pole"
                )));
            }
            let start = (x0 - alpha).arg();
            let entry = alpha + Complex64::from_polar(radius, start);
            let mut pieces = Vec::new();
            let on_circle = (entry - x0).norm() <= 1e-14 * (1.0 + x0.norm());
            if !on_circle {
                pieces.push(PathPiece::Segment { from: x0, to: entry });
            }
            pieces.push(PathPiece::Arc { center: alpha, radius, start, sweep: 2.0 * PI });
            if !on_circle {
                pieces.push(PathPiece::Segment { from: entry, to: x0 });
            }
            ResolvedLoop { path: Path { pieces }, center: alpha, radius, margin: radius / 4.0 }
        }
        LoopTarget::Infinity => {
            let reach = locs.iter().map(|p| p.norm()).fold(x0.norm(), f64::max);
            let radius = match spec.radius {
                LoopRadius::Auto => 2.0 * reach + 1.0,
                LoopRadius::Fixed(r) if r > reach => r,
                LoopRadius::Fixed(r) => {
                    return Err(Error::InvalidLoop(format!("radius {r} does not enclose every pole and x0")));
                }
            };
            // leave x0 along the cut until the circle |x| = radius
            let dir = Complex64::from_polar(1.0, cut_direction(x0, &locs));
            let b = (x0 * dir.conj()).re;
            let s = -b + (b * b - x0.norm_sqr() + radius * radius).sqrt();
            let exit = x0 + dir * s;
            let pieces = vec![
                PathPiece::Segment { from: x0, to: exit },
                PathPiece::Arc { center: Complex64::new(0.0, 0.0), radius, start: exit.arg(), sweep: -2.0 * PI },
                PathPiece::Segment { from: exit, to: x0 },
            ];
            let margin = 1e-6 * radius;
            ResolvedLoop { path: Path { pieces }, center: Complex64::new(0.0, 0.0), radius, margin }
        }
    };
    for (j, p) in locs.iter().enumerate() {
        let (q, d) = resolved.path.distance(*p);
        if d < resolved.margin {
            return Err(near_pole(q, j, resolved.margin));
        }
    }
    Ok(resolved)
}

fn inf_norm(m: &CMat) -> f64 {
    m.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Continue `y0` along `path` for the frozen system. The reported
/// `err_sum` is `‖Y_end‖ Σ_k ‖Y_k⁻¹ E_k‖` with `E_k` the local error
/// estimate of step `k`, or the plain sum of local errors if `Y` is singular.
pub fn integrate_frozen(
    frozen: &FrozenSystem,
    path: &Path,
    y0: &CMat,
    opts: &OdeOptions,
) -> Result<(CMat, StepReport)> {
    let n = frozen.dim;
    if y0.nrows() != n || y0.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial value is {}x{}, system is {n}x{n}",
            y0.nrows(),
            y0.ncols()
        )));
    }
    let mut y: Vec<Complex64> = y0.as_slice().to_vec();
    let mut report = StepReport::default();
    let mut buf = CMat::zeros(n, n);
    // Σ ‖Y_k⁻¹ E_k‖: local errors carried to the endpoint by the fundamental matrix
    let mut carried = Some(0.0f64);
    for piece in &path.pieces {
        let r = ode::integrate(
            |s, yv, dy| {
                let x = piece.point(s);
                frozen.eval_into(x, &mut buf)?;
                buf *= piece.velocity(s);
                let ym = nalgebra::DMatrixView::from_slice(yv, n, n);
                let mut out = nalgebra::DMatrixViewMut::from_slice(dy, n, n);
                buf.mul_to(&ym, &mut out);
                Ok(())
            },
            0.0,
            1.0,
            &mut y,
            opts,
            |step, yv| {
                if let Some(acc) = carried.as_mut() {
                    let ym = CMat::from_column_slice(n, n, yv);
                    match linalg::inverse(&ym) {
                        Some(inv) => *acc += inf_norm(&(inv * CMat::from_column_slice(n, n, step.err))),
                        None => carried = None,
                    }
                }
                Ok(())
            },
        )?;
        report.merge(r);
    }
    let m = CMat::from_column_slice(n, n, &y);
    if let Some(acc) = carried {
        report.err_sum = inf_norm(&m) * acc;
    }
    Ok((m, report))
}

pub fn integrate_along(
    a: &ParamRationalMatrix,
    path: &Path,
    t: &ParameterPoint,
    y0: &CMat,
    opts: &OdeOptions,
) -> Result<(CMat, StepReport)> {
    integrate_frozen(&a.freeze(t)?, path, y0, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyRecord {
    pub t: ParameterPoint,
    pub loop_index: usize,
    pub matrix: CMat,
    pub err_estimate: f64,
    /// `|det M − exp(2πi tr R)|` for a loop around a simple pole with residue `R`.
    pub det_check: Option<f64>,
    pub steps: usize,
}

pub fn monodromy_matrix(
    a: &ParamRationalMatrix,
    spec: &LoopSpec,
    t: &ParameterPoint,
    opts: &OdeOptions,
) -> Result<MonodromyRecord> {
    let frozen = a.freeze(t)?;
    monodromy_frozen(&frozen, spec, t, 0, opts)
}

/// [`monodromy_matrix`] for an already frozen system.
pub fn monodromy_frozen(
    frozen: &FrozenSystem,
    spec: &LoopSpec,
    t: &ParameterPoint,
    loop_index: usize,
    opts: &OdeOptions,
) -> Result<MonodromyRecord> {
    let lp = resolve_loop(frozen, spec)?;
    let (m, rep) = integrate_frozen(frozen, &lp.path, &linalg::identity(frozen.dim), opts)?;
    let det = m.determinant();
    if det.norm() <= 1e-12 * linalg::max_abs(&m).powi(frozen.dim as i32).max(1e-300) {
        return Err(Error::IntegrationFailure("monodromy matrix is numerically singular".into()));
    }
    let det_check = match spec.target {
        LoopTarget::Pole(i) => {
            let p = &frozen.poles[i];
            (p.effective_order(SysTolerances::default().drop_tol) <= 1)
                .then(|| (det - (TWO_PI_I * linalg::trace(p.coefficient(1))).exp()).norm())
        }
        LoopTarget::Infinity => None,
    };
    Ok(MonodromyRecord {
        t: t.clone(),
        loop_index,
        matrix: m,
        err_estimate: rep.err_sum,
        det_check,
        steps: rep.accepted,
    })
}

/// Parameter points: an explicit list, or `steps` evenly spaced points on the
/// segment from `start` to `end` (both included).
#[derive(Debug, Clone, PartialEq)]
pub enum TGrid {
    Points(Vec<ParameterPoint>),
    Segment { start: ParameterPoint, end: ParameterPoint, steps: usize },
}

impl TGrid {
    pub fn points(&self) -> Result<Vec<ParameterPoint>> {
        let pts = match self {
            TGrid::Points(p) => p.clone(),
            TGrid::Segment { start, end, steps } => {
                if *steps == 0 {
                    return Err(Error::InvalidInput("grid segment needs at least one step".into()));
                }
                if start.len() != end.len() {
                    return Err(Error::DimensionMismatch("grid endpoints differ in length".into()));
                }
                (0..*steps)
                    .map(|k| {
                        let s = if *steps == 1 { 0.0 } else { k as f64 / (*steps - 1) as f64 };
                        ParameterPoint(start.0.iter().zip(&end.0).map(|(a, b)| a + (b - a) * s).collect())
                    })
                    .collect()
            }
        };
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if pts[i] == pts[j] {
                    return Err(Error::InvalidInput(format!("grid points {i} and {j} coincide")));
                }
            }
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub t_index: usize,
    pub loop_index: usize,
    pub t: ParameterPoint,
    pub outcome: std::result::Result<MonodromyRecord, Error>,
}

/// Monodromy over a parameter grid, `t`-major and loop-minor. Cell failures
/// are kept in place. A pole that leaves the disk of its loop at the first
/// grid point fails the cell with `POLE_MIGRATION`.
pub fn monodromy_grid(
    a: &ParamRationalMatrix,
    loops: &[LoopSpec],
    grid: &TGrid,
    opts: &OdeOptions,
) -> Result<Vec<GridCell>> {
    let pts = grid.points()?;
    if let Some(w) = loops.windows(2).find(|w| w[0].base != w[1].base) {
        return Err(Error::InvalidLoop(format!("loops must share a base point ({} vs {})", w[0].base, w[1].base)));
    }
    let Some(t_ref) = pts.first() else {
        return Ok(Vec::new());
    };
    // reference disks at the first grid point
    let reference: Vec<Option<(Complex64, f64)>> = match a.freeze(t_ref) {
        Ok(f) => loops
            .iter()
            .map(|l| match l.target {
                LoopTarget::Pole(_) => resolve_loop(&f, l).ok().map(|r| (r.center, r.radius)),
                LoopTarget::Infinity => None,
            })
            .collect(),
        Err(_) => vec![None; loops.len()],
    };
    let jobs: Vec<(usize, usize)> = (0..pts.len()).flat_map(|ti| (0..loops.len()).map(move |li| (ti, li))).collect();
    let cells = jobs
        .par_iter()
        .map(|&(ti, li)| {
            let t = &pts[ti];
            let outcome = a.freeze(t).and_then(|f| {
                if let (LoopTarget::Pole(p), Some((c, r))) = (loops[li].target, reference[li]) {
                    if let Some(fp) = f.poles.get(p) {
                        let moved = (fp.location - c).norm();
                        if moved > r {
                            return Err(Error::PoleMigration { pole: p, moved, radius: r });
                        }
                    }
                }
                monodromy_frozen(&f, &loops[li], t, li, opts)
            });
            GridCell { t_index: ti, loop_index: li, t: t.clone(), outcome }
        })
        .collect();
    Ok(cells)
}

/// `‖M_{o_1}·M_{o_2}⋯M_{o_k} − I‖` for records at one parameter point,
/// multiplied in the listed order.
pub fn product_relation(records: &[MonodromyRecord], order: &[usize]) -> Result<f64> {
    let Some(first) = records.first() else {
        return Err(Error::MissingRecord("no records".into()));
    };
    let n = first.matrix.nrows();
    let mut acc = linalg::identity(n);
    for &k in order {
        let r = records
            .iter()
            .find(|r| r.loop_index == k)
            .ok_or_else(|| Error::MissingRecord(format!("no record for loop {k}")))?;
        if r.t != first.t {
            return Err(Error::MissingRecord(format!("record for loop {k} is at a different parameter point")));
        }
        acc *= &r.matrix;
    }
    Ok(linalg::max_abs_diff(&acc, &linalg::identity(n)))
}
