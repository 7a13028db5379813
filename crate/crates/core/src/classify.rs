//! Integrability (zero curvature), isomonodromy and projective isomonodromy
//! on sampled parameter grids, and the trace split of Fuchsian residues.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::{ParamExpr, ParameterPoint};
use crate::linalg::{self, CMat, TWO_PI_I};
use crate::monodromy::{self, GridCell, LoopSpec, LoopTarget, MonodromyRecord, TGrid};
use crate::ode::OdeOptions;
use crate::sysmodel::{self, eval_admissible, ExprMatrix, ParamRationalMatrix, PoleLocus, SampleDomain};

pub const DEFAULT_ZC_TOL: f64 = 1e-9;
pub const DEFAULT_ISO_TOL: f64 = 1e-7;
pub const DEFAULT_PROJ_TOL: f64 = 1e-6;

/// Integration tolerances for classification runs. The accumulated error
/// estimate scales like `steps × rtol`; at these settings the inconclusive
/// band `10 × err_estimate` stays well inside the default thresholds.
pub fn classification_options() -> OdeOptions {
    OdeOptions::new(1e-12, 1e-14)
}

/// `∂_x Y = A_x Y`, `∂_{t_j} Y = A_{t_j} Y` for `j = 1..r`.
#[derive(Debug, Clone)]
pub struct IntegrableSystemSpec {
    pub a_x: ParamRationalMatrix,
    pub a_t: Vec<ParamRationalMatrix>,
}

impl IntegrableSystemSpec {
    pub fn new(a_x: ParamRationalMatrix, a_t: Vec<ParamRationalMatrix>) -> Result<Self> {
        let r = a_x.num_params();
        if a_t.len() < r {
            return Err(Error::MissingDirection(format!("{} t-directions given, {r} parameters declared", a_t.len())));
        }
        if a_t.len() > r {
            return Err(Error::DimensionMismatch(format!("{} t-directions given, {r} parameters declared", a_t.len())));
        }
        for (j, m) in a_t.iter().enumerate() {
            if m.dim() != a_x.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "A_t{} has dimension {}, A_x has {}",
                    j + 1,
                    m.dim(),
                    a_x.dim()
                )));
            }
            if m.num_params() > r {
                return Err(Error::ParamOutOfRange { index: m.num_params(), declared: r });
            }
        }
        Ok(IntegrableSystemSpec { a_x, a_t })
    }

    /// `A_0 = A_x`, `A_j = A_{t_j}`.
    pub fn direction(&self, j: usize) -> &ParamRationalMatrix {
        if j == 0 {
            &self.a_x
        } else {
            &self.a_t[j - 1]
        }
    }

    pub fn num_directions(&self) -> usize {
        self.a_t.len() + 1
    }

    fn derivative(&self, of: usize, along: usize) -> Result<ParamRationalMatrix> {
        let m = self.direction(of);
        if along == 0 {
            Ok(m.dx())
        } else {
            m.dt(along)
        }
    }
}

/// Max over seeded samples of `‖∂_j A_k − ∂_k A_j − [A_j, A_k]‖`, with exact
/// symbolic derivatives. Samples near poles are redrawn.
pub fn zero_curvature_residual(
    spec: &IntegrableSystemSpec,
    j: usize,
    k: usize,
    samples: usize,
    seed: u64,
    domain: &SampleDomain,
) -> Result<f64> {
    let d = spec.num_directions();
    if j == k || j >= d || k >= d {
        return Err(Error::InvalidInput(format!("direction pair ({j}, {k}) is not valid for {d} directions")));
    }
    let djak = spec.derivative(k, j)?;
    let dkaj = spec.derivative(j, k)?;
    let (aj, ak) = (spec.direction(j), spec.direction(k));
    let r = spec.a_x.num_params();
    let res = sysmodel::sample_points(domain, r, samples, seed, |x, t| {
        let mut vals = Vec::with_capacity(4);
        for sys in [&djak, &dkaj, aj, ak] {
            match eval_admissible(sys, x, t, domain.min_pole_distance)? {
                Some(v) => vals.push(v),
                None => return Ok(None),
            }
        }
        let curv = &vals[0] - &vals[1] - linalg::commutator(&vals[2], &vals[3]);
        Ok(Some(linalg::max_abs(&curv)))
    })?;
    Ok(res.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrabilityReport {
    /// `(j, k, residual)` for every pair `j < k`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub tol: f64,
    pub integrable: bool,
}

pub fn integrability_report(
    spec: &IntegrableSystemSpec,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<IntegrabilityReport> {
    let domain = SampleDomain::default();
    let d = spec.num_directions();
    let mut pairs = Vec::new();
    for j in 0..d {
        for k in j + 1..d {
            pairs.push((j, k, zero_curvature_residual(spec, j, k, samples, seed, &domain)?));
        }
    }
    let integrable = pairs.iter().all(|p| p.2 < tol);
    Ok(IntegrabilityReport { pairs, tol, integrable })
}

/// Residues `A_i = B_i + b_i I` with `b_i = tr A_i / n`.
#[derive(Debug, Clone)]
pub struct FuchsianSplit {
    pub dim: usize,
    pub num_params: usize,
    pub locations: Vec<ParamExpr>,
    pub scalars: Vec<ParamExpr>,
    pub traceless: Vec<ExprMatrix>,
}

pub fn fuchsian_split(a: &ParamRationalMatrix) -> Result<FuchsianSplit> {
    if a.poly().iter().any(|m| !m.is_structurally_zero()) {
        return Err(Error::NotFuchsian("system has a polynomial part".into()));
    }
    let n = a.dim();
    let mut scalars = Vec::new();
    let mut traceless = Vec::new();
    for (i, p) in a.poles().iter().enumerate() {
        if p.order() != 1 {
            return Err(Error::NotFuchsian(format!("pole {i} has order {}", p.order())));
        }
        let res = p.residue();
        let b = res.trace() / ParamExpr::real(n as f64);
        traceless.push(res.sub(&ExprMatrix::scalar(n, b.clone())));
        scalars.push(b);
    }
    Ok(FuchsianSplit {
        dim: n,
        num_params: a.num_params(),
        locations: a.poles().iter().map(|p| p.location.clone()).collect(),
        scalars,
        traceless,
    })
}

impl FuchsianSplit {
    /// `Σ B_i / (x − α_i)`.
    pub fn traceless_system(&self) -> Result<ParamRationalMatrix> {
        let poles =
            self.locations.iter().zip(&self.traceless).map(|(l, b)| PoleLocus::simple(l.clone(), b.clone())).collect();
        ParamRationalMatrix::new(self.dim, self.num_params, poles, Vec::new())
    }

    /// `Σ b_i I / (x − α_i)`.
    pub fn scalar_system(&self) -> Result<ParamRationalMatrix> {
        let poles = self
            .locations
            .iter()
            .zip(&self.scalars)
            .map(|(l, b)| PoleLocus::simple(l.clone(), ExprMatrix::scalar(self.dim, b.clone())))
            .collect();
        ParamRationalMatrix::new(self.dim, self.num_params, poles, Vec::new())
    }

    pub fn scalars_at(&self, t: &ParameterPoint) -> Result<Vec<Complex64>> {
        self.scalars.iter().map(|b| b.eval(t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Isomonodromic,
    ProjectivelyIsomonodromic,
    Neither,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Isomonodromic => "isomonodromic",
            Verdict::ProjectivelyIsomonodromic => "projectively_isomonodromic",
            Verdict::Neither => "neither",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub iso: f64,
    pub proj: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { iso: DEFAULT_ISO_TOL, proj: DEFAULT_PROJ_TOL }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopClassification {
    pub loop_index: usize,
    /// `Γ = M(t₀)`.
    pub gamma: CMat,
    /// `c(t) = tr(M(t) M(t₀)^{−1}) / n` at every grid point.
    pub c_samples: Vec<Complex64>,
    /// `max_t ‖M(t) − M(t₀)‖`.
    pub iso_residual: f64,
    /// `max_t ‖N(t) − c(t) I‖` with `N(t) = M(t) M(t₀)^{−1}`.
    pub proj_residual: f64,
    /// `max(1, ‖M(t₀)‖)`; thresholds are tolerance times scale.
    pub scale: f64,
    pub max_err: f64,
    /// `max_err` carried through `M(t₀)⁻¹` into the units of the projective residual.
    pub proj_err: f64,
    /// Set when `arg c` jumps by more than `π/2` between neighbours.
    pub needs_refinement: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub verdict: Verdict,
    pub loops: Vec<LoopClassification>,
    pub tolerances: Tolerances,
}

impl ClassificationReport {
    pub fn max_residual(&self, projective: bool) -> f64 {
        self.loops
            .iter()
            .map(|l| if projective { l.proj_residual } else { l.iso_residual } / l.scale)
            .fold(0.0, f64::max)
    }
}

/// Group successful grid cells by loop; fails if any cell is missing.
pub fn records_by_loop(cells: &[GridCell]) -> Result<Vec<Vec<MonodromyRecord>>> {
    let nloops = cells.iter().map(|c| c.loop_index + 1).max().unwrap_or(0);
    let mut out = vec![Vec::new(); nloops];
    for c in cells {
        match &c.outcome {
            Ok(r) => out[c.loop_index].push(r.clone()),
            Err(e) => {
                return Err(Error::MissingRecord(format!(
                    "loop {} at grid point {}: {}",
                    c.loop_index,
                    c.t_index,
                    e.code()
                )))
            }
        }
    }
    Ok(out)
}

fn classify_loop(records: &[MonodromyRecord]) -> Result<LoopClassification> {
    let m0 = &records[0].matrix;
    let n = m0.nrows();
    let inv = linalg::inverse(m0).ok_or(Error::SingularReference(records[0].loop_index))?;
    let mut c_samples = Vec::with_capacity(records.len());
    let (mut iso, mut proj, mut c_max) = (0.0f64, 0.0f64, 1.0f64);
    for r in records {
        iso = iso.max(linalg::max_abs_diff(&r.matrix, m0));
        let nm = &r.matrix * &inv;
        let c = linalg::trace(&nm) / n as f64;
        proj = proj.max(linalg::max_abs_diff(&nm, &(linalg::identity(n) * c)));
        c_max = c_max.max(c.norm());
        c_samples.push(c);
    }
    let needs_refinement = c_samples.windows(2).any(|w| (w[1] / w[0]).arg().abs() > std::f64::consts::FRAC_PI_2);
    let max_err = records.iter().map(|r| r.err_estimate).fold(0.0, f64::max);
    // δN ≈ (δM(t) + N δM(t₀)) M(t₀)⁻¹
    let proj_err = n as f64 * max_err * (1.0 + c_max) * linalg::max_abs(&inv);
    Ok(LoopClassification {
        loop_index: records[0].loop_index,
        gamma: m0.clone(),
        c_samples,
        iso_residual: iso,
        proj_residual: proj,
        scale: linalg::max_abs(m0).max(1.0),
        max_err,
        proj_err,
        needs_refinement,
    })
}

/// Classify per-loop record series (each ordered along the grid, first
/// entry is the reference point `t₀`). A failed check whose residual is
/// within `10 × err_estimate` (carried into the residual's units) makes the
/// verdict inconclusive.
pub fn classify_monodromy(by_loop: &[Vec<MonodromyRecord>], tol: Tolerances) -> Result<ClassificationReport> {
    let npts = by_loop.first().map(Vec::len).unwrap_or(0);
    if npts < 2 {
        return Err(Error::InvalidInput("classification needs at least two grid points".into()));
    }
    if let Some(l) = by_loop.iter().position(|v| v.len() != npts) {
        return Err(Error::MissingRecord(format!("loop {l} has {} records, expected {npts}", by_loop[l].len())));
    }
    let loops = by_loop.iter().map(|v| classify_loop(v)).collect::<Result<Vec<_>>>()?;
    // a failed check only counts when the residual clears integration noise
    let noisy = |res: f64, thr: f64, err: f64| res >= thr && res <= 10.0 * err;
    let iso_ok = loops.iter().all(|l| l.iso_residual < tol.iso * l.scale);
    let proj_ok = loops.iter().all(|l| l.proj_residual < tol.proj * l.scale);
    let iso_noisy = loops.iter().any(|l| noisy(l.iso_residual, tol.iso * l.scale, l.max_err));
    let proj_noisy = loops.iter().any(|l| noisy(l.proj_residual, tol.proj * l.scale, l.proj_err));
    let (verdict, ambiguous) = if iso_ok {
        (Verdict::Isomonodromic, false)
    } else if proj_ok {
        (Verdict::ProjectivelyIsomonodromic, iso_noisy)
    } else {
        (Verdict::Neither, proj_noisy)
    };
    Ok(ClassificationReport {
        verdict: if ambiguous { Verdict::Inconclusive } else { verdict },
        loops,
        tolerances: tol,
    })
}

#[derive(Debug, Clone)]
pub struct ProjectiveSplitReport {
    pub split: FuchsianSplit,
    /// Classification of `Σ B_i/(x−α_i)`.
    pub traceless: ClassificationReport,
    /// `max_t ‖M(t) e^{−2πi b(t)} − M(t₀) e^{−2πi b(t₀)}‖ / ‖M(t₀)‖` over loops.
    pub reconstruction_drift: f64,
    pub verdict: Verdict,
}

/// Split off the scalar part, classify the traceless system on `grid`, and
/// check that the full monodromy equals `e^{2πi b_i(t)}` times a constant.
pub fn projective_split_check(
    a: &ParamRationalMatrix,
    loops: &[LoopSpec],
    grid: &TGrid,
    opts: &OdeOptions,
    tol: Tolerances,
) -> Result<ProjectiveSplitReport> {
    let split = fuchsian_split(a)?;
    let traceless_sys = split.traceless_system()?;
    let traceless =
        classify_monodromy(&records_by_loop(&monodromy::monodromy_grid(&traceless_sys, loops, grid, opts)?)?, tol)?;
    let full = records_by_loop(&monodromy::monodromy_grid(a, loops, grid, opts)?)?;
    let mut drift = 0.0f64;
    for (li, recs) in full.iter().enumerate() {
        let factor = |t: &ParameterPoint| -> Result<Complex64> {
            let b = split.scalars_at(t)?;
            let s = match loops[li].target {
                LoopTarget::Pole(i) => b[i],
                LoopTarget::Infinity => -b.iter().sum::<Complex64>(),
            };
            Ok((-TWO_PI_I * s).exp())
        };
        let r0 = &recs[0].matrix * factor(&recs[0].t)?;
        let scale = linalg::max_abs(&r0).max(1e-300);
        for r in recs {
            drift = drift.max(linalg::max_abs_diff(&(&r.matrix * factor(&r.t)?), &r0) / scale);
        }
    }
    let verdict = match traceless.verdict {
        Verdict::Isomonodromic if drift < tol.proj => Verdict::ProjectivelyIsomonodromic,
        Verdict::Inconclusive => Verdict::Inconclusive,
        _ => Verdict::Neither,
    };
    Ok(ProjectiveSplitReport { split, traceless, reconstruction_drift: drift, verdict })
}

/// Frame of the joint solution at the base point: `F(t₀) = I` and
/// `dF = Σ_j A_{t_j}(x₀, t) dt_j · F`, continued along the polyline through
/// `points`. For an integrable system `F(t)⁻¹ M(t) F(t)` is the monodromy of
/// one solution of both equations.
pub fn transported_frames(
    spec: &IntegrableSystemSpec,
    x0: Complex64,
    points: &[ParameterPoint],
    opts: &OdeOptions,
) -> Result<Vec<CMat>> {
    let n = spec.a_x.dim();
    let mut y: Vec<Complex64> = linalg::identity(n).as_slice().to_vec();
    let mut frames = Vec::with_capacity(points.len());
    if let Some(p) = points.first() {
        if p.len() != spec.a_t.len() {
            return Err(Error::DimensionMismatch(format!(
                "grid points have {} coordinates, {} t-directions given",
                p.len(),
                spec.a_t.len()
            )));
        }
        frames.push(linalg::identity(n));
    }
    for w in points.windows(2) {
        let (ta, tb) = (&w[0], &w[1]);
        let dt: Vec<Complex64> = tb.coords().iter().zip(ta.coords()).map(|(b, a)| b - a).collect();
        crate::ode::integrate(
            |s, yv, dy| {
                let t = ParameterPoint::new(ta.coords().iter().zip(&dt).map(|(a, d)| a + d * s).collect());
                let mut gen = CMat::zeros(n, n);
                for (j, d) in dt.iter().enumerate() {
                    if d.norm() > 0.0 {
                        gen += spec.a_t[j].eval(x0, &t)? * *d;
                    }
                }
                let out = gen * nalgebra::DMatrixView::from_slice(yv, n, n);
                dy.copy_from_slice(out.as_slice());
                Ok(())
            },
            0.0,
            1.0,
            &mut y,
            opts,
            |_, _| Ok(()),
        )?;
        frames.push(CMat::from_column_slice(n, n, &y));
    }
    Ok(frames)
}

/// Rewrite per-loop records in the transported frame, `M ↦ F⁻¹ M F`.
/// Error estimates are scaled by the condition number of `F`.
pub fn records_in_frame(by_loop: &[Vec<MonodromyRecord>], frames: &[CMat]) -> Result<Vec<Vec<MonodromyRecord>>> {
    let inverses = frames
        .iter()
        .map(|f| linalg::inverse(f).ok_or_else(|| Error::IntegrationFailure("transported frame is singular".into())))
        .collect::<Result<Vec<_>>>()?;
    by_loop
        .iter()
        .map(|recs| {
            if recs.len() != frames.len() {
                return Err(Error::MissingRecord(format!("{} records for {} frames", recs.len(), frames.len())));
            }
            Ok(recs
                .iter()
                .zip(frames.iter().zip(&inverses))
                .map(|(r, (f, fi))| {
                    let cond = linalg::max_abs(f) * linalg::max_abs(fi) * (f.nrows() * f.nrows()) as f64;
                    MonodromyRecord { matrix: fi * &r.matrix * f, err_estimate: r.err_estimate * cond, ..r.clone() }
                })
                .collect())
        })
        .collect()
}

/// Classification of an integrable system in the frame of its joint solution.
pub fn classify_integrable(
    spec: &IntegrableSystemSpec,
    loops: &[LoopSpec],
    grid: &TGrid,
    opts: &OdeOptions,
    tol: Tolerances,
) -> Result<ClassificationReport> {
    let base = loops.first().map(|l| l.base).ok_or_else(|| Error::InvalidInput("no loops given".into()))?;
    let points = grid.points()?;
    let by_loop = records_by_loop(&monodromy::monodromy_grid(&spec.a_x, loops, grid, opts)?)?;
    let frames = transported_frames(spec, base, &points, opts)?;
    classify_monodromy(&records_in_frame(&by_loop, &frames)?, tol)
}
