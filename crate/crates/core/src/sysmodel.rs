//! Parameterized systems `dY/dx = A(x,t) Y` with `A` rational in `x`.
//!
//! `A` is stored in partial-fraction form: a list of moving poles
//! `α_i(t)` each carrying Laurent coefficient matrices for
//! `(x−α_i)^{−m}, …, (x−α_i)^{−1}`, plus a polynomial part
//! `P_0 + P_1 x + …`. All coefficients are [`ParamExpr`]s, so
//! t-derivatives are exact; x-derivatives are exact by construction.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{ParamExpr, ParameterPoint};
use crate::linalg::{self, CMat};

/// Default seed for probabilistic identity tests.
pub const DEFAULT_SEED: u64 = 0xA11CE;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SysTolerances {
    /// Minimum distance between an evaluation point and any pole.
    pub pole_guard_radius: f64,
    /// Entry modulus below which a Laurent coefficient counts as vanishing.
    pub drop_tol: f64,
}

impl Default for SysTolerances {
    fn default() -> Self {
        SysTolerances { pole_guard_radius: 1e-12, drop_tol: 1e-13 }
    }
}

/// Square matrix of expressions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprMatrix {
    n: usize,
    entries: Vec<ParamExpr>,
}

impl ExprMatrix {
    pub fn new(n: usize, entries: Vec<ParamExpr>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        Ok(ExprMatrix { n, entries })
    }

    pub fn from_rows(rows: Vec<Vec<ParamExpr>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("matrix rows must all have length n".into()));
        }
        Ok(ExprMatrix { n, entries: rows.into_iter().flatten().collect() })
    }

    /// Matrix of constants.
    pub fn constant(m: &CMat) -> Self {
        let n = m.nrows();
        let entries = (0..n * n).map(|k| ParamExpr::Const(m[(k / n, k % n)])).collect();
        ExprMatrix { n, entries }
    }

    pub fn zeros(n: usize) -> Self {
        ExprMatrix { n, entries: vec![ParamExpr::zero(); n * n] }
    }

    /// `e · I`.
    pub fn scalar(n: usize, e: ParamExpr) -> Self {
        let mut m = Self::zeros(n);
        for k in 0..n {
            m.entries[k * n + k] = e.clone();
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> &ParamExpr {
        &self.entries[r * self.n + c]
    }

    pub fn entries(&self) -> &[ParamExpr] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<ParamExpr>> {
        self.entries.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn eval(&self, t: &ParameterPoint) -> Result<CMat> {
        let vals = self.entries.iter().map(|e| e.eval(t)).collect::<Result<Vec<_>>>()?;
        Ok(CMat::from_row_slice(self.n, self.n, &vals))
    }

    /// Every entry is a literal zero.
    pub fn is_structurally_zero(&self) -> bool {
        self.entries.iter().all(ParamExpr::is_zero)
    }

    pub fn map(&self, f: impl Fn(&ParamExpr) -> ParamExpr) -> Self {
        ExprMatrix { n: self.n, entries: self.entries.iter().map(f).collect() }
    }

    pub fn diff(&self, j: usize) -> Self {
        self.map(|e| e.diff(j))
    }

    pub fn scale(&self, s: &ParamExpr) -> Self {
        self.map(|e| s.clone() * e.clone())
    }

    pub fn add(&self, other: &ExprMatrix) -> Self {
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a.clone() + b.clone()).collect();
        ExprMatrix { n: self.n, entries }
    }

    pub fn sub(&self, other: &ExprMatrix) -> Self {
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a.clone() - b.clone()).collect();
        ExprMatrix { n: self.n, entries }
    }

    /// Sum of diagonal entries as an expression.
    pub fn trace(&self) -> ParamExpr {
        (0..self.n).fold(ParamExpr::zero(), |acc, k| acc + self.get(k, k).clone())
    }

    fn max_param(&self) -> usize {
        self.entries.iter().map(ParamExpr::max_param).max().unwrap_or(0)
    }
}

/// A moving pole `α(t)` with Laurent coefficients, highest order first.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleLocus {
    pub location: ParamExpr,
    pub laurent: Vec<ExprMatrix>,
}

impl PoleLocus {
    pub fn new(location: ParamExpr, laurent: Vec<ExprMatrix>) -> Self {
        PoleLocus { location, laurent }
    }

    /// Simple pole `residue / (x − location)`.
    pub fn simple(location: ParamExpr, residue: ExprMatrix) -> Self {
        PoleLocus { location, laurent: vec![residue] }
    }

    pub fn order(&self) -> usize {
        self.laurent.len()
    }

    /// Coefficient of `(x−α)^{−k}`, `k` in `1..=order`.
    pub fn coefficient(&self, k: usize) -> &ExprMatrix {
        &self.laurent[self.order() - k]
    }

    pub fn residue(&self) -> &ExprMatrix {
        self.coefficient(1)
    }

    fn from_by_order(location: ParamExpr, mut by_order: Vec<ExprMatrix>) -> Option<Self> {
        while by_order.last().is_some_and(ExprMatrix::is_structurally_zero) {
            by_order.pop();
        }
        if by_order.is_empty() {
            return None;
        }
        by_order.reverse();
        Some(PoleLocus { location, laurent: by_order })
    }
}

/// Pole order after dropping Laurent coefficients that vanish at a given t.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleOrder {
    pub index: usize,
    pub location: Complex64,
    /// 0 when every coefficient vanishes (the point is not singular there).
    pub order: usize,
}

impl PoleOrder {
    pub fn is_simple(&self) -> bool {
        self.order == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamRationalMatrix {
    dim: usize,
    num_params: usize,
    poles: Vec<PoleLocus>,
    poly: Vec<ExprMatrix>,
}

impl ParamRationalMatrix {
    /// Validate shapes and parameter arity. Does not prune coefficients;
    /// see [`ParamRationalMatrix::pruned`].
    pub fn new(dim: usize, num_params: usize, poles: Vec<PoleLocus>, poly: Vec<ExprMatrix>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        for (i, p) in poles.iter().enumerate() {
            if p.laurent.is_empty() {
                return Err(Error::InvalidInput(format!("pole {i} has no Laurent coefficients")));
            }
            p.location.check_arity(num_params)?;
            for m in &p.laurent {
                if m.dim() != dim {
                    return Err(Error::DimensionMismatch(format!("pole {i}: coefficient is {0}x{0}", m.dim())));
                }
                m.max_param()
                    .le(&num_params)
                    .then_some(())
                    .ok_or(Error::ParamOutOfRange { index: m.max_param(), declared: num_params })?;
            }
        }
        for m in &poly {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch(format!("polynomial coefficient is {0}x{0}", m.dim())));
            }
            if m.max_param() > num_params {
                return Err(Error::ParamOutOfRange { index: m.max_param(), declared: num_params });
            }
        }
        Ok(ParamRationalMatrix { dim, num_params, poles, poly })
    }

    /// The zero system (`A ≡ 0`).
    pub fn zero(dim: usize, num_params: usize) -> Self {
        ParamRationalMatrix { dim, num_params, poles: Vec::new(), poly: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn poles(&self) -> &[PoleLocus] {
        &self.poles
    }

    pub fn poly(&self) -> &[ExprMatrix] {
        &self.poly
    }

    pub fn max_order(&self) -> usize {
        self.poles.iter().map(PoleLocus::order).max().unwrap_or(0)
    }

    pub fn poly_degree(&self) -> usize {
        self.poly.len().saturating_sub(1)
    }

    /// Drop leading Laurent coefficients (and whole loci) whose entries are
    /// identically zero, decided by evaluation at 20 seeded parameter points
    /// against the default drop tolerance. Trailing zero polynomial
    /// coefficients are dropped the same way.
    pub fn pruned(&self) -> Self {
        let drop_tol = SysTolerances::default().drop_tol;
        let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
        let pts: Vec<ParameterPoint> = (0..20).map(|_| random_point(&mut rng, self.num_params, None, 1.0)).collect();
        let vanishes = |m: &ExprMatrix| {
            m.is_structurally_zero()
                || pts.iter().all(|t| m.eval(t).map(|v| linalg::max_abs(&v) < drop_tol).unwrap_or(false))
        };
        let mut poles = Vec::new();
        for p in &self.poles {
            let keep = p.laurent.iter().skip_while(|m| vanishes(m)).cloned().collect::<Vec<_>>();
            if !keep.is_empty() {
                poles.push(PoleLocus { location: p.location.clone(), laurent: keep });
            }
        }
        let mut poly = self.poly.clone();
        while poly.last().is_some_and(&vanishes) {
            poly.pop();
        }
        ParamRationalMatrix { poles, poly, ..self.clone() }
    }

    /// Evaluate every coefficient at `t`. Fails with `POLE_COLLISION` when
    /// two pole locations coincide within the guard radius.
    pub fn freeze(&self, t: &ParameterPoint) -> Result<FrozenSystem> {
        self.freeze_with(t, &SysTolerances::default())
    }

    pub fn freeze_with(&self, t: &ParameterPoint, tol: &SysTolerances) -> Result<FrozenSystem> {
        if t.len() < self.num_params {
            return Err(Error::ParamOutOfRange { index: self.num_params, declared: t.len() });
        }
        let mut poles = Vec::with_capacity(self.poles.len());
        for p in &self.poles {
            let location = p.location.eval(t)?;
            let laurent = p.laurent.iter().map(|m| m.eval(t)).collect::<Result<Vec<_>>>()?;
            poles.push(FrozenPole { location, laurent });
        }
        for i in 0..poles.len() {
            for j in i + 1..poles.len() {
                if (poles[i].location - poles[j].location).norm() < tol.pole_guard_radius {
                    return Err(Error::PoleCollision(i, j));
                }
            }
        }
        let poly = self.poly.iter().map(|m| m.eval(t)).collect::<Result<Vec<_>>>()?;
        Ok(FrozenSystem { dim: self.dim, poles, poly, guard: tol.pole_guard_radius })
    }

    pub fn eval(&self, x: Complex64, t: &ParameterPoint) -> Result<CMat> {
        self.freeze(t)?.eval(x)
    }

    /// Exact derivative in `t_j` (1-based). A pole of order `m` at a moving
    /// location yields order `m+1` through `∂_t (x−α)^{−k} = k α′ (x−α)^{−k−1}`.
    pub fn dt(&self, j: usize) -> Result<Self> {
        if j == 0 || j > self.num_params {
            return Err(Error::ParamOutOfRange { index: j, declared: self.num_params });
        }
        let mut poles = Vec::new();
        for p in &self.poles {
            let m = p.order();
            let dalpha = p.location.diff(j);
            let by_order = (1..=m + 1)
                .map(|k| {
                    let own = if k <= m { p.coefficient(k).diff(j) } else { ExprMatrix::zeros(self.dim) };
                    if k >= 2 && !dalpha.is_zero() {
                        let s = ParamExpr::real((k - 1) as f64) * dalpha.clone();
                        own.add(&p.coefficient(k - 1).scale(&s))
                    } else {
                        own
                    }
                })
                .collect();
            poles.extend(PoleLocus::from_by_order(p.location.clone(), by_order));
        }
        let poly = self.poly.iter().map(|m| m.diff(j)).collect();
        Ok(ParamRationalMatrix { dim: self.dim, num_params: self.num_params, poles, poly })
    }

    /// Exact derivative in `x`.
    pub fn dx(&self) -> Self {
        let mut poles = Vec::new();
        for p in &self.poles {
            let m = p.order();
            let by_order = (1..=m + 1)
                .map(|k| {
                    if k == 1 {
                        ExprMatrix::zeros(self.dim)
                    } else {
                        p.coefficient(k - 1).scale(&ParamExpr::real(-((k - 1) as f64)))
                    }
                })
                .collect();
            poles.extend(PoleLocus::from_by_order(p.location.clone(), by_order));
        }
        let poly = self.poly.iter().enumerate().skip(1).map(|(d, m)| m.scale(&ParamExpr::real(d as f64))).collect();
        ParamRationalMatrix { dim: self.dim, num_params: self.num_params, poles, poly }
    }

    /// Pole orders at `t` after dropping vanishing leading coefficients.
    pub fn pole_orders(&self, t: &ParameterPoint, tol: &SysTolerances) -> Result<Vec<PoleOrder>> {
        let frozen = self.freeze_with(t, tol)?;
        Ok(frozen
            .poles
            .iter()
            .enumerate()
            .map(|(index, p)| PoleOrder { index, location: p.location, order: p.effective_order(tol.drop_tol) })
            .collect())
    }

    /// Sum with another rational matrix of the same shape (loci concatenated).
    pub fn plus(&self, other: &ParamRationalMatrix) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch("cannot add systems of different dimension".into()));
        }
        let mut poles = self.poles.clone();
        poles.extend(other.poles.iter().cloned());
        let len = self.poly.len().max(other.poly.len());
        let poly = (0..len)
            .map(|d| match (self.poly.get(d), other.poly.get(d)) {
                (Some(a), Some(b)) => a.add(b),
                (Some(a), None) | (None, Some(a)) => a.clone(),
                (None, None) => unreachable!(),
            })
            .collect();
        Ok(ParamRationalMatrix { dim: self.dim, num_params: self.num_params.max(other.num_params), poles, poly })
    }

    pub fn negated(&self) -> Self {
        let neg = |m: &ExprMatrix| m.map(|e| -e.clone());
        ParamRationalMatrix {
            poles: self
                .poles
                .iter()
                .map(|p| PoleLocus { location: p.location.clone(), laurent: p.laurent.iter().map(neg).collect() })
                .collect(),
            poly: self.poly.iter().map(neg).collect(),
            ..self.clone()
        }
    }

    /// Number of sample points used for randomized identity testing.
    pub fn identity_test_points(&self) -> usize {
        2 * (self.max_order() * self.poles.len() + self.poly_degree()) + 8
    }
}

#[derive(Debug, Clone)]
pub struct FrozenPole {
    pub location: Complex64,
    /// Highest order first, as in [`PoleLocus`].
    pub laurent: Vec<CMat>,
}

impl FrozenPole {
    pub fn order(&self) -> usize {
        self.laurent.len()
    }

    pub fn coefficient(&self, k: usize) -> &CMat {
        &self.laurent[self.order() - k]
    }

    pub fn effective_order(&self, drop_tol: f64) -> usize {
        let dropped = self.laurent.iter().take_while(|m| linalg::max_abs(m) < drop_tol).count();
        self.order() - dropped
    }
}

/// A system with all coefficients evaluated at a fixed parameter point.
#[derive(Debug, Clone)]
pub struct FrozenSystem {
    pub dim: usize,
    pub poles: Vec<FrozenPole>,
    pub poly: Vec<CMat>,
    pub guard: f64,
}

impl FrozenSystem {
    pub fn eval(&self, x: Complex64) -> Result<CMat> {
        let mut out = CMat::zeros(self.dim, self.dim);
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, x: Complex64, out: &mut CMat) -> Result<()> {
        out.fill(Complex64::new(0.0, 0.0));
        for (i, p) in self.poles.iter().enumerate() {
            let z = x - p.location;
            if z.norm() < self.guard {
                return Err(Error::NearPole { x: format!("{x}"), pole: i, guard: self.guard });
            }
            let inv = z.inv();
            let mut w = inv;
            for k in 1..=p.order() {
                out.zip_apply(p.coefficient(k), |o, a| *o += a * w);
                w *= inv;
            }
        }
        // Horner on the polynomial part
        if !self.poly.is_empty() {
            let mut acc = self.poly.last().unwrap().clone();
            for m in self.poly.iter().rev().skip(1) {
                acc *= x;
                acc += m;
            }
            *out += acc;
        }
        Ok(())
    }

    pub fn locations(&self) -> Vec<Complex64> {
        self.poles.iter().map(|p| p.location).collect()
    }

    /// Distance from `x` to the nearest pole (infinite without poles).
    pub fn pole_distance(&self, x: Complex64) -> f64 {
        self.poles.iter().map(|p| (x - p.location).norm()).fold(f64::INFINITY, f64::min)
    }
}

/// Region from which random `(x, t)` samples are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDomain {
    /// Centre of the parameter box; origin when `None`.
    pub t_center: Option<ParameterPoint>,
    /// Half-width of the box in real and imaginary part of every `t_j`.
    pub t_radius: f64,
    pub x_center: Complex64,
    pub x_radius: f64,
    /// Samples closer than this to any pole are redrawn.
    pub min_pole_distance: f64,
}

impl Default for SampleDomain {
    fn default() -> Self {
        SampleDomain {
            t_center: None,
            t_radius: 1.0,
            x_center: Complex64::new(0.0, 0.0),
            x_radius: 2.0,
            min_pole_distance: 0.1,
        }
    }
}

pub(crate) fn random_point(
    rng: &mut ChaCha8Rng,
    r: usize,
    center: Option<&ParameterPoint>,
    radius: f64,
) -> ParameterPoint {
    ParameterPoint(
        (0..r)
            .map(|j| {
                let c0 = center.map(|c| c.0[j]).unwrap_or_default();
                c0 + Complex64::new(rng.gen_range(-radius..=radius), rng.gen_range(-radius..=radius))
            })
            .collect(),
    )
}

/// Draw admissible `(x, t)` samples. `accept` returns `Ok(None)` to reject
/// a draw (near a pole, singular evaluation); after `10 × count` attempts
/// the draw fails with `SAMPLING_EXHAUSTED`.
pub fn sample_points<T>(
    domain: &SampleDomain,
    num_params: usize,
    count: usize,
    seed: u64,
    mut accept: impl FnMut(Complex64, &ParameterPoint) -> Result<Option<T>>,
) -> Result<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let budget = 10 * count.max(1);
    let mut attempts = 0;
    while out.len() < count {
        if attempts >= budget {
            return Err(Error::SamplingExhausted(attempts));
        }
        attempts += 1;
        let t = random_point(&mut rng, num_params, domain.t_center.as_ref(), domain.t_radius);
        let x = domain.x_center
            + Complex64::new(
                rng.gen_range(-domain.x_radius..=domain.x_radius),
                rng.gen_range(-domain.x_radius..=domain.x_radius),
            );
        if let Some(v) = accept(x, &t)? {
            out.push(v);
        }
    }
    Ok(out)
}

/// Freeze `sys` at `t` and evaluate at `x`, treating near-pole points,
/// collisions and singular coefficient evaluations as rejections.
pub(crate) fn eval_admissible(
    sys: &ParamRationalMatrix,
    x: Complex64,
    t: &ParameterPoint,
    min_dist: f64,
) -> Result<Option<CMat>> {
    let frozen = match sys.freeze(t) {
        Ok(f) => f,
        Err(Error::EvalSingular(_) | Error::PoleCollision(..)) => return Ok(None),
        Err(e) => return Err(e),
    };
    if frozen.pole_distance(x) < min_dist {
        return Ok(None);
    }
    Ok(Some(frozen.eval(x)?))
}

/// Probabilistic test that `a` and `b` are the same rational matrix:
/// maximum entry difference over seeded samples, relative to `1 + ‖a‖`.
pub fn rational_difference(
    a: &ParamRationalMatrix,
    b: &ParamRationalMatrix,
    domain: &SampleDomain,
    seed: u64,
) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch("systems have different dimension".into()));
    }
    let count = a.identity_test_points().max(b.identity_test_points());
    let r = a.num_params.max(b.num_params);
    let diffs = sample_points(domain, r, count, seed, |x, t| {
        let (Some(va), Some(vb)) =
            (eval_admissible(a, x, t, domain.min_pole_distance)?, eval_admissible(b, x, t, domain.min_pole_distance)?)
        else {
            return Ok(None);
        };
        Ok(Some(linalg::max_abs_diff(&va, &vb) / (1.0 + linalg::max_abs(&va))))
    })?;
    Ok(diffs.into_iter().fold(0.0, f64::max))
}

/// An invertible matrix `P(x,t)`, rational in `x`, with its exact x-derivative.
#[derive(Debug, Clone)]
pub struct GaugeTransform {
    p: ParamRationalMatrix,
    dp: ParamRationalMatrix,
}

impl GaugeTransform {
    /// Fails with `SINGULAR_GAUGE` when `det P` vanishes at every one of
    /// 20 seeded samples.
    pub fn new(p: ParamRationalMatrix) -> Result<Self> {
        let domain = SampleDomain::default();
        let dets = sample_points(&domain, p.num_params, 20, DEFAULT_SEED, |x, t| {
            Ok(eval_admissible(&p, x, t, domain.min_pole_distance)?.map(|m| m.determinant().norm()))
        })?;
        if dets.iter().all(|d| *d < 1e-13) {
            return Err(Error::SingularGauge("det P vanishes identically".into()));
        }
        let dp = p.dx();
        Ok(GaugeTransform { p, dp })
    }

    pub fn matrix(&self) -> &ParamRationalMatrix {
        &self.p
    }

    pub fn derivative(&self) -> &ParamRationalMatrix {
        &self.dp
    }
}

/// The system `B = P′P^{−1} + PAP^{−1}` obtained by `Y ↦ PY`, evaluated pointwise.
#[derive(Debug, Clone)]
pub struct GaugedSystem {
    a: ParamRationalMatrix,
    gauge: GaugeTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeReport {
    pub max_residual: f64,
    pub samples: usize,
}

pub fn apply_gauge(a: &ParamRationalMatrix, p: &GaugeTransform) -> Result<GaugedSystem> {
    if a.dim != p.p.dim {
        return Err(Error::DimensionMismatch(format!("A is {0}x{0} but P is {1}x{1}", a.dim, p.p.dim)));
    }
    Ok(GaugedSystem { a: a.clone(), gauge: p.clone() })
}

impl GaugedSystem {
    pub fn eval(&self, x: Complex64, t: &ParameterPoint) -> Result<CMat> {
        let pm = self.gauge.p.eval(x, t)?;
        let dp = self.gauge.dp.eval(x, t)?;
        let am = self.a.eval(x, t)?;
        let pinv = linalg::inverse(&pm).ok_or_else(|| Error::SingularGauge(format!("P({x}) not invertible")))?;
        Ok(&dp * &pinv + &pm * am * &pinv)
    }

    /// Max of `‖B_cand − (P′P^{−1} + PAP^{−1})‖` over `x_samples · t_samples`
    /// seeded points away from the poles of `A`, `P` and `B_cand`.
    pub fn residual_against(
        &self,
        candidate: &ParamRationalMatrix,
        domain: &SampleDomain,
        x_samples: usize,
        t_samples: usize,
        seed: u64,
    ) -> Result<GaugeReport> {
        let r = self.a.num_params.max(candidate.num_params).max(self.gauge.p.num_params);
        let total = x_samples * t_samples;
        let res = sample_points(domain, r, total, seed, |x, t| {
            for sys in [&self.a, &self.gauge.p, candidate] {
                if eval_admissible(sys, x, t, domain.min_pole_distance)?.is_none() {
                    return Ok(None);
                }
            }
            let b = self.eval(x, t)?;
            Ok(Some(linalg::max_abs_diff(&candidate.eval(x, t)?, &b)))
        })?;
        Ok(GaugeReport { max_residual: res.into_iter().fold(0.0, f64::max), samples: total })
    }
}
