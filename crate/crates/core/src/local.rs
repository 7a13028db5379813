//! Local fundamental solutions `Y = H(x)(x−α)^R` at simple poles, and a
//! numerical probe for moderate growth near a singular point.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::ParameterPoint;
use crate::linalg::{self, CMat, TWO_PI_I};
use crate::ode::{self, OdeOptions};
use crate::sysmodel::{FrozenSystem, ParamRationalMatrix, SysTolerances};

pub const DEFAULT_ORDER: usize = 20;
pub const RESONANCE_TOL: f64 = 1e-9;
pub const DEFAULT_SIGMA_MAX: f64 = 50.0;

#[derive(Debug, Clone)]
pub struct LocalSolution {
    pub pole_index: usize,
    pub location: Complex64,
    /// Residue `R`; the solution is `H(x)(x−α)^R`.
    pub exponent_matrix: CMat,
    /// `H_0 = I, H_1, …, H_N`.
    pub series: Vec<CMat>,
    pub t: ParameterPoint,
    pub radius_estimate: f64,
}

/// Taylor coefficients `A_0, …, A_{K−1}` of `A(x) − R/(x−α)` about the pole
/// `pole_index`, computed exactly from the partial-fraction data.
pub fn regular_taylor(frozen: &FrozenSystem, pole_index: usize, count: usize) -> Vec<CMat> {
    let n = frozen.dim;
    let alpha = frozen.poles[pole_index].location;
    let mut out = vec![CMat::zeros(n, n); count];
    for (j, p) in frozen.poles.iter().enumerate() {
        if j == pole_index {
            continue;
        }
        let d = alpha - p.location;
        for m in 1..=p.order() {
            // (d + u)^{-m} = Σ_k (−1)^k C(m+k−1, k) d^{−m−k} u^k
            let mut w = d.powi(-(m as i32));
            for (k, a) in out.iter_mut().enumerate() {
                if k > 0 {
                    w *= -((m + k - 1) as f64) / (k as f64) / d;
                }
                a.zip_apply(p.coefficient(m), |o, c| *o += c * w);
            }
        }
    }
    for (deg, pm) in frozen.poly.iter().enumerate() {
        // (α + u)^deg = Σ_k C(deg, k) α^{deg−k} u^k
        let mut binom = 1.0;
        for (k, a) in out.iter_mut().enumerate().take(deg + 1) {
            if k > 0 {
                binom *= (deg + 1 - k) as f64 / k as f64;
            }
            let w = alpha.powi((deg - k) as i32) * binom;
            a.zip_apply(pm, |o, c| *o += c * w);
        }
    }
    out
}

/// Half the distance from pole `i` to its nearest neighbour, or 1 when alone.
pub fn radius_estimate(frozen: &FrozenSystem, i: usize) -> f64 {
    let a = frozen.poles[i].location;
    let d = frozen
        .poles
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, p)| (p.location - a).norm())
        .fold(f64::INFINITY, f64::min);
    if d.is_finite() {
        0.5 * d
    } else {
        1.0
    }
}

/// First pair of eigenvalues whose difference is an integer in `1..=max_gap`.
pub fn find_resonance(eigs: &[Complex64], max_gap: usize) -> Option<(Complex64, Complex64, i64)> {
    for a in eigs {
        for b in eigs {
            let d = a - b;
            let k = d.re.round();
            if k >= 1.0 && k <= max_gap as f64 && (d - k).norm() < RESONANCE_TOL {
                return Some((*a, *b, k as i64));
            }
        }
    }
    None
}

pub fn frobenius_solution(
    a: &ParamRationalMatrix,
    pole_index: usize,
    t: &ParameterPoint,
    order: usize,
) -> Result<LocalSolution> {
    let tol = SysTolerances::default();
    let frozen = a.freeze_with(t, &tol)?;
    frobenius_frozen(&frozen, pole_index, t, order, tol.drop_tol)
}

pub(crate) fn frobenius_frozen(
    frozen: &FrozenSystem,
    pole_index: usize,
    t: &ParameterPoint,
    order: usize,
    drop_tol: f64,
) -> Result<LocalSolution> {
    let n = frozen.dim;
    let pole =
        frozen.poles.get(pole_index).ok_or_else(|| Error::InvalidInput(format!("no pole with index {pole_index}")))?;
    let eff = pole.effective_order(drop_tol);
    if eff > 1 {
        return Err(Error::NotSimple { pole: pole_index, order: eff });
    }
    let r = if eff == 1 { pole.coefficient(1).clone() } else { CMat::zeros(n, n) };
    if let Some((x, y, k)) = find_resonance(&linalg::eigenvalues(&r), order) {
        return Err(Error::ResonantSpectrum(format!("{x}"), format!("{y}"), k));
    }
    let taylor = regular_taylor(frozen, pole_index, order);
    let mut series = vec![linalg::identity(n)];
    for k in 1..=order {
        let mut rhs = CMat::zeros(n, n);
        for (j, h) in series.iter().enumerate() {
            rhs += &taylor[k - 1 - j] * h;
        }
        let shifted = &r + linalg::identity(n) * Complex64::new(k as f64, 0.0);
        series.push(linalg::solve_sylvester(&r, &shifted, &rhs)?);
    }
    Ok(LocalSolution {
        pole_index,
        location: pole.location,
        exponent_matrix: r,
        series,
        t: t.clone(),
        radius_estimate: radius_estimate(frozen, pole_index),
    })
}

impl LocalSolution {
    pub fn order(&self) -> usize {
        self.series.len() - 1
    }

    /// `H(x)` and `H′(x)` by Horner's rule.
    pub fn series_at(&self, x: Complex64) -> (CMat, CMat) {
        let u = x - self.location;
        let n = self.exponent_matrix.nrows();
        let mut h = CMat::zeros(n, n);
        let mut dh = CMat::zeros(n, n);
        for c in self.series.iter().rev() {
            dh = dh * u + &h;
            h = h * u + c;
        }
        (h, dh)
    }

    /// `Y(x) = H(x) (x−α)^R` with the principal branch of `log(x−α)`.
    pub fn eval(&self, x: Complex64) -> CMat {
        let (h, _) = self.series_at(x);
        let log_u = (x - self.location).ln();
        h * linalg::expm(&(&self.exponent_matrix * log_u))
    }

    /// `‖H′ + (H R − R H)/u − A_reg H‖` written as `‖H′ − A H + H R/u‖`.
    pub fn ode_residual(&self, frozen: &FrozenSystem, x: Complex64) -> Result<f64> {
        let (h, dh) = self.series_at(x);
        let u = x - self.location;
        let a = frozen.eval(x)?;
        let res = dh - a * &h + h * &self.exponent_matrix / u;
        Ok(linalg::max_abs(&res))
    }

    /// Log-log slope of the truncated-series ODE residual against `|x−α|`,
    /// fitted over radii where the residual clears the round-off floor.
    /// `None` when the residual vanishes to round-off at every radius
    /// (for example when the series terminates).
    pub fn residual_slope(&self, frozen: &FrozenSystem) -> Result<Option<f64>> {
        let r0 = self.radius_estimate / 2.0;
        let scale = 1.0 + linalg::max_abs(&self.exponent_matrix);
        let mut pts = Vec::new();
        for k in 0..10 {
            let rho = r0 * 2f64.powf(-(k as f64) / 2.0);
            let mut worst = 0.0f64;
            for j in 0..8 {
                let theta = 2.0 * std::f64::consts::PI * (j as f64 + 0.3) / 8.0;
                worst = worst.max(self.ode_residual(frozen, self.location + Complex64::from_polar(rho, theta))?);
            }
            if worst > 1e-13 * scale / rho {
                pts.push((rho.ln(), worst.ln()));
            }
        }
        if pts.len() < 3 {
            return Ok(None);
        }
        Ok(Some(least_squares(&pts).0))
    }
}

/// `exp(2πi R)`: the monodromy of `(x−α)^R` around `α`.
pub fn local_monodromy_from_exponent(l: &LocalSolution) -> CMat {
    linalg::expm(&(&l.exponent_matrix * TWO_PI_I))
}

/// Slope, intercept and RMS residual of a straight-line fit.
pub(crate) fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let icpt = (sy - slope * sx) / m;
    let rms = (pts.iter().map(|p| (p.1 - slope * p.0 - icpt).powi(2)).sum::<f64>() / m).sqrt();
    (slope, icpt, rms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthClass {
    Moderate,
    SuspectedIrregular,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    /// Slope of `log‖Y‖` against `log|x−α|`.
    pub slope: f64,
    /// Slope of `log‖Y^{−1}‖`; catches solutions that decay too fast.
    pub inverse_slope: f64,
    pub fit_residual: f64,
    pub class: GrowthClass,
    /// `(|x−α|, ‖Y‖)` at each sampled radius.
    pub points: Vec<(f64, f64)>,
}

/// Integrate `Y` (with `Y = I` at radius `radius_estimate`) inward along the
/// ray `α + ρ e^{iθ}` down to `10^{−3}` of the start radius, then fit
/// `log‖Y‖` and `log‖Y^{−1}‖` against `log ρ` over the last `samples` radii.
/// Overflow, underflow or a singular `Y` is classified as suspected irregular.
pub fn growth_probe(
    a: &ParamRationalMatrix,
    pole_index: usize,
    t: &ParameterPoint,
    ray_angle: f64,
    samples: usize,
) -> Result<GrowthReport> {
    let frozen = a.freeze(t)?;
    if pole_index >= frozen.poles.len() {
        return Err(Error::InvalidInput(format!("no pole with index {pole_index}")));
    }
    let alpha = frozen.poles[pole_index].location;
    let dir = Complex64::from_polar(1.0, ray_angle);
    let rho0 = radius_estimate(&frozen, pole_index);
    let n = frozen.dim;
    let mut y: Vec<Complex64> = linalg::identity(n).iter().copied().collect();
    let mut buf = CMat::zeros(n, n);
    let opts = OdeOptions::default();
    let radii: Vec<f64> = (0..=20).map(|k| rho0 * 2f64.powf(-(k as f64) / 2.0)).collect();
    let mut fwd = Vec::new();
    let mut inv = Vec::new();
    let mut points = Vec::new();
    let irregular = |points| GrowthReport {
        slope: f64::NAN,
        inverse_slope: f64::NAN,
        fit_residual: f64::NAN,
        class: GrowthClass::SuspectedIrregular,
        points,
    };
    for w in radii.windows(2) {
        let (ra, rb) = (w[0], w[1]);
        let step = ode::integrate(
            |s, yv, dy| {
                let x = alpha + dir * (ra + (rb - ra) * s);
                frozen.eval_into(x, &mut buf)?;
                let scale = dir * (rb - ra);
                let ym = nalgebra::DMatrixView::from_slice(yv, n, n);
                let prod = &buf * ym * scale;
                dy.copy_from_slice(prod.as_slice());
                Ok(())
            },
            0.0,
            1.0,
            &mut y,
            &opts,
            |_, _| Ok(()),
        );
        match step {
            Ok(_) => {}
            Err(Error::NonFinite | Error::StepUnderflow(_) | Error::IntegrationFailure(_)) => {
                return Ok(irregular(points));
            }
            Err(e) => return Err(e),
        }
        let ym = CMat::from_column_slice(n, n, &y);
        let norm = linalg::max_abs(&ym);
        let Some(yi) = linalg::inverse(&ym) else {
            return Ok(irregular(points));
        };
        if !(norm.is_finite() && norm > 0.0) {
            return Ok(irregular(points));
        }
        points.push((rb, norm));
        fwd.push((rb.ln(), norm.ln()));
        inv.push((rb.ln(), linalg::max_abs(&yi).ln()));
    }
    let k = samples.clamp(2, fwd.len());
    let (slope, _, r1) = least_squares(&fwd[fwd.len() - k..]);
    let (inverse_slope, _, r2) = least_squares(&inv[inv.len() - k..]);
    let fit_residual = r1.max(r2);
    let moderate = slope >= -DEFAULT_SIGMA_MAX && inverse_slope >= -DEFAULT_SIGMA_MAX && fit_residual < 0.5;
    Ok(GrowthReport {
        slope,
        inverse_slope,
        fit_residual,
        class: if moderate { GrowthClass::Moderate } else { GrowthClass::SuspectedIrregular },
        points,
    })
}

/// Residue eigenvalues of pole `pole_index` at each parameter point, with a
/// flag where two eigenvalues come within `1e−6` of each other.
pub fn exponent_scan(
    a: &ParamRationalMatrix,
    pole_index: usize,
    points: &[ParameterPoint],
) -> Result<Vec<(Vec<Complex64>, bool)>> {
    points
        .iter()
        .map(|t| {
            let frozen = a.freeze(t)?;
            let p = frozen
                .poles
                .get(pole_index)
                .ok_or_else(|| Error::InvalidInput(format!("no pole with index {pole_index}")))?;
            let eigs = linalg::eigenvalues(p.coefficient(1));
            let collide = eigs.iter().enumerate().any(|(i, x)| eigs[i + 1..].iter().any(|y| (x - y).norm() < 1e-6));
            Ok((eigs, collide))
        })
        .collect()
}
