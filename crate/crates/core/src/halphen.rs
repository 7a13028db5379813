//! Darboux–Halphen flows in `t` and the monodromy of their Lax matrix
//!
//! ```text
//! dY/dx = ( μI/∏(x−x_i) + Σ λ_i C/(x−x_i) ) Y,   x_i′ = Q_i(x_1, x_2, x_3).
//! ```
//!
//! Along the flow each monodromy matrix only picks up a scalar factor,
//! `M_i(t) = c_i(t) M_i(t₀)` with `c_i = exp(−2πi μ ∫ β_i dt)`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{ParamExpr, ParameterPoint};
use crate::linalg::{self, CMat, TWO_PI_I};
use crate::monodromy::{self, LoopSpec};
use crate::ode::{self, DenseStep, OdeOptions, StepReport};
use crate::sysmodel::{ExprMatrix, ParamRationalMatrix, PoleLocus};

type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `(ω₁, ω₂, ω₃, θ, φ)`.
    Dhv,
    /// `(x₁, x₂, x₃)` with `x_i′ = Q_i`.
    HiiFlow,
    /// `(ω₁, ω₂, ω₃)`.
    Hi,
}

impl Variant {
    pub fn state_len(self) -> usize {
        match self {
            Variant::Dhv => 5,
            Variant::HiiFlow | Variant::Hi => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Dhv => "DHV",
            Variant::HiiFlow => "HII_flow",
            Variant::Hi => "HI",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "DHV" => Ok(Variant::Dhv),
            "HII_flow" => Ok(Variant::HiiFlow),
            "HI" => Ok(Variant::Hi),
            _ => Err(Error::InvalidInput(format!("unknown variant `{s}` (expected DHV, HII_flow or HI)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalphenConfig {
    pub variant: Variant,
    pub mu: C64,
    pub lambdas: [C64; 3],
    /// Traceless 2×2.
    pub c: CMat,
    pub abc: [C64; 3],
    pub t0: C64,
    pub t_end: C64,
    pub initial: Vec<C64>,
    /// Number of checkpoints after `t0`, evenly spaced up to `t_end`.
    pub checkpoints: usize,
    /// Base point for monodromy loops; chosen automatically when absent.
    pub base: Option<C64>,
}

const SEPARATION_TOL: f64 = 1e-8;

fn min_separation(x: &[C64]) -> f64 {
    let mut d = f64::INFINITY;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            d = d.min((x[i] - x[j]).norm());
        }
    }
    d
}

/// Fails with `COLLISION` when two coordinates come within `1e−8·scale`.
pub fn check_distinct(x: &[C64]) -> Result<()> {
    let scale = x.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let d = min_separation(x);
    if d < SEPARATION_TOL * scale {
        Err(Error::Collision(d))
    } else {
        Ok(())
    }
}

impl HalphenConfig {
    /// The reference configuration: `μ = 1`, `λ = (1, −½, −½)`, `C = diag(1, −1)`,
    /// `a = b = c = 0`, `x(0) = (0, 1, i)`, integrated to `t = 0.25`.
    pub fn standard() -> Self {
        HalphenConfig {
            variant: Variant::HiiFlow,
            mu: C64::new(1.0, 0.0),
            lambdas: [C64::new(1.0, 0.0), C64::new(-0.5, 0.0), C64::new(-0.5, 0.0)],
            c: linalg::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]),
            abc: [C64::new(0.0, 0.0); 3],
            t0: C64::new(0.0, 0.0),
            t_end: C64::new(0.25, 0.0),
            initial: vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0)],
            checkpoints: 4,
            base: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial.len() != self.variant.state_len() {
            return Err(Error::DimensionMismatch(format!(
                "{} needs {} initial values, got {}",
                self.variant.as_str(),
                self.variant.state_len(),
                self.initial.len()
            )));
        }
        if self.checkpoints == 0 {
            return Err(Error::InvalidInput("at least one checkpoint is required".into()));
        }
        if self.variant == Variant::HiiFlow {
            if self.mu.norm() == 0.0 {
                return Err(Error::InvalidInput("mu must be nonzero".into()));
            }
            let s: C64 = self.lambdas.iter().sum();
            if s.norm() > 1e-14 {
                return Err(Error::InvalidInput(format!("lambdas must sum to zero (sum = {s})")));
            }
            if self.c.nrows() != 2 || self.c.ncols() != 2 {
                return Err(Error::DimensionMismatch("C must be 2x2".into()));
            }
            if linalg::trace(&self.c).norm() > 1e-14 {
                return Err(Error::InvalidInput("C must be traceless".into()));
            }
            check_distinct(&self.initial)?;
        }
        Ok(())
    }
}

/// `Q(x) − x² = a(x₁−x₂)² + b(x₂−x₃)² + c(x₃−x₁)²`, common to all three `Q_i`.
fn quad_correction(x: &[C64], abc: &[C64; 3]) -> C64 {
    abc[0] * (x[0] - x[1]).powi(2) + abc[1] * (x[1] - x[2]).powi(2) + abc[2] * (x[2] - x[0]).powi(2)
}

pub fn flow_rhs(variant: Variant, v: &[C64], abc: &[C64; 3]) -> Vec<C64> {
    match variant {
        Variant::Dhv => {
            let (w1, w2, w3, th, ph) = (v[0], v[1], v[2], v[3], v[4]);
            vec![
                w2 * w3 - w1 * (w2 + w3) + ph * ph,
                w3 * w1 - w2 * (w3 + w1) + th * th,
                w1 * w2 - w3 * (w1 + w2) - th * ph,
                w1 * (th - ph) - w3 * (th + ph),
                -w2 * (th - ph) - w3 * (th + ph),
            ]
        }
        Variant::HiiFlow => {
            let q = quad_correction(v, abc);
            v.iter().map(|x| x * x + q).collect()
        }
        Variant::Hi => {
            let (w1, w2, w3) = (v[0], v[1], v[2]);
            vec![
                (w1 * w2 + w3 * w1 - w2 * w3) / 2.0,
                (w2 * w3 + w1 * w2 - w3 * w1) / 2.0,
                (w3 * w1 + w2 * w3 - w1 * w2) / 2.0,
            ]
        }
    }
}

/// `β_i = (2x_i + x_j + x_k) / ((x_i − x_j)(x_i − x_k))`, the partial-fraction
/// coefficients of `(x + Σx_i)/∏(x − x_i)`.
pub fn beta_coefficients(x: &[C64; 3]) -> Result<[C64; 3]> {
    check_distinct(x)?;
    Ok(std::array::from_fn(|i| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        (2.0 * x[i] + x[j] + x[k]) / ((x[i] - x[j]) * (x[i] - x[k]))
    }))
}

/// `b_i = μ / ∏_{j≠i}(x_i − x_j)`, the residues of `μ/∏(x − x_i)`.
pub fn scalar_residues(mu: C64, x: &[C64; 3]) -> [C64; 3] {
    std::array::from_fn(|i| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        mu / ((x[i] - x[j]) * (x[i] - x[k]))
    })
}

/// `db_i/dt` along `x′ = Q(x)` by the chain rule.
pub fn scalar_residue_rates(mu: C64, x: &[C64; 3], abc: &[C64; 3]) -> [C64; 3] {
    let q = flow_rhs(Variant::HiiFlow, x, abc);
    let b = scalar_residues(mu, x);
    std::array::from_fn(|i| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let (dij, dik) = (x[i] - x[j], x[i] - x[k]);
        b[i] * (-(q[i] - q[j]) / dij - (q[i] - q[k]) / dik)
    })
}

/// Lax matrix at fixed `x_i` as a system without parameters.
pub fn lax_matrix(config: &HalphenConfig, x: &[C64; 3]) -> Result<ParamRationalMatrix> {
    check_distinct(x)?;
    let locs = x.map(ParamExpr::Const);
    lax_matrix_symbolic(config, &locs, 0)
}

/// Lax matrix with pole locations given as expressions in `num_params`
/// parameters; residues are `λ_i C + b_i I` with `b_i` kept symbolic.
pub fn lax_matrix_symbolic(
    config: &HalphenConfig,
    x: &[ParamExpr; 3],
    num_params: usize,
) -> Result<ParamRationalMatrix> {
    let poles = (0..3)
        .map(|i| {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let b = ParamExpr::Const(config.mu) / ((x[i].clone() - x[j].clone()) * (x[i].clone() - x[k].clone()));
            let lc = ExprMatrix::constant(&(&config.c * config.lambdas[i]));
            PoleLocus::simple(x[i].clone(), lc.add(&ExprMatrix::scalar(2, b)))
        })
        .collect();
    ParamRationalMatrix::new(2, num_params, poles, Vec::new())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub t: C64,
    pub vars: Vec<C64>,
    /// Accumulated local error estimate of the flow up to this point.
    pub err: f64,
    /// `∫_{t₀}^{t} β_i dt` (flow variant only).
    pub beta_integral: [C64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub variant: Variant,
    /// `t₀` followed by the requested checkpoints.
    pub points: Vec<Checkpoint>,
    pub steps: StepReport,
    /// `max |db_i/dt + μβ_i| / (1 + |μβ_i|)` over accepted steps (flow variant only).
    pub rate_residual: f64,
}

/// `P_n(z)` and `P_n′(z)` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

/// 10-point Gauss–Legendre nodes and weights on `[−1, 1]`.
fn gauss_legendre_10() -> ([f64; 10], [f64; 10]) {
    let n = 10;
    let mut nodes = [0.0; 10];
    let mut weights = [0.0; 10];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        nodes[i] = z;
        weights[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (nodes, weights)
}

/// Integrate the configured flow along the straight path `t₀ → t_end`.
pub fn integrate_flow(config: &HalphenConfig, opts: &OdeOptions) -> Result<Trajectory> {
    config.validate()?;
    let variant = config.variant;
    let dt = config.t_end - config.t0;
    let abc = config.abc;
    let (gx, gw) = gauss_legendre_10();
    let mut y = config.initial.clone();
    let mut integral = [C64::new(0.0, 0.0); 3];
    let mut rate_residual = 0.0f64;
    let mut steps = StepReport::default();
    let mut points = vec![Checkpoint { t: config.t0, vars: y.clone(), err: 0.0, beta_integral: integral }];
    let k = config.checkpoints;
    let mut node_state = vec![C64::new(0.0, 0.0); y.len()];
    for c in 0..k {
        let (s0, s1) = (c as f64 / k as f64, (c + 1) as f64 / k as f64);
        let rep = ode::integrate(
            |_, v, dv| {
                if variant == Variant::HiiFlow {
                    check_distinct(v)?;
                }
                for (d, f) in dv.iter_mut().zip(flow_rhs(variant, v, &abc)) {
                    *d = f * dt;
                }
                Ok(())
            },
            s0,
            s1,
            &mut y,
            opts,
            |step: &DenseStep<'_>, v: &[C64]| {
                if variant != Variant::HiiFlow {
                    return Ok(());
                }
                let x: [C64; 3] = [v[0], v[1], v[2]];
                let beta = beta_coefficients(&x)?;
                let rates = scalar_residue_rates(config.mu, &x, &abc);
                for i in 0..3 {
                    let mb = config.mu * beta[i];
                    rate_residual = rate_residual.max((rates[i] + mb).norm() / (1.0 + mb.norm()));
                }
                let half = step.h / 2.0;
                for (xi, wi) in gx.iter().zip(gw) {
                    step.eval(step.s0 + half * (1.0 + xi), &mut node_state);
                    let b = beta_coefficients(&[node_state[0], node_state[1], node_state[2]])?;
                    for i in 0..3 {
                        integral[i] += b[i] * (wi * half) * dt;
                    }
                }
                Ok(())
            },
        )?;
        steps.merge(rep);
        points.push(Checkpoint {
            t: config.t0 + dt * s1,
            vars: y.clone(),
            err: steps.err_sum,
            beta_integral: integral,
        });
    }
    Ok(Trajectory { variant, points, steps, rate_residual })
}

/// `c_i(t) = exp(−2πi μ ∫_{t₀}^{t} β_i dt)` at trajectory point `k`.
pub fn scalar_factor(config: &HalphenConfig, traj: &Trajectory, i: usize, k: usize) -> C64 {
    (-TWO_PI_I * config.mu * traj.points[k].beta_integral[i]).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionRow {
    pub t: C64,
    pub x: [C64; 3],
    pub b: [C64; 3],
    pub beta: [C64; 3],
    pub c: [C64; 3],
    /// `‖M_i(t) − c_i(t) M_i(t₀)‖ / ‖M_i(t₀)‖` per pole.
    pub residual: [f64; 3],
    /// `‖M_i(t) − e^{2πi b_i} e^{2πi λ_i C}‖ / ‖M_i(t)‖` per pole.
    pub oracle_residual: [f64; 3],
    pub monodromy: [CMat; 3],
    pub err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionReport {
    pub base: C64,
    pub rows: Vec<EvolutionRow>,
    pub max_residual: f64,
    pub max_oracle_residual: f64,
    /// `max |Σβ_i|` over the rows.
    pub beta_sum: f64,
    /// `max |Σβ_i x_i − 1|` over the rows.
    pub beta_moment: f64,
    pub rate_residual: f64,
    pub flow_err: f64,
}

/// A base point from which every pole of every state can be looped around.
pub fn choose_base(states: &[[C64; 3]], config: &HalphenConfig) -> Result<C64> {
    let all: Vec<C64> = states.iter().flatten().copied().collect();
    let centroid = all.iter().sum::<C64>() / all.len() as f64;
    let spread = all.iter().map(|z| (z - centroid).norm()).fold(0.0, f64::max);
    let ring = 1.5 * spread + 1.0;
    let mut best: Option<(f64, C64)> = None;
    for k in 0..32 {
        let cand =
            centroid + C64::from_polar(ring, -std::f64::consts::FRAC_PI_4 + k as f64 * std::f64::consts::PI / 16.0);
        let mut worst = f64::INFINITY;
        let mut ok = true;
        for x in states {
            let f = lax_matrix(config, x)?.freeze(&ParameterPoint::empty())?;
            for i in 0..3 {
                match monodromy::resolve_loop(&f, &LoopSpec::around(cand, i)) {
                    Ok(l) => {
                        for (j, p) in x.iter().enumerate() {
                            if j != i {
                                worst = worst.min(l.path.distance(*p).1 / l.margin);
                            }
                        }
                    }
                    Err(_) => ok = false,
                }
            }
        }
        if ok && best.is_none_or(|b| worst > b.0) {
            best = Some((worst, cand));
        }
    }
    best.map(|b| b.1).ok_or_else(|| Error::InvalidLoop("no admissible common base point found".into()))
}

/// Monodromy of the Lax matrix at the given states, compared with the
/// scalar factors `c_i = exp(−2πi μ I_i)` built from `integrals[k][i]`.
pub fn evolution_residuals(
    config: &HalphenConfig,
    states: &[(C64, [C64; 3], [C64; 3], f64)],
    base: C64,
    opts: &OdeOptions,
) -> Result<EvolutionReport> {
    let mats: Vec<[CMat; 3]> = states
        .par_iter()
        .map(|(_, x, _, _)| {
            let f = lax_matrix(config, x)?.freeze(&ParameterPoint::empty())?;
            let m = (0..3)
                .map(|i| {
                    monodromy::monodromy_frozen(&f, &LoopSpec::around(base, i), &ParameterPoint::empty(), i, opts)
                        .map(|r| r.matrix)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok([m[0].clone(), m[1].clone(), m[2].clone()])
        })
        .collect::<Result<Vec<_>>>()?;
    let m0 = &mats[0];
    let mut rows = Vec::new();
    let (mut beta_sum, mut beta_moment) = (0.0f64, 0.0f64);
    for ((t, x, integ, err), m) in states.iter().zip(&mats) {
        let beta = beta_coefficients(x)?;
        let b = scalar_residues(config.mu, x);
        beta_sum = beta_sum.max(beta.iter().sum::<C64>().norm());
        beta_moment = beta_moment.max((beta.iter().zip(x).map(|(p, q)| p * q).sum::<C64>() - 1.0).norm());
        let c: [C64; 3] = std::array::from_fn(|i| (-TWO_PI_I * config.mu * integ[i]).exp());
        let residual = std::array::from_fn(|i| linalg::max_abs_diff(&m[i], &(&m0[i] * c[i])) / linalg::max_abs(&m0[i]));
        let oracle_residual = std::array::from_fn(|i| {
            let want = linalg::expm(&(&config.c * (TWO_PI_I * config.lambdas[i]))) * (TWO_PI_I * b[i]).exp();
            linalg::max_abs_diff(&m[i], &want) / linalg::max_abs(&m[i])
        });
        rows.push(EvolutionRow {
            t: *t,
            x: *x,
            b,
            beta,
            c,
            residual,
            oracle_residual,
            monodromy: m.clone(),
            err: *err,
        });
    }
    let max_of = |f: &dyn Fn(&EvolutionRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    Ok(EvolutionReport {
        base,
        max_residual: max_of(&|r| r.residual.iter().copied().fold(0.0, f64::max)),
        max_oracle_residual: max_of(&|r| r.oracle_residual.iter().copied().fold(0.0, f64::max)),
        beta_sum,
        beta_moment,
        rate_residual: 0.0,
        flow_err: rows.last().map(|r| r.err).unwrap_or(0.0),
        rows,
    })
}

/// Integrate the flow, compute `M_i(t)` on the Lax matrix at every
/// checkpoint, and compare with `c_i(t) M_i(t₀)`.
pub fn verify_evolution_law(config: &HalphenConfig, opts: &OdeOptions) -> Result<(Trajectory, EvolutionReport)> {
    if config.variant != Variant::HiiFlow {
        return Err(Error::InvalidInput("the evolution law applies to the HII_flow variant".into()));
    }
    let traj = integrate_flow(config, opts)?;
    let states: Vec<(C64, [C64; 3], [C64; 3], f64)> =
        traj.points.iter().map(|p| (p.t, [p.vars[0], p.vars[1], p.vars[2]], p.beta_integral, p.err)).collect();
    let base = match config.base {
        Some(b) => b,
        None => choose_base(&states.iter().map(|s| s.1).collect::<Vec<_>>(), config)?,
    };
    let mut report = evolution_residuals(config, &states, base, opts)?;
    report.rate_residual = traj.rate_residual;
    Ok((traj, report))
}
