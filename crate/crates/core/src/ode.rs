//! Adaptive Dormand–Prince 5(4) integrator for complex-valued systems with a
//! real independent variable, plus its fourth-order continuous extension.
//!
//! Both the x-plane continuation (matrix ODE along a path) and the t-plane
//! flows of module `halphen` go through [`integrate`].

use num_complex::Complex64;

use crate::error::{Error, Result};

type C64 = Complex64;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, max_steps: 1_000_000 }
    }
}

impl OdeOptions {
    pub fn new(rtol: f64, atol: f64) -> Self {
        OdeOptions { rtol, atol, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    pub accepted: usize,
    pub rejected: usize,
    /// Sum over accepted steps of the max-modulus local error estimate.
    pub err_sum: f64,
}

impl StepReport {
    pub fn merge(&mut self, other: StepReport) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.err_sum += other.err_sum;
    }
}

/// Continuous output over one accepted step `[s0, s0 + h]`.
pub struct DenseStep<'a> {
    pub s0: f64,
    pub h: f64,
    rcont: &'a [Vec<C64>; 5],
    /// Local error estimate of the step, per component.
    pub err: &'a [C64],
}

impl DenseStep<'_> {
    pub fn eval(&self, s: f64, out: &mut [C64]) {
        let theta = (s - self.s0) / self.h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + (r2[i] + (r3[i] + (r4[i] + r5[i] * theta1) * theta) * theta1) * theta;
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn finite(v: &[C64]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Integrate `y' = f(s, y)` from `s0` to `s1 > s0`, overwriting `y` with the
/// final state. `on_step` sees every accepted step (dense output and the new
/// state) and may abort the integration by returning an error.
pub fn integrate<F, O>(
    mut f: F,
    s0: f64,
    s1: f64,
    y: &mut [C64],
    opts: &OdeOptions,
    mut on_step: O,
) -> Result<StepReport>
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
    O: FnMut(&DenseStep<'_>, &[C64]) -> Result<()>,
{
    assert!(s1 >= s0, "integration runs forward in the path parameter");
    let n = y.len();
    let mut report = StepReport::default();
    if s1 == s0 || n == 0 {
        return Ok(report);
    }
    let span = s1 - s0;
    let h_min = 1e-14 * span;

    let mut k: [Vec<C64>; 7] = std::array::from_fn(|_| vec![C64::default(); n]);
    let mut tmp = vec![C64::default(); n];
    let mut ynew = vec![C64::default(); n];
    let mut rcont: [Vec<C64>; 5] = std::array::from_fn(|_| vec![C64::default(); n]);
    let mut errv = vec![C64::default(); n];

    f(s0, y, &mut k[0])?;
    if !finite(&k[0]) {
        return Err(Error::NonFinite);
    }
    let mut h = initial_step(&mut f, s0, y, &k[0], span, opts, &mut tmp)?;
    let mut s = s0;
    let mut last_rejected = false;

    while s < s1 {
        if report.accepted + report.rejected >= opts.max_steps {
            return Err(Error::IntegrationFailure(format!("step budget of {} exhausted at s = {s}", opts.max_steps)));
        }
        if s + h > s1 {
            h = s1 - s;
        }
        if h < h_min && s + h < s1 {
            return Err(Error::StepUnderflow(s));
        }

        macro_rules! stage {
            ($dst:expr, $cs:expr, [$(($a:expr, $j:expr)),*]) => {{
                for i in 0..n {
                    tmp[i] = y[i] $(+ k[$j][i] * ($a * h))*;
                }
                let (head, tail) = k.split_at_mut($dst);
                let _ = head;
                f(s + $cs * h, &tmp, &mut tail[0])?;
            }};
        }
        stage!(1, C2, [(A21, 0)]);
        stage!(2, C3, [(A31, 0), (A32, 1)]);
        stage!(3, C4, [(A41, 0), (A42, 1), (A43, 2)]);
        stage!(4, C5, [(A51, 0), (A52, 1), (A53, 2), (A54, 3)]);
        stage!(5, 1.0, [(A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4)]);
        for i in 0..n {
            ynew[i] = y[i] + (k[0][i] * A71 + k[2][i] * A73 + k[3][i] * A74 + k[4][i] * A75 + k[5][i] * A76) * h;
        }
        {
            let (_, tail) = k.split_at_mut(6);
            f(s + h, &ynew, &mut tail[0])?;
        }

        let mut err_norm = 0.0;
        let mut err_max = 0.0f64;
        for i in 0..n {
            let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7) * h;
            errv[i] = e;
            let sk = opts.atol + opts.rtol * y[i].norm().max(ynew[i].norm());
            let r = e.norm() / sk;
            err_norm += r * r;
            err_max = err_max.max(e.norm());
        }
        let err = (err_norm / n as f64).sqrt();

        if !err.is_finite() || !finite(&ynew) || !finite(&k[6]) {
            if h <= h_min {
                return Err(Error::NonFinite);
            }
            h *= 0.25;
            report.rejected += 1;
            last_rejected = true;
            continue;
        }

        let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 10.0);
        if err <= 1.0 {
            for i in 0..n {
                let dy = ynew[i] - y[i];
                let bspl = k[0][i] * h - dy;
                rcont[0][i] = y[i];
                rcont[1][i] = dy;
                rcont[2][i] = bspl;
                rcont[3][i] = dy - k[6][i] * h - bspl;
                rcont[4][i] =
                    (k[0][i] * D1 + k[2][i] * D3 + k[3][i] * D4 + k[4][i] * D5 + k[5][i] * D6 + k[6][i] * D7) * h;
            }
            let dense = DenseStep { s0: s, h, rcont: &rcont, err: &errv };
            on_step(&dense, &ynew)?;
            y.copy_from_slice(&ynew);
            k.swap(0, 6);
            s = if s + h >= s1 || s1 - (s + h) < h_min { s1 } else { s + h };
            report.accepted += 1;
            report.err_sum += err_max;
            h *= if last_rejected { fac.min(1.0) } else { fac };
            last_rejected = false;
        } else {
            h *= fac.min(1.0);
            report.rejected += 1;
            last_rejected = true;
        }
    }
    Ok(report)
}

fn initial_step<F>(
    f: &mut F,
    s0: f64,
    y: &[C64],
    f0: &[C64],
    span: f64,
    opts: &OdeOptions,
    tmp: &mut [C64],
) -> Result<f64>
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
{
    let n = y.len() as f64;
    let sk = |v: C64| opts.atol + opts.rtol * v.norm();
    let d0 = (y.iter().map(|v| (v.norm() / sk(*v)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0.iter().zip(y).map(|(d, v)| (d.norm() / sk(*v)).powi(2)).sum::<f64>() / n).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<C64> = y.iter().zip(f0).map(|(v, d)| v + d * h0).collect();
    f(s0 + h0, &y1, tmp)?;
    let d2 =
        (tmp.iter().zip(f0).zip(y).map(|((a, b), v)| ((a - b).norm() / sk(*v)).powi(2)).sum::<f64>() / n).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6 * span) } else { (0.01 / d1.max(d2)).powf(0.2) };
    Ok((100.0 * h0).min(h1).min(span))
}
