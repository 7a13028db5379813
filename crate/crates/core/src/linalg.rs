//! Dense complex matrix helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);
pub const TWO_PI_I: Complex64 = Complex64::new(0.0, 2.0 * std::f64::consts::PI);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn from_rows(rows: &[&[Complex64]]) -> CMat {
    let n = rows.len();
    let flat: Vec<Complex64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    CMat::from_row_slice(n, flat.len() / n.max(1), &flat)
}

pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let n = rows.len();
    let flat: Vec<Complex64> = rows.iter().flat_map(|r| r.iter().map(|&x| c(x, 0.0))).collect();
    CMat::from_row_slice(n, flat.len() / n.max(1), &flat)
}

/// Largest entry modulus. All `‖·‖_∞` quantities in the crate use this norm.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Inverse with a conditioning guard: `None` when singular or when the
/// estimated condition number exceeds `1e14`.
pub fn inverse(m: &CMat) -> Option<CMat> {
    let inv = m.clone().lu().try_inverse()?;
    if !is_finite(&inv) {
        return None;
    }
    let n = m.nrows() as f64;
    let cond = n * max_abs(m) * max_abs(&inv);
    (cond < 1e14).then_some(inv)
}

/// Matrix exponential (Padé approximation with scaling and squaring).
pub fn expm(m: &CMat) -> CMat {
    m.clone().exp()
}

/// Eigenvalues of a complex matrix from its Schur form.
pub fn eigenvalues(m: &CMat) -> Vec<Complex64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![m[(0, 0)]];
    }
    let schur = m.clone().schur();
    let (_, t) = schur.unpack();
    (0..n).map(|k| t[(k, k)]).collect()
}

/// Smallest possible worst-case distance between two eigenvalue multisets,
/// minimised over pairings. Exhaustive for n <= 6, greedy beyond.
pub fn spectrum_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n <= 6 {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut idx, 0, &mut |p| {
            let d = p.iter().enumerate().fold(0.0f64, |acc, (i, &j)| acc.max((a[i] - b[j]).norm()));
            best = best.min(d);
        });
        best
    } else {
        let mut used = vec![false; n];
        let mut worst = 0.0f64;
        for x in a {
            let (j, d) = b
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, y)| (j, (x - y).norm()))
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .unwrap();
            used[j] = true;
            worst = worst.max(d);
        }
        worst
    }
}

fn permute(idx: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == idx.len() {
        f(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, f);
        idx.swap(k, i);
    }
}

/// Solve `X·B − A·X = S` for `X` (all n×n) through the Kronecker form
/// `(Bᵀ ⊗ I − I ⊗ A) vec X = vec S` with column-major `vec`.
pub fn solve_sylvester(a: &CMat, b: &CMat, s: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let nn = n * n;
    let mut k = CMat::zeros(nn, nn);
    for col in 0..n {
        for row in 0..n {
            let r = col * n + row;
            // (X B)[row, col] = sum_m X[row, m] B[m, col]
            for m in 0..n {
                k[(r, m * n + row)] += b[(m, col)];
            }
            // (A X)[row, col] = sum_m A[row, m] X[m, col]
            for m in 0..n {
                k[(r, col * n + m)] -= a[(row, m)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_iterator(nn, s.iter().copied());
    let x = k.lu().solve(&rhs).ok_or_else(|| Error::InvalidInput("singular Sylvester operator".into()))?;
    Ok(CMat::from_iterator(n, n, x.iter().copied()))
}
