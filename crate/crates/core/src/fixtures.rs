//! Small closed-form systems used by tests, the acceptance suite and the CLI examples.

use num_complex::Complex64;

use crate::classify::IntegrableSystemSpec;
use crate::expr::{parse_expr, ParamExpr};
use crate::halphen::{lax_matrix_symbolic, HalphenConfig};
use crate::sysmodel::{ExprMatrix, ParamRationalMatrix, PoleLocus};
use crate::Result;

/// Parse a square matrix of expression strings.
pub fn expr_matrix(rows: &[&[&str]], num_params: usize) -> Result<ExprMatrix> {
    let parsed = rows
        .iter()
        .map(|row| row.iter().map(|s| parse_expr(s, num_params)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    ExprMatrix::from_rows(parsed)
}

fn simple_pole(n: usize, r: usize, location: &str, residue: &[&[&str]]) -> Result<ParamRationalMatrix> {
    ParamRationalMatrix::new(n, r, vec![PoleLocus::simple(parse_expr(location, r)?, expr_matrix(residue, r)?)], vec![])
}

/// `dy/dx = (t1/x) y`; the loop around 0 has monodromy `e^{2πi t1}`.
pub fn scalar_power() -> ParamRationalMatrix {
    simple_pole(1, 1, "0", &[&["t1"]]).expect("fixture")
}

/// `A = [[1/x, 1], [0, 0]]`: residue eigenvalues 1 and 0, logarithmic monodromy `[[1, 2πi], [0, 1]]` from x₀ = 1.
pub fn log_example() -> ParamRationalMatrix {
    ParamRationalMatrix::new(
        2,
        0,
        vec![PoleLocus::simple(ParamExpr::zero(), expr_matrix(&[&["1", "0"], &["0", "0"]], 0).unwrap())],
        vec![expr_matrix(&[&["0", "1"], &["0", "0"]], 0).unwrap()],
    )
    .expect("fixture")
}

/// Gauge pair `(A, P, B)` with a double pole of `A` at `x = t1`.
pub fn gauge_example() -> (ParamRationalMatrix, ParamRationalMatrix, ParamRationalMatrix) {
    let r = 1;
    let at = || parse_expr("t1", r).unwrap();
    let a = ParamRationalMatrix::new(
        2,
        r,
        vec![PoleLocus::new(
            at(),
            vec![
                expr_matrix(&[&["0", "-3"], &["0", "0"]], r).unwrap(),
                expr_matrix(&[&["t1", "0"], &["0", "t1-2"]], r).unwrap(),
            ],
        )],
        vec![],
    )
    .unwrap();
    // P = [[1/u, -1/u²], [0, u]] with u = x - t1
    let p = ParamRationalMatrix::new(
        2,
        r,
        vec![PoleLocus::new(
            at(),
            vec![
                expr_matrix(&[&["0", "-1"], &["0", "0"]], r).unwrap(),
                expr_matrix(&[&["1", "0"], &["0", "0"]], r).unwrap(),
            ],
        )],
        vec![
            expr_matrix(&[&["0", "0"], &["0", "-t1"]], r).unwrap(),
            expr_matrix(&[&["0", "0"], &["0", "1"]], r).unwrap(),
        ],
    )
    .unwrap();
    let b = simple_pole(2, r, "t1", &[&["t1-1", "0"], &["0", "t1-1"]]).unwrap();
    (a, p, b)
}

pub const CONSTANT_RESIDUE: [[f64; 2]; 2] = [[0.3, 1.0], [0.0, -0.2]];

/// `A_x = C/(x - t1)` with constant non-resonant `C`, completed by `A_t = -C/(x - t1)`.
pub fn constant_residue() -> IntegrableSystemSpec {
    let [[a, b], [c, d]] = CONSTANT_RESIDUE.map(|row| row.map(|v| v.to_string()));
    let neg = |s: &str| format!("-({s})");
    let ax = simple_pole(2, 1, "t1", &[&[&a, &b], &[&c, &d]]).unwrap();
    let at = simple_pole(2, 1, "t1", &[&[&neg(&a), &neg(&b)], &[&neg(&c), &neg(&d)]]).unwrap();
    IntegrableSystemSpec::new(ax, vec![at]).unwrap()
}

/// `diag(t1, -t1)/x`: monodromy `diag(e^{2πi t1}, e^{-2πi t1})`, neither isomonodromic nor projectively so.
pub fn diagonal_drift() -> ParamRationalMatrix {
    simple_pole(2, 1, "0", &[&["t1", "0"], &["0", "-t1"]]).unwrap()
}

/// `A_x = A_t = [[0, 1], [-1, 0]]` constant: trivially integrable.
pub fn integrable_pair() -> IntegrableSystemSpec {
    let k = expr_matrix(&[&["0", "1"], &["-1", "0"]], 1).unwrap();
    let ax = ParamRationalMatrix::new(2, 1, vec![], vec![k.clone()]).unwrap();
    let at = ParamRationalMatrix::new(2, 1, vec![PoleLocus::simple(ParamExpr::zero(), ExprMatrix::zeros(2))], vec![k])
        .unwrap()
        .pruned();
    IntegrableSystemSpec::new(ax, vec![at]).unwrap()
}

/// Constant `E₁₂` and `E₂₁`: zero-curvature residual is exactly 1.
pub fn nonabelian_pair() -> IntegrableSystemSpec {
    let ax =
        ParamRationalMatrix::new(2, 1, vec![], vec![expr_matrix(&[&["0", "1"], &["0", "0"]], 1).unwrap()]).unwrap();
    let at =
        ParamRationalMatrix::new(2, 1, vec![], vec![expr_matrix(&[&["0", "0"], &["1", "0"]], 1).unwrap()]).unwrap();
    IntegrableSystemSpec::new(ax, vec![at]).unwrap()
}

/// Pole motion used by [`dh_lax`]: distinct for every real `t1` in `[-1, 1]`.
pub const DH_LOCATIONS: [&str; 3] = ["t1", "1 + t1^2", "i - t1"];

/// Darboux–Halphen Lax matrix of the standard configuration with poles moving along [`DH_LOCATIONS`].
pub fn dh_lax() -> ParamRationalMatrix {
    let x = DH_LOCATIONS.map(|s| parse_expr(s, 1).unwrap());
    lax_matrix_symbolic(&HalphenConfig::standard(), &x, 1).unwrap()
}

/// `μ / ∏_{j≠i}(x_i − x_j)` at numeric pole positions.
pub fn dh_scalar_oracle(mu: Complex64, x: &[Complex64; 3]) -> [Complex64; 3] {
    std::array::from_fn(|i| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        mu / ((x[i] - x[j]) * (x[i] - x[k]))
    })
}
