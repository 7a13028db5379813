//! Symbolic differentiation by structural rules.

use super::ParamExpr::{self, *};

pub(super) fn derivative(e: &ParamExpr, k: usize) -> ParamExpr {
    let d = |a: &ParamExpr| derivative(a, k);
    match e {
        Const(_) => ParamExpr::zero(),
        Param(i) => {
            if *i == k {
                ParamExpr::one()
            } else {
                ParamExpr::zero()
            }
        }
        Neg(a) => -d(a),
        Add(a, b) => d(a) + d(b),
        Sub(a, b) => d(a) - d(b),
        Mul(a, b) => d(a) * (**b).clone() + (**a).clone() * d(b),
        Div(a, b) => {
            let (da, db) = (d(a), d(b));
            if db.is_zero() {
                return da / (**b).clone();
            }
            (da * (**b).clone() - (**a).clone() * db) / (**b).clone().powi(2)
        }
        Pow(a, n) => ParamExpr::real(*n as f64) * (**a).clone().powi(n - 1) * d(a),
        Exp(a) => e.clone() * d(a),
        Log(a) => d(a) / (**a).clone(),
        Sqrt(a) => d(a) / (ParamExpr::real(2.0) * e.clone()),
        Sin(a) => (**a).clone().cos() * d(a),
        Cos(a) => -((**a).clone().sin() * d(a)),
    }
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;
    use proptest::prelude::*;

    use crate::expr::{parse_expr, ParamExpr, ParameterPoint};

    fn at(e: &ParamExpr, t: &[f64]) -> Complex64 {
        e.eval(&ParameterPoint::real(t)).unwrap()
    }

    /// Richardson-extrapolated central difference along the real axis.
    fn richardson(f: impl Fn(f64) -> Complex64, x: f64) -> Complex64 {
        let cd = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
        let h = 1e-2;
        let d1 = cd(h);
        let d2 = cd(h / 2.0);
        let d4 = cd(h / 4.0);
        let r1 = (4.0 * d2 - d1) / 3.0;
        let r2 = (4.0 * d4 - d2) / 3.0;
        (16.0 * r2 - r1) / 15.0
    }

    #[test]
    fn derivative_of_square() {
        let e = parse_expr("t1*t1", 1).unwrap();
        assert_eq!(at(&e.diff(1), &[3.0]), Complex64::new(6.0, 0.0));
    }

    #[test]
    fn derivative_of_exp_is_itself() {
        let e = parse_expr("exp(t1)", 1).unwrap();
        let de = e.diff(1);
        for x in [-2.0, -0.3, 0.0, 0.7, 1.9] {
            let (a, b) = (at(&e, &[x]), at(&de, &[x]));
            assert!((a - b).norm() <= 1e-12 * a.norm());
        }
    }

    #[test]
    fn derivative_of_reciprocal_against_richardson_oracle() {
        let e = parse_expr("1/(t1-2)", 1).unwrap();
        let oracle = richardson(|x| at(&e, &[x]), 3.0);
        // Oracle value, frozen: -1 (|error| well below 1e-9).
        assert!((oracle - Complex64::new(-1.0, 0.0)).norm() < 1e-9);
        let exact = at(&e.diff(1), &[3.0]);
        assert!((exact - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn partial_derivatives_are_independent() {
        let e = parse_expr("t1*sin(t2) + t2^3", 2).unwrap();
        let t = [0.4, 1.1];
        let d1 = at(&e.diff(1), &t);
        let d2 = at(&e.diff(2), &t);
        assert!((d1 - Complex64::new(1.1f64.sin(), 0.0)).norm() < 1e-15);
        let want = 0.4 * 1.1f64.cos() + 3.0 * 1.1 * 1.1;
        assert!((d2.re - want).abs() < 1e-14);
    }

    #[test]
    fn rules_for_elementary_functions() {
        let cases = [
            ("log(t1)", 2.0, 0.5),
            ("sqrt(t1)", 4.0, 0.25),
            ("cos(t1)", 0.0, 0.0),
            ("t1^-1", 2.0, -0.25),
            ("-t1^3", 1.0, -3.0),
        ];
        for (src, x, want) in cases {
            let e = parse_expr(src, 1).unwrap();
            let d = at(&e.diff(1), &[x]);
            // -t1^3 parses as (-t1)^3 whose derivative is -3 t1^2
            assert!((d.re - want).abs() < 1e-15 && d.im.abs() < 1e-15, "{src}: {d}");
        }
    }

    fn leaf() -> impl Strategy<Value = ParamExpr> {
        prop_oneof![
            (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| ParamExpr::Const(Complex64::new(a, b))),
            (0usize..2).prop_map(ParamExpr::Param),
        ]
    }

    fn tree() -> impl Strategy<Value = ParamExpr> {
        leaf().prop_recursive(5, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| ParamExpr::Neg(Box::new(a))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ParamExpr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ParamExpr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ParamExpr::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ParamExpr::Div(Box::new(a), Box::new(b))),
                (inner.clone(), -3i32..4).prop_map(|(a, k)| ParamExpr::Pow(Box::new(a), k)),
                inner.clone().prop_map(|a| ParamExpr::Exp(Box::new(a))),
                inner.clone().prop_map(|a| ParamExpr::Sin(Box::new(a))),
                inner.clone().prop_map(|a| ParamExpr::Cos(Box::new(a))),
                inner.clone().prop_map(|a| ParamExpr::Log(Box::new(a))),
                inner.prop_map(|a| ParamExpr::Sqrt(Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_evaluates_identically(e in tree(), a in -1.5f64..1.5, b in -1.5f64..1.5) {
            let back = parse_expr(&e.to_string(), 2).unwrap();
            let t = ParameterPoint::new(vec![Complex64::new(a, b), Complex64::new(b, -a)]);
            match (e.eval(&t), back.eval(&t)) {
                (Ok(x), Ok(y)) => prop_assert!((x - y).norm() <= 1e-12 * (1.0 + x.norm()), "{} vs {}", x, y),
                (Err(_), Err(_)) => {}
                (x, y) => prop_assert!(false, "mismatch {:?} {:?}", x, y),
            }
        }

        #[test]
        fn derivative_matches_central_difference(e in tree(), x in -1.0f64..1.0, y in -1.0f64..1.0, j in 1usize..3) {
            let t = ParameterPoint::new(vec![Complex64::new(x, y), Complex64::new(y, 0.3)]);
            let f = |h: f64| e.eval(&t.shifted(j - 1, Complex64::new(h, 0.0)));
            let cd = |h: f64| -> Option<Complex64> { Some((f(h).ok()? - f(-h).ok()?) / (2.0 * h)) };
            if let (Ok(d), Some(c1), Some(c2)) = (e.diff(j).eval(&t), cd(1e-4), cd(5e-5)) {
                // skip samples where the difference quotient is itself unstable (branch cuts, near-poles)
                let settled = (c1 - c2).norm() <= 1e-6 * (1.0 + c2.norm()) && c2.norm() < 1e6;
                if settled {
                    let rich = (4.0 * c2 - c1) / 3.0;
                    prop_assert!((d - rich).norm() <= 1e-6 * (1.0 + d.norm()), "{e}: {d} vs {rich}");
                }
            }
        }

        #[test]
        fn differentiation_is_linear(e1 in tree(), e2 in tree(), a in -1.0f64..1.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let s = Complex64::new(a, 0.5);
            let combo = ParamExpr::Add(
                Box::new(ParamExpr::Mul(Box::new(ParamExpr::Const(s)), Box::new(e1.clone()))),
                Box::new(e2.clone()),
            );
            let t = ParameterPoint::new(vec![Complex64::new(x, y), Complex64::new(y, 0.3)]);
            if let (Ok(l), Ok(r1), Ok(r2)) = (combo.diff(1).eval(&t), e1.diff(1).eval(&t), e2.diff(1).eval(&t)) {
                let r = s * r1 + r2;
                prop_assert!((l - r).norm() <= 1e-9 * (1.0 + r.norm()));
            }
        }
    }
}
