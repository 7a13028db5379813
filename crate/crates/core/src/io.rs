//! JSON file formats. Complex numbers are `[re, im]` pairs throughout.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::classify::{ClassificationReport, IntegrabilityReport, ProjectiveSplitReport};
use crate::error::{Error, Result};
use crate::expr::{parse_expr, ParamExpr, ParameterPoint};
use crate::halphen::{EvolutionReport, HalphenConfig, Variant};
use crate::linalg::CMat;
use crate::local::LocalSolution;
use crate::monodromy::{GridCell, TGrid};
use crate::sysmodel::{ExprMatrix, ParamRationalMatrix, PoleLocus};

pub fn c2(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn matrix_json(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| c2(m[(r, c)])).collect()).collect()
}

pub fn point_json(t: &ParameterPoint) -> Vec<[f64; 2]> {
    t.coords().iter().map(|z| c2(*z)).collect()
}

/// A complex number given as `[re, im]` or as a bare real.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexJson {
    Pair([f64; 2]),
    Real(f64),
}

impl From<ComplexJson> for Complex64 {
    fn from(c: ComplexJson) -> Self {
        match c {
            ComplexJson::Pair([re, im]) => Complex64::new(re, im),
            ComplexJson::Real(re) => Complex64::new(re, 0.0),
        }
    }
}

pub fn complex_vec(v: &[ComplexJson]) -> Vec<Complex64> {
    v.iter().map(|&z| z.into()).collect()
}

pub fn complex_matrix(rows: &[Vec<ComplexJson>]) -> Result<CMat> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("matrix must be square".into()));
    }
    let flat: Vec<Complex64> = rows.iter().flat_map(|r| r.iter().map(|&z| z.into())).collect();
    Ok(CMat::from_row_slice(n, n, &flat))
}

type ExprRows = Vec<Vec<String>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleFile {
    pub location: String,
    /// Highest order first.
    pub laurent: Vec<ExprRows>,
}

/// `{ "dimension", "num_params", "poles": [{ "location", "laurent" }], "poly" }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub dimension: usize,
    pub num_params: usize,
    pub poles: Vec<PoleFile>,
    pub poly: Vec<ExprRows>,
}

fn expr_matrix(rows: &ExprRows, n: usize, r: usize) -> Result<ExprMatrix> {
    if rows.len() != n || rows.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch(format!("expected a {n}x{n} matrix")));
    }
    let parsed = rows
        .iter()
        .map(|row| row.iter().map(|s| parse_expr(s, r)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    ExprMatrix::from_rows(parsed)
}

fn expr_rows(m: &ExprMatrix) -> ExprRows {
    m.rows().iter().map(|row| row.iter().map(ParamExpr::to_string).collect()).collect()
}

impl SystemFile {
    /// Parse every expression and build the system, without pruning.
    pub fn to_system_raw(&self) -> Result<ParamRationalMatrix> {
        let (n, r) = (self.dimension, self.num_params);
        let poles = self
            .poles
            .iter()
            .map(|p| {
                let laurent = p.laurent.iter().map(|m| expr_matrix(m, n, r)).collect::<Result<Vec<_>>>()?;
                Ok(PoleLocus::new(parse_expr(&p.location, r)?, laurent))
            })
            .collect::<Result<Vec<_>>>()?;
        let poly = self.poly.iter().map(|m| expr_matrix(m, n, r)).collect::<Result<Vec<_>>>()?;
        ParamRationalMatrix::new(n, r, poles, poly)
    }

    /// Build the system and prune identically vanishing Laurent terms.
    /// Pole indices used elsewhere refer to the pruned list.
    pub fn to_system(&self) -> Result<ParamRationalMatrix> {
        Ok(self.to_system_raw()?.pruned())
    }

    pub fn from_system(a: &ParamRationalMatrix) -> Self {
        SystemFile {
            dimension: a.dim(),
            num_params: a.num_params(),
            poles: a
                .poles()
                .iter()
                .map(|p| PoleFile {
                    location: p.location.to_string(),
                    laurent: p.laurent.iter().map(expr_rows).collect(),
                })
                .collect(),
            poly: a.poly().iter().map(expr_rows).collect(),
        }
    }
}

pub fn parse_system(text: &str) -> Result<ParamRationalMatrix> {
    let f: SystemFile = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("system file: {e}")))?;
    f.to_system()
}

/// `{ "A_x": system, "A_t": [system, …] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegrableFile {
    #[serde(rename = "A_x")]
    pub a_x: SystemFile,
    #[serde(rename = "A_t", default)]
    pub a_t: Vec<SystemFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentJson {
    pub start: Vec<ComplexJson>,
    pub end: Vec<ComplexJson>,
    pub steps: usize,
}

/// `{ "points": [[z, …], …] }` or `{ "segment": { "start", "end", "steps" } }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridFile {
    Points(Vec<Vec<ComplexJson>>),
    Segment(SegmentJson),
}

impl GridFile {
    pub fn to_grid(&self) -> TGrid {
        match self {
            GridFile::Points(p) => TGrid::Points(p.iter().map(|v| ParameterPoint::new(complex_vec(v))).collect()),
            GridFile::Segment(s) => TGrid::Segment {
                start: ParameterPoint::new(complex_vec(&s.start)),
                end: ParameterPoint::new(complex_vec(&s.end)),
                steps: s.steps,
            },
        }
    }
}

pub fn parse_grid(text: &str) -> Result<TGrid> {
    let g: GridFile = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("grid file: {e}")))?;
    Ok(g.to_grid())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialJson {
    Flow { x: Vec<ComplexJson> },
    Dhv { omega: Vec<ComplexJson>, theta: ComplexJson, phi: ComplexJson },
    Halphen { omega: Vec<ComplexJson> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HalphenConfigFile {
    pub variant: String,
    #[serde(default = "one")]
    pub mu: ComplexJson,
    #[serde(default = "zeros3")]
    pub lambdas: Vec<ComplexJson>,
    #[serde(rename = "C", default = "diag_c")]
    pub c: Vec<Vec<ComplexJson>>,
    #[serde(default = "zeros3")]
    pub abc: Vec<ComplexJson>,
    #[serde(default = "zero")]
    pub t0: ComplexJson,
    pub t_end: ComplexJson,
    pub initial: InitialJson,
    #[serde(default = "four")]
    pub checkpoints: usize,
    #[serde(default)]
    pub base: Option<ComplexJson>,
}

fn one() -> ComplexJson {
    ComplexJson::Real(1.0)
}
fn zero() -> ComplexJson {
    ComplexJson::Real(0.0)
}
fn zeros3() -> Vec<ComplexJson> {
    vec![zero(); 3]
}
fn diag_c() -> Vec<Vec<ComplexJson>> {
    vec![vec![one(), zero()], vec![zero(), ComplexJson::Real(-1.0)]]
}
fn four() -> usize {
    4
}

fn three(v: &[ComplexJson], what: &str) -> Result<[Complex64; 3]> {
    let z = complex_vec(v);
    z.try_into().map_err(|_| Error::DimensionMismatch(format!("{what} needs exactly 3 entries")))
}

impl HalphenConfigFile {
    pub fn to_config(&self) -> Result<HalphenConfig> {
        let variant = Variant::parse(&self.variant)?;
        let initial = match (&self.initial, variant) {
            (InitialJson::Flow { x }, Variant::HiiFlow) => complex_vec(x),
            (InitialJson::Dhv { omega, theta, phi }, Variant::Dhv) => {
                let mut v = complex_vec(omega);
                v.push((*theta).into());
                v.push((*phi).into());
                v
            }
            (InitialJson::Halphen { omega }, Variant::Hi) | (InitialJson::Halphen { omega }, Variant::Dhv) => {
                let mut v = complex_vec(omega);
                if variant == Variant::Dhv {
                    v.extend([Complex64::new(0.0, 0.0); 2]);
                }
                v
            }
            _ => return Err(Error::InvalidInput(format!("initial state does not match variant {}", variant.as_str()))),
        };
        let config = HalphenConfig {
            variant,
            mu: self.mu.into(),
            lambdas: three(&self.lambdas, "lambdas")?,
            c: complex_matrix(&self.c)?,
            abc: three(&self.abc, "abc")?,
            t0: self.t0.into(),
            t_end: self.t_end.into(),
            initial,
            checkpoints: self.checkpoints,
            base: self.base.map(Into::into),
        };
        config.validate()?;
        Ok(config)
    }
}

pub fn parse_halphen_config(text: &str) -> Result<HalphenConfig> {
    let f: HalphenConfigFile =
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config file: {e}")))?;
    f.to_config()
}

pub fn error_json(e: &Error) -> Value {
    json!({ "error": e.code(), "detail": e.to_string() })
}

/// One entry per grid cell; failed cells carry `"M": null` and an `"error"`.
pub fn grid_json(cells: &[GridCell]) -> Value {
    Value::Array(
        cells
            .iter()
            .map(|c| match &c.outcome {
                Ok(r) => json!({
                    "t": point_json(&c.t),
                    "loop": c.loop_index,
                    "M": matrix_json(&r.matrix),
                    "err": r.err_estimate,
                    "det_check": r.det_check,
                }),
                Err(e) => json!({
                    "t": point_json(&c.t),
                    "loop": c.loop_index,
                    "M": Value::Null,
                    "err": Value::Null,
                    "det_check": Value::Null,
                    "error": error_json(e),
                }),
            })
            .collect(),
    )
}

pub fn classification_json(r: &ClassificationReport) -> Value {
    json!({
        "verdict": r.verdict.as_str(),
        "loops": r.loops.iter().map(|l| json!({
            "loop": l.loop_index,
            "Gamma": matrix_json(&l.gamma),
            "c_samples": l.c_samples.iter().map(|z| c2(*z)).collect::<Vec<_>>(),
            "max_residual": if r.verdict == crate::classify::Verdict::Isomonodromic { l.iso_residual } else { l.proj_residual },
            "iso_residual": l.iso_residual,
            "proj_residual": l.proj_residual,
            "err": l.max_err,
            "proj_err": l.proj_err,
            "needs_refinement": l.needs_refinement,
        })).collect::<Vec<_>>(),
        "tolerances": { "iso": r.tolerances.iso, "proj": r.tolerances.proj },
    })
}

pub fn projective_json(r: &ProjectiveSplitReport, t0: &ParameterPoint) -> Result<Value> {
    let b = r.split.scalars_at(t0)?;
    Ok(json!({
        "verdict": r.verdict.as_str(),
        "b_at_t0": b.iter().map(|z| c2(*z)).collect::<Vec<_>>(),
        "b": r.split.scalars.iter().map(ParamExpr::to_string).collect::<Vec<_>>(),
        "traceless": classification_json(&r.traceless),
        "reconstruction_drift": r.reconstruction_drift,
    }))
}

pub fn integrability_json(r: &IntegrabilityReport) -> Value {
    json!({
        "integrable": r.integrable,
        "zc_tol": r.tol,
        "pairs": r.pairs.iter().map(|(j, k, res)| json!({ "j": j, "k": k, "residual": res })).collect::<Vec<_>>(),
    })
}

pub fn local_json(l: &LocalSolution, residual_slope: Option<f64>) -> Value {
    json!({
        "pole": l.pole_index,
        "location": c2(l.location),
        "t": point_json(&l.t),
        "order": l.order(),
        "exponent": matrix_json(&l.exponent_matrix),
        "series": l.series.iter().skip(1).map(matrix_json).collect::<Vec<_>>(),
        "radius_estimate": l.radius_estimate,
        "residual_slope": residual_slope,
    })
}

pub fn evolution_json(r: &EvolutionReport) -> Value {
    json!({
        "base": c2(r.base),
        "max_residual": r.max_residual,
        "max_oracle_residual": r.max_oracle_residual,
        "beta_sum": r.beta_sum,
        "beta_moment": r.beta_moment,
        "rate_residual": r.rate_residual,
        "flow_err": r.flow_err,
        "checkpoints": r.rows.iter().map(|row| json!({
            "t": c2(row.t),
            "x": row.x.iter().map(|z| c2(*z)).collect::<Vec<_>>(),
            "b": row.b.iter().map(|z| c2(*z)).collect::<Vec<_>>(),
            "beta": row.beta.iter().map(|z| c2(*z)).collect::<Vec<_>>(),
            "c": row.c.iter().map(|z| c2(*z)).collect::<Vec<_>>(),
            "residual": row.residual,
            "M": row.monodromy.iter().map(matrix_json).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn system_round_trip() {
        let text = r#"{"dimension":2,"num_params":1,
            "poles":[{"location":"t1","laurent":[[["0","-3"],["0","0"]],[["t1","0"],["0","t1-2"]]]}],
            "poly":[]}"#;
        let a = parse_system(text).unwrap();
        assert_eq!(a.poles()[0].order(), 2);
        let back = SystemFile::from_system(&a).to_system().unwrap();
        let t = ParameterPoint::real(&[0.3]);
        let x = c(1.0, 0.5);
        assert_eq!(a.eval(x, &t).unwrap(), back.eval(x, &t).unwrap());
    }

    #[test]
    fn system_errors_carry_codes() {
        let bad = r#"{"dimension":1,"num_params":1,"poles":[],"poly":[[["t2"]]]}"#;
        assert_eq!(parse_system(bad).unwrap_err().code(), "PARAM_OUT_OF_RANGE");
        let bad = r#"{"dimension":2,"num_params":0,"poles":[],"poly":[[["1"]]]}"#;
        assert_eq!(parse_system(bad).unwrap_err().code(), "DIMENSION_MISMATCH");
    }

    #[test]
    fn grid_forms() {
        let g = parse_grid(r#"{"segment":{"start":[0],"end":[[1,0]],"steps":3}}"#).unwrap();
        assert_eq!(g.points().unwrap()[1], ParameterPoint::real(&[0.5]));
        let g = parse_grid(r#"{"points":[[[0.1,0.2]],[0.3]]}"#).unwrap();
        assert_eq!(g.points().unwrap().len(), 2);
    }

    #[test]
    fn halphen_config_forms() {
        let cfg = parse_halphen_config(
            r#"{"variant":"HII_flow","mu":[1,0],"lambdas":[1,-0.5,-0.5],"C":[[1,0],[0,-1]],
                "abc":[0,0,0],"t0":[0,0],"t_end":[0.25,0],"initial":{"x":[[0,0],[1,0],[0,1]]},"checkpoints":4}"#,
        )
        .unwrap();
        assert_eq!(cfg, HalphenConfig::standard());
        let dhv = parse_halphen_config(r#"{"variant":"DHV","t_end":1,"initial":{"omega":[1,1,1],"theta":0,"phi":0}}"#)
            .unwrap();
        assert_eq!(dhv.initial.len(), 5);
        let err =
            parse_halphen_config(r#"{"variant":"HII_flow","t_end":1,"lambdas":[1,-0.5,-0.5],"initial":{"x":[0,0,1]}}"#)
                .unwrap_err();
        assert_eq!(err.code(), "COLLISION");
    }
}
