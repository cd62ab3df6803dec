//! JSON serialization of LQ problems.
//!
//! Format: `{"N", "nx", "nu", "stages": [{"Q","S","R","A","B","v","r","s"}, ...],
//! "QN", "rN", "x0"}` with matrices as row-major nested arrays. Any omitted
//! matrix or vector is treated as zero.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::lq::{LqProblemOf, LqStageOf};

#[derive(Debug, Serialize, Deserialize)]
struct StageJson {
    #[serde(rename = "Q", skip_serializing_if = "Option::is_none")]
    q: Option<Vec<Vec<f64>>>,
    #[serde(rename = "S", skip_serializing_if = "Option::is_none")]
    s: Option<Vec<Vec<f64>>>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    r: Option<Vec<Vec<f64>>>,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    b: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    v: Option<Vec<f64>>,
    #[serde(rename = "r", skip_serializing_if = "Option::is_none")]
    r_lin: Option<Vec<f64>>,
    #[serde(rename = "s", skip_serializing_if = "Option::is_none")]
    s_lin: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProblemJson {
    #[serde(rename = "N")]
    n: usize,
    nx: usize,
    nu: usize,
    stages: Vec<StageJson>,
    #[serde(rename = "QN", skip_serializing_if = "Option::is_none")]
    qn: Option<Vec<Vec<f64>>>,
    #[serde(rename = "rN", skip_serializing_if = "Option::is_none")]
    rn: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x0: Option<Vec<f64>>,
}

fn to_matrix(
    data: &Option<Vec<Vec<f64>>>,
    rows: usize,
    cols: usize,
    name: &str,
) -> Result<DMatrix<f64>, String> {
    match data {
        None => Ok(DMatrix::zeros(rows, cols)),
        Some(rowvecs) => {
            if rowvecs.len() != rows || rowvecs.iter().any(|r| r.len() != cols) {
                return Err(format!("{name} is not {rows}x{cols}"));
            }
            Ok(DMatrix::from_fn(rows, cols, |i, j| rowvecs[i][j]))
        }
    }
}

fn to_vector(data: &Option<Vec<f64>>, len: usize, name: &str) -> Result<DVector<f64>, String> {
    match data {
        None => Ok(DVector::zeros(len)),
        Some(v) => {
            if v.len() != len {
                return Err(format!("{name} has length {}, expected {len}", v.len()));
            }
            Ok(DVector::from_column_slice(v))
        }
    }
}

fn from_matrix(m: &DMatrix<f64>) -> Option<Vec<Vec<f64>>> {
    if m.iter().all(|&v| v == 0.0) {
        return None;
    }
    Some((0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect())
}

fn from_vector(v: &DVector<f64>) -> Option<Vec<f64>> {
    if v.iter().all(|&x| x == 0.0) {
        return None;
    }
    Some(v.iter().cloned().collect())
}

/// Parses a problem from the JSON text format.
pub fn lq_problem_from_json(text: &str) -> Result<LqProblemOf<f64>, String> {
    let pj: ProblemJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if pj.stages.len() != pj.n {
        return Err(format!("{} stages for horizon N = {}", pj.stages.len(), pj.n));
    }
    let (nx, nu) = (pj.nx, pj.nu);
    let mut prob = LqProblemOf::zeros(pj.n, nx, nu);
    for (k, sj) in pj.stages.iter().enumerate() {
        prob.stages[k] = LqStageOf {
            q: to_matrix(&sj.q, nx, nx, &format!("stages[{k}].Q"))?,
            s: to_matrix(&sj.s, nu, nx, &format!("stages[{k}].S"))?,
            r: to_matrix(&sj.r, nu, nu, &format!("stages[{k}].R"))?,
            a: to_matrix(&sj.a, nx, nx, &format!("stages[{k}].A"))?,
            b: to_matrix(&sj.b, nx, nu, &format!("stages[{k}].B"))?,
            v: to_vector(&sj.v, nx, &format!("stages[{k}].v"))?,
            r_lin: to_vector(&sj.r_lin, nx, &format!("stages[{k}].r"))?,
            s_lin: to_vector(&sj.s_lin, nu, &format!("stages[{k}].s"))?,
        };
    }
    prob.qn = to_matrix(&pj.qn, nx, nx, "QN")?;
    prob.rn_lin = to_vector(&pj.rn, nx, "rN")?;
    prob.x0 = to_vector(&pj.x0, nx, "x0")?;
    Ok(prob)
}

/// Serializes a problem to the JSON text format (coupling and the
/// free-initial flag are not representable and are ignored).
pub fn lq_problem_to_json(prob: &LqProblemOf<f64>) -> String {
    let pj = ProblemJson {
        n: prob.n,
        nx: prob.nx,
        nu: prob.nu,
        stages: prob
            .stages
            .iter()
            .map(|st| StageJson {
                q: from_matrix(&st.q),
                s: from_matrix(&st.s),
                r: from_matrix(&st.r),
                a: from_matrix(&st.a),
                b: from_matrix(&st.b),
                v: from_vector(&st.v),
                r_lin: from_vector(&st.r_lin),
                s_lin: from_vector(&st.s_lin),
            })
            .collect(),
        qn: from_matrix(&prob.qn),
        rn: from_vector(&prob.rn_lin),
        x0: from_vector(&prob.x0),
    };
    serde_json::to_string_pretty(&pj).expect("LQ problem serialization cannot fail")
}
