//! File formats: matrix JSON, trajectory CSV, many-body specs and batch
//! output files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{DensityOperator, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, Hermitian, C64};
use crate::netmodel::{Coupling, ManyBodySpec, NodeTerm};

/// `{"rows", "cols", "re": [[..]], "im": [[..]]}`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let grab = |f: fn(&C64) -> f64| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
                .collect()
        };
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            re: grab(|z| z.re),
            im: grab(|z| z.im),
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let shape_ok = |part: &Vec<Vec<f64>>| {
            part.len() == self.rows && part.iter().all(|row| row.len() == self.cols)
        };
        if !shape_ok(&self.re) || !shape_ok(&self.im) {
            return Err(Error::Parse(format!(
                "matrix entries do not match declared shape {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(CMatrix::from_fn(self.rows, self.cols, |i, j| {
            C64::new(self.re[i][j], self.im[i][j])
        }))
    }
}

pub fn write_matrix_json(path: &Path, m: &CMatrix) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(&MatrixJson::from_matrix(m))?)?;
    Ok(())
}

pub fn read_matrix_json(path: &Path) -> Result<CMatrix> {
    let parsed: MatrixJson = serde_json::from_str(&fs::read_to_string(path)?)?;
    parsed.to_matrix()
}

fn trajectory_header(d: usize) -> String {
    let mut h = String::from("t");
    for j in 1..=d {
        for i in 1..=d {
            write!(h, ",re_{i}_{j},im_{i}_{j}").unwrap();
        }
    }
    h
}

/// One row per sample: `t` then real/imaginary parts of `ρ_t` in
/// column-stacking order, all as `{:.16e}`.
pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let d = traj.dim();
    let mut out = trajectory_header(d);
    out.push('\n');
    for (t, rho) in traj.iter() {
        write!(out, "{t:.16e}").unwrap();
        let m = rho.matrix();
        for j in 0..d {
            for i in 0..d {
                write!(out, ",{:.16e},{:.16e}", m[(i, j)].re, m[(i, j)].im).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad number {field:?}")))
}

pub fn trajectory_from_csv(text: &str) -> Result<Trajectory> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty trajectory file".into()))?;
    let cols = header.split(',').count();
    let d = (((cols - 1) / 2) as f64).sqrt().round() as usize;
    if d == 0 || header.trim() != trajectory_header(d) {
        return Err(Error::Parse("unexpected trajectory header".into()));
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(Error::Parse(format!("line {}: expected {cols} fields", n + 2)));
        }
        times.push(parse_f64(fields[0], n + 2)?);
        let mut m = CMatrix::zeros(d, d);
        for j in 0..d {
            for i in 0..d {
                let at = 1 + 2 * (j * d + i);
                m[(i, j)] = C64::new(parse_f64(fields[at], n + 2)?, parse_f64(fields[at + 1], n + 2)?);
            }
        }
        states.push(DensityOperator::new(m)?);
    }
    if times.len() < 2 {
        return Err(Error::Parse("trajectory needs at least two samples".into()));
    }
    let tau = times[times.len() - 1] - times[0];
    let dt = tau / (times.len() - 1) as f64;
    for (k, &t) in times.iter().enumerate() {
        if (t - times[0] - k as f64 * dt).abs() > 1e-9 * tau.max(1.0) {
            return Err(Error::Parse(format!("sample {k} is off the uniform grid")));
        }
    }
    Trajectory::new(tau, dt, states)
}

#[derive(Deserialize)]
struct NodeJson {
    omega: f64,
    operator: MatrixJson,
}

#[derive(Deserialize)]
struct CouplingJson {
    k: usize,
    j: usize,
    alpha: [f64; 2],
    a_k: MatrixJson,
    a_j: MatrixJson,
}

#[derive(Deserialize)]
struct ManyBodyJson {
    dim: usize,
    #[serde(default)]
    nodes: Vec<NodeJson>,
    #[serde(default)]
    couplings: Vec<CouplingJson>,
}

/// `{"dim", "nodes": [{"omega", "operator"}], "couplings": [{"k", "j",
/// "alpha": [re, im], "a_k", "a_j"}]}` with operators as matrix JSON.
pub fn many_body_from_json(text: &str) -> Result<ManyBodySpec> {
    let raw: ManyBodyJson = serde_json::from_str(text)?;
    let nodes = raw
        .nodes
        .into_iter()
        .map(|n| {
            Ok(NodeTerm {
                omega: n.omega,
                operator: Hermitian::new(n.operator.to_matrix()?)?,
            })
        })
        .collect::<Result<_>>()?;
    let couplings = raw
        .couplings
        .into_iter()
        .map(|c| {
            Ok(Coupling {
                k: c.k,
                j: c.j,
                alpha: C64::new(c.alpha[0], c.alpha[1]),
                a_k: Hermitian::new(c.a_k.to_matrix()?)?,
                a_j: Hermitian::new(c.a_j.to_matrix()?)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ManyBodySpec {
        dim: raw.dim,
        nodes,
        couplings,
    })
}

/// `t,y_1,…,y_d` with real outputs.
pub fn outputs_to_csv(times: &[f64], outputs: &[Vec<f64>]) -> String {
    let d = outputs.first().map_or(0, Vec::len);
    let mut out = String::from("t");
    for k in 1..=d {
        write!(out, ",y_{k}").unwrap();
    }
    out.push('\n');
    for (t, y) in times.iter().zip(outputs) {
        write!(out, "{t:.16e}").unwrap();
        for v in y {
            write!(out, ",{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn outputs_from_csv(text: &str) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty output file".into()))?;
    let cols = header.split(',').count();
    if cols < 2 || !header.starts_with("t,y_1") {
        return Err(Error::Parse("unexpected output header".into()));
    }
    let mut times = Vec::new();
    let mut outputs = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(Error::Parse(format!("line {}: expected {cols} fields", n + 2)));
        }
        times.push(parse_f64(fields[0], n + 2)?);
        outputs.push(
            fields[1..]
                .iter()
                .map(|f| parse_f64(f, n + 2))
                .collect::<Result<_>>()?,
        );
    }
    Ok((times, outputs))
}

/// Maps each initialization to its output file and records `Λ₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub dim: usize,
    pub hbar: f64,
    pub step: f64,
    /// Index of the `t = 0` sample in every file.
    pub center: usize,
    pub files: Vec<String>,
    pub lambda0: MatrixJson,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::sample_trajectory;
    use crate::netmodel::{basis_density, pauli_x};
    use crate::linalg::I;

    #[test]
    fn matrix_json_round_trip_is_exact() {
        let m = CMatrix::from_fn(3, 2, |i, j| C64::new(0.1 * i as f64 + 1.0 / 3.0, -(j as f64) * 1e-300 + 2f64.sqrt()));
        let text = serde_json::to_string(&MatrixJson::from_matrix(&m)).unwrap();
        let back: MatrixJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_matrix().unwrap(), m);
        let dir = tempdir();
        let p = dir.join("m.json");
        write_matrix_json(&p, &m).unwrap();
        assert_eq!(read_matrix_json(&p).unwrap(), m);
    }

    #[test]
    fn matrix_json_shape_checked() {
        let bad = MatrixJson { rows: 2, cols: 2, re: vec![vec![0.0; 2]; 2], im: vec![vec![0.0; 2]] };
        assert!(bad.to_matrix().is_err());
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let rho = basis_density(2, 0).unwrap();
        let traj = sample_trajectory(&Hermitian::new(pauli_x()).unwrap(), &rho, 1.0, 0.1, 1.0).unwrap();
        let text = trajectory_to_csv(&traj);
        assert!(text.starts_with("t,re_1_1,im_1_1,re_2_1,im_2_1,re_1_2,im_1_2,re_2_2,im_2_2\n"));
        let back = trajectory_from_csv(&text).unwrap();
        assert_eq!(back.steps(), traj.steps());
        for (a, b) in back.states().iter().zip(traj.states()) {
            assert_eq!(a.matrix(), b.matrix());
        }
        assert_eq!(trajectory_to_csv(&back), text);
    }

    #[test]
    fn trajectory_csv_rejects_garbage() {
        assert!(trajectory_from_csv("").is_err());
        assert!(trajectory_from_csv("t,a\n0,1\n").is_err());
        let rho = basis_density(2, 0).unwrap();
        let traj = sample_trajectory(&Hermitian::zeros(2), &rho, 1.0, 0.5, 1.0).unwrap();
        let text = trajectory_to_csv(&traj).replace("5.0000000000000000e-1,", "4.0000000000000000e-1,");
        assert!(trajectory_from_csv(&text).is_err());
    }

    #[test]
    fn many_body_json() {
        let sx = serde_json::to_value(MatrixJson::from_matrix(&pauli_x())).unwrap();
        let text = serde_json::json!({
            "dim": 2,
            "nodes": [{"omega": 0.5, "operator": sx}],
            "couplings": []
        })
        .to_string();
        let spec = many_body_from_json(&text).unwrap();
        assert_eq!(spec.dim, 2);
        assert_eq!(spec.nodes.len(), 1);
        let bad = text.replace("\"re\":[[0.0,1.0]", "\"re\":[[0.0,5.0]");
        assert!(many_body_from_json(&bad).is_err() || bad == text);
        let _ = I;
    }

    #[test]
    fn outputs_csv_round_trip() {
        let times = vec![-0.1, 0.0, 0.1];
        let ys = vec![vec![0.25, 0.75], vec![0.5, 0.5], vec![1.0 / 3.0, 2.0 / 3.0]];
        let text = outputs_to_csv(&times, &ys);
        assert!(text.starts_with("t,y_1,y_2\n"));
        let (t2, y2) = outputs_from_csv(&text).unwrap();
        assert_eq!(t2, times);
        assert_eq!(y2, ys);
    }

    fn tempdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("qnet-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }
}
