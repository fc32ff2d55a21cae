//! JSON problem files.
//!
//! ```json
//! {
//!   "A": {"rows": 1, "cols": 1, "data": [1.1]},
//!   "B": ..., "C": ..., "Q": ..., "R": ..., "X": ...,
//!   "seed_controller": {"A_K": ..., "B_K": ..., "C_K": ...}
//! }
//! ```
//!
//! Matrices are stored row-major. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::Matrix;
use crate::model::{Controller, Plant, SecondMoment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &Matrix) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self, name: &str) -> Result<Matrix> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Schema(format!(
                "{name}: {}x{} matrix needs {} entries, found {}",
                self.rows,
                self.cols,
                self.rows * self.cols,
                self.data.len()
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema(format!("{name}: non-finite entry")));
        }
        Ok(Matrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerJson {
    #[serde(rename = "A_K")]
    pub a_k: MatrixJson,
    #[serde(rename = "B_K")]
    pub b_k: MatrixJson,
    #[serde(rename = "C_K")]
    pub c_k: MatrixJson,
}

impl ControllerJson {
    pub fn from_controller(k: &Controller) -> Self {
        Self {
            a_k: MatrixJson::from_matrix(&k.a_k),
            b_k: MatrixJson::from_matrix(&k.b_k),
            c_k: MatrixJson::from_matrix(&k.c_k),
        }
    }

    pub fn to_controller(&self) -> Result<Controller> {
        Controller::new(
            self.a_k.to_matrix("A_K")?,
            self.b_k.to_matrix("B_K")?,
            self.c_k.to_matrix("C_K")?,
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ProblemFile {
    pub A: MatrixJson,
    pub B: MatrixJson,
    pub C: MatrixJson,
    pub Q: MatrixJson,
    pub R: MatrixJson,
    pub X: MatrixJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_controller: Option<ControllerJson>,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    pub fn to_problem(&self) -> Result<Problem> {
        let plant = Plant::new(
            self.A.to_matrix("A")?,
            self.B.to_matrix("B")?,
            self.C.to_matrix("C")?,
            self.Q.to_matrix("Q")?,
            self.R.to_matrix("R")?,
        )?;
        let x = SecondMoment::new(self.X.to_matrix("X")?)?;
        x.check_against(&plant)?;
        let seed_controller = match &self.seed_controller {
            Some(k) => {
                let k = k.to_controller()?;
                k.check_against(&plant)?;
                Some(k)
            }
            None => None,
        };
        Ok(Problem {
            plant,
            x,
            seed_controller,
        })
    }

    pub fn from_problem(p: &Problem) -> Self {
        Self {
            A: MatrixJson::from_matrix(p.plant.a()),
            B: MatrixJson::from_matrix(p.plant.b()),
            C: MatrixJson::from_matrix(p.plant.c()),
            Q: MatrixJson::from_matrix(p.plant.q()),
            R: MatrixJson::from_matrix(p.plant.r()),
            X: MatrixJson::from_matrix(p.x.matrix()),
            seed_controller: p
                .seed_controller
                .as_ref()
                .map(ControllerJson::from_controller),
        }
    }
}

/// Validated problem: plant, initial second moment and optional controller.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub plant: Plant,
    pub x: SecondMoment,
    pub seed_controller: Option<Controller>,
}

impl Problem {
    pub fn parse(text: &str) -> Result<Self> {
        ProblemFile::parse(text)?.to_problem()
    }

    /// Scalar plant `(a, 1, 1, 5, 1)` with `X = [[1, 0.25], [0.25, 1]]`;
    /// `a = 1.1` and `a = 0.9` are the two reference examples.
    pub fn scalar_example(a: f64) -> Result<Self> {
        Ok(Self {
            plant: Plant::scalar(a, 5.0, 1.0)?,
            x: SecondMoment::scalar(1.0, 0.25, 1.0)?,
            seed_controller: None,
        })
    }

    pub fn to_json(&self) -> String {
        ProblemFile::from_problem(self).to_json()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "A": {"rows": 1, "cols": 1, "data": [1.1]},
        "B": {"rows": 1, "cols": 1, "data": [1]},
        "C": {"rows": 1, "cols": 1, "data": [1]},
        "Q": {"rows": 1, "cols": 1, "data": [5]},
        "R": {"rows": 1, "cols": 1, "data": [1]},
        "X": {"rows": 2, "cols": 2, "data": [1, 0.25, 0.25, 1]},
        "seed_controller": {
            "A_K": {"rows": 1, "cols": 1, "data": [-0.944]},
            "B_K": {"rows": 1, "cols": 1, "data": [1.1]},
            "C_K": {"rows": 1, "cols": 1, "data": [-0.944]}
        }
    }"#;

    #[test]
    fn parses_example() {
        let p = Problem::parse(EXAMPLE).unwrap();
        assert_eq!(p.plant, Plant::scalar(1.1, 5.0, 1.0).unwrap());
        assert_eq!(
            p.seed_controller,
            Some(Controller::scalar(-0.944, 1.1, -0.944))
        );
    }

    #[test]
    fn round_trips() {
        let p = Problem::parse(EXAMPLE).unwrap();
        assert_eq!(Problem::parse(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn matrices_are_row_major() {
        let m = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let j = MatrixJson::from_matrix(&m);
        assert_eq!(j.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(j.to_matrix("M").unwrap(), m);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = EXAMPLE.replacen("\"A\":", "\"extra\": 1, \"A\":", 1);
        assert!(matches!(Problem::parse(&text), Err(Error::Schema(_))));
        let text = EXAMPLE.replacen(
            "\"rows\": 1, \"cols\": 1, \"data\": [1.1]",
            "\"rows\": 1, \"cols\": 1, \"data\": [1.1], \"dtype\": \"f64\"",
            1,
        );
        assert!(matches!(Problem::parse(&text), Err(Error::Schema(_))));
    }

    #[test]
    fn wrong_entry_count_is_rejected() {
        let text = EXAMPLE.replacen("[1, 0.25, 0.25, 1]", "[1, 0.25, 0.25]", 1);
        assert!(matches!(Problem::parse(&text), Err(Error::Schema(_))));
    }

    #[test]
    fn missing_key_is_rejected() {
        let text = EXAMPLE.replacen("\"R\": {\"rows\": 1, \"cols\": 1, \"data\": [1]},", "", 1);
        assert!(matches!(Problem::parse(&text), Err(Error::Schema(_))));
    }

    #[test]
    fn invalid_plant_is_rejected() {
        let text = EXAMPLE.replacen("\"data\": [5]", "\"data\": [-5]", 1);
        assert!(matches!(
            Problem::parse(&text),
            Err(Error::NotPositiveSemidefinite(_))
        ));
    }
}
