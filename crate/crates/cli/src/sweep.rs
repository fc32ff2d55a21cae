//! Cost landscapes over one or two controller entries, or along a
//! similarity orbit.

use std::io::Write;
use std::str::FromStr;

use dlqr_core::similarity::{Orbit, Transform};
use dlqr_core::{cost, model, Controller, Error, Problem, Result};
use rayon::prelude::*;

use crate::format::sig17;

pub const CSV_HEADER: [&str; 5] = ["axis1", "axis2", "J", "stabilizing", "rho"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    AK,
    BK,
    CK,
}

impl Block {
    fn name(&self) -> &'static str {
        match self {
            Block::AK => "A_K",
            Block::BK => "B_K",
            Block::CK => "C_K",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Range {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::InvalidConfig("range bounds must be finite".into()));
        }
        if !(min < max) {
            return Err(Error::InvalidConfig(format!(
                "range needs min < max, got {min}:{max}"
            )));
        }
        if steps < 2 {
            return Err(Error::InvalidConfig(format!(
                "range needs at least 2 steps, got {steps}"
            )));
        }
        Ok(Self { min, max, steps })
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.steps {
            self.max
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.value(i)).collect()
    }

    /// Grid spacing.
    pub fn resolution(&self) -> f64 {
        (self.max - self.min) / (self.steps - 1) as f64
    }
}

impl FromStr for Range {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidConfig(format!("expected min:max:steps, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let min = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
        let max = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
        let steps = parts[2].trim().parse::<usize>().map_err(|_| bad())?;
        Range::new(min, max, steps)
    }
}

/// One swept controller entry, written `B_K[0,0]=min:max:steps`
/// (the index may be omitted for scalar blocks).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub block: Block,
    pub row: usize,
    pub col: usize,
    pub range: Range,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad =
            || Error::InvalidConfig(format!("expected e.g. B_K[0,0]=min:max:steps, got {s:?}"));
        let (lhs, rhs) = s.split_once('=').ok_or_else(bad)?;
        let lhs = lhs.trim();
        let (name, index) = match lhs.split_once('[') {
            Some((name, rest)) => (name, Some(rest.strip_suffix(']').ok_or_else(bad)?)),
            None => (lhs, None),
        };
        let block = match name {
            "A_K" => Block::AK,
            "B_K" => Block::BK,
            "C_K" => Block::CK,
            _ => return Err(bad()),
        };
        let (row, col) = match index {
            Some(idx) => {
                let (r, c) = idx.split_once(',').ok_or_else(bad)?;
                (
                    r.trim().parse().map_err(|_| bad())?,
                    c.trim().parse().map_err(|_| bad())?,
                )
            }
            None => (0, 0),
        };
        Ok(Axis {
            block,
            row,
            col,
            range: rhs.parse()?,
        })
    }
}

impl Axis {
    fn set(&self, k: &mut Controller, v: f64) {
        let m = match self.block {
            Block::AK => &mut k.a_k,
            Block::BK => &mut k.b_k,
            Block::CK => &mut k.c_k,
        };
        m[(self.row, self.col)] = v;
    }

    fn check(&self, k: &Controller) -> Result<()> {
        let shape = match self.block {
            Block::AK => k.a_k.shape(),
            Block::BK => k.b_k.shape(),
            Block::CK => k.c_k.shape(),
        };
        if self.row >= shape.0 || self.col >= shape.1 {
            return Err(Error::InvalidConfig(format!(
                "{}[{},{}] is outside a {}x{} block",
                self.block.name(),
                self.row,
                self.col,
                shape.0,
                shape.1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepSpec {
    Grid {
        base: Controller,
        axes: Vec<Axis>,
    },
    /// `T = t·I` applied to `base` for `t` on the range.
    Orbit {
        base: Controller,
        range: Range,
    },
}

impl SweepSpec {
    pub fn grid(base: Controller, axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidConfig(format!(
                "need 1 or 2 axes, got {}",
                axes.len()
            )));
        }
        for a in &axes {
            a.check(&base)?;
        }
        if axes.len() == 2
            && (axes[0].block, axes[0].row, axes[0].col)
                == (axes[1].block, axes[1].row, axes[1].col)
        {
            return Err(Error::InvalidConfig(
                "both axes sweep the same entry".into(),
            ));
        }
        Ok(SweepSpec::Grid { base, axes })
    }

    pub fn orbit(base: Controller, range: Range) -> Result<Self> {
        if range.values().contains(&0.0) {
            return Err(Error::InvalidConfig(
                "orbit grid contains the singular transform T = 0".into(),
            ));
        }
        Ok(SweepSpec::Orbit { base, range })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: (usize, usize),
    pub axis1: f64,
    pub axis2: Option<f64>,
    /// `None` outside the stabilizing set.
    pub j: Option<f64>,
    pub rho: f64,
}

impl Cell {
    pub fn stabilizing(&self) -> bool {
        self.j.is_some()
    }
}

/// Evaluates every cell; rows come back sorted by grid index.
pub fn evaluate(problem: &Problem, spec: &SweepSpec) -> Result<Vec<Cell>> {
    let mut cells = match spec {
        SweepSpec::Grid { base, axes } => {
            let second = axes.get(1);
            let n2 = second.map_or(1, |a| a.range.steps);
            let indices: Vec<(usize, usize)> = (0..axes[0].range.steps)
                .flat_map(|i| (0..n2).map(move |j| (i, j)))
                .collect();
            indices
                .into_par_iter()
                .map(|(i, j)| {
                    let mut k = base.clone();
                    let v1 = axes[0].range.value(i);
                    axes[0].set(&mut k, v1);
                    let v2 = second.map(|a| {
                        let v = a.range.value(j);
                        a.set(&mut k, v);
                        v
                    });
                    grid_cell(problem, &k, (i, j), v1, v2)
                })
                .collect::<Result<Vec<_>>>()?
        }
        SweepSpec::Orbit { base, range } => {
            let orbit = Orbit::new(&problem.plant, base, &problem.x)?;
            let rho = orbit.report().rho;
            let n = base.n();
            (0..range.steps)
                .into_par_iter()
                .map(|i| {
                    let t = range.value(i);
                    let j = orbit.cost(&Transform::scaled_identity(n, t)?)?;
                    Ok(Cell {
                        index: (i, 0),
                        axis1: t,
                        axis2: None,
                        j: Some(j),
                        rho,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    cells.sort_by_key(|c| c.index);
    Ok(cells)
}

fn grid_cell(
    problem: &Problem,
    k: &Controller,
    index: (usize, usize),
    axis1: f64,
    axis2: Option<f64>,
) -> Result<Cell> {
    let rho = model::closed_loop_radius(&problem.plant, k)?;
    let j = if model::is_stabilizing(&problem.plant, k) {
        Some(cost::evaluate(&problem.plant, k, &problem.x)?.j)
    } else {
        None
    };
    Ok(Cell {
        index,
        axis1,
        axis2,
        j,
        rho,
    })
}

/// Stabilizing cell with the smallest cost (first one on ties).
pub fn minimum(cells: &[Cell]) -> Option<&Cell> {
    cells
        .iter()
        .filter(|c| c.j.is_some())
        .fold(None, |best: Option<&Cell>, c| match best {
            Some(b) if b.j <= c.j => Some(b),
            _ => Some(c),
        })
}

pub fn write_csv<W: Write>(cells: &[Cell], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for c in cells {
        w.write_record([
            sig17(c.axis1),
            c.axis2.map(sig17).unwrap_or_default(),
            c.j.map(sig17).unwrap_or_default(),
            if c.stabilizing() {
                "1".into()
            } else {
                "0".into()
            },
            sig17(c.rho),
        ])?;
    }
    w.flush()?;
    Ok(())
}
