//! Exact resistive-network solve of a small array, used to validate the first-order model.
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::profile::LinePair;
use crate::array::{input_dac_transfer, ArrayConfig, InputCode, WeightLine, WeightMatrix};
use crate::error::{Error, Result};

/// Largest array dimension accepted by the dense solver.
pub const NODAL_MAX_DIM: usize = 8;

/// Full description of a small array instance for the nodal solve.
///
/// Topology: each row is driven by its DAC voltage through `r_driver` into column 0,
/// with `r_x` between adjacent cells. Each cell draws `1/R_U` of conductance from its
/// row node; the fraction `D/2^B_W` goes to the selected summation line and the rest
/// to the bias node (all of it when idle). Each summation line is held at `v_bias` by
/// its amplifier at row 0 and has `r_y` between adjacent cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodalProblem {
    pub rows: usize,
    pub cols: usize,
    pub r_unit: f64,
    pub weight_bits: u32,
    pub v_bias: f64,
    /// DAC source voltage per row.
    pub v_dac: Vec<f64>,
    pub weights: WeightMatrix,
    pub r_driver: f64,
    pub r_x: f64,
    pub r_y: f64,
}

impl NodalProblem {
    pub fn from_state(
        cfg: &ArrayConfig<f64>,
        inputs: &[InputCode],
        weights: &WeightMatrix,
        r_driver: f64,
        r_x: f64,
        r_y: f64,
    ) -> Self {
        Self {
            rows: cfg.rows,
            cols: cfg.cols,
            r_unit: cfg.r_unit,
            weight_bits: cfg.weight_bits,
            v_bias: cfg.v_bias,
            v_dac: inputs.iter().map(|&x| input_dac_transfer(x, cfg, None)).collect(),
            weights: weights.clone(),
            r_driver,
            r_x,
            r_y,
        }
    }
}

/// Node voltages and branch currents of the solved network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodalSolution {
    /// Row wire voltage at each cell, row-major.
    pub row_voltages: Vec<f64>,
    /// Summation line voltage at each cell, row-major, per line.
    pub line_voltages: Vec<LinePair<f64>>,
    /// Current each cell delivers into its summation line, row-major (zero when idle).
    pub cell_currents: Vec<f64>,
    /// Current delivered to each column's amplifiers.
    pub line_currents: Vec<LinePair<f64>>,
    /// Largest Kirchhoff current-law residual over free nodes, amperes.
    pub max_residual: f64,
}

#[derive(Clone, Copy, Debug)]
enum Node {
    Fixed(f64),
    Free(usize),
}

struct Branch {
    a: Node,
    b: Node,
    g: f64,
}

/// Solves the network by dense LU factorization.
pub fn nodal_oracle(p: &NodalProblem) -> Result<NodalSolution> {
    let (n, m) = (p.rows, p.cols);
    if n == 0 || m == 0 || n > NODAL_MAX_DIM || m > NODAL_MAX_DIM {
        return Err(Error::Config(format!("nodal oracle supports up to {NODAL_MAX_DIM}x{NODAL_MAX_DIM}, got {n}x{m}")));
    }
    if p.v_dac.len() != n || p.weights.rows() != n || p.weights.cols() != m {
        return Err(Error::Shape { expected: format!("{n}x{m} state"), got: "mismatched vectors".into() });
    }
    if !(p.r_unit > 0.0) || p.r_driver < 0.0 || p.r_x < 0.0 || p.r_y < 0.0 {
        return Err(Error::Config("resistances must be non-negative and r_unit positive".into()));
    }
    let mut free = 0usize;
    let mut next = || {
        free += 1;
        Node::Free(free - 1)
    };
    let mut row_nodes = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            let node = if j > 0 && p.r_x == 0.0 {
                row_nodes[i * m]
            } else if j == 0 && p.r_driver == 0.0 {
                Node::Fixed(p.v_dac[i])
            } else {
                next()
            };
            row_nodes.push(node);
        }
    }
    // line node index: ((i * m + j) * 2 + line)
    let mut line_nodes = Vec::with_capacity(n * m * 2);
    for i in 0..n {
        for _j in 0..m {
            for _l in 0..2 {
                line_nodes.push(if i == 0 || p.r_y == 0.0 { Node::Fixed(p.v_bias) } else { next() });
            }
        }
    }
    let line_node = |i: usize, j: usize, l: usize| line_nodes[(i * m + j) * 2 + l];

    let full = (1u64 << p.weight_bits) as f64;
    let g_unit = 1.0 / p.r_unit;
    let mut branches = Vec::new();
    for i in 0..n {
        if p.r_driver > 0.0 {
            branches.push(Branch { a: Node::Fixed(p.v_dac[i]), b: row_nodes[i * m], g: 1.0 / p.r_driver });
        }
        for j in 0..m {
            if j > 0 && p.r_x > 0.0 {
                branches.push(Branch { a: row_nodes[i * m + j - 1], b: row_nodes[i * m + j], g: 1.0 / p.r_x });
            }
            let cell = p.weights.get(i, j);
            let g_out = match cell.line() {
                WeightLine::Idle => 0.0,
                _ => g_unit * cell.magnitude() as f64 / full,
            };
            let l = if cell.line() == WeightLine::Negative { 1 } else { 0 };
            if g_out > 0.0 {
                branches.push(Branch { a: row_nodes[i * m + j], b: line_node(i, j, l), g: g_out });
            }
            let g_dump = g_unit - g_out;
            if g_dump > 0.0 {
                branches.push(Branch { a: row_nodes[i * m + j], b: Node::Fixed(p.v_bias), g: g_dump });
            }
            if i > 0 && p.r_y > 0.0 {
                for l in 0..2 {
                    branches.push(Branch { a: line_node(i - 1, j, l), b: line_node(i, j, l), g: 1.0 / p.r_y });
                }
            }
        }
    }

    let mut g = DMatrix::<f64>::zeros(free, free);
    let mut rhs = DVector::<f64>::zeros(free);
    for br in &branches {
        match (br.a, br.b) {
            (Node::Free(a), Node::Free(b)) => {
                g[(a, a)] += br.g;
                g[(b, b)] += br.g;
                g[(a, b)] -= br.g;
                g[(b, a)] -= br.g;
            }
            (Node::Free(a), Node::Fixed(v)) | (Node::Fixed(v), Node::Free(a)) => {
                g[(a, a)] += br.g;
                rhs[a] += br.g * v;
            }
            (Node::Fixed(_), Node::Fixed(_)) => {}
        }
    }
    let v = if free == 0 {
        DVector::zeros(0)
    } else {
        let lu = g.clone().lu();
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular(format!("conductance matrix of {free} free nodes is singular (floating node?)")))?;
        if sol.iter().any(|x| !x.is_finite()) {
            return Err(Error::Singular("solution contains non-finite voltages".into()));
        }
        sol
    };
    let volt = |node: Node| match node {
        Node::Fixed(x) => x,
        Node::Free(k) => v[k],
    };

    let mut residual = vec![0.0f64; free];
    for br in &branches {
        let i_ab = br.g * (volt(br.a) - volt(br.b));
        if let Node::Free(a) = br.a {
            residual[a] -= i_ab;
        }
        if let Node::Free(b) = br.b {
            residual[b] += i_ab;
        }
    }
    let max_residual = residual.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));

    let mut row_voltages = Vec::with_capacity(n * m);
    let mut line_voltages = Vec::with_capacity(n * m);
    let mut cell_currents = Vec::with_capacity(n * m);
    let mut line_currents = vec![LinePair { pos: 0.0, neg: 0.0 }; m];
    for i in 0..n {
        for j in 0..m {
            let vr = volt(row_nodes[i * m + j]);
            let lp = LinePair { pos: volt(line_node(i, j, 0)), neg: volt(line_node(i, j, 1)) };
            let cell = p.weights.get(i, j);
            let g_out = g_unit * cell.magnitude() as f64 / full;
            let cur = match cell.line() {
                WeightLine::Idle => 0.0,
                WeightLine::Positive => {
                    let c = g_out * (vr - lp.pos);
                    line_currents[j].pos += c;
                    c
                }
                WeightLine::Negative => {
                    let c = g_out * (vr - lp.neg);
                    line_currents[j].neg += c;
                    c
                }
            };
            row_voltages.push(vr);
            line_voltages.push(lp);
            cell_currents.push(cur);
        }
    }
    Ok(NodalSolution { row_voltages, line_voltages, cell_currents, line_currents, max_residual })
}
