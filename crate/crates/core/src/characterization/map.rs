//! Static output-current map over the input/output plane and its zero
//! contour.

use std::collections::HashMap;

use super::PhaseMap;
use crate::error::Result;
use crate::sim::{Circuit, SolverOptions};

/// Output current at one clamped point, solved from a fixed guess so the
/// value depends only on `(v_in, v_out)`.
pub fn cell_current(circuit: &Circuit, v_out: f64, opts: &SolverOptions) -> Result<f64> {
    let mut x = circuit.uniform_state(0.5 * circuit.vdd());
    circuit.output_current_at(&mut x, v_out, opts)
}

/// Output current along one column with warm starts from the previous
/// point; faster than [`cell_current`] but path dependent in the last bits.
pub fn column_currents(circuit: &Circuit, v_outs: &[f64], opts: &SolverOptions) -> Result<Vec<f64>> {
    let mut x = circuit.uniform_state(0.5 * circuit.vdd());
    v_outs.iter().map(|&v| circuit.output_current_at(&mut x, v, opts)).collect()
}

/// Evaluates I_out on the grid `v_in x v_out`. Cells whose solve fails hold
/// NaN and are flagged invalid.
pub fn map(circuit: &Circuit, v_in: &[f64], v_out: &[f64], opts: &SolverOptions) -> Result<PhaseMap> {
    let mut c = circuit.clone();
    let mut i_out = Vec::with_capacity(v_in.len());
    for &vi in v_in {
        if c.input_value().is_some() {
            c.set_input(vi)?;
        }
        let col: Vec<f64> = v_out.iter().map(|&vo| cell_current(&c, vo, opts).unwrap_or(f64::NAN)).collect();
        i_out.push(col);
    }
    Ok(PhaseMap::new(v_in.to_vec(), v_out.to_vec(), i_out))
}

/// Uniform grid from 0 to `vdd` with spacing as close to `width` as the
/// range allows.
pub fn uniform_grid(vdd: f64, width: f64) -> Vec<f64> {
    let n = (vdd / width).round().max(1.0) as usize;
    (0..=n).map(|k| vdd * k as f64 / n as f64).collect()
}

/// Where along a column the current turns from negative to positive
/// (repelling crossings). Returns the lower grid index of each bracket.
pub fn repelling_brackets(i: &[f64]) -> Vec<usize> {
    (0..i.len().saturating_sub(1))
        .filter(|&k| {
            let (a, b) = (i[k], i[k + 1]);
            a.is_finite() && b.is_finite() && ((a < 0.0 && b >= 0.0) || (a <= 0.0 && b > 0.0))
        })
        .collect()
}

/// Linear interpolation of the zero between two samples.
pub fn interpolate_zero(x0: f64, f0: f64, x1: f64, f1: f64) -> f64 {
    if f0 == f1 {
        0.5 * (x0 + x1)
    } else {
        x0 + (x1 - x0) * f0 / (f0 - f1)
    }
}

/// Narrows a sign-change bracket `(a, fa)`, `(b, fb)` with `steps`
/// Illinois false-position steps and returns the final secant zero.
pub fn refine_zero(
    mut f: impl FnMut(f64) -> Result<f64>,
    (mut a, mut fa): (f64, f64),
    (mut b, mut fb): (f64, f64),
    steps: usize,
) -> Result<f64> {
    let mut side = 0i8;
    for _ in 0..steps {
        let c = interpolate_zero(a, fa, b, fb);
        let fc = f(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if (fc > 0.0) == (fb > 0.0) {
            (b, fb) = (c, fc);
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            (a, fa) = (c, fc);
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
    }
    Ok(interpolate_zero(a, fa, b, fb))
}

/// Edge of the grid: horizontal edges join `(i, j)` and `(i+1, j)`,
/// vertical edges join `(i, j)` and `(i, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// Marching squares on the sign of `i_out`, chaining the segments into
/// polylines of `(v_in, v_out)` points.
pub fn contour_zero(map: &PhaseMap) -> Vec<Vec<(f64, f64)>> {
    let (nx, ny) = (map.v_in.len(), map.v_out.len());
    if nx < 2 || ny < 2 {
        return Vec::new();
    }
    let f = |i: usize, j: usize| map.i_out[i][j];
    let pos = |v: f64| v >= 0.0;
    let point = |e: Edge| -> (f64, f64) {
        match e {
            Edge::H(i, j) => {
                let x = interpolate_zero(map.v_in[i], f(i, j), map.v_in[i + 1], f(i + 1, j));
                (x, map.v_out[j])
            }
            Edge::V(i, j) => {
                let y = interpolate_zero(map.v_out[j], f(i, j), map.v_out[j + 1], f(i, j + 1));
                (map.v_in[i], y)
            }
        }
    };

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let c = [f(i, j), f(i + 1, j), f(i + 1, j + 1), f(i, j + 1)];
            if c.iter().any(|v| !v.is_finite()) {
                continue;
            }
            // edges in counter-clockwise order: bottom, right, top, left
            let edges = [Edge::H(i, j), Edge::V(i + 1, j), Edge::H(i, j + 1), Edge::V(i, j)];
            let crossed: Vec<Edge> = (0..4).filter(|&k| pos(c[k]) != pos(c[(k + 1) % 4])).map(|k| edges[k]).collect();
            match crossed.len() {
                2 => segments.push((crossed[0], crossed[1])),
                4 => {
                    // saddle: decide by the cell average
                    let center = pos(c.iter().sum::<f64>() / 4.0);
                    if center == pos(c[0]) {
                        segments.push((crossed[0], crossed[1]));
                        segments.push((crossed[2], crossed[3]));
                    } else {
                        segments.push((crossed[0], crossed[3]));
                        segments.push((crossed[1], crossed[2]));
                    }
                }
                _ => {}
            }
        }
    }

    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(k);
        by_edge.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    // start open chains at edges touched once, then close remaining loops
    let mut starts: Vec<usize> = segments
        .iter()
        .enumerate()
        .filter(|(_, (a, b))| by_edge[a].len() == 1 || by_edge[b].len() == 1)
        .map(|(k, _)| k)
        .collect();
    starts.extend(0..segments.len());
    for s in starts {
        if used[s] {
            continue;
        }
        used[s] = true;
        let (a, b) = segments[s];
        let (mut head, mut tail) = if by_edge[&a].len() == 1 { (a, b) } else { (b, a) };
        let mut chain = vec![head, tail];
        loop {
            let next = by_edge[&tail].iter().copied().find(|&k| !used[k]);
            match next {
                Some(k) => {
                    used[k] = true;
                    let (p, q) = segments[k];
                    tail = if p == tail { q } else { p };
                    chain.push(tail);
                }
                None => break,
            }
        }
        // extend backwards for chains started mid-way
        loop {
            let next = by_edge[&head].iter().copied().find(|&k| !used[k]);
            match next {
                Some(k) => {
                    used[k] = true;
                    let (p, q) = segments[k];
                    head = if p == head { q } else { p };
                    chain.insert(0, head);
                }
                None => break,
            }
        }
        lines.push(chain.into_iter().map(point).collect());
    }
    lines
}
