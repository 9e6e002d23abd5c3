//! Solutions, objective evaluation, LP relaxations and MILP exports.
//!
//! Two equivalent formulations are supported: [`Formulation::Operating`]
//! keeps the operating-level variables `y` with their flow-balance rows,
//! [`Formulation::Cumulative`] eliminates them through
//! `y[i][t] = y0[i] + sum_{tau <= t} z[i][tau] - sum_{tau < t} zp[i][tau]`.
//! The surplus/shortage linking rows come in three flavors, see [`Linking`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::lp::{self, LinearProgram, LpError, LpStatus, Sense};

/// Iteration cap handed to the simplex for relaxations built here.
pub const LP_ITERATION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange { what: &'static str, index: usize, size: usize },
    #[error("solution shape mismatch: {0}")]
    Shape(String),
    #[error("{var}[{i}][{t}] = {value} outside [0, {cap}]")]
    VariableBound { var: &'static str, i: usize, t: usize, value: i64, cap: u32 },
    #[error("operating level y[{i}][{t}] = {value} outside [0, {cap}]")]
    OperatingLevel { i: usize, t: usize, value: i64, cap: u32 },
    #[error("period {t}: {total} facilities operating exceed the cap {cap}")]
    PeriodCapacity { t: usize, total: i64, cap: u32 },
    #[error("cell (s={s}, t={t}, j={j}): {message}")]
    Linking { s: usize, t: usize, j: usize, message: String },
    #[error("cell (s={s}, t={t}, j={j}): coverage {coverage} - threshold {threshold} != surplus {surplus} - shortage {shortage}")]
    Covering { s: usize, t: usize, j: usize, coverage: i64, threshold: u32, surplus: usize, shortage: usize },
    #[error("cell (s={s}, t={t}, j={j}): margin {margin} outside [{lo}, {hi}]")]
    MarginOutOfRange { s: usize, t: usize, j: usize, margin: i64, lo: i64, hi: i64 },
    #[error("lp solve failed: {0}")]
    Lp(#[from] LpError),
    #[error("lp relaxation ended with status {0:?}")]
    LpStatus(LpStatus),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ModelError {
    fn from(e: std::io::Error) -> Self {
        ModelError::Io(e.to_string())
    }
}

/// Opening plan: `z[i][t]` facilities opened at the start of `t`, `zp[i][t]`
/// closed at the end of `t` (`t < periods - 1`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FirstStageSolution {
    pub z: Vec<Vec<i64>>,
    pub zp: Vec<Vec<i64>>,
}

impl FirstStageSolution {
    /// The do-nothing plan.
    pub fn zeros(inst: &Instance) -> Self {
        FirstStageSolution {
            z: vec![vec![0; inst.periods]; inst.locations],
            zp: vec![vec![0; inst.periods - 1]; inst.locations],
        }
    }

    /// Derived operating levels `y[i][t]`.
    pub fn operating(&self, inst: &Instance) -> Vec<Vec<i64>> {
        (0..inst.locations)
            .map(|i| {
                let mut level = i64::from(inst.initial_open[i]);
                (0..inst.periods)
                    .map(|t| {
                        if t > 0 {
                            level -= self.zp[i][t - 1];
                        }
                        level += self.z[i][t];
                        level
                    })
                    .collect()
            })
            .collect()
    }

    fn check_shape(&self, inst: &Instance) -> Result<(), ModelError> {
        let bad = |what: &str| Err(ModelError::Shape(what.to_string()));
        if self.z.len() != inst.locations || self.zp.len() != inst.locations {
            return bad("first stage has the wrong number of locations");
        }
        if self.z.iter().any(|r| r.len() != inst.periods) || self.zp.iter().any(|r| r.len() != inst.periods - 1) {
            return bad("first stage has the wrong number of periods");
        }
        Ok(())
    }

    /// Checks boxes, operating-level bounds and period capacities; returns `y`.
    pub fn check(&self, inst: &Instance) -> Result<Vec<Vec<i64>>, ModelError> {
        self.check_shape(inst)?;
        for i in 0..inst.locations {
            let cap = inst.location_cap[i];
            for (var, row) in [("z", &self.z[i]), ("zp", &self.zp[i])] {
                for (t, &value) in row.iter().enumerate() {
                    if value < 0 || value > i64::from(cap) {
                        return Err(ModelError::VariableBound { var, i, t, value, cap });
                    }
                }
            }
        }
        let y = self.operating(inst);
        for (i, row) in y.iter().enumerate() {
            let cap = inst.location_cap[i];
            for (t, &value) in row.iter().enumerate() {
                if value < 0 || value > i64::from(cap) {
                    return Err(ModelError::OperatingLevel { i, t, value, cap });
                }
            }
        }
        for t in 0..inst.periods {
            let total: i64 = y.iter().map(|r| r[t]).sum();
            if total > i64::from(inst.period_cap[t]) {
                return Err(ModelError::PeriodCapacity { t, total, cap: inst.period_cap[t] });
            }
        }
        Ok(y)
    }
}

/// Surplus (`w`) and shortage (`v`) indicators of one cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CellAssignment {
    pub w: Vec<bool>,
    pub v: Vec<bool>,
}

impl CellAssignment {
    pub fn empty(surplus_levels: usize, shortage_levels: usize) -> Self {
        CellAssignment {
            w: vec![false; surplus_levels],
            v: vec![false; shortage_levels],
        }
    }

    /// The canonical assignment: `surplus` leading ones in `w`, `shortage` in `v`.
    pub fn prefix(surplus_levels: usize, shortage_levels: usize, surplus: usize, shortage: usize) -> Self {
        CellAssignment {
            w: (0..surplus_levels).map(|k| k < surplus).collect(),
            v: (0..shortage_levels).map(|k| k < shortage).collect(),
        }
    }

    pub fn surplus(&self) -> usize {
        self.w.iter().filter(|&&x| x).count()
    }

    pub fn shortage(&self) -> usize {
        self.v.iter().filter(|&&x| x).count()
    }

    /// Whether the linking rows `w1 + v1 <= 1`, `wk <= w1`, `vk <= v1` hold.
    pub fn is_linked(&self) -> bool {
        let w1 = self.w.first().copied().unwrap_or(false);
        let v1 = self.v.first().copied().unwrap_or(false);
        !(w1 && v1) && self.w.iter().all(|&x| !x || w1) && self.v.iter().all(|&x| !x || v1)
    }

    /// `sum_k g_k w_k + sum_k h_k v_k`, unweighted by the scenario probability.
    pub fn raw_cost(&self, g: &[f64], h: &[f64]) -> (f64, f64) {
        let surplus = self.w.iter().zip(g).filter(|(x, _)| **x).map(|(_, c)| c).sum();
        let shortage = self.v.iter().zip(h).filter(|(x, _)| **x).map(|(_, c)| c).sum();
        (surplus, shortage)
    }
}

/// Indicators for every cell in [`Instance::cell_index`] order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SecondStageSolution {
    pub cells: Vec<CellAssignment>,
}

impl SecondStageSolution {
    pub fn empty(inst: &Instance) -> Self {
        SecondStageSolution {
            cells: inst
                .cells()
                .map(|(s, t, j)| CellAssignment::empty(inst.surplus_levels(s, t, j), inst.shortage_levels(s, t, j)))
                .collect(),
        }
    }

    pub fn cell(&self, inst: &Instance, s: usize, t: usize, j: usize) -> &CellAssignment {
        &self.cells[inst.cell_index(s, t, j)]
    }
}

/// Objective value with its per-term breakdown; stochastic terms are expectations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Evaluation {
    pub objective: f64,
    pub open: f64,
    pub close: f64,
    pub operate: f64,
    pub surplus: f64,
    pub shortage: f64,
}

/// Coverage counts `sum_i a[s][t][i][j] * y[i][t]` for every cell, flat order.
pub fn coverage_counts(inst: &Instance, y: &[Vec<i64>]) -> Vec<i64> {
    let mut out = vec![0; inst.cell_count()];
    for (s, t, j) in inst.cells() {
        let a = &inst.covers[s][t];
        out[inst.cell_index(s, t, j)] = (0..inst.locations).filter(|&i| a[i][j]).map(|i| y[i][t]).sum();
    }
    out
}

/// Number of operating facilities covering demand point `j` in period `t` under scenario `s`.
pub fn coverage_count(
    inst: &Instance,
    fs: &FirstStageSolution,
    j: usize,
    t: usize,
    s: usize,
) -> Result<i64, ModelError> {
    check_cell(inst, s, t, j)?;
    fs.check_shape(inst)?;
    let y = fs.operating(inst);
    Ok((0..inst.locations).filter(|&i| inst.covers[s][t][i][j]).map(|i| y[i][t]).sum())
}

fn check_cell(inst: &Instance, s: usize, t: usize, j: usize) -> Result<(), ModelError> {
    for (what, index, size) in [
        ("scenario", s, inst.scenarios),
        ("period", t, inst.periods),
        ("demand point", j, inst.demands),
    ] {
        if index >= size {
            return Err(ModelError::IndexOutOfRange { what, index, size });
        }
    }
    Ok(())
}

/// Optimal indicators of one cell once the coverage margin `M = coverage - b`
/// is fixed: `M` leading shortage levels when negative, `M` leading surplus
/// levels when positive. Sorted marginal costs make the prefix optimal.
/// Returns the cell and its probability-weighted cost.
pub fn second_stage_closed_form(
    inst: &Instance,
    margin: i64,
    j: usize,
    t: usize,
    s: usize,
) -> Result<(CellAssignment, f64), ModelError> {
    check_cell(inst, s, t, j)?;
    let g = &inst.surplus_cost[s][t][j];
    let h = &inst.shortage_cost[s][t][j];
    let (lo, hi) = (-(h.len() as i64), g.len() as i64);
    if margin < lo || margin > hi {
        return Err(ModelError::MarginOutOfRange { s, t, j, margin, lo, hi });
    }
    Ok(closed_form_cell(g, h, inst.prob[s], margin))
}

pub(crate) fn closed_form_cell(g: &[f64], h: &[f64], prob: f64, margin: i64) -> (CellAssignment, f64) {
    if margin >= 0 {
        let k = margin as usize;
        let cost = g[..k].iter().map(|&c| prob * c).sum();
        (CellAssignment::prefix(g.len(), h.len(), k, 0), cost)
    } else {
        let k = (-margin) as usize;
        let cost = h[..k].iter().map(|&c| prob * c).sum();
        (CellAssignment::prefix(g.len(), h.len(), 0, k), cost)
    }
}

/// Probability-weighted closed-form cost of one cell (no assignment built).
#[inline]
pub(crate) fn closed_form_cost(g: &[f64], h: &[f64], prob: f64, margin: i64) -> f64 {
    if margin >= 0 {
        g[..margin as usize].iter().map(|&c| prob * c).sum()
    } else {
        h[..(-margin) as usize].iter().map(|&c| prob * c).sum()
    }
}

fn first_stage_terms(inst: &Instance, fs: &FirstStageSolution, y: &[Vec<i64>]) -> (f64, f64, f64) {
    let (mut open, mut close, mut operate) = (0.0, 0.0, 0.0);
    for i in 0..inst.locations {
        for t in 0..inst.periods {
            open += inst.open_cost[i][t] * fs.z[i][t] as f64;
            operate += inst.operate_cost[i][t] * y[i][t] as f64;
            if t + 1 < inst.periods {
                close += inst.close_cost[i][t] * fs.zp[i][t] as f64;
            }
        }
    }
    (open, close, operate)
}

/// Objective of a complete solution, after checking every constraint.
pub fn evaluate(inst: &Instance, fs: &FirstStageSolution, ss: &SecondStageSolution) -> Result<Evaluation, ModelError> {
    let y = fs.check(inst)?;
    if ss.cells.len() != inst.cell_count() {
        return Err(ModelError::Shape(format!(
            "second stage has {} cells, expected {}",
            ss.cells.len(),
            inst.cell_count()
        )));
    }
    let cover = coverage_counts(inst, &y);
    let (open, close, operate) = first_stage_terms(inst, fs, &y);
    let (mut surplus, mut shortage) = (0.0, 0.0);
    for (s, t, j) in inst.cells() {
        let idx = inst.cell_index(s, t, j);
        let cell = &ss.cells[idx];
        let g = &inst.surplus_cost[s][t][j];
        let h = &inst.shortage_cost[s][t][j];
        if cell.w.len() != g.len() || cell.v.len() != h.len() {
            return Err(ModelError::Linking {
                s,
                t,
                j,
                message: format!(
                    "indicator lengths ({}, {}) differ from levels ({}, {})",
                    cell.w.len(),
                    cell.v.len(),
                    g.len(),
                    h.len()
                ),
            });
        }
        if !cell.is_linked() {
            return Err(ModelError::Linking {
                s,
                t,
                j,
                message: "surplus and shortage indicators violate the linking rows".into(),
            });
        }
        let b = inst.threshold[s][t][j];
        if cover[idx] - i64::from(b) != cell.surplus() as i64 - cell.shortage() as i64 {
            return Err(ModelError::Covering {
                s,
                t,
                j,
                coverage: cover[idx],
                threshold: b,
                surplus: cell.surplus(),
                shortage: cell.shortage(),
            });
        }
        let (gs, hs) = cell.raw_cost(g, h);
        surplus += inst.prob[s] * gs;
        shortage += inst.prob[s] * hs;
    }
    Ok(Evaluation {
        objective: open + close + operate + surplus + shortage,
        open,
        close,
        operate,
        surplus,
        shortage,
    })
}

/// Objective through the cumulative-coefficient expression of the
/// `y`-eliminated formulation. No feasibility checks.
pub fn objective_cumulative(inst: &Instance, fs: &FirstStageSolution, ss: &SecondStageSolution) -> f64 {
    let (open_coef, close_coef, constant) = cumulative_costs(inst);
    let mut total = constant;
    for i in 0..inst.locations {
        for t in 0..inst.periods {
            total += open_coef[i][t] * fs.z[i][t] as f64;
            if t + 1 < inst.periods {
                total += close_coef[i][t] * fs.zp[i][t] as f64;
            }
        }
    }
    for (s, t, j) in inst.cells() {
        let cell = &ss.cells[inst.cell_index(s, t, j)];
        let (gs, hs) = cell.raw_cost(&inst.surplus_cost[s][t][j], &inst.shortage_cost[s][t][j]);
        total += inst.prob[s] * (gs + hs);
    }
    total
}

/// First-stage coefficients after eliminating `y`:
/// `o[i][t] + sum_{tau >= t} f[i][tau]` for opens,
/// `c[i][t] - sum_{tau > t} f[i][tau]` for closes, and `sum f * y0`.
pub fn cumulative_costs(inst: &Instance) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, f64) {
    let tt = inst.periods;
    let mut open = vec![vec![0.0; tt]; inst.locations];
    let mut close = vec![vec![0.0; tt - 1]; inst.locations];
    let mut constant = 0.0;
    for i in 0..inst.locations {
        let f = &inst.operate_cost[i];
        let mut tail = 0.0; // sum_{tau > t} f
        for t in (0..tt).rev() {
            if t + 1 < tt {
                close[i][t] = inst.close_cost[i][t] - tail;
            }
            tail += f[t];
            open[i][t] = inst.open_cost[i][t] + tail;
        }
        constant += f.iter().sum::<f64>() * f64::from(inst.initial_open[i]);
    }
    (open, close, constant)
}

/// Optimal second stage for a fixed first stage, with its total objective.
pub fn evaluate_first_stage(
    inst: &Instance,
    fs: &FirstStageSolution,
) -> Result<(f64, SecondStageSolution), ModelError> {
    let y = fs.check(inst)?;
    let cover = coverage_counts(inst, &y);
    let (open, close, operate) = first_stage_terms(inst, fs, &y);
    let mut value = open + close + operate;
    let mut cells = Vec::with_capacity(inst.cell_count());
    for (s, t, j) in inst.cells() {
        let margin = cover[inst.cell_index(s, t, j)] - i64::from(inst.threshold[s][t][j]);
        let (cell, cost) = second_stage_closed_form(inst, margin, j, t, s)?;
        value += cost;
        cells.push(cell);
    }
    Ok((value, SecondStageSolution { cells }))
}

// ---------------------------------------------------------------------------
// Formulations
// ---------------------------------------------------------------------------

/// Rows tying surplus and shortage indicators together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Linking {
    /// `w1 + v1 <= 1`, `wk <= w1`, `vk <= v1`.
    Ww,
    /// `sum_k wk <= (1 - v1)(p - b)`, `vk <= v1`.
    Opt2,
    /// `sum_k vk <= (1 - w1) b`, `wk <= w1`.
    Opt3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    /// Explicit operating levels `y` with flow-balance rows.
    Operating,
    /// `y` eliminated through cumulative sums of opens and closes.
    Cumulative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelVariant {
    pub linking: Linking,
    pub formulation: Formulation,
}

impl Default for ModelVariant {
    fn default() -> Self {
        ModelVariant {
            linking: Linking::Ww,
            formulation: Formulation::Cumulative,
        }
    }
}

/// A mixed-integer model: the LP data plus names and integrality flags.
#[derive(Debug, Clone)]
pub struct MilpModel {
    pub lp: LinearProgram,
    pub col_names: Vec<String>,
    pub row_names: Vec<String>,
    pub integer: Vec<bool>,
    /// Column of `z[i][t]`.
    pub z_cols: Vec<Vec<usize>>,
    /// Column of `zp[i][t]`.
    pub zp_cols: Vec<Vec<usize>>,
    /// Column of `y[i][t]` for [`Formulation::Operating`].
    pub y_cols: Option<Vec<Vec<usize>>>,
    /// Columns of `w` and `v` per cell, flat cell order.
    pub w_cols: Vec<Vec<usize>>,
    pub v_cols: Vec<Vec<usize>>,
    /// Covering-row index per cell, flat cell order.
    pub cov_rows: Vec<usize>,
}

struct Builder {
    lp: LinearProgram,
    col_names: Vec<String>,
    row_names: Vec<String>,
}

impl Builder {
    fn var(&mut self, name: String, cost: f64, hi: f64) -> usize {
        self.col_names.push(name);
        self.lp.add_var(cost, 0.0, hi)
    }

    fn row(&mut self, name: String, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Option<usize> {
        if coeffs.iter().all(|&(_, a)| a == 0.0) {
            return None;
        }
        self.row_names.push(name);
        Some(self.lp.add_row(coeffs, sense, rhs))
    }
}

/// Builds the full model for `variant`. With `drop_shortage_cost` the
/// shortage terms leave the objective (variables and rows stay).
pub fn build_milp(inst: &Instance, variant: ModelVariant, drop_shortage_cost: bool) -> MilpModel {
    let (m, tt) = (inst.locations, inst.periods);
    let mut b = Builder {
        lp: LinearProgram::new(),
        col_names: Vec::new(),
        row_names: Vec::new(),
    };
    let cumulative = variant.formulation == Formulation::Cumulative;
    let (open_coef, close_coef, constant) = cumulative_costs(inst);

    let mut z_cols = vec![Vec::with_capacity(tt); m];
    let mut zp_cols = vec![Vec::with_capacity(tt.saturating_sub(1)); m];
    for i in 0..m {
        let cap = f64::from(inst.location_cap[i]);
        for t in 0..tt {
            let cost = if cumulative { open_coef[i][t] } else { inst.open_cost[i][t] };
            z_cols[i].push(b.var(format!("z_{}_{}", i + 1, t + 1), cost, cap));
        }
    }
    for i in 0..m {
        let cap = f64::from(inst.location_cap[i]);
        for t in 0..tt - 1 {
            let cost = if cumulative { close_coef[i][t] } else { inst.close_cost[i][t] };
            zp_cols[i].push(b.var(format!("zp_{}_{}", i + 1, t + 1), cost, cap));
        }
    }
    let y_cols = (!cumulative).then(|| {
        (0..m)
            .map(|i| {
                (0..tt)
                    .map(|t| {
                        b.var(
                            format!("y_{}_{}", i + 1, t + 1),
                            inst.operate_cost[i][t],
                            f64::from(inst.location_cap[i]),
                        )
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    });
    if cumulative {
        b.lp.objective_offset = constant;
    }

    let mut w_cols = Vec::with_capacity(inst.cell_count());
    let mut v_cols = Vec::with_capacity(inst.cell_count());
    for (s, t, j) in inst.cells() {
        let tag = format!("{}_{}_{}", s + 1, t + 1, j + 1);
        let pi = inst.prob[s];
        w_cols.push(
            inst.surplus_cost[s][t][j]
                .iter()
                .enumerate()
                .map(|(k, &g)| b.var(format!("w_{tag}_{}", k + 1), pi * g, 1.0))
                .collect::<Vec<_>>(),
        );
        v_cols.push(
            inst.shortage_cost[s][t][j]
                .iter()
                .enumerate()
                .map(|(k, &h)| {
                    let cost = if drop_shortage_cost { 0.0 } else { pi * h };
                    b.var(format!("v_{tag}_{}", k + 1), cost, 1.0)
                })
                .collect::<Vec<_>>(),
        );
    }

    // Operating level of (i, t) as a linear expression.
    let level = |i: usize, t: usize| -> Vec<(usize, f64)> {
        match &y_cols {
            Some(y) => vec![(y[i][t], 1.0)],
            None => {
                let mut e: Vec<(usize, f64)> = (0..=t).map(|tau| (z_cols[i][tau], 1.0)).collect();
                e.extend((0..t).map(|tau| (zp_cols[i][tau], -1.0)));
                e
            }
        }
    };
    let y0 = |i: usize| f64::from(inst.initial_open[i]);
    let y0_total = inst.total_initial_open() as f64;

    for t in 0..tt {
        let coeffs: Vec<_> = (0..m).flat_map(|i| level(i, t)).collect();
        if cumulative {
            b.row(format!("ptrest_{}", t + 1), coeffs, Sense::Le, f64::from(inst.period_cap[t]) - y0_total);
        } else {
            b.row(format!("sumy_{}", t + 1), coeffs, Sense::Le, f64::from(inst.period_cap[t]));
        }
    }
    if let Some(y) = &y_cols {
        for i in 0..m {
            b.row(format!("yz_{}", i + 1), vec![(y[i][0], 1.0), (z_cols[i][0], -1.0)], Sense::Eq, y0(i));
            for t in 1..tt {
                b.row(
                    format!("yz2_{}_{}", i + 1, t + 1),
                    vec![(y[i][t], 1.0), (y[i][t - 1], -1.0), (z_cols[i][t], -1.0), (zp_cols[i][t - 1], 1.0)],
                    Sense::Eq,
                    0.0,
                );
            }
        }
    }

    let mut cov_rows = Vec::with_capacity(inst.cell_count());
    for (s, t, j) in inst.cells() {
        let idx = inst.cell_index(s, t, j);
        let mut coeffs = Vec::new();
        let mut rhs = f64::from(inst.threshold[s][t][j]);
        for i in 0..m {
            if inst.covers[s][t][i][j] {
                coeffs.extend(level(i, t));
                if cumulative {
                    rhs -= y0(i);
                }
            }
        }
        coeffs.extend(w_cols[idx].iter().map(|&c| (c, -1.0)));
        coeffs.extend(v_cols[idx].iter().map(|&c| (c, 1.0)));
        let coeffs = merge_coeffs(coeffs);
        // An empty covering row is kept so every cell owns a row.
        b.row_names.push(format!("cov_{}_{}_{}", s + 1, t + 1, j + 1));
        cov_rows.push(b.lp.add_row(coeffs, Sense::Eq, rhs));
    }

    if cumulative {
        for i in 0..m {
            for t in 0..tt {
                b.row(format!("ytub_{}_{}", i + 1, t + 1), level(i, t), Sense::Le, f64::from(inst.location_cap[i]) - y0(i));
            }
        }
        for i in 0..m {
            for t in 0..tt {
                b.row(format!("ytlb_{}_{}", i + 1, t + 1), level(i, t), Sense::Ge, -y0(i));
            }
        }
    }

    for (s, t, j) in inst.cells() {
        let idx = inst.cell_index(s, t, j);
        let tag = format!("{}_{}_{}", s + 1, t + 1, j + 1);
        let (w, v) = (&w_cols[idx], &v_cols[idx]);
        let chain = |b: &mut Builder, prefix: &str, cols: &[usize]| {
            for k in 1..cols.len() {
                b.row(format!("{prefix}_{tag}_{}", k + 1), vec![(cols[k], 1.0), (cols[0], -1.0)], Sense::Le, 0.0);
            }
        };
        match variant.linking {
            Linking::Ww => {
                if let (Some(&w1), Some(&v1)) = (w.first(), v.first()) {
                    b.row(format!("ww1_{tag}"), vec![(w1, 1.0), (v1, 1.0)], Sense::Le, 1.0);
                }
                chain(&mut b, "ww2", w);
                chain(&mut b, "ww3", v);
            }
            Linking::Opt2 => {
                let width = w.len() as f64;
                let mut coeffs: Vec<_> = w.iter().map(|&c| (c, 1.0)).collect();
                if let Some(&v1) = v.first() {
                    coeffs.push((v1, width));
                }
                if !w.is_empty() {
                    b.row(format!("opt21_{tag}"), coeffs, Sense::Le, width);
                }
                chain(&mut b, "opt22", v);
            }
            Linking::Opt3 => {
                let depth = v.len() as f64;
                let mut coeffs: Vec<_> = v.iter().map(|&c| (c, 1.0)).collect();
                if let Some(&w1) = w.first() {
                    coeffs.push((w1, depth));
                }
                if !v.is_empty() {
                    b.row(format!("opt31_{tag}"), coeffs, Sense::Le, depth);
                }
                chain(&mut b, "opt32", w);
            }
        }
    }

    let integer = vec![true; b.lp.num_vars()];
    MilpModel {
        lp: b.lp,
        col_names: b.col_names,
        row_names: b.row_names,
        integer,
        z_cols,
        zp_cols,
        y_cols,
        w_cols,
        v_cols,
        cov_rows,
    }
}

fn merge_coeffs(mut coeffs: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    coeffs.sort_by_key(|&(c, _)| c);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
    for (c, a) in coeffs {
        match out.last_mut() {
            Some((lc, la)) if *lc == c => *la += a,
            _ => out.push((c, a)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}

/// LP relaxation of the chosen variant (all integrality dropped).
pub fn build_lp_relaxation(inst: &Instance, variant: ModelVariant) -> LinearProgram {
    build_milp(inst, variant, false).lp
}

/// LP relaxation of the `y`-eliminated model without the shortage cost; its
/// optimum is the lower bound used as the anchor of every percentage gap.
pub fn build_lb0(inst: &Instance) -> LinearProgram {
    build_milp(inst, ModelVariant::default(), true).lp
}

fn solve_value(lp: &LinearProgram) -> Result<f64, ModelError> {
    let sol = lp::solve_lp(lp, LP_ITERATION_CAP)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        other => Err(ModelError::LpStatus(other)),
    }
}

/// Optimal value of the LP relaxation.
pub fn lp_relaxation_value(inst: &Instance, variant: ModelVariant) -> Result<f64, ModelError> {
    solve_value(&build_lp_relaxation(inst, variant))
}

/// The shortage-free LP bound `LB0`.
pub fn lb0_value(inst: &Instance) -> Result<f64, ModelError> {
    solve_value(&build_lb0(inst))
}

/// A percentage gap; `degenerate` marks a vanishing denominator (reported as 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub percent: f64,
    pub degenerate: bool,
}

/// Denominators below this are treated as zero.
pub const GAP_DENOMINATOR_EPS: f64 = 1e-12;

pub(crate) fn ratio_gap(numerator: f64, denominator: f64) -> Gap {
    if denominator.abs() < GAP_DENOMINATOR_EPS {
        Gap {
            percent: 0.0,
            degenerate: true,
        }
    } else {
        Gap {
            percent: numerator / denominator * 100.0,
            degenerate: false,
        }
    }
}

/// `(OPT - LP) / (OPT - LB0) * 100`.
pub fn lp_gap(opt: f64, lp: f64, lb0: f64) -> Gap {
    ratio_gap(opt - lp, opt - lb0)
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

fn num(x: f64) -> String {
    // Avoid "-0".
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

/// Column-major view: for each column, `(row, coefficient)` in row order.
fn columns(model: &MilpModel) -> Vec<Vec<(usize, f64)>> {
    let mut cols = vec![Vec::new(); model.lp.num_vars()];
    for (r, row) in model.lp.rows.iter().enumerate() {
        for &(c, a) in &row.coeffs {
            cols[c].push((r, a));
        }
    }
    cols
}

/// Fixed-column MPS text. Names longer than eight characters widen their
/// field, so whitespace-delimited readers parse the file unchanged.
pub fn to_mps(model: &MilpModel, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {name}");
    let _ = writeln!(out, "ROWS");
    let _ = writeln!(out, " N  COST");
    for (row, rname) in model.lp.rows.iter().zip(&model.row_names) {
        let tag = match row.sense {
            Sense::Le => "L",
            Sense::Eq => "E",
            Sense::Ge => "G",
        };
        let _ = writeln!(out, " {tag}  {rname}");
    }
    let _ = writeln!(out, "COLUMNS");
    let cols = columns(model);
    let mut in_int = false;
    for (c, entries) in cols.iter().enumerate() {
        if model.integer[c] && !in_int {
            let _ = writeln!(out, "    MARKER                 'MARKER'                 'INTORG'");
            in_int = true;
        } else if !model.integer[c] && in_int {
            let _ = writeln!(out, "    MARKER                 'MARKER'                 'INTEND'");
            in_int = false;
        }
        let cname = &model.col_names[c];
        let cost = model.lp.objective[c];
        if cost != 0.0 || entries.is_empty() {
            let _ = writeln!(out, "    {cname:<8}  {:<8}  {:>12}", "COST", num(cost));
        }
        for &(r, a) in entries {
            let _ = writeln!(out, "    {cname:<8}  {:<8}  {:>12}", model.row_names[r], num(a));
        }
    }
    if in_int {
        let _ = writeln!(out, "    MARKER                 'MARKER'                 'INTEND'");
    }
    let _ = writeln!(out, "RHS");
    if model.lp.objective_offset != 0.0 {
        let _ = writeln!(out, "* objective constant {} (stored negated on COST)", num(model.lp.objective_offset));
        let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", "RHS", "COST", num(-model.lp.objective_offset));
    }
    for (row, rname) in model.lp.rows.iter().zip(&model.row_names) {
        if row.rhs != 0.0 {
            let _ = writeln!(out, "    {:<8}  {rname:<8}  {:>12}", "RHS", num(row.rhs));
        }
    }
    let _ = writeln!(out, "BOUNDS");
    for c in 0..model.lp.num_vars() {
        let cname = &model.col_names[c];
        if model.lp.lower[c] != 0.0 {
            let _ = writeln!(out, " LO {:<8}  {cname:<8}  {:>12}", "BND", num(model.lp.lower[c]));
        }
        let _ = writeln!(out, " UP {:<8}  {cname:<8}  {:>12}", "BND", num(model.lp.upper[c]));
    }
    let _ = writeln!(out, "ENDATA");
    out
}

fn push_terms(out: &mut String, terms: &[(String, f64)]) {
    let mut line_len = 0;
    for (k, (name, a)) in terms.iter().enumerate() {
        let sign = if *a < 0.0 { "-" } else { "+" };
        let mag = num(a.abs());
        let piece = if k == 0 && *a >= 0.0 {
            format!(" {mag} {name}")
        } else {
            format!(" {sign} {mag} {name}")
        };
        if line_len + piece.len() > 200 {
            out.push_str("\n  ");
            line_len = 0;
        }
        line_len += piece.len();
        out.push_str(&piece);
    }
}

/// CPLEX LP format text.
pub fn to_lp_format(model: &MilpModel, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ {name}");
    let _ = writeln!(out, "Minimize");
    out.push_str(" COST:");
    let terms: Vec<(String, f64)> = model
        .lp
        .objective
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(c, &a)| (model.col_names[c].clone(), a))
        .collect();
    push_terms(&mut out, &terms);
    let offset = model.lp.objective_offset;
    if offset != 0.0 {
        let _ = write!(out, " {} {}", if offset < 0.0 { "-" } else { "+" }, num(offset.abs()));
    } else if terms.is_empty() {
        out.push_str(" 0");
    }
    out.push('\n');
    let _ = writeln!(out, "Subject To");
    for (row, rname) in model.lp.rows.iter().zip(&model.row_names) {
        let _ = write!(out, " {rname}:");
        let terms: Vec<(String, f64)> = row.coeffs.iter().map(|&(c, a)| (model.col_names[c].clone(), a)).collect();
        if terms.is_empty() {
            // Keep the row so names line up with the MPS export.
            out.push_str(" 0 z_1_1");
        } else {
            push_terms(&mut out, &terms);
        }
        let _ = writeln!(out, " {} {}", row.sense, num(row.rhs));
    }
    let _ = writeln!(out, "Bounds");
    for c in 0..model.lp.num_vars() {
        let _ = writeln!(out, " {} <= {} <= {}", num(model.lp.lower[c]), model.col_names[c], num(model.lp.upper[c]));
    }
    let ints: Vec<&str> = (0..model.lp.num_vars())
        .filter(|&c| model.integer[c])
        .map(|c| model.col_names[c].as_str())
        .collect();
    if !ints.is_empty() {
        let _ = writeln!(out, "Generals");
        for chunk in ints.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    let _ = writeln!(out, "End");
    out
}

pub fn export_mps(inst: &Instance, variant: ModelVariant, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, to_mps(&build_milp(inst, variant, false), "COVLOC"))?;
    Ok(())
}

pub fn export_lp(inst: &Instance, variant: ModelVariant, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, to_lp_format(&build_milp(inst, variant, false), "COVLOC"))?;
    Ok(())
}
