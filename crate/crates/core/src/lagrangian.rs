//! Lagrangian relaxation of the covering rows and the subgradient heuristic.
//!
//! Dualizing the covering equalities with multipliers `alpha[s][t][j]`
//! splits the model into a first-stage LP over `(z, zp)` (LR1, integral
//! vertices) and one tiny problem per cell over `(w, v)` (LR2, solved in
//! closed form). Each LR1 plan is completed into a feasible solution, which
//! gives the upper bound.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::lp::{self, LinearProgram, LpError, LpStatus, Sense};
use crate::model::{
    self, ratio_gap, CellAssignment, FirstStageSolution, Gap, ModelError, SecondStageSolution,
};

/// Largest fractional part tolerated in an LR1 vertex before rounding.
pub const INTEGRALITY_TOL: f64 = 1e-7;
/// Iteration cap of the epsilon-floor stop rule.
pub const EPS_FLOOR_ITERATION_CAP: usize = 5000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LagrangianError {
    #[error("multiplier dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("LR1 solve failed: {0}")]
    Lp(#[from] LpError),
    #[error("LR1 ended with status {0:?}")]
    LpStatus(LpStatus),
    #[error("LR1 vertex is fractional (max fractional part {max_fractional:e})")]
    Integrality { max_fractional: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid heuristic config: {0}")]
    Config(String),
}

/// One multiplier per covering row, in [`Instance::cell_index`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub alpha: Vec<f64>,
}

impl Multipliers {
    pub fn zeros(inst: &Instance) -> Self {
        Multipliers {
            alpha: vec![0.0; inst.cell_count()],
        }
    }

    /// From the nested `[s][t][j]` layout.
    pub fn from_nested(inst: &Instance, nested: &[Vec<Vec<f64>>]) -> Result<Self, LagrangianError> {
        let alpha: Vec<f64> = nested.iter().flatten().flatten().copied().collect();
        let m = Multipliers { alpha };
        m.check(inst)?;
        Ok(m)
    }

    pub fn get(&self, inst: &Instance, s: usize, t: usize, j: usize) -> f64 {
        self.alpha[inst.cell_index(s, t, j)]
    }

    pub fn check(&self, inst: &Instance) -> Result<(), LagrangianError> {
        if self.alpha.len() != inst.cell_count() {
            return Err(LagrangianError::Dimension {
                expected: inst.cell_count(),
                found: self.alpha.len(),
            });
        }
        Ok(())
    }
}

/// LR1 objective over `(z, zp)` plus its constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Lr1Costs {
    pub open: Vec<Vec<f64>>,
    pub close: Vec<Vec<f64>>,
    pub constant: f64,
}

/// `phi[i][t] = f[i][t] + sum_{s,j} alpha * a` folded into cumulative
/// open/close coefficients.
pub fn lr1_costs(inst: &Instance, alpha: &Multipliers) -> Result<Lr1Costs, LagrangianError> {
    alpha.check(inst)?;
    let (m, tt) = (inst.locations, inst.periods);
    let mut phi = inst.operate_cost.clone();
    for (s, t, j) in inst.cells() {
        let a = alpha.get(inst, s, t, j);
        if a == 0.0 {
            continue;
        }
        for (i, row) in phi.iter_mut().enumerate() {
            if inst.covers[s][t][i][j] {
                row[t] += a;
            }
        }
    }
    let mut open = vec![vec![0.0; tt]; m];
    let mut close = vec![vec![0.0; tt - 1]; m];
    let mut constant = 0.0;
    for i in 0..m {
        let mut tail = 0.0;
        for t in (0..tt).rev() {
            if t + 1 < tt {
                close[i][t] = inst.close_cost[i][t] - tail;
            }
            tail += phi[i][t];
            open[i][t] = inst.open_cost[i][t] + tail;
        }
        constant += tail * f64::from(inst.initial_open[i]);
    }
    Ok(Lr1Costs { open, close, constant })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lr1Solution {
    pub first_stage: FirstStageSolution,
    pub value: f64,
    /// Largest distance of an LP coordinate to the nearest integer.
    pub max_fractional: f64,
}

/// The LR1 linear program: capacity rows and operating-level bounds written
/// over cumulative opens and closes, boxes `0 <= z, zp <= e`.
pub fn lr1_program(inst: &Instance, costs: &Lr1Costs) -> LinearProgram {
    let (m, tt) = (inst.locations, inst.periods);
    let mut lp = LinearProgram::new();
    let z: Vec<Vec<usize>> = (0..m)
        .map(|i| (0..tt).map(|t| lp.add_var(costs.open[i][t], 0.0, f64::from(inst.location_cap[i]))).collect())
        .collect();
    let zp: Vec<Vec<usize>> = (0..m)
        .map(|i| (0..tt - 1).map(|t| lp.add_var(costs.close[i][t], 0.0, f64::from(inst.location_cap[i]))).collect())
        .collect();
    lp.objective_offset = costs.constant;
    let level = |i: usize, t: usize| -> Vec<(usize, f64)> {
        (0..=t).map(|tau| (z[i][tau], 1.0)).chain((0..t).map(|tau| (zp[i][tau], -1.0))).collect()
    };
    let y0_total = inst.total_initial_open() as f64;
    for t in 0..tt {
        let coeffs = (0..m).flat_map(|i| level(i, t)).collect();
        lp.add_row(coeffs, Sense::Le, f64::from(inst.period_cap[t]) - y0_total);
    }
    for i in 0..m {
        let y0 = f64::from(inst.initial_open[i]);
        for t in 0..tt {
            lp.add_row(level(i, t), Sense::Le, f64::from(inst.location_cap[i]) - y0);
            lp.add_row(level(i, t), Sense::Ge, -y0);
        }
    }
    lp
}

/// Solves LR1 by simplex, checks the vertex is integral and rounds it.
pub fn solve_lr1(inst: &Instance, alpha: &Multipliers, iter_cap: usize) -> Result<Lr1Solution, LagrangianError> {
    let costs = lr1_costs(inst, alpha)?;
    let lp = lr1_program(inst, &costs);
    let sol = lp::solve_lp(&lp, iter_cap)?;
    if sol.status != LpStatus::Optimal {
        return Err(LagrangianError::LpStatus(sol.status));
    }
    let max_fractional = sol.x.iter().map(|x| (x - x.round()).abs()).fold(0.0, f64::max);
    if max_fractional > INTEGRALITY_TOL {
        return Err(LagrangianError::Integrality { max_fractional });
    }
    let (m, tt) = (inst.locations, inst.periods);
    let mut fs = FirstStageSolution::zeros(inst);
    let mut value = costs.constant;
    for i in 0..m {
        for t in 0..tt {
            fs.z[i][t] = sol.x[i * tt + t].round() as i64;
            value += costs.open[i][t] * fs.z[i][t] as f64;
        }
        for t in 0..tt - 1 {
            fs.zp[i][t] = sol.x[m * tt + i * (tt - 1) + t].round() as i64;
            value += costs.close[i][t] * fs.zp[i][t] as f64;
        }
    }
    Ok(Lr1Solution {
        first_stage: fs,
        value,
        max_fractional,
    })
}

/// LR2 for one cell: minimizes `sum (pi g_k - alpha) w_k + sum (pi h_k + alpha) v_k - alpha b`
/// under the linking rows. Returns the indicators and the value.
pub fn lr2_cell(g: &[f64], h: &[f64], prob: f64, alpha: f64, threshold: u32) -> (CellAssignment, f64) {
    let ratio = alpha / prob;
    let ell = match g.last() {
        Some(&last) if ratio >= last => g.len(),
        _ => g.iter().take_while(|&&gk| gk < ratio).count(),
    };
    let ell_p = match h.last() {
        Some(&last) if -ratio >= last => h.len(),
        _ => h.iter().take_while(|&&hk| hk < -ratio).count(),
    };
    let w_sum: f64 = g[..ell].iter().map(|&gk| prob * gk - alpha).sum();
    let v_sum: f64 = h[..ell_p].iter().map(|&hk| prob * hk + alpha).sum();
    let (cell, part) = if w_sum <= v_sum.min(0.0) {
        (CellAssignment::prefix(g.len(), h.len(), ell, 0), w_sum)
    } else if w_sum.min(0.0) > v_sum {
        (CellAssignment::prefix(g.len(), h.len(), 0, ell_p), v_sum)
    } else {
        (CellAssignment::empty(g.len(), h.len()), 0.0)
    };
    (cell, part - alpha * f64::from(threshold))
}

pub fn solve_lr2_cell(
    inst: &Instance,
    alpha: &Multipliers,
    j: usize,
    t: usize,
    s: usize,
) -> Result<(CellAssignment, f64), LagrangianError> {
    alpha.check(inst)?;
    Ok(lr2_cell(
        &inst.surplus_cost[s][t][j],
        &inst.shortage_cost[s][t][j],
        inst.prob[s],
        alpha.get(inst, s, t, j),
        inst.threshold[s][t][j],
    ))
}

/// Lagrangian bound at `alpha` with the subproblem solutions behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianPoint {
    pub value: f64,
    pub lr1: Lr1Solution,
    pub lr2: SecondStageSolution,
    pub lr2_value: f64,
}

pub fn lagrangian_value(inst: &Instance, alpha: &Multipliers, iter_cap: usize) -> Result<LagrangianPoint, LagrangianError> {
    let lr1 = solve_lr1(inst, alpha, iter_cap)?;
    let mut cells = Vec::with_capacity(inst.cell_count());
    let mut lr2_value = 0.0;
    for (s, t, j) in inst.cells() {
        let (cell, v) = solve_lr2_cell(inst, alpha, j, t, s)?;
        lr2_value += v;
        cells.push(cell);
    }
    Ok(LagrangianPoint {
        value: lr1.value + lr2_value,
        lr1,
        lr2: SecondStageSolution { cells },
        lr2_value,
    })
}

/// Feasible completion of a first-stage plan and its objective.
pub fn upper_bound_from(inst: &Instance, fs: &FirstStageSolution) -> Result<(f64, SecondStageSolution), LagrangianError> {
    Ok(model::evaluate_first_stage(inst, fs)?)
}

/// Subgradient `coverage - b - sum w + sum v` per cell.
pub fn compute_gamma(inst: &Instance, fs: &FirstStageSolution, lr2: &SecondStageSolution) -> Result<Vec<f64>, LagrangianError> {
    if lr2.cells.len() != inst.cell_count() {
        return Err(LagrangianError::Dimension {
            expected: inst.cell_count(),
            found: lr2.cells.len(),
        });
    }
    if fs.z.len() != inst.locations || fs.z.iter().any(|r| r.len() != inst.periods) {
        return Err(ModelError::Shape("first stage does not match the instance".into()).into());
    }
    let y = fs.operating(inst);
    let cover = model::coverage_counts(inst, &y);
    Ok(inst
        .cells()
        .map(|(s, t, j)| {
            let idx = inst.cell_index(s, t, j);
            let cell = &lr2.cells[idx];
            (cover[idx] - i64::from(inst.threshold[s][t][j]) - cell.surplus() as i64 + cell.shortage() as i64) as f64
        })
        .collect())
}

/// `alpha + eps (ub - lb) / |gamma|^2 * gamma`. A zero subgradient leaves
/// `alpha` unchanged and sets the flag.
pub fn subgradient_step(alpha: &Multipliers, ub: f64, lb: f64, gamma: &[f64], eps: f64) -> (Multipliers, bool) {
    let norm2: f64 = gamma.iter().map(|g| g * g).sum();
    if norm2 == 0.0 {
        return (alpha.clone(), true);
    }
    let step = eps * (ub - lb) / norm2;
    let next = alpha.alpha.iter().zip(gamma).map(|(a, g)| a + step * g).collect();
    (Multipliers { alpha: next }, false)
}

/// `(UB - LB) / (UB - LB0) * 100`.
pub fn gap_lb_ub(ub: f64, lb: f64, lb0: f64) -> Gap {
    ratio_gap(ub - lb, ub - lb0)
}

/// `(UB - OPT) / (UB - LB0) * 100`.
pub fn gap_ub_opt(ub: f64, opt: f64, lb0: f64) -> Gap {
    ratio_gap(ub - opt, ub - lb0)
}

/// `(LP - LB) / (LP - LB0) * 100`.
pub fn gap_lp_lb(lp: f64, lb: f64, lb0: f64) -> Gap {
    ratio_gap(lp - lb, lp - lb0)
}

/// Relative gap used by the early stop, `(UB - LB) / |UB| * 100`.
pub fn relative_gap_reached(ub: f64, lb: f64, pct: f64) -> bool {
    if ub.abs() < 1e-12 {
        ub - lb <= 1e-12
    } else {
        (ub - lb) / ub.abs() * 100.0 <= pct
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// Stop after this many iterations.
    Iterations(usize),
    /// Stop once the step factor drops below this value
    /// (at most [`EPS_FLOOR_ITERATION_CAP`] iterations).
    EpsFloor(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicConfig {
    pub eps0: f64,
    /// Halve the step factor after this many iterations without a strictly
    /// better lower bound.
    pub halve_after: usize,
    pub stop_rule: StopRule,
    /// Early stop once `(UB - LB) / |UB| * 100` falls to this value.
    pub gap_stop_pct: f64,
    pub lr1_iter_cap: usize,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Variant::F1Iii.config()
    }
}

impl HeuristicConfig {
    pub fn check(&self) -> Result<(), LagrangianError> {
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return Err(LagrangianError::Config(format!("eps0 must be positive, got {}", self.eps0)));
        }
        if self.halve_after == 0 {
            return Err(LagrangianError::Config("halve_after must be at least 1".into()));
        }
        match self.stop_rule {
            StopRule::EpsFloor(f) if !(f > 0.0) => {
                Err(LagrangianError::Config(format!("eps floor must be positive, got {f}")))
            }
            _ => Ok(()),
        }
    }
}

/// The eight heuristic settings: family 1 halves after 10 stalled
/// iterations, family 2 after 5; stop rules i-iv are 50, 150 and 500
/// iterations and an epsilon floor of 0.005.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "1.i")]
    F1I,
    #[serde(rename = "1.ii")]
    F1Ii,
    #[serde(rename = "1.iii")]
    F1Iii,
    #[serde(rename = "1.iv")]
    F1Iv,
    #[serde(rename = "2.i")]
    F2I,
    #[serde(rename = "2.ii")]
    F2Ii,
    #[serde(rename = "2.iii")]
    F2Iii,
    #[serde(rename = "2.iv")]
    F2Iv,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::F1I,
        Variant::F1Ii,
        Variant::F1Iii,
        Variant::F1Iv,
        Variant::F2I,
        Variant::F2Ii,
        Variant::F2Iii,
        Variant::F2Iv,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Variant::F1I => "1.i",
            Variant::F1Ii => "1.ii",
            Variant::F1Iii => "1.iii",
            Variant::F1Iv => "1.iv",
            Variant::F2I => "2.i",
            Variant::F2Ii => "2.ii",
            Variant::F2Iii => "2.iii",
            Variant::F2Iv => "2.iv",
        }
    }

    pub fn config(self) -> HeuristicConfig {
        use Variant::*;
        let halve_after = match self {
            F1I | F1Ii | F1Iii | F1Iv => 10,
            _ => 5,
        };
        let stop_rule = match self {
            F1I | F2I => StopRule::Iterations(50),
            F1Ii | F2Ii => StopRule::Iterations(150),
            F1Iii | F2Iii => StopRule::Iterations(500),
            F1Iv | F2Iv => StopRule::EpsFloor(0.005),
        };
        HeuristicConfig {
            eps0: 1.5,
            halve_after,
            stop_rule,
            gap_stop_pct: 0.01,
            lr1_iter_cap: 100_000,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.label() == s)
            .ok_or_else(|| format!("unknown variant {s:?} (expected 1.i .. 2.iv)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    IterationLimit,
    EpsFloor,
    GapReached,
    /// Zero subgradient while the bounds still differ.
    ZeroSubgradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub lb: f64,
    pub ub: f64,
    pub best_lb: f64,
    pub best_ub: f64,
    /// Step factor used for the multiplier update after this iteration.
    pub eps: f64,
    pub gamma_norm2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub best_lb: f64,
    pub best_ub: f64,
    pub first_stage: FirstStageSolution,
    pub second_stage: SecondStageSolution,
    pub iterations: usize,
    pub stop: StopReason,
    pub log: Vec<IterationLog>,
    pub seconds: f64,
}

impl RunReport {
    fn empty(inst: &Instance) -> Self {
        RunReport {
            best_lb: f64::NEG_INFINITY,
            best_ub: f64::INFINITY,
            first_stage: FirstStageSolution::zeros(inst),
            second_stage: SecondStageSolution::empty(inst),
            iterations: 0,
            stop: StopReason::IterationLimit,
            log: Vec::new(),
            seconds: 0.0,
        }
    }
}

/// A failed run: the cause and whatever was computed before it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("heuristic aborted after {} iterations: {cause}", partial.iterations)]
pub struct HeuristicError {
    pub cause: LagrangianError,
    pub partial: Box<RunReport>,
}

/// Subgradient optimization from `alpha = 0`.
pub fn run_heuristic(inst: &Instance, cfg: &HeuristicConfig) -> Result<RunReport, HeuristicError> {
    let start = Instant::now();
    let mut report = RunReport::empty(inst);
    let fail = |cause: LagrangianError, mut report: RunReport| {
        report.seconds = start.elapsed().as_secs_f64();
        HeuristicError {
            cause,
            partial: Box::new(report),
        }
    };
    if let Err(e) = cfg.check() {
        return Err(fail(e, report));
    }
    let max_iters = match cfg.stop_rule {
        StopRule::Iterations(n) => n,
        StopRule::EpsFloor(_) => EPS_FLOOR_ITERATION_CAP,
    };
    let mut alpha = Multipliers::zeros(inst);
    let mut eps = cfg.eps0;
    let mut stalled = 0;
    while report.iterations < max_iters {
        let point = match lagrangian_value(inst, &alpha, cfg.lr1_iter_cap) {
            Ok(p) => p,
            Err(e) => return Err(fail(e, report)),
        };
        report.iterations += 1;
        if point.value > report.best_lb {
            report.best_lb = point.value;
            stalled = 0;
        } else {
            stalled += 1;
        }
        let (ub, completion) = match upper_bound_from(inst, &point.lr1.first_stage) {
            Ok(r) => r,
            Err(e) => return Err(fail(e, report)),
        };
        if ub < report.best_ub {
            report.best_ub = ub;
            report.first_stage = point.lr1.first_stage.clone();
            report.second_stage = completion;
        }
        let gamma = match compute_gamma(inst, &point.lr1.first_stage, &point.lr2) {
            Ok(g) => g,
            Err(e) => return Err(fail(e, report)),
        };
        let gamma_norm2: f64 = gamma.iter().map(|g| g * g).sum();
        if stalled >= cfg.halve_after {
            eps /= 2.0;
            stalled = 0;
        }
        report.log.push(IterationLog {
            lb: point.value,
            ub,
            best_lb: report.best_lb,
            best_ub: report.best_ub,
            eps,
            gamma_norm2,
        });
        if relative_gap_reached(report.best_ub, report.best_lb, cfg.gap_stop_pct) {
            report.stop = StopReason::GapReached;
            break;
        }
        if gamma_norm2 == 0.0 {
            report.stop = StopReason::ZeroSubgradient;
            break;
        }
        if let StopRule::EpsFloor(floor) = cfg.stop_rule {
            if eps < floor {
                report.stop = StopReason::EpsFloor;
                break;
            }
        }
        alpha = subgradient_step(&alpha, report.best_ub, point.value, &gamma, eps).0;
    }
    report.seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{tiny_2x2, unit_instance};

    /// All linked `(w, v)` pairs of a cell.
    fn linked_cells(k: usize, kp: usize) -> Vec<CellAssignment> {
        let mut out = Vec::new();
        for wm in 0..1u32 << k {
            for vm in 0..1u32 << kp {
                let cell = CellAssignment {
                    w: (0..k).map(|b| wm >> b & 1 == 1).collect(),
                    v: (0..kp).map(|b| vm >> b & 1 == 1).collect(),
                };
                if cell.is_linked() {
                    out.push(cell);
                }
            }
        }
        out
    }

    fn lr2_brute(g: &[f64], h: &[f64], prob: f64, alpha: f64, b: u32) -> f64 {
        linked_cells(g.len(), h.len())
            .iter()
            .map(|c| {
                let (gs, hs) = c.raw_cost(g, h);
                prob * (gs + hs) - alpha * (f64::from(b) + c.surplus() as f64 - c.shortage() as f64)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn lr2_zero_multiplier_takes_all_surplus() {
        let (cell, v) = lr2_cell(&[-4.0, -2.0], &[3.0], 0.5, 0.0, 1);
        assert_eq!(cell.w, vec![true, true]);
        assert_eq!(v, -3.0);
    }

    #[test]
    fn lr2_negative_multiplier_prefers_shortage() {
        let (cell, v) = lr2_cell(&[-4.0, -2.0], &[3.0], 0.5, -3.0, 1);
        assert_eq!(cell.v, vec![true]);
        assert!(cell.w.iter().all(|&x| !x));
        assert!((v - 1.5).abs() < 1e-12);
        assert!((lr2_brute(&[-4.0, -2.0], &[3.0], 0.5, -3.0, 1) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn lr2_large_positive_multiplier() {
        let (cell, v) = lr2_cell(&[-1.0], &[2.0], 1.0, 10.0, 1);
        assert_eq!(cell.w, vec![true]);
        assert_eq!(v, -21.0);
        assert_eq!(lr2_brute(&[-1.0], &[2.0], 1.0, 10.0, 1), -21.0);
    }

    #[test]
    fn lr2_matches_brute_force_on_grid() {
        let g = [-5.0, -3.0, -3.0, -1.0];
        let h = [1.0, 2.0, 2.0, 6.0];
        for k in 0..=4 {
            for kp in 0..=4 {
                for step in -28..=28 {
                    let alpha = f64::from(step) * 0.25;
                    for prob in [0.25, 0.5, 1.0] {
                        let b = kp as u32;
                        let (cell, v) = lr2_cell(&g[..k], &h[..kp], prob, alpha, b);
                        assert!(cell.is_linked());
                        let brute = lr2_brute(&g[..k], &h[..kp], prob, alpha, b);
                        assert!((v - brute).abs() < 1e-9, "k={k} kp={kp} alpha={alpha} prob={prob}: {v} vs {brute}");
                    }
                }
            }
        }
    }

    #[test]
    fn lr1_costs_without_multipliers() {
        let mut inst = tiny_2x2();
        inst.operate_cost = vec![vec![0.0; 2]; 2];
        let costs = lr1_costs(&inst, &Multipliers::zeros(&inst)).unwrap();
        assert_eq!(costs.open, inst.open_cost);
        let unit = unit_instance();
        assert!(lr1_costs(&unit, &Multipliers::zeros(&unit)).unwrap().close[0].is_empty());
    }

    #[test]
    fn lr1_costs_fold_multipliers() {
        let inst = tiny_2x2();
        let alpha = Multipliers {
            alpha: (0..inst.cell_count()).map(|k| k as f64 * 0.5 - 1.0).collect(),
        };
        let costs = lr1_costs(&inst, &alpha).unwrap();
        for i in 0..2 {
            for t in 0..2 {
                let mut want = inst.open_cost[i][t];
                for tau in t..2 {
                    want += inst.operate_cost[i][tau];
                    for s in 0..2 {
                        for j in 0..2 {
                            if inst.covers[s][tau][i][j] {
                                want += alpha.get(&inst, s, tau, j);
                            }
                        }
                    }
                }
                assert!((costs.open[i][t] - want).abs() < 1e-12);
            }
        }
        assert!(lr1_costs(&inst, &Multipliers { alpha: vec![0.0] }).is_err());
    }

    #[test]
    fn lr1_with_nonnegative_costs_opens_nothing() {
        let inst = tiny_2x2();
        let sol = solve_lr1(&inst, &Multipliers::zeros(&inst), 10_000).unwrap();
        assert_eq!(sol.first_stage, FirstStageSolution::zeros(&inst));
        assert_eq!(sol.value, 0.0);
    }

    #[test]
    fn gamma_example() {
        let mut inst = unit_instance();
        inst.location_cap = vec![3];
        inst.period_cap = vec![3];
        inst.surplus_cost = vec![vec![vec![vec![-2.0, -1.0]]]];
        let mut fs = FirstStageSolution::zeros(&inst);
        fs.z[0][0] = 3;
        let lr2 = SecondStageSolution {
            cells: vec![CellAssignment::prefix(2, 1, 1, 0)],
        };
        assert_eq!(compute_gamma(&inst, &fs, &lr2).unwrap(), vec![1.0]);
    }

    #[test]
    fn step_examples() {
        let alpha = Multipliers { alpha: vec![0.0; 3] };
        let (next, flat) = subgradient_step(&alpha, 10.0, 8.0, &[1.0, 0.0, -1.0], 1.5);
        assert!(!flat);
        assert_eq!(next.alpha, vec![1.5, 0.0, -1.5]);
        let (same, flat) = subgradient_step(&next, 10.0, 8.0, &[0.0; 3], 1.5);
        assert!(flat);
        assert_eq!(same, next);
    }

    #[test]
    fn gap_examples() {
        assert!((gap_lb_ub(110.0, 100.0, 0.0).percent - 9.090909090909092).abs() < 1e-12);
        assert_eq!(gap_lp_lb(5.0, 5.0, 1.0).percent, 0.0);
        assert_eq!(gap_ub_opt(5.0, 5.0, 1.0).percent, 0.0);
        assert!(gap_lb_ub(1.0, 1.0, 1.0).degenerate);
    }

    #[test]
    fn variant_labels_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.label().parse::<Variant>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.label()));
        }
        assert!("3.i".parse::<Variant>().is_err());
        assert_eq!(Variant::F2Iv.config().halve_after, 5);
        assert_eq!(Variant::F1Ii.config().stop_rule, StopRule::Iterations(150));
    }

    #[test]
    fn heuristic_respects_iteration_limit_and_monotonicity() {
        let inst = tiny_2x2();
        let mut cfg = Variant::F1I.config();
        cfg.gap_stop_pct = -1.0;
        let report = run_heuristic(&inst, &cfg).unwrap();
        assert!(report.iterations == 50 || report.stop == StopReason::ZeroSubgradient);
        assert!(report.log.windows(2).all(|w| w[1].best_lb >= w[0].best_lb && w[1].best_ub <= w[0].best_ub));
        assert!(report.best_lb <= report.best_ub + 1e-9);
    }

    #[test]
    fn invalid_config_is_rejected_with_empty_report() {
        let inst = tiny_2x2();
        let cfg = HeuristicConfig {
            halve_after: 0,
            ..HeuristicConfig::default()
        };
        let err = run_heuristic(&inst, &cfg).unwrap_err();
        assert_eq!(err.partial.iterations, 0);
    }
}
