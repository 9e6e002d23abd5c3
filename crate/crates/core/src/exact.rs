//! Exact solution of tiny instances by enumeration.
//!
//! Operating-level trajectories are enumerated per location and combined
//! depth-first with period-capacity pruning. Each trajectory fixes the
//! opens and closes up to simultaneous open-and-close pairs, whose count is
//! chosen in closed form from the sign of `o + c`. The second stage of every
//! leaf is evaluated in closed form.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::model::{self, closed_form_cost, FirstStageSolution, ModelError, SecondStageSolution};

/// Default cap on the number of enumerated first-stage plans.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExactError {
    #[error("enumeration needs {candidates} candidates, budget is {budget}; export the model and use a MILP solver")]
    BudgetExceeded { candidates: u128, budget: u64 },
    #[error("time limit of {seconds} s reached")]
    TimeLimit { seconds: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactOptions {
    pub budget: u64,
    pub time_limit: Option<Duration>,
    pub restriction: Restriction,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            budget: DEFAULT_BUDGET,
            time_limit: None,
            restriction: Restriction::None,
        }
    }
}

/// Which first-stage decisions may be nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Restriction {
    None,
    /// Opens only in the first period, closes only at the end of the first period.
    Static,
}

impl Restriction {
    fn open_allowed(self, t: usize) -> bool {
        matches!(self, Restriction::None) || t == 0
    }

    fn close_allowed(self, t: usize) -> bool {
        matches!(self, Restriction::None) || t == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub opt: f64,
    pub first_stage: FirstStageSolution,
    pub second_stage: SecondStageSolution,
    /// Complete first-stage plans evaluated.
    pub enumerated: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueOfModeling {
    pub sp: f64,
    pub ws: f64,
    pub evpi: f64,
    /// Per-scenario optimal values behind `ws`.
    pub scenario_opt: Vec<f64>,
    pub mps: f64,
    pub one_ps: f64,
    pub vms: f64,
}

/// Number of operating-level matrices that respect every cap, saturating.
/// An upper bound on the plans enumerated under any restriction.
pub fn candidate_count(inst: &Instance) -> u128 {
    let mut total: u128 = 1;
    for t in 0..inst.periods {
        let cap = inst.period_cap[t] as usize;
        // ways[k]: vectors over the locations seen so far summing to k.
        let mut ways = vec![0u128; cap + 1];
        ways[0] = 1;
        for i in 0..inst.locations {
            let lo = if t == 0 { inst.initial_open[i] as usize } else { 0 };
            let hi = inst.location_cap[i] as usize;
            let mut next = vec![0u128; cap + 1];
            for (k, &w) in ways.iter().enumerate().filter(|(_, &w)| w > 0) {
                for y in lo..=hi {
                    if k + y <= cap {
                        next[k + y] = next[k + y].saturating_add(w);
                    }
                }
            }
            ways = next;
        }
        total = total.saturating_mul(ways.iter().fold(0u128, |a, &w| a.saturating_add(w)));
    }
    total
}

struct Trajectory {
    y: Vec<i64>,
    z: Vec<i64>,
    zp: Vec<i64>,
    cost: f64,
}

fn trajectories(inst: &Instance, i: usize, restriction: Restriction) -> Vec<Trajectory> {
    let tt = inst.periods;
    let e = i64::from(inst.location_cap[i]);
    let y0 = i64::from(inst.initial_open[i]);
    let mut out = Vec::new();
    let mut y = vec![0i64; tt];
    loop {
        if let Some(tr) = derive_moves(inst, i, &y, e, y0, restriction) {
            out.push(tr);
        }
        // Odometer over {0..e}^T, last period fastest.
        let mut t = tt;
        loop {
            if t == 0 {
                return out;
            }
            t -= 1;
            if y[t] < e {
                y[t] += 1;
                break;
            }
            y[t] = 0;
        }
    }
}

fn derive_moves(inst: &Instance, i: usize, y: &[i64], e: i64, y0: i64, restriction: Restriction) -> Option<Trajectory> {
    let tt = inst.periods;
    let mut z = vec![0i64; tt];
    let mut zp = vec![0i64; tt - 1];
    z[0] = y[0] - y0;
    if z[0] < 0 {
        return None;
    }
    for t in 1..tt {
        let delta = y[t] - y[t - 1];
        let (open_ok, close_ok) = (restriction.open_allowed(t), restriction.close_allowed(t - 1));
        let (zmin, zpmin) = (delta.max(0), (-delta).max(0));
        if (!open_ok && zmin > 0) || (!close_ok && zpmin > 0) {
            return None;
        }
        let pair_cost = inst.open_cost[i][t] + inst.close_cost[i][t - 1];
        let extra = if open_ok && close_ok && pair_cost < 0.0 { e - delta.abs() } else { 0 };
        z[t] = zmin + extra;
        zp[t - 1] = zpmin + extra;
    }
    let mut cost = 0.0;
    for t in 0..tt {
        cost += inst.open_cost[i][t] * z[t] as f64 + inst.operate_cost[i][t] * y[t] as f64;
        if t + 1 < tt {
            cost += inst.close_cost[i][t] * zp[t] as f64;
        }
    }
    Some(Trajectory { y: y.to_vec(), z, zp, cost })
}

struct Search<'a> {
    inst: &'a Instance,
    trajs: Vec<Vec<Trajectory>>,
    /// Coverage contribution of each trajectory, flat cell order.
    contrib: Vec<Vec<Vec<i64>>>,
    cover: Vec<i64>,
    load: Vec<i64>,
    choice: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    enumerated: u64,
    deadline: Option<(Instant, Duration)>,
    timed_out: bool,
}

impl Search<'_> {
    fn plan(&self, choice: &[usize]) -> FirstStageSolution {
        FirstStageSolution {
            z: choice.iter().enumerate().map(|(i, &k)| self.trajs[i][k].z.clone()).collect(),
            zp: choice.iter().enumerate().map(|(i, &k)| self.trajs[i][k].zp.clone()).collect(),
        }
    }

    fn leaf(&mut self, first_stage_cost: f64) {
        self.enumerated += 1;
        if self.enumerated.is_multiple_of(4096) {
            if let Some((start, limit)) = self.deadline {
                if start.elapsed() > limit {
                    self.timed_out = true;
                }
            }
        }
        let inst = self.inst;
        let mut value = first_stage_cost;
        for (s, t, j) in inst.cells() {
            let idx = inst.cell_index(s, t, j);
            let margin = self.cover[idx] - i64::from(inst.threshold[s][t][j]);
            value += closed_form_cost(&inst.surplus_cost[s][t][j], &inst.shortage_cost[s][t][j], inst.prob[s], margin);
        }
        let better = match &self.best {
            None => true,
            Some((v, _)) if value < *v => true,
            Some((v, c)) if value == *v => self.plan(&self.choice) < self.plan(c),
            _ => false,
        };
        if better {
            self.best = Some((value, self.choice.clone()));
        }
    }

    fn descend(&mut self, i: usize, cost: f64) {
        if self.timed_out {
            return;
        }
        if i == self.inst.locations {
            self.leaf(cost);
            return;
        }
        for k in 0..self.trajs[i].len() {
            let y = &self.trajs[i][k].y;
            let fits = (0..self.inst.periods).all(|t| self.load[t] + y[t] <= i64::from(self.inst.period_cap[t]));
            if !fits {
                continue;
            }
            for t in 0..self.inst.periods {
                self.load[t] += self.trajs[i][k].y[t];
            }
            for (c, d) in self.cover.iter_mut().zip(&self.contrib[i][k]) {
                *c += d;
            }
            self.choice.push(k);
            let step = self.trajs[i][k].cost;
            self.descend(i + 1, cost + step);
            self.choice.pop();
            for (c, d) in self.cover.iter_mut().zip(&self.contrib[i][k]) {
                *c -= d;
            }
            for t in 0..self.inst.periods {
                self.load[t] -= self.trajs[i][k].y[t];
            }
        }
    }
}

/// Exact optimum with explicit options. Ties are broken towards the
/// lexicographically smallest `(z, zp)`.
pub fn solve_exact_with(inst: &Instance, opts: &ExactOptions) -> Result<ExactResult, ExactError> {
    let start = Instant::now();
    let candidates = candidate_count(inst);
    if candidates > u128::from(opts.budget) {
        return Err(ExactError::BudgetExceeded {
            candidates,
            budget: opts.budget,
        });
    }
    let trajs: Vec<Vec<Trajectory>> = (0..inst.locations).map(|i| trajectories(inst, i, opts.restriction)).collect();
    let mut contrib = Vec::with_capacity(inst.locations);
    for (i, list) in trajs.iter().enumerate() {
        contrib.push(
            list.iter()
                .map(|tr| {
                    inst.cells()
                        .map(|(s, t, j)| if inst.covers[s][t][i][j] { tr.y[t] } else { 0 })
                        .collect::<Vec<i64>>()
                })
                .collect::<Vec<_>>(),
        );
    }
    let cover = vec![0i64; inst.cell_count()];
    let load = vec![0i64; inst.periods];
    let mut search = Search {
        inst,
        trajs,
        contrib,
        cover,
        load,
        choice: Vec::with_capacity(inst.locations),
        best: None,
        enumerated: 0,
        deadline: opts.time_limit.map(|d| (start, d)),
        timed_out: false,
    };
    search.descend(0, 0.0);
    if search.timed_out {
        return Err(ExactError::TimeLimit {
            seconds: opts.time_limit.map_or(0.0, |d| d.as_secs_f64()),
        });
    }
    let (_, choice) = search
        .best
        .clone()
        .ok_or_else(|| ModelError::Shape("no feasible first-stage plan".into()))?;
    let first_stage = search.plan(&choice);
    let (opt, second_stage) = model::evaluate_first_stage(inst, &first_stage)?;
    Ok(ExactResult {
        opt,
        first_stage,
        second_stage,
        enumerated: search.enumerated,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Exact optimum of the full model.
pub fn solve_exact(inst: &Instance, budget: u64) -> Result<ExactResult, ExactError> {
    solve_exact_with(
        inst,
        &ExactOptions {
            budget,
            ..ExactOptions::default()
        },
    )
}

/// Wait-and-see value `sum_s pi_s DP_s` with the per-scenario optima.
pub fn wait_and_see(inst: &Instance, budget: u64) -> Result<(f64, Vec<f64>), ExactError> {
    wait_and_see_with(
        inst,
        &ExactOptions {
            budget,
            ..ExactOptions::default()
        },
    )
}

/// As [`wait_and_see`]; the time limit applies to each scenario solve.
pub fn wait_and_see_with(inst: &Instance, opts: &ExactOptions) -> Result<(f64, Vec<f64>), ExactError> {
    let opts = ExactOptions {
        restriction: Restriction::None,
        ..*opts
    };
    let mut ws = 0.0;
    let mut per = Vec::with_capacity(inst.scenarios);
    for s in 0..inst.scenarios {
        let dp = solve_exact_with(&inst.single_scenario(s), &opts)?.opt;
        ws += inst.prob[s] * dp;
        per.push(dp);
    }
    Ok((ws, per))
}

/// Static counterpart: returns `(1PS, MPS, VMS)`.
pub fn static_counterpart(inst: &Instance, budget: u64) -> Result<(f64, f64, f64), ExactError> {
    let mps = solve_exact(inst, budget)?.opt;
    let restricted = solve_exact_with(
        inst,
        &ExactOptions {
            budget,
            restriction: Restriction::Static,
            ..ExactOptions::default()
        },
    )?;
    let one_ps = model::evaluate_first_stage(inst, &restricted.first_stage)?.0;
    Ok((one_ps, mps, one_ps - mps))
}

/// EVPI and VMS together; the stochastic optimum is solved once.
pub fn value_of_modeling(inst: &Instance, budget: u64) -> Result<ValueOfModeling, ExactError> {
    value_of_modeling_with(
        inst,
        &ExactOptions {
            budget,
            ..ExactOptions::default()
        },
    )
}

/// As [`value_of_modeling`]; the time limit applies to each enumeration.
pub fn value_of_modeling_with(inst: &Instance, opts: &ExactOptions) -> Result<ValueOfModeling, ExactError> {
    let full = ExactOptions {
        restriction: Restriction::None,
        ..*opts
    };
    let sp = solve_exact_with(inst, &full)?.opt;
    let (ws, scenario_opt) = wait_and_see_with(inst, &full)?;
    let restricted = solve_exact_with(
        inst,
        &ExactOptions {
            restriction: Restriction::Static,
            ..*opts
        },
    )?;
    let one_ps = model::evaluate_first_stage(inst, &restricted.first_stage)?.0;
    Ok(ValueOfModeling {
        sp,
        ws,
        evpi: sp - ws,
        scenario_opt,
        mps: sp,
        one_ps,
        vms: one_ps - sp,
    })
}
