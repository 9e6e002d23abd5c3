//! Dense bounded-variable primal simplex.
//!
//! Every structural variable carries finite bounds `lo <= x <= hi`, which is
//! all the covering models need. Rows are `a x {<=,=,>=} b`; each row gets a
//! slack column so that `a x + s = b`, and the slack columns double as the
//! running basis inverse for dual extraction and final re-solves.
//!
//! Phase one minimizes the sum of artificial variables; phase two the real
//! objective. Pricing is Dantzig's rule; after [`DEGENERATE_STREAK`] pivots
//! in a row without progress the phase switches to Bland's rule for good.

use std::fmt;

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-7;
/// Reduced-cost optimality tolerance.
pub const OPT_TOL: f64 = 1e-9;
/// Smallest pivot element accepted by the ratio test.
const PIVOT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
pub const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

/// A sparse row `sum coeffs[k].1 * x[coeffs[k].0]  sense  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `min objective . x + objective_offset` subject to `rows` and the boxes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("row {row} references variable {var} but the program has {num_vars} variables")]
    ColumnOutOfRange { row: usize, var: usize, num_vars: usize },
    #[error("variable {0} has non-finite or crossed bounds [{1}, {2}]")]
    BadBounds(usize, f64, f64),
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("objective has {got} entries for {num_vars} variables")]
    ObjectiveWidth { got: usize, num_vars: usize },
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Appends a variable and returns its column index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    /// Appends a row and returns its index. Zero coefficients are dropped.
    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        let coeffs = coeffs.into_iter().filter(|&(_, a)| a != 0.0).collect();
        self.rows.push(Row { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    pub fn check(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::ObjectiveWidth {
                got: self.lower.len().min(self.upper.len()),
                num_vars: n,
            });
        }
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(LpError::BadBounds(j, lo, hi));
            }
            if !self.objective[j].is_finite() {
                return Err(LpError::NonFinite(format!("objective[{j}]")));
            }
        }
        if !self.objective_offset.is_finite() {
            return Err(LpError::NonFinite("objective offset".into()));
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("rhs of row {r}")));
            }
            for &(var, a) in &row.coeffs {
                if var >= n {
                    return Err(LpError::ColumnOutOfRange { row: r, var, num_vars: n });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite(format!("row {r}, column {var}")));
                }
            }
        }
        Ok(())
    }

    /// Objective value of `x`, offset included.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x)).fold(0.0, f64::max);
        let bounds = (0..self.num_vars())
            .map(|j| (self.lower[j] - x[j]).max(x[j] - self.upper[j]).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values (meaningful when optimal).
    pub x: Vec<f64>,
    /// Objective value including the offset.
    pub objective: f64,
    /// Row duals `y` with reduced costs `c - A^T y`; sign follows the usual
    /// minimization convention (`y <= 0` on binding `<=` rows).
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum State {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau<'a> {
    lp: &'a LinearProgram,
    rows: usize,
    structurals: usize,
    cols: usize,
    /// `B^{-1} A`, row-major with stride `cols`.
    t: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    beta: Vec<f64>,
    /// Original (unscaled) column of each artificial, `(row, sign)`.
    artificial: Vec<(usize, f64)>,
    iterations: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a LinearProgram) -> Self {
        let m = lp.rows.len();
        let n = lp.num_vars();
        let mut lo = lp.lower.clone();
        let mut hi = lp.upper.clone();
        for row in &lp.rows {
            let (l, h) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lo.push(l);
            hi.push(h);
        }
        let mut state = vec![State::AtLower; n + m];
        for r in 0..m {
            // Slacks start nonbasic at their finite bound (always 0).
            state[n + r] = if lo[n + r].is_finite() { State::AtLower } else { State::AtUpper };
        }

        // Residual with structurals at their lower bounds decides who is basic.
        let mut basis = vec![0; m];
        let mut beta = vec![0.0; m];
        let mut artificial = Vec::new();
        let mut sign = vec![1.0; m];
        for (r, row) in lp.rows.iter().enumerate() {
            let resid = row.rhs - row.activity(&lp.lower);
            let slack_fits = match row.sense {
                Sense::Le => resid >= 0.0,
                Sense::Ge => resid <= 0.0,
                Sense::Eq => resid == 0.0,
            };
            if slack_fits {
                basis[r] = n + r;
                state[n + r] = State::Basic;
                beta[r] = resid;
            } else {
                let s = if resid >= 0.0 { 1.0 } else { -1.0 };
                sign[r] = s;
                basis[r] = n + m + artificial.len();
                beta[r] = resid.abs();
                artificial.push((r, s));
            }
        }
        let cols = n + m + artificial.len();
        lo.extend(std::iter::repeat_n(0.0, artificial.len()));
        hi.extend(std::iter::repeat_n(f64::INFINITY, artificial.len()));
        state.extend(std::iter::repeat_n(State::Basic, artificial.len()));

        let mut t = vec![0.0; m * cols];
        for (r, row) in lp.rows.iter().enumerate() {
            let s = sign[r];
            let base = r * cols;
            for &(j, a) in &row.coeffs {
                t[base + j] += a / s;
            }
            t[base + n + r] = 1.0 / s;
        }
        for (k, &(r, _)) in artificial.iter().enumerate() {
            t[r * cols + n + m + k] = 1.0;
        }

        Tableau {
            lp,
            rows: m,
            structurals: n,
            cols,
            t,
            lo,
            hi,
            state,
            basis,
            beta,
            artificial,
            iterations: 0,
        }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.cols + c]
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::AtLower => self.lo[j],
            State::AtUpper => self.hi[j],
            State::Basic => unreachable!("basic variable has no bound value"),
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.t[r * self.cols..(r + 1) * self.cols];
                for (dj, &a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    fn run_phase(&mut self, cost: &[f64], max_iters: usize) -> PhaseEnd {
        let mut d = self.reduced_costs(cost);
        let mut bland = false;
        let mut streak = 0usize;
        loop {
            // Pricing.
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.cols {
                if self.lo[j] == self.hi[j] {
                    continue;
                }
                let score = match self.state[j] {
                    State::Basic => continue,
                    State::AtLower if d[j] < -OPT_TOL => -d[j],
                    State::AtUpper if d[j] > OPT_TOL => d[j],
                    _ => continue,
                };
                if bland {
                    entering = Some((j, score));
                    break;
                }
                if entering.is_none_or(|(_, best)| score > best) {
                    entering = Some((j, score));
                }
            }
            let Some((q, _)) = entering else {
                return PhaseEnd::Optimal;
            };
            if self.iterations >= max_iters {
                return PhaseEnd::IterationLimit;
            }
            self.iterations += 1;

            let dir = if self.state[q] == State::AtLower { 1.0 } else { -1.0 };
            let range = self.hi[q] - self.lo[q];
            // (row, step limit, signed pivot element)
            let mut leave: Option<(usize, f64, f64)> = None;
            for r in 0..self.rows {
                let alpha = dir * self.at(r, q);
                let b = self.basis[r];
                let limit = if alpha > PIVOT_TOL && self.lo[b].is_finite() {
                    ((self.beta[r] - self.lo[b]) / alpha).max(0.0)
                } else if alpha < -PIVOT_TOL && self.hi[b].is_finite() {
                    ((self.hi[b] - self.beta[r]) / -alpha).max(0.0)
                } else {
                    continue;
                };
                let replace = match leave {
                    None => true,
                    Some((lr, best, la)) => {
                        if limit < best - 1e-12 {
                            true
                        } else if limit <= best + 1e-12 {
                            let (b_old, b_new) = (self.basis[lr], b);
                            if bland {
                                b_new < b_old
                            } else {
                                alpha.abs() > la.abs() || (alpha.abs() == la.abs() && b_new < b_old)
                            }
                        } else {
                            false
                        }
                    }
                };
                if replace {
                    leave = Some((r, limit, alpha));
                }
            }
            let row_theta = leave.map_or(f64::INFINITY, |(_, l, _)| l);
            let flip = range <= row_theta;
            let theta = if flip { range } else { row_theta };
            if !theta.is_finite() {
                return PhaseEnd::Unbounded;
            }

            if theta < 1e-12 {
                streak += 1;
                if streak >= DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                streak = 0;
            }

            if theta != 0.0 {
                for r in 0..self.rows {
                    let a = self.at(r, q);
                    if a != 0.0 {
                        self.beta[r] -= theta * dir * a;
                    }
                }
            }
            if flip {
                self.state[q] = match self.state[q] {
                    State::AtLower => State::AtUpper,
                    _ => State::AtLower,
                };
            } else {
                let (r, _, alpha) = leave.expect("finite row step has a leaving row");
                let entering_value = self.nonbasic_value(q) + dir * theta;
                let b = self.basis[r];
                self.state[b] = if alpha > 0.0 { State::AtLower } else { State::AtUpper };
                self.pivot(r, q, &mut d);
                self.beta[r] = entering_value;
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize, d: &mut [f64]) {
        let cols = self.cols;
        let p = self.at(r, q);
        {
            let row = &mut self.t[r * cols..(r + 1) * cols];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[q] = 1.0;
        }
        let pivot_row: Vec<f64> = self.t[r * cols..(r + 1) * cols].to_vec();
        let nz: Vec<usize> = (0..cols).filter(|&c| pivot_row[c] != 0.0).collect();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * cols + q];
            if f != 0.0 {
                let row = &mut self.t[i * cols..(i + 1) * cols];
                for &c in &nz {
                    row[c] -= f * pivot_row[c];
                }
                row[q] = 0.0;
            }
        }
        let f = d[q];
        if f != 0.0 {
            for &c in &nz {
                d[c] -= f * pivot_row[c];
            }
            d[q] = 0.0;
        }
        self.state[q] = State::Basic;
        self.basis[r] = q;
    }

    /// Recomputes basic values from the original data: `x_B = B^{-1} (b - N x_N)`.
    fn refresh_basics(&mut self) {
        let n = self.structurals;
        let m = self.rows;
        let x = self.full_values_nonbasic();
        let mut resid = vec![0.0; m];
        for (r, row) in self.lp.rows.iter().enumerate() {
            let mut v = row.rhs;
            for &(j, a) in &row.coeffs {
                if self.state[j] != State::Basic {
                    v -= a * x[j];
                }
            }
            if self.state[n + r] != State::Basic {
                v -= x[n + r];
            }
            resid[r] = v;
        }
        for (k, &(r, s)) in self.artificial.iter().enumerate() {
            let j = n + m + k;
            if self.state[j] != State::Basic {
                resid[r] -= s * x[j];
            }
        }
        for i in 0..m {
            self.beta[i] = (0..m).map(|k| self.at(i, n + k) * resid[k]).sum();
        }
    }

    fn full_values_nonbasic(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| if self.state[j] == State::Basic { 0.0 } else { self.nonbasic_value(j) })
            .collect()
    }

    fn values(&self) -> Vec<f64> {
        let mut x = self.full_values_nonbasic();
        for r in 0..self.rows {
            x[self.basis[r]] = self.beta[r];
        }
        x
    }
}

/// Solves `lp`; `max_iters` bounds the total number of simplex iterations.
pub fn solve_lp(lp: &LinearProgram, max_iters: usize) -> Result<LpSolution, LpError> {
    lp.check()?;
    let n = lp.num_vars();
    let m = lp.rows.len();
    let mut tab = Tableau::new(lp);

    let finish = |tab: &Tableau, status: LpStatus| -> LpSolution {
        let x: Vec<f64> = tab.values()[..n].to_vec();
        LpSolution {
            status,
            objective: lp.evaluate(&x),
            x,
            duals: vec![0.0; m],
            iterations: tab.iterations,
        }
    };

    if !tab.artificial.is_empty() {
        let mut cost = vec![0.0; tab.cols];
        for c in cost.iter_mut().skip(n + m) {
            *c = 1.0;
        }
        match tab.run_phase(&cost, max_iters) {
            PhaseEnd::Optimal => {}
            PhaseEnd::IterationLimit => return Ok(finish(&tab, LpStatus::IterationLimit)),
            PhaseEnd::Unbounded => unreachable!("phase one is bounded below by zero"),
        }
        tab.refresh_basics();
        let x = tab.values();
        let infeasibility: f64 = x[n + m..].iter().sum();
        let scale = 1.0 + lp.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        if infeasibility > FEAS_TOL * scale {
            return Ok(finish(&tab, LpStatus::Infeasible));
        }
        for j in n + m..tab.cols {
            tab.hi[j] = 0.0;
            if tab.state[j] != State::Basic {
                tab.state[j] = State::AtLower;
            }
        }
    }

    let mut cost = vec![0.0; tab.cols];
    cost[..n].copy_from_slice(&lp.objective);
    let end = tab.run_phase(&cost, max_iters);
    tab.refresh_basics();
    let status = match end {
        PhaseEnd::Optimal => LpStatus::Optimal,
        PhaseEnd::Unbounded => LpStatus::Unbounded,
        PhaseEnd::IterationLimit => LpStatus::IterationLimit,
    };
    let mut sol = finish(&tab, status);
    if status == LpStatus::Optimal {
        // y_k = c_B^T B^{-1} e_k, and column n + k of the tableau is B^{-1} e_k.
        sol.duals = (0..m)
            .map(|k| (0..m).map(|r| cost[tab.basis[r]] * tab.at(r, n + k)).sum())
            .collect();
        // Snap values that drifted just outside their boxes.
        for j in 0..n {
            sol.x[j] = sol.x[j].clamp(lp.lower[j], lp.upper[j]);
        }
        sol.objective = lp.evaluate(&sol.x);
    }
    Ok(sol)
}
