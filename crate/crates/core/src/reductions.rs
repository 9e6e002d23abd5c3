//! Classical covering location models compiled into [`Instance`] values.
//!
//! All cases are deterministic (one scenario). Mandatory covering `>= b`
//! is expressed through the equality covering rows: surplus levels at zero
//! cost absorb over-coverage and shortage levels at `big_m` make under-coverage
//! prohibitive. Forbidden opens or closes carry cost `big_m` as well.
//! Maximal-covering cases use one rewarded surplus level (the remaining
//! levels are free) plus a constant offset.
//!
//! Period and location indices in case files are 0-based.

use serde::{Deserialize, Serialize};

use crate::instance::{Instance, InstanceError};

#[derive(Debug, thiserror::Error)]
pub enum ReductionError {
    #[error("invalid case: {0}")]
    Invalid(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// A case file: the model-specific data plus an optional prohibition cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialCase {
    #[serde(flatten)]
    pub model: CaseModel,
    /// Cost of forbidden moves and uncovered mandatory demand; computed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum CaseModel {
    /// Static covering with redundancy rewards.
    #[serde(rename = "COV")]
    Cov {
        /// `[i][j]`
        covers: Vec<Vec<bool>>,
        operate_cost: Vec<f64>,
        location_cap: Vec<u32>,
        period_cap: u32,
        threshold: Vec<u32>,
        /// `[j][k]`, exactly `period_cap - threshold[j]` sorted non-positive levels.
        surplus_cost: Vec<Vec<f64>>,
    },
    /// Demand point `j` must be covered from period `demand_period[j]` on; opening costs fall over time.
    #[serde(rename = "DSCLP")]
    Dsclp {
        /// `[t][i][j]`
        covers: Vec<Vec<Vec<bool>>>,
        open_cost: Vec<f64>,
        demand_period: Vec<usize>,
    },
    /// No closing; `required[t]` lists the demand points to cover in period `t`.
    #[serde(rename = "DSCLP2")]
    Dsclp2 {
        covers: Vec<Vec<Vec<bool>>>,
        required: Vec<Vec<usize>>,
    },
    /// Every location starts open and may only close.
    #[serde(rename = "DSCPP")]
    Dscpp {
        covers: Vec<Vec<Vec<bool>>>,
        required: Vec<Vec<usize>>,
    },
    /// `openable` locations start empty, `closable` ones start open.
    #[serde(rename = "GDSCLP")]
    Gdsclp {
        covers: Vec<Vec<Vec<bool>>>,
        required: Vec<Vec<usize>>,
        openable: Vec<usize>,
        closable: Vec<usize>,
    },
    /// Maximal covering of populations `[t][j]` with fixed per-period facility counts.
    #[serde(rename = "DMCLP1")]
    Dmclp1 {
        covers: Vec<Vec<Vec<bool>>>,
        period_cap: Vec<u32>,
        population: Vec<Vec<f64>>,
        openable: Vec<usize>,
        closable: Vec<usize>,
    },
    /// Maximal covering with per-period open/close costs and miss weights `[t][j]`.
    #[serde(rename = "DMCLP2")]
    Dmclp2 {
        covers: Vec<Vec<Vec<bool>>>,
        period_cap: Vec<u32>,
        weight: Vec<Vec<f64>>,
        open_cost: Vec<f64>,
        /// `close_cost[t]` for closing at the end of `t < T - 1`.
        close_cost: Vec<f64>,
    },
}

impl CaseModel {
    pub fn kind(&self) -> &'static str {
        match self {
            CaseModel::Cov { .. } => "COV",
            CaseModel::Dsclp { .. } => "DSCLP",
            CaseModel::Dsclp2 { .. } => "DSCLP2",
            CaseModel::Dscpp { .. } => "DSCPP",
            CaseModel::Gdsclp { .. } => "GDSCLP",
            CaseModel::Dmclp1 { .. } => "DMCLP1",
            CaseModel::Dmclp2 { .. } => "DMCLP2",
        }
    }
}

/// The compiled instance; `value(instance) + offset` is the original objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub instance: Instance,
    pub offset: f64,
    pub big_m: f64,
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ReductionError> {
    Err(ReductionError::Invalid(msg.into()))
}

/// Returns `(periods, locations, demands)` of a `[t][i][j]` coverage array.
fn dims(covers: &[Vec<Vec<bool>>]) -> Result<(usize, usize, usize), ReductionError> {
    let tt = covers.len();
    let m = covers.first().map_or(0, Vec::len);
    let n = covers.first().and_then(|c| c.first()).map_or(0, Vec::len);
    if tt == 0 || m == 0 || n == 0 {
        return invalid("covers must be non-empty in every dimension");
    }
    if covers.iter().any(|c| c.len() != m || c.iter().any(|r| r.len() != n)) {
        return invalid("covers is ragged");
    }
    Ok((tt, m, n))
}

fn thresholds_from_required(required: &[Vec<usize>], tt: usize, n: usize) -> Result<Vec<Vec<u32>>, ReductionError> {
    if required.len() != tt {
        return invalid(format!("required has {} periods, covers has {tt}", required.len()));
    }
    let mut b = vec![vec![0u32; n]; tt];
    for (t, list) in required.iter().enumerate() {
        for &j in list {
            if j >= n {
                return invalid(format!("required[{t}] names demand point {j}, only {n} exist"));
            }
            b[t][j] = 1;
        }
    }
    Ok(b)
}

/// Checks the two location sets partition `0..m`; returns a membership mask of `closable`.
fn partition(openable: &[usize], closable: &[usize], m: usize) -> Result<Vec<bool>, ReductionError> {
    let mut seen = vec![0u8; m];
    for &i in openable.iter().chain(closable) {
        if i >= m {
            return invalid(format!("location {i} out of range (m = {m})"));
        }
        seen[i] += 1;
    }
    if let Some(i) = seen.iter().position(|&c| c != 1) {
        return invalid(format!(
            "openable and closable locations must partition all locations (location {i} appears {} times)",
            seen[i]
        ));
    }
    let mut mask = vec![false; m];
    for &i in closable {
        mask[i] = true;
    }
    Ok(mask)
}

/// Deterministic single-scenario skeleton; `M` placeholders are `NaN` until
/// the prohibition cost is known.
struct Draft {
    open: Vec<Vec<f64>>,
    close: Vec<Vec<f64>>,
    operate: Vec<Vec<f64>>,
    location_cap: Vec<u32>,
    period_cap: Vec<u32>,
    initial_open: Vec<u32>,
    covers: Vec<Vec<Vec<bool>>>,
    threshold: Vec<Vec<u32>>,
    /// Finite surplus costs `[t][j]`, padded with zeros to `p - b`.
    surplus: Vec<Vec<Vec<f64>>>,
    /// Mandatory covering: shortage levels cost `M`.
    hard: bool,
}

fn big_m_for(d: &Draft) -> f64 {
    let mut total = 0.0;
    for (i, &e) in d.location_cap.iter().enumerate() {
        let e = f64::from(e);
        for row in [&d.open[i], &d.close[i], &d.operate[i]] {
            total += row.iter().filter(|x| x.is_finite()).map(|x| e * x.abs()).sum::<f64>();
        }
    }
    total += d.surplus.iter().flatten().flatten().map(|g| g.abs()).sum::<f64>();
    1.0 + 2.0 * total
}

fn finish(d: Draft, big_m: Option<f64>, offset: f64) -> Result<Reduction, ReductionError> {
    let m_cost = match big_m {
        Some(v) if v.is_finite() && v > 0.0 => v,
        Some(v) => return invalid(format!("big_m must be positive and finite, got {v}")),
        None => big_m_for(&d),
    };
    let fill = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        rows.into_iter()
            .map(|r| r.into_iter().map(|x| if x.is_nan() { m_cost } else { x }).collect())
            .collect()
    };
    let tt = d.period_cap.len();
    let n = d.threshold[0].len();
    let shortage = (0..tt)
        .map(|t| {
            (0..n)
                .map(|j| vec![if d.hard { m_cost } else { 0.0 }; d.threshold[t][j] as usize])
                .collect()
        })
        .collect();
    let instance = Instance {
        locations: d.location_cap.len(),
        demands: n,
        periods: tt,
        scenarios: 1,
        open_cost: fill(d.open),
        close_cost: fill(d.close),
        operate_cost: d.operate,
        location_cap: d.location_cap,
        period_cap: d.period_cap,
        initial_open: d.initial_open,
        covers: vec![d.covers],
        threshold: vec![d.threshold],
        surplus_cost: vec![d.surplus],
        shortage_cost: vec![shortage],
        prob: vec![1.0],
        seed: None,
    };
    let violations = instance.validate();
    if !violations.is_empty() {
        return Err(InstanceError::Invalid(violations).into());
    }
    Ok(Reduction {
        instance,
        offset,
        big_m: m_cost,
    })
}

fn zero_surplus(threshold: &[Vec<u32>], period_cap: &[u32]) -> Vec<Vec<Vec<f64>>> {
    threshold
        .iter()
        .zip(period_cap)
        .map(|(row, &p)| row.iter().map(|&b| vec![0.0; (p - b) as usize]).collect())
        .collect()
}

/// One rewarded level per cell followed by free levels.
fn reward_surplus(reward: &[Vec<f64>], period_cap: &[u32]) -> Vec<Vec<Vec<f64>>> {
    reward
        .iter()
        .zip(period_cap)
        .map(|(row, &p)| {
            row.iter()
                .map(|&r| (0..p).map(|k| if k == 0 { -r } else { 0.0 }).collect())
                .collect()
        })
        .collect()
}

fn check_matrix(name: &str, rows: &[Vec<f64>], tt: usize, n: usize) -> Result<(), ReductionError> {
    if rows.len() != tt || rows.iter().any(|r| r.len() != n) {
        return invalid(format!("{name} must be {tt} x {n}"));
    }
    if rows.iter().flatten().any(|x| !x.is_finite() || *x < 0.0) {
        return invalid(format!("{name} entries must be finite and non-negative"));
    }
    Ok(())
}

const NAN: f64 = f64::NAN;

/// Compiles a case into an instance and the constant to add to its objective.
pub fn reduce(case: &SpecialCase) -> Result<Reduction, ReductionError> {
    match &case.model {
        CaseModel::Cov {
            covers,
            operate_cost,
            location_cap,
            period_cap,
            threshold,
            surplus_cost,
        } => {
            let (m, n) = (covers.len(), covers.first().map_or(0, Vec::len));
            if m == 0 || n == 0 || covers.iter().any(|r| r.len() != n) {
                return invalid("covers must be a non-empty m x n matrix");
            }
            if operate_cost.len() != m || location_cap.len() != m {
                return invalid("operate_cost and location_cap need one entry per location");
            }
            if threshold.len() != n || surplus_cost.len() != n {
                return invalid("threshold and surplus_cost need one entry per demand point");
            }
            for (j, (&b, g)) in threshold.iter().zip(surplus_cost).enumerate() {
                if b > *period_cap || g.len() != (period_cap - b) as usize {
                    return invalid(format!("demand point {j}: need b <= p and exactly p - b surplus levels"));
                }
            }
            let d = Draft {
                open: vec![vec![0.0]; m],
                close: vec![vec![]; m],
                operate: operate_cost.iter().map(|&f| vec![f]).collect(),
                location_cap: location_cap.clone(),
                period_cap: vec![*period_cap],
                initial_open: vec![0; m],
                covers: vec![covers.clone()],
                threshold: vec![threshold.clone()],
                surplus: vec![surplus_cost.clone()],
                hard: true,
            };
            finish(d, case.big_m, 0.0)
        }
        CaseModel::Dsclp {
            covers,
            open_cost,
            demand_period,
        } => {
            let (tt, m, n) = dims(covers)?;
            if open_cost.len() != tt {
                return invalid("open_cost needs one entry per period");
            }
            if open_cost.windows(2).any(|w| w[0] < w[1]) {
                return invalid("opening costs must be non-increasing over time");
            }
            if demand_period.len() != n || demand_period.iter().any(|&t| t >= tt) {
                return invalid("demand_period needs one valid period per demand point");
            }
            let mut threshold = vec![vec![0u32; n]; tt];
            for (j, &t) in demand_period.iter().enumerate() {
                threshold[t][j] = 1;
            }
            let period_cap = vec![m as u32; tt];
            let d = Draft {
                open: vec![open_cost.clone(); m],
                close: vec![vec![0.0; tt - 1]; m],
                operate: vec![vec![0.0; tt]; m],
                location_cap: vec![1; m],
                surplus: zero_surplus(&threshold, &period_cap),
                period_cap,
                initial_open: vec![0; m],
                covers: covers.clone(),
                threshold,
                hard: true,
            };
            finish(d, case.big_m, 0.0)
        }
        CaseModel::Dsclp2 { covers, required } | CaseModel::Dscpp { covers, required } => {
            let (tt, m, n) = dims(covers)?;
            let threshold = thresholds_from_required(required, tt, n)?;
            let phase_out = matches!(case.model, CaseModel::Dscpp { .. });
            let period_cap = vec![m as u32; tt];
            let d = Draft {
                open: vec![vec![if phase_out { NAN } else { 0.0 }; tt]; m],
                close: vec![vec![if phase_out { 0.0 } else { NAN }; tt - 1]; m],
                operate: vec![vec![1.0; tt]; m],
                location_cap: vec![1; m],
                surplus: zero_surplus(&threshold, &period_cap),
                period_cap,
                initial_open: vec![u32::from(phase_out); m],
                covers: covers.clone(),
                threshold,
                hard: true,
            };
            finish(d, case.big_m, 0.0)
        }
        CaseModel::Gdsclp {
            covers,
            required,
            openable,
            closable,
        } => {
            let (tt, m, n) = dims(covers)?;
            let threshold = thresholds_from_required(required, tt, n)?;
            let is_closable = partition(openable, closable, m)?;
            let period_cap = vec![m as u32; tt];
            let d = Draft {
                open: is_closable.iter().map(|&c| vec![if c { NAN } else { 0.0 }; tt]).collect(),
                close: is_closable.iter().map(|&c| vec![if c { 0.0 } else { NAN }; tt - 1]).collect(),
                operate: vec![vec![1.0; tt]; m],
                location_cap: vec![1; m],
                surplus: zero_surplus(&threshold, &period_cap),
                period_cap,
                initial_open: is_closable.iter().map(|&c| u32::from(c)).collect(),
                covers: covers.clone(),
                threshold,
                hard: true,
            };
            finish(d, case.big_m, 0.0)
        }
        CaseModel::Dmclp1 {
            covers,
            period_cap,
            population,
            openable,
            closable,
        } => {
            let (tt, m, n) = dims(covers)?;
            let is_closable = partition(openable, closable, m)?;
            check_matrix("population", population, tt, n)?;
            if period_cap.len() != tt {
                return invalid("period_cap needs one entry per period");
            }
            if period_cap.iter().any(|&p| (p as usize) < closable.len()) {
                return invalid("period_cap must admit every initially open facility");
            }
            let d = Draft {
                open: is_closable.iter().map(|&c| vec![if c { NAN } else { 0.0 }; tt]).collect(),
                close: is_closable.iter().map(|&c| vec![if c { 0.0 } else { NAN }; tt - 1]).collect(),
                operate: vec![vec![0.0; tt]; m],
                location_cap: vec![1; m],
                period_cap: period_cap.clone(),
                initial_open: is_closable.iter().map(|&c| u32::from(c)).collect(),
                covers: covers.clone(),
                threshold: vec![vec![0; n]; tt],
                surplus: reward_surplus(population, period_cap),
                hard: false,
            };
            finish(d, case.big_m, population.iter().flatten().sum())
        }
        CaseModel::Dmclp2 {
            covers,
            period_cap,
            weight,
            open_cost,
            close_cost,
        } => {
            let (tt, m, n) = dims(covers)?;
            check_matrix("weight", weight, tt, n)?;
            if period_cap.len() != tt || open_cost.len() != tt || close_cost.len() != tt - 1 {
                return invalid("period_cap and open_cost need T entries, close_cost T - 1");
            }
            let d = Draft {
                open: vec![open_cost.clone(); m],
                close: vec![close_cost.clone(); m],
                operate: vec![vec![0.0; tt]; m],
                location_cap: vec![1; m],
                period_cap: period_cap.clone(),
                initial_open: vec![0; m],
                covers: covers.clone(),
                threshold: vec![vec![0; n]; tt],
                surplus: reward_surplus(weight, period_cap),
                hard: false,
            };
            finish(d, case.big_m, weight.iter().flatten().sum())
        }
    }
}
