//! Hand-built classical cases and directly coded reference models.

use super::{binary_schedules, covered};
use covloc::{CaseModel, SpecialCase};

fn covers3() -> Vec<Vec<Vec<bool>>> {
    // [t][i][j]: coverage radii shrink over time.
    vec![
        vec![vec![true, true, false], vec![false, true, true], vec![true, false, true]],
        vec![vec![true, false, false], vec![false, true, true], vec![false, false, true]],
        vec![vec![true, false, false], vec![false, true, false], vec![false, false, true]],
    ]
}

pub fn hand_cases() -> Vec<SpecialCase> {
    let case = |model| SpecialCase { model, big_m: None };
    vec![
        case(CaseModel::Cov {
            covers: vec![vec![true, true, true], vec![true, false, true], vec![false, true, true]],
            operate_cost: vec![4.0, 1.5, 2.0],
            location_cap: vec![1, 2, 1],
            period_cap: 2,
            threshold: vec![1, 1, 0],
            surplus_cost: vec![vec![-1.0], vec![-3.0], vec![-2.5, -0.5]],
        }),
        case(CaseModel::Dsclp {
            covers: covers3(),
            open_cost: vec![5.0, 3.0, 2.5],
            demand_period: vec![0, 2, 1],
        }),
        case(CaseModel::Dsclp2 {
            covers: covers3(),
            required: vec![vec![0], vec![1, 2], vec![0, 2]],
        }),
        case(CaseModel::Dscpp {
            covers: covers3(),
            required: vec![vec![0, 1, 2], vec![2], vec![1]],
        }),
        case(CaseModel::Gdsclp {
            covers: covers3(),
            required: vec![vec![1], vec![0, 2], vec![2]],
            openable: vec![0, 2],
            closable: vec![1],
        }),
        case(CaseModel::Dmclp1 {
            covers: covers3(),
            period_cap: vec![1, 2, 1],
            population: vec![vec![3.0, 1.0, 2.0], vec![0.5, 4.0, 1.0], vec![2.0, 2.0, 6.0]],
            openable: vec![0, 2],
            closable: vec![1],
        }),
        case(CaseModel::Dmclp2 {
            covers: covers3(),
            period_cap: vec![1, 2, 2],
            weight: vec![vec![3.0, 1.0, 2.0], vec![0.5, 4.0, 1.0], vec![2.0, 2.0, 6.0]],
            open_cost: vec![1.0, 2.0, 0.5],
            close_cost: vec![0.25, 1.0],
        }),
    ]
}

fn monotone(row: &[u8], up: bool) -> bool {
    row.windows(2).all(|w| if up { w[0] <= w[1] } else { w[0] >= w[1] })
}

/// Initially open facilities operate in the first period; closures take effect at period ends.
fn phase_out(row: &[u8]) -> bool {
    row[0] == 1 && monotone(row, false)
}

fn all_required_covered(covers: &[Vec<Vec<bool>>], y: &[Vec<u8>], required: &[Vec<usize>]) -> bool {
    required.iter().enumerate().all(|(t, js)| js.iter().all(|&j| covered(&covers[t], y, t, j) >= 1))
}

fn uncovered_weight(covers: &[Vec<Vec<bool>>], y: &[Vec<u8>], weight: &[Vec<f64>]) -> f64 {
    let mut v = 0.0;
    for (t, row) in weight.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            if covered(&covers[t], y, t, j) == 0 {
                v += w;
            }
        }
    }
    v
}

fn operating(y: &[Vec<u8>]) -> f64 {
    y.iter().flatten().map(|&x| f64::from(x)).sum()
}

/// Optimal value of the original model by enumerating operating schedules.
pub fn reference_value(case: &SpecialCase) -> f64 {
    let mut best = f64::INFINITY;
    match &case.model {
        CaseModel::Cov { covers, operate_cost, location_cap, period_cap, threshold, surplus_cost } => {
            let m = covers.len();
            let mut y = vec![0u32; m];
            loop {
                if y.iter().sum::<u32>() <= *period_cap {
                    let mut cost: f64 = y.iter().zip(operate_cost).map(|(&k, f)| f64::from(k) * f).sum();
                    let mut ok = true;
                    for (j, &b) in threshold.iter().enumerate() {
                        let c: u32 = (0..m).filter(|&i| covers[i][j]).map(|i| y[i]).sum();
                        if c < b {
                            ok = false;
                            break;
                        }
                        cost += surplus_cost[j][..(c - b) as usize].iter().sum::<f64>();
                    }
                    if ok {
                        best = best.min(cost);
                    }
                }
                let mut i = 0;
                while i < m && y[i] == location_cap[i] {
                    y[i] = 0;
                    i += 1;
                }
                if i == m {
                    break;
                }
                y[i] += 1;
            }
        }
        CaseModel::Dsclp { covers, open_cost, demand_period } => {
            let (tt, m) = (covers.len(), covers[0].len());
            for y in binary_schedules(m, tt) {
                if !y.iter().all(|r| monotone(r, true)) {
                    continue;
                }
                let ok = demand_period.iter().enumerate().all(|(j, &t)| covered(&covers[t], &y, t, j) >= 1);
                if ok {
                    let cost: f64 = y
                        .iter()
                        .filter_map(|r| r.iter().position(|&x| x == 1))
                        .map(|t| open_cost[t])
                        .sum();
                    best = best.min(cost);
                }
            }
        }
        CaseModel::Dsclp2 { covers, required } | CaseModel::Dscpp { covers, required } => {
            let up = matches!(case.model, CaseModel::Dsclp2 { .. });
            let (tt, m) = (covers.len(), covers[0].len());
            for y in binary_schedules(m, tt) {
                if y.iter().all(|r| if up { monotone(r, true) } else { phase_out(r) }) && all_required_covered(covers, &y, required) {
                    best = best.min(operating(&y));
                }
            }
        }
        CaseModel::Gdsclp { covers, required, openable, closable } => {
            let (tt, m) = (covers.len(), covers[0].len());
            for y in binary_schedules(m, tt) {
                let shape_ok = openable.iter().all(|&i| monotone(&y[i], true))
                    && closable.iter().all(|&i| phase_out(&y[i]));
                if shape_ok && all_required_covered(covers, &y, required) {
                    best = best.min(operating(&y));
                }
            }
        }
        CaseModel::Dmclp1 { covers, period_cap, population, openable, closable } => {
            let (tt, m) = (covers.len(), covers[0].len());
            for y in binary_schedules(m, tt) {
                let shape_ok = openable.iter().all(|&i| monotone(&y[i], true))
                    && closable.iter().all(|&i| phase_out(&y[i]));
                let caps_ok = (0..tt).all(|t| (0..m).map(|i| u32::from(y[i][t])).sum::<u32>() <= period_cap[t]);
                if shape_ok && caps_ok {
                    best = best.min(uncovered_weight(covers, &y, population));
                }
            }
        }
        CaseModel::Dmclp2 { covers, period_cap, weight, open_cost, close_cost } => {
            let (tt, m) = (covers.len(), covers[0].len());
            for y in binary_schedules(m, tt) {
                if !(0..tt).all(|t| (0..m).map(|i| u32::from(y[i][t])).sum::<u32>() <= period_cap[t]) {
                    continue;
                }
                let mut cost = uncovered_weight(covers, &y, weight);
                for row in &y {
                    for t in 0..tt {
                        let before = if t == 0 { 0 } else { row[t - 1] };
                        if row[t] > before {
                            cost += open_cost[t];
                        }
                        if t + 1 < tt && row[t] > row[t + 1] {
                            cost += close_cost[t];
                        }
                    }
                }
                best = best.min(cost);
            }
        }
    }
    best
}
