//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use covloc::lp::{LinearProgram, Sense};
use covloc::model::{self, FirstStageSolution};
use covloc::{Instance, Multipliers};
use nalgebra::{DMatrix, DVector};

/// Minimum of a boxed LP over all vertices: every choice of `n` tight
/// hyperplanes among rows and bounds, equality rows always tight.
/// `None` when no vertex is feasible.
pub fn lp_vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    // Hyperplanes as (coefficients, rhs).
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut forced = Vec::new();
    for row in &lp.rows {
        let mut a = vec![0.0; n];
        for &(c, v) in &row.coeffs {
            a[c] += v;
        }
        if row.sense == Sense::Eq {
            forced.push(planes.len());
        }
        planes.push((a, row.rhs));
    }
    for c in 0..n {
        let mut a = vec![0.0; n];
        a[c] = 1.0;
        planes.push((a.clone(), lp.lower[c]));
        planes.push((a, lp.upper[c]));
    }
    let optional: Vec<usize> = (0..planes.len()).filter(|k| !forced.contains(k)).collect();
    if forced.len() > n {
        return None;
    }
    let need = n - forced.len();
    let mut best: Option<f64> = None;
    let mut pick = Vec::new();
    combos(&optional, need, 0, &mut pick, &mut |chosen| {
        let rows: Vec<usize> = forced.iter().chain(chosen).copied().collect();
        let a = DMatrix::from_fn(n, n, |r, c| planes[rows[r]].0[c]);
        let b = DVector::from_fn(n, |r, _| planes[rows[r]].1);
        if a.determinant().abs() < 1e-9 {
            return;
        }
        let Some(x) = a.lu().solve(&b) else { return };
        let x: Vec<f64> = x.iter().copied().collect();
        let inside = (0..n).all(|c| x[c] >= lp.lower[c] - 1e-7 && x[c] <= lp.upper[c] + 1e-7);
        if inside && lp.max_violation(&x) <= 1e-7 {
            let v = lp.evaluate(&x);
            if best.is_none_or(|b| v < b) {
                best = Some(v);
            }
        }
    });
    best
}

fn combos(items: &[usize], k: usize, from: usize, pick: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for idx in from..items.len() {
        if items.len() - idx < k - pick.len() {
            break;
        }
        pick.push(items[idx]);
        combos(items, k, idx + 1, pick, f);
        pick.pop();
    }
}

/// All 0/1 assignments of a cell that satisfy the linking rows.
pub fn linked_pairs(k: usize, kp: usize) -> Vec<(Vec<bool>, Vec<bool>)> {
    let mut out = Vec::new();
    for wm in 0..1u32 << k {
        for vm in 0..1u32 << kp {
            let w: Vec<bool> = (0..k).map(|b| wm >> b & 1 == 1).collect();
            let v: Vec<bool> = (0..kp).map(|b| vm >> b & 1 == 1).collect();
            let w1 = w.first().copied().unwrap_or(false);
            let v1 = v.first().copied().unwrap_or(false);
            if w1 && v1 {
                continue;
            }
            if w.iter().any(|&x| x && !w1) || v.iter().any(|&x| x && !v1) {
                continue;
            }
            out.push((w, v));
        }
    }
    out
}

fn count(x: &[bool]) -> i64 {
    x.iter().filter(|&&b| b).count() as i64
}

fn weighted(x: &[bool], c: &[f64]) -> f64 {
    x.iter().zip(c).filter(|(b, _)| **b).map(|(_, c)| c).sum()
}

/// Cheapest linked assignment with `sum w - sum v = margin`, weighted by `prob`.
pub fn cell_brute(g: &[f64], h: &[f64], prob: f64, margin: i64) -> Option<f64> {
    linked_pairs(g.len(), h.len())
        .into_iter()
        .filter(|(w, v)| count(w) - count(v) == margin)
        .map(|(w, v)| prob * weighted(&w, g) + prob * weighted(&v, h))
        .min_by(f64::total_cmp)
}

/// LR2 cell by enumeration: `pi (g w + h v) + alpha (-b - sum w + sum v)`.
pub fn lr2_brute(g: &[f64], h: &[f64], prob: f64, alpha: f64, b: u32) -> f64 {
    linked_pairs(g.len(), h.len())
        .into_iter()
        .map(|(w, v)| {
            prob * weighted(&w, g) + prob * weighted(&v, h) + alpha * (-f64::from(b) - count(&w) as f64 + count(&v) as f64)
        })
        .min_by(f64::total_cmp)
        .unwrap()
}

/// Every integer `(z, zp)` inside the boxes, last-to-first odometer order.
pub fn for_each_plan(inst: &Instance, mut f: impl FnMut(&FirstStageSolution)) {
    let (m, tt) = (inst.locations, inst.periods);
    let slots = m * tt + m * (tt - 1);
    let cap = |k: usize| -> i64 {
        let i = if k < m * tt { k / tt } else { (k - m * tt) / (tt - 1) };
        i64::from(inst.location_cap[i])
    };
    let mut vals: Vec<i64> = (0..slots).map(cap).collect();
    loop {
        let mut fs = FirstStageSolution::zeros(inst);
        for (k, &v) in vals.iter().enumerate() {
            if k < m * tt {
                fs.z[k / tt][k % tt] = v;
            } else {
                let r = k - m * tt;
                fs.zp[r / (tt - 1)][r % (tt - 1)] = v;
            }
        }
        f(&fs);
        let mut k = 0;
        loop {
            if k == slots {
                return;
            }
            if vals[k] > 0 {
                vals[k] -= 1;
                break;
            }
            vals[k] = cap(k);
            k += 1;
        }
    }
}

/// Plain box enumeration scored by the model's own evaluator.
pub fn exact_box(inst: &Instance) -> f64 {
    let mut best = f64::INFINITY;
    for_each_plan(inst, |fs| {
        if let Ok((v, _)) = model::evaluate_first_stage(inst, fs) {
            best = best.min(v);
        }
    });
    best
}

/// Operating levels computed period by period.
pub fn levels(inst: &Instance, fs: &FirstStageSolution) -> Vec<Vec<i64>> {
    let mut y = vec![vec![0; inst.periods]; inst.locations];
    for i in 0..inst.locations {
        let mut cur = i64::from(inst.initial_open[i]);
        for t in 0..inst.periods {
            cur += fs.z[i][t];
            y[i][t] = cur;
            if t + 1 < inst.periods {
                cur -= fs.zp[i][t];
            }
        }
    }
    y
}

/// LR1 by enumeration: `o z + c zp + sum_t (f + sum_{s,j} alpha a) y`
/// over plans meeting the capacity and level rows.
pub fn lr1_brute(inst: &Instance, alpha: &Multipliers) -> f64 {
    let mut best = f64::INFINITY;
    for_each_plan(inst, |fs| {
        let y = levels(inst, fs);
        let ok_levels = (0..inst.locations)
            .all(|i| y[i].iter().all(|&v| v >= 0 && v <= i64::from(inst.location_cap[i])));
        let ok_caps = (0..inst.periods)
            .all(|t| y.iter().map(|r| r[t]).sum::<i64>() <= i64::from(inst.period_cap[t]));
        if !(ok_levels && ok_caps) {
            return;
        }
        let mut v = 0.0;
        for i in 0..inst.locations {
            for t in 0..inst.periods {
                v += inst.open_cost[i][t] * fs.z[i][t] as f64 + inst.operate_cost[i][t] * y[i][t] as f64;
                if t + 1 < inst.periods {
                    v += inst.close_cost[i][t] * fs.zp[i][t] as f64;
                }
                for s in 0..inst.scenarios {
                    for j in 0..inst.demands {
                        if inst.covers[s][t][i][j] {
                            v += alpha.get(inst, s, t, j) * y[i][t] as f64;
                        }
                    }
                }
            }
        }
        best = best.min(v);
    });
    best
}

/// Binary operating-level matrices `[i][t]` of an `m x T` problem.
pub fn binary_schedules(m: usize, tt: usize) -> impl Iterator<Item = Vec<Vec<u8>>> {
    (0..1u64 << (m * tt)).map(move |mask| {
        (0..m)
            .map(|i| (0..tt).map(|t| (mask >> (i * tt + t) & 1) as u8).collect())
            .collect()
    })
}

/// Facilities covering `j` in period `t` under schedule `y[i][t]`.
pub fn covered(covers_t: &[Vec<bool>], y: &[Vec<u8>], t: usize, j: usize) -> u32 {
    (0..y.len()).filter(|&i| covers_t[i][j]).map(|i| u32::from(y[i][t])).sum()
}

pub mod cases;
