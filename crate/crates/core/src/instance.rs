//! Problem data for the multi-period stochastic covering location problem.
//!
//! An [`Instance`] holds every deterministic and scenario-dependent parameter.
//! All indices are 0-based: location `i < locations`, demand point
//! `j < demands`, period `t < periods`, scenario `s < scenarios`, and surplus
//! or shortage level `k` where position `k` stands for "at least `k + 1`
//! facilities above (below) the threshold".
//!
//! The canonical on-disk form is a JSON document with the blocks `meta`,
//! `det`, `stoch` and `prob`; see [`write_instance`] and [`read_instance`].

use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Version tag written into `meta.schema_version`.
pub const SCHEMA_VERSION: u64 = 1;

/// Tolerance on `sum(prob) == 1`.
pub const PROB_SUM_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed instance file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("instance file is missing the `{0}` block")]
    MissingBlock(&'static str),
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u64 },
    #[error("instance file shape error: {0}")]
    Shape(String),
    #[error("instance violates {} invariant(s), first: {}", .0.len(), .0[0])]
    Invalid(Vec<Violation>),
    #[error("invalid generator configuration: {0}")]
    Config(String),
}

/// One broken invariant, naming the offending field and its indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub index: Vec<usize>,
    pub message: String,
}

impl Violation {
    fn new(field: &str, index: &[usize], message: impl Into<String>) -> Self {
        Violation {
            field: field.to_string(),
            index: index.to_vec(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}: {}", self.field, self.index, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub locations: usize,
    pub demands: usize,
    pub periods: usize,
    pub scenarios: usize,
    /// Cost of opening one facility at `i` at the start of `t`, `[i][t]`.
    pub open_cost: Vec<Vec<f64>>,
    /// Cost of closing one facility at `i` at the end of `t`, `[i][t]` for `t < periods - 1`.
    pub close_cost: Vec<Vec<f64>>,
    /// Cost of operating one facility at `i` during `t`, `[i][t]`.
    pub operate_cost: Vec<Vec<f64>>,
    /// Maximum number of facilities at each location.
    pub location_cap: Vec<u32>,
    /// Maximum number of facilities operating in each period.
    pub period_cap: Vec<u32>,
    /// Facilities already operating before the horizon starts.
    pub initial_open: Vec<u32>,
    /// Coverage capability `[s][t][i][j]`.
    pub covers: Vec<Vec<Vec<Vec<bool>>>>,
    /// Coverage threshold `[s][t][j]`.
    pub threshold: Vec<Vec<Vec<u32>>>,
    /// Marginal surplus cost (a non-positive benefit) `[s][t][j][k]`, `period_cap[t] - threshold` levels.
    pub surplus_cost: Vec<Vec<Vec<Vec<f64>>>>,
    /// Marginal shortage penalty `[s][t][j][k]`, `threshold` levels.
    pub shortage_cost: Vec<Vec<Vec<Vec<f64>>>>,
    pub prob: Vec<f64>,
    /// Generator seed, when the instance was generated.
    pub seed: Option<u64>,
}

impl Instance {
    /// Number of (scenario, period, demand point) cells.
    pub fn cell_count(&self) -> usize {
        self.scenarios * self.periods * self.demands
    }

    /// Flat position of cell `(s, t, j)`; scenario-major, then period, then demand point.
    #[inline]
    pub fn cell_index(&self, s: usize, t: usize, j: usize) -> usize {
        (s * self.periods + t) * self.demands + j
    }

    /// Iterates `(s, t, j)` in flat cell order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.scenarios).flat_map(move |s| {
            (0..self.periods).flat_map(move |t| (0..self.demands).map(move |j| (s, t, j)))
        })
    }

    /// Number of surplus levels `|K|` of a cell.
    pub fn surplus_levels(&self, s: usize, t: usize, j: usize) -> usize {
        self.surplus_cost[s][t][j].len()
    }

    /// Number of shortage levels `|K'|` of a cell (equal to its threshold).
    pub fn shortage_levels(&self, s: usize, t: usize, j: usize) -> usize {
        self.shortage_cost[s][t][j].len()
    }

    pub fn total_initial_open(&self) -> u64 {
        self.initial_open.iter().map(|&y| u64::from(y)).sum()
    }

    /// The deterministic single-scenario instance for scenario `s` with probability one.
    pub fn single_scenario(&self, s: usize) -> Instance {
        Instance {
            scenarios: 1,
            covers: vec![self.covers[s].clone()],
            threshold: vec![self.threshold[s].clone()],
            surplus_cost: vec![self.surplus_cost[s].clone()],
            shortage_cost: vec![self.shortage_cost[s].clone()],
            prob: vec![1.0],
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn content_hash(&self) -> String {
        let bytes = to_canonical_json(self);
        hex::encode(Sha256::digest(bytes.as_bytes()))
    }

    /// Checks every invariant; an empty list means the instance is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        validate(self)
    }
}

/// Returns all invariant violations of `inst`.
pub fn validate(inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let (m, n, tt, ss) = (inst.locations, inst.demands, inst.periods, inst.scenarios);

    if m == 0 || n == 0 || tt == 0 || ss == 0 {
        out.push(Violation::new(
            "meta",
            &[],
            format!("all dimensions must be positive (m={m}, n={n}, T={tt}, S={ss})"),
        ));
        return out;
    }

    // Shapes first; value checks below assume them.
    let mut shape_ok = true;
    let mut shape = |field: &str, idx: &[usize], got: usize, want: usize| {
        if got != want {
            out.push(Violation::new(field, idx, format!("length {got}, expected {want}")));
            shape_ok = false;
        }
    };
    for (name, arr, width) in [
        ("open_cost", &inst.open_cost, tt),
        ("close_cost", &inst.close_cost, tt - 1),
        ("operate_cost", &inst.operate_cost, tt),
    ] {
        shape(name, &[], arr.len(), m);
        for (i, row) in arr.iter().enumerate() {
            shape(name, &[i], row.len(), width);
        }
    }
    shape("location_cap", &[], inst.location_cap.len(), m);
    shape("initial_open", &[], inst.initial_open.len(), m);
    shape("period_cap", &[], inst.period_cap.len(), tt);
    shape("prob", &[], inst.prob.len(), ss);
    shape("covers", &[], inst.covers.len(), ss);
    shape("threshold", &[], inst.threshold.len(), ss);
    shape("surplus_cost", &[], inst.surplus_cost.len(), ss);
    shape("shortage_cost", &[], inst.shortage_cost.len(), ss);
    for s in 0..ss {
        if let Some(a) = inst.covers.get(s) {
            shape("covers", &[s], a.len(), tt);
            for (t, at) in a.iter().enumerate() {
                shape("covers", &[s, t], at.len(), m);
                for (i, row) in at.iter().enumerate() {
                    shape("covers", &[s, t, i], row.len(), n);
                }
            }
        }
        for (name, len_s) in [
            ("threshold", inst.threshold.get(s).map(|x| (x.len(), x.iter().map(Vec::len).collect::<Vec<_>>()))),
            ("surplus_cost", inst.surplus_cost.get(s).map(|x| (x.len(), x.iter().map(Vec::len).collect()))),
            ("shortage_cost", inst.shortage_cost.get(s).map(|x| (x.len(), x.iter().map(Vec::len).collect()))),
        ] {
            if let Some((len_t, per_t)) = len_s {
                shape(name, &[s], len_t, tt);
                for (t, len_j) in per_t.into_iter().enumerate() {
                    shape(name, &[s, t], len_j, n);
                }
            }
        }
    }
    if !shape_ok {
        return out;
    }

    let finite = |out: &mut Vec<Violation>, field: &str, idx: &[usize], x: f64| {
        if !x.is_finite() {
            out.push(Violation::new(field, idx, "value is not finite"));
        }
    };
    for i in 0..m {
        for t in 0..tt {
            finite(&mut out, "open_cost", &[i, t], inst.open_cost[i][t]);
            finite(&mut out, "operate_cost", &[i, t], inst.operate_cost[i][t]);
            if t + 1 < tt {
                finite(&mut out, "close_cost", &[i, t], inst.close_cost[i][t]);
            }
        }
        if inst.initial_open[i] > inst.location_cap[i] {
            out.push(Violation::new(
                "initial_open",
                &[i],
                format!("y0 = {} exceeds location cap e = {}", inst.initial_open[i], inst.location_cap[i]),
            ));
        }
    }
    let y0_total = inst.total_initial_open();
    for t in 0..tt {
        if y0_total > u64::from(inst.period_cap[t]) {
            out.push(Violation::new(
                "initial_open",
                &[t],
                format!("sum of y0 = {y0_total} exceeds period cap p = {}", inst.period_cap[t]),
            ));
        }
    }

    let mut psum = 0.0;
    for (s, &p) in inst.prob.iter().enumerate() {
        if !(p > 0.0) || !p.is_finite() {
            out.push(Violation::new("prob", &[s], format!("probability {p} must be positive")));
        }
        psum += p;
    }
    if (psum - 1.0).abs() > PROB_SUM_TOL {
        out.push(Violation::new("prob", &[], format!("probabilities sum to {psum}, not 1 (normalization)")));
    }

    for s in 0..ss {
        for t in 0..tt {
            let cap = inst.period_cap[t];
            for j in 0..n {
                let b = inst.threshold[s][t][j];
                if b > cap {
                    out.push(Violation::new(
                        "threshold",
                        &[s, t, j],
                        format!("threshold {b} exceeds period cap {cap}"),
                    ));
                    continue;
                }
                let g = &inst.surplus_cost[s][t][j];
                let h = &inst.shortage_cost[s][t][j];
                if g.len() != (cap - b) as usize {
                    out.push(Violation::new(
                        "surplus_cost",
                        &[s, t, j],
                        format!("{} levels, expected p - b = {}", g.len(), cap - b),
                    ));
                }
                if h.len() != b as usize {
                    out.push(Violation::new(
                        "shortage_cost",
                        &[s, t, j],
                        format!("{} levels, expected b = {b}", h.len()),
                    ));
                }
                for (k, &x) in g.iter().enumerate() {
                    finite(&mut out, "surplus_cost", &[s, t, j, k], x);
                }
                for (k, &x) in h.iter().enumerate() {
                    finite(&mut out, "shortage_cost", &[s, t, j, k], x);
                }
                if g.windows(2).any(|w| w[0] > w[1]) {
                    out.push(Violation::new("surplus_cost", &[s, t, j], "sort order: levels must be non-decreasing"));
                }
                if g.last().is_some_and(|&x| x > 0.0) {
                    out.push(Violation::new("surplus_cost", &[s, t, j], "surplus costs must be <= 0"));
                }
                if h.windows(2).any(|w| w[0] > w[1]) {
                    out.push(Violation::new("shortage_cost", &[s, t, j], "sort order: levels must be non-decreasing"));
                }
                if h.first().is_some_and(|&x| x < 0.0) {
                    out.push(Violation::new("shortage_cost", &[s, t, j], "shortage costs must be >= 0"));
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

/// Parameters of the random instance generator. `n` is both the number of
/// demand points and of candidate locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub periods: usize,
    pub scenarios: usize,
    pub seed: u64,
    pub radius: f64,
    pub radius_decay: f64,
    pub knockout_fraction: f64,
    pub threshold_fraction: f64,
    pub width: f64,
    pub height: f64,
    pub cost_range: (f64, f64),
    pub surplus_range: (f64, f64),
    pub shortage_range: (f64, f64),
    pub location_cap: u32,
    pub initial_open: u32,
}

impl GeneratorConfig {
    pub fn new(n: usize, periods: usize, scenarios: usize, seed: u64) -> Self {
        GeneratorConfig {
            n,
            periods,
            scenarios,
            seed,
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<(), InstanceError> {
        let err = |m: String| Err(InstanceError::Config(m));
        if self.n < 1 || self.periods < 1 || self.scenarios < 1 {
            return err(format!(
                "n, T and S must be >= 1 (got n={}, T={}, S={})",
                self.n, self.periods, self.scenarios
            ));
        }
        for (name, x) in [
            ("radius_decay", self.radius_decay),
            ("knockout_fraction", self.knockout_fraction),
            ("threshold_fraction", self.threshold_fraction),
        ] {
            if !(0.0..=1.0).contains(&x) {
                return err(format!("{name} = {x} is outside [0, 1]"));
            }
        }
        for (name, (lo, hi)) in [
            ("cost_range", self.cost_range),
            ("surplus_range", self.surplus_range),
            ("shortage_range", self.shortage_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return err(format!("{name} = [{lo}, {hi}] is not an ordered finite range"));
            }
        }
        if self.surplus_range.1 > 0.0 {
            return err("surplus_range must lie in (-inf, 0]".into());
        }
        if self.shortage_range.0 < 0.0 {
            return err("shortage_range must lie in [0, inf)".into());
        }
        if !(self.radius >= 0.0 && self.width > 0.0 && self.height > 0.0) {
            return err("radius must be >= 0 and the rectangle non-degenerate".into());
        }
        if self.initial_open > self.location_cap {
            return err("initial_open exceeds location_cap".into());
        }
        Ok(())
    }

    /// Inclusive bounds of the per-period capacity draw:
    /// `lower = max(1, round(0.1 n))`, `upper = max(lower, round(0.3 n))`.
    pub fn period_cap_bounds(&self) -> (u32, u32) {
        let lower = round_half_away(0.1 * self.n as f64).max(1);
        let upper = round_half_away(0.3 * self.n as f64).max(lower);
        (lower as u32, upper as u32)
    }
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n: 5,
            periods: 3,
            scenarios: 3,
            seed: 0,
            radius: 8.0,
            radius_decay: 0.2,
            knockout_fraction: 0.2,
            threshold_fraction: 0.3,
            width: 10.0,
            height: 50.0,
            cost_range: (1.0, 10.0),
            surplus_range: (-10.0, -1.0),
            shortage_range: (1.0, 10.0),
            location_cap: 2,
            initial_open: 0,
        }
    }
}

/// Rounds half away from zero.
pub fn round_half_away(x: f64) -> i64 {
    x.round() as i64
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Draws a random instance. Deterministic in `cfg` (ChaCha8 seeded with `cfg.seed`).
///
/// Demand points (which double as candidate sites) are uniform in the
/// rectangle; site `i` covers point `j` in period `t` when their distance is at
/// most `radius * (1 - radius_decay)^t`. Each scenario then knocks out
/// `round(knockout_fraction * m)` sites for every point and period. Thresholds
/// are `round(threshold_fraction * coverage)` clamped to the period cap.
pub fn generate(cfg: &GeneratorConfig) -> Result<Instance, InstanceError> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (m, n, tt, ss) = (cfg.n, cfg.n, cfg.periods, cfg.scenarios);

    let points: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(0.0..=cfg.width), rng.random_range(0.0..=cfg.height)))
        .collect();

    let mut open_cost = vec![vec![0.0; tt]; m];
    let mut close_cost = vec![vec![0.0; tt - 1]; m];
    let mut operate_cost = vec![vec![0.0; tt]; m];
    for i in 0..m {
        for t in 0..tt {
            open_cost[i][t] = uniform(&mut rng, cfg.cost_range);
            if t + 1 < tt {
                close_cost[i][t] = uniform(&mut rng, cfg.cost_range);
            }
            operate_cost[i][t] = uniform(&mut rng, cfg.cost_range);
        }
    }

    let y0_total = cfg.initial_open as u64 * m as u64;
    let (p_lo, p_hi) = cfg.period_cap_bounds();
    let period_cap: Vec<u32> = (0..tt)
        .map(|_| {
            let p = rng.random_range(p_lo..=p_hi);
            // Existing facilities must fit in every period.
            p.max(y0_total as u32)
        })
        .collect();

    let radii: Vec<f64> = (0..tt)
        .map(|t| cfg.radius * (1.0 - cfg.radius_decay).powi(t as i32))
        .collect();
    let dist = |i: usize, j: usize| {
        let (dx, dy) = (points[i].0 - points[j].0, points[i].1 - points[j].1);
        (dx * dx + dy * dy).sqrt()
    };
    let knockouts = round_half_away(cfg.knockout_fraction * m as f64).clamp(0, m as i64) as usize;

    let mut covers = Vec::with_capacity(ss);
    for _ in 0..ss {
        let mut dropped = vec![false; m];
        for i in sample(&mut rng, m, knockouts).iter() {
            dropped[i] = true;
        }
        let per_t: Vec<Vec<Vec<bool>>> = radii
            .iter()
            .map(|&r| {
                (0..m)
                    .map(|i| (0..n).map(|j| !dropped[i] && dist(i, j) <= r).collect())
                    .collect()
            })
            .collect();
        covers.push(per_t);
    }

    let mut threshold = vec![vec![vec![0u32; n]; tt]; ss];
    let mut surplus_cost = vec![vec![vec![Vec::new(); n]; tt]; ss];
    let mut shortage_cost = vec![vec![vec![Vec::new(); n]; tt]; ss];
    for s in 0..ss {
        for t in 0..tt {
            for j in 0..n {
                let coverable = (0..m).filter(|&i| covers[s][t][i][j]).count();
                let b = round_half_away(cfg.threshold_fraction * coverable as f64) as u32;
                let b = b.min(period_cap[t]);
                threshold[s][t][j] = b;
                let mut g: Vec<f64> = (0..period_cap[t] - b)
                    .map(|_| uniform(&mut rng, cfg.surplus_range))
                    .collect();
                g.sort_by(f64::total_cmp);
                let mut h: Vec<f64> = (0..b).map(|_| uniform(&mut rng, cfg.shortage_range)).collect();
                h.sort_by(f64::total_cmp);
                surplus_cost[s][t][j] = g;
                shortage_cost[s][t][j] = h;
            }
        }
    }

    // (0, 1] keeps every probability strictly positive.
    let raw: Vec<f64> = (0..ss).map(|_| 1.0 - rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let prob = raw.iter().map(|p| p / total).collect();

    let inst = Instance {
        locations: m,
        demands: n,
        periods: tt,
        scenarios: ss,
        open_cost,
        close_cost,
        operate_cost,
        location_cap: vec![cfg.location_cap; m],
        period_cap,
        initial_open: vec![cfg.initial_open; m],
        covers,
        threshold,
        surplus_cost,
        shortage_cost,
        prob,
        seed: Some(cfg.seed),
    };
    debug_assert!(inst.validate().is_empty(), "{:?}", inst.validate());
    Ok(inst)
}

// ---------------------------------------------------------------------------
// Canonical file format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    meta: Meta,
    det: Det,
    stoch: Stoch,
    prob: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    m: usize,
    n: usize,
    #[serde(rename = "T")]
    periods: usize,
    #[serde(rename = "S")]
    scenarios: usize,
    schema_version: u64,
    seed: Option<u64>,
}

/// Period-major deterministic data: `o[t][i]`, `c[t][i]` (T-1 rows), `f[t][i]`.
#[derive(Serialize, Deserialize)]
struct Det {
    o: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
    e: Vec<u32>,
    p: Vec<u32>,
    y0: Vec<u32>,
}

/// `a[s][t][i]` is a string of `n` characters `0`/`1`.
#[derive(Serialize, Deserialize)]
struct Stoch {
    a: Vec<Vec<Vec<String>>>,
    b: Vec<Vec<Vec<u32>>>,
    g: Vec<Vec<Vec<Vec<f64>>>>,
    h: Vec<Vec<Vec<Vec<f64>>>>,
}

fn transpose(rows: &[Vec<f64>], width: usize) -> Vec<Vec<f64>> {
    (0..width).map(|t| rows.iter().map(|r| r[t]).collect()).collect()
}

fn to_file(inst: &Instance) -> InstanceFile {
    let tt = inst.periods;
    InstanceFile {
        meta: Meta {
            m: inst.locations,
            n: inst.demands,
            periods: tt,
            scenarios: inst.scenarios,
            schema_version: SCHEMA_VERSION,
            seed: inst.seed,
        },
        det: Det {
            o: transpose(&inst.open_cost, tt),
            c: transpose(&inst.close_cost, tt.saturating_sub(1)),
            f: transpose(&inst.operate_cost, tt),
            e: inst.location_cap.clone(),
            p: inst.period_cap.clone(),
            y0: inst.initial_open.clone(),
        },
        stoch: Stoch {
            a: inst
                .covers
                .iter()
                .map(|per_t| {
                    per_t
                        .iter()
                        .map(|rows| {
                            rows.iter()
                                .map(|row| row.iter().map(|&x| if x { '1' } else { '0' }).collect())
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            b: inst.threshold.clone(),
            g: inst.surplus_cost.clone(),
            h: inst.shortage_cost.clone(),
        },
        prob: inst.prob.clone(),
    }
}

fn from_file(file: InstanceFile) -> Result<Instance, InstanceError> {
    let meta = file.meta;
    if meta.schema_version != SCHEMA_VERSION {
        return Err(InstanceError::SchemaVersion { found: meta.schema_version });
    }
    let (m, tt) = (meta.m, meta.periods);
    let shape = |what: &str, got: usize, want: usize| {
        if got == want {
            Ok(())
        } else {
            Err(InstanceError::Shape(format!("{what} has {got} rows, expected {want}")))
        }
    };
    shape("det.o", file.det.o.len(), tt)?;
    shape("det.c", file.det.c.len(), tt.saturating_sub(1))?;
    shape("det.f", file.det.f.len(), tt)?;
    for (what, rows) in [("det.o", &file.det.o), ("det.c", &file.det.c), ("det.f", &file.det.f)] {
        for row in rows {
            shape(what, row.len(), m)?;
        }
    }
    let untranspose = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..m).map(|i| rows.iter().map(|r| r[i]).collect()).collect()
    };
    let covers = file
        .stoch
        .a
        .iter()
        .map(|per_t| {
            per_t
                .iter()
                .map(|rows| {
                    rows.iter()
                        .map(|row| {
                            row.chars()
                                .map(|ch| match ch {
                                    '0' => Ok(false),
                                    '1' => Ok(true),
                                    other => Err(InstanceError::Shape(format!(
                                        "stoch.a contains {other:?}; only '0' and '1' are allowed"
                                    ))),
                                })
                                .collect::<Result<Vec<bool>, _>>()
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Instance {
        locations: m,
        demands: meta.n,
        periods: tt,
        scenarios: meta.scenarios,
        open_cost: untranspose(&file.det.o),
        close_cost: untranspose(&file.det.c),
        operate_cost: untranspose(&file.det.f),
        location_cap: file.det.e,
        period_cap: file.det.p,
        initial_open: file.det.y0,
        covers,
        threshold: file.stoch.b,
        surplus_cost: file.stoch.g,
        shortage_cost: file.stoch.h,
        prob: file.prob,
        seed: meta.seed,
    })
}

/// Canonical JSON text of `inst` (pretty printed, trailing newline).
pub fn to_canonical_json(inst: &Instance) -> String {
    let mut text = serde_json::to_string_pretty(&to_file(inst)).expect("instance serializes");
    text.push('\n');
    text
}

/// Parses canonical JSON text, checking the schema version and all invariants.
pub fn from_json_str(text: &str) -> Result<Instance, InstanceError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    for block in ["meta", "det", "stoch", "prob"] {
        if value.get(block).is_none() {
            return Err(InstanceError::MissingBlock(block));
        }
    }
    if let Some(v) = value["meta"].get("schema_version").and_then(|v| v.as_u64()) {
        if v != SCHEMA_VERSION {
            return Err(InstanceError::SchemaVersion { found: v });
        }
    }
    let inst = from_file(serde_json::from_value(value)?)?;
    let violations = inst.validate();
    if violations.is_empty() {
        Ok(inst)
    } else {
        Err(InstanceError::Invalid(violations))
    }
}

pub fn write_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<(), InstanceError> {
    let violations = inst.validate();
    if !violations.is_empty() {
        return Err(InstanceError::Invalid(violations));
    }
    fs::write(path, to_canonical_json(inst))?;
    Ok(())
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance, InstanceError> {
    from_json_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::unit_instance;

    #[test]
    fn well_formed_instance_has_no_violations() {
        assert_eq!(unit_instance().validate(), vec![]);
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let mut inst = unit_instance().single_scenario(0);
        inst.scenarios = 2;
        for v in [&mut inst.covers] {
            let c = v[0].clone();
            v.push(c);
        }
        inst.threshold.push(inst.threshold[0].clone());
        inst.surplus_cost.push(inst.surplus_cost[0].clone());
        inst.shortage_cost.push(inst.shortage_cost[0].clone());
        inst.prob = vec![0.5, 0.6];
        let v = inst.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].field, "prob");
        assert!(v[0].message.contains("normalization"));
    }

    #[test]
    fn surplus_costs_must_be_sorted() {
        let mut inst = unit_instance();
        inst.period_cap = vec![3];
        inst.surplus_cost[0][0][0] = vec![-1.0, -5.0];
        let v = inst.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].field, "surplus_cost");
        assert!(v[0].message.contains("sort order"));
    }

    #[test]
    fn ragged_extents_are_checked() {
        let mut inst = unit_instance();
        inst.shortage_cost[0][0][0] = vec![];
        let v = inst.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].index, vec![0, 0, 0]);
    }

    #[test]
    fn initial_open_must_fit() {
        let mut inst = unit_instance();
        inst.initial_open = vec![2];
        let fields: Vec<_> = inst.validate().into_iter().map(|v| v.field).collect();
        assert!(fields.iter().all(|f| f == "initial_open") && fields.len() == 2);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GeneratorConfig::new(5, 3, 3, 42);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(to_canonical_json(&a), to_canonical_json(&b));
        assert_ne!(a, generate(&GeneratorConfig::new(5, 3, 3, 43)).unwrap());
    }

    #[test]
    fn generated_instance_shape_for_n5() {
        // round(0.5) = 1 and round(1.5) = 2 under half-away-from-zero.
        let cfg = GeneratorConfig::new(5, 3, 3, 42);
        assert_eq!(cfg.period_cap_bounds(), (1, 2));
        for seed in 0..20 {
            let inst = generate(&GeneratorConfig { seed, ..cfg.clone() }).unwrap();
            assert!(inst.validate().is_empty());
            assert!(inst.location_cap.iter().all(|&e| e == 2));
            assert!(inst.period_cap.iter().all(|&p| (1..=2).contains(&p)));
        }
    }

    #[test]
    fn period_cap_bounds_follow_rounding_rule() {
        let bounds = |n| GeneratorConfig::new(n, 1, 1, 0).period_cap_bounds();
        assert_eq!(bounds(1), (1, 1));
        assert_eq!(bounds(10), (1, 3));
        assert_eq!(bounds(30), (3, 9));
        assert_eq!(bounds(100), (10, 30));
    }

    #[test]
    fn generator_rejects_empty_dimensions() {
        assert!(generate(&GeneratorConfig::new(0, 1, 1, 0)).is_err());
        assert!(generate(&GeneratorConfig::new(2, 0, 1, 0)).is_err());
        assert!(generate(&GeneratorConfig::new(2, 1, 0, 0)).is_err());
    }

    #[test]
    fn coverage_only_shrinks_over_time() {
        let inst = generate(&GeneratorConfig::new(12, 4, 2, 7)).unwrap();
        for s in 0..2 {
            for t in 0..3 {
                for i in 0..12 {
                    for j in 0..12 {
                        assert!(!inst.covers[s][t + 1][i][j] || inst.covers[s][t][i][j]);
                    }
                }
            }
        }
    }

    #[test]
    fn knockout_removes_whole_sites() {
        let inst = generate(&GeneratorConfig::new(10, 2, 3, 11)).unwrap();
        for s in 0..3 {
            // A site covers at least itself unless it was knocked out.
            let dead = (0..10).filter(|&i| !inst.covers[s][0][i][i]).count();
            assert_eq!(dead, 2);
        }
    }

    #[test]
    fn missing_block_is_named() {
        let inst = generate(&GeneratorConfig::new(3, 2, 2, 1)).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&to_canonical_json(&inst)).unwrap();
        value.as_object_mut().unwrap().remove("prob");
        match from_json_str(&value.to_string()) {
            Err(InstanceError::MissingBlock(b)) => assert_eq!(b, "prob"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_version_mismatch_is_rejected() {
        let inst = generate(&GeneratorConfig::new(3, 2, 2, 1)).unwrap();
        let text = to_canonical_json(&inst).replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(from_json_str(&text), Err(InstanceError::SchemaVersion { found: 2 })));
    }

    #[test]
    fn invalid_instance_is_rejected_on_read() {
        let inst = generate(&GeneratorConfig::new(3, 2, 2, 1)).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&to_canonical_json(&inst)).unwrap();
        value["prob"][0] = serde_json::json!(5.0);
        assert!(matches!(from_json_str(&value.to_string()), Err(InstanceError::Invalid(_))));
    }
}
