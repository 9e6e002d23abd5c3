//! Subcommand implementations.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use covloc::exact::{solve_exact_with, value_of_modeling_with, ExactOptions, Restriction};
use covloc::instance::to_canonical_json;
use covloc::lagrangian::{gap_lb_ub, gap_lp_lb};
use covloc::model::{build_milp, lb0_value, lp_relaxation_value, to_lp_format, to_mps};
use covloc::{
    evaluate as evaluate_solution, evaluate_first_stage, generate as generate_instance, read_instance, reduce as reduce_case,
    run_heuristic, ExactResult, FirstStageSolution, Formulation, GeneratorConfig, Instance, Linking, ModelVariant,
    RunReport, SecondStageSolution, SpecialCase, ValueOfModeling, Variant,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::rows::{ExactRow, SolveRow, SummaryRow};
use crate::{
    EvaluateArgs, ExactArgs, ExportArgs, Format, GenerateArgs, ReduceArgs, ReportArgs, ShapeArgs, SolveArgs,
};

/// Environment variable that takes precedence over `--seed`.
pub const SEED_ENV: &str = "COVLOC_SEED";

fn resolve_seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(e) => Err(anyhow!("{SEED_ENV}: {e}")),
    }
}

/// Generator configurations for every requested seed.
fn configs(shape: &ShapeArgs) -> Result<Vec<GeneratorConfig>> {
    let (Some(n), Some(periods), Some(scenarios)) = (shape.n, shape.periods, shape.scenarios) else {
        bail!("--n, --T and --S are required to generate instances");
    };
    if shape.count == 0 {
        bail!("--count must be positive");
    }
    let first = resolve_seed(shape.seed)?;
    (0..shape.count)
        .map(|k| {
            let seed = first.checked_add(k).ok_or_else(|| anyhow!("seed range overflows"))?;
            Ok(GeneratorConfig::new(n, periods, scenarios, seed))
        })
        .collect()
}

fn generated_name(cfg: &GeneratorConfig) -> String {
    format!("gen_n{}_t{}_s{}_seed{}", cfg.n, cfg.periods, cfg.scenarios, cfg.seed)
}

fn instance_name(path: &Path) -> String {
    let stem = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stem.strip_suffix(".inst.json")
        .or_else(|| stem.strip_suffix(".json"))
        .unwrap_or(&stem)
        .to_string()
}

fn load(path: &Path) -> Result<Instance> {
    read_instance(path).with_context(|| format!("reading {}", path.display()))
}

/// Named instances from files, or from the generator when no file is given.
fn sources(paths: &[PathBuf], shape: &ShapeArgs) -> Result<Vec<(String, Instance)>> {
    if !paths.is_empty() {
        return paths.iter().map(|p| Ok((instance_name(p), load(p)?))).collect();
    }
    configs(shape)?
        .iter()
        .map(|cfg| Ok((generated_name(cfg), generate_instance(cfg)?)))
        .collect()
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(out, &text)
}

/// Appends rows to a CSV file, writing the header only when the file is empty.
fn append_csv<R: Serialize>(out: Option<&Path>, rows: &[R]) -> Result<()> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .with_context(|| format!("opening {}", p.display()))?,
        ),
        None => Box::new(io::stdout().lock()),
    };
    let fresh = match out {
        Some(p) => fs::metadata(p)?.len() == 0,
        None => true,
    };
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(sink);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

fn format_error(fmt: Format, allowed: &[Format]) -> Result<()> {
    if allowed.contains(&fmt) {
        Ok(())
    } else {
        bail!("format {fmt:?} is not supported here (allowed: {allowed:?})")
    }
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let cfgs = configs(&args.shape)?;
    let single = cfgs.len() == 1;
    let dir_out = args.out.as_deref().filter(|p| !single || p.is_dir());
    if !single && args.out.is_none() {
        bail!("--out must name a directory when --count exceeds 1");
    }
    for cfg in &cfgs {
        let inst = generate_instance(cfg)?;
        let text = to_canonical_json(&inst);
        match (dir_out, args.out.as_deref()) {
            (Some(dir), _) => {
                fs::create_dir_all(dir)?;
                write_text(Some(&dir.join(format!("{}.inst.json", generated_name(cfg)))), &text)?;
            }
            (None, out) => write_text(out, &text)?,
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveRecord {
    instance: String,
    hash: String,
    variant: Variant,
    lp: f64,
    lb0: f64,
    gap_lb_ub: f64,
    gap_lp_lb: f64,
    report: RunReport,
}

struct Prepared {
    name: String,
    hash: String,
    inst: Instance,
    lp: f64,
    lb0: f64,
}

pub fn solve(args: &SolveArgs) -> Result<()> {
    format_error(args.format, &[Format::Csv, Format::Json])?;
    let named = sources(&args.instances, &args.shape)?;
    let variants = &args.variant.0;
    let pool = pool(args.jobs)?;
    let (rows, records) = pool.install(|| -> Result<_> {
        let prepared: Vec<Prepared> = named
            .into_par_iter()
            .map(|(name, inst)| {
                let lp = lp_relaxation_value(&inst, ModelVariant::default())
                    .with_context(|| format!("{name}: LP relaxation"))?;
                let lb0 = lb0_value(&inst).with_context(|| format!("{name}: LB0"))?;
                Ok(Prepared {
                    hash: inst.content_hash(),
                    name,
                    inst,
                    lp,
                    lb0,
                })
            })
            .collect::<Result<_>>()?;
        let tasks: Vec<(&Prepared, Variant)> =
            prepared.iter().flat_map(|p| variants.iter().map(move |&v| (p, v))).collect();
        let runs: Vec<(SolveRow, SolveRecord)> = tasks
            .into_par_iter()
            .map(|(p, v)| {
                let report =
                    run_heuristic(&p.inst, &v.config()).with_context(|| format!("{} variant {v}", p.name))?;
                let gap_lu = gap_lb_ub(report.best_ub, report.best_lb, p.lb0).percent;
                let gap_pl = gap_lp_lb(p.lp, report.best_lb, p.lb0).percent;
                let row = SolveRow {
                    instance: p.name.clone(),
                    hash: p.hash.clone(),
                    n: p.inst.demands,
                    periods: p.inst.periods,
                    scenarios: p.inst.scenarios,
                    seed: p.inst.seed,
                    variant: v.label().to_string(),
                    lb: report.best_lb,
                    ub: report.best_ub,
                    lp: p.lp,
                    lb0: p.lb0,
                    gap_lb_ub: gap_lu,
                    gap_lp_lb: gap_pl,
                    iters: report.iterations,
                    stop: serde_json::to_value(report.stop)?.as_str().unwrap_or_default().to_string(),
                    secs: report.seconds,
                };
                let record = SolveRecord {
                    instance: p.name.clone(),
                    hash: p.hash.clone(),
                    variant: v,
                    lp: p.lp,
                    lb0: p.lb0,
                    gap_lb_ub: gap_lu,
                    gap_lp_lb: gap_pl,
                    report,
                };
                Ok((row, record))
            })
            .collect::<Result<_>>()?;
        Ok(runs.into_iter().unzip::<_, _, Vec<_>, Vec<_>>())
    })?;
    match args.format {
        Format::Json => write_json(args.out.as_deref(), &records),
        _ => append_csv(args.out.as_deref(), &rows),
    }
}

#[derive(Serialize)]
struct ExactRecord {
    instance: String,
    hash: String,
    #[serde(flatten)]
    result: ExactResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<ValueOfModeling>,
}

pub fn exact(args: &ExactArgs) -> Result<()> {
    format_error(args.format, &[Format::Csv, Format::Json])?;
    if args.instances.is_empty() {
        bail!("no instance given");
    }
    if !(args.time_limit.is_finite() && args.time_limit > 0.0) {
        bail!("--time-limit must be a positive number of seconds");
    }
    let opts = ExactOptions {
        budget: args.budget,
        time_limit: Some(Duration::from_secs_f64(args.time_limit)),
        restriction: Restriction::None,
    };
    let pool = pool(args.jobs)?;
    let records: Vec<(ExactRecord, ExactRow)> = pool.install(|| {
        args.instances
            .par_iter()
            .map(|path| {
                let start = Instant::now();
                let inst = load(path)?;
                let name = instance_name(path);
                let result = solve_exact_with(&inst, &opts).with_context(|| name.clone())?;
                let value = if args.opt_only {
                    None
                } else {
                    Some(value_of_modeling_with(&inst, &opts).with_context(|| name.clone())?)
                };
                let row = ExactRow {
                    instance: name.clone(),
                    hash: inst.content_hash(),
                    n: inst.demands,
                    periods: inst.periods,
                    scenarios: inst.scenarios,
                    opt: result.opt,
                    enumerated: result.enumerated,
                    ws: value.as_ref().map(|v| v.ws),
                    evpi: value.as_ref().map(|v| v.evpi),
                    one_ps: value.as_ref().map(|v| v.one_ps),
                    vms: value.as_ref().map(|v| v.vms),
                    sp_mps: value.as_ref().map(|v| v.sp),
                    secs: start.elapsed().as_secs_f64(),
                };
                let record = ExactRecord {
                    instance: name,
                    hash: row.hash.clone(),
                    result,
                    value,
                };
                Ok((record, row))
            })
            .collect::<Result<_>>()
    })?;
    let (records, rows): (Vec<_>, Vec<_>) = records.into_iter().unzip();
    match args.format {
        Format::Json if records.len() == 1 => write_json(args.out.as_deref(), &records[0]),
        Format::Json => write_json(args.out.as_deref(), &records),
        _ => append_csv(args.out.as_deref(), &rows),
    }
}

pub fn export(args: &ExportArgs) -> Result<()> {
    format_error(args.format, &[Format::Mps, Format::Lp])?;
    let inst = load(&args.instance)?;
    let linking = match args.linking.to_ascii_lowercase().as_str() {
        "ww" => Linking::Ww,
        "opt2" => Linking::Opt2,
        "opt3" => Linking::Opt3,
        other => bail!("unknown linking {other:?} (expected ww, opt2 or opt3)"),
    };
    let formulation = if args.operating { Formulation::Operating } else { Formulation::Cumulative };
    let model = build_milp(&inst, ModelVariant { linking, formulation }, false);
    let name = instance_name(&args.instance);
    let text = match args.format {
        Format::Mps => to_mps(&model, &name),
        _ => to_lp_format(&model, &name),
    };
    write_text(args.out.as_deref(), &text)
}

/// First stage, and the second stage when present, from a solution document.
fn parse_solution(value: serde_json::Value) -> Result<(FirstStageSolution, Option<SecondStageSolution>)> {
    let serde_json::Value::Object(mut map) = value else {
        bail!("solution must be a JSON object");
    };
    let second = match map.remove("second_stage") {
        Some(v) => Some(serde_json::from_value(v).context("second_stage")?),
        None => None,
    };
    let first = match map.remove("first_stage") {
        Some(v) => serde_json::from_value(v).context("first_stage")?,
        None => serde_json::from_value(serde_json::Value::Object(map)).context("expected z and zp")?,
    };
    Ok((first, second))
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let inst = load(&args.instance)?;
    let text = fs::read_to_string(&args.solution).with_context(|| format!("reading {}", args.solution.display()))?;
    let (fs_, given) = parse_solution(serde_json::from_str(&text)?)?;
    let (recourse, ss) = match given {
        Some(ss) => ("given", ss),
        None => ("optimal", evaluate_first_stage(&inst, &fs_)?.1),
    };
    let evaluation = evaluate_solution(&inst, &fs_, &ss)?;
    let doc = serde_json::json!({
        "hash": inst.content_hash(),
        "recourse": recourse,
        "evaluation": evaluation,
        "operating": fs_.operating(&inst),
    });
    write_json(args.out.as_deref(), &doc)
}

pub fn reduce(args: &ReduceArgs) -> Result<()> {
    let text = fs::read_to_string(&args.case).with_context(|| format!("reading {}", args.case.display()))?;
    let case: SpecialCase = serde_json::from_str(&text).context("parsing case file")?;
    let r = reduce_case(&case)?;
    let hash = r.instance.content_hash();
    let doc = match &args.out {
        Some(path) => {
            write_text(Some(path), &to_canonical_json(&r.instance))?;
            serde_json::json!({ "kind": case.model.kind(), "offset": r.offset, "big_m": r.big_m, "hash": hash, "instance": path })
        }
        None => {
            let inst: serde_json::Value = serde_json::from_str(&to_canonical_json(&r.instance))?;
            serde_json::json!({ "kind": case.model.kind(), "offset": r.offset, "big_m": r.big_m, "hash": hash, "instance": inst })
        }
    };
    let mut line = serde_json::to_string(&doc)?;
    line.push('\n');
    write_text(None, &line)
}

pub fn report(args: &ReportArgs) -> Result<()> {
    format_error(args.format, &[Format::Csv, Format::Json])?;
    let mut rows: Vec<SolveRow> = Vec::new();
    for path in &args.inputs {
        let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        for (k, row) in reader.deserialize().enumerate() {
            rows.push(row.with_context(|| format!("{} record {}", path.display(), k + 1))?);
        }
    }
    let mut hashes: BTreeMap<&str, &str> = BTreeMap::new();
    for row in &rows {
        if let Some(prev) = hashes.insert(&row.instance, &row.hash) {
            if prev != row.hash {
                bail!("instance {} appears with two different content hashes", row.instance);
            }
        }
    }
    let mut groups: BTreeMap<(usize, usize, usize, &str), Vec<&SolveRow>> = BTreeMap::new();
    for row in &rows {
        groups.entry((row.n, row.periods, row.scenarios, &row.variant)).or_default().push(row);
    }
    let summary: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((n, periods, scenarios, variant), g)| {
            let mean = |f: fn(&SolveRow) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / g.len() as f64;
            SummaryRow {
                n,
                periods,
                scenarios,
                variant: variant.to_string(),
                runs: g.len(),
                instances: g.iter().map(|r| &r.hash).collect::<BTreeSet<_>>().len(),
                lb: mean(|r| r.lb),
                ub: mean(|r| r.ub),
                gap_lb_ub: mean(|r| r.gap_lb_ub),
                gap_lp_lb: mean(|r| r.gap_lp_lb),
                iters: mean(|r| r.iters as f64),
                secs: mean(|r| r.secs),
            }
        })
        .collect();
    match args.format {
        Format::Json => write_json(args.out.as_deref(), &summary),
        _ => {
            if let Some(p) = &args.out {
                if p.exists() {
                    fs::remove_file(p)?;
                }
            }
            append_csv(args.out.as_deref(), &summary)
        }
    }
}
