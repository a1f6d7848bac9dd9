use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{info, warn};
use macrofc::eval::{
    build_eval_table, origin_design, read_records, run_poos, select_models, standard_windows, write_forecast_series, write_records,
    ForecastRecord, PoosData, BENCHMARK,
};
use macrofc::factors::{
    extract_factors, marginal_r2, pc_p2, recursive_factor_count, write_factor_table, write_mr2_long,
};
use macrofc::panel::{
    balance_panel_em, load_manifest, load_panel, standardize, synth_ar_factor_panel, synth_dgp, synth_raw_panel,
    transform_panel, write_manifest_csv, write_panel_csv, EmOptions, Panel,
};
use macrofc::YearMonth;

use crate::config::RunConfig;
use crate::InputError;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| InputError(format!("cannot open {}: {e}", path.display())).into())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn load_raw(manifest: &Path, data: &Path) -> Result<Panel> {
    let meta = load_manifest(open(manifest)?)?;
    Ok(load_panel(&meta, open(data)?)?)
}

pub struct IngestArgs {
    pub manifest: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    pub em_factors: usize,
    pub dry_run: bool,
}

/// Transform and balance a raw panel.
pub fn ingest(a: &IngestArgs) -> Result<()> {
    let raw = load_raw(&a.manifest, &a.data)?;
    let tp = transform_panel(&raw)?;
    let (balanced, report) = if tp.is_balanced() {
        (tp, None)
    } else {
        let k = a.em_factors.min(tp.n_periods().min(tp.n_series()).saturating_sub(1)).max(1);
        let (b, r) = balance_panel_em(&tp, EmOptions { k, ..EmOptions::default() })?;
        (b, Some(r))
    };
    info!(
        "{} series, {} months ({} to {}), {} cells imputed",
        balanced.n_series(),
        balanced.n_periods(),
        balanced.dates[0],
        balanced.dates[balanced.n_periods() - 1],
        report.as_ref().map_or(0, |r| r.imputed_count)
    );
    if a.dry_run {
        return Ok(());
    }
    fs::create_dir_all(&a.out)?;
    write_panel_csv(&balanced, create(&a.out, "panel.csv")?)?;
    write_manifest_csv(&balanced.meta, create(&a.out, "manifest.csv")?)?;
    let mut w = create(&a.out, "balance_report.json")?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    w.flush()?;
    Ok(())
}

pub struct FactorsArgs {
    pub panel: PathBuf,
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub kmax: usize,
    pub k: Option<usize>,
    pub top: usize,
    pub recursive_start: Option<YearMonth>,
}

/// Factor count, marginal R² tables and the recursive factor count.
pub fn factors(a: &FactorsArgs) -> Result<()> {
    let p = load_raw(&a.manifest, &a.panel)?;
    if !p.is_balanced() {
        return Err(InputError("factor diagnostics need a balanced panel; run ingest first".into()).into());
    }
    let (std, _, _) = standardize(&p)?;
    let x = &std.values;
    let cap = x.nrows().min(x.ncols()) / 2;
    if a.kmax > cap {
        warn!("kmax {} capped at {cap}", a.kmax);
    }
    let sel = pc_p2(x, a.kmax.min(cap))?;
    let k = a.k.unwrap_or(sel.k);
    let fm = extract_factors(x, k)?;
    let diag = marginal_r2(x, &fm)?;
    fs::create_dir_all(&a.out)?;
    write_factor_table(&diag, &p.meta, a.top, create(&a.out, "factor_table.csv")?)?;
    write_mr2_long(&diag, &p.meta, create(&a.out, "mr2_long.csv")?)?;
    let mut w = create(&a.out, "factor_count.json")?;
    serde_json::to_writer_pretty(
        &mut w,
        &serde_json::json!({
            "selected_k": sel.k,
            "reported_k": k,
            "residual_variance": sel.residual_variance,
            "criterion": sel.criterion,
            "avg_mr2": diag.avg_mr2,
            "total_r2": diag.total_r2,
        }),
    )?;
    w.flush()?;
    if let Some(start) = a.recursive_start {
        let counts = recursive_factor_count(&p, start, a.kmax)?;
        let mut w = create(&a.out, "recursive_count.csv")?;
        writeln!(w, "date,k,total_r2")?;
        for c in &counts {
            writeln!(w, "{},{},{}", c.date, c.k, c.total_r2)?;
        }
        w.flush()?;
    }
    println!("PC_p2 selects k = {}", sel.k);
    Ok(())
}

pub enum SynthKind {
    Backtest { targets: usize },
    Factor { r: usize, snr: f64 },
}

pub struct SynthArgs {
    pub out: PathBuf,
    pub t: usize,
    pub n: usize,
    pub seed: u64,
    pub start: YearMonth,
    pub kind: SynthKind,
}

/// Write a synthetic raw panel as `manifest.csv` plus `data.csv`.
pub fn synth(a: &SynthArgs) -> Result<()> {
    let raw = match a.kind {
        SynthKind::Backtest { targets } => synth_ar_factor_panel(a.t, a.n, targets, a.start, a.seed)?,
        SynthKind::Factor { r, snr } => {
            let s = synth_dgp(a.t, a.n, r, snr, a.seed)?;
            let mut raw = synth_raw_panel(&s)?;
            let shift = a.start.months_since(raw.dates[0]);
            for d in &mut raw.dates {
                *d = d.add_months(shift);
            }
            for m in &mut raw.meta {
                m.start_date = a.start;
            }
            raw
        }
    };
    fs::create_dir_all(&a.out)?;
    write_manifest_csv(&raw.meta, create(&a.out, "manifest.csv")?)?;
    write_panel_csv(&raw, create(&a.out, "data.csv")?)?;
    Ok(())
}

pub struct RunArgs {
    pub config: PathBuf,
    pub models: Option<Vec<String>>,
    pub retune_every: Option<usize>,
    pub threads: Option<usize>,
    pub dump_design: Option<String>,
    pub dry_run: bool,
}

fn write_failures(records: &[ForecastRecord], w: impl Write) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "target,model,h,origin,error")?;
    for r in records {
        if let Some(e) = &r.error {
            writeln!(w, "{},\"{}\",{},{},\"{}\"", r.target, r.model, r.h, r.origin, e.replace('"', "'"))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Run the backtest described by a config file.
pub fn run(a: &RunArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(n) = a.retune_every {
        cfg.retune_every = n;
    }
    if let Some(n) = a.threads {
        cfg.threads = n;
    }
    let plan = cfg.plan(cfg.model_specs(a.models.as_deref())?)?;
    let raw = load_raw(&cfg.manifest, &cfg.data)?;
    let em = EmOptions {
        k: cfg.em_factors,
        ..EmOptions::default()
    };
    let (mut data, report) = PoosData::from_raw(&raw, &cfg.targets, &cfg.use_log, em)?;
    if let Some(r) = report {
        info!("balanced the transformed panel by EM: {} cells imputed", r.imputed_count);
    }
    data.exclude_from_x_block(&cfg.exclude_from_x)?;
    if data.date_index(plan.poos_start).is_none() {
        return Err(InputError(format!("POOS start {} outside the sample", plan.poos_start)).into());
    }
    info!(
        "{} models x {} targets x {} horizons, origins from {}",
        plan.models.len(),
        plan.targets.len(),
        plan.horizons.len(),
        plan.poos_start
    );
    if a.dry_run {
        return Ok(());
    }
    fs::create_dir_all(&cfg.output_dir)?;
    if let Some(spec) = &a.dump_design {
        let parts: Vec<&str> = spec.rsplitn(3, '@').collect();
        let [origin, target, model] = parts[..] else {
            return Err(InputError(format!("--dump-design expects MODEL@TARGET@YYYY-MM, got {spec:?}")).into());
        };
        let origin: YearMonth = origin.parse()?;
        let spec = select_models(&[model]).ok_or_else(|| InputError(format!("unknown model {model:?}")))?;
        let dump_plan = cfg.plan(spec)?;
        let design = origin_design(&dump_plan, &data, target, model, origin)?;
        let name = format!("design_{}_{}_{}.csv", sanitize(model), sanitize(target), origin);
        design.write_csv(&data.dates, create(&cfg.output_dir, &name)?)?;
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build()?;
    let records = pool.install(|| run_poos(&plan, &data))?;
    write_records(&records, create(&cfg.output_dir, "records.csv")?)?;
    write_failures(&records, create(&cfg.output_dir, "failures.csv")?)?;
    let failed = records.iter().filter(|r| r.forecast.is_none()).count();
    println!(
        "{} records written to {} ({failed} failed)",
        records.len(),
        cfg.output_dir.join("records.csv").display()
    );
    Ok(())
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

pub struct ReportArgs {
    pub records: PathBuf,
    pub out: PathBuf,
    pub benchmark: Option<String>,
    pub series_from: YearMonth,
}

/// Relative-MSE tables for the standard windows plus plot-ready series.
pub fn report(a: &ReportArgs) -> Result<()> {
    let records = read_records(open(&a.records)?)?;
    let benchmark = a.benchmark.as_deref().unwrap_or(BENCHMARK);
    let table = build_eval_table(&records, &standard_windows(), benchmark)?;
    fs::create_dir_all(&a.out)?;
    let text = table.render_text();
    let mut w = create(&a.out, "tables.txt")?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    table.write_csv(create(&a.out, "tables.csv")?)?;
    table.write_json(create(&a.out, "tables.json")?)?;
    write_forecast_series(&records, a.series_from, create(&a.out, "forecast_series.csv")?)?;
    print!("{text}");
    Ok(())
}
