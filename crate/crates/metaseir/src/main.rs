//! Command-line entry point: estimation, simulation, forecasting, and
//! evaluation subcommands over a shared TOML configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::{Datelike, Days, NaiveDate};
use clap::{Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;

use metaseir::config::RunConfig;
use metaseir::dynamics::{
    effective_reproduction_number, next_generation_matrix, simulate, ReinitContext,
    SimulationConfig,
};
use metaseir::error::Error;
use metaseir::estimation::{
    build_covariates, derive_seed, estimate_day, EstimateRecord, Family, ModelVariant,
};
use metaseir::forecast::{
    delay_scan, forecast_mobility, make_forecast, national_validation_init, rmse, spearman,
    DailyEstimate, Forecast, REPORT_DAYS,
};
use metaseir::ingest::{
    effective_mobility, load_cases, load_mobility_baseline, load_prevalence, load_reductions,
    load_regions, CaseSeries, MobilityMatrix, MobilityReductionSeries, PrevalenceSeries,
    RegionTable,
};
use metaseir::state_init::{initialize_state, tested_fraction_or_one, EpidemicParams};

#[derive(Parser)]
#[command(
    name = "metaseir",
    about = "Metapopulation SEIR transmission-rate estimation and forecasting"
)]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the window start date (YYYY-MM-DD).
    #[arg(long, global = true)]
    from: Option<NaiveDate>,
    /// Override the window end date (YYYY-MM-DD).
    #[arg(long, global = true)]
    to: Option<NaiveDate>,
    /// Override the observation model family.
    #[arg(long, global = true, value_parser = ["poisson", "negbin"])]
    model: Option<String>,
    /// Fit only the without-mobility variant.
    #[arg(long, global = true)]
    no_mobility: bool,
    /// Override the number of bootstrap replicas.
    #[arg(long, global = true)]
    bootstrap: Option<usize>,
    /// Override the RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct the compartments on the window start date.
    InitState,
    /// Estimate daily transmission rates with bootstrap intervals.
    Estimate,
    /// Simulate the fitted model over the window with monthly re-initialization.
    Simulate,
    /// Issue 14-day-ahead regional forecasts for each feasible day.
    Forecast,
    /// Emit the two national validation series and the delay scan.
    Validate,
    /// Score forecasts against realized reported cases.
    Eval,
    /// Compare with- and without-mobility fits by AIC.
    Compare,
}

struct Inputs {
    regions: RegionTable,
    cases: CaseSeries,
    baseline: MobilityMatrix,
    reductions: MobilityReductionSeries,
    prevalence: PrevalenceSeries,
}

impl Inputs {
    fn load(cfg: &RunConfig) -> anyhow::Result<Self> {
        let regions = load_regions(&cfg.regions)?;
        let cases = load_cases(&cfg.cases, &regions)?;
        let baseline = load_mobility_baseline(&cfg.mobility, &regions)?;
        let reductions = load_reductions(&cfg.reductions, &regions)?;
        let prevalence = load_prevalence(&cfg.prevalence)?;
        Ok(Self {
            regions,
            cases,
            baseline,
            reductions,
            prevalence,
        })
    }

    /// Effective mobility on `date`, carrying the last observed reduction
    /// factor forward past the end of the reduction series.
    fn mobility_on(&self, date: NaiveDate) -> metaseir::Result<MobilityMatrix> {
        let clamped = match self.reductions.last_date() {
            Some(last) if date > last => last,
            _ => date,
        };
        effective_mobility(&self.baseline, &self.reductions, &self.regions, clamped)
    }

    /// Tested fraction on `date`, defaulting to 1 before any cases exist.
    fn tested_fraction_on(&self, date: NaiveDate, omega: f64) -> metaseir::Result<f64> {
        tested_fraction_or_one(&self.cases, &self.prevalence, date, omega)
    }
}

fn main() {
    env_logger::init();
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("METASEIR_THREADS") {
        let n: usize = threads
            .parse()
            .with_context(|| format!("METASEIR_THREADS={threads} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("thread pool already initialized")?;
    }
    let config_path = cli
        .config
        .as_deref()
        .context("--config is required")?;
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(d) = cli.from {
        cfg.start = d;
    }
    if let Some(d) = cli.to {
        cfg.end = d;
    }
    if let Some(m) = cli.model {
        cfg.model = m;
    }
    if cli.no_mobility {
        cfg.mobility_term = false;
    }
    if let Some(b) = cli.bootstrap {
        cfg.bootstrap = b;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating output directory {}", cfg.out.display()))?;

    match cli.command {
        Command::InitState => cmd_init_state(&cfg),
        Command::Estimate => cmd_estimate(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Forecast => cmd_forecast(&cfg),
        Command::Validate => cmd_validate(&cfg),
        Command::Eval => cmd_eval(&cfg),
        Command::Compare => cmd_compare(&cfg),
    }
}

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

fn cmd_init_state(cfg: &RunConfig) -> anyhow::Result<()> {
    let inputs = Inputs::load(cfg)?;
    let state = initialize_state(
        &inputs.cases,
        &inputs.prevalence,
        &inputs.regions,
        cfg.start,
        cfg.nu,
        cfg.omega,
    )?;
    let ids = inputs.regions.leaf_ids();
    let rows = (0..state.region_count()).map(|i| {
        vec![
            state.date.to_string(),
            ids[i].to_string(),
            fmt(state.s[i]),
            fmt(state.e[i]),
            fmt(state.i_t[i]),
            fmt(state.i_u[i]),
            fmt(state.r_t[i]),
            fmt(state.r_u[i]),
        ]
    });
    write_csv(
        &cfg.out.join("state.csv"),
        &["date", "region_id", "S", "E", "I_T", "I_U", "R_T", "R_U"],
        rows,
    )?;
    info!("state.csv written for {}", state.date);
    Ok(())
}

fn family_index(f: Family) -> u64 {
    match f {
        Family::Poisson => 0,
        Family::NegBin => 1,
    }
}

fn cmd_estimate(cfg: &RunConfig) -> anyhow::Result<()> {
    let inputs = Inputs::load(cfg)?;
    let variants = cfg.variants()?;
    let populations = inputs.regions.leaf_populations();
    let total_population = inputs.regions.total_population();
    let dates: Vec<NaiveDate> = {
        let mut v = Vec::new();
        let mut d = cfg.start;
        while d <= cfg.end {
            v.push(d);
            d = d + Days::new(1);
        }
        v
    };
    let records: Vec<metaseir::Result<Vec<EstimateRecord>>> = dates
        .par_iter()
        .map(|&date| {
            let prev = initialize_state(
                &inputs.cases,
                &inputs.prevalence,
                &inputs.regions,
                date,
                cfg.nu,
                cfg.omega,
            )?;
            let next = initialize_state(
                &inputs.cases,
                &inputs.prevalence,
                &inputs.regions,
                date + Days::new(1),
                cfg.nu,
                cfg.omega,
            )?;
            let mobility = inputs.mobility_on(date)?;
            let cov = build_covariates(&prev, &next, &mobility, &populations);
            let total_mobility = mobility.total();
            variants
                .iter()
                .map(|&variant| {
                    let seed = derive_seed(
                        cfg.seed,
                        &[
                            date.num_days_from_ce() as u64,
                            family_index(variant.family),
                            variant.with_mobility as u64,
                        ],
                    );
                    estimate_day(
                        date,
                        &cov,
                        variant,
                        total_mobility,
                        total_population,
                        cfg.bootstrap,
                        seed,
                    )
                })
                .collect()
        })
        .collect();

    let mut estimate_rows = Vec::new();
    let mut replica_rows = Vec::new();
    for day in records {
        for rec in day? {
            let model = rec.variant.name();
            estimate_rows.push(vec![
                rec.date.to_string(),
                model.clone(),
                fmt(rec.beta_loc),
                fmt(rec.beta_mob),
                rec.dispersion.map(fmt).unwrap_or_default(),
                fmt(rec.loglik),
                fmt(rec.aic),
                fmt(rec.bootstrap.ci_beta_loc.0),
                fmt(rec.bootstrap.ci_beta_loc.1),
                fmt(rec.bootstrap.ci_beta_mob.0),
                fmt(rec.bootstrap.ci_beta_mob.1),
                fmt(rec.p_local),
                fmt(rec.eps_c),
            ]);
            for (idx, rep) in rec.bootstrap.replicas.iter().enumerate() {
                replica_rows.push(vec![
                    rec.date.to_string(),
                    model.clone(),
                    idx.to_string(),
                    fmt(rep.beta_loc),
                    fmt(rep.beta_mob),
                    rep.dispersion.map(fmt).unwrap_or_default(),
                ]);
            }
        }
    }
    write_csv(
        &cfg.out.join("estimates.csv"),
        &[
            "date",
            "model",
            "beta_loc",
            "beta_mob",
            "r",
            "loglik",
            "aic",
            "beta_loc_lo",
            "beta_loc_hi",
            "beta_mob_lo",
            "beta_mob_hi",
            "p_local",
            "eps_c",
        ],
        estimate_rows,
    )?;
    write_csv(
        &cfg.out.join("replicas.csv"),
        &["date", "model", "replica", "beta_loc", "beta_mob", "r"],
        replica_rows,
    )?;
    info!("estimates.csv and replicas.csv written");
    Ok(())
}

/// Point estimates read back from estimates.csv for one model name.
struct StoredEstimates {
    /// date -> (beta_loc, beta_mob, dispersion)
    points: BTreeMap<NaiveDate, (f64, f64, Option<f64>)>,
}

fn read_estimates(path: &Path, model: &str) -> anyhow::Result<StoredEstimates> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}; run `estimate` first", path.display()))?;
    let mut points = BTreeMap::new();
    for row in rdr.deserialize::<BTreeMap<String, String>>() {
        let row = row?;
        if row.get("model").map(String::as_str) != Some(model) {
            continue;
        }
        let date: NaiveDate = row["date"].parse()?;
        let beta_loc: f64 = row["beta_loc"].parse()?;
        let beta_mob: f64 = row["beta_mob"].parse()?;
        let r = match row["r"].as_str() {
            "" => None,
            s => Some(s.parse::<f64>()?),
        };
        points.insert(date, (beta_loc, beta_mob, r));
    }
    if points.is_empty() {
        bail!("{} has no rows for model {model}", path.display());
    }
    Ok(StoredEstimates { points })
}

fn read_replicas(
    path: &Path,
    model: &str,
) -> anyhow::Result<BTreeMap<NaiveDate, Vec<(f64, f64)>>> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}; run `estimate` first", path.display()))?;
    let mut out: BTreeMap<NaiveDate, Vec<(f64, f64)>> = BTreeMap::new();
    for row in rdr.deserialize::<BTreeMap<String, String>>() {
        let row = row?;
        if row.get("model").map(String::as_str) != Some(model) {
            continue;
        }
        let date: NaiveDate = row["date"].parse()?;
        out.entry(date)
            .or_default()
            .push((row["beta_loc"].parse()?, row["beta_mob"].parse()?));
    }
    Ok(out)
}

/// First days of months inside `(start, end]`.
fn month_starts(start: NaiveDate, end: NaiveDate) -> BTreeSet<NaiveDate> {
    let mut set = BTreeSet::new();
    let mut d = start + Days::new(1);
    while d <= end {
        if d.day() == 1 {
            set.insert(d);
        }
        d = d + Days::new(1);
    }
    set
}

/// Runs the fitted model over `[start, end]` with monthly
/// re-initialization, returning the trajectory and the per-day effective
/// reproduction numbers.
fn simulate_window(
    cfg: &RunConfig,
    inputs: &Inputs,
    stored: &StoredEstimates,
) -> anyhow::Result<(metaseir::dynamics::Trajectory, Vec<f64>)> {
    let horizon = (cfg.end - cfg.start).num_days() as usize;
    if horizon == 0 {
        bail!("window has no simulated days");
    }
    let mut params = Vec::with_capacity(horizon);
    let mut mobility = Vec::with_capacity(horizon);
    for d in 0..horizon {
        let date = cfg.start + Days::new(d as u64);
        let &(beta_loc, beta_mob, r) = stored
            .points
            .get(&date)
            .ok_or(Error::MissingEstimates(date))?;
        params.push(EpidemicParams {
            latent_period: cfg.nu,
            infectious_period: cfg.omega,
            tested_fraction: inputs.tested_fraction_on(date, cfg.omega)?,
            beta_loc,
            beta_mob,
            dispersion: r.unwrap_or(1.0),
        });
        mobility.push(inputs.mobility_on(date)?);
    }
    let initial = initialize_state(
        &inputs.cases,
        &inputs.prevalence,
        &inputs.regions,
        cfg.start,
        cfg.nu,
        cfg.omega,
    )?;
    let sim_cfg = SimulationConfig {
        horizon,
        params: &params,
        mobility: mobility.iter().collect(),
        reinit_dates: month_starts(cfg.start, cfg.end),
    };
    let ctx = ReinitContext {
        cases: &inputs.cases,
        regions: &inputs.regions,
        nu: cfg.nu,
        omega: cfg.omega,
    };
    let traj = simulate(&initial, &sim_cfg, Some(&ctx))?;
    let populations = inputs.regions.leaf_populations();
    let mut r_eff = Vec::with_capacity(horizon + 1);
    for (day, state) in traj.states.iter().enumerate() {
        let p = &params[day.min(horizon - 1)];
        let m = &mobility[day.min(horizon - 1)];
        let k = next_generation_matrix(state, p, m, &populations);
        r_eff.push(effective_reproduction_number(&k)?);
    }
    Ok((traj, r_eff))
}

fn cmd_simulate(cfg: &RunConfig) -> anyhow::Result<()> {
    let inputs = Inputs::load(cfg)?;
    let model = cfg.primary_variant()?.name();
    let stored = read_estimates(&cfg.out.join("estimates.csv"), &model)?;
    let (traj, r_eff) = simulate_window(cfg, &inputs, &stored)?;
    let ids = inputs.regions.leaf_ids();
    let n = ids.len();
    let mut rows = Vec::new();
    for (day, state) in traj.states.iter().enumerate() {
        for i in 0..n {
            // reported flow attributed to the day it is observed
            let reported = if day == 0 {
                0.0
            } else {
                traj.new_reported[day - 1][i]
            };
            rows.push(vec![
                state.date.to_string(),
                ids[i].to_string(),
                fmt(state.s[i]),
                fmt(state.e[i]),
                fmt(state.i_t[i]),
                fmt(state.i_u[i]),
                fmt(state.r_t[i]),
                fmt(state.r_u[i]),
                fmt(reported),
            ]);
        }
    }
    write_csv(
        &cfg.out.join("trajectory.csv"),
        &[
            "date",
            "region_id",
            "S",
            "E",
            "I_T",
            "I_U",
            "R_T",
            "R_U",
            "new_reported",
        ],
        rows,
    )?;
    let national = traj.national_new_reported();
    let rows = traj.states.iter().enumerate().map(|(day, state)| {
        let total = if day == 0 { 0.0 } else { national[day - 1] };
        vec![state.date.to_string(), fmt(total), fmt(r_eff[day])]
    });
    write_csv(
        &cfg.out.join("national.csv"),
        &["date", "total_new_reported", "R_eff"],
        rows,
    )?;
    info!("trajectory.csv and national.csv written");
    Ok(())
}

fn cmd_forecast(cfg: &RunConfig) -> anyhow::Result<()> {
    let inputs = Inputs::load(cfg)?;
    let model = cfg.primary_variant()?.name();
    let stored = read_estimates(&cfg.out.join("estimates.csv"), &model)?;
    let replicas = read_replicas(&cfg.out.join("replicas.csv"), &model)?;
    let estimates: BTreeMap<NaiveDate, DailyEstimate> = stored
        .points
        .iter()
        .map(|(&date, &(beta_loc, beta_mob, _))| {
            (
                date,
                DailyEstimate {
                    beta_loc,
                    beta_mob,
                    replicas: replicas.get(&date).cloned().unwrap_or_default(),
                },
            )
        })
        .collect();

    let mut issue_dates = Vec::new();
    let mut d = cfg.start;
    while d <= cfg.end {
        let init = d - Days::new(7);
        let window_ok = (1..=7).all(|k| estimates.contains_key(&(init - Days::new(k))));
        let lookahead_ok = init + Days::new(7) <= inputs.cases.end();
        if window_ok && lookahead_ok {
            issue_dates.push(d);
        }
        d = d + Days::new(1);
    }
    if issue_dates.is_empty() {
        bail!(
            "no issue date in [{}, {}] has the required 7 days of estimates and case coverage",
            cfg.start,
            cfg.end
        );
    }
    info!("issuing forecasts for {} dates", issue_dates.len());

    let forecasts: Vec<Forecast> = issue_dates
        .iter()
        .map(|&issue| {
            let mobility = forecast_mobility(
                &inputs.baseline,
                &inputs.reductions,
                &inputs.regions,
                issue - Days::new(7),
            )?;
            make_forecast(
                &inputs.cases,
                &inputs.prevalence,
                &inputs.regions,
                &mobility,
                &estimates,
                issue,
                cfg.nu,
                cfg.omega,
            )
        })
        .collect::<metaseir::Result<_>>()?;

    let ids = inputs.regions.leaf_ids();
    let mut rows = Vec::new();
    for f in &forecasts {
        for (i, id) in ids.iter().enumerate() {
            rows.push(vec![
                f.issue_date.to_string(),
                id.to_string(),
                fmt(f.point[i]),
                fmt(f.lo95[i]),
                fmt(f.hi95[i]),
                f.fractions
                    .as_ref()
                    .map(|fr| fmt(fr[i]))
                    .unwrap_or_default(),
            ]);
        }
    }
    write_csv(
        &cfg.out.join("forecast.csv"),
        &["issue_date", "region_id", "point", "lo95", "hi95", "fraction"],
        rows,
    )?;
    info!("forecast.csv written");
    Ok(())
}

fn cmd_validate(cfg: &RunConfig) -> anyhow::Result<()> {
    let inputs = Inputs::load(cfg)?;
    // the initialization method needs a 7-day look-ahead of case data
    let init_end = cfg
        .end
        .min(inputs.cases.end() - Days::new(7));
    if init_end < cfg.start {
        bail!("case data ends too early for the validation window");
    }
    let mut a_series = BTreeMap::new();
    let mut d = cfg.start;
    while d <= init_end {
        a_series.insert(d, inputs.tested_fraction_on(d, cfg.omega)?);
        d = d + Days::new(1);
    }
    let init_series =
        national_validation_init(&inputs.cases, cfg.nu, &a_series, (cfg.start, init_end))?;

    let model = cfg.primary_variant()?.name();
    let stored = read_estimates(&cfg.out.join("estimates.csv"), &model)?;
    let (traj, _) = simulate_window(cfg, &inputs, &stored)?;
    let sim_national = traj.national_new_reported();

    let mut rows = Vec::new();
    for (date, value) in &init_series {
        rows.push(vec![date.to_string(), "initialization".into(), fmt(*value)]);
    }
    for (day, value) in sim_national.iter().enumerate() {
        let date = cfg.start + Days::new(day as u64 + 1);
        rows.push(vec![date.to_string(), "simulation".into(), fmt(*value)]);
    }
    write_csv(
        &cfg.out.join("validation.csv"),
        &["date", "method", "value"],
        rows,
    )?;

    // delay scan: initialization-based estimates against reported cases
    let estimates_series: Vec<f64> = init_series.iter().map(|(_, v)| *v).collect();
    let mut actual = Vec::new();
    let mut d = cfg.start;
    while d <= inputs.cases.end() {
        let total: u64 = (0..inputs.regions.leaf_count())
            .map(|i| inputs.cases.count(i, d).unwrap_or(0))
            .sum();
        actual.push(total as f64);
        d = d + Days::new(1);
    }
    match delay_scan(&estimates_series, &actual, cfg.max_shift) {
        Ok(scan) => {
            let rows = scan
                .correlations
                .iter()
                .enumerate()
                .map(|(s, c)| vec![s.to_string(), fmt(*c)]);
            write_csv(&cfg.out.join("delay.csv"), &["shift", "correlation"], rows)?;
            info!("strongest correlation at a delay of {} days", scan.best_shift);
        }
        Err(e) => warn!("delay scan skipped: {e}"),
    }
    info!("validation.csv written");
    Ok(())
}

/// Realized reported cases per region over the 14 days from `issue`.
// reports dated t reflect flows during the step from t-1 to t, so a
// forecast issued on `issue` covers report dates issue+1 ..= issue+14
fn realized(cases: &CaseSeries, n: usize, issue: NaiveDate) -> Option<Vec<f64>> {
    let mut out = vec![0.0; n];
    for d in 1..=REPORT_DAYS as u64 {
        let date = issue + Days::new(d);
        for (i, o) in out.iter_mut().enumerate() {
            *o += cases.count(i, date)? as f64;
        }
    }
    Some(out)
}

fn cmd_eval(cfg: &RunConfig) -> anyhow::Result<()> {
    let inputs = Inputs::load(cfg)?;
    let model = cfg.primary_variant()?.name();
    let path = cfg.out.join("forecast.csv");
    let mut rdr = csv::Reader::from_path(&path)
        .with_context(|| format!("reading {}; run `forecast` first", path.display()))?;
    let mut by_issue: BTreeMap<NaiveDate, BTreeMap<String, f64>> = BTreeMap::new();
    for row in rdr.deserialize::<BTreeMap<String, String>>() {
        let row = row?;
        let issue: NaiveDate = row["issue_date"].parse()?;
        by_issue
            .entry(issue)
            .or_default()
            .insert(row["region_id"].clone(), row["point"].parse()?);
    }
    if by_issue.is_empty() {
        bail!("{} is empty", path.display());
    }
    let ids = inputs.regions.leaf_ids();
    let mut rows = Vec::new();
    for (issue, points) in by_issue {
        let Some(actual) = realized(&inputs.cases, ids.len(), issue) else {
            warn!("skipping {issue}: case data does not cover the 14-day horizon");
            continue;
        };
        let forecast: Vec<f64> = ids
            .iter()
            .map(|id| points.get(*id).copied().context("region missing in forecast.csv"))
            .collect::<anyhow::Result<_>>()?;
        let r = rmse(&forecast, &actual)?;
        let s = match spearman(&forecast, &actual) {
            Ok(s) => s,
            Err(Error::DegenerateRanks) => {
                warn!("skipping Spearman for {issue}: constant values");
                f64::NAN
            }
            Err(e) => return Err(e.into()),
        };
        rows.push(vec![issue.to_string(), model.clone(), fmt(r), fmt(s)]);
    }
    write_csv(
        &cfg.out.join("metrics.csv"),
        &["issue_date", "model", "rmse", "spearman"],
        rows,
    )?;
    info!("metrics.csv written");
    Ok(())
}

fn cmd_compare(cfg: &RunConfig) -> anyhow::Result<()> {
    let family = cfg.family()?;
    let with = ModelVariant {
        family,
        with_mobility: true,
    };
    let without = ModelVariant {
        family,
        with_mobility: false,
    };
    let path = cfg.out.join("estimates.csv");
    let with_rows = read_estimates(&path, &with.name())
        .context("compare needs estimates for both model variants")?;
    let without_rows = read_estimates(&path, &without.name())?;

    let mut rdr = csv::Reader::from_path(&path)?;
    let mut aic: BTreeMap<(NaiveDate, String), f64> = BTreeMap::new();
    for row in rdr.deserialize::<BTreeMap<String, String>>() {
        let row = row?;
        aic.insert(
            (row["date"].parse()?, row["model"].clone()),
            row["aic"].parse()?,
        );
    }
    let mut rows = Vec::new();
    for &date in with_rows.points.keys() {
        if !without_rows.points.contains_key(&date) {
            continue;
        }
        let a_with = aic[&(date, with.name())];
        let a_without = aic[&(date, without.name())];
        rows.push(vec![
            date.to_string(),
            family.name().to_string(),
            fmt(a_with),
            fmt(a_without),
            fmt(a_without - a_with),
        ]);
    }
    if rows.is_empty() {
        bail!("no dates have both with- and without-mobility fits");
    }
    write_csv(
        &cfg.out.join("compare.csv"),
        &["date", "model", "aic_with", "aic_without", "aic_diff"],
        rows,
    )?;
    info!("compare.csv written");
    Ok(())
}
