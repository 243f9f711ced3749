//! Fourteen-day-ahead regional forecasts with bootstrap scenario bands,
//! the initialization-based national validation series, and forecast
//! evaluation metrics (RMSE, Spearman rank correlation, delay-scan
//! Pearson correlation).

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Days, NaiveDate};
use rayon::prelude::*;

use crate::dynamics::{simulate, SimulationConfig, Trajectory};
use crate::error::{Error, Result};
use crate::ingest::{
    effective_mobility, CaseSeries, MobilityMatrix, MobilityReductionSeries, PrevalenceSeries,
    RegionTable,
};
use crate::state_init::{
    exposed_estimate, initialize_state, tested_fraction_or_one, EpidemicParams,
};

/// Days simulated per forecast: 7 warm-up plus the 14 reported.
pub const FORECAST_HORIZON: usize = 21;
/// Length of the reported forecast window.
pub const REPORT_DAYS: usize = 14;
/// The model is initialized this many days before the issue date.
pub const INIT_LAG: u64 = 7;
/// Transmission parameters are averaged over this many days ending the
/// day before the initialization date.
pub const PARAM_WINDOW: u64 = 7;

/// Per-day estimation output consumed by the forecaster: the point
/// transmission rates and one rate pair per bootstrap replica.
#[derive(Debug, Clone)]
pub struct DailyEstimate {
    pub beta_loc: f64,
    pub beta_mob: f64,
    pub replicas: Vec<(f64, f64)>,
}

/// A 14-day-ahead forecast issued on one date.
#[derive(Debug, Clone)]
pub struct Forecast {
    pub issue_date: NaiveDate,
    /// Per-region expected reported cases over `[issue, issue + 14)`.
    pub point: Vec<f64>,
    /// 2.5% scenario percentile per region.
    pub lo95: Vec<f64>,
    /// 97.5% scenario percentile per region.
    pub hi95: Vec<f64>,
    /// One row per bootstrap replica, one column per region.
    pub scenarios: Vec<Vec<f64>>,
    pub national_total: f64,
    /// Region shares of the national total; `None` when the national
    /// total is not positive.
    pub fractions: Option<Vec<f64>>,
}

/// Effective mobility matrices for the 21 simulated days starting at
/// `init_date`, carrying the last observed reduction factor forward past
/// the end of the reduction series.
pub fn forecast_mobility(
    baseline: &MobilityMatrix,
    reductions: &MobilityReductionSeries,
    regions: &RegionTable,
    init_date: NaiveDate,
) -> Result<Vec<MobilityMatrix>> {
    (0..FORECAST_HORIZON as u64)
        .map(|d| {
            let date = init_date + Days::new(d);
            let clamped = match reductions.last_date() {
                Some(last) if date > last => last,
                _ => date,
            };
            effective_mobility(baseline, reductions, regions, clamped)
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>, n: f64) -> f64 {
    values.sum::<f64>() / n
}

/// Sum of per-region reported cases over the final 14 simulated days.
fn reported_window_sums(traj: &Trajectory, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for day in FORECAST_HORIZON - REPORT_DAYS..FORECAST_HORIZON {
        for i in 0..n {
            out[i] += traj.new_reported[day][i];
        }
    }
    out
}

/// Issues a forecast: the state is initialized 7 days before the issue
/// date; the transmission rates and the tested fraction are the
/// arithmetic means of their daily estimates over the 7 days before the
/// initialization date; the model runs 21 days and the reported cases of
/// the final 14 are summed per region. Each bootstrap replica index
/// yields one scenario by averaging that replica's rates over the same
/// window.
#[allow(clippy::too_many_arguments)]
pub fn make_forecast(
    cases: &CaseSeries,
    prevalence: &PrevalenceSeries,
    regions: &RegionTable,
    mobility: &[MobilityMatrix],
    estimates: &BTreeMap<NaiveDate, DailyEstimate>,
    issue_date: NaiveDate,
    nu: f64,
    omega: f64,
) -> Result<Forecast> {
    assert_eq!(mobility.len(), FORECAST_HORIZON);
    let init_date = issue_date - Days::new(INIT_LAG);
    let window: Vec<NaiveDate> = (1..=PARAM_WINDOW)
        .map(|d| init_date - Days::new(d))
        .collect();
    let mut day_estimates = Vec::with_capacity(window.len());
    for &d in &window {
        day_estimates.push(estimates.get(&d).ok_or(Error::MissingEstimates(d))?);
    }
    let wn = window.len() as f64;
    let beta_loc = mean(day_estimates.iter().map(|e| e.beta_loc), wn);
    let beta_mob = mean(day_estimates.iter().map(|e| e.beta_mob), wn);
    // average tested fraction over the same window; undefined days (no
    // tested infectious yet) count as fully tested
    let a = mean(
        window
            .iter()
            .map(|&d| tested_fraction_or_one(cases, prevalence, d, omega))
            .collect::<Result<Vec<f64>>>()?
            .into_iter(),
        wn,
    );

    let initial = initialize_state(cases, prevalence, regions, init_date, nu, omega)?;
    let n = regions.leaf_count();
    let mobility_refs: Vec<&MobilityMatrix> = mobility.iter().collect();

    let run = |bl: f64, bm: f64| -> Result<Vec<f64>> {
        let params = EpidemicParams {
            latent_period: nu,
            infectious_period: omega,
            tested_fraction: a,
            beta_loc: bl,
            beta_mob: bm,
            dispersion: 1.0,
        };
        let cfg = SimulationConfig {
            horizon: FORECAST_HORIZON,
            params: &vec![params; FORECAST_HORIZON],
            mobility: mobility_refs.clone(),
            reinit_dates: BTreeSet::new(),
        };
        let traj = simulate(&initial, &cfg, None)?;
        Ok(reported_window_sums(&traj, n))
    };

    let point = run(beta_loc, beta_mob)?;
    let b = day_estimates
        .iter()
        .map(|e| e.replicas.len())
        .min()
        .unwrap_or(0);
    let scenarios: Vec<Vec<f64>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let bl = mean(day_estimates.iter().map(|e| e.replicas[rep].0), wn);
            let bm = mean(day_estimates.iter().map(|e| e.replicas[rep].1), wn);
            run(bl, bm)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut lo95 = point.clone();
    let mut hi95 = point.clone();
    if !scenarios.is_empty() {
        for i in 0..n {
            let mut col: Vec<f64> = scenarios.iter().map(|s| s[i]).collect();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            lo95[i] = percentile(&col, 0.025);
            hi95[i] = percentile(&col, 0.975);
        }
    }
    let national_total: f64 = point.iter().sum();
    let fractions = if national_total > 0.0 {
        Some(point.iter().map(|p| p / national_total).collect())
    } else {
        None
    };
    Ok(Forecast {
        issue_date,
        point,
        lo95,
        hi95,
        scenarios,
        national_total,
        fractions,
    })
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Initialization-based national validation series: on each day of the
/// window, `Σ_i a(t) Ê_i(t) / ν` over all regions.
pub fn national_validation_init(
    cases: &CaseSeries,
    nu: f64,
    a_series: &BTreeMap<NaiveDate, f64>,
    window: (NaiveDate, NaiveDate),
) -> Result<Vec<(NaiveDate, f64)>> {
    let mut out = Vec::new();
    let mut date = window.0;
    while date <= window.1 {
        let a = *a_series.get(&date).ok_or(Error::DateNotCovered(date))?;
        let mut total = 0.0;
        for region in 0..cases.region_count() {
            total += a * exposed_estimate(cases, region, date, nu, a)? / nu;
        }
        out.push((date, total));
        date = date + Days::new(1);
    }
    Ok(out)
}

/// Root mean squared error over paired per-region values, on raw counts.
pub fn rmse(forecast: &[f64], actual: &[f64]) -> Result<f64> {
    if forecast.len() != actual.len() {
        return Err(Error::MismatchedRegions(format!(
            "{} forecast vs {} actual values",
            forecast.len(),
            actual.len()
        )));
    }
    let n = forecast.len() as f64;
    let sq: f64 = forecast
        .iter()
        .zip(actual)
        .map(|(f, a)| (f - a) * (f - a))
        .sum();
    Ok((sq / n).sqrt())
}

/// Average ranks (1-based), with ties receiving the mean of the ranks
/// they span.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Spearman rank correlation: the Pearson correlation of average-rank
/// vectors. Errors when either input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::MismatchedRegions(format!(
            "{} vs {} values",
            a.len(),
            b.len()
        )));
    }
    assert!(a.len() >= 2, "need at least two regions");
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if constant(a) || constant(b) {
        return Err(Error::DegenerateRanks);
    }
    Ok(pearson(&average_ranks(a), &average_ranks(b)))
}

/// Result of sliding one series against another.
#[derive(Debug, Clone)]
pub struct DelayScan {
    /// Pearson correlation of `a[t]` against `b[t + s]` for each shift s.
    pub correlations: Vec<f64>,
    /// Shift with the largest finite correlation.
    pub best_shift: usize,
}

/// Correlates `a` against `b` delayed by each shift in `[0, max_shift]`.
/// Every shift must leave at least 10 overlapping points.
pub fn delay_scan(a: &[f64], b: &[f64], max_shift: usize) -> Result<DelayScan> {
    let mut correlations = Vec::with_capacity(max_shift + 1);
    for s in 0..=max_shift {
        let overlap = a.len().min(b.len().saturating_sub(s));
        if overlap < 10 {
            return Err(Error::InsufficientOverlap(overlap));
        }
        let x = &a[..overlap];
        let y = &b[s..s + overlap];
        correlations.push(pearson(x, y));
    }
    let best_shift = correlations
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_finite())
        .max_by(|(_, x), (_, y)| x.partial_cmp(y).unwrap())
        .map(|(s, _)| s)
        .unwrap_or(0);
    Ok(DelayScan {
        correlations,
        best_shift,
    })
}

/// Accuracy of one forecast against realized per-region totals.
#[derive(Debug, Clone, Copy)]
pub struct IssueMetrics {
    pub issue_date: NaiveDate,
    pub rmse: f64,
    pub spearman: f64,
}

/// Scores a forecast: RMSE on raw per-region counts and Spearman on the
/// regional ordering.
pub fn evaluate(forecast: &Forecast, actual: &[f64]) -> Result<IssueMetrics> {
    Ok(IssueMetrics {
        issue_date: forecast.issue_date,
        rmse: rmse(&forecast.point, actual)?,
        spearman: spearman(&forecast.point, actual)?,
    })
}

/// Paired per-issue-date accuracy of two model variants.
#[derive(Debug, Clone, Copy)]
pub struct ComparisonRow {
    pub issue_date: NaiveDate,
    pub rmse_with: f64,
    pub rmse_without: f64,
    pub spearman_with: f64,
    pub spearman_without: f64,
}

/// Scores with- and without-mobility forecasts side by side. Both lists
/// must cover the same issue dates in the same order, and `actual` must
/// hold realized per-region totals for each issue date.
pub fn compare_models(
    with: &[Forecast],
    without: &[Forecast],
    actual: &BTreeMap<NaiveDate, Vec<f64>>,
) -> Result<Vec<ComparisonRow>> {
    if with.len() != without.len()
        || with
            .iter()
            .zip(without)
            .any(|(a, b)| a.issue_date != b.issue_date)
    {
        return Err(Error::MismatchedDates);
    }
    with.iter()
        .zip(without)
        .map(|(fw, fo)| {
            let act = actual
                .get(&fw.issue_date)
                .ok_or(Error::MismatchedDates)?;
            let mw = evaluate(fw, act)?;
            let mo = evaluate(fo, act)?;
            Ok(ComparisonRow {
                issue_date: fw.issue_date,
                rmse_with: mw.rmse,
                rmse_without: mo.rmse,
                spearman_with: mw.spearman,
                spearman_without: mo.spearman,
            })
        })
        .collect()
}
