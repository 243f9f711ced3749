//! Reconstruction of the six compartments per region on any date from
//! reported positive tests.
//!
//! The latent and infectious periods are modeled as geometric with success
//! probabilities `1/nu` and `1/omega`. The look-ahead window is truncated
//! at 7 days and the look-back window at 14 days, with the remaining
//! probability mass placed on the last day of the window, so the weights
//! sum exactly to `nu` and `omega`.

use chrono::{Days, NaiveDate};
use log::warn;

use crate::error::{Error, Result};
use crate::ingest::{CaseSeries, PrevalenceSeries, RegionTable};

/// Look-ahead truncation horizon for the exposed estimate, in days.
pub const LOOKAHEAD_DAYS: usize = 7;
/// Look-back truncation horizon for the infectious estimate, in days.
pub const LOOKBACK_DAYS: usize = 14;

/// The six compartments of every region on one date, in the canonical
/// leaf ordering of the region table.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionalState {
    pub date: NaiveDate,
    pub s: Vec<f64>,
    pub e: Vec<f64>,
    pub i_t: Vec<f64>,
    pub i_u: Vec<f64>,
    pub r_t: Vec<f64>,
    pub r_u: Vec<f64>,
}

impl RegionalState {
    pub fn empty(date: NaiveDate, populations: &[f64]) -> Self {
        let n = populations.len();
        Self {
            date,
            s: populations.to_vec(),
            e: vec![0.0; n],
            i_t: vec![0.0; n],
            i_u: vec![0.0; n],
            r_t: vec![0.0; n],
            r_u: vec![0.0; n],
        }
    }

    pub fn region_count(&self) -> usize {
        self.s.len()
    }

    /// Sum of all six compartments for one region.
    pub fn total(&self, i: usize) -> f64 {
        self.s[i] + self.e[i] + self.i_t[i] + self.i_u[i] + self.r_t[i] + self.r_u[i]
    }
}

/// Fixed and per-day model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpidemicParams {
    /// Mean latent period nu, days.
    pub latent_period: f64,
    /// Mean infectious period omega, days.
    pub infectious_period: f64,
    /// Fraction a of infectious individuals that are positively tested.
    pub tested_fraction: f64,
    /// Transmission rate via local contacts.
    pub beta_loc: f64,
    /// Transmission rate via inter-regional travel contacts.
    pub beta_mob: f64,
    /// Negative-binomial dispersion r of the observation model.
    pub dispersion: f64,
}

impl EpidemicParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.latent_period > 0.0
            && self.infectious_period > 0.0
            && self.tested_fraction > 0.0
            && self.tested_fraction <= 1.0
            && self.beta_loc >= 0.0
            && self.beta_mob >= 0.0
            && self.dispersion > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid parameters: {self:?}")))
        }
    }
}

/// Truncated geometric look-ahead weights for `s = 1..=7`.
///
/// The first six weights are survival probabilities `(1 - 1/nu)^(s-1)`;
/// the seventh carries the remaining mass `nu (1 - 1/nu)^6` so that the
/// weights sum exactly to `nu`.
pub fn lookahead_weights(nu: f64) -> [f64; LOOKAHEAD_DAYS] {
    let q = 1.0 - 1.0 / nu;
    let mut w = [0.0; LOOKAHEAD_DAYS];
    for (s, wi) in w.iter_mut().enumerate().take(LOOKAHEAD_DAYS - 1) {
        *wi = q.powi(s as i32);
    }
    w[LOOKAHEAD_DAYS - 1] = nu * q.powi((LOOKAHEAD_DAYS - 1) as i32);
    w
}

/// Truncated geometric look-back weights for `s = 0..=14`; they sum
/// exactly to `omega`.
pub fn lookback_weights(omega: f64) -> [f64; LOOKBACK_DAYS + 1] {
    let q = 1.0 - 1.0 / omega;
    let mut w = [0.0; LOOKBACK_DAYS + 1];
    for (s, wi) in w.iter_mut().enumerate().take(LOOKBACK_DAYS) {
        *wi = q.powi(s as i32);
    }
    w[LOOKBACK_DAYS] = omega * q.powi(LOOKBACK_DAYS as i32);
    w
}

/// Estimated exposed individuals in `region` on `date` from the next seven
/// days of reported cases, scaled by `1/a`.
pub fn exposed_estimate(
    cases: &CaseSeries,
    region: usize,
    date: NaiveDate,
    nu: f64,
    a: f64,
) -> Result<f64> {
    assert!(nu > 0.0, "latent period must be positive");
    assert!(a > 0.0 && a <= 1.0, "tested fraction must be in (0, 1]");
    let needed = date + Days::new(LOOKAHEAD_DAYS as u64);
    if needed > cases.end() {
        return Err(Error::InsufficientLookahead {
            date,
            needed,
            end: cases.end(),
        });
    }
    let w = lookahead_weights(nu);
    let mut sum = 0.0;
    for (s, wi) in w.iter().enumerate() {
        let d = date + Days::new(s as u64 + 1);
        sum += wi * cases.count(region, d).expect("within window") as f64;
    }
    Ok(sum / a)
}

/// Estimated tested infectious individuals in `region` on `date` from the
/// past fourteen days of reported cases. Pre-epidemic days contribute zero.
pub fn tested_infectious_estimate(
    cases: &CaseSeries,
    region: usize,
    date: NaiveDate,
    omega: f64,
) -> Result<f64> {
    assert!(omega > 0.0, "infectious period must be positive");
    if date > cases.end() {
        return Err(Error::DateOutOfRange {
            date,
            end: cases.end(),
        });
    }
    let w = lookback_weights(omega);
    let mut sum = 0.0;
    for (s, wi) in w.iter().enumerate() {
        let d = date - Days::new(s as u64);
        sum += wi * cases.count(region, d).expect("within window") as f64;
    }
    Ok(sum)
}

/// Estimated tested recovered individuals: cumulative reported cases minus
/// the tested infectious estimate, clamped at zero.
pub fn tested_recovered_estimate(
    cases: &CaseSeries,
    region: usize,
    date: NaiveDate,
    omega: f64,
) -> Result<f64> {
    let infectious = tested_infectious_estimate(cases, region, date, omega)?;
    let cumulative = cases.cumulative(region, date).expect("checked above") as f64;
    let r = cumulative - infectious;
    if r < 0.0 {
        if r < -1e-6 {
            warn!(
                "tested recovered estimate {r:.6} for region {region} on {date} clamped to 0"
            );
        }
        Ok(0.0)
    } else {
        Ok(r)
    }
}

/// National fraction of infectious individuals that are positively tested:
/// the summed tested infectious estimates divided by the estimated total
/// infectious population. Clamped to 1 with a warning when the raw ratio
/// exceeds 1.
pub fn tested_fraction(
    cases: &CaseSeries,
    prevalence: &PrevalenceSeries,
    date: NaiveDate,
    omega: f64,
) -> Result<f64> {
    let total = prevalence.get(date).ok_or(Error::DateNotCovered(date))?;
    if total <= 0.0 {
        return Err(Error::NonpositivePrevalence { date, value: total });
    }
    let mut tested = 0.0;
    for region in 0..cases.region_count() {
        tested += tested_infectious_estimate(cases, region, date, omega)?;
    }
    if tested <= 0.0 {
        return Err(Error::ZeroTestedInfectious(date));
    }
    let a = tested / total;
    if a > 1.0 {
        warn!("tested fraction {a:.4} on {date} exceeds 1; clamped");
        Ok(1.0)
    } else {
        Ok(a)
    }
}

/// Like [`tested_fraction`], but returns 1 when no tested infectious
/// individuals are estimated on `date` (before any cases exist the
/// ratio is undefined and prevalence data is not consulted).
pub fn tested_fraction_or_one(
    cases: &CaseSeries,
    prevalence: &PrevalenceSeries,
    date: NaiveDate,
    omega: f64,
) -> Result<f64> {
    let mut tested = 0.0;
    for region in 0..cases.region_count() {
        tested += tested_infectious_estimate(cases, region, date, omega)?;
    }
    if tested <= 0.0 {
        Ok(1.0)
    } else {
        tested_fraction(cases, prevalence, date, omega)
    }
}

/// Initializes all six compartments on `date`, estimating the tested
/// fraction from national prevalence.
///
/// When no cases have been reported anywhere through `date`, the tested
/// fraction is undefined and a = 1 is used; every compartment except S is
/// then zero or determined purely by future reports.
pub fn initialize_state(
    cases: &CaseSeries,
    prevalence: &PrevalenceSeries,
    regions: &RegionTable,
    date: NaiveDate,
    nu: f64,
    omega: f64,
) -> Result<RegionalState> {
    let a = tested_fraction_or_one(cases, prevalence, date, omega)?;
    initialize_state_with_a(cases, regions, date, nu, omega, a)
}

/// Initializes all six compartments on `date` with a given tested
/// fraction. S is the residual to the region population; untested
/// compartments are the tested ones scaled by `(1 - a)/a`.
pub fn initialize_state_with_a(
    cases: &CaseSeries,
    regions: &RegionTable,
    date: NaiveDate,
    nu: f64,
    omega: f64,
    a: f64,
) -> Result<RegionalState> {
    let populations = regions.leaf_populations();
    let ids = regions.leaf_ids();
    let n = populations.len();
    let untested_scale = (1.0 - a) / a;
    let mut state = RegionalState::empty(date, &populations);
    for i in 0..n {
        let e = exposed_estimate(cases, i, date, nu, a)?;
        let i_t = tested_infectious_estimate(cases, i, date, omega)?;
        let r_t = tested_recovered_estimate(cases, i, date, omega)?;
        let i_u = untested_scale * i_t;
        let r_u = untested_scale * r_t;
        let s = populations[i] - e - i_t - i_u - r_t - r_u;
        if s < 0.0 {
            return Err(Error::NegativeSusceptible {
                region: ids[i].to_string(),
                date,
                susceptible: s,
            });
        }
        state.e[i] = e;
        state.i_t[i] = i_t;
        state.i_u[i] = i_u;
        state.r_t[i] = r_t;
        state.r_u[i] = r_u;
        state.s[i] = s;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Region;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn table(pops: &[f64]) -> RegionTable {
        RegionTable::new(
            pops.iter()
                .enumerate()
                .map(|(i, &p)| Region {
                    id: format!("R{i}"),
                    name: format!("Region {i}"),
                    population: p,
                    parent_id: None,
                })
                .collect(),
        )
        .unwrap()
    }

    /// Independent oracle: weighted sum computed directly from the
    /// truncated geometric survival function.
    fn lookahead_oracle(nu: f64, future: &[f64]) -> f64 {
        let q = 1.0 - 1.0 / nu;
        let mut total = 0.0;
        for s in 1..=6 {
            total += q.powi(s as i32 - 1) * future[s - 1];
        }
        // remainder mass beyond six days, all assigned to day seven
        let remainder: f64 = (7..1000).map(|s| q.powi(s - 1)).sum();
        total + remainder * future[6]
    }

    #[test]
    fn lookahead_weights_sum_to_nu() {
        for nu in [1.5, 3.0, 9.0] {
            let sum: f64 = lookahead_weights(nu).iter().sum();
            assert_abs_diff_eq!(sum, nu, epsilon = 1e-12);
        }
    }

    #[test]
    fn lookback_weights_sum_to_omega() {
        for omega in [1.5, 3.0, 9.0] {
            let sum: f64 = lookback_weights(omega).iter().sum();
            assert_abs_diff_eq!(sum, omega, epsilon = 1e-12);
        }
    }

    #[test]
    fn exposed_zero_cases() {
        let c = CaseSeries::new(date("2020-07-01"), vec![vec![0; 10]]);
        let e = exposed_estimate(&c, 0, date("2020-07-01"), 3.0, 1.0).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn exposed_constant_unit_cases() {
        let c = CaseSeries::new(date("2020-07-01"), vec![vec![1; 10]]);
        let e = exposed_estimate(&c, 0, date("2020-07-01"), 3.0, 1.0).unwrap();
        let want = lookahead_oracle(3.0, &[1.0; 7]);
        assert_abs_diff_eq!(e, want, epsilon = 1e-9);
        assert_abs_diff_eq!(e, 3.0, epsilon = 1e-12); // weights sum to nu

        // halving the tested fraction doubles the estimate
        let e_half = exposed_estimate(&c, 0, date("2020-07-01"), 3.0, 0.5).unwrap();
        assert_abs_diff_eq!(e_half, 2.0 * e, epsilon = 1e-12);
    }

    #[test]
    fn exposed_requires_seven_future_days() {
        let c = CaseSeries::new(date("2020-07-01"), vec![vec![1; 7]]);
        assert!(matches!(
            exposed_estimate(&c, 0, date("2020-07-01"), 3.0, 1.0),
            Err(Error::InsufficientLookahead { .. })
        ));
        assert!(exposed_estimate(&c, 0, date("2020-06-30"), 3.0, 1.0).is_ok());
    }

    #[test]
    fn tested_infectious_zero_and_spike() {
        let c = CaseSeries::new(date("2020-07-01"), vec![vec![0; 30]]);
        assert_eq!(
            tested_infectious_estimate(&c, 0, date("2020-07-20"), 9.0).unwrap(),
            0.0
        );
        let mut counts = vec![0u64; 30];
        counts[19] = 10;
        let c = CaseSeries::new(date("2020-07-01"), vec![counts]);
        // s = 0 weight is 1
        assert_eq!(
            tested_infectious_estimate(&c, 0, date("2020-07-20"), 9.0).unwrap(),
            10.0
        );
    }

    #[test]
    fn tested_infectious_constant_unit_cases() {
        let c = CaseSeries::new(date("2020-07-01"), vec![vec![1; 40]]);
        let it = tested_infectious_estimate(&c, 0, date("2020-08-01"), 9.0).unwrap();
        // full truncated geometric mass: exactly omega
        assert_abs_diff_eq!(it, 9.0, epsilon = 1e-12);
        // against a direct summation oracle
        let q: f64 = 1.0 - 1.0 / 9.0;
        let head: f64 = (0..14).map(|s| q.powi(s)).sum();
        let tail: f64 = (14..2000).map(|s| q.powi(s)).sum();
        assert_abs_diff_eq!(it, head + tail, epsilon = 1e-9);
    }

    #[test]
    fn recovered_cases() {
        let c = CaseSeries::new(date("2020-01-01"), vec![vec![0; 120]]);
        assert_eq!(
            tested_recovered_estimate(&c, 0, date("2020-03-01"), 9.0).unwrap(),
            0.0
        );
        // a single spike today is still fully infectious
        let mut counts = vec![0u64; 120];
        counts[60] = 10;
        let c = CaseSeries::new(date("2020-01-01"), vec![counts]);
        assert_eq!(
            tested_recovered_estimate(&c, 0, date("2020-03-01"), 9.0).unwrap(),
            0.0
        );
        // constant unit cases for 100 days: cumulative minus infectious
        let c = CaseSeries::new(date("2020-01-01"), vec![vec![1; 100]]);
        let d = date("2020-01-01") + Days::new(99);
        let r = tested_recovered_estimate(&c, 0, d, 9.0).unwrap();
        assert_abs_diff_eq!(r, 100.0 - 9.0, epsilon = 1e-9);
    }

    #[test]
    fn tested_fraction_ratio_clamp_and_degenerate() {
        let mut counts = vec![0u64; 30];
        counts[19] = 50;
        let c = CaseSeries::new(date("2020-07-01"), vec![counts]);
        let mut prev = BTreeMap::new();
        prev.insert(date("2020-07-20"), 200.0);
        let p = PrevalenceSeries::new(prev).unwrap();
        let a = tested_fraction(&c, &p, date("2020-07-20"), 9.0).unwrap();
        assert_abs_diff_eq!(a, 0.25, epsilon = 1e-12);

        let mut counts = vec![0u64; 30];
        counts[19] = 250;
        let c = CaseSeries::new(date("2020-07-01"), vec![counts]);
        assert_eq!(tested_fraction(&c, &p, date("2020-07-20"), 9.0).unwrap(), 1.0);

        let c = CaseSeries::new(date("2020-07-01"), vec![vec![0; 30]]);
        assert!(matches!(
            tested_fraction(&c, &p, date("2020-07-20"), 9.0),
            Err(Error::ZeroTestedInfectious(_))
        ));
    }

    #[test]
    fn initialize_empty_epidemic() {
        let t = table(&[100.0, 200.0]);
        let c = CaseSeries::new(date("2020-07-01"), vec![vec![0; 30], vec![0; 30]]);
        let p = PrevalenceSeries::new(BTreeMap::new()).unwrap();
        let st = initialize_state(&c, &p, &t, date("2020-07-10"), 3.0, 9.0).unwrap();
        assert_eq!(st.s, vec![100.0, 200.0]);
        assert_eq!(st.e, vec![0.0, 0.0]);
        assert_eq!(st.i_t, vec![0.0, 0.0]);
    }

    #[test]
    fn initialize_full_testing_has_no_untested() {
        let t = table(&[1000.0]);
        let c = CaseSeries::new(date("2020-07-01"), vec![vec![2; 40]]);
        let st =
            initialize_state_with_a(&c, &t, date("2020-07-25"), 3.0, 9.0, 1.0).unwrap();
        assert_eq!(st.i_u[0], 0.0);
        assert_eq!(st.r_u[0], 0.0);
        assert!(st.i_t[0] > 0.0);
    }

    #[test]
    fn initialize_conserves_population_steady_state() {
        let t = table(&[1000.0]);
        // steady unit reporting for 100 days, then lookahead coverage
        let c = CaseSeries::new(date("2020-01-01"), vec![vec![1; 120]]);
        let d = date("2020-01-01") + Days::new(99);
        let st = initialize_state_with_a(&c, &t, d, 3.0, 9.0, 0.5).unwrap();
        assert_abs_diff_eq!(st.total(0), 1000.0, epsilon = 1e-9 * 1000.0);
        // oracle values: E = nu/a, I_T = omega, R_T = 100 - omega
        assert_abs_diff_eq!(st.e[0], 6.0, epsilon = 1e-9);
        assert_abs_diff_eq!(st.i_t[0], 9.0, epsilon = 1e-9);
        assert_abs_diff_eq!(st.r_t[0], 91.0, epsilon = 1e-9);
        assert_abs_diff_eq!(st.i_u[0], 9.0, epsilon = 1e-9);
        assert_abs_diff_eq!(st.r_u[0], 91.0, epsilon = 1e-9);
        assert_abs_diff_eq!(st.s[0], 1000.0 - 6.0 - 18.0 - 182.0, epsilon = 1e-9);
    }

    #[test]
    fn untested_ratio_matches_scaling() {
        let t = table(&[10000.0]);
        let c = CaseSeries::new(date("2020-07-01"), vec![(0..60).map(|i| i % 5).collect()]);
        for a in [0.2, 0.5, 0.9] {
            let st =
                initialize_state_with_a(&c, &t, date("2020-07-25"), 3.0, 9.0, a).unwrap();
            if st.i_t[0] > 0.0 {
                assert_abs_diff_eq!(st.i_u[0] / st.i_t[0], (1.0 - a) / a, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn negative_susceptible_rejected() {
        let t = table(&[10.0]);
        let c = CaseSeries::new(date("2020-01-01"), vec![vec![5; 60]]);
        assert!(matches!(
            initialize_state_with_a(&c, &t, date("2020-02-01"), 3.0, 9.0, 0.5),
            Err(Error::NegativeSusceptible { .. })
        ));
    }

    #[test]
    fn monotone_in_future_and_past_cases() {
        let base = CaseSeries::new(date("2020-07-01"), vec![vec![2; 40]]);
        let d = date("2020-07-20");
        let e0 = exposed_estimate(&base, 0, d, 3.0, 0.7).unwrap();
        let i0 = tested_infectious_estimate(&base, 0, d, 9.0).unwrap();
        for bump_day in 0..40usize {
            let mut counts = vec![2u64; 40];
            counts[bump_day] += 3;
            let c = CaseSeries::new(date("2020-07-01"), vec![counts]);
            let e1 = exposed_estimate(&c, 0, d, 3.0, 0.7).unwrap();
            let i1 = tested_infectious_estimate(&c, 0, d, 9.0).unwrap();
            assert!(e1 >= e0 - 1e-12);
            assert!(i1 >= i0 - 1e-12);
        }
    }
}
