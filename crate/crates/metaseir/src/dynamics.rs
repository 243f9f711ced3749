//! Discrete-time stepping of the mobility-coupled SEIR system, multi-day
//! simulation with optional re-initialization, and the next-generation
//! matrix for the effective reproduction number.
//!
//! The system is advanced by explicit forward differences with a one-day
//! step. Outflows are clamped proportionally so no compartment goes
//! negative for any nonnegative parameters.

use std::collections::BTreeSet;

use chrono::{Days, NaiveDate};

use crate::error::{Error, Result};
use crate::ingest::{CaseSeries, MobilityMatrix, RegionTable};
use crate::linalg::{self, SquareMatrix};
use crate::state_init::{self, EpidemicParams, RegionalState};

/// Convergence tolerance for the power iteration.
pub const POWER_TOL: f64 = 1e-10;
/// Iteration cap for the power iteration.
pub const POWER_MAX_ITER: usize = 100_000;

/// New exposures in region `i`:
/// `beta_loc (S_i/N_i)(I_i^T + I_i^U) + beta_mob Σ_j (S_i/N_i)(I_j^U/N_j)(M_ji + M_ij)`.
///
/// Tested infectious individuals contribute only to the local term: they
/// do not travel or receive visitors.
pub fn exposure_rate(
    state: &RegionalState,
    params: &EpidemicParams,
    mobility: &MobilityMatrix,
    populations: &[f64],
    i: usize,
) -> f64 {
    let si_frac = state.s[i] / populations[i];
    let local = params.beta_loc * si_frac * (state.i_t[i] + state.i_u[i]);
    let mut mob = 0.0;
    if params.beta_mob > 0.0 {
        for j in 0..state.region_count() {
            if j != i && state.i_u[j] > 0.0 {
                mob += state.i_u[j] / populations[j] * mobility.symmetric(i, j);
            }
        }
        mob *= params.beta_mob * si_frac;
    }
    local + mob
}

/// One forward step and its per-region flow diagnostics.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: RegionalState,
    /// Flow S -> E per region during this step.
    pub new_exposures: Vec<f64>,
    /// Newly reported cases per region: `a * E_i / nu` (after clamping).
    pub new_reported: Vec<f64>,
}

/// Advances the state by one day.
pub fn step(
    state: &RegionalState,
    params: &EpidemicParams,
    mobility: &MobilityMatrix,
    populations: &[f64],
) -> StepOutput {
    let n = state.region_count();
    debug_assert_eq!(populations.len(), n);
    debug_assert_eq!(mobility.dim(), n);
    let mut next = state.clone();
    next.date = state.date + Days::new(1);
    let mut new_exposures = vec![0.0; n];
    let mut new_reported = vec![0.0; n];
    for i in 0..n {
        // single outflow per source compartment; cap at the source size
        let exposure = exposure_rate(state, params, mobility, populations, i).min(state.s[i]);
        let e_out = (state.e[i] / params.latent_period).min(state.e[i]);
        let it_out = (state.i_t[i] / params.infectious_period).min(state.i_t[i]);
        let iu_out = (state.i_u[i] / params.infectious_period).min(state.i_u[i]);

        next.s[i] = state.s[i] - exposure;
        next.e[i] = state.e[i] + exposure - e_out;
        next.i_t[i] = state.i_t[i] + params.tested_fraction * e_out - it_out;
        next.i_u[i] = state.i_u[i] + (1.0 - params.tested_fraction) * e_out - iu_out;
        next.r_t[i] = state.r_t[i] + it_out;
        next.r_u[i] = state.r_u[i] + iu_out;
        new_exposures[i] = exposure;
        new_reported[i] = params.tested_fraction * e_out;
    }
    StepOutput {
        state: next,
        new_exposures,
        new_reported,
    }
}

/// Per-day inputs for a multi-day simulation.
pub struct SimulationConfig<'a> {
    /// Number of daily steps; `params` and `mobility` must each cover it.
    pub horizon: usize,
    pub params: &'a [EpidemicParams],
    pub mobility: Vec<&'a MobilityMatrix>,
    /// Dates on which the state is replaced by a fresh initialization.
    pub reinit_dates: BTreeSet<NaiveDate>,
}

/// Case data needed to re-initialize compartments mid-simulation.
pub struct ReinitContext<'a> {
    pub cases: &'a CaseSeries,
    pub regions: &'a RegionTable,
    pub nu: f64,
    pub omega: f64,
}

/// State sequence plus derived per-day series.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `horizon + 1` states, one per day.
    pub states: Vec<RegionalState>,
    /// Per step: flow S -> E per region.
    pub new_exposures: Vec<Vec<f64>>,
    /// Per step: newly reported cases per region.
    pub new_reported: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn national_new_reported(&self) -> Vec<f64> {
        self.new_reported
            .iter()
            .map(|day| day.iter().sum())
            .collect()
    }
}

/// Iterates [`step`] over the horizon. On each date in
/// `config.reinit_dates` the state is replaced by a fresh initialization
/// from reported cases, using that day's tested fraction.
pub fn simulate(
    initial: &RegionalState,
    config: &SimulationConfig,
    reinit: Option<&ReinitContext>,
) -> Result<Trajectory> {
    assert!(config.horizon >= 1);
    assert_eq!(config.params.len(), config.horizon);
    assert_eq!(config.mobility.len(), config.horizon);
    if !config.reinit_dates.is_empty() && reinit.is_none() {
        return Err(Error::Config(
            "re-initialization dates given without case data".into(),
        ));
    }
    let populations: Vec<f64> = match reinit {
        Some(ctx) => ctx.regions.leaf_populations(),
        None => (0..initial.region_count()).map(|i| initial.total(i)).collect(),
    };
    let mut states = Vec::with_capacity(config.horizon + 1);
    let mut new_exposures = Vec::with_capacity(config.horizon);
    let mut new_reported = Vec::with_capacity(config.horizon);
    let mut current = initial.clone();
    for day in 0..config.horizon {
        if config.reinit_dates.contains(&current.date) {
            let ctx = reinit.expect("checked above");
            current = state_init::initialize_state_with_a(
                ctx.cases,
                ctx.regions,
                current.date,
                ctx.nu,
                ctx.omega,
                config.params[day].tested_fraction,
            )?;
        }
        let out = step(&current, &config.params[day], config.mobility[day], &populations);
        states.push(current);
        new_exposures.push(out.new_exposures);
        new_reported.push(out.new_reported);
        current = out.state;
    }
    states.push(current);
    Ok(Trajectory {
        states,
        new_exposures,
        new_reported,
    })
}

/// Next-generation matrix at the given state:
/// `K_ij = omega * [beta_loc (S_j/N_j) 1{i=j} + (1-a) beta_mob (S_i/N_i)(M_ji + M_ij)/N_j]`,
/// the expected secondary infections in region `i` per newly exposed
/// individual in region `j`. The tested fraction `a` transmits only
/// through the local term.
pub fn next_generation_matrix(
    state: &RegionalState,
    params: &EpidemicParams,
    mobility: &MobilityMatrix,
    populations: &[f64],
) -> SquareMatrix {
    let n = state.region_count();
    let omega = params.infectious_period;
    let untested = 1.0 - params.tested_fraction;
    let mut k = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut v = 0.0;
            if i == j {
                v += params.beta_loc * state.s[j] / populations[j];
            }
            v += untested * params.beta_mob * (state.s[i] / populations[i])
                * mobility.symmetric(i, j)
                / populations[j];
            k.set(i, j, omega * v);
        }
    }
    k
}

/// Spectral radius of the next-generation matrix.
pub fn effective_reproduction_number(k: &SquareMatrix) -> Result<f64> {
    linalg::spectral_radius(k, POWER_TOL, POWER_MAX_ITER)
}
