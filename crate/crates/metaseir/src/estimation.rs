//! Per-day maximum likelihood estimation of the transmission rates over
//! the cross-section of regions, under Poisson or negative-binomial
//! observation models, with parametric bootstrap confidence intervals,
//! derived contact parameters, and AIC comparison of nested variants.

use chrono::NaiveDate;
use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::ingest::MobilityMatrix;
use crate::state_init::RegionalState;

/// Box constraint for the dispersion parameter.
pub const DISPERSION_MIN: f64 = 1e-6;
pub const DISPERSION_MAX: f64 = 1e8;
/// Gradient infinity-norm convergence threshold.
pub const GRAD_TOL: f64 = 1e-8;
/// Relative log-likelihood change convergence threshold.
pub const LL_TOL: f64 = 1e-12;
const MAX_NEWTON_ITER: usize = 500;
const MAX_ALTERNATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Poisson,
    NegBin,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::NegBin => "negbin",
        }
    }
}

/// Observation family plus whether the mobility term is estimated or
/// pinned to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelVariant {
    pub family: Family,
    pub with_mobility: bool,
}

impl ModelVariant {
    /// Number of free parameters, for the AIC penalty.
    pub fn param_count(self) -> usize {
        let base = if self.with_mobility { 2 } else { 1 };
        match self.family {
            Family::Poisson => base,
            Family::NegBin => base + 1,
        }
    }

    pub fn name(self) -> String {
        if self.with_mobility {
            format!("{}_with_mobility", self.family.name())
        } else {
            format!("{}_without_mobility", self.family.name())
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let (family, with_mobility) = match s {
            "poisson_with_mobility" => (Family::Poisson, true),
            "poisson_without_mobility" => (Family::Poisson, false),
            "negbin_with_mobility" => (Family::NegBin, true),
            "negbin_without_mobility" => (Family::NegBin, false),
            _ => return None,
        };
        Some(Self {
            family,
            with_mobility,
        })
    }
}

/// One day's cross-sectional design: per region the local and mobility
/// covariates and the observed count of new exposures.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    pub x_loc: Vec<f64>,
    pub x_mob: Vec<f64>,
    pub y: Vec<u64>,
}

impl Covariates {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn rate(&self, i: usize, beta_loc: f64, beta_mob: f64) -> f64 {
        beta_loc * self.x_loc[i] + beta_mob * self.x_mob[i]
    }
}

/// Builds the day-t design from two consecutive states. The observed
/// count is the rounded susceptible decrement `round(max(0, S(t) - S(t+1)))`.
pub fn build_covariates(
    prev: &RegionalState,
    next: &RegionalState,
    mobility: &MobilityMatrix,
    populations: &[f64],
) -> Covariates {
    let n = prev.region_count();
    debug_assert_eq!(next.region_count(), n);
    let mut x_loc = vec![0.0; n];
    let mut x_mob = vec![0.0; n];
    let mut y = vec![0u64; n];
    for i in 0..n {
        let si_frac = prev.s[i] / populations[i];
        x_loc[i] = si_frac * (prev.i_t[i] + prev.i_u[i]);
        let mut mob = 0.0;
        for j in 0..n {
            if j != i {
                mob += prev.i_u[j] / populations[j] * mobility.symmetric(i, j);
            }
        }
        x_mob[i] = si_frac * mob;
        y[i] = (prev.s[i] - next.s[i]).max(0.0).round() as u64;
    }
    Covariates { x_loc, x_mob, y }
}

/// Exact Poisson log-likelihood. Returns negative infinity when an
/// observation with a positive count has zero rate.
pub fn loglik_poisson(beta_loc: f64, beta_mob: f64, cov: &Covariates) -> f64 {
    let mut ll = 0.0;
    for i in 0..cov.len() {
        let lambda = cov.rate(i, beta_loc, beta_mob);
        let y = cov.y[i] as f64;
        if lambda <= 0.0 {
            if y > 0.0 {
                return f64::NEG_INFINITY;
            }
            continue;
        }
        ll += y * lambda.ln() - lambda - ln_gamma(y + 1.0);
    }
    ll
}

/// Exact negative-binomial log-likelihood with mean `lambda_i` and
/// dispersion `r`, computed entirely via log-Gamma.
pub fn loglik_negbin(beta_loc: f64, beta_mob: f64, r: f64, cov: &Covariates) -> f64 {
    debug_assert!(r > 0.0);
    let mut ll = 0.0;
    for i in 0..cov.len() {
        let lambda = cov.rate(i, beta_loc, beta_mob);
        let y = cov.y[i] as f64;
        if lambda <= 0.0 {
            if y > 0.0 {
                return f64::NEG_INFINITY;
            }
            continue;
        }
        ll += ln_gamma(r + y) - ln_gamma(r) - ln_gamma(y + 1.0) + y * lambda.ln()
            - y * (r + lambda).ln()
            - r * (lambda / r).ln_1p();
    }
    ll
}

/// Point estimate for one day and model variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub beta_loc: f64,
    pub beta_mob: f64,
    /// `None` for the Poisson family.
    pub dispersion: Option<f64>,
    pub loglik: f64,
}

struct Objective<'a> {
    cov: &'a Covariates,
    family: Family,
    with_mobility: bool,
    /// observations excluded because the active design cannot explain them
    mask: Vec<bool>,
}

impl<'a> Objective<'a> {
    fn new(cov: &'a Covariates, variant: ModelVariant) -> Result<Self> {
        let active_x = |i: usize| {
            cov.x_loc[i] > 0.0 || (variant.with_mobility && cov.x_mob[i] > 0.0)
        };
        if !(0..cov.len()).any(active_x) {
            return Err(Error::DegenerateDesign);
        }
        let mut mask = vec![true; cov.len()];
        for i in 0..cov.len() {
            if cov.y[i] > 0 && !active_x(i) {
                warn!(
                    "dropping observation {i}: positive count with zero covariates cannot be explained"
                );
                mask[i] = false;
            }
        }
        Ok(Self {
            cov,
            family: variant.family,
            with_mobility: variant.with_mobility,
            mask,
        })
    }

    fn loglik(&self, beta: [f64; 2], r: f64) -> f64 {
        let mut ll = 0.0;
        for i in 0..self.cov.len() {
            if !self.mask[i] {
                continue;
            }
            let lambda = self.cov.rate(i, beta[0], beta[1]);
            let y = self.cov.y[i] as f64;
            if lambda <= 0.0 {
                if y > 0.0 {
                    return f64::NEG_INFINITY;
                }
                continue;
            }
            ll += match self.family {
                Family::Poisson => y * lambda.ln() - lambda - ln_gamma(y + 1.0),
                Family::NegBin => {
                    ln_gamma(r + y) - ln_gamma(r) - ln_gamma(y + 1.0) + y * lambda.ln()
                        - y * (r + lambda).ln()
                        - r * (lambda / r).ln_1p()
                }
            };
        }
        ll
    }

    /// Gradient and Hessian of the log-likelihood in beta, at fixed r.
    fn beta_grad_hess(&self, beta: [f64; 2], r: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let mut g = [0.0; 2];
        let mut h = [[0.0; 2]; 2];
        for i in 0..self.cov.len() {
            if !self.mask[i] {
                continue;
            }
            let x = [self.cov.x_loc[i], self.cov.x_mob[i]];
            if x[0] == 0.0 && x[1] == 0.0 {
                continue;
            }
            let lambda = self.cov.rate(i, beta[0], beta[1]);
            let y = self.cov.y[i] as f64;
            let (d1, d2) = match self.family {
                Family::Poisson => {
                    if lambda > 0.0 {
                        (y / lambda - 1.0, -y / (lambda * lambda))
                    } else {
                        // y = 0 here by the mask; derivative of -lambda
                        (-1.0, 0.0)
                    }
                }
                Family::NegBin => {
                    if lambda > 0.0 {
                        (
                            y / lambda - (y + r) / (r + lambda),
                            -y / (lambda * lambda) + (y + r) / ((r + lambda) * (r + lambda)),
                        )
                    } else {
                        (-1.0, 0.0)
                    }
                }
            };
            for k in 0..2 {
                g[k] += d1 * x[k];
                for l in 0..2 {
                    h[k][l] += d2 * x[k] * x[l];
                }
            }
        }
        (g, h)
    }

    /// Derivative of the log-likelihood in r at fixed beta.
    fn dispersion_grad(&self, beta: [f64; 2], r: f64) -> f64 {
        let mut g = 0.0;
        for i in 0..self.cov.len() {
            if !self.mask[i] {
                continue;
            }
            let lambda = self.cov.rate(i, beta[0], beta[1]);
            if lambda <= 0.0 {
                continue;
            }
            let y = self.cov.y[i] as f64;
            g += digamma(r + y) - digamma(r) - (lambda / r).ln_1p()
                + (lambda - y) / (r + lambda);
        }
        g
    }

    /// Projected-Newton ascent over `beta >= 0`, with the mobility
    /// coordinate pinned to zero for the without-mobility variant.
    fn maximize_beta(&self, start: [f64; 2], r: f64) -> Result<([f64; 2], f64)> {
        let free: Vec<usize> = if self.with_mobility { vec![0, 1] } else { vec![0] };
        let mut beta = start;
        if !self.with_mobility {
            beta[1] = 0.0;
        }
        let mut ll = self.loglik(beta, r);
        for _ in 0..MAX_NEWTON_ITER {
            let (g, h) = self.beta_grad_hess(beta, r);
            // KKT: coordinates on the boundary with an inward-pointing
            // gradient are active; the rest must have a small gradient
            let mut active = [false; 2];
            let mut proj_grad: f64 = 0.0;
            for &k in &free {
                if beta[k] <= 0.0 && g[k] <= 0.0 {
                    active[k] = true;
                } else {
                    proj_grad = proj_grad.max(g[k].abs());
                }
            }
            if proj_grad < GRAD_TOL {
                break;
            }
            let dims: Vec<usize> = free.iter().copied().filter(|&k| !active[k]).collect();
            let dir = newton_direction(&g, &h, &dims);
            // backtracking line search on the projected ray
            let mut improved = false;
            let mut t = 1.0;
            for _ in 0..60 {
                let mut cand = beta;
                for &k in &dims {
                    cand[k] = (beta[k] + t * dir[k]).max(0.0);
                }
                let cand_ll = self.loglik(cand, r);
                if cand_ll > ll {
                    let gain = cand_ll - ll;
                    beta = cand;
                    ll = cand_ll;
                    improved = true;
                    if gain < LL_TOL * (1.0 + ll.abs()) {
                        return Ok((beta, ll));
                    }
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                break; // at numerical optimum
            }
        }
        Ok((beta, ll))
    }

    /// One-dimensional ascent in the dispersion over its box, by sign
    /// bisection on the derivative in log space.
    fn maximize_dispersion(&self, beta: [f64; 2], r_start: f64) -> f64 {
        let g_lo = self.dispersion_grad(beta, DISPERSION_MIN);
        let g_hi = self.dispersion_grad(beta, DISPERSION_MAX);
        let mut candidates = vec![r_start];
        if g_lo <= 0.0 {
            candidates.push(DISPERSION_MIN);
        }
        if g_hi >= 0.0 {
            candidates.push(DISPERSION_MAX);
        }
        if g_lo > 0.0 && g_hi < 0.0 {
            let mut lo = DISPERSION_MIN.ln();
            let mut hi = DISPERSION_MAX.ln();
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if self.dispersion_grad(beta, mid.exp()) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-13 {
                    break;
                }
            }
            candidates.push((0.5 * (lo + hi)).exp());
        }
        candidates
            .into_iter()
            .max_by(|a, b| {
                self.loglik(beta, *a)
                    .partial_cmp(&self.loglik(beta, *b))
                    .unwrap()
            })
            .unwrap()
    }
}

/// Newton ascent direction restricted to `dims`; falls back to the
/// gradient when the Hessian is not usable.
fn newton_direction(g: &[f64; 2], h: &[[f64; 2]; 2], dims: &[usize]) -> [f64; 2] {
    let mut dir = [0.0; 2];
    match dims.len() {
        0 => {}
        1 => {
            let k = dims[0];
            if h[k][k] < 0.0 {
                dir[k] = -g[k] / h[k][k];
            } else {
                dir[k] = g[k];
            }
        }
        _ => {
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            // solve H d = -g; require negative definiteness
            if det > 0.0 && h[0][0] < 0.0 {
                dir[0] = (-g[0] * h[1][1] + g[1] * h[0][1]) / det;
                dir[1] = (-g[1] * h[0][0] + g[0] * h[1][0]) / det;
            } else {
                dir[0] = g[0];
                dir[1] = g[1];
            }
        }
    }
    // guard against a descent or degenerate direction
    let ascent: f64 = dims.iter().map(|&k| dir[k] * g[k]).sum();
    if ascent <= 0.0 {
        for &k in dims {
            dir[k] = g[k];
        }
    }
    dir
}

/// Maximum likelihood fit over the feasible box `beta >= 0`,
/// `r in [1e-6, 1e8]`. The contract is the stationarity condition at the
/// returned point, not a particular algorithm.
pub fn fit(cov: &Covariates, variant: ModelVariant) -> Result<FitResult> {
    let obj = Objective::new(cov, variant)?;
    let total_y: u64 = (0..cov.len()).filter(|&i| obj.mask[i]).map(|i| cov.y[i]).sum();
    if total_y == 0 {
        // boundary maximizer: no exposures observed
        let dispersion = match variant.family {
            Family::Poisson => None,
            Family::NegBin => Some(DISPERSION_MAX),
        };
        return Ok(FitResult {
            beta_loc: 0.0,
            beta_mob: 0.0,
            dispersion,
            loglik: 0.0,
        });
    }
    let sum_xl: f64 = cov.x_loc.iter().sum();
    let sum_xm: f64 = cov.x_mob.iter().sum();
    let ty = total_y as f64;
    let mut beta = [
        if sum_xl > 0.0 { 0.5 * ty / sum_xl } else { 0.0 },
        if variant.with_mobility && sum_xm > 0.0 {
            0.5 * ty / sum_xm
        } else {
            0.0
        },
    ];
    match variant.family {
        Family::Poisson => {
            let (b, ll) = obj.maximize_beta(beta, 1.0)?;
            Ok(FitResult {
                beta_loc: b[0],
                beta_mob: b[1],
                dispersion: None,
                loglik: ll,
            })
        }
        Family::NegBin => {
            let mut r = 10.0;
            let mut ll = f64::NEG_INFINITY;
            for sweep in 0..MAX_ALTERNATIONS {
                let (b, _) = obj.maximize_beta(beta, r)?;
                beta = b;
                r = obj.maximize_dispersion(beta, r);
                let new_ll = obj.loglik(beta, r);
                if sweep > 0 && (new_ll - ll).abs() < LL_TOL * (1.0 + new_ll.abs()) {
                    ll = new_ll;
                    break;
                }
                ll = new_ll;
            }
            Ok(FitResult {
                beta_loc: beta[0],
                beta_mob: beta[1],
                dispersion: Some(r),
                loglik: ll,
            })
        }
    }
}

/// Percentile bootstrap summary.
#[derive(Debug, Clone)]
pub struct BootstrapSummary {
    pub replicas: Vec<FitResult>,
    pub ci_beta_loc: (f64, f64),
    pub ci_beta_mob: (f64, f64),
    pub ci_dispersion: Option<(f64, f64)>,
}

/// Stable seed derivation so every (date, model, replica) triple maps to
/// a fixed stream regardless of scheduling.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut z = base ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        z ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(z << 6) ^ (z >> 2);
        z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z ^= z >> 27;
        z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

fn resample(point: &FitResult, cov: &Covariates, family: Family, rng: &mut ChaCha8Rng) -> Covariates {
    let y = (0..cov.len())
        .map(|i| {
            let lambda = cov.rate(i, point.beta_loc, point.beta_mob);
            if lambda <= 0.0 {
                return 0;
            }
            let mean = match family {
                Family::Poisson => lambda,
                Family::NegBin => {
                    let r = point.dispersion.expect("negbin fit carries dispersion");
                    let gamma = Gamma::new(r, lambda / r).expect("valid gamma");
                    gamma.sample(rng)
                }
            };
            if mean <= 0.0 {
                0
            } else {
                Poisson::new(mean).expect("positive mean").sample(rng) as u64
            }
        })
        .collect();
    Covariates {
        x_loc: cov.x_loc.clone(),
        x_mob: cov.x_mob.clone(),
        y,
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

fn ci95(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (percentile(&v, 0.025), percentile(&v, 0.975))
}

/// Parametric bootstrap: resamples counts from the fitted observation
/// model, refits each replica, and summarizes 95% percentile intervals.
/// Failed replicas are dropped with a warning; more than 10% dropped is
/// an error.
pub fn bootstrap(
    point: &FitResult,
    cov: &Covariates,
    variant: ModelVariant,
    b: usize,
    seed: u64,
) -> Result<BootstrapSummary> {
    assert!(b >= 1);
    let fits: Vec<Option<FitResult>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[rep as u64]));
            let sample = resample(point, cov, variant.family, &mut rng);
            match fit(&sample, variant) {
                Ok(f) => Some(f),
                Err(e) => {
                    warn!("bootstrap replica {rep} failed: {e}");
                    None
                }
            }
        })
        .collect();
    let replicas: Vec<FitResult> = fits.iter().filter_map(|f| *f).collect();
    let dropped = b - replicas.len();
    if dropped * 10 > b {
        return Err(Error::TooManyDroppedReplicas { dropped, total: b });
    }
    let ci_beta_loc = ci95(replicas.iter().map(|f| f.beta_loc));
    let ci_beta_mob = ci95(replicas.iter().map(|f| f.beta_mob));
    let ci_dispersion = match variant.family {
        Family::Poisson => None,
        Family::NegBin => Some(ci95(
            replicas.iter().map(|f| f.dispersion.unwrap_or(f64::NAN)),
        )),
    };
    Ok(BootstrapSummary {
        replicas,
        ci_beta_loc,
        ci_beta_mob,
        ci_dispersion,
    })
}

/// Fraction of local contacts and the contact-infectivity product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    pub p_local: f64,
    pub eps_c: f64,
    /// Set when both rates are zero and p = 1 is reported by convention.
    pub degenerate: bool,
}

/// `p = N beta_loc / (2 beta_mob Σ M_ij + N beta_loc)` and
/// `eps_c = beta_loc / p`.
pub fn derived_params(
    beta_loc: f64,
    beta_mob: f64,
    total_mobility: f64,
    total_population: f64,
) -> Result<DerivedParams> {
    if beta_mob == 0.0 {
        return Ok(DerivedParams {
            p_local: 1.0,
            eps_c: beta_loc,
            degenerate: beta_loc == 0.0,
        });
    }
    if beta_loc == 0.0 {
        return Err(Error::UndefinedLocalFraction);
    }
    let p = total_population * beta_loc
        / (2.0 * beta_mob * total_mobility + total_population * beta_loc);
    Ok(DerivedParams {
        p_local: p,
        eps_c: beta_loc / p,
        degenerate: false,
    })
}

/// Akaike information criterion, `2k - 2 log L`.
pub fn aic(loglik: f64, param_count: usize) -> f64 {
    2.0 * param_count as f64 - 2.0 * loglik
}

/// Full per-day estimation output.
#[derive(Debug, Clone)]
pub struct EstimateRecord {
    pub date: NaiveDate,
    pub variant: ModelVariant,
    pub beta_loc: f64,
    pub beta_mob: f64,
    pub dispersion: Option<f64>,
    pub loglik: f64,
    pub aic: f64,
    pub bootstrap: BootstrapSummary,
    pub p_local: f64,
    pub eps_c: f64,
    pub p_degenerate: bool,
}

/// AIC difference `AIC(without) - AIC(with)`; positive values favor the
/// with-mobility model. Both records must describe the same day and family.
pub fn compare_aic(with: &EstimateRecord, without: &EstimateRecord) -> Result<f64> {
    if with.date != without.date {
        return Err(Error::MismatchedData(format!(
            "dates {} vs {}",
            with.date, without.date
        )));
    }
    if with.variant.family != without.variant.family
        || !with.variant.with_mobility
        || without.variant.with_mobility
    {
        return Err(Error::MismatchedData(format!(
            "variants {} vs {}",
            with.variant.name(),
            without.variant.name()
        )));
    }
    Ok(without.aic - with.aic)
}

/// Fits one day end to end: point estimate, bootstrap intervals, AIC, and
/// derived contact parameters.
pub fn estimate_day(
    date: NaiveDate,
    cov: &Covariates,
    variant: ModelVariant,
    total_mobility: f64,
    total_population: f64,
    b: usize,
    seed: u64,
) -> Result<EstimateRecord> {
    let point = fit(cov, variant)?;
    let boot = bootstrap(&point, cov, variant, b, seed)?;
    let derived = match derived_params(
        point.beta_loc,
        point.beta_mob,
        total_mobility,
        total_population,
    ) {
        Ok(d) => d,
        // report the undefined case explicitly rather than failing the day
        Err(Error::UndefinedLocalFraction) => DerivedParams {
            p_local: 0.0,
            eps_c: f64::NAN,
            degenerate: true,
        },
        Err(e) => return Err(e),
    };
    Ok(EstimateRecord {
        date,
        variant,
        beta_loc: point.beta_loc,
        beta_mob: point.beta_mob,
        dispersion: point.dispersion,
        loglik: point.loglik,
        aic: aic(point.loglik, variant.param_count()),
        bootstrap: boot,
        p_local: derived.p_local,
        eps_c: derived.eps_c,
        p_degenerate: derived.degenerate,
    })
}
