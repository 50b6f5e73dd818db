//! Synthetic option panels.
//!
//! A book of `contracts` calls is quoted every weekday. Each contract keeps
//! its strike and expiry until its maturity falls below seven days, when it
//! is replaced by a fresh contract struck relative to the current spot. The
//! spot follows a daily log-Euler path of the chosen world.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::Tape;
use crate::panel::{OptionPanel, OptionQuote, MAX_TAU, MIN_TAU};
use crate::rng::{derive_seed, rng_for, stream};
use crate::skr::{bsm_price, cos_price, CosConfig, HestonParams, SkInputs, SkrError};
use crate::surrogate::{simulate_price, SdeSpec, SurrogateError};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid panel specification: {0}")]
    Spec(String),
    #[error(transparent)]
    Skr(#[from] SkrError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelSpec {
    pub start: NaiveDate,
    /// Number of quote dates (weekdays).
    pub days: usize,
    /// Live contracts on every date.
    pub contracts: usize,
    pub s0: f64,
    pub r: f64,
    /// Physical drift of the spot.
    pub mu: f64,
    pub m_range: (f64, f64),
    pub tau_range: (f64, f64),
    /// Standard deviation of the multiplicative price noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for PanelSpec {
    fn default() -> Self {
        PanelSpec {
            start: NaiveDate::from_ymd_opt(2020, 1, 2).expect("valid date"),
            days: 20,
            contracts: 100,
            s0: 100.0,
            r: 0.02,
            mu: 0.05,
            m_range: (0.8, 1.2),
            tau_range: (MIN_TAU, MAX_TAU),
            noise: 0.0,
            seed: 0,
        }
    }
}

impl PanelSpec {
    fn validate(&self) -> Result<(), SynthError> {
        let ok = self.days > 0
            && self.contracts > 0
            && self.s0 > 0.0
            && self.m_range.0 > 0.0
            && self.m_range.0 < self.m_range.1
            && self.tau_range.0 >= MIN_TAU
            && self.tau_range.1 <= MAX_TAU
            && self.tau_range.0 < self.tau_range.1
            && self.noise >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(SynthError::Spec(format!("{self:?}")))
        }
    }
}

/// Weekdays from `start`, `n` of them.
pub fn weekdays(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

struct Contract {
    id: usize,
    k: f64,
    expiry: NaiveDate,
}

fn new_contract<R: Rng>(rng: &mut R, spec: &PanelSpec, id: usize, s: f64, today: NaiveDate) -> Contract {
    let m = rng.gen_range(spec.m_range.0..spec.m_range.1);
    let tau = rng.gen_range(spec.tau_range.0..spec.tau_range.1);
    let days = ((tau * 365.0).round() as i64).max(8);
    Contract {
        id,
        k: (m * s * 100.0).round() / 100.0,
        expiry: today + Duration::days(days),
    }
}

fn tau_of(today: NaiveDate, expiry: NaiveDate) -> f64 {
    (expiry - today).num_days() as f64 / 365.0
}

/// Quotes the contract book along `spots`, pricing with `price(date index, quote inputs)`.
fn quote_book<F>(spec: &PanelSpec, dates: &[NaiveDate], spots: &[f64], price: F) -> Result<OptionPanel, SynthError>
where
    F: Fn(usize, &SkInputs) -> Result<f64, SynthError>,
{
    let mut book_rng = rng_for(spec.seed, stream::DATASET);
    let mut noise_rng = rng_for(spec.seed, stream::NOISE);
    let mut next_id = 0;
    let mut book: Vec<Contract> = (0..spec.contracts)
        .map(|_| {
            next_id += 1;
            new_contract(&mut book_rng, spec, next_id - 1, spots[0], dates[0])
        })
        .collect();
    let mut quotes = Vec::with_capacity(dates.len() * spec.contracts);
    for (d, (&date, &s)) in dates.iter().zip(spots).enumerate() {
        for c in book.iter_mut() {
            if tau_of(date, c.expiry) < MIN_TAU {
                next_id += 1;
                *c = new_contract(&mut book_rng, spec, next_id - 1, s, date);
            }
            let tau = tau_of(date, c.expiry).min(MAX_TAU);
            let x = SkInputs::new(s, c.k, spec.r, tau)?;
            let clean = price(d, &x)?;
            let eps: f64 = noise_rng.sample(StandardNormal);
            let mid = clean * (1.0 + spec.noise * eps);
            quotes.push(OptionQuote {
                date,
                s,
                k: c.k,
                r: spec.r,
                tau,
                mid: if mid > 0.0 { mid } else { clean.max(f64::MIN_POSITIVE) },
                option_id: Some(format!("c{}", c.id)),
            });
        }
    }
    Ok(OptionPanel::new(quotes))
}

fn bsm_value(x: &SkInputs, sigma: f64) -> Result<f64, SkrError> {
    let tape = Tape::new();
    Ok(bsm_price(&x.lift(&tape), tape.constant(sigma))?.value())
}

/// Black–Scholes world with volatility `sigma`; mids are exact BSM prices
/// times (1 + noise·ε).
pub fn bsm_panel(spec: &PanelSpec, sigma: f64) -> Result<OptionPanel, SynthError> {
    spec.validate()?;
    if !(sigma > 0.0) {
        return Err(SynthError::Spec(format!("sigma = {sigma}")));
    }
    let dates = weekdays(spec.start, spec.days);
    let mut rng = rng_for(spec.seed, stream::SIMULATION);
    let mut spots = vec![spec.s0];
    for w in dates.windows(2) {
        let dt = (w[1] - w[0]).num_days() as f64 / 365.0;
        let z: f64 = rng.sample(StandardNormal);
        let last = *spots.last().expect("non-empty");
        spots.push(last * ((spec.mu - 0.5 * sigma * sigma) * dt + sigma * dt.sqrt() * z).exp());
    }
    quote_book(spec, &dates, &spots, |_, x| Ok(bsm_value(x, sigma)?))
}

/// Heston parameters in plain numbers, ordered as in the representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonWorld {
    pub v_theta: f64,
    pub v0: f64,
    pub sigma_v: f64,
    pub rho: f64,
    pub kappa: f64,
}

/// Heston world. The spot and variance follow a daily full-truncation path;
/// each quote is a Monte-Carlo price (with `paths` paths) started from the
/// current variance.
pub fn heston_panel(spec: &PanelSpec, h: &HestonWorld, paths: usize) -> Result<OptionPanel, SynthError> {
    spec.validate()?;
    let dates = weekdays(spec.start, spec.days);
    let mut rng = rng_for(spec.seed, stream::SIMULATION);
    let mut spots = vec![spec.s0];
    let mut vars = vec![h.v0];
    for w in dates.windows(2) {
        let dt = (w[1] - w[0]).num_days() as f64 / 365.0;
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let zv = h.rho * z1 + (1.0 - h.rho * h.rho).sqrt() * z2;
        let (s, v) = (*spots.last().expect("non-empty"), *vars.last().expect("non-empty"));
        let vp = v.max(0.0);
        spots.push(s * ((spec.mu - 0.5 * vp) * dt + (vp * dt).sqrt() * z1).exp());
        vars.push(v + h.kappa * (h.v_theta - vp) * dt + h.sigma_v * (vp * dt).sqrt() * zv);
    }
    let counter = std::sync::atomic::AtomicU64::new(0);
    quote_book(spec, &dates, &spots, |d, x| {
        let i = counter.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let sde = SdeSpec::heston(h.kappa, h.v_theta, h.sigma_v, h.rho, vars[d].max(1e-8))
            .with_paths(paths)
            .with_seed(derive_seed(spec.seed, stream::SIMULATION, i + 1));
        Ok(simulate_price(&sde, x)?.price)
    })
}

/// COS price of the same contract, for checking simulated quotes.
pub fn heston_cos_value(x: &SkInputs, h: &HestonWorld) -> Result<f64, SkrError> {
    let tape = Tape::new();
    let hv = HestonParams {
        v_theta: tape.constant(h.v_theta),
        v0: tape.constant(h.v0),
        sigma_v: tape.constant(h.sigma_v),
        rho: tape.constant(h.rho),
        kappa: tape.constant(h.kappa),
    };
    Ok(cos_price(&x.lift(&tape), &hv, None, &CosConfig::default())?.value())
}
