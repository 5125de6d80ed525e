//! Phase-error bound and secret key rates per pulse.
//!
//! The signal states are expanded in photon-number parity (cat states);
//! with `c_k(s) = sqrt(p_k(s))` the phase error rate is bounded by
//!
//! ```text
//! e_ph <= [ (sum c_2n(s_a) c_2m(s_b) sqrt(Y_2n,2m))^2
//!         + (sum c_2n+1(s_a) c_2m+1(s_b) sqrt(Y_2n+1,2m+1))^2 ] / Q_X
//! ```
//!
//! and the rate is `Q_X [1 - h(e_ph) - f_ec h(E_X)]`. Basis and intensity
//! selection probabilities are not folded into the per-pulse rate.

use serde::{Deserialize, Serialize};

use crate::decoy::{DecoyProgram, DeviationMethod, GainInterval, GainMatrix, YieldBounds};
use crate::error::{Error, Result};
use crate::model::{binary_entropy, poisson_unchecked, ChannelParams, IntensitySet, ProtocolConfig};
use crate::sim::{CountEstimate, ObservedStats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseErrorBound {
    pub e_ph_up: f64,
    /// Even-parity amplitude sum, truncation tail included.
    pub even_sum: f64,
    pub odd_sum: f64,
    /// Part of `even_sum` from photon numbers beyond `n_cut` (yield 1).
    pub even_tail: f64,
    pub odd_tail: f64,
    /// True when the raw bound exceeded 1 and was clamped.
    pub clamped: bool,
}

/// `(sum over k of parity `parity` of sqrt(p_k(s)), same sum for k <= n_cut)`.
fn parity_amplitude_sums(s: f64, parity: usize, n_cut: usize) -> (f64, f64) {
    let mut full = 0.0;
    let mut truncated = 0.0;
    let mut k = parity;
    loop {
        let c = poisson_unchecked(k, s).sqrt();
        full += c;
        if k <= n_cut {
            truncated += c;
        }
        if k > n_cut && (k as f64) > s && c < 1e-300f64.max(full * 1e-18) {
            break;
        }
        if k > 2000 {
            break;
        }
        k += 2;
    }
    (full, truncated)
}

/// Upper bound on the phase error rate given yield upper bounds.
pub fn phase_error_bound(s_a: f64, s_b: f64, yields: &YieldBounds, q_x: f64) -> Result<PhaseErrorBound> {
    if !(q_x > 0.0) {
        return Err(Error::domain("q_x", q_x, "q_x > 0"));
    }
    for (name, s) in [("s_a", s_a), ("s_b", s_b)] {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::domain(name, s, "finite and >= 0"));
        }
    }
    let n_cut = yields.n_cut;
    let amp_a: Vec<f64> = (0..=n_cut).map(|k| poisson_unchecked(k, s_a).sqrt()).collect();
    let amp_b: Vec<f64> = (0..=n_cut).map(|k| poisson_unchecked(k, s_b).sqrt()).collect();

    let mut sums = [0.0f64; 2];
    let mut tails = [0.0f64; 2];
    for parity in 0..2 {
        let mut inner = 0.0;
        for n in (parity..=n_cut).step_by(2) {
            for m in (parity..=n_cut).step_by(2) {
                let y = yields.y_up[n][m].clamp(0.0, 1.0);
                inner += amp_a[n] * amp_b[m] * y.sqrt();
            }
        }
        let (full_a, cut_a) = parity_amplitude_sums(s_a, parity, n_cut);
        let (full_b, cut_b) = parity_amplitude_sums(s_b, parity, n_cut);
        let tail = (full_a * full_b - cut_a * cut_b).max(0.0);
        tails[parity] = tail;
        sums[parity] = inner + tail;
    }
    let raw = (sums[0] * sums[0] + sums[1] * sums[1]) / q_x;
    Ok(PhaseErrorBound {
        e_ph_up: raw.min(1.0),
        even_sum: sums[0],
        odd_sum: sums[1],
        even_tail: tails[0],
        odd_tail: tails[1],
        clamped: raw > 1.0,
    })
}

/// Entropy term used in the rate; saturates at 1 from `e = 1/2` upward so a
/// large error rate can never look like a small one.
fn rate_entropy(e: f64) -> f64 {
    binary_entropy(e.clamp(0.0, 0.5)).unwrap_or(1.0)
}

/// `q_x [1 - h(e_ph) - f_ec h(e_x)]` before clamping at zero.
pub fn key_rate_unclamped(q_x: f64, e_x: f64, e_ph_up: f64, f_ec: f64) -> f64 {
    q_x * (1.0 - rate_entropy(e_ph_up) - f_ec * rate_entropy(e_x))
}

pub fn secret_key_rate_inf(q_x: f64, e_x: f64, e_ph_up: f64, f_ec: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q_x) {
        return Err(Error::domain("q_x", q_x, "0 <= q_x <= 1"));
    }
    if !(0.0..=1.0).contains(&e_x) {
        return Err(Error::domain("e_x", e_x, "0 <= e_x <= 1"));
    }
    if !(0.0..=1.0).contains(&e_ph_up) {
        return Err(Error::domain("e_ph_up", e_ph_up, "0 <= e_ph_up <= 1"));
    }
    if !(f_ec >= 1.0) {
        return Err(Error::domain("f_ec", f_ec, "f_ec >= 1"));
    }
    Ok(key_rate_unclamped(q_x, e_x, e_ph_up, f_ec).max(0.0))
}

/// One regime's numbers (infinite or finite data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub q_x: f64,
    pub e_x: f64,
    pub e_ph_up: f64,
    pub rate: f64,
    /// Rate before clamping at zero; useful as an optimization objective.
    pub raw_rate: f64,
    pub phase_error: Option<PhaseErrorBound>,
    pub yields_fallback: bool,
}

impl RateBreakdown {
    fn zero(q_x: f64, e_x: f64) -> Self {
        Self {
            q_x,
            e_x,
            e_ph_up: 1.0,
            rate: 0.0,
            raw_rate: -q_x.max(f64::MIN_POSITIVE),
            phase_error: None,
            yields_fallback: false,
        }
    }
}

/// Fixed modeling conventions, echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub double_clicks: String,
    pub zero_phase_correct_detector: String,
    pub sifting_factors: String,
    pub entropy_saturation: String,
    pub rates_clamped_nonnegative: bool,
    pub phase_error_clamped_to_one: bool,
    pub deviation: DeviationMethod,
    pub eps_est: f64,
    pub f_ec: f64,
    pub n_cut: usize,
}

impl Conventions {
    pub fn from_config(config: &ProtocolConfig) -> Self {
        Self {
            double_clicks: "discarded".into(),
            zero_phase_correct_detector: "D0".into(),
            sifting_factors: "omitted from per-pulse rate".into(),
            entropy_saturation: "h(e) = 1 for e >= 0.5".into(),
            rates_clamped_nonnegative: true,
            phase_error_clamped_to_one: true,
            deviation: config.deviation,
            eps_est: config.eps_est,
            f_ec: config.f_ec,
            n_cut: config.n_cut,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub q_x: f64,
    pub e_x: f64,
    pub e_ph_up: f64,
    pub r_inf: f64,
    pub r_fin: f64,
    pub infinite: RateBreakdown,
    pub finite: RateBreakdown,
    pub intensities: IntensitySet,
    #[serde(default)]
    pub channel: Option<ChannelParams>,
    pub protocol: ProtocolConfig,
    pub conventions: Conventions,
}

/// Which regime an evaluation needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Infinite,
    Finite,
}

fn needed_for_phase_error(n: usize, m: usize) -> bool {
    n % 2 == m % 2
}

fn gains_with(obs: &ObservedStats, method: DeviationMethod, eps: f64) -> Result<GainMatrix> {
    let mut gains = [[GainInterval::exact(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let c = obs.q_z[i][j];
            if c.estimate.is_none() {
                return Err(Error::MissingSetting(format!(
                    "z_{}_{}",
                    crate::sim::DECOY_LABELS[i],
                    crate::sim::DECOY_LABELS[j]
                )));
            }
            gains[i][j] = method.interval(c.events, c.trials, eps)?;
        }
    }
    Ok(gains)
}

/// Gain intervals the finite-data analysis works with.
pub fn finite_gains(obs: &ObservedStats, config: &ProtocolConfig) -> Result<GainMatrix> {
    gains_with(obs, config.deviation, config.eps_est)
}

fn rate_from(
    q_x: f64,
    e_x: f64,
    intensities: &IntensitySet,
    yields: &YieldBounds,
    f_ec: f64,
) -> Result<RateBreakdown> {
    if !(q_x > 0.0) {
        return Ok(RateBreakdown::zero(q_x, e_x));
    }
    let pe = phase_error_bound(intensities.s_a, intensities.s_b, yields, q_x)?;
    let raw = key_rate_unclamped(q_x, e_x, pe.e_ph_up, f_ec);
    Ok(RateBreakdown {
        q_x,
        e_x,
        e_ph_up: pe.e_ph_up,
        rate: raw.max(0.0),
        raw_rate: raw,
        phase_error: Some(pe),
        yields_fallback: yields.trivial_fallback,
    })
}

fn x_point(obs: &ObservedStats) -> Result<(CountEstimate, f64)> {
    let q = obs.q_x;
    if q.estimate.is_none() {
        return Err(Error::MissingSetting("x".into()));
    }
    Ok((q, obs.e_x.estimate.unwrap_or(0.0)))
}

fn regime(obs: &ObservedStats, config: &ProtocolConfig, method: DeviationMethod) -> Result<RateBreakdown> {
    let (qx, e_hat) = x_point(obs)?;
    let eps = config.eps_est;
    let q_low = method.interval(qx.events, qx.trials, eps)?.q_low;
    let e_up = if obs.e_x.trials > 0.0 {
        method.interval(obs.e_x.events, obs.e_x.trials, eps)?.q_up
    } else {
        e_hat
    };
    if !(q_low > 0.0) {
        return Ok(RateBreakdown::zero(q_low, e_up));
    }
    let gains = gains_with(obs, method, eps)?;
    let program = DecoyProgram::new(&gains, obs.intensities.decoys(), config.n_cut)?;
    let yields = program.bounds_where(needed_for_phase_error);
    rate_from(q_low, e_up, &obs.intensities, &yields, config.f_ec)
}

/// Finite-data rate: pessimistic `Q_X` (lower end), `E_X` (upper end) and
/// yields from the deviated gains in `yields_fin`.
pub fn secret_key_rate_fin(
    obs: &ObservedStats,
    yields_fin: &YieldBounds,
    config: &ProtocolConfig,
) -> Result<RateBreakdown> {
    let missing = obs.missing_settings();
    if let Some(first) = missing.into_iter().next() {
        return Err(Error::MissingSetting(first));
    }
    let (qx, _) = x_point(obs)?;
    let eps = config.eps_est;
    let q_low = config.deviation.interval(qx.events, qx.trials, eps)?.q_low;
    let e_up = if obs.e_x.trials > 0.0 {
        config.deviation.interval(obs.e_x.events, obs.e_x.trials, eps)?.q_up
    } else {
        0.0
    };
    rate_from(q_low, e_up, &obs.intensities, yields_fin, config.f_ec)
}

/// Infinite-data breakdown from the point estimates of `obs`.
pub fn infinite_rate(obs: &ObservedStats, config: &ProtocolConfig) -> Result<RateBreakdown> {
    regime(obs, config, DeviationMethod::Exact)
}

/// Finite-data breakdown using the deviation method of `config`.
pub fn finite_rate(obs: &ObservedStats, config: &ProtocolConfig) -> Result<RateBreakdown> {
    regime(obs, config, config.deviation)
}

/// Both regimes from observed (or expected) counts.
pub fn analyze_observations(
    obs: &ObservedStats,
    config: &ProtocolConfig,
    channel: Option<ChannelParams>,
) -> Result<KeyRateReport> {
    config.validate()?;
    let missing = obs.missing_settings();
    if let Some(first) = missing.into_iter().next() {
        return Err(Error::MissingSetting(first));
    }
    let infinite = infinite_rate(obs, config)?;
    let finite = finite_rate(obs, config)?;
    Ok(KeyRateReport {
        q_x: infinite.q_x,
        e_x: infinite.e_x,
        e_ph_up: infinite.e_ph_up,
        r_inf: infinite.rate,
        r_fin: finite.rate,
        infinite,
        finite,
        intensities: obs.intensities,
        channel,
        protocol: *config,
        conventions: Conventions::from_config(config),
    })
}

/// Both regimes from the analytic expectation at `config.n_pulses`.
pub fn analytic_report(
    channel: &ChannelParams,
    intensities: &IntensitySet,
    config: &ProtocolConfig,
) -> Result<KeyRateReport> {
    let obs = ObservedStats::expected(config, channel, intensities)?;
    analyze_observations(&obs, config, Some(*channel))
}

/// Only the regime an optimizer needs.
pub fn analytic_rate(
    channel: &ChannelParams,
    intensities: &IntensitySet,
    config: &ProtocolConfig,
    objective: Objective,
) -> Result<RateBreakdown> {
    let obs = ObservedStats::expected(config, channel, intensities)?;
    match objective {
        Objective::Infinite => infinite_rate(&obs, config),
        Objective::Finite => finite_rate(&obs, config),
    }
}
