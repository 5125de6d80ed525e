//! Channel-asymmetry compensation strategies, intensity optimization and
//! loss sweeps.

mod nelder_mead;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyrate::{analytic_rate, analytic_report, KeyRateReport, Objective};
use crate::model::{db_to_transmittance, plob_bound, ChannelParams, IntensitySet, ProtocolConfig};

pub use nelder_mead::{halton, minimize, Minimum, NelderMeadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Signal intensities chosen independently per side.
    AsymmetricIntensities,
    /// Extra attenuation on the less lossy arm, equal signal intensities.
    AddLoss { added_db: f64 },
    /// Equal signal intensities on the asymmetric channel.
    NoCompensation,
}

impl Strategy {
    /// Short label used in CSV output.
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::AsymmetricIntensities => "asym",
            Strategy::AddLoss { .. } => "add_loss",
            Strategy::NoCompensation => "no_comp",
        }
    }

    pub fn from_label(label: &str, added_db: f64) -> Option<Self> {
        match label {
            "asym" => Some(Strategy::AsymmetricIntensities),
            "add_loss" => Some(Strategy::AddLoss { added_db }),
            "no_comp" => Some(Strategy::NoCompensation),
            _ => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppliedStrategy {
    /// Channel the senders actually face.
    pub channel: ChannelParams,
    /// Whether `s_a = s_b` is enforced.
    pub equal_signals: bool,
    pub warning: Option<String>,
}

pub fn apply_strategy(channel: &ChannelParams, strategy: Strategy) -> Result<AppliedStrategy> {
    channel.validate()?;
    Ok(match strategy {
        Strategy::AsymmetricIntensities => AppliedStrategy {
            channel: *channel,
            equal_signals: false,
            warning: None,
        },
        Strategy::NoCompensation => AppliedStrategy {
            channel: *channel,
            equal_signals: true,
            warning: None,
        },
        Strategy::AddLoss { added_db } => {
            let extra = db_to_transmittance(added_db)?;
            let mut ch = *channel;
            let a_is_lossier = ch.eta_a <= ch.eta_b;
            if a_is_lossier {
                ch.eta_b *= extra;
            } else {
                ch.eta_a *= extra;
            }
            let overshoot = if a_is_lossier { ch.eta_b < ch.eta_a } else { ch.eta_a < ch.eta_b };
            let relative = (ch.eta_a / ch.eta_b).ln().abs();
            let warning = (overshoot && relative > 1e-9).then(|| {
                format!("added loss of {added_db} dB makes the channel asymmetric the other way")
            });
            AppliedStrategy {
                channel: ch,
                equal_signals: true,
                warning,
            }
        }
    })
}

const S_LOG10_RANGE: (f64, f64) = (-5.0, 0.0);
const MU_RANGE: (f64, f64) = (0.05, 1.5);
const NU_MIN: f64 = 0.005;
const NU_MAX_FRACTION: f64 = 1.0 / 1.5;
const STARTS: usize = 8;

/// Maps a point of the unit cube to intensities. Signals are searched in
/// log10, `mu` in log, and `nu` log-interpolated inside `[0.005, mu / 1.5]`.
fn decode(u: &[f64], equal_signals: bool) -> IntensitySet {
    let lerp = |t: f64, (lo, hi): (f64, f64)| lo + t.clamp(0.0, 1.0) * (hi - lo);
    let s_a = 10f64.powf(lerp(u[0], S_LOG10_RANGE));
    let (s_b, rest) = if equal_signals {
        (s_a, &u[1..])
    } else {
        (10f64.powf(lerp(u[1], S_LOG10_RANGE)), &u[2..])
    };
    let mu = lerp(rest[0], (MU_RANGE.0.ln(), MU_RANGE.1.ln())).exp();
    let nu = lerp(rest[1], (NU_MIN.ln(), (mu * NU_MAX_FRACTION).ln())).exp();
    IntensitySet {
        s_a,
        s_b,
        mu,
        nu,
        omega: 0.0,
        vacuum_leak: 0.0,
    }
}

fn encode(set: &IntensitySet, equal_signals: bool) -> Vec<f64> {
    let inv = |v: f64, (lo, hi): (f64, f64)| ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
    let mut u = vec![inv(set.s_a.log10(), S_LOG10_RANGE)];
    if !equal_signals {
        u.push(inv(set.s_b.log10(), S_LOG10_RANGE));
    }
    u.push(inv(set.mu.ln(), (MU_RANGE.0.ln(), MU_RANGE.1.ln())));
    u.push(inv(set.nu.ln(), (NU_MIN.ln(), (set.mu * NU_MAX_FRACTION).ln())));
    u
}

/// Value the optimizer maximizes: the unclamped rate, pushed further down
/// when the phase-error bound is saturated so flat regions still have slope.
fn objective_value(channel: &ChannelParams, set: &IntensitySet, config: &ProtocolConfig, objective: Objective) -> f64 {
    match analytic_rate(channel, set, config, objective) {
        Ok(b) => {
            let excess = b
                .phase_error
                .map(|pe| ((pe.even_sum.powi(2) + pe.odd_sum.powi(2)) / b.q_x - 0.5).max(0.0))
                .unwrap_or(1.0);
            b.raw_rate - b.q_x.abs() * excess
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedIntensities {
    pub intensities: IntensitySet,
    /// Report on the effective channel (after the strategy is applied).
    pub report: KeyRateReport,
    /// False when every start ended at zero rate.
    pub informative: bool,
    pub objective: Objective,
    pub warning: Option<String>,
}

impl OptimizedIntensities {
    pub fn rate(&self) -> f64 {
        match self.objective {
            Objective::Infinite => self.report.r_inf,
            Objective::Finite => self.report.r_fin,
        }
    }
}

/// Multi-start downhill simplex over `(s_a, s_b, mu, nu)` with `omega = 0`.
/// Starts are a fixed Halton sequence plus one matched-arrival guess, so the
/// result is deterministic.
pub fn optimize_intensities(
    channel: &ChannelParams,
    strategy: Strategy,
    config: &ProtocolConfig,
    objective: Objective,
) -> Result<OptimizedIntensities> {
    config.validate()?;
    let applied = apply_strategy(channel, strategy)?;
    let ch = applied.channel;
    let equal = applied.equal_signals;
    let dim = if equal { 3 } else { 4 };

    let mut starts: Vec<Vec<f64>> = (1..=STARTS).map(|i| halton(i, dim)).collect();
    let s_ref = 0.02f64;
    let guess = IntensitySet {
        s_a: if equal { s_ref } else { s_ref * (ch.eta_b / ch.eta_a).sqrt() },
        s_b: if equal { s_ref } else { s_ref * (ch.eta_a / ch.eta_b).sqrt() },
        mu: 0.4,
        nu: 0.12,
        omega: 0.0,
        vacuum_leak: 0.0,
    };
    starts.push(encode(&guess, equal));

    let opts = NelderMeadOptions::default();
    let mut best: Option<Minimum> = None;
    for start in &starts {
        let mut f = |u: &[f64]| -objective_value(&ch, &decode(u, equal), config, objective);
        let m = minimize(&mut f, start, &opts);
        // polish from the end point; a restart escapes premature collapse
        let m = {
            let again = minimize(&mut f, &m.x, &opts);
            if again.f <= m.f {
                again
            } else {
                m
            }
        };
        if best.as_ref().map_or(true, |b| m.f < b.f) {
            best = Some(m);
        }
    }
    let best = best.expect("at least one start");
    let intensities = decode(&best.x, equal);
    let report = analytic_report(&ch, &intensities, config)?;
    let rate = match objective {
        Objective::Infinite => report.r_inf,
        Objective::Finite => report.r_fin,
    };
    Ok(OptimizedIntensities {
        intensities,
        report,
        informative: rate > 0.0,
        objective,
        warning: applied.warning,
    })
}

/// How a total loss is split between the arms: arm A carries
/// `(L + difference) / 2` dB, arm B `(L - difference) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSplit {
    pub difference_db: f64,
}

impl Default for LossSplit {
    fn default() -> Self {
        Self { difference_db: 10.0 }
    }
}

impl LossSplit {
    pub fn arms(&self, total_db: f64) -> Result<(f64, f64)> {
        let a = 0.5 * (total_db + self.difference_db);
        let b = 0.5 * (total_db - self.difference_db);
        if !(a >= 0.0 && b >= 0.0) {
            return Err(Error::Config(format!(
                "total loss {total_db} dB cannot be split with a {} dB difference",
                self.difference_db
            )));
        }
        Ok((a, b))
    }
}

/// Detector and interference parameters shared by every point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConditions {
    pub p_dark: f64,
    pub visibility: f64,
    pub split: LossSplit,
    pub objective: Objective,
}

impl Default for ScanConditions {
    fn default() -> Self {
        Self {
            p_dark: 7e-7,
            visibility: 0.998,
            split: LossSplit::default(),
            objective: Objective::Infinite,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub total_loss_db: f64,
    pub eta_a: f64,
    pub eta_b: f64,
    pub strategy: Strategy,
    pub intensities: IntensitySet,
    pub r_inf: f64,
    pub r_fin: f64,
    pub plob: f64,
    pub informative: bool,
}

impl ScanRow {
    pub fn eta_total(&self) -> f64 {
        self.eta_a * self.eta_b
    }
}

/// One optimized row per `(loss, strategy)`, in input order. Rows are
/// computed in parallel on the ambient rayon pool.
pub fn scan_losses(
    losses_db: &[f64],
    strategies: &[Strategy],
    config: &ProtocolConfig,
    conditions: &ScanConditions,
) -> Result<Vec<ScanRow>> {
    if losses_db.is_empty() {
        return Err(Error::Config("loss list is empty".into()));
    }
    let mut jobs = Vec::with_capacity(losses_db.len() * strategies.len());
    for &loss in losses_db {
        let (a_db, b_db) = conditions.split.arms(loss)?;
        let channel = ChannelParams::from_losses_db(a_db, b_db, conditions.p_dark, conditions.visibility)?;
        for &strategy in strategies {
            jobs.push((loss, channel, strategy));
        }
    }
    jobs.into_par_iter()
        .map(|(loss, channel, strategy)| {
            let opt = optimize_intensities(&channel, strategy, config, conditions.objective)?;
            Ok(ScanRow {
                total_loss_db: loss,
                eta_a: channel.eta_a,
                eta_b: channel.eta_b,
                strategy,
                intensities: opt.intensities,
                r_inf: opt.report.r_inf,
                r_fin: opt.report.r_fin.min(opt.report.r_inf),
                plob: plob_bound(channel.eta_total())?,
                informative: opt.informative,
            })
        })
        .collect()
}

/// Least-squares slope of `log10(r_inf)` against `log10(eta_total)` over
/// rows with a positive rate.
pub fn fit_scaling_exponent(rows: &[ScanRow]) -> Result<f64> {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.r_inf > 0.0)
        .map(|r| (r.eta_total().log10(), r.r_inf.log10()))
        .collect();
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "slope fit needs at least 4 rows with positive rate, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all rows share one transmittance".into()));
    }
    Ok(sxy / sxx)
}

pub const CSV_HEADER: &str = "total_loss_db,strategy,s_a,s_b,mu,nu,r_inf,r_fin,plob";

fn sig6(v: f64) -> String {
    format!("{v:.5e}")
}

/// Sweep rows as CSV, six significant digits.
pub fn scan_to_csv(rows: &[ScanRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let fields = [
            sig6(r.total_loss_db),
            r.strategy.label().to_string(),
            sig6(r.intensities.s_a),
            sig6(r.intensities.s_b),
            sig6(r.intensities.mu),
            sig6(r.intensities.nu),
            sig6(r.r_inf),
            sig6(r.r_fin),
            sig6(r.plob),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// A parsed CSV line.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub total_loss_db: f64,
    pub strategy: String,
    pub s_a: f64,
    pub s_b: f64,
    pub mu: f64,
    pub nu: f64,
    pub r_inf: f64,
    pub r_fin: f64,
    pub plob: f64,
}

pub fn parse_scan_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!("unexpected CSV header {other:?}")));
        }
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(Error::Config(format!("CSV line {} has {} fields", i + 2, f.len())));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("CSV line {}: {e}", i + 2)))
            };
            Ok(CsvRow {
                total_loss_db: num(f[0])?,
                strategy: f[1].trim().to_string(),
                s_a: num(f[2])?,
                s_b: num(f[3])?,
                mu: num(f[4])?,
                nu: num(f[5])?,
                r_inf: num(f[6])?,
                r_fin: num(f[7])?,
                plob: num(f[8])?,
            })
        })
        .collect()
}
