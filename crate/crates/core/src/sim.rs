//! Pulse-level Monte Carlo of the protocol.
//!
//! Every pulse pair owns one ChaCha8 block (16 words) addressed by its
//! index, so a pulse's random draws depend only on `(seed, index)`. Chunks
//! can be simulated in any order, on any number of threads, and the merged
//! tallies are bit-identical to a serial run.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelParams, IntensitySet, ProtocolConfig};
use crate::optics::{click_probability, split_at_beamsplitter, x_basis_stats, z_basis_gain};

/// Words of the ChaCha stream reserved per pulse.
const WORDS_PER_PULSE: u128 = 16;
/// Pulses per work item; only affects scheduling, never results.
const CHUNK: u64 = 1 << 18;

pub const DECOY_LABELS: [&str; 3] = ["mu", "nu", "omega"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettingTally {
    pub pulses_sent: u64,
    pub d0_only: u64,
    pub d1_only: u64,
    pub both: u64,
    pub neither: u64,
    /// X basis only: single-click events on the wrong detector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_count: Option<u64>,
}

impl SettingTally {
    pub fn single_clicks(&self) -> u64 {
        self.d0_only + self.d1_only
    }

    fn check(&self, label: &str) -> Result<()> {
        let sum = self.d0_only + self.d1_only + self.both + self.neither;
        if sum != self.pulses_sent {
            return Err(Error::Config(format!(
                "setting `{label}`: outcome counts sum to {sum}, pulses_sent is {}",
                self.pulses_sent
            )));
        }
        if let Some(e) = self.error_count {
            if e > self.single_clicks() {
                return Err(Error::Config(format!(
                    "setting `{label}`: error_count {e} exceeds single clicks {}",
                    self.single_clicks()
                )));
            }
        }
        Ok(())
    }
}

/// Raw detection tallies for every setting of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TallyRepr", into = "TallyRepr")]
pub struct TallyMatrix {
    pub intensities: IntensitySet,
    /// X basis, relative phase `[0, pi]`.
    pub x: [SettingTally; 2],
    /// Z basis, `[alice decoy][bob decoy]` in `[mu, nu, omega]` order.
    pub z: [[SettingTally; 3]; 3],
}

#[derive(Serialize, Deserialize)]
struct TallyRepr {
    intensities: IntensitySet,
    settings: BTreeMap<String, SettingTally>,
}

fn x_label(i: usize) -> String {
    ["x_phase_0", "x_phase_pi"][i].to_string()
}

fn z_label(i: usize, j: usize) -> String {
    format!("z_{}_{}", DECOY_LABELS[i], DECOY_LABELS[j])
}

impl From<TallyMatrix> for TallyRepr {
    fn from(t: TallyMatrix) -> Self {
        let mut settings = BTreeMap::new();
        for (i, s) in t.x.iter().enumerate() {
            settings.insert(x_label(i), *s);
        }
        for i in 0..3 {
            for j in 0..3 {
                settings.insert(z_label(i, j), t.z[i][j]);
            }
        }
        TallyRepr {
            intensities: t.intensities,
            settings,
        }
    }
}

impl TryFrom<TallyRepr> for TallyMatrix {
    type Error = Error;

    fn try_from(mut r: TallyRepr) -> Result<Self> {
        let mut take = |label: String| {
            r.settings
                .remove(&label)
                .ok_or(Error::MissingSetting(label))
        };
        let x = [take(x_label(0))?, take(x_label(1))?];
        let mut z = [[SettingTally::default(); 3]; 3];
        for (i, row) in z.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = take(z_label(i, j))?;
            }
        }
        if let Some(extra) = r.settings.keys().next() {
            return Err(Error::Config(format!("unknown setting `{extra}`")));
        }
        let t = TallyMatrix {
            intensities: r.intensities,
            x,
            z,
        };
        t.validate()?;
        Ok(t)
    }
}

impl TallyMatrix {
    fn empty(intensities: IntensitySet) -> Self {
        let mut x = [SettingTally::default(); 2];
        for s in &mut x {
            s.error_count = Some(0);
        }
        Self {
            intensities,
            x,
            z: [[SettingTally::default(); 3]; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.x.iter().enumerate() {
            s.check(&x_label(i))?;
            if s.error_count.is_none() {
                return Err(Error::Config(format!("setting `{}` lacks error_count", x_label(i))));
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                self.z[i][j].check(&z_label(i, j))?;
            }
        }
        Ok(())
    }

    pub fn total_pulses(&self) -> u64 {
        self.x.iter().map(|s| s.pulses_sent).sum::<u64>()
            + self.z.iter().flatten().map(|s| s.pulses_sent).sum::<u64>()
    }

    fn merge(mut self, other: &Self) -> Self {
        let add = |a: &mut SettingTally, b: &SettingTally| {
            a.pulses_sent += b.pulses_sent;
            a.d0_only += b.d0_only;
            a.d1_only += b.d1_only;
            a.both += b.both;
            a.neither += b.neither;
            a.error_count = match (a.error_count, b.error_count) {
                (Some(x), Some(y)) => Some(x + y),
                (x, None) | (None, x) => x,
            };
        };
        for (a, b) in self.x.iter_mut().zip(other.x.iter()) {
            add(a, b);
        }
        for (ra, rb) in self.z.iter_mut().zip(other.z.iter()) {
            for (a, b) in ra.iter_mut().zip(rb.iter()) {
                add(a, b);
            }
        }
        self
    }
}

#[inline]
fn unit(u: u64) -> f64 {
    (u >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Everything a pulse needs that does not depend on its random draws.
struct PulseModel {
    p_x: f64,
    decoy_cdf: [f64; 2],
    /// `(P(D0 click), P(D1 click))` for relative phase 0 and pi.
    x_clicks: [(f64, f64); 2],
    /// Arrival means `(eta_a * a, eta_b * b)` per decoy pair.
    z_arrivals: [[(f64, f64); 3]; 3],
    visibility: f64,
    p_dark: f64,
}

impl PulseModel {
    fn new(config: &ProtocolConfig, channel: &ChannelParams, intensities: &IntensitySet) -> Self {
        let xa = channel.eta_a * intensities.s_a;
        let xb = channel.eta_b * intensities.s_b;
        let x_clicks = [1.0, -1.0].map(|cos_phi| {
            let (m0, m1) = split_at_beamsplitter(xa, xb, channel.visibility, cos_phi);
            (
                click_probability(m0, channel.p_dark),
                click_probability(m1, channel.p_dark),
            )
        });
        let emitted = intensities.emitted_decoys();
        let mut z_arrivals = [[(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                z_arrivals[i][j] = (channel.eta_a * emitted[i], channel.eta_b * emitted[j]);
            }
        }
        let d = config.decoy_probs;
        Self {
            p_x: config.p_x_basis,
            decoy_cdf: [d[0], d[0] + d[1]],
            x_clicks,
            z_arrivals,
            visibility: channel.visibility,
            p_dark: channel.p_dark,
        }
    }

    #[inline]
    fn decoy(&self, u: f64) -> usize {
        if u < self.decoy_cdf[0] {
            0
        } else if u < self.decoy_cdf[1] {
            1
        } else {
            2
        }
    }

    fn run_range(&self, seed: u64, start: u64, end: u64, intensities: IntensitySet) -> TallyMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(start as u128 * WORDS_PER_PULSE);
        let mut tally = TallyMatrix::empty(intensities);
        let mut draws = [0u64; 8];
        for _ in start..end {
            for d in &mut draws {
                *d = rng.next_u64();
            }
            let click0_u = unit(draws[4]);
            let click1_u = unit(draws[5]);
            let (setting, c0, c1, phase_index) = if unit(draws[0]) < self.p_x {
                let theta_a = draws[1] >> 63;
                let theta_b = draws[2] >> 63;
                let k = (theta_a ^ theta_b) as usize;
                let (c0, c1) = self.x_clicks[k];
                (&mut tally.x[k], c0, c1, Some(k))
            } else {
                let i = self.decoy(unit(draws[1]));
                let j = self.decoy(unit(draws[2]));
                let phi = 2.0 * PI * unit(draws[3]);
                let (a, b) = self.z_arrivals[i][j];
                let (m0, m1) = split_at_beamsplitter(a, b, self.visibility, phi.cos());
                (
                    &mut tally.z[i][j],
                    click_probability(m0, self.p_dark),
                    click_probability(m1, self.p_dark),
                    None,
                )
            };
            setting.pulses_sent += 1;
            match (click0_u < c0, click1_u < c1) {
                (true, false) => {
                    setting.d0_only += 1;
                    if phase_index == Some(1) {
                        *setting.error_count.as_mut().unwrap() += 1;
                    }
                }
                (false, true) => {
                    setting.d1_only += 1;
                    if phase_index == Some(0) {
                        *setting.error_count.as_mut().unwrap() += 1;
                    }
                }
                (true, true) => setting.both += 1,
                (false, false) => setting.neither += 1,
            }
        }
        tally
    }
}

/// Simulates `config.n_pulses` pulse pairs. Parallelism comes from the
/// ambient rayon pool; the result does not depend on it.
pub fn simulate_run(
    config: &ProtocolConfig,
    channel: &ChannelParams,
    intensities: &IntensitySet,
    seed: u64,
) -> Result<TallyMatrix> {
    if config.n_pulses == 0 {
        return Err(Error::EmptyTally);
    }
    config.validate()?;
    channel.validate()?;
    intensities.validate()?;
    let model = PulseModel::new(config, channel, intensities);
    let n = config.n_pulses;
    let chunks = n.div_ceil(CHUNK);
    let tally = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            model.run_range(seed, start, (start + CHUNK).min(n), *intensities)
        })
        .reduce(
            || TallyMatrix::empty(*intensities),
            |a, b| a.merge(&b),
        );
    Ok(tally)
}

/// Simulates pulses `[start, end)` only; used to check that any split of
/// the index range reproduces the full run.
pub fn simulate_range(
    config: &ProtocolConfig,
    channel: &ChannelParams,
    intensities: &IntensitySet,
    seed: u64,
    start: u64,
    end: u64,
) -> TallyMatrix {
    PulseModel::new(config, channel, intensities).run_range(seed, start, end, *intensities)
}

/// Merges tallies of disjoint pulse ranges.
pub fn merge_tallies(parts: &[TallyMatrix]) -> Option<TallyMatrix> {
    let (first, rest) = parts.split_first()?;
    Some(rest.iter().fold(first.clone(), |acc, t| acc.merge(t)))
}

/// Success count over trial count, with the ratio when defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountEstimate {
    /// Real-valued so that expected counts can stand in for observed ones.
    pub events: f64,
    pub trials: f64,
    /// `events / trials`, or `None` when there were no trials.
    pub estimate: Option<f64>,
}

impl CountEstimate {
    pub fn new(events: f64, trials: f64) -> Self {
        Self {
            events,
            trials,
            estimate: (trials > 0.0).then(|| events / trials),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedStats {
    pub intensities: IntensitySet,
    pub n_total: f64,
    /// Single clicks over X-basis pulses.
    pub q_x: CountEstimate,
    /// Wrong-detector single clicks over X-basis single clicks.
    pub e_x: CountEstimate,
    /// Z-basis gains, `[alice][bob]` in `[mu, nu, omega]` order.
    pub q_z: [[CountEstimate; 3]; 3],
}

impl ObservedStats {
    /// Counts a run of `config.n_pulses` would produce on average.
    pub fn expected(config: &ProtocolConfig, channel: &ChannelParams, intensities: &IntensitySet) -> Result<Self> {
        let x = x_basis_stats(channel, intensities.s_a, intensities.s_b)?;
        let x_trials = config.x_trials();
        let singles = x.q_x * x_trials;
        let emitted = intensities.emitted_decoys();
        let mut q_z = [[CountEstimate::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let trials = config.z_trials(i, j);
                let gain = z_basis_gain(channel, emitted[i], emitted[j])?;
                q_z[i][j] = CountEstimate::new(gain * trials, trials);
            }
        }
        Ok(Self {
            intensities: *intensities,
            n_total: config.n_pulses as f64,
            q_x: CountEstimate::new(singles, x_trials),
            e_x: CountEstimate::new(x.e_x * singles, singles),
            q_z,
        })
    }

    /// Names of settings without data.
    pub fn missing_settings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.q_x.estimate.is_none() {
            out.push("x".to_string());
        }
        for i in 0..3 {
            for j in 0..3 {
                if self.q_z[i][j].estimate.is_none() {
                    out.push(z_label(i, j));
                }
            }
        }
        out
    }
}

pub fn tallies_to_observations(tallies: &TallyMatrix) -> Result<ObservedStats> {
    tallies.validate()?;
    let n_total = tallies.total_pulses();
    if n_total == 0 {
        return Err(Error::EmptyTally);
    }
    let x_sent: u64 = tallies.x.iter().map(|s| s.pulses_sent).sum();
    let x_single: u64 = tallies.x.iter().map(|s| s.single_clicks()).sum();
    let x_err: u64 = tallies.x.iter().map(|s| s.error_count.unwrap_or(0)).sum();
    let mut q_z = [[CountEstimate::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let s = tallies.z[i][j];
            q_z[i][j] = CountEstimate::new(s.single_clicks() as f64, s.pulses_sent as f64);
        }
    }
    Ok(ObservedStats {
        intensities: tallies.intensities,
        n_total: n_total as f64,
        q_x: CountEstimate::new(x_single as f64, x_sent as f64),
        e_x: CountEstimate::new(x_err as f64, x_single as f64),
        q_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(n: u64) -> ProtocolConfig {
        ProtocolConfig {
            n_pulses: n,
            ..Default::default()
        }
    }

    fn table_40db() -> (ChannelParams, IntensitySet) {
        (
            ChannelParams::from_losses_db(25.0, 15.0, 7e-7, 0.998).unwrap(),
            IntensitySet::new(0.0448, 0.00529, 0.3, 0.12).unwrap(),
        )
    }

    #[test]
    fn dark_and_empty_gives_neither() {
        let ch = ChannelParams::new(0.1, 0.1, 0.0, 1.0).unwrap();
        let set = IntensitySet {
            s_a: 0.0,
            s_b: 0.0,
            mu: 2e-300,
            nu: 1e-300,
            omega: 0.0,
            vacuum_leak: 0.0,
        };
        let t = simulate_run(&small_config(10_000), &ch, &set, 3).unwrap();
        assert_eq!(t.total_pulses(), 10_000);
        for s in t.x.iter().chain(t.z.iter().flatten()) {
            assert_eq!(s.neither, s.pulses_sent);
        }
    }

    #[test]
    fn same_seed_same_tallies() {
        let (ch, set) = table_40db();
        let a = simulate_run(&small_config(300_000), &ch, &set, 11).unwrap();
        let b = simulate_run(&small_config(300_000), &ch, &set, 11).unwrap();
        assert_eq!(a, b);
        let c = simulate_run(&small_config(300_000), &ch, &set, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_ranges_reproduce_full_run() {
        let (ch, set) = table_40db();
        let cfg = small_config(100_000);
        let full = simulate_range(&cfg, &ch, &set, 5, 0, 100_000);
        let parts = [
            simulate_range(&cfg, &ch, &set, 5, 0, 1),
            simulate_range(&cfg, &ch, &set, 5, 1, 33_333),
            simulate_range(&cfg, &ch, &set, 5, 33_333, 100_000),
        ];
        assert_eq!(merge_tallies(&parts).unwrap(), full);
        assert_eq!(simulate_run(&cfg, &ch, &set, 5).unwrap(), full);
    }

    #[test]
    fn zero_pulses_rejected() {
        let (ch, set) = table_40db();
        let cfg = small_config(0);
        assert_eq!(simulate_run(&cfg, &ch, &set, 1), Err(Error::EmptyTally));
    }

    #[test]
    fn observation_arithmetic() {
        let (_, set) = table_40db();
        let mut t = TallyMatrix::empty(set);
        t.z[0][0] = SettingTally {
            pulses_sent: 100,
            d0_only: 5,
            d1_only: 5,
            both: 0,
            neither: 90,
            error_count: None,
        };
        t.x[0] = SettingTally {
            pulses_sent: 50,
            d0_only: 9,
            d1_only: 1,
            both: 0,
            neither: 40,
            error_count: Some(1),
        };
        let obs = tallies_to_observations(&t).unwrap();
        assert_eq!(obs.q_z[0][0].estimate, Some(0.1));
        assert_eq!(obs.e_x.estimate, Some(0.1));
        assert_eq!(obs.q_z[1][1].estimate, None);
        assert!(obs.missing_settings().contains(&"z_nu_nu".to_string()));
    }

    #[test]
    fn tally_json_round_trip() {
        let (ch, set) = table_40db();
        let t = simulate_run(&small_config(50_000), &ch, &set, 9).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"z_mu_omega\""));
        let back: TallyMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }

    #[test]
    fn inconsistent_tally_rejected() {
        let (ch, set) = table_40db();
        let t = simulate_run(&small_config(10_000), &ch, &set, 9).unwrap();
        let mut v: serde_json::Value = serde_json::to_value(&t).unwrap();
        v["settings"]["z_mu_mu"]["neither"] = serde_json::json!(0);
        assert!(serde_json::from_value::<TallyMatrix>(v).is_err());
    }
}
