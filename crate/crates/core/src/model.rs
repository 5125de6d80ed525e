//! Shared domain types and the elementary functions everything else is built
//! from: Poisson photon-number statistics, binary entropy, decibel conversion
//! and the repeaterless (PLOB) bound.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::decoy::DeviationMethod;
use crate::error::{Error, Result};

/// Channel seen by the two senders. Detector efficiency is folded into the
/// arm transmittances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Alice to Charlie transmittance.
    pub eta_a: f64,
    /// Bob to Charlie transmittance.
    pub eta_b: f64,
    /// Dark-count probability per detector per gate.
    pub p_dark: f64,
    /// Interference visibility multiplying the cross term.
    pub visibility: f64,
}

impl ChannelParams {
    pub fn new(eta_a: f64, eta_b: f64, p_dark: f64, visibility: f64) -> Result<Self> {
        let channel = Self {
            eta_a,
            eta_b,
            p_dark,
            visibility,
        };
        channel.validate()?;
        Ok(channel)
    }

    /// Builds a channel from per-arm losses in dB.
    pub fn from_losses_db(loss_a_db: f64, loss_b_db: f64, p_dark: f64, visibility: f64) -> Result<Self> {
        Self::new(
            db_to_transmittance(loss_a_db)?,
            db_to_transmittance(loss_b_db)?,
            p_dark,
            visibility,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_a > 0.0 && self.eta_a <= 1.0) {
            return Err(Error::domain("eta_a", self.eta_a, "0 < eta_a <= 1"));
        }
        if !(self.eta_b > 0.0 && self.eta_b <= 1.0) {
            return Err(Error::domain("eta_b", self.eta_b, "0 < eta_b <= 1"));
        }
        if !(0.0..1.0).contains(&self.p_dark) {
            return Err(Error::domain("p_dark", self.p_dark, "0 <= p_dark < 1"));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::domain("visibility", self.visibility, "0 <= visibility <= 1"));
        }
        Ok(())
    }

    /// End-to-end Alice-to-Bob transmittance, the quantity the repeaterless
    /// bound is evaluated at.
    pub fn eta_total(&self) -> f64 {
        self.eta_a * self.eta_b
    }
}

/// Signal intensities per side plus the decoy set shared by both parties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensitySet {
    pub s_a: f64,
    pub s_b: f64,
    pub mu: f64,
    pub nu: f64,
    #[serde(default)]
    pub omega: f64,
    /// Residual intensity actually emitted for the `omega` setting, standing
    /// in for a finite modulator extinction ratio. The decoy analysis keeps
    /// assuming the nominal `omega`.
    #[serde(default)]
    pub vacuum_leak: f64,
}

impl IntensitySet {
    pub fn new(s_a: f64, s_b: f64, mu: f64, nu: f64) -> Result<Self> {
        let set = Self {
            s_a,
            s_b,
            mu,
            nu,
            omega: 0.0,
            vacuum_leak: 0.0,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("s_a", self.s_a),
            ("s_b", self.s_b),
            ("mu", self.mu),
            ("nu", self.nu),
            ("omega", self.omega),
            ("vacuum_leak", self.vacuum_leak),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(name, v, "finite and >= 0"));
            }
        }
        if !(self.mu > self.nu && self.nu > self.omega) {
            return Err(Error::Config(format!(
                "decoy intensities must satisfy mu > nu > omega, got mu={}, nu={}, omega={}",
                self.mu, self.nu, self.omega
            )));
        }
        Ok(())
    }

    /// Nominal decoy intensities in `[mu, nu, omega]` order.
    pub fn decoys(&self) -> [f64; 3] {
        [self.mu, self.nu, self.omega]
    }

    /// Decoy intensities as physically emitted (leak added to `omega`).
    pub fn emitted_decoys(&self) -> [f64; 3] {
        [self.mu, self.nu, self.omega + self.vacuum_leak]
    }
}

/// Protocol-level knobs not fixed by the physics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    /// Total pulse pairs sent to Charlie.
    pub n_pulses: u64,
    pub p_x_basis: f64,
    /// Probabilities of `[mu, nu, omega]` given the Z basis.
    pub decoy_probs: [f64; 3],
    /// Photon-number truncation for decoy and phase-error sums.
    pub n_cut: usize,
    pub f_ec: f64,
    pub eps_est: f64,
    pub deviation: DeviationMethod,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            n_pulses: 30_000_000_000,
            p_x_basis: 0.5,
            decoy_probs: [0.5, 0.4, 0.1],
            n_cut: 10,
            f_ec: 1.15,
            eps_est: 1e-10,
            deviation: DeviationMethod::Chernoff,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pulses < 1 {
            return Err(Error::Config("n_pulses must be at least 1".into()));
        }
        if !(self.p_x_basis > 0.0 && self.p_x_basis < 1.0) {
            return Err(Error::domain("p_x_basis", self.p_x_basis, "0 < p_x_basis < 1"));
        }
        if self.decoy_probs.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Config(format!(
                "decoy_probs must all be positive, got {:?}",
                self.decoy_probs
            )));
        }
        let total: f64 = self.decoy_probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("decoy_probs must sum to 1, got {total}")));
        }
        if self.n_cut < 2 {
            return Err(Error::Config(format!("n_cut must be >= 2, got {}", self.n_cut)));
        }
        if !(self.f_ec >= 1.0) {
            return Err(Error::domain("f_ec", self.f_ec, "f_ec >= 1"));
        }
        if !(self.eps_est > 0.0 && self.eps_est < 1.0) {
            return Err(Error::domain("eps_est", self.eps_est, "0 < eps_est < 1"));
        }
        Ok(())
    }

    /// Expected number of X-basis pulses.
    pub fn x_trials(&self) -> f64 {
        self.n_pulses as f64 * self.p_x_basis
    }

    /// Expected number of Z-basis pulses with decoy pair `(i, j)`.
    pub fn z_trials(&self, i: usize, j: usize) -> f64 {
        self.n_pulses as f64 * (1.0 - self.p_x_basis) * self.decoy_probs[i] * self.decoy_probs[j]
    }
}

const LN_FACTORIAL_TABLE: usize = 1024;

pub(crate) fn ln_factorial(k: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_TABLE);
        let mut acc = 0.0f64;
        t.push(0.0);
        for i in 1..LN_FACTORIAL_TABLE {
            acc += (i as f64).ln();
            t.push(acc);
        }
        t
    });
    if k < LN_FACTORIAL_TABLE {
        table[k]
    } else {
        // Stirling series; beyond the table the error is far below f64 resolution
        let n = k as f64;
        n * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI * n).ln() + 1.0 / (12.0 * n)
    }
}

/// Probability that a Poisson source of mean `intensity` emits `k` photons.
pub fn poisson_pn(k: usize, intensity: f64) -> Result<f64> {
    if !(intensity >= 0.0) || !intensity.is_finite() {
        return Err(Error::domain("intensity", intensity, "finite and >= 0"));
    }
    Ok(poisson_unchecked(k, intensity))
}

pub(crate) fn poisson_unchecked(k: usize, intensity: f64) -> f64 {
    if intensity == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (-intensity + k as f64 * intensity.ln() - ln_factorial(k)).exp()
}

/// `[p_0, ..., p_n]` for a Poisson source of mean `intensity`.
pub(crate) fn poisson_weights(intensity: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| poisson_unchecked(k, intensity)).collect()
}

/// Binary Shannon entropy in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain("x", x, "0 <= x <= 1"));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Repeaterless secret-key capacity per pulse, `-log2(1 - eta)`.
pub fn plob_bound(eta_total: f64) -> Result<f64> {
    if !(eta_total > 0.0 && eta_total < 1.0) {
        return Err(Error::domain("eta_total", eta_total, "0 < eta_total < 1"));
    }
    Ok(-(-eta_total).ln_1p() / std::f64::consts::LN_2)
}

pub fn db_to_transmittance(loss_db: f64) -> Result<f64> {
    if !(loss_db >= 0.0) || !loss_db.is_finite() {
        return Err(Error::domain("loss_db", loss_db, "finite and >= 0"));
    }
    Ok(10f64.powf(-loss_db / 10.0))
}

pub fn transmittance_to_db(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain("eta", eta, "0 < eta <= 1"));
    }
    Ok(-10.0 * eta.log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_examples() {
        assert_eq!(poisson_pn(0, 0.0).unwrap(), 1.0);
        assert!((poisson_pn(1, 0.1).unwrap() - 0.1 * (-0.1f64).exp()).abs() < 1e-15);
        assert!((poisson_pn(1, 0.1).unwrap() - 0.0904837).abs() < 5e-8);
        let total: f64 = (0..=60).map(|k| poisson_pn(k, 5.0).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(poisson_pn(3, -0.1).is_err());
    }

    #[test]
    fn poisson_large_k_is_finite() {
        let p = poisson_pn(40, 1.5).unwrap();
        assert!(p > 0.0);
        // 1.5^40 / 40! e^-1.5 evaluated with exact big-number arithmetic
        assert!((p / 3.0238731670333756e-42 - 1.0).abs() < 1e-10, "{p:e}");
    }

    #[test]
    fn binary_entropy_examples() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((binary_entropy(0.11).unwrap() - 0.499916).abs() < 1e-6);
        assert!(binary_entropy(-0.01).is_err());
        assert!(binary_entropy(1.01).is_err());
    }

    #[test]
    fn plob_examples() {
        assert!((plob_bound(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((plob_bound(1e-5).unwrap() - 1.4427e-5).abs() < 1e-9);
        assert!((plob_bound(1e-4).unwrap() - 1.4428e-4).abs() < 1e-8);
        assert!(plob_bound(1.0).is_err());
        assert!(plob_bound(0.0).is_err());
    }

    #[test]
    fn db_examples() {
        assert!((db_to_transmittance(10.0).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(db_to_transmittance(0.0).unwrap(), 1.0);
        assert!((db_to_transmittance(25.0).unwrap() - 3.1623e-3).abs() < 1e-7);
        assert!(db_to_transmittance(-1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ProtocolConfig::default().validate().is_ok());
        let bad = ProtocolConfig {
            decoy_probs: [0.5, 0.5, 0.1],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(IntensitySet::new(0.03, 0.003, 0.1, 0.2).is_err());
        assert!(ChannelParams::new(0.0, 0.1, 0.0, 1.0).is_err());
        assert!(ChannelParams::new(0.1, 0.1, 1.0, 1.0).is_err());
    }
}
