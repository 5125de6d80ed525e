//! Expected detection statistics for two coherent states interfering on
//! Charlie's 50:50 beamsplitter, watched by two threshold detectors with dark
//! counts. Only exactly-one-click events are kept; double clicks are
//! discarded.
//!
//! Detector `D0` is the constructive port for a relative phase of zero, so
//! with `delta_phi = 0` a lone `D0` click is the correct announcement.

mod fock;
pub mod timing;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ChannelParams;

pub use fock::{true_yield, true_yield_matrix};

/// Quadrature points for the phase average over a uniform relative phase.
pub const DEFAULT_QUADRATURE_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XBasisStats {
    /// Probability of an exactly-one-click event per X-basis pulse pair.
    pub q_x: f64,
    /// Error probability conditioned on an exactly-one-click event.
    pub e_x: f64,
    /// False when `q_x == 0`, in which case `e_x` is reported as 0.
    pub e_x_defined: bool,
}

fn check_intensity(name: &'static str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::domain(name, v, "finite and >= 0"));
    }
    Ok(())
}

/// Mean photon numbers arriving at `(D0, D1)` for sent intensities `s_a`,
/// `s_b` and relative phase `delta_phi`.
pub fn detector_intensities(channel: &ChannelParams, s_a: f64, s_b: f64, delta_phi: f64) -> (f64, f64) {
    let a = channel.eta_a * s_a;
    let b = channel.eta_b * s_b;
    split_at_beamsplitter(a, b, channel.visibility, delta_phi.cos())
}

#[inline]
pub(crate) fn split_at_beamsplitter(a: f64, b: f64, visibility: f64, cos_phi: f64) -> (f64, f64) {
    let sum = a + b;
    let cross = visibility * (a * b).sqrt() * cos_phi;
    let d0 = 0.5 * sum + cross;
    // d1 = sum - d0 keeps the pair summing to `sum` up to one rounding
    let d0 = d0.clamp(0.0, sum);
    (d0, sum - d0)
}

/// Click probability of a threshold detector receiving mean photon number `mean`.
#[inline]
pub(crate) fn click_probability(mean: f64, p_dark: f64) -> f64 {
    p_dark - (1.0 - p_dark) * (-mean).exp_m1()
}

/// `(P(D0 alone), P(D1 alone))` for independent detectors.
#[inline]
pub(crate) fn single_click_probabilities(mean_d0: f64, mean_d1: f64, p_dark: f64) -> (f64, f64) {
    let c0 = click_probability(mean_d0, p_dark);
    let c1 = click_probability(mean_d1, p_dark);
    (c0 * (1.0 - c1), c1 * (1.0 - c0))
}

/// X-basis gain and bit error rate, averaged over relative phases 0 and pi.
pub fn x_basis_stats(channel: &ChannelParams, s_a: f64, s_b: f64) -> Result<XBasisStats> {
    check_intensity("s_a", s_a)?;
    check_intensity("s_b", s_b)?;
    let a = channel.eta_a * s_a;
    let b = channel.eta_b * s_b;
    let mut gain = 0.0;
    let mut errors = 0.0;
    for cos_phi in [1.0, -1.0] {
        let (m0, m1) = split_at_beamsplitter(a, b, channel.visibility, cos_phi);
        let (only0, only1) = single_click_probabilities(m0, m1, channel.p_dark);
        gain += 0.5 * (only0 + only1);
        errors += 0.5 * if cos_phi > 0.0 { only1 } else { only0 };
    }
    if gain > 0.0 {
        Ok(XBasisStats {
            q_x: gain,
            e_x: errors / gain,
            e_x_defined: true,
        })
    } else {
        Ok(XBasisStats {
            q_x: 0.0,
            e_x: 0.0,
            e_x_defined: false,
        })
    }
}

/// Exactly-one-click probability for phase-randomized inputs of intensity
/// `a_int` (Alice) and `b_int` (Bob).
pub fn z_basis_gain(channel: &ChannelParams, a_int: f64, b_int: f64) -> Result<f64> {
    z_basis_gain_with_points(channel, a_int, b_int, DEFAULT_QUADRATURE_POINTS)
}

/// Trapezoid rule over `points` equally spaced phases. The integrand is
/// smooth and periodic, so the rule converges geometrically.
pub fn z_basis_gain_with_points(channel: &ChannelParams, a_int: f64, b_int: f64, points: usize) -> Result<f64> {
    check_intensity("a_int", a_int)?;
    check_intensity("b_int", b_int)?;
    if points == 0 {
        return Err(Error::Config("quadrature needs at least one point".into()));
    }
    let a = channel.eta_a * a_int;
    let b = channel.eta_b * b_int;
    let step = 2.0 * PI / points as f64;
    let total: f64 = (0..points)
        .map(|k| {
            let (m0, m1) = split_at_beamsplitter(a, b, channel.visibility, (k as f64 * step).cos());
            let (only0, only1) = single_click_probabilities(m0, m1, channel.p_dark);
            only0 + only1
        })
        .sum();
    Ok(total / points as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel(eta_a: f64, eta_b: f64, p_dark: f64, v: f64) -> ChannelParams {
        ChannelParams::new(eta_a, eta_b, p_dark, v).unwrap()
    }

    #[test]
    fn destructive_and_constructive_interference() {
        let ch = channel(1e-3, 1e-2, 0.0, 1.0);
        let x = 0.005;
        let (d0, d1) = detector_intensities(&ch, x / 1e-3, x / 1e-2, PI);
        assert!(d0.abs() < 1e-15);
        assert!((d1 - 2.0 * x).abs() < 1e-15);
        let (d0, d1) = detector_intensities(&ch, x / 1e-3, x / 1e-2, 0.0);
        assert!((d0 - 0.01).abs() < 1e-15);
        assert!(d1.abs() < 1e-15);
    }

    #[test]
    fn partial_visibility_intensities() {
        let ch = channel(1.0, 1.0, 0.0, 0.998);
        let (d0, d1) = detector_intensities(&ch, 0.003, 0.002, 0.0);
        let cross = 0.998 * (0.003f64 * 0.002).sqrt();
        assert!((d0 - (0.0025 + cross)).abs() < 1e-16);
        assert!((d1 - (0.0025 - cross)).abs() < 1e-16);
        assert_eq!(d0 + d1, 0.005);
    }

    #[test]
    fn x_basis_matched_arrivals_have_no_errors() {
        let ch = channel(0.1, 0.4, 0.0, 1.0);
        let st = x_basis_stats(&ch, 0.025, 0.00625).unwrap();
        // all light reaches D0 with mean (sqrt(a) + sqrt(b))^2 / 2 = 0.005
        assert!((st.q_x + (-0.005f64).exp_m1()).abs() < 1e-17);
        assert!((st.q_x - 0.0049875).abs() < 1e-7);
        assert!(st.e_x.abs() < 1e-15);
    }

    #[test]
    fn x_basis_dark_counts_only() {
        let p = 7e-7;
        let ch = channel(0.1, 0.1, p, 0.998);
        let st = x_basis_stats(&ch, 0.0, 0.0).unwrap();
        // four click patterns; the two single-click ones each have p(1-p)
        assert!((st.q_x - 2.0 * p * (1.0 - p)).abs() < 1e-20);
        assert!((st.e_x - 0.5).abs() < 1e-12);
    }

    #[test]
    fn x_basis_undefined_without_clicks() {
        let ch = channel(0.1, 0.1, 0.0, 1.0);
        let st = x_basis_stats(&ch, 0.0, 0.0).unwrap();
        assert_eq!(st.q_x, 0.0);
        assert!(!st.e_x_defined);
    }

    #[test]
    fn z_gain_dark_only() {
        let p = 7e-7;
        let ch = channel(0.1, 0.2, p, 0.5);
        let g = z_basis_gain(&ch, 0.0, 0.0).unwrap();
        assert!((g - 2.0 * p * (1.0 - p)).abs() < 1e-20);
    }

    #[test]
    fn z_gain_without_interference_matches_independent_sources() {
        // V = 0: each detector sees an independent Poisson mean (a+b)/2
        let p = 1e-5;
        let ch = channel(1e-3, 1e-2, p, 0.0);
        let g = z_basis_gain(&ch, 0.3, 0.12).unwrap();
        let half: f64 = 0.5 * (1e-3 * 0.3 + 1e-2 * 0.12);
        let c = 1.0 - (1.0 - p) * (-half).exp();
        assert!((g / (2.0 * c * (1.0 - c)) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn z_gain_quadrature_converged() {
        let ch = channel(1e-3, 1e-2, 7e-7, 0.998);
        let coarse = z_basis_gain_with_points(&ch, 0.3, 0.3, 256).unwrap();
        let fine = z_basis_gain_with_points(&ch, 0.3, 0.3, 4096).unwrap();
        assert!(((coarse - fine) / fine).abs() < 1e-8);
        let doubled = z_basis_gain_with_points(&ch, 0.3, 0.3, 512).unwrap();
        assert!(((coarse - doubled) / doubled).abs() < 1e-8);
    }

    #[test]
    fn negative_intensity_rejected() {
        let ch = channel(0.1, 0.1, 0.0, 1.0);
        assert!(x_basis_stats(&ch, -0.1, 0.0).is_err());
        assert!(z_basis_gain(&ch, 0.1, -0.1).is_err());
    }
}
