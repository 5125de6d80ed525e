//! Exact photon-number yields for Fock inputs `|n> (x) |m>`.
//!
//! Photons are thinned binomially by each arm, the survivors are pushed
//! through the beamsplitter in the Fock basis, and the output pattern is
//! read by threshold detectors with dark counts. Finite visibility is a
//! mixture: with probability `V^2` the photons interfere, otherwise each one
//! is routed to either detector with probability 1/2.

use crate::error::{Error, Result};
use crate::model::{ln_factorial, ChannelParams};

fn binomial(n: usize, k: usize) -> f64 {
    (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)).exp().round()
}

fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let ln = ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
        + k as f64 * p.ln()
        + (n - k) as f64 * (1.0 - p).ln();
    ln.exp()
}

/// Output distribution over photons in the `D0` port for `k` photons in the
/// Alice mode and `l` in the Bob mode, using
/// `a -> (c + d)/sqrt2`, `b -> (c - d)/sqrt2`.
fn interfering_distribution(k: usize, l: usize) -> Vec<f64> {
    let total = k + l;
    let norm_ln = -(total as f64) * 0.5 * std::f64::consts::LN_2 - 0.5 * (ln_factorial(k) + ln_factorial(l));
    (0..=total)
        .map(|j| {
            let mut amp = 0.0;
            for r in j.saturating_sub(l)..=j.min(k) {
                let t = j - r;
                let sign = if (l - t) % 2 == 0 { 1.0 } else { -1.0 };
                amp += sign * binomial(k, r) * binomial(l, t);
            }
            let scale = (norm_ln + 0.5 * (ln_factorial(j) + ln_factorial(total - j))).exp();
            let a = amp * scale;
            a * a
        })
        .collect()
}

fn random_routing_distribution(total: usize) -> Vec<f64> {
    (0..=total).map(|j| binomial_pmf(total, j, 0.5)).collect()
}

fn exactly_one_click(photons_d0: usize, photons_d1: usize, p_dark: f64) -> f64 {
    let c0 = if photons_d0 > 0 { 1.0 } else { p_dark };
    let c1 = if photons_d1 > 0 { 1.0 } else { p_dark };
    c0 * (1.0 - c1) + c1 * (1.0 - c0)
}

fn yield_after_loss(k: usize, l: usize, channel: &ChannelParams) -> f64 {
    let total = k + l;
    let v2 = channel.visibility * channel.visibility;
    let coherent = if v2 > 0.0 { interfering_distribution(k, l) } else { vec![0.0; total + 1] };
    let random = random_routing_distribution(total);
    (0..=total)
        .map(|j| {
            let p = v2 * coherent[j] + (1.0 - v2) * random[j];
            p * exactly_one_click(j, total - j, channel.p_dark)
        })
        .sum()
}

/// Exactly-one-click probability for `n` photons from Alice and `m` from
/// Bob; `n` and `m` must not exceed `n_cut`.
pub fn true_yield(channel: &ChannelParams, n: usize, m: usize, n_cut: usize) -> Result<f64> {
    if n > n_cut || m > n_cut {
        return Err(Error::Config(format!(
            "photon numbers ({n}, {m}) exceed truncation n_cut = {n_cut}"
        )));
    }
    Ok(true_yield_unchecked(channel, n, m))
}

fn true_yield_unchecked(channel: &ChannelParams, n: usize, m: usize) -> f64 {
    let mut total = 0.0;
    for k in 0..=n {
        let pk = binomial_pmf(n, k, channel.eta_a);
        if pk == 0.0 {
            continue;
        }
        for l in 0..=m {
            let pl = binomial_pmf(m, l, channel.eta_b);
            if pl == 0.0 {
                continue;
            }
            total += pk * pl * yield_after_loss(k, l, channel);
        }
    }
    total.clamp(0.0, 1.0)
}

/// `Y[n][m]` for all `0 <= n, m <= n_cut`.
pub fn true_yield_matrix(channel: &ChannelParams, n_cut: usize) -> Vec<Vec<f64>> {
    (0..=n_cut)
        .map(|n| (0..=n_cut).map(|m| true_yield_unchecked(channel, n, m)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel(eta_a: f64, eta_b: f64, p_dark: f64, v: f64) -> ChannelParams {
        ChannelParams::new(eta_a, eta_b, p_dark, v).unwrap()
    }

    #[test]
    fn vacuum_yield_is_dark_counts() {
        let p = 7e-7;
        let y = true_yield(&channel(0.3, 0.2, p, 0.998), 0, 0, 10).unwrap();
        assert!((y - 2.0 * p * (1.0 - p)).abs() < 1e-20);
    }

    #[test]
    fn hong_ou_mandel_bunching() {
        let ch = channel(1.0, 1.0, 0.0, 1.0);
        assert!((true_yield(&ch, 1, 1, 10).unwrap() - 1.0).abs() < 1e-14);
        // output of |1,1>: half |2,0>, half |0,2>, nothing in |1,1>
        let dist = interfering_distribution(1, 1);
        assert!((dist[0] - 0.5).abs() < 1e-15);
        assert!(dist[1].abs() < 1e-15);
        assert!((dist[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_photon_survives_with_transmittance() {
        let ch = channel(0.1, 0.5, 0.0, 1.0);
        assert!((true_yield(&ch, 1, 0, 10).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn interfering_distribution_normalized() {
        for k in 0..8 {
            for l in 0..8 {
                let s: f64 = interfering_distribution(k, l).iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "k={k} l={l} sum={s}");
            }
        }
    }

    #[test]
    fn above_truncation_rejected() {
        assert!(true_yield(&channel(0.1, 0.1, 0.0, 1.0), 11, 0, 10).is_err());
    }
}
