use proptest::prelude::*;
use tfqkd::model::{
    binary_entropy, db_to_transmittance, plob_bound, poisson_pn, transmittance_to_db, ChannelParams,
};
use tfqkd::optics::{detector_intensities, true_yield, x_basis_stats, z_basis_gain};

fn channel(eta_a: f64, eta_b: f64, p_dark: f64, v: f64) -> ChannelParams {
    ChannelParams::new(eta_a, eta_b, p_dark, v).unwrap()
}

proptest! {
    #[test]
    fn entropy_is_symmetric(x in 0.0f64..=1.0) {
        let a = binary_entropy(x).unwrap();
        let b = binary_entropy(1.0 - x).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn plob_increases_with_transmittance(e1 in 1e-9f64..0.99, e2 in 1e-9f64..0.99) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(plob_bound(lo).unwrap() <= plob_bound(hi).unwrap());
    }

    #[test]
    fn db_round_trip(db in 0.0f64..120.0) {
        let back = transmittance_to_db(db_to_transmittance(db).unwrap()).unwrap();
        prop_assert!((back - db).abs() < 1e-9);
    }

    #[test]
    fn beamsplitter_conserves_energy(
        eta_a in 1e-6f64..1.0, eta_b in 1e-6f64..1.0,
        s_a in 0.0f64..2.0, s_b in 0.0f64..2.0,
        v in 0.0f64..=1.0, phi in 0.0f64..std::f64::consts::TAU,
    ) {
        let ch = channel(eta_a, eta_b, 0.0, v);
        let (d0, d1) = detector_intensities(&ch, s_a, s_b, phi);
        prop_assert!(d0 >= 0.0 && d1 >= 0.0);
        let total = eta_a * s_a + eta_b * s_b;
        prop_assert!((d0 + d1 - total).abs() <= 2.0 * f64::EPSILON * total);
    }

    #[test]
    fn x_basis_symmetric_under_arm_swap(
        eta_a in 1e-6f64..1.0, eta_b in 1e-6f64..1.0,
        s_a in 0.0f64..1.0, s_b in 0.0f64..1.0,
        p in 0.0f64..1e-4, v in 0.9f64..=1.0,
    ) {
        let x = x_basis_stats(&channel(eta_a, eta_b, p, v), s_a, s_b).unwrap();
        let y = x_basis_stats(&channel(eta_b, eta_a, p, v), s_b, s_a).unwrap();
        prop_assert!((x.q_x - y.q_x).abs() <= 1e-15 * x.q_x.max(1e-300) + 1e-18);
        prop_assert!((x.e_x - y.e_x).abs() < 1e-9);
    }

    // Double clicks are discarded, so the kept gain eventually falls once
    // both detectors fire often; monotonicity holds while arrivals stay
    // well below one photon.
    #[test]
    fn z_gain_monotone_at_low_arrival(
        eta_a in 1e-4f64..0.1, eta_b in 1e-4f64..0.1,
        a in 0.0f64..1.0, b in 0.0f64..1.0, da in 0.0f64..0.5,
        p in 0.0f64..1e-5, dp in 0.0f64..1e-5,
    ) {
        let ch = channel(eta_a, eta_b, p, 0.998);
        let g = z_basis_gain(&ch, a, b).unwrap();
        prop_assert!(z_basis_gain(&ch, a + da, b).unwrap() >= g * (1.0 - 1e-12));
        prop_assert!(z_basis_gain(&ch, a, b + da).unwrap() >= g * (1.0 - 1e-12));
        prop_assert!(z_basis_gain(&channel(eta_a, eta_b, p + dp, 0.998), a, b).unwrap() >= g * (1.0 - 1e-12));
    }

    #[test]
    fn true_yield_monotone_at_low_transmittance(
        eta_a in 1e-4f64..0.1, eta_b in 1e-4f64..0.1, deta in 0.0f64..0.05,
        n in 0usize..4, m in 0usize..4, p in 0.0f64..1e-5, v in 0.9f64..=1.0,
    ) {
        let y = true_yield(&channel(eta_a, eta_b, p, v), n, m, 6).unwrap();
        prop_assert!((0.0..=1.0).contains(&y));
        let bigger = [
            true_yield(&channel(eta_a, eta_b, p, v), n + 1, m, 6).unwrap(),
            true_yield(&channel(eta_a, eta_b, p, v), n, m + 1, 6).unwrap(),
            true_yield(&channel(eta_a + deta, eta_b, p, v), n, m, 6).unwrap(),
            true_yield(&channel(eta_a, eta_b + deta, p, v), n, m, 6).unwrap(),
            true_yield(&channel(eta_a, eta_b, p + 1e-6, v), n, m, 6).unwrap(),
        ];
        for z in bigger {
            prop_assert!(z >= y - 1e-15, "{z} < {y}");
        }
    }
}

#[test]
fn double_clicks_break_monotonicity_at_high_transmittance() {
    // two surviving photons can fire both detectors; with eta = 0.9 this
    // outweighs the extra chance of a click
    let ch = channel(0.9, 0.9, 0.0, 0.0);
    let y10 = true_yield(&ch, 1, 0, 4).unwrap();
    let y20 = true_yield(&ch, 2, 0, 4).unwrap();
    assert!(y20 < y10);
}

/// Independent Fock-basis expansion against coherent-state quadrature at V = 1.
#[test]
fn fock_sum_matches_coherent_gain() {
    for (eta_a, eta_b) in [(1e-3, 1e-2), (0.2, 0.05), (0.7, 0.7)] {
        let ch = channel(eta_a, eta_b, 3e-6, 1.0);
        for (a, b) in [(0.3, 0.3), (0.5, 0.0), (0.12, 0.04), (0.0, 0.0)] {
            let n_max = 14;
            let mut sum = 0.0;
            for n in 0..=n_max {
                for m in 0..=n_max {
                    sum += poisson_pn(n, a).unwrap() * poisson_pn(m, b).unwrap() * true_yield(&ch, n, m, n_max).unwrap();
                }
            }
            let g = z_basis_gain(&ch, a, b).unwrap();
            assert!((sum - g).abs() < 1e-10, "eta ({eta_a}, {eta_b}) s ({a}, {b}): {sum} vs {g}");
        }
    }
}
