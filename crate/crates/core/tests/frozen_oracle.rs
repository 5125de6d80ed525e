//! Infinite-data rates at fixed intensities, frozen from an independent
//! implementation (separate Python model, gain-normalized LP rows solved
//! with HiGHS).

use tfqkd::keyrate::analytic_report;
use tfqkd::model::{ChannelParams, IntensitySet, ProtocolConfig};

const CASES: [(f64, bool, [f64; 4], f64); 6] = [
    (40.0, false, [0.0448, 0.00529, 0.300, 0.120], 1.285946082699e-4),
    (40.0, true, [0.0213, 0.0213, 0.481, 0.146], 4.553203816557e-5),
    (40.0, false, [0.0036, 0.0036, 0.247, 0.0923], 0.0),
    (50.0, false, [0.030, 0.00373, 0.514, 0.108], 2.154530754787e-5),
    (50.0, true, [0.0147, 0.0147, 0.444, 0.133], 3.837022205805e-6),
    (56.0, false, [0.0274, 0.0035, 0.401, 0.120], 4.994846795352e-6),
];

#[test]
fn infinite_rates_match_independent_implementation() {
    let config = ProtocolConfig::default();
    for (total, added_loss, [s_a, s_b, mu, nu], expected) in CASES {
        let mut ch = ChannelParams::from_losses_db((total + 10.0) / 2.0, (total - 10.0) / 2.0, 7e-7, 0.998).unwrap();
        if added_loss {
            ch.eta_b *= 0.1;
        }
        let r = analytic_report(&ch, &IntensitySet::new(s_a, s_b, mu, nu).unwrap(), &config).unwrap().r_inf;
        if expected == 0.0 {
            assert_eq!(r, 0.0);
        } else {
            assert!((r / expected - 1.0).abs() < 1e-6, "{total} dB: {r} vs {expected}");
        }
    }
}
