use tfqkd::optics::timing::{check_modulation_windows, fiber_delay_ns, ElementKind, LoopElement, LoopGeometry};

const PERIOD: f64 = 100.0;
const WIDTH: f64 = 0.9;

fn element(name: &str, kind: ElementKind, delay_ns: f64) -> LoopElement {
    LoopElement {
        name: name.into(),
        kind,
        delay_ns,
    }
}

/// Beamsplitter, Alice's modulator, a 7 km spool, Bob's attenuator and
/// modulator, then back to the beamsplitter.
fn spool_loop(mod_a: f64, mod_b_after_spool: f64, tail: f64) -> LoopGeometry {
    let spool = fiber_delay_ns(7000.0);
    let mod_b = mod_a + spool + mod_b_after_spool;
    LoopGeometry {
        elements: vec![
            element("bs", ElementKind::BeamSplitter, 0.0),
            element("mod_a", ElementKind::Modulator, mod_a),
            element("spool", ElementKind::Spool, mod_a + 0.5 * spool),
            element("att_b", ElementKind::Attenuator, mod_b - 1.0),
            element("mod_b", ElementKind::Modulator, mod_b),
        ],
        loop_delay_ns: mod_b + tail,
        pulse_period_ns: PERIOD,
        pulse_width_ns: WIDTH,
    }
}

/// Brute force: enumerate actual arrival instants of both pulse trains over
/// a long window and take the closest approach.
fn closest_approach(x: f64, loop_delay: f64) -> f64 {
    let mut best = f64::INFINITY;
    let span = (loop_delay / PERIOD).ceil() as i64 + 4;
    for k in 0..span {
        let cw = k as f64 * PERIOD + x;
        for j in 0..span {
            let ccw = j as f64 * PERIOD + (loop_delay - x);
            best = best.min((cw - ccw).abs());
        }
    }
    best
}

#[test]
fn spool_geometry_matches_time_arithmetic() {
    for (mod_a, after, tail) in [(12.0, 40.0, 25.0), (200.0, 333.3, 17.5), (15.0, 10.0, 15.0)] {
        let g = spool_loop(mod_a, after, tail);
        let report = check_modulation_windows(&g).unwrap();
        assert_eq!(report.modulators.len(), 2);
        for m in &report.modulators {
            let x = g.elements.iter().find(|e| e.name == m.name).unwrap().delay_ns;
            let oracle = closest_approach(x, g.loop_delay_ns);
            assert!((m.separation_ns - oracle).abs() < 1e-6, "{}: {} vs {oracle}", m.name, m.separation_ns);
            assert!((m.margin_ns - (oracle - WIDTH)).abs() < 1e-6);
        }
        let expect_pass = report.modulators.iter().all(|m| m.separation_ns > WIDTH);
        assert_eq!(report.pass, expect_pass);
    }
}

#[test]
fn loop_midpoint_always_collides() {
    let mut g = spool_loop(12.0, 40.0, 25.0);
    let mid = 0.5 * g.loop_delay_ns;
    g.elements[1].delay_ns = mid;
    let report = check_modulation_windows(&g).unwrap();
    assert!(!report.pass);
    assert!(report.conflicts.contains(&"mod_a".to_string()));
}

#[test]
fn shifting_the_whole_loop_changes_nothing() {
    let g = spool_loop(200.0, 333.3, 17.5);
    let base = check_modulation_windows(&g).unwrap();
    for shift in [0.25, 37.0, 1e4] {
        let moved = check_modulation_windows(&g.shifted(shift)).unwrap();
        assert_eq!(moved.pass, base.pass);
        assert_eq!(moved.conflicts, base.conflicts);
        for (a, b) in moved.modulators.iter().zip(&base.modulators) {
            assert!((a.margin_ns - b.margin_ns).abs() < 1e-6);
        }
    }
}

#[test]
fn malformed_geometries_are_rejected() {
    let mut g = spool_loop(12.0, 40.0, 25.0);
    g.elements.push(element("bs2", ElementKind::BeamSplitter, 5.0));
    assert!(check_modulation_windows(&g).is_err());
    let mut g = spool_loop(12.0, 40.0, 25.0);
    g.elements[1].delay_ns = g.loop_delay_ns + 1.0;
    assert!(check_modulation_windows(&g).is_err());
}
