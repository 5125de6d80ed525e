//! Modulation-window check for the Sagnac loop.
//!
//! A pulse entering the loop at Charlie's beamsplitter splits into a
//! clockwise copy, reaching an element at loop position `x` after `x`
//! nanoseconds, and a counter-clockwise copy, reaching it after `L - x`.
//! Alice and Bob must each modulate only one of the two, so at every
//! modulator the two arrival trains (taken modulo the pulse period) have to
//! stay more than one pulse width apart.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Group velocity in standard single-mode fiber.
pub const FIBER_SPEED_M_PER_S: f64 = 2.04e8;

/// Propagation delay through `length_m` meters of fiber.
pub fn fiber_delay_ns(length_m: f64) -> f64 {
    length_m / FIBER_SPEED_M_PER_S * 1e9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    BeamSplitter,
    Attenuator,
    Modulator,
    Spool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopElement {
    pub name: String,
    pub kind: ElementKind,
    /// Clockwise propagation delay from the loop origin, in ns.
    pub delay_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopGeometry {
    /// Elements in clockwise order; exactly one beamsplitter.
    pub elements: Vec<LoopElement>,
    /// Full clockwise round trip, beamsplitter back to beamsplitter.
    pub loop_delay_ns: f64,
    pub pulse_period_ns: f64,
    pub pulse_width_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulatorTiming {
    pub name: String,
    /// Clockwise arrival time modulo the pulse period.
    pub cw_arrival_ns: f64,
    pub ccw_arrival_ns: f64,
    /// Circular distance between the two arrival trains.
    pub separation_ns: f64,
    /// `separation_ns - pulse_width_ns`; must be positive.
    pub margin_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub pass: bool,
    pub modulators: Vec<ModulatorTiming>,
    /// Names of modulators whose margin is not positive.
    pub conflicts: Vec<String>,
}

impl LoopGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.pulse_period_ns > 0.0) || !self.pulse_period_ns.is_finite() {
            return Err(Error::Config("pulse_period_ns must be positive".into()));
        }
        if !(self.pulse_width_ns >= 0.0) {
            return Err(Error::Config("pulse_width_ns must be >= 0".into()));
        }
        if self.pulse_width_ns >= self.pulse_period_ns {
            return Err(Error::Config(format!(
                "pulse width {} ns must be shorter than the period {} ns",
                self.pulse_width_ns, self.pulse_period_ns
            )));
        }
        if !(self.loop_delay_ns > 0.0) || !self.loop_delay_ns.is_finite() {
            return Err(Error::Config("loop_delay_ns must be positive".into()));
        }
        if let Some(e) = self.elements.iter().find(|e| !(e.delay_ns >= 0.0) || !e.delay_ns.is_finite()) {
            return Err(Error::Config(format!("element `{}` has a negative delay", e.name)));
        }
        let splitters = self
            .elements
            .iter()
            .filter(|e| e.kind == ElementKind::BeamSplitter)
            .count();
        if splitters != 1 {
            return Err(Error::Config(format!(
                "loop needs exactly one beamsplitter, found {splitters}"
            )));
        }
        let origin = self.origin();
        if let Some(e) = self
            .elements
            .iter()
            .find(|e| e.delay_ns < origin || e.delay_ns - origin > self.loop_delay_ns)
        {
            return Err(Error::Config(format!(
                "element `{}` lies outside the loop (delay {} ns, loop {} ns from the beamsplitter)",
                e.name, e.delay_ns, self.loop_delay_ns
            )));
        }
        Ok(())
    }

    fn origin(&self) -> f64 {
        self.elements
            .iter()
            .find(|e| e.kind == ElementKind::BeamSplitter)
            .map(|e| e.delay_ns)
            .unwrap_or(0.0)
    }

    /// Returns a copy with every element moved by `shift_ns`.
    pub fn shifted(&self, shift_ns: f64) -> Self {
        let mut g = self.clone();
        for e in &mut g.elements {
            e.delay_ns += shift_ns;
        }
        g
    }
}

pub fn check_modulation_windows(geometry: &LoopGeometry) -> Result<TimingReport> {
    geometry.validate()?;
    let period = geometry.pulse_period_ns;
    let origin = geometry.origin();
    let modulators: Vec<ModulatorTiming> = geometry
        .elements
        .iter()
        .filter(|e| e.kind == ElementKind::Modulator)
        .map(|e| {
            let x = e.delay_ns - origin;
            let cw = x.rem_euclid(period);
            let ccw = (geometry.loop_delay_ns - x).rem_euclid(period);
            let d = (cw - ccw).rem_euclid(period);
            let separation = d.min(period - d);
            ModulatorTiming {
                name: e.name.clone(),
                cw_arrival_ns: cw,
                ccw_arrival_ns: ccw,
                separation_ns: separation,
                margin_ns: separation - geometry.pulse_width_ns,
            }
        })
        .collect();
    let conflicts: Vec<String> = modulators
        .iter()
        .filter(|m| m.margin_ns <= 0.0)
        .map(|m| m.name.clone())
        .collect();
    Ok(TimingReport {
        pass: conflicts.is_empty(),
        modulators,
        conflicts,
    })
}
