//! Control primitives shared by every controller in the library.
//!
//! All blocks advance by forward Euler at the caller's step; none of them
//! sub-step internally. State lives in plain value types so a simulation
//! owns its blocks outright.

use crate::error::SimError;

/// min(max(x, lo), hi). The one saturation everybody uses.
pub fn sat(x: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi, "sat called with lo > hi");
    x.clamp(lo, hi)
}

/// Checked variant for call sites that take bounds from user config.
pub fn try_sat(x: f64, lo: f64, hi: f64) -> Result<f64, SimError> {
    if lo > hi {
        return Err(SimError::InvalidBounds { lo, hi });
    }
    Ok(x.clamp(lo, hi))
}

/// First-order filter with asymmetric slew limits on its derivative.
///
/// The state moves toward `target` with time constant `tau`, but the rate of
/// change is clamped to [-rate_down, +rate_up]. Used for the grid-draw
/// reference: the downward rate is fast (fault entry), the upward rate is the
/// soft-return ramp.
#[derive(Debug, Clone, Copy)]
pub struct ShapingFilter {
    pub state: f64,
    pub tau: f64,
    pub rate_up: f64,
    pub rate_down: f64,
}

impl ShapingFilter {
    pub fn new(initial: f64, tau: f64, rate_up: f64, rate_down: f64) -> Self {
        Self {
            state: initial,
            tau,
            rate_up,
            rate_down,
        }
    }

    /// Advance one step toward `target`; returns the new state.
    pub fn step(&mut self, target: f64, dt: f64) -> f64 {
        debug_assert!(dt > 0.0 && self.tau > 0.0);
        let slope = sat((target - self.state) / self.tau, -self.rate_down, self.rate_up);
        self.state += slope * dt;
        self.state
    }
}

/// First-order lag with a symmetric ramp limit. Models the UPS-BESS power
/// path: finite DC/DC bandwidth (`tau`) plus a converter ramp limit (`rate`).
#[derive(Debug, Clone, Copy)]
pub struct LagRampPath {
    pub state: f64,
    pub tau: f64,
    pub rate: f64,
}

impl LagRampPath {
    pub fn new(initial: f64, tau: f64, rate: f64) -> Self {
        Self {
            state: initial,
            tau,
            rate,
        }
    }

    pub fn step(&mut self, cmd: f64, dt: f64) -> f64 {
        debug_assert!(dt > 0.0 && self.tau > 0.0);
        let slope = sat((cmd - self.state) / self.tau, -self.rate, self.rate);
        self.state += slope * dt;
        self.state
    }
}

/// PI regulator with a clamped integrator.
///
/// The stored integrator is held inside +/- `int_limit`, not just the output
/// term; output-only clamping would let the stored state wind up invisibly.
#[derive(Debug, Clone, Copy)]
pub struct PiRegulator {
    pub kp: f64,
    pub ki: f64,
    pub integrator: f64,
    pub int_limit: f64,
}

impl PiRegulator {
    pub fn new(kp: f64, ki: f64, int_limit: f64) -> Self {
        Self {
            kp,
            ki,
            integrator: 0.0,
            int_limit,
        }
    }

    pub fn step(&mut self, error: f64, dt: f64) -> f64 {
        debug_assert!(dt > 0.0);
        self.integrator = sat(self.integrator + error * dt, -self.int_limit, self.int_limit);
        self.kp * error + self.ki * self.integrator
    }

    pub fn reset(&mut self) {
        self.integrator = 0.0;
    }
}

/// Droop / fast-frequency-response law on an external system base.
/// Positive output is load relief (the facility backs off its draw).
#[derive(Debug, Clone, Copy)]
pub struct DroopLaw {
    pub gain: f64,
    pub cap: f64,
}

impl DroopLaw {
    pub fn new(gain: f64, cap: f64) -> Self {
        Self { gain, cap }
    }

    /// `freq_dev` is the per-unit frequency deviation x = (f - f0)/f0.
    pub fn support(&self, freq_dev: f64) -> f64 {
        sat(self.gain * (-freq_dev), -self.cap, self.cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sat_clamps_and_passes_through() {
        assert_eq!(sat(1.5, -1.0, 1.0), 1.0);
        assert_eq!(sat(0.2, -1.0, 1.0), 0.2);
        assert_eq!(sat(-2.0, -1.0, 1.0), -1.0);
    }

    #[test]
    fn sat_rejects_inverted_bounds() {
        assert!(try_sat(0.0, 1.0, -1.0).is_err());
        assert_eq!(try_sat(2.0, -1.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn shaping_rate_up_binds_on_large_error() {
        // (1 - 0)/0.05 = 20 p.u./s, well above the 0.2 p.u./s limit.
        let mut f = ShapingFilter::new(0.0, 0.05, 0.2, 10.0);
        let out = f.step(1.0, 0.01);
        assert!((out - 0.002).abs() < 1e-12);
    }

    #[test]
    fn shaping_fixed_point() {
        let mut f = ShapingFilter::new(0.37, 0.05, 0.2, 10.0);
        let out = f.step(0.37, 0.01);
        assert_eq!(out, 0.37);
    }

    #[test]
    fn shaping_rate_down_binds() {
        // -1/0.05 = -20 p.u./s clamps at -10 p.u./s.
        let mut f = ShapingFilter::new(1.0, 0.05, 0.2, 10.0);
        let out = f.step(0.0, 0.001);
        assert!((out - 0.99).abs() < 1e-12);
    }

    #[test]
    fn lag_ramp_binds_on_big_step() {
        // 0.8/0.02 = 40 p.u./s exceeds the 5 p.u./s ramp.
        let mut p = LagRampPath::new(0.0, 0.02, 5.0);
        let out = p.step(0.8, 0.001);
        assert!((out - 0.005).abs() < 1e-12);
    }

    #[test]
    fn lag_ramp_fixed_point_and_lag_regime() {
        let mut p = LagRampPath::new(0.3, 0.02, 5.0);
        assert_eq!(p.step(0.3, 0.001), 0.3);
        // Small error: lag governs, slope 0.004/0.02 = 0.2 p.u./s.
        let mut q = LagRampPath::new(0.0, 0.02, 5.0);
        let out = q.step(0.004, 0.001);
        assert!((out - 0.0002).abs() < 1e-12);
    }

    #[test]
    fn lag_ramp_converges_monotonically() {
        let mut p = LagRampPath::new(0.0, 0.02, 5.0);
        let mut prev_err = 0.8_f64;
        for _ in 0..10_000 {
            p.step(0.8, 1e-4);
            let err = (0.8 - p.state).abs();
            assert!(err <= prev_err + 1e-15);
            prev_err = err;
        }
        assert!(prev_err < 1e-9);
    }

    #[test]
    fn pi_step_matches_hand_value() {
        let mut r = PiRegulator::new(0.3, 20.0, 0.06);
        let out = r.step(0.1, 0.001);
        assert!((out - 0.032).abs() < 1e-12);
    }

    #[test]
    fn pi_zero_error_zero_output() {
        let mut r = PiRegulator::new(0.3, 20.0, 0.06);
        assert_eq!(r.step(0.0, 0.001), 0.0);
    }

    #[test]
    fn pi_integrator_clamps_under_sustained_error() {
        let mut r = PiRegulator::new(0.3, 20.0, 0.06);
        for _ in 0..10_000 {
            r.step(1.0, 0.001);
        }
        assert!((r.integrator - 0.06).abs() < 1e-12);
        let out = r.step(1.0, 0.001);
        assert!((out - (0.3 + 20.0 * 0.06)).abs() < 1e-12);
    }

    #[test]
    fn droop_zero_at_nominal() {
        let d = DroopLaw::new(20.0, 0.02);
        assert_eq!(d.support(0.0), 0.0);
    }

    #[test]
    fn droop_cap_binds_underfrequency() {
        // x = -0.002 (59.88 Hz): 20*0.002 = 0.04 caps at 0.02.
        let d = DroopLaw::new(20.0, 0.02);
        assert!((d.support(-0.002) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn droop_overfrequency_hits_negative_cap() {
        let d = DroopLaw::new(20.0, 0.02);
        assert!((d.support(0.001) + 0.02).abs() < 1e-12);
    }
}
