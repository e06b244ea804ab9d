//! Physical-side models in the fundamental-frequency averaged dq frame.
//!
//! Conventions used throughout:
//! - Amplitude-invariant dq quantities on the 50 MW / 13.8 kV facility base.
//! - Inverter current `i` is positive inverter -> grid, so a facility that
//!   consumes power runs i_d < 0 in a voltage-aligned frame.
//! - Active power from a (v, i) pair is P = 1.5 (v_d i_d + v_q i_q), so the
//!   grid draw is P_draw = -P_grid.
//! - The grid impedance is quasi-static: V_pcc = V_th + Z_th * I as phasor
//!   algebra at every step, while the RL filter current is a true state.

use crate::blocks::LagRampPath;
use crate::error::SimError;

/// A dq pair treated as a complex phasor (re = d, im = q).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dq {
    pub d: f64,
    pub q: f64,
}

impl Dq {
    pub fn new(d: f64, q: f64) -> Self {
        Self { d, q }
    }

    pub fn mag(self) -> f64 {
        self.d.hypot(self.q)
    }

    pub fn angle(self) -> f64 {
        self.q.atan2(self.d)
    }

    /// Complex product (R + jX)·(d + jq).
    pub fn mul_z(self, r: f64, x: f64) -> Dq {
        Dq::new(r * self.d - x * self.q, x * self.d + r * self.q)
    }

    /// Rotate by `theta` (multiply by e^{j theta}).
    pub fn rotate(self, theta: f64) -> Dq {
        let (s, c) = theta.sin_cos();
        Dq::new(c * self.d - s * self.q, s * self.d + c * self.q)
    }

    pub fn add(self, other: Dq) -> Dq {
        Dq::new(self.d + other.d, self.q + other.q)
    }

    pub fn scale(self, k: f64) -> Dq {
        Dq::new(k * self.d, k * self.q)
    }
}

/// Active power of a (v, i) pair under the 1.5-factor per-unit convention.
pub fn active_power(v: Dq, i: Dq) -> f64 {
    1.5 * (v.d * i.d + v.q * i.q)
}

/// Thevenin grid equivalent: source phasor behind R_g + jX_g, sized from the
/// short-circuit ratio at the interconnection.
#[derive(Debug, Clone, Copy)]
pub struct TheveninGrid {
    pub scr: f64,
    pub x_over_r: f64,
    pub r_g: f64,
    pub x_g: f64,
    /// Source magnitude in normal operation (1.0 nominal); the dip window
    /// replaces it with the retained voltage.
    pub vth: Dq,
}

impl TheveninGrid {
    pub fn from_scr(scr: f64, x_over_r: f64) -> Result<Self, SimError> {
        if scr <= 0.0 {
            return Err(SimError::InvalidParameter {
                name: "scr",
                value: scr,
                reason: "must be positive",
            });
        }
        if x_over_r <= 0.0 {
            return Err(SimError::InvalidParameter {
                name: "x_over_r",
                value: x_over_r,
                reason: "must be positive",
            });
        }
        let z_mag = 1.0 / scr;
        let r_g = z_mag / (1.0 + x_over_r * x_over_r).sqrt();
        let x_g = x_over_r * r_g;
        Ok(Self {
            scr,
            x_over_r,
            r_g,
            x_g,
            vth: Dq::new(1.0, 0.0),
        })
    }

    pub fn z_mag(&self) -> f64 {
        self.r_g.hypot(self.x_g)
    }

    /// PCC voltage from the quasi-static network equation V_pcc = V_th + Z I.
    pub fn pcc_voltage(&self, i: Dq) -> Dq {
        self.vth.add(i.mul_z(self.r_g, self.x_g))
    }
}

/// Series RL filter between the inverter terminal and the PCC, with the dq
/// cross-coupling term of the rotating frame.
#[derive(Debug, Clone, Copy)]
pub struct RlFilter {
    pub r_f: f64,
    pub x_f: f64,
    pub omega0: f64,
    pub current: Dq,
}

impl RlFilter {
    pub fn new(r_f: f64, x_f: f64, omega0: f64) -> Self {
        Self {
            r_f,
            x_f,
            omega0,
            current: Dq::default(),
        }
    }

    /// Forward-Euler update of the filter current:
    /// di/dt = (w0/X_f)(v_inv - v_pcc - R_f i) - j w0 i.
    pub fn step(&mut self, v_inv: Dq, v_pcc: Dq, dt: f64, t: f64) -> Result<Dq, SimError> {
        let g = self.omega0 / self.x_f;
        let i = self.current;
        let did = g * (v_inv.d - v_pcc.d - self.r_f * i.d) + self.omega0 * i.q;
        let diq = g * (v_inv.q - v_pcc.q - self.r_f * i.q) - self.omega0 * i.d;
        self.current.d += did * dt;
        self.current.q += diq * dt;
        let mag = self.current.mag();
        if !mag.is_finite() {
            return Err(SimError::NonFinite {
                context: "filter current",
                t,
            });
        }
        if mag > 50.0 {
            return Err(SimError::Diverged { t, mag });
        }
        Ok(self.current)
    }
}

/// DC-link energy proxy: d/dt(V_dc^2 / 2) = (P_in - P_load)/T_dc, with the
/// inverter voltage capability tied to E_max * V_dc. Reaching zero sets a
/// collapse flag; the run continues with the ceiling at zero.
#[derive(Debug, Clone, Copy)]
pub struct DcLinkProxy {
    pub v_dc: f64,
    pub t_dc: f64,
    pub e_max: f64,
    pub v_ref: f64,
    pub collapsed: bool,
}

impl DcLinkProxy {
    pub fn new(v_dc0: f64, t_dc: f64, e_max: f64, v_ref: f64) -> Self {
        Self {
            v_dc: v_dc0,
            t_dc,
            e_max,
            v_ref,
            collapsed: false,
        }
    }

    pub fn step(&mut self, p_in: f64, p_load: f64, dt: f64) -> f64 {
        let half_sq = 0.5 * self.v_dc * self.v_dc + (p_in - p_load) / self.t_dc * dt;
        if half_sq <= 0.0 {
            self.v_dc = 0.0;
            self.collapsed = true;
        } else {
            self.v_dc = (2.0 * half_sq).sqrt();
        }
        self.v_dc
    }

    /// Inverter voltage-magnitude ceiling at the present bus state.
    pub fn voltage_ceiling(&self) -> f64 {
        self.e_max * self.v_dc
    }
}

/// UPS-BESS: lag-plus-ramp power path with a state-of-charge proxy and
/// SoC gating of charge/discharge commands.
#[derive(Debug, Clone)]
pub struct BessModel {
    pub path: LagRampPath,
    pub soc: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub p_dis_max: f64,
    pub p_chg_max: f64,
    pub t_autonomy: f64,
}

impl BessModel {
    pub fn power(&self) -> f64 {
        self.path.state
    }

    /// Clamp a raw command to the power window with SoC gating: discharge is
    /// blocked at the floor, charge is blocked at the ceiling.
    pub fn gate(&self, cmd: f64) -> f64 {
        let mut c = cmd.clamp(-self.p_chg_max, self.p_dis_max);
        if self.soc <= self.soc_min && c > 0.0 {
            c = 0.0;
        }
        if self.soc >= self.soc_max && c < 0.0 {
            c = 0.0;
        }
        c
    }

    pub fn step(&mut self, cmd: f64, dt: f64) -> f64 {
        let gated = self.gate(cmd);
        let p = self.path.step(gated, dt);
        self.soc = (self.soc - p / self.t_autonomy * dt).clamp(self.soc_min, self.soc_max);
        p
    }
}

/// IT-load profile: constant, a step, or a square-wave pulse window on top of
/// a base level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadProfile {
    Constant {
        level: f64,
    },
    Step {
        level: f64,
        t_step: f64,
    },
    Pulsed {
        base: f64,
        amplitude: f64,
        freq_hz: f64,
        t_start: f64,
        t_end: f64,
    },
}

impl LoadProfile {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            LoadProfile::Constant { level } => level,
            LoadProfile::Step { level, t_step } => {
                if t < t_step {
                    0.0
                } else {
                    level
                }
            }
            LoadProfile::Pulsed {
                base,
                amplitude,
                freq_hz,
                t_start,
                t_end,
            } => {
                if t < t_start || t >= t_end {
                    base
                } else {
                    let phase = (t - t_start) * freq_hz;
                    let frac = phase - phase.floor();
                    if frac < 0.5 {
                        base + amplitude
                    } else {
                        base - amplitude
                    }
                }
            }
        }
    }
}

/// DC hold-up sizing: energy to ride `dt_hold` at `p_load` watts, and the
/// capacitance that stores it between `v_dc0` and `ratio_min * v_dc0`.
pub fn holdup_budget(
    p_load_w: f64,
    dt_hold_s: f64,
    v_dc0_v: f64,
    ratio_min: f64,
) -> Result<(f64, f64), SimError> {
    if !(0.0 < ratio_min && ratio_min < 1.0) {
        return Err(SimError::InvalidParameter {
            name: "ratio_min",
            value: ratio_min,
            reason: "must lie in (0, 1)",
        });
    }
    if p_load_w < 0.0 || dt_hold_s < 0.0 || v_dc0_v <= 0.0 {
        return Err(SimError::InvalidParameter {
            name: "holdup inputs",
            value: p_load_w.min(dt_hold_s).min(v_dc0_v),
            reason: "power/time must be non-negative, voltage positive",
        });
    }
    let energy = p_load_w * dt_hold_s;
    let cap = 2.0 * energy / (v_dc0_v * v_dc0_v * (1.0 - ratio_min * ratio_min));
    Ok((energy, cap))
}
