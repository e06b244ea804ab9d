//! Scenario description and the parameter registry used by config files,
//! CLI overrides and the study suites.

use crate::error::SimError;
use crate::plant::LoadProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Proposed,
    GflMc,
    GflPll,
}

impl ControllerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerKind::Proposed => "proposed",
            ControllerKind::GflMc => "gfl-mc",
            ControllerKind::GflPll => "gfl-pll",
        }
    }

    pub fn parse(s: &str) -> Result<Self, SimError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "proposed" => Ok(ControllerKind::Proposed),
            "gfl-mc" | "gfl_mc" | "gflmc" => Ok(ControllerKind::GflMc),
            "gfl-pll" | "gfl_pll" | "gflpll" => Ok(ControllerKind::GflPll),
            other => Err(SimError::Scenario(format!(
                "unknown controller `{other}` (expected proposed | gfl-mc | gfl-pll)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadKind {
    Constant,
    Step,
    Pulsed,
}

/// Full description of one simulation run. All fields are plain numbers so a
/// scenario can round-trip through the flat config format.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub controller: ControllerKind,
    pub duration: f64,
    pub dt: f64,

    // grid
    pub scr: f64,
    pub x_over_r: f64,
    pub v_dip: f64,
    pub dip_start: f64,
    pub dip_end: f64,

    // filter
    pub x_f: f64,
    pub r_f: f64,
    pub f0_hz: f64,

    // load
    pub load_kind: LoadKind,
    pub load_level: f64,
    pub load_step_time: f64,
    pub pulse_amplitude: f64,
    pub pulse_freq_hz: f64,
    pub pulse_start: f64,
    pub pulse_end: f64,

    // grid-draw shaping
    pub tau_grid: f64,
    pub r_limit: f64,
    pub r_down: f64,
    /// Initial value of the shaped draw reference: the fault scenarios start
    /// mid-pickup with the UPS-BESS carrying the remainder of the load.
    pub initial_ref: f64,

    // BESS
    pub tau_bess: f64,
    pub r_bess: f64,
    pub p_dis_max: f64,
    pub p_chg_max: f64,
    pub t_autonomy: f64,
    pub soc0: f64,
    pub soc_min: f64,
    pub soc_max: f64,

    // DC link
    pub t_dc: f64,
    pub v_dc0: f64,
    pub v_dc_ref: f64,
    pub e_max: f64,

    // detection
    pub v_thresh: f64,
    pub v_rec: f64,
    pub t_det: f64,

    // inner current loop / limits
    pub kp_i: f64,
    pub ki_i: f64,
    pub i_max: f64,

    // proposed supervisor
    pub kv: f64,
    pub v_ref: f64,
    pub p_fault_min: f64,
    pub kp_dc: f64,
    pub ki_dc: f64,
    pub soc_bias: f64,
    pub mode1_enabled: bool,
    pub mode3_enabled: bool,
    pub kf: f64,
    pub p_ffr_max_sys: f64,

    // benchmarks
    pub v_mc: f64,
    pub kp_pll: f64,
    pub ki_pll: f64,
    pub v_lvrt: f64,
    pub kv_lvrt: f64,

    // bases and the bulk-frequency proxy
    pub s_base_mw: f64,
    pub s_sys_mw: f64,
    pub n_blocks: f64,
    pub h_inertia: f64,
    pub d_damping: f64,

    /// Exogenous frequency-deviation event fed to Mode 3 (zero amplitude
    /// disables it); only meaningful in the frequency co-simulation studies.
    pub freq_event: bool,
}

impl Default for Scenario {
    /// The baseline fault ride-through case: 50 MW block at SCR 1.5, X/R 5,
    /// 0.5 p.u. dip from 0.50 s to 0.65 s, I_max 1.0, dip arriving late in a
    /// rate-limited load pickup with the BESS carrying 0.2 p.u.
    fn default() -> Self {
        Scenario {
            controller: ControllerKind::Proposed,
            duration: 1.0,
            dt: 1e-4,
            scr: 1.5,
            x_over_r: 5.0,
            v_dip: 0.5,
            dip_start: 0.50,
            dip_end: 0.65,
            x_f: 0.15,
            r_f: 0.005,
            f0_hz: 60.0,
            load_kind: LoadKind::Constant,
            load_level: 1.0,
            load_step_time: 0.1,
            pulse_amplitude: 0.25,
            pulse_freq_hz: 1.0,
            pulse_start: 1.0,
            pulse_end: 9.0,
            tau_grid: 0.005,
            r_limit: 0.2,
            r_down: 400.0,
            initial_ref: 0.8,
            tau_bess: 0.05,
            r_bess: 1.5,
            p_dis_max: 1.0,
            p_chg_max: 0.3,
            t_autonomy: 300.0,
            soc0: 0.9,
            soc_min: 0.2,
            soc_max: 1.0,
            t_dc: 0.5,
            v_dc0: 1.0,
            v_dc_ref: 1.0,
            e_max: 1.2,
            v_thresh: 0.85,
            v_rec: 0.90,
            t_det: 0.001,
            kp_i: 0.3,
            ki_i: 20.0,
            i_max: 1.0,
            kv: 2.5,
            v_ref: 1.0,
            p_fault_min: 0.2,
            kp_dc: 2.0,
            ki_dc: 10.0,
            soc_bias: 0.02,
            mode1_enabled: true,
            mode3_enabled: false,
            kf: 20.0,
            p_ffr_max_sys: 0.02,
            v_mc: 0.70,
            kp_pll: 20.0,
            ki_pll: 200.0,
            v_lvrt: 0.85,
            kv_lvrt: 2.5,
            s_base_mw: 50.0,
            s_sys_mw: 30_000.0,
            n_blocks: 20.0,
            h_inertia: 5.0,
            d_damping: 2.0,
            freq_event: false,
        }
    }
}

impl Scenario {
    pub fn load_profile(&self) -> LoadProfile {
        match self.load_kind {
            LoadKind::Constant => LoadProfile::Constant {
                level: self.load_level,
            },
            LoadKind::Step => LoadProfile::Step {
                level: self.load_level,
                t_step: self.load_step_time,
            },
            LoadKind::Pulsed => LoadProfile::Pulsed {
                base: self.load_level,
                amplitude: self.pulse_amplitude,
                freq_hz: self.pulse_freq_hz,
                t_start: self.pulse_start,
                t_end: self.pulse_end,
            },
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |m: String| Err(SimError::Scenario(m));
        if !(self.dt > 0.0) {
            return fail(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.duration > 0.0) {
            return fail(format!("duration must be positive, got {}", self.duration));
        }
        if self.dip_start > self.dip_end {
            return fail(format!(
                "dip window inverted: start {} > end {}",
                self.dip_start, self.dip_end
            ));
        }
        if self.dip_end > self.duration {
            return fail(format!(
                "dip end {} beyond duration {}",
                self.dip_end, self.duration
            ));
        }
        if !(self.v_dip > 0.0 && self.v_dip <= 1.0) {
            return fail(format!("v_dip must lie in (0, 1], got {}", self.v_dip));
        }
        if !(self.scr > 0.0) || !(self.x_over_r > 0.0) {
            return fail("scr and x_r must be positive".into());
        }
        if !(self.tau_grid > 0.0 && self.tau_bess > 0.0 && self.t_dc > 0.0) {
            return fail("time constants must be positive".into());
        }
        if !(self.soc_min <= self.soc0 && self.soc0 <= self.soc_max) {
            return fail("soc0 must lie within [soc_min, soc_max]".into());
        }
        if self.v_rec < self.v_thresh {
            return fail("v_rec must not be below v_thresh".into());
        }
        Ok(())
    }

    /// Apply `key=value` overrides drawn from the parameter registry.
    pub fn apply_overrides<'a, I>(&self, pairs: I) -> Result<Scenario, SimError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut sc = self.clone();
        for (k, v) in pairs {
            apply_key(&mut sc, k, v)?;
        }
        sc.validate()?;
        Ok(sc)
    }
}

/// One registry entry: key, section it serializes under, docstring.
pub struct ParamInfo {
    pub key: &'static str,
    pub section: &'static str,
    pub doc: &'static str,
}

macro_rules! registry {
    ($( $key:literal, $section:literal, $doc:literal => $apply:expr, $get:expr ; )+) => {
        pub const PARAMETERS: &[ParamInfo] = &[
            $( ParamInfo { key: $key, section: $section, doc: $doc }, )+
        ];

        fn apply_key(sc: &mut Scenario, key: &str, value: &str) -> Result<(), SimError> {
            match key {
                $( $key => {
                    let f: &dyn Fn(&mut Scenario, &str) -> Result<(), SimError> = &$apply;
                    f(sc, value)
                } )+
                _ => Err(SimError::UnknownKey {
                    key: key.to_string(),
                    valid: PARAMETERS.iter().map(|p| p.key).collect::<Vec<_>>().join(", "),
                }),
            }
        }

        /// Current value of every registry key, for serialization.
        pub fn get_key(sc: &Scenario, key: &str) -> Option<String> {
            match key {
                $( $key => {
                    let f: &dyn Fn(&Scenario) -> String = &$get;
                    Some(f(sc))
                } )+
                _ => None,
            }
        }
    };
}

fn parse_f64(key: &str, v: &str) -> Result<f64, SimError> {
    v.trim().parse::<f64>().map_err(|_| SimError::OutOfRange {
        key: key.into(),
        value: f64::NAN,
        reason: format!("`{v}` is not a number"),
    })
}

fn parse_bool(key: &str, v: &str) -> Result<bool, SimError> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "on" | "yes" => Ok(true),
        "false" | "0" | "off" | "no" => Ok(false),
        _ => Err(SimError::OutOfRange {
            key: key.into(),
            value: f64::NAN,
            reason: format!("`{v}` is not a boolean"),
        }),
    }
}

fn set_pos(key: &str, v: &str, slot: &mut f64) -> Result<(), SimError> {
    let x = parse_f64(key, v)?;
    if x <= 0.0 {
        return Err(SimError::OutOfRange {
            key: key.into(),
            value: x,
            reason: "must be positive".into(),
        });
    }
    *slot = x;
    Ok(())
}

fn set_nonneg(key: &str, v: &str, slot: &mut f64) -> Result<(), SimError> {
    let x = parse_f64(key, v)?;
    if x < 0.0 {
        return Err(SimError::OutOfRange {
            key: key.into(),
            value: x,
            reason: "must be non-negative".into(),
        });
    }
    *slot = x;
    Ok(())
}

fn set_unit_interval(key: &str, v: &str, slot: &mut f64) -> Result<(), SimError> {
    let x = parse_f64(key, v)?;
    if !(x > 0.0 && x <= 1.0) {
        return Err(SimError::OutOfRange {
            key: key.into(),
            value: x,
            reason: "must lie in (0, 1]".into(),
        });
    }
    *slot = x;
    Ok(())
}

registry! {
    "controller", "scenario", "controller: proposed | gfl-mc | gfl-pll"
        => |sc, v| { sc.controller = ControllerKind::parse(v)?; Ok(()) },
           |sc| sc.controller.name().to_string();
    "duration", "scenario", "simulated time (s)"
        => |sc, v| set_pos("duration", v, &mut sc.duration),
           |sc| format!("{}", sc.duration);
    "dt", "scenario", "averaged-model integration step (s)"
        => |sc, v| set_pos("dt", v, &mut sc.dt),
           |sc| format!("{}", sc.dt);
    "scr", "grid", "short-circuit ratio at the interconnection"
        => |sc, v| set_pos("scr", v, &mut sc.scr),
           |sc| format!("{}", sc.scr);
    "x_r", "grid", "grid X/R ratio"
        => |sc, v| set_pos("x_r", v, &mut sc.x_over_r),
           |sc| format!("{}", sc.x_over_r);
    "v_dip", "grid", "retained Thevenin-source voltage during the dip (p.u., in (0,1])"
        => |sc, v| set_unit_interval("v_dip", v, &mut sc.v_dip),
           |sc| format!("{}", sc.v_dip);
    "dip_start", "grid", "dip window start (s)"
        => |sc, v| set_nonneg("dip_start", v, &mut sc.dip_start),
           |sc| format!("{}", sc.dip_start);
    "dip_end", "grid", "dip window end (s)"
        => |sc, v| set_nonneg("dip_end", v, &mut sc.dip_end),
           |sc| format!("{}", sc.dip_end);
    "x_f", "grid", "inverter filter reactance (p.u.)"
        => |sc, v| set_pos("x_f", v, &mut sc.x_f),
           |sc| format!("{}", sc.x_f);
    "r_f", "grid", "inverter filter resistance (p.u.)"
        => |sc, v| set_nonneg("r_f", v, &mut sc.r_f),
           |sc| format!("{}", sc.r_f);
    "f0", "grid", "fundamental frequency (Hz)"
        => |sc, v| set_pos("f0", v, &mut sc.f0_hz),
           |sc| format!("{}", sc.f0_hz);
    "load_kind", "scenario", "load profile: constant | step | pulsed"
        => |sc, v| {
            sc.load_kind = match v.trim().to_ascii_lowercase().as_str() {
                "constant" => LoadKind::Constant,
                "step" => LoadKind::Step,
                "pulsed" => LoadKind::Pulsed,
                other => return Err(SimError::Scenario(format!(
                    "unknown load_kind `{other}` (expected constant | step | pulsed)"))),
            };
            Ok(())
        },
           |sc| match sc.load_kind {
               LoadKind::Constant => "constant".into(),
               LoadKind::Step => "step".into(),
               LoadKind::Pulsed => "pulsed".into(),
           };
    "load_level", "scenario", "IT load level / pulse base (p.u.)"
        => |sc, v| set_nonneg("load_level", v, &mut sc.load_level),
           |sc| format!("{}", sc.load_level);
    "load_step_time", "scenario", "step-profile switch-on time (s)"
        => |sc, v| set_nonneg("load_step_time", v, &mut sc.load_step_time),
           |sc| format!("{}", sc.load_step_time);
    "pulse_amp", "scenario", "pulsed-profile amplitude (p.u.)"
        => |sc, v| set_nonneg("pulse_amp", v, &mut sc.pulse_amplitude),
           |sc| format!("{}", sc.pulse_amplitude);
    "pulse_freq", "scenario", "pulsed-profile frequency (Hz)"
        => |sc, v| set_pos("pulse_freq", v, &mut sc.pulse_freq_hz),
           |sc| format!("{}", sc.pulse_freq_hz);
    "pulse_start", "scenario", "pulse window start (s)"
        => |sc, v| set_nonneg("pulse_start", v, &mut sc.pulse_start),
           |sc| format!("{}", sc.pulse_start);
    "pulse_end", "scenario", "pulse window end (s)"
        => |sc, v| set_nonneg("pulse_end", v, &mut sc.pulse_end),
           |sc| format!("{}", sc.pulse_end);
    "tau_grid", "controller", "grid-draw shaping time constant (s)"
        => |sc, v| set_pos("tau_grid", v, &mut sc.tau_grid),
           |sc| format!("{}", sc.tau_grid);
    "r_limit", "controller", "upward (soft-return) ramp limit on the draw reference (p.u./s)"
        => |sc, v| set_pos("r_limit", v, &mut sc.r_limit),
           |sc| format!("{}", sc.r_limit);
    "r_down", "controller", "downward ramp limit on the draw reference (p.u./s)"
        => |sc, v| set_pos("r_down", v, &mut sc.r_down),
           |sc| format!("{}", sc.r_down);
    "initial_ref", "controller", "draw reference at t=0 (p.u.); the BESS carries the rest"
        => |sc, v| set_nonneg("initial_ref", v, &mut sc.initial_ref),
           |sc| format!("{}", sc.initial_ref);
    "tau_bess", "bess", "UPS-BESS power-path lag (s)"
        => |sc, v| set_pos("tau_bess", v, &mut sc.tau_bess),
           |sc| format!("{}", sc.tau_bess);
    "r_bess", "bess", "UPS-BESS ramp limit (p.u./s)"
        => |sc, v| set_pos("r_bess", v, &mut sc.r_bess),
           |sc| format!("{}", sc.r_bess);
    "p_dis_max", "bess", "maximum BESS discharge power (p.u.)"
        => |sc, v| set_nonneg("p_dis_max", v, &mut sc.p_dis_max),
           |sc| format!("{}", sc.p_dis_max);
    "p_chg_max", "bess", "maximum BESS charge power (p.u.)"
        => |sc, v| set_nonneg("p_chg_max", v, &mut sc.p_chg_max),
           |sc| format!("{}", sc.p_chg_max);
    "t_autonomy", "bess", "BESS autonomy at rated power (s)"
        => |sc, v| set_pos("t_autonomy", v, &mut sc.t_autonomy),
           |sc| format!("{}", sc.t_autonomy);
    "soc0", "bess", "initial state of charge (fraction)"
        => |sc, v| set_unit_interval("soc0", v, &mut sc.soc0),
           |sc| format!("{}", sc.soc0);
    "soc_min", "bess", "minimum state of charge (fraction)"
        => |sc, v| set_nonneg("soc_min", v, &mut sc.soc_min),
           |sc| format!("{}", sc.soc_min);
    "soc_max", "bess", "maximum state of charge (fraction)"
        => |sc, v| set_unit_interval("soc_max", v, &mut sc.soc_max),
           |sc| format!("{}", sc.soc_max);
    "t_dc", "dclink", "DC-link energy constant (s)"
        => |sc, v| set_pos("t_dc", v, &mut sc.t_dc),
           |sc| format!("{}", sc.t_dc);
    "v_dc0", "dclink", "initial DC-link proxy voltage (p.u.)"
        => |sc, v| set_pos("v_dc0", v, &mut sc.v_dc0),
           |sc| format!("{}", sc.v_dc0);
    "v_dc_ref", "dclink", "DC-link regulation reference (p.u.)"
        => |sc, v| set_pos("v_dc_ref", v, &mut sc.v_dc_ref),
           |sc| format!("{}", sc.v_dc_ref);
    "e_max", "dclink", "modulation ceiling coefficient (|v_inv| <= e_max * V_dc)"
        => |sc, v| set_pos("e_max", v, &mut sc.e_max),
           |sc| format!("{}", sc.e_max);
    "v_thresh", "detector", "fault-entry voltage threshold (p.u.)"
        => |sc, v| set_pos("v_thresh", v, &mut sc.v_thresh),
           |sc| format!("{}", sc.v_thresh);
    "v_rec", "detector", "recovery voltage threshold (p.u.)"
        => |sc, v| set_pos("v_rec", v, &mut sc.v_rec),
           |sc| format!("{}", sc.v_rec);
    "t_det", "detector", "detection delay before Mode 2 engages (s)"
        => |sc, v| set_nonneg("t_det", v, &mut sc.t_det),
           |sc| format!("{}", sc.t_det);
    "kp_i", "current", "inner current-loop proportional gain"
        => |sc, v| set_pos("kp_i", v, &mut sc.kp_i),
           |sc| format!("{}", sc.kp_i);
    "ki_i", "current", "inner current-loop integral gain"
        => |sc, v| set_pos("ki_i", v, &mut sc.ki_i),
           |sc| format!("{}", sc.ki_i);
    "i_max", "current", "inverter current limit (p.u.)"
        => |sc, v| set_pos("i_max", v, &mut sc.i_max),
           |sc| format!("{}", sc.i_max);
    "kv", "proposed", "voltage-support gain (p.u. current per p.u. voltage error)"
        => |sc, v| set_nonneg("kv", v, &mut sc.kv),
           |sc| format!("{}", sc.kv);
    "v_ref", "proposed", "voltage-support reference (p.u.)"
        => |sc, v| set_pos("v_ref", v, &mut sc.v_ref),
           |sc| format!("{}", sc.v_ref);
    "p_fault_min", "proposed", "minimum fault-window grid draw policy (p.u.)"
        => |sc, v| set_nonneg("p_fault_min", v, &mut sc.p_fault_min),
           |sc| format!("{}", sc.p_fault_min);
    "kp_dc", "proposed", "Mode 1 stiff-bus proportional gain"
        => |sc, v| set_nonneg("kp_dc", v, &mut sc.kp_dc),
           |sc| format!("{}", sc.kp_dc);
    "ki_dc", "proposed", "Mode 1 stiff-bus integral gain"
        => |sc, v| set_nonneg("ki_dc", v, &mut sc.ki_dc),
           |sc| format!("{}", sc.ki_dc);
    "soc_bias", "proposed", "SoC-restore grid-draw bias (p.u.)"
        => |sc, v| set_nonneg("soc_bias", v, &mut sc.soc_bias),
           |sc| format!("{}", sc.soc_bias);
    "mode1", "proposed", "enable Mode 1 DC stiff-bus regulation (bool)"
        => |sc, v| { sc.mode1_enabled = parse_bool("mode1", v)?; Ok(()) },
           |sc| format!("{}", sc.mode1_enabled);
    "mode3", "proposed", "enable Mode 3 droop/FFR grid-draw modulation (bool)"
        => |sc, v| { sc.mode3_enabled = parse_bool("mode3", v)?; Ok(()) },
           |sc| format!("{}", sc.mode3_enabled);
    "kf", "proposed", "Mode 3 droop gain (p.u. support per p.u. frequency deviation)"
        => |sc, v| set_nonneg("kf", v, &mut sc.kf),
           |sc| format!("{}", sc.kf);
    "p_ffr_max", "proposed", "Mode 3 support cap on the system base (p.u.)"
        => |sc, v| set_nonneg("p_ffr_max", v, &mut sc.p_ffr_max_sys),
           |sc| format!("{}", sc.p_ffr_max_sys);
    "v_mc", "benchmark", "momentary-cessation threshold (p.u.)"
        => |sc, v| set_pos("v_mc", v, &mut sc.v_mc),
           |sc| format!("{}", sc.v_mc);
    "kp_pll", "benchmark", "SRF-PLL proportional gain"
        => |sc, v| set_pos("kp_pll", v, &mut sc.kp_pll),
           |sc| format!("{}", sc.kp_pll);
    "ki_pll", "benchmark", "SRF-PLL integral gain"
        => |sc, v| set_pos("ki_pll", v, &mut sc.ki_pll),
           |sc| format!("{}", sc.ki_pll);
    "v_lvrt", "benchmark", "LVRT activation threshold (p.u.)"
        => |sc, v| set_pos("v_lvrt", v, &mut sc.v_lvrt),
           |sc| format!("{}", sc.v_lvrt);
    "kv_lvrt", "benchmark", "LVRT reactive gain"
        => |sc, v| set_nonneg("kv_lvrt", v, &mut sc.kv_lvrt),
           |sc| format!("{}", sc.kv_lvrt);
    "s_base", "system", "facility power base (MW)"
        => |sc, v| set_pos("s_base", v, &mut sc.s_base_mw),
           |sc| format!("{}", sc.s_base_mw);
    "s_sys", "system", "bulk system base (MW)"
        => |sc, v| set_pos("s_sys", v, &mut sc.s_sys_mw),
           |sc| format!("{}", sc.s_sys_mw);
    "n_blocks", "system", "number of aggregated identical facility blocks"
        => |sc, v| set_pos("n_blocks", v, &mut sc.n_blocks),
           |sc| format!("{}", sc.n_blocks);
    "h_inertia", "system", "swing-proxy inertia constant H (s)"
        => |sc, v| set_pos("h_inertia", v, &mut sc.h_inertia),
           |sc| format!("{}", sc.h_inertia);
    "d_damping", "system", "swing-proxy damping D (p.u. on the system base)"
        => |sc, v| set_nonneg("d_damping", v, &mut sc.d_damping),
           |sc| format!("{}", sc.d_damping);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_baseline_matches_headline_parameters() {
        let sc = Scenario::default();
        assert_eq!(sc.scr, 1.5);
        assert_eq!(sc.v_dip, 0.5);
        assert_eq!(sc.dip_start, 0.50);
        assert_eq!(sc.dip_end, 0.65);
        assert_eq!(sc.i_max, 1.0);
        sc.validate().unwrap();
    }

    #[test]
    fn override_known_key() {
        let sc = Scenario::default();
        let out = sc.apply_overrides([("t_dc", "0.1")]).unwrap();
        assert_eq!(out.t_dc, 0.1);
        // original untouched
        assert_eq!(sc.t_dc, 0.5);
    }

    #[test]
    fn empty_overrides_identity() {
        let sc = Scenario::default();
        let out = sc.apply_overrides([]).unwrap();
        assert_eq!(out, sc);
    }

    #[test]
    fn unknown_key_lists_valid_keys() {
        let sc = Scenario::default();
        let err = sc.apply_overrides([("no_such_knob", "1")]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("no_such_knob"));
        assert!(msg.contains("t_dc"));
        assert!(msg.contains("p_dis_max"));
    }

    #[test]
    fn out_of_range_rejected() {
        let sc = Scenario::default();
        assert!(sc.apply_overrides([("v_dip", "1.5")]).is_err());
        assert!(sc.apply_overrides([("v_dip", "0")]).is_err());
        assert!(sc.apply_overrides([("dt", "-1e-4")]).is_err());
    }

    #[test]
    fn no_bess_variant() {
        let sc = Scenario::default();
        let out = sc.apply_overrides([("p_dis_max", "0.0")]).unwrap();
        assert_eq!(out.p_dis_max, 0.0);
    }

    #[test]
    fn registry_get_round_trips() {
        let sc = Scenario::default();
        for p in PARAMETERS {
            let v = get_key(&sc, p.key).expect("registered key must be gettable");
            let back = sc.apply_overrides([(p.key, v.as_str())]).unwrap();
            assert_eq!(back, sc, "key {} did not round-trip", p.key);
        }
    }
}
