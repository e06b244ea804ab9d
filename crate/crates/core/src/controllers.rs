//! The three facility controllers: the proposed three-mode supervisor and the
//! two grid-following benchmarks.
//!
//! All three share the same inner current regulators, the same vector current
//! limit and the same inverter voltage ceiling. They differ only in how they
//! turn (|V_pcc|, P_load, bus state) into current references and a BESS
//! command.
//!
//! Current references are built in a V_pcc-aligned basis (i_par along the
//! voltage controls P, i_perp orthogonal controls Q) and rotated back to dq
//! for the inner loop. Capacitive injection that raises |V_pcc| is negative
//! i_perp under this sign convention.

use crate::blocks::{sat, DroopLaw, PiRegulator, ShapingFilter};
use crate::plant::Dq;

pub const VOLTAGE_FLOOR: f64 = 1e-3;

/// Shared inverter limits.
#[derive(Debug, Clone, Copy)]
pub struct CurrentLimits {
    pub i_max: f64,
    pub e_max: f64,
}

/// Per-step flags surfaced into the trace.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepFlags {
    pub cessation: bool,
    pub voltage_floor: bool,
    pub infeasible_min_draw: bool,
    pub pll_divergence: bool,
}

/// What a controller hands back each step.
#[derive(Debug, Clone, Copy)]
pub struct ControlAction {
    /// Inverter voltage command in dq, already clamped to the DC ceiling.
    pub v_inv: Dq,
    /// Current reference in dq (for the trace and limit checks).
    pub i_ref: Dq,
    /// Raw BESS power command (gating happens in the BESS model).
    pub p_bess_cmd: f64,
    /// BESS command after power/SoC gating, used for served-power accounting.
    pub p_bess_cmd_gated: f64,
    /// Shaped grid-draw reference (the soft-return state).
    pub p_draw_ref: f64,
    /// Active-power commitment the controller stands behind this step,
    /// capped at ampacity when the minimum-draw reservation is infeasible.
    pub p_draw_commit: f64,
    /// 1 stiff bus, 2 fault ride-through, 3 droop overlay active.
    pub mode: u8,
    /// Mode 1 stiffness term actually applied (exactly 0 during Mode 2).
    pub mode1_addend: f64,
    /// Mode 3 grid-draw modulation actually applied (exactly 0 during Mode 2).
    pub mode3_overlay: f64,
    pub flags: StepFlags,
}

/// What a controller observes each step.
#[derive(Debug, Clone, Copy)]
pub struct PlantObs {
    pub t: f64,
    pub v_pcc: Dq,
    pub i: Dq,
    pub v_dc: f64,
    pub v_ceiling: f64,
    pub p_bess: f64,
    pub soc: f64,
    pub p_load: f64,
    /// Per-unit frequency deviation from an external measurement, if any.
    pub freq_dev: Option<f64>,
}

/// Low-voltage detector with hysteresis: asserts after |V_pcc| < v_thresh has
/// persisted for t_det, clears as soon as |V_pcc| > v_rec.
#[derive(Debug, Clone, Copy)]
pub struct FaultDetector {
    pub v_thresh: f64,
    pub v_rec: f64,
    pub t_det: f64,
    timer: f64,
    in_fault: bool,
}

impl FaultDetector {
    pub fn new(v_thresh: f64, v_rec: f64, t_det: f64) -> Self {
        Self {
            v_thresh,
            v_rec,
            t_det,
            timer: 0.0,
            in_fault: false,
        }
    }

    pub fn in_fault(&self) -> bool {
        self.in_fault
    }

    pub fn update(&mut self, v_mag: f64, dt: f64) -> bool {
        if self.in_fault {
            if v_mag > self.v_rec {
                self.in_fault = false;
                self.timer = 0.0;
            }
        } else if v_mag < self.v_thresh {
            self.timer += dt;
            if self.timer >= self.t_det {
                self.in_fault = true;
            }
        } else {
            self.timer = 0.0;
        }
        self.in_fault
    }
}

/// Rotation angle of the V_pcc-aligned basis; callers hold the last good
/// angle through a degenerate (collapsed) voltage.
pub fn aligned_angle(v_pcc: Dq, last: f64) -> f64 {
    if v_pcc.mag() < 1e-6 {
        last
    } else {
        v_pcc.angle()
    }
}

/// Output of the fault-mode P-Q priority allocation.
#[derive(Debug, Clone, Copy)]
pub struct Allocation {
    pub i_par: f64,
    pub i_perp: f64,
    pub i_par_max: f64,
    pub p_bess_cmd: f64,
    pub p_draw_cmd: f64,
    pub p_draw_commit: f64,
    pub voltage_floor: bool,
    pub infeasible: bool,
}

/// Reactive-priority current allocation with a vector limit and a minimum
/// active-draw reservation.
///
/// Order of operations: size the voltage-support demand, reserve current
/// headroom for the minimum draw, give the remainder to reactive support,
/// then place the active reference inside what is left. The BESS command
/// covers the load/reference mismatch; the draw command follows the shaped
/// reference with the in-fault floor on top.
#[allow(clippy::too_many_arguments)]
pub fn allocate_currents(
    v_mag: f64,
    in_fault: bool,
    p_load: f64,
    p_draw_ref: f64,
    kv: f64,
    v_ref: f64,
    i_max: f64,
    p_fault_min: f64,
    p_dis_max: f64,
    p_chg_max: f64,
) -> Allocation {
    let voltage_floor = v_mag < VOLTAGE_FLOOR;
    let vm = v_mag.max(VOLTAGE_FLOOR);

    let i_perp_des = sat(kv * (v_ref - v_mag), 0.0, i_max);

    let mut p_draw_min = (p_load - p_dis_max).max(0.0);
    if in_fault {
        p_draw_min = p_draw_min.max(p_fault_min);
    }

    let mut i_par_req = p_draw_min / (1.5 * vm);
    let infeasible = i_par_req > i_max;
    if infeasible {
        // Deep-dip tie-break: the reservation swallows the whole vector;
        // voltage support is sacrificed to the minimum-draw policy.
        i_par_req = i_max;
    }

    let i_perp = -i_perp_des.min((i_max * i_max - i_par_req * i_par_req).max(0.0).sqrt());
    let i_par_max = (i_max * i_max - i_perp * i_perp).max(0.0).sqrt();

    let p_bess_cmd = sat(p_load - p_draw_ref, -p_chg_max, p_dis_max);

    let draw_floor = if in_fault { p_draw_min } else { 0.0 };
    let p_draw_cmd = p_draw_ref.max(draw_floor);

    let i_par = sat(-p_draw_cmd / (1.5 * vm), -i_par_max, i_par_max);

    // The commitment degrades to ampacity only when the reservation itself
    // is infeasible at the present voltage.
    let p_draw_commit = if infeasible {
        p_draw_cmd.min(1.5 * vm * i_max)
    } else {
        p_draw_cmd
    };

    Allocation {
        i_par,
        i_perp,
        i_par_max,
        p_bess_cmd,
        p_draw_cmd,
        p_draw_commit,
        voltage_floor,
        infeasible,
    }
}

/// Shared inner current loop: per-axis PI with voltage feedforward and dq
/// decoupling, then the DC-ceiling magnitude clamp.
#[derive(Debug, Clone, Copy)]
pub struct InnerCurrentLoop {
    pub pi_d: PiRegulator,
    pub pi_q: PiRegulator,
    pub r_f: f64,
    pub x_f: f64,
}

impl InnerCurrentLoop {
    pub fn new(kp: f64, ki: f64, int_limit: f64, r_f: f64, x_f: f64) -> Self {
        Self {
            pi_d: PiRegulator::new(kp, ki, int_limit),
            pi_q: PiRegulator::new(kp, ki, int_limit),
            r_f,
            x_f,
        }
    }

    pub fn step(&mut self, i_ref: Dq, i: Dq, v_pcc: Dq, ceiling: f64, dt: f64) -> Dq {
        let ff = Dq::new(
            v_pcc.d + self.r_f * i_ref.d - self.x_f * i_ref.q,
            v_pcc.q + self.r_f * i_ref.q + self.x_f * i_ref.d,
        );
        let mut v = Dq::new(
            ff.d + self.pi_d.step(i_ref.d - i.d, dt),
            ff.q + self.pi_q.step(i_ref.q - i.q, dt),
        );
        let mag = v.mag();
        if mag > ceiling {
            let k = if mag > 0.0 { ceiling / mag } else { 0.0 };
            v = v.scale(k);
        }
        v
    }
}

/// Parameters of the proposed supervisor that are not shared plant limits.
#[derive(Debug, Clone, Copy)]
pub struct ProposedParams {
    pub kv: f64,
    pub v_ref: f64,
    pub p_fault_min: f64,
    pub kp_dc: f64,
    pub ki_dc: f64,
    pub v_dc_ref: f64,
    pub soc_bias: f64,
    pub soc_target: f64,
    pub mode1_enabled: bool,
    pub mode3_enabled: bool,
    pub kf: f64,
    pub p_ffr_max_sys: f64,
    /// System-base to facility-base mapping for Mode 3: S_sys / (N * P_nom).
    pub sys_to_facility: f64,
    pub p_dis_max: f64,
    pub p_chg_max: f64,
}

/// The proposed three-mode supervisor.
#[derive(Debug, Clone)]
pub struct ProposedSupervisor {
    pub detector: FaultDetector,
    pub shaping: ShapingFilter,
    pub inner: InnerCurrentLoop,
    pub droop: DroopLaw,
    pub limits: CurrentLimits,
    pub params: ProposedParams,
    xi_dc: f64,
    xi_dc_limit: f64,
    last_theta: f64,
}

impl ProposedSupervisor {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        detector: FaultDetector,
        shaping: ShapingFilter,
        inner: InnerCurrentLoop,
        limits: CurrentLimits,
        params: ProposedParams,
    ) -> Self {
        let droop = DroopLaw::new(params.kf, params.p_ffr_max_sys);
        let xi_dc_limit = if params.ki_dc > 0.0 {
            params.p_dis_max / params.ki_dc
        } else {
            0.0
        };
        Self {
            detector,
            shaping,
            inner,
            droop,
            limits,
            params,
            xi_dc: 0.0,
            xi_dc_limit,
            last_theta: 0.0,
        }
    }

    pub fn in_fault(&self) -> bool {
        self.detector.in_fault()
    }

    /// Mode 1 stiffness term. Frozen (and exactly zero) while Mode 2 holds.
    fn mode1_term(&mut self, v_dc: f64, in_fault: bool, dt: f64) -> f64 {
        if in_fault || !self.params.mode1_enabled {
            return 0.0;
        }
        let err = self.params.v_dc_ref - v_dc;
        self.xi_dc = sat(self.xi_dc + err * dt, -self.xi_dc_limit, self.xi_dc_limit);
        self.params.kp_dc * err + self.params.ki_dc * self.xi_dc
    }

    /// Mode 3 grid-draw target modification, facility base. Zero in Mode 2.
    fn mode3_support(&self, freq_dev: Option<f64>, in_fault: bool) -> f64 {
        if in_fault || !self.params.mode3_enabled {
            return 0.0;
        }
        match freq_dev {
            Some(x) => self.droop.support(x) * self.params.sys_to_facility,
            None => 0.0,
        }
    }

    pub fn step(&mut self, obs: &PlantObs, dt: f64) -> ControlAction {
        let v_mag = obs.v_pcc.mag();
        let in_fault = self.detector.update(v_mag, dt);

        let mode1_addend = self.mode1_term(obs.v_dc, in_fault, dt);
        let mode3_overlay = self.mode3_support(obs.freq_dev, in_fault);

        let p = self.params;
        let p_draw_min_normal = (obs.p_load - p.p_dis_max).max(0.0);
        let target = if in_fault {
            p_draw_min_normal.max(p.p_fault_min)
        } else {
            let soc_restore = if obs.soc < p.soc_target { p.soc_bias } else { 0.0 };
            sat(
                obs.p_load - mode3_overlay + soc_restore,
                0.0,
                obs.p_load + p.p_chg_max,
            )
            .max(p_draw_min_normal)
        };
        let p_draw_ref = self.shaping.step(target, dt);

        let alloc = allocate_currents(
            v_mag,
            in_fault,
            obs.p_load,
            p_draw_ref,
            p.kv,
            p.v_ref,
            self.limits.i_max,
            p.p_fault_min,
            p.p_dis_max,
            p.p_chg_max,
        );

        let p_bess_cmd = alloc.p_bess_cmd + mode1_addend;
        let p_bess_cmd_gated = sat(p_bess_cmd, -p.p_chg_max, p.p_dis_max);

        let theta = aligned_angle(obs.v_pcc, self.last_theta);
        self.last_theta = theta;
        let i_ref = Dq::new(alloc.i_par, alloc.i_perp).rotate(theta);

        let v_inv = self
            .inner
            .step(i_ref, obs.i, obs.v_pcc, obs.v_ceiling, dt);

        let mode = if in_fault {
            2
        } else if mode3_overlay != 0.0 {
            3
        } else {
            1
        };

        ControlAction {
            v_inv,
            i_ref,
            p_bess_cmd,
            p_bess_cmd_gated,
            p_draw_ref,
            p_draw_commit: alloc.p_draw_commit,
            mode,
            mode1_addend,
            mode3_overlay,
            flags: StepFlags {
                cessation: false,
                voltage_floor: alloc.voltage_floor,
                infeasible_min_draw: alloc.infeasible,
                pll_divergence: false,
            },
        }
    }
}

/// GFL benchmark with momentary cessation: constant-power draw, currents
/// forced to zero below the cessation threshold. No BESS participation.
#[derive(Debug, Clone)]
pub struct GflMomentaryCessation {
    pub inner: InnerCurrentLoop,
    pub limits: CurrentLimits,
    pub v_cease: f64,
    last_theta: f64,
}

impl GflMomentaryCessation {
    pub fn new(inner: InnerCurrentLoop, limits: CurrentLimits, v_cease: f64) -> Self {
        Self {
            inner,
            limits,
            v_cease,
            last_theta: 0.0,
        }
    }

    /// Reference law alone, aligned basis: (i_par, i_perp, commit).
    pub fn references(v_mag: f64, p_load: f64, i_max: f64, v_cease: f64) -> (f64, f64, f64) {
        if v_mag < v_cease {
            return (0.0, 0.0, 0.0);
        }
        let vm = v_mag.max(VOLTAGE_FLOOR);
        let i_par_mag = (p_load / (1.5 * vm)).min(i_max);
        (-i_par_mag, 0.0, (1.5 * vm * i_par_mag).min(p_load))
    }

    pub fn step(&mut self, obs: &PlantObs, dt: f64) -> ControlAction {
        let v_mag = obs.v_pcc.mag();
        let (i_par, i_perp, commit) =
            Self::references(v_mag, obs.p_load, self.limits.i_max, self.v_cease);
        let cessation = v_mag < self.v_cease;

        let theta = aligned_angle(obs.v_pcc, self.last_theta);
        self.last_theta = theta;
        let i_ref = Dq::new(i_par, i_perp).rotate(theta);
        let v_inv = self
            .inner
            .step(i_ref, obs.i, obs.v_pcc, obs.v_ceiling, dt);

        ControlAction {
            v_inv,
            i_ref,
            p_bess_cmd: 0.0,
            p_bess_cmd_gated: 0.0,
            p_draw_ref: if cessation { 0.0 } else { obs.p_load },
            p_draw_commit: commit,
            mode: 0,
            mode1_addend: 0.0,
            mode3_overlay: 0.0,
            flags: StepFlags {
                cessation,
                voltage_floor: v_mag < VOLTAGE_FLOOR,
                infeasible_min_draw: false,
                pll_divergence: false,
            },
        }
    }
}

/// GFL benchmark with an SRF-PLL and LVRT reactive-current priority under the
/// vector limit. No momentary cessation, no BESS participation.
#[derive(Debug, Clone)]
pub struct GflPll {
    pub inner: InnerCurrentLoop,
    pub limits: CurrentLimits,
    pub kp_pll: f64,
    pub ki_pll: f64,
    pub v_lvrt: f64,
    pub kv: f64,
    pub v_ref: f64,
    pub omega0: f64,
    pub theta: f64,
    integral: f64,
}

impl GflPll {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        inner: InnerCurrentLoop,
        limits: CurrentLimits,
        kp_pll: f64,
        ki_pll: f64,
        v_lvrt: f64,
        kv: f64,
        omega0: f64,
    ) -> Self {
        Self {
            inner,
            limits,
            kp_pll,
            ki_pll,
            v_lvrt,
            kv,
            v_ref: 1.0,
            omega0,
            theta: 0.0,
            integral: 0.0,
        }
    }

    /// LVRT reference law in the PLL frame: (i_d, i_q, commit).
    pub fn references(
        v_mag: f64,
        p_load: f64,
        i_max: f64,
        v_lvrt: f64,
        kv: f64,
        v_ref: f64,
    ) -> (f64, f64, f64) {
        let vm = v_mag.max(VOLTAGE_FLOOR);
        if v_mag < v_lvrt {
            let iq_mag = (kv * (v_ref - v_mag)).clamp(0.0, i_max);
            let headroom = (i_max * i_max - iq_mag * iq_mag).max(0.0).sqrt();
            let id_mag = (p_load / (1.5 * vm)).min(headroom);
            (-id_mag, -iq_mag, (1.5 * vm * id_mag).min(p_load))
        } else {
            let id_mag = (p_load / (1.5 * vm)).min(i_max);
            (-id_mag, 0.0, (1.5 * vm * id_mag).min(p_load))
        }
    }

    pub fn step(&mut self, obs: &PlantObs, dt: f64) -> ControlAction {
        // The dq frame already rotates at omega0, so the PLL integrates only
        // the correction terms of its angle relative to that frame.
        let v_pll = obs.v_pcc.rotate(-self.theta);
        let v_q = v_pll.q;
        self.integral += self.ki_pll * v_q * dt;
        let omega_corr = self.kp_pll * v_q + self.integral;
        let pll_divergence = omega_corr.abs() > 0.5 * self.omega0;
        self.theta += omega_corr * dt;
        if self.theta > std::f64::consts::PI {
            self.theta -= 2.0 * std::f64::consts::PI;
        } else if self.theta < -std::f64::consts::PI {
            self.theta += 2.0 * std::f64::consts::PI;
        }

        let v_mag = obs.v_pcc.mag();
        let (i_d, i_q, commit) = Self::references(
            v_mag,
            obs.p_load,
            self.limits.i_max,
            self.v_lvrt,
            self.kv,
            self.v_ref,
        );
        let i_ref = Dq::new(i_d, i_q).rotate(self.theta);
        let v_inv = self
            .inner
            .step(i_ref, obs.i, obs.v_pcc, obs.v_ceiling, dt);

        ControlAction {
            v_inv,
            i_ref,
            p_bess_cmd: 0.0,
            p_bess_cmd_gated: 0.0,
            p_draw_ref: obs.p_load,
            p_draw_commit: commit,
            mode: 0,
            mode1_addend: 0.0,
            mode3_overlay: 0.0,
            flags: StepFlags {
                cessation: false,
                voltage_floor: v_mag < VOLTAGE_FLOOR,
                infeasible_min_draw: false,
                pll_divergence,
            },
        }
    }
}

/// Any of the three controllers behind one dispatching enum.
#[derive(Debug, Clone)]
pub enum Controller {
    Proposed(Box<ProposedSupervisor>),
    GflMc(GflMomentaryCessation),
    GflPll(Box<GflPll>),
}

impl Controller {
    pub fn step(&mut self, obs: &PlantObs, dt: f64) -> ControlAction {
        match self {
            Controller::Proposed(c) => c.step(obs, dt),
            Controller::GflMc(c) => c.step(obs, dt),
            Controller::GflPll(c) => c.step(obs, dt),
        }
    }

    pub fn in_fault(&self) -> bool {
        match self {
            Controller::Proposed(c) => c.in_fault(),
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detector_asserts_after_persistence() {
        let mut d = FaultDetector::new(0.85, 0.90, 0.002);
        let dt = 1e-4;
        let mut steps = 0;
        while !d.update(0.5, dt) {
            steps += 1;
            assert!(steps < 100);
        }
        // within t_det + dt
        assert!((steps as f64 * dt - 0.002).abs() <= dt + 1e-12);
    }

    #[test]
    fn detector_resets_on_brief_sag() {
        let mut d = FaultDetector::new(0.85, 0.90, 0.002);
        for _ in 0..10 {
            d.update(0.5, 1e-4);
        }
        d.update(0.95, 1e-4);
        // timer cleared: another brief sag does not assert
        for _ in 0..10 {
            assert!(!d.update(0.5, 1e-4));
        }
    }

    #[test]
    fn detector_clears_above_recovery() {
        let mut d = FaultDetector::new(0.85, 0.90, 0.002);
        for _ in 0..30 {
            d.update(0.5, 1e-4);
        }
        assert!(d.in_fault());
        assert!(d.update(0.89, 1e-4)); // between thresh and rec: stays
        assert!(!d.update(0.91, 1e-4));
    }

    #[test]
    fn aligned_angle_cases() {
        assert_eq!(aligned_angle(Dq::new(1.0, 0.0), 0.3), 0.0);
        let th = aligned_angle(Dq::new(0.0, 1.0), 0.0);
        assert!((th - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let th = aligned_angle(Dq::new(0.6, 0.8), 0.0);
        assert!((th.to_degrees() - 53.13).abs() < 0.01);
        // degenerate: hold last
        assert_eq!(aligned_angle(Dq::new(1e-9, 0.0), 0.42), 0.42);
    }

    #[test]
    fn allocation_matches_hand_worked_dip_case() {
        // |V|=0.5, K_v=2.5, V_ref=1, I_max=1, fault floor 0.2.
        let a = allocate_currents(0.5, true, 1.0, 0.2, 2.5, 1.0, 1.0, 0.2, 1.0, 0.3);
        assert!((a.i_perp + 0.9639).abs() < 1e-3);
        assert!((a.i_par_max - 0.2667).abs() < 1e-3);
        assert!(!a.infeasible);
        // i_par pinned at the reserved headroom
        assert!((a.i_par + 0.2667).abs() < 1e-3);
    }

    #[test]
    fn allocation_normal_full_voltage() {
        let a = allocate_currents(1.0, false, 1.0, 1.0, 2.5, 1.0, 1.0, 0.2, 1.0, 0.3);
        assert!(a.i_perp.abs() < 1e-9);
        assert!((a.i_par + 1.0 / 1.5).abs() < 1e-9);
        assert!((a.p_draw_cmd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn allocation_headroom_identity() {
        let a = allocate_currents(0.5, true, 1.0, 0.2, 2.5, 1.0, 1.0, 0.2, 1.0, 0.3);
        assert!((a.i_par_max * a.i_par_max + a.i_perp * a.i_perp - 1.0).abs() < 1e-12);
        // three-four-five check
        let b = allocate_currents(0.76, true, 1.0, 0.2, 2.5, 1.0, 1.0, 0.2, 1.0, 0.3);
        assert!((b.i_perp + 0.6).abs() < 1e-2);
        assert!((b.i_par_max - (1.0 - b.i_perp * b.i_perp).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn allocation_vector_limit_always() {
        for v in [0.01, 0.2, 0.5, 0.8, 1.0, 1.1] {
            for fault in [false, true] {
                let a = allocate_currents(v, fault, 1.0, 0.6, 2.5, 1.0, 1.0, 0.2, 1.0, 0.3);
                let mag = a.i_par.hypot(a.i_perp);
                assert!(mag <= 1.0 + 1e-9, "v={v} fault={fault} mag={mag}");
            }
        }
    }

    #[test]
    fn allocation_infeasible_min_draw_sacrifices_q() {
        // No BESS: floor is the whole load; at a collapsed voltage the
        // reservation exceeds ampacity.
        let a = allocate_currents(0.05, true, 1.0, 1.0, 2.5, 1.0, 1.0, 0.2, 0.0, 0.3);
        assert!(a.infeasible);
        assert_eq!(a.i_perp, 0.0);
        assert!((a.i_par.abs() - 1.0).abs() < 1e-12);
        // commitment degrades to ampacity
        assert!((a.p_draw_commit - 1.5 * 0.05 * 1.0).abs() < 1e-12);
    }

    #[test]
    fn allocation_voltage_floor_flag() {
        let a = allocate_currents(5e-4, true, 1.0, 0.2, 2.5, 1.0, 1.0, 0.2, 1.0, 0.3);
        assert!(a.voltage_floor);
        assert!(a.i_par.is_finite() && a.i_perp.is_finite());
    }

    #[test]
    fn mc_references_cease_below_threshold() {
        let (ip, iq, c) = GflMomentaryCessation::references(0.5, 1.0, 1.0, 0.70);
        assert_eq!((ip, iq, c), (0.0, 0.0, 0.0));
    }

    #[test]
    fn mc_references_constant_power() {
        let (ip, _, _) = GflMomentaryCessation::references(1.0, 1.0, 1.0, 0.70);
        assert!((ip + 0.6667).abs() < 1e-3);
        // amplification under sag
        let (ip, _, _) = GflMomentaryCessation::references(0.75, 1.0, 1.0, 0.70);
        assert!((ip + 0.889).abs() < 1e-3);
    }

    #[test]
    fn pll_references_lvrt_headroom() {
        // |V|=0.661: i_q = 2.5*0.339 = 0.848, i_d headroom ~0.53
        let (id, iq, commit) = GflPll::references(0.661, 1.0, 1.0, 0.85, 2.5, 1.0);
        assert!((iq + 0.8475).abs() < 1e-3);
        assert!((id.abs() - 0.5308).abs() < 1e-3);
        assert!((commit - 1.5 * 0.661 * id.abs()).abs() < 1e-9);
    }

    #[test]
    fn pll_references_normal_unity_pf() {
        let (id, iq, commit) = GflPll::references(1.0, 1.0, 1.0, 0.85, 2.5, 1.0);
        assert!((id + 0.6667).abs() < 1e-3);
        assert_eq!(iq, 0.0);
        assert!((commit - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pll_locks_on_balanced_voltage() {
        // For gains 20/200 the slow closed-loop pole sits at Ki/Kp = 10 1/s,
        // so a 20-degree angle step settles below 1e-3 rad in about half a
        // second; the 0.2 s mark must already show a decade of decay.
        let omega0 = 2.0 * std::f64::consts::PI * 60.0;
        let inner = InnerCurrentLoop::new(0.3, 20.0, 0.06, 0.005, 0.15);
        let limits = CurrentLimits {
            i_max: 1.0,
            e_max: 1.2,
        };
        let mut pll = GflPll::new(inner, limits, 20.0, 200.0, 0.85, 2.5, omega0);
        let target = 20f64.to_radians();
        let v = Dq::new(1.0, 0.0).rotate(target);
        let obs = PlantObs {
            t: 0.0,
            v_pcc: v,
            i: Dq::default(),
            v_dc: 1.0,
            v_ceiling: 1.2,
            p_bess: 0.0,
            soc: 0.9,
            p_load: 0.0,
            freq_dev: None,
        };
        let dt = 1e-4;
        for _ in 0..2000 {
            pll.step(&obs, dt);
        }
        assert!((pll.theta - target).abs() < 0.1 * target);
        for _ in 0..3000 {
            pll.step(&obs, dt);
        }
        assert!((pll.theta - target).abs() < 1e-3);
    }

    fn make_proposed() -> ProposedSupervisor {
        let inner = InnerCurrentLoop::new(0.3, 20.0, 0.06, 0.005, 0.15);
        let limits = CurrentLimits {
            i_max: 1.0,
            e_max: 1.2,
        };
        let params = ProposedParams {
            kv: 2.5,
            v_ref: 1.0,
            p_fault_min: 0.2,
            kp_dc: 2.0,
            ki_dc: 10.0,
            v_dc_ref: 1.0,
            soc_bias: 0.02,
            soc_target: 0.9,
            mode1_enabled: true,
            mode3_enabled: false,
            kf: 20.0,
            p_ffr_max_sys: 0.02,
            sys_to_facility: 30.0,
            p_dis_max: 1.0,
            p_chg_max: 0.3,
        };
        ProposedSupervisor::new(
            FaultDetector::new(0.85, 0.90, 0.001),
            ShapingFilter::new(0.8, 0.005, 0.2, 400.0),
            inner,
            limits,
            params,
        )
    }

    fn obs_at(v: Dq, v_dc: f64) -> PlantObs {
        PlantObs {
            t: 0.0,
            v_pcc: v,
            i: Dq::default(),
            v_dc,
            v_ceiling: 1.2 * v_dc,
            p_bess: 0.2,
            soc: 0.9,
            p_load: 1.0,
            freq_dev: None,
        }
    }

    #[test]
    fn proposed_mode1_term_zero_at_reference() {
        let mut c = make_proposed();
        let a = c.step(&obs_at(Dq::new(0.95, 0.0), 1.0), 1e-4);
        assert_eq!(a.mode1_addend, 0.0);
        assert_eq!(a.mode, 1);
    }

    #[test]
    fn proposed_mode1_term_discharges_on_low_bus() {
        let mut c = make_proposed();
        let a = c.step(&obs_at(Dq::new(0.95, 0.0), 0.9), 1e-4);
        // K_p,dc * 0.1 = 0.2 plus a one-step integral contribution
        assert!((a.mode1_addend - 0.2).abs() < 1e-2);
    }

    #[test]
    fn proposed_preemption_in_fault() {
        let mut c = make_proposed();
        let dip = Dq::new(0.5, 0.0);
        for _ in 0..40 {
            c.step(&obs_at(dip, 0.9), 1e-4);
        }
        assert!(c.in_fault());
        let a = c.step(&obs_at(dip, 0.8), 1e-4);
        assert_eq!(a.mode, 2);
        assert_eq!(a.mode1_addend, 0.0);
        assert_eq!(a.mode3_overlay, 0.0);
    }

    #[test]
    fn proposed_fault_entry_within_detection_delay() {
        let mut c = make_proposed();
        let dip = Dq::new(0.5, 0.0);
        let dt = 1e-4;
        let mut steps = 0;
        loop {
            let a = c.step(&obs_at(dip, 1.0), dt);
            steps += 1;
            if a.mode == 2 {
                break;
            }
            assert!(steps < 50, "fault never asserted");
        }
        assert!((steps as f64 * dt) <= 0.001 + 2.0 * dt);
    }

    #[test]
    fn proposed_vector_limit_on_refs() {
        let mut c = make_proposed();
        for k in 0..200 {
            let v = Dq::new(0.3 + 0.004 * k as f64, 0.05).rotate(0.01 * k as f64);
            let a = c.step(&obs_at(v, 1.0), 1e-4);
            assert!(a.i_ref.mag() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn mode3_target_modulation() {
        let mut c = make_proposed();
        c.params.mode3_enabled = true;
        // under-frequency: support positive, target (and ref slope) down
        let mut o = obs_at(Dq::new(0.98, 0.0), 1.0);
        o.freq_dev = Some(-0.001);
        let a = c.step(&o, 1e-4);
        assert!(a.mode3_overlay > 0.0);
        assert_eq!(a.mode, 3);
        // the facility-base mapping: sat(20*0.001, cap 0.02)=0.02 -> *30 = 0.6
        assert!((a.mode3_overlay - 0.6).abs() < 1e-9);
    }

    #[test]
    fn mode3_cap_binds() {
        let mut c = make_proposed();
        c.params.mode3_enabled = true;
        let mut o = obs_at(Dq::new(0.98, 0.0), 1.0);
        o.freq_dev = Some(-0.5);
        let a = c.step(&o, 1e-4);
        assert!((a.mode3_overlay - 0.02 * 30.0).abs() < 1e-9);
    }
}
