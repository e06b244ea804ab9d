//! Fixed-step averaged-dq simulation engine.
//!
//! Per-step order: (1) set the Thevenin source for the dip window, (2) read
//! the plant (quasi-static PCC algebra), (3) controller step, (4) record the
//! pre-integration state together with this step's controls, (5) integrate
//! the plant. Identical inputs produce bit-identical traces.

use crate::blocks::{LagRampPath, ShapingFilter};
use crate::controllers::{
    CurrentLimits, FaultDetector, GflMomentaryCessation, GflPll, InnerCurrentLoop, PlantObs,
    ProposedParams, ProposedSupervisor, Controller,
};
use crate::error::SimError;
use crate::plant::{active_power, BessModel, DcLinkProxy, Dq, RlFilter, TheveninGrid};
use crate::scenario::{ControllerKind, Scenario};

/// One recorded sample. `p_draw` is the realized electrical draw -P_grid;
/// `p_served` is the commitment-level delivered power used by the unserved
/// energy metric.
#[derive(Debug, Clone, Copy)]
pub struct TraceRecord {
    pub t: f64,
    pub p_draw: f64,
    pub p_grid: f64,
    pub p_load: f64,
    pub p_bess: f64,
    pub soc: f64,
    pub v_pcc_mag: f64,
    pub v_pcc_d: f64,
    pub v_pcc_q: f64,
    pub i_d: f64,
    pub i_q: f64,
    pub i_mag: f64,
    pub v_dc: f64,
    pub p_draw_ref: f64,
    pub mode: u8,
    pub cessation: bool,
    pub voltage_floor: bool,
    pub infeasible_min_draw: bool,
    pub bus_collapse: bool,
    pub p_served: f64,
    pub p_bess_cmd: f64,
    pub i_ref_mag: f64,
    pub mode1_addend: f64,
    pub mode3_overlay: f64,
    pub in_fault: bool,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub dt: f64,
    pub scenario: Scenario,
    /// Set when the run aborted on divergence; the partial trace is retained.
    pub diverged: Option<String>,
}

pub const TRACE_COLUMNS: &[&str] = &[
    "t",
    "p_draw",
    "p_grid",
    "p_load",
    "p_bess",
    "soc",
    "v_pcc_mag",
    "v_pcc_d",
    "v_pcc_q",
    "i_d",
    "i_q",
    "i_mag",
    "v_dc",
    "p_draw_ref",
    "mode",
    "flag_cessation",
    "flag_voltage_floor",
    "flag_infeasible_min_draw",
    "flag_bus_collapse",
    "p_served",
    "p_bess_cmd",
    "i_ref_mag",
    "mode1_addend",
    "mode3_overlay",
    "in_fault",
];

impl Trace {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 220);
        out.push_str(&TRACE_COLUMNS.join(","));
        out.push('\n');
        for r in &self.records {
            use std::fmt::Write;
            let _ = writeln!(
                out,
                "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{},{},{},{},{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{}",
                r.t,
                r.p_draw,
                r.p_grid,
                r.p_load,
                r.p_bess,
                r.soc,
                r.v_pcc_mag,
                r.v_pcc_d,
                r.v_pcc_q,
                r.i_d,
                r.i_q,
                r.i_mag,
                r.v_dc,
                r.p_draw_ref,
                r.mode,
                r.cessation as u8,
                r.voltage_floor as u8,
                r.infeasible_min_draw as u8,
                r.bus_collapse as u8,
                r.p_served,
                r.p_bess_cmd,
                r.i_ref_mag,
                r.mode1_addend,
                r.mode3_overlay,
                r.in_fault as u8,
            );
        }
        out
    }

    /// Two-column (t, value) CSV for plot data.
    pub fn channel_csv(&self, channel: &str) -> Result<String, SimError> {
        let pick: fn(&TraceRecord) -> f64 = match channel {
            "p_draw" => |r| r.p_draw,
            "p_load" => |r| r.p_load,
            "p_bess" => |r| r.p_bess,
            "v_pcc_mag" => |r| r.v_pcc_mag,
            "i_mag" => |r| r.i_mag,
            "v_dc" => |r| r.v_dc,
            "soc" => |r| r.soc,
            "p_draw_ref" => |r| r.p_draw_ref,
            _ => {
                return Err(SimError::Metrics(format!(
                    "unknown trace channel `{channel}`"
                )))
            }
        };
        let mut out = String::from("t,value\n");
        for r in &self.records {
            use std::fmt::Write;
            let _ = writeln!(out, "{:.9e},{:.9e}", r.t, pick(r));
        }
        Ok(out)
    }
}

/// Everything the engine integrates.
struct PlantState {
    grid: TheveninGrid,
    filter: RlFilter,
    dclink: DcLinkProxy,
    bess: BessModel,
}

pub(crate) fn build_controller(sc: &Scenario, shaping_state: f64) -> Controller {
    let omega0 = 2.0 * std::f64::consts::PI * sc.f0_hz;
    let int_limit = sc.e_max / sc.ki_i;
    let inner = InnerCurrentLoop::new(sc.kp_i, sc.ki_i, int_limit, sc.r_f, sc.x_f);
    let limits = CurrentLimits {
        i_max: sc.i_max,
        e_max: sc.e_max,
    };
    match sc.controller {
        ControllerKind::Proposed => {
            let params = ProposedParams {
                kv: sc.kv,
                v_ref: sc.v_ref,
                p_fault_min: sc.p_fault_min,
                kp_dc: sc.kp_dc,
                ki_dc: sc.ki_dc,
                v_dc_ref: sc.v_dc_ref,
                soc_bias: sc.soc_bias,
                soc_target: sc.soc0,
                mode1_enabled: sc.mode1_enabled,
                mode3_enabled: sc.mode3_enabled,
                kf: sc.kf,
                p_ffr_max_sys: sc.p_ffr_max_sys,
                sys_to_facility: sc.s_sys_mw / (sc.n_blocks * sc.s_base_mw),
                p_dis_max: sc.p_dis_max,
                p_chg_max: sc.p_chg_max,
            };
            Controller::Proposed(Box::new(ProposedSupervisor::new(
                FaultDetector::new(sc.v_thresh, sc.v_rec, sc.t_det),
                ShapingFilter::new(shaping_state, sc.tau_grid, sc.r_limit, sc.r_down),
                inner,
                limits,
                params,
            )))
        }
        ControllerKind::GflMc => {
            Controller::GflMc(GflMomentaryCessation::new(inner, limits, sc.v_mc))
        }
        ControllerKind::GflPll => Controller::GflPll(Box::new(GflPll::new(
            inner, limits, sc.kp_pll, sc.ki_pll, sc.v_lvrt, sc.kv_lvrt, omega0,
        ))),
    }
}

/// Damped fixed-point solve of the pre-fault operating point: iterate the
/// reference law against the quasi-static network until the current phasor
/// stops moving (or the iteration budget runs out, e.g. for a benchmark
/// pinned at its transfer limit).
pub fn solve_initial_current(sc: &Scenario, grid: &TheveninGrid) -> Dq {
    let p_load = sc.load_profile().at(0.0);
    let mut i = Dq::new(0.0, 0.0);
    let mut theta = 0.0;
    for _ in 0..400 {
        let v = grid.pcc_voltage(i);
        let vmag = v.mag();
        if vmag > 1e-6 {
            theta = v.angle();
        }
        let (i_par, i_perp) = match sc.controller {
            ControllerKind::Proposed => {
                let a = crate::controllers::allocate_currents(
                    vmag,
                    false,
                    p_load,
                    sc.initial_ref,
                    sc.kv,
                    sc.v_ref,
                    sc.i_max,
                    sc.p_fault_min,
                    sc.p_dis_max,
                    sc.p_chg_max,
                );
                (a.i_par, a.i_perp)
            }
            ControllerKind::GflMc => {
                let (ip, iq, _) =
                    GflMomentaryCessation::references(vmag.max(sc.v_mc), p_load, sc.i_max, sc.v_mc);
                (ip, iq)
            }
            ControllerKind::GflPll => {
                let (id, iq, _) =
                    GflPll::references(vmag, p_load, sc.i_max, sc.v_lvrt, sc.kv_lvrt, 1.0);
                (id, iq)
            }
        };
        let target = Dq::new(i_par, i_perp).rotate(theta);
        // heavy damping keeps the iteration contractive near the boundary
        i = Dq::new(
            i.d + 0.25 * (target.d - i.d),
            i.q + 0.25 * (target.q - i.q),
        );
    }
    i
}

/// Run one scenario to completion. Divergence aborts with the partial trace
/// retained and the error recorded on the trace.
pub fn run_scenario(sc: &Scenario) -> Result<Trace, SimError> {
    sc.validate()?;
    run_scenario_with_freq(sc, |_, _| None)
}

/// Same engine with an exogenous per-unit frequency-deviation signal for the
/// Mode 3 co-simulation studies. The callback runs exactly once per step and
/// receives (t, realized grid draw at t).
pub fn run_scenario_with_freq<F>(sc: &Scenario, mut freq_dev: F) -> Result<Trace, SimError>
where
    F: FnMut(f64, f64) -> Option<f64>,
{
    let omega0 = 2.0 * std::f64::consts::PI * sc.f0_hz;
    let mut grid = TheveninGrid::from_scr(sc.scr, sc.x_over_r)?;
    let load = sc.load_profile();

    let mut plant = PlantState {
        grid,
        filter: RlFilter::new(sc.r_f, sc.x_f, omega0),
        dclink: DcLinkProxy::new(sc.v_dc0, sc.t_dc, sc.e_max, sc.v_dc_ref),
        bess: BessModel {
            path: LagRampPath::new(0.0, sc.tau_bess, sc.r_bess),
            soc: sc.soc0,
            soc_min: sc.soc_min,
            soc_max: sc.soc_max,
            p_dis_max: sc.p_dis_max,
            p_chg_max: sc.p_chg_max,
            t_autonomy: sc.t_autonomy,
        },
    };

    // Warm start: the filter current at the controller's own operating point,
    // the BESS carrying the load/reference mismatch.
    plant.filter.current = solve_initial_current(sc, &grid);
    let p_load0 = load.at(0.0);
    if sc.controller == ControllerKind::Proposed {
        let cmd0 = (p_load0 - sc.initial_ref).clamp(-sc.p_chg_max, sc.p_dis_max);
        plant.bess.path.state = cmd0.max(0.0);
    }

    let mut controller = build_controller(sc, sc.initial_ref.min(p_load0.max(sc.initial_ref)));
    if let Controller::GflPll(pll) = &mut controller {
        let v0 = grid.pcc_voltage(plant.filter.current);
        if v0.mag() > 1e-6 {
            pll.theta = v0.angle();
        }
    }

    let steps = (sc.duration / sc.dt).round() as usize;
    let mut records = Vec::with_capacity(steps);
    let mut diverged = None;

    let mut t = 0.0;
    for _ in 0..steps {
        // (1) dip window on the Thevenin source
        let in_dip = t >= sc.dip_start && t < sc.dip_end && sc.dip_start < sc.dip_end;
        grid.vth = if in_dip {
            Dq::new(sc.v_dip, 0.0)
        } else {
            Dq::new(1.0, 0.0)
        };
        plant.grid = grid;

        // (2) read the plant
        let i = plant.filter.current;
        let v_pcc = plant.grid.pcc_voltage(i);
        let p_load = load.at(t);
        let p_grid = active_power(v_pcc, i);
        let p_draw = -p_grid;

        let obs = PlantObs {
            t,
            v_pcc,
            i,
            v_dc: plant.dclink.v_dc,
            v_ceiling: plant.dclink.voltage_ceiling(),
            p_bess: plant.bess.power(),
            soc: plant.bess.soc,
            p_load,
            freq_dev: freq_dev(t, p_draw),
        };

        // (3) controller
        let action = controller.step(&obs, sc.dt);

        // (4) record the pre-integration state with this step's controls
        let p_served = p_load.min(action.p_draw_commit + action.p_bess_cmd_gated.max(0.0));
        records.push(TraceRecord {
            t,
            p_draw,
            p_grid,
            p_load,
            p_bess: plant.bess.power(),
            soc: plant.bess.soc,
            v_pcc_mag: v_pcc.mag(),
            v_pcc_d: v_pcc.d,
            v_pcc_q: v_pcc.q,
            i_d: i.d,
            i_q: i.q,
            i_mag: i.mag(),
            v_dc: plant.dclink.v_dc,
            p_draw_ref: action.p_draw_ref,
            mode: action.mode,
            cessation: action.flags.cessation,
            voltage_floor: action.flags.voltage_floor,
            infeasible_min_draw: action.flags.infeasible_min_draw,
            bus_collapse: plant.dclink.collapsed,
            p_served,
            p_bess_cmd: action.p_bess_cmd,
            i_ref_mag: action.i_ref.mag(),
            mode1_addend: action.mode1_addend,
            mode3_overlay: action.mode3_overlay,
            in_fault: controller.in_fault(),
        });

        // (5) integrate
        let p_bess_new = plant.bess.step(action.p_bess_cmd, sc.dt);
        let p_in = p_draw + p_bess_new;
        plant.dclink.step(p_in, p_load, sc.dt);
        match plant.filter.step(action.v_inv, v_pcc, sc.dt, t) {
            Ok(_) => {}
            Err(e) => {
                diverged = Some(e.to_string());
                break;
            }
        }

        t += sc.dt;
    }

    Ok(Trace {
        records,
        dt: sc.dt,
        scenario: sc.clone(),
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    #[test]
    fn deterministic_traces() {
        let sc = Scenario {
            duration: 0.3,
            dip_start: 0.1,
            dip_end: 0.25,
            ..Scenario::default()
        };
        let a = run_scenario(&sc).unwrap().to_csv();
        let b = run_scenario(&sc).unwrap().to_csv();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_duration_dip_is_a_no_fault_run() {
        let mut sc = Scenario {
            duration: 0.3,
            dip_start: 0.0,
            dip_end: 0.0,
            ..Scenario::default()
        };
        sc.dip_start = 0.2;
        sc.dip_end = 0.2;
        let with_dip = run_scenario(&sc).unwrap().to_csv();
        sc.dip_start = 0.0;
        sc.dip_end = 0.0;
        let without = run_scenario(&sc).unwrap().to_csv();
        assert_eq!(with_dip, without);
    }

    #[test]
    fn draw_equals_negative_grid_power_every_sample() {
        let sc = Scenario {
            duration: 0.2,
            dip_start: 0.05,
            dip_end: 0.15,
            ..Scenario::default()
        };
        let tr = run_scenario(&sc).unwrap();
        for r in &tr.records {
            assert_eq!(r.p_draw, -r.p_grid);
        }
    }

    #[test]
    fn proposed_prefault_operating_point_is_settled() {
        let sc = Scenario {
            duration: 0.4,
            dip_start: 0.0,
            dip_end: 0.0,
            ..Scenario::default()
        };
        let tr = run_scenario(&sc).unwrap();
        // Warm start: the draw tracks the rising reference closely from t=0.
        for r in tr.records.iter().take(100) {
            assert!(
                (r.p_draw - r.p_draw_ref).abs() < 0.05,
                "t={} draw={} ref={}",
                r.t,
                r.p_draw,
                r.p_draw_ref
            );
        }
        // BESS carries the remainder of the load
        let r0 = &tr.records[50];
        assert!((r0.p_bess + r0.p_draw - r0.p_load).abs() < 0.1);
    }

    #[test]
    fn mode_preemption_invariant_on_baseline() {
        let tr = run_scenario(&Scenario::default()).unwrap();
        for r in &tr.records {
            if r.in_fault {
                assert_eq!(r.mode1_addend, 0.0, "t={}", r.t);
                assert_eq!(r.mode3_overlay, 0.0, "t={}", r.t);
            }
        }
    }

    #[test]
    fn vector_limit_on_references_everywhere() {
        for kind in ["proposed", "gfl-mc", "gfl-pll"] {
            let mut sc = Scenario::default();
            sc.controller = crate::scenario::ControllerKind::parse(kind).unwrap();
            let tr = run_scenario(&sc).unwrap();
            for r in &tr.records {
                assert!(
                    r.i_ref_mag <= sc.i_max + 1e-9,
                    "{kind} at t={}: |i*|={}",
                    r.t,
                    r.i_ref_mag
                );
            }
        }
    }

    #[test]
    fn csv_header_matches_columns() {
        let sc = Scenario {
            duration: 0.01,
            dip_start: 0.0,
            dip_end: 0.0,
            ..Scenario::default()
        };
        let tr = run_scenario(&sc).unwrap();
        let csv = tr.to_csv();
        let header = csv.lines().next().unwrap();
        assert_eq!(header.split(',').count(), TRACE_COLUMNS.len());
        // >= 9 significant digits on data rows
        let row = csv.lines().nth(1).unwrap();
        assert!(row.split(',').next().unwrap().contains('e'));
    }
}
