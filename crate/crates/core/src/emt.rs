//! Fixed-step, non-switching abc-domain simulation of the same control logic:
//! a commanded voltage source behind the RL filter feeding an RL Thevenin
//! grid whose inductance is a true state. Post-processing extracts one-cycle
//! fundamental phasors so the output shares the averaged trace schema.

use crate::controllers::{Controller, PlantObs};
use crate::error::SimError;
use crate::plant::{active_power, BessModel, DcLinkProxy, Dq, TheveninGrid};
use crate::blocks::LagRampPath;
use crate::scenario::{ControllerKind, Scenario};
use crate::sim::{solve_initial_current, Trace, TraceRecord};

const TWO_THIRDS_PI: f64 = 2.0 * std::f64::consts::PI / 3.0;

/// Amplitude-invariant dq -> abc at grid angle `theta`.
pub fn abc_from_dq(x: Dq, theta: f64) -> [f64; 3] {
    let a = theta;
    let b = theta - TWO_THIRDS_PI;
    let c = theta + TWO_THIRDS_PI;
    [
        x.d * a.cos() - x.q * a.sin(),
        x.d * b.cos() - x.q * b.sin(),
        x.d * c.cos() - x.q * c.sin(),
    ]
}

/// Amplitude-invariant abc -> dq at grid angle `theta`.
pub fn dq_from_abc(x: [f64; 3], theta: f64) -> Dq {
    let a = theta;
    let b = theta - TWO_THIRDS_PI;
    let c = theta + TWO_THIRDS_PI;
    Dq::new(
        2.0 / 3.0 * (x[0] * a.cos() + x[1] * b.cos() + x[2] * c.cos()),
        -2.0 / 3.0 * (x[0] * a.sin() + x[1] * b.sin() + x[2] * c.sin()),
    )
}

/// Sliding one-cycle fundamental extractor for one scalar channel.
struct PhasorWindow {
    cos_buf: Vec<f64>,
    sin_buf: Vec<f64>,
    idx: usize,
    filled: bool,
    sum_cos: f64,
    sum_sin: f64,
}

impl PhasorWindow {
    fn new(samples_per_cycle: usize) -> Self {
        Self {
            cos_buf: vec![0.0; samples_per_cycle],
            sin_buf: vec![0.0; samples_per_cycle],
            idx: 0,
            filled: false,
            sum_cos: 0.0,
            sum_sin: 0.0,
        }
    }

    /// Push one sample with its reference angle; returns the fundamental
    /// phasor (d, q) in the rotating frame once a full cycle is available.
    fn push(&mut self, x: f64, theta: f64) -> Option<Dq> {
        let n = self.cos_buf.len() as f64;
        let c = 2.0 / n * x * theta.cos();
        let s = -2.0 / n * x * theta.sin();
        self.sum_cos += c - self.cos_buf[self.idx];
        self.sum_sin += s - self.sin_buf[self.idx];
        self.cos_buf[self.idx] = c;
        self.sin_buf[self.idx] = s;
        self.idx += 1;
        if self.idx == self.cos_buf.len() {
            self.idx = 0;
            self.filled = true;
        }
        if self.filled {
            Some(Dq::new(self.sum_cos, self.sum_sin))
        } else {
            None
        }
    }
}

/// Three-channel phasor extractor returning the positive-sequence dq pair of
/// a balanced abc set (the mean of the three per-phase estimates).
struct AbcPhasor {
    w: [PhasorWindow; 3],
}

impl AbcPhasor {
    fn new(samples_per_cycle: usize) -> Self {
        Self {
            w: [
                PhasorWindow::new(samples_per_cycle),
                PhasorWindow::new(samples_per_cycle),
                PhasorWindow::new(samples_per_cycle),
            ],
        }
    }

    fn push(&mut self, x: [f64; 3], theta: f64) -> Option<Dq> {
        let a = self.w[0].push(x[0], theta);
        let b = self.w[1].push(x[1], theta - TWO_THIRDS_PI);
        let c = self.w[2].push(x[2], theta + TWO_THIRDS_PI);
        match (a, b, c) {
            (Some(a), Some(b), Some(c)) => Some(Dq::new(
                (a.d + b.d + c.d) / 3.0,
                (a.q + b.q + c.q) / 3.0,
            )),
            _ => None,
        }
    }
}

/// Default EMT step: 50 microseconds.
pub const EMT_DT: f64 = 50e-6;

/// Run the abc-domain simulation of `sc` at `EMT_DT` and return a trace in
/// the averaged schema with phasor-equivalent quantities. Emission starts
/// after the first full fundamental cycle.
pub fn run_emt(sc: &Scenario) -> Result<Trace, SimError> {
    sc.validate()?;
    let dt = EMT_DT;
    let omega0 = 2.0 * std::f64::consts::PI * sc.f0_hz;
    let mut grid = TheveninGrid::from_scr(sc.scr, sc.x_over_r)?;
    let load = sc.load_profile();

    // Series RL totals: filter + grid, inductances as true states.
    let l_f = sc.x_f / omega0;
    let l_g = grid.x_g / omega0;
    let l_tot = l_f + l_g;
    let r_tot = sc.r_f + grid.r_g;

    let mut dclink = DcLinkProxy::new(sc.v_dc0, sc.t_dc, sc.e_max, sc.v_dc_ref);
    let mut bess = BessModel {
        path: LagRampPath::new(0.0, sc.tau_bess, sc.r_bess),
        soc: sc.soc0,
        soc_min: sc.soc_min,
        soc_max: sc.soc_max,
        p_dis_max: sc.p_dis_max,
        p_chg_max: sc.p_chg_max,
        t_autonomy: sc.t_autonomy,
    };

    // Warm start from the averaged operating point.
    let i0 = solve_initial_current(sc, &grid);
    let p_load0 = load.at(0.0);
    if sc.controller == ControllerKind::Proposed {
        bess.path.state = (p_load0 - sc.initial_ref).clamp(-sc.p_chg_max, sc.p_dis_max).max(0.0);
    }
    let mut i_abc = abc_from_dq(i0, 0.0);

    let mut controller = crate::sim::build_controller(sc, sc.initial_ref);
    if let Controller::GflPll(pll) = &mut controller {
        let v0 = grid.pcc_voltage(i0);
        if v0.mag() > 1e-6 {
            pll.theta = v0.angle();
        }
    }

    let samples_per_cycle = (1.0 / (sc.f0_hz * dt)).round() as usize;
    let mut v_phasor = AbcPhasor::new(samples_per_cycle);
    let mut i_phasor = AbcPhasor::new(samples_per_cycle);

    let steps = (sc.duration / dt).round() as usize;
    let mut records = Vec::with_capacity(steps.saturating_sub(samples_per_cycle));
    let mut diverged = None;
    let mut last_v_dq = grid.pcc_voltage(i0);

    let mut t = 0.0;
    for _ in 0..steps {
        let in_dip = t >= sc.dip_start && t < sc.dip_end && sc.dip_start < sc.dip_end;
        let vth_mag = if in_dip { sc.v_dip } else { 1.0 };
        grid.vth = Dq::new(vth_mag, 0.0);

        let theta = omega0 * t;
        let v_th_abc = abc_from_dq(grid.vth, theta);
        let p_load = load.at(t);

        // Instantaneous dq view of the PCC for the controller: v_pcc from the
        // previous step's derivative is avoided by reconstructing it from the
        // phasor-consistent algebra on the instantaneous current.
        let i_dq_inst = dq_from_abc(i_abc, theta);
        let v_pcc_dq_est = grid.pcc_voltage(i_dq_inst);

        let obs = PlantObs {
            t,
            v_pcc: v_pcc_dq_est,
            i: i_dq_inst,
            v_dc: dclink.v_dc,
            v_ceiling: dclink.voltage_ceiling(),
            p_bess: bess.power(),
            soc: bess.soc,
            p_load,
            freq_dev: None,
        };
        let action = controller.step(&obs, dt);

        let v_inv_abc = abc_from_dq(action.v_inv, theta);

        // Integrate the series RL loop per phase and reconstruct the PCC
        // voltage from the grid-side elements including L_g di/dt.
        let mut v_pcc_abc = [0.0; 3];
        let mut di_abc = [0.0; 3];
        for k in 0..3 {
            let di = (v_inv_abc[k] - v_th_abc[k] - r_tot * i_abc[k]) / l_tot;
            di_abc[k] = di;
            v_pcc_abc[k] = v_th_abc[k] + grid.r_g * i_abc[k] + l_g * di;
        }

        // Phasor extraction before the state update so the sample aligns
        // with the recorded instant.
        let v_ph = v_phasor.push(v_pcc_abc, theta);
        let i_ph = i_phasor.push(i_abc, theta);

        if let (Some(v), Some(i_f)) = (v_ph, i_ph) {
            last_v_dq = v;
            let p_grid = active_power(v, i_f);
            let p_draw = -p_grid;
            let p_served = p_load.min(action.p_draw_commit + action.p_bess_cmd_gated.max(0.0));
            records.push(TraceRecord {
                t,
                p_draw,
                p_grid,
                p_load,
                p_bess: bess.power(),
                soc: bess.soc,
                v_pcc_mag: v.mag(),
                v_pcc_d: v.d,
                v_pcc_q: v.q,
                i_d: i_f.d,
                i_q: i_f.q,
                i_mag: i_f.mag(),
                v_dc: dclink.v_dc,
                p_draw_ref: action.p_draw_ref,
                mode: action.mode,
                cessation: action.flags.cessation,
                voltage_floor: action.flags.voltage_floor,
                infeasible_min_draw: action.flags.infeasible_min_draw,
                bus_collapse: dclink.collapsed,
                p_served,
                p_bess_cmd: action.p_bess_cmd,
                i_ref_mag: action.i_ref.mag(),
                mode1_addend: action.mode1_addend,
                mode3_overlay: action.mode3_overlay,
                in_fault: controller.in_fault(),
            });
        }

        // State updates.
        for k in 0..3 {
            i_abc[k] += di_abc[k] * dt;
        }
        let mag = dq_from_abc(i_abc, theta).mag();
        if !mag.is_finite() || mag > 50.0 {
            diverged = Some(format!("EMT diverged at t={t:.6}: |i|={mag:.3}"));
            break;
        }
        let p_bess_new = bess.step(action.p_bess_cmd, dt);
        let p_draw_inst = -(v_pcc_abc[0] * i_abc[0] + v_pcc_abc[1] * i_abc[1] + v_pcc_abc[2] * i_abc[2]);
        dclink.step(p_draw_inst + p_bess_new, p_load, dt);

        t += dt;
    }

    let _ = last_v_dq;
    Ok(Trace {
        records,
        dt,
        scenario: sc.clone(),
        diverged,
    })
}

/// RMS difference of one channel between two traces over [t0, t1], sampling
/// the sparser trace against the denser one by nearest time.
pub fn channel_rms_diff(
    a: &Trace,
    b: &Trace,
    pick: fn(&TraceRecord) -> f64,
    t0: f64,
    t1: f64,
) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in a.records.iter().filter(|r| r.t >= t0 && r.t < t1) {
        // nearest record in b
        let idx = ((r.t - b.records[0].t) / b.dt).round() as isize;
        if idx < 0 || idx as usize >= b.records.len() {
            continue;
        }
        let rb = &b.records[idx as usize];
        let d = pick(r) - pick(rb);
        sum += d * d;
        n += 1;
    }
    if n == 0 {
        f64::INFINITY
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Paired-comparison CSV (t, averaged, emt) for one channel.
pub fn comparison_csv(avg: &Trace, emt: &Trace, pick: fn(&TraceRecord) -> f64) -> String {
    let mut out = String::from("t,averaged,emt\n");
    for r in &emt.records {
        let idx = ((r.t - avg.records[0].t) / avg.dt).round() as isize;
        if idx < 0 || idx as usize >= avg.records.len() {
            continue;
        }
        let ra = &avg.records[idx as usize];
        use std::fmt::Write;
        let _ = writeln!(out, "{:.9e},{:.9e},{:.9e}", r.t, pick(ra), pick(r));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dq_abc_round_trip() {
        for (d, q, th) in [(1.0, 0.0, 0.0), (0.3, -0.7, 1.2), (-0.5, 0.25, -2.4)] {
            let x = Dq::new(d, q);
            let back = dq_from_abc(abc_from_dq(x, th), th);
            assert!((back.d - d).abs() < 1e-12);
            assert!((back.q - q).abs() < 1e-12);
        }
    }

    #[test]
    fn balanced_unit_set_maps_to_unit_d() {
        let abc = abc_from_dq(Dq::new(1.0, 0.0), 0.7);
        let dq = dq_from_abc(abc, 0.7);
        assert!((dq.d - 1.0).abs() < 1e-12);
        assert!(dq.q.abs() < 1e-12);
        // zero maps to zero
        let z = dq_from_abc([0.0; 3], 0.3);
        assert_eq!((z.d, z.q), (0.0, 0.0));
    }

    #[test]
    fn balanced_set_sums_to_zero() {
        let abc = abc_from_dq(Dq::new(0.8, -0.33), 2.1);
        assert!((abc[0] + abc[1] + abc[2]).abs() < 1e-12);
    }

    #[test]
    fn power_convention_consistent() {
        // v_a i_a + v_b i_b + v_c i_c == 1.5 (v_d i_d + v_q i_q)
        let v = Dq::new(0.9, 0.2);
        let i = Dq::new(-0.6, -0.3);
        let th = 1.234;
        let va = abc_from_dq(v, th);
        let ia = abc_from_dq(i, th);
        let p_abc: f64 = va.iter().zip(&ia).map(|(a, b)| a * b).sum();
        assert!((p_abc - active_power(v, i)).abs() < 1e-12);
    }

    #[test]
    fn phasor_window_recovers_constant_sinusoid() {
        let f0 = 60.0;
        let dt = EMT_DT;
        let n = (1.0 / (f0 * dt)).round() as usize;
        let mut w = AbcPhasor::new(n);
        let mut out = Dq::default();
        for k in 0..(3 * n) {
            let t = k as f64 * dt;
            let th = 2.0 * std::f64::consts::PI * f0 * t;
            let abc = abc_from_dq(Dq::new(0.5, 0.0), th);
            if let Some(v) = w.push(abc, th) {
                out = v;
            }
        }
        assert!((out.mag() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn phasor_window_tracks_amplitude_step_within_one_cycle() {
        let f0 = 60.0;
        let dt = EMT_DT;
        let n = (1.0 / (f0 * dt)).round() as usize;
        let mut w = AbcPhasor::new(n);
        let mut mags = Vec::new();
        for k in 0..(4 * n) {
            let t = k as f64 * dt;
            let th = 2.0 * std::f64::consts::PI * f0 * t;
            let amp = if k < 2 * n { 1.0 } else { 0.4 };
            if let Some(v) = w.push(abc_from_dq(Dq::new(amp, 0.0), th), th) {
                mags.push(v.mag());
            }
        }
        // one full cycle after the step the estimate has settled
        let settled = mags[mags.len() - 1];
        assert!((settled - 0.4).abs() < 1e-9);
        let at_step_plus_cycle = mags[2 * n - n + n - 1];
        assert!((at_step_plus_cycle - 0.4).abs() < 0.02);
    }
}
