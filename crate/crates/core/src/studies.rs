//! Bulk-frequency studies on a swing-equation proxy: open-loop mapping of
//! fault-case draw traces to frequency excursions for N aggregated blocks,
//! a closed-loop no-fault frequency event with Mode 3 droop/FFR, and the
//! N/H sensitivity sweep.

use crate::error::SimError;
use crate::scenario::{ControllerKind, Scenario};
use crate::sim::{run_scenario, run_scenario_with_freq, Trace};

/// Swing-equation frequency proxy on the bulk system base:
/// 2H dx/dt = (P_m - P_e) - D x, f = f0 (1 + x).
#[derive(Debug, Clone, Copy)]
pub struct SwingProxy {
    pub h: f64,
    pub d: f64,
    pub s_sys_mw: f64,
    pub n_blocks: f64,
    pub p_nom_mw: f64,
    pub f0_hz: f64,
    pub p_m: f64,
    pub x: f64,
}

impl SwingProxy {
    pub fn from_scenario(sc: &Scenario) -> Self {
        Self {
            h: sc.h_inertia,
            d: sc.d_damping,
            s_sys_mw: sc.s_sys_mw,
            n_blocks: sc.n_blocks,
            p_nom_mw: sc.s_base_mw,
            f0_hz: sc.f0_hz,
            p_m: 0.0,
            x: 0.0,
        }
    }

    pub fn step(&mut self, p_e: f64, dt: f64) -> f64 {
        self.x += dt * ((self.p_m - p_e) - self.d * self.x) / (2.0 * self.h);
        self.x
    }

    pub fn freq_hz(&self) -> f64 {
        self.f0_hz * (1.0 + self.x)
    }

    /// Facility-to-system scaling of a draw deviation.
    pub fn facility_to_sys(&self) -> f64 {
        self.n_blocks * self.p_nom_mw / self.s_sys_mw
    }
}

/// One frequency series: (t, f) pairs.
#[derive(Debug, Clone)]
pub struct FreqTrace {
    pub label: String,
    pub t: Vec<f64>,
    pub f_hz: Vec<f64>,
}

impl FreqTrace {
    pub fn peak_deviation(&self, f0: f64) -> f64 {
        self.f_hz
            .iter()
            .map(|f| (f - f0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_f(&self) -> f64 {
        self.f_hz.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_f(&self) -> f64 {
        self.f_hz.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,f_hz\n");
        for (t, f) in self.t.iter().zip(&self.f_hz) {
            use std::fmt::Write;
            let _ = writeln!(out, "{t:.9e},{f:.9e}");
        }
        out
    }
}

/// Map a recorded facility draw trace onto the frequency proxy: the system
/// sees N identical blocks deviating from their pre-event draw, with the
/// mechanical power fixed at the balanced pre-event point.
pub fn run_fault_aggregation(trace: &Trace, proxy: &SwingProxy) -> Result<FreqTrace, SimError> {
    if trace.records.is_empty() {
        return Err(SimError::TraceMismatch("empty trace".into()));
    }
    let scale = proxy.facility_to_sys();
    let draw0 = trace.records[0].p_draw;
    let mut sp = *proxy;
    sp.x = 0.0;
    sp.p_m = 0.0; // balanced at the pre-event point; deviations only
    let mut t_out = Vec::with_capacity(trace.records.len());
    let mut f_out = Vec::with_capacity(trace.records.len());
    for r in &trace.records {
        let p_e = (r.p_draw - draw0) * scale;
        sp.step(p_e, trace.dt);
        t_out.push(r.t);
        f_out.push(sp.freq_hz());
    }
    Ok(FreqTrace {
        label: trace.scenario.controller.name().to_string(),
        t: t_out,
        f_hz: f_out,
    })
}

/// Run the three controllers through one fault scenario and map each trace
/// onto the same proxy. The scenarios differ only in the controller.
pub fn fault_aggregation_suite(
    base: &Scenario,
    proxy: &SwingProxy,
) -> Result<Vec<(Trace, FreqTrace)>, SimError> {
    let mut out = Vec::new();
    for kind in [
        ControllerKind::GflMc,
        ControllerKind::GflPll,
        ControllerKind::Proposed,
    ] {
        let mut sc = base.clone();
        sc.controller = kind;
        let tr = run_scenario(&sc)?;
        let f = run_fault_aggregation(&tr, proxy)?;
        out.push((tr, f));
    }
    Ok(out)
}

/// Closed-loop no-fault frequency event: a generation-loss step on the bulk
/// system with the facility's Mode 3 droop/FFR consuming the proxy frequency
/// and modulating its grid-draw target. Returns (facility trace, frequency).
///
/// The facility starts at its steady full-draw operating point; the proxy is
/// balanced there, so only draw deviations and the disturbance move it.
pub fn run_ffr_event(
    base: &Scenario,
    disturbance_pu_sys: f64,
    t_event: f64,
    mode3: bool,
) -> Result<(Trace, FreqTrace), SimError> {
    let mut sc = base.clone();
    sc.dip_start = 0.0;
    sc.dip_end = 0.0;
    sc.mode3_enabled = mode3;
    sc.controller = ControllerKind::Proposed;
    sc.initial_ref = sc.load_level;
    sc.validate()?;

    let mut proxy = SwingProxy::from_scenario(&sc);
    proxy.p_m = 0.0;
    let scale = proxy.facility_to_sys();
    let dt = sc.dt;

    use std::cell::RefCell;
    struct CoSim {
        sp: SwingProxy,
        draw0: Option<f64>,
        t: Vec<f64>,
        f_hz: Vec<f64>,
    }
    let cell = RefCell::new(CoSim {
        sp: proxy,
        draw0: None,
        t: Vec::new(),
        f_hz: Vec::new(),
    });

    let trace = run_scenario_with_freq(&sc, |t, p_draw| {
        let mut cs = cell.borrow_mut();
        let draw0 = *cs.draw0.get_or_insert(p_draw);
        let gen_loss = if t >= t_event { disturbance_pu_sys } else { 0.0 };
        let p_e = gen_loss + (p_draw - draw0) * scale;
        let x = cs.sp.step(p_e, dt);
        let f = cs.sp.freq_hz();
        cs.t.push(t);
        cs.f_hz.push(f);
        Some(x)
    })?;

    let cs = cell.into_inner();
    Ok((
        trace,
        FreqTrace {
            label: if mode3 { "mode3-on".into() } else { "mode3-off".into() },
            t: cs.t,
            f_hz: cs.f_hz,
        },
    ))
}

/// Peak |f - f0| per controller over an (N, H) grid.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub n_blocks: f64,
    pub h: f64,
    pub controller: String,
    pub peak_f_hz: f64,
    pub peak_dev_hz: f64,
}

pub fn nh_sweep(
    base: &Scenario,
    n_set: &[f64],
    h_set: &[f64],
) -> Result<Vec<SweepCell>, SimError> {
    if n_set.is_empty() || h_set.is_empty() {
        return Err(SimError::Scenario("empty N or H set".into()));
    }
    // One fault trace per controller, reused across all cells.
    let mut traces = Vec::new();
    for kind in [
        ControllerKind::GflMc,
        ControllerKind::GflPll,
        ControllerKind::Proposed,
    ] {
        let mut sc = base.clone();
        sc.controller = kind;
        traces.push(run_scenario(&sc)?);
    }
    let mut cells = Vec::new();
    for &n in n_set {
        for &h in h_set {
            for tr in &traces {
                let mut proxy = SwingProxy::from_scenario(base);
                proxy.n_blocks = n;
                proxy.h = h;
                let f = run_fault_aggregation(tr, &proxy)?;
                let peak_dev = f.peak_deviation(base.f0_hz);
                let peak_f = if (f.max_f() - base.f0_hz).abs() >= (f.min_f() - base.f0_hz).abs() {
                    f.max_f()
                } else {
                    f.min_f()
                };
                cells.push(SweepCell {
                    n_blocks: n,
                    h,
                    controller: tr.scenario.controller.name().to_string(),
                    peak_f_hz: peak_f,
                    peak_dev_hz: peak_dev,
                });
            }
        }
    }
    Ok(cells)
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("n_blocks,h,controller,peak_f_hz,peak_dev_hz\n");
    for c in cells {
        use std::fmt::Write;
        let _ = writeln!(
            out,
            "{},{},{},{:.9e},{:.9e}",
            c.n_blocks, c.h, c.controller, c.peak_f_hz, c.peak_dev_hz
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proxy() -> SwingProxy {
        SwingProxy {
            h: 3.0,
            d: 1.0,
            s_sys_mw: 30_000.0,
            n_blocks: 40.0,
            p_nom_mw: 50.0,
            f0_hz: 60.0,
            p_m: 0.0,
            x: 0.0,
        }
    }

    #[test]
    fn equilibrium_is_preserved_exactly() {
        let mut sp = proxy();
        sp.p_m = 0.3;
        for _ in 0..10_000 {
            sp.step(0.3, 1e-3);
        }
        assert_eq!(sp.x, 0.0);
    }

    #[test]
    fn undamped_slope_matches_closed_form() {
        let mut sp = proxy();
        sp.d = 0.0;
        let dp = 0.05;
        let dt = 1e-5;
        let steps = 10_000; // 0.1 s
        for _ in 0..steps {
            sp.step(-dp, dt); // P_e below P_m
        }
        let expect = dp * (steps as f64 * dt) / (2.0 * sp.h);
        assert!((sp.x - expect).abs() < 1e-9);
    }

    #[test]
    fn damped_step_converges_to_dp_over_d() {
        let mut sp = proxy();
        sp.d = 2.0;
        let dp = 0.04;
        let dt = 1e-4;
        // several time constants 2H/D = 3 s
        for _ in 0..200_000 {
            sp.step(-dp, dt);
        }
        assert!((sp.x - dp / sp.d).abs() < 1e-4);
        // exponential with tau = 2H/D: check the 1-tau point analytically
        let mut sp2 = proxy();
        sp2.d = 2.0;
        let tau = 2.0 * sp2.h / sp2.d;
        let steps = (tau / dt) as usize;
        for _ in 0..steps {
            sp2.step(-dp, dt);
        }
        let expect = (dp / sp2.d) * (1.0 - (-1.0f64).exp());
        assert!((sp2.x - expect).abs() < 2e-4);
    }

    #[test]
    fn zero_blocks_means_nominal_frequency() {
        let sc = Scenario {
            duration: 0.3,
            dip_start: 0.05,
            dip_end: 0.2,
            ..Scenario::default()
        };
        let tr = run_scenario(&sc).unwrap();
        let mut sp = proxy();
        sp.n_blocks = 0.0;
        let f = run_fault_aggregation(&tr, &sp).unwrap();
        for v in f.f_hz {
            assert_eq!(v, 60.0);
        }
    }

    #[test]
    fn linearity_in_n_for_small_deviations() {
        let sc = Scenario {
            duration: 0.8,
            ..Scenario::default()
        };
        let tr = run_scenario(&sc).unwrap();
        let mut sp1 = proxy();
        sp1.d = 0.0;
        sp1.n_blocks = 10.0;
        let mut sp2 = proxy();
        sp2.d = 0.0;
        sp2.n_blocks = 20.0;
        let f1 = run_fault_aggregation(&tr, &sp1).unwrap().peak_deviation(60.0);
        let f2 = run_fault_aggregation(&tr, &sp2).unwrap().peak_deviation(60.0);
        assert!((f2 / f1 - 2.0).abs() < 1e-6);
    }

    #[test]
    fn n_over_h_scaling_when_undamped() {
        let sc = Scenario {
            duration: 0.8,
            ..Scenario::default()
        };
        let tr = run_scenario(&sc).unwrap();
        let mut a = proxy();
        a.d = 0.0;
        a.n_blocks = 20.0;
        a.h = 5.0;
        let mut b = proxy();
        b.d = 0.0;
        b.n_blocks = 40.0;
        b.h = 10.0;
        let fa = run_fault_aggregation(&tr, &a).unwrap().peak_deviation(60.0);
        let fb = run_fault_aggregation(&tr, &b).unwrap().peak_deviation(60.0);
        assert!((fa - fb).abs() < 1e-9);
    }
}
