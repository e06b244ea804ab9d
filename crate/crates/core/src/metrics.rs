//! Fault-window metric extraction and table rendering.

use crate::error::SimError;
use crate::sim::Trace;

/// The comparative fault-response metrics, one struct per scenario row.
#[derive(Debug, Clone)]
pub struct FaultMetrics {
    /// Raw minimum PCC voltage over the dip window (p.u.).
    pub min_vpcc: f64,
    /// Minimum excluding the first fundamental cycle after inception (p.u.).
    pub settled_min_vpcc: f64,
    /// Maximum realized current magnitude over the dip window (p.u.).
    pub max_i: f64,
    /// Mean grid draw over the dip window (p.u.).
    pub mean_p_draw: f64,
    /// Minimum DC-link proxy voltage over the dip window (p.u.).
    pub min_v_dc: f64,
    /// Undelivered IT energy over the whole trace (MWh on `s_base`).
    pub unserved_mwh: f64,
    /// Maximum rise rate of the shaped draw reference over the whole trace
    /// (p.u./s); the soft-return ramp limit binds here.
    pub max_ref_rate: f64,
    /// Peak BESS power magnitude over the dip window (p.u.).
    pub max_p_bess: f64,
    pub any_cessation: bool,
    pub any_voltage_floor: bool,
    pub any_infeasible_min_draw: bool,
    pub any_bus_collapse: bool,
}

/// Extract the fault-window metrics of one trace.
///
/// The settled minimum excludes exactly one fundamental period (1/60 s by
/// default scenario frequency) after window start. Unserved energy integrates
/// the shortfall of delivered power min(P_load, P_draw + P_bess), evaluated at
/// the commitment level recorded in the trace, over the full trace.
pub fn fault_window_metrics(
    trace: &Trace,
    window: (f64, f64),
    s_base_mw: f64,
) -> Result<FaultMetrics, SimError> {
    let (start, end) = window;
    if trace.records.is_empty() {
        return Err(SimError::Metrics("empty trace".into()));
    }
    if start >= end {
        return Err(SimError::Metrics(format!(
            "empty metrics window [{start}, {end}]"
        )));
    }
    let t_last = trace.records.last().unwrap().t;
    if end > t_last + trace.dt {
        return Err(SimError::Metrics(format!(
            "window end {end} beyond trace end {t_last}"
        )));
    }

    let one_cycle = 1.0 / trace.scenario.f0_hz;
    let settled_start = start + one_cycle;

    let mut min_vpcc = f64::INFINITY;
    let mut settled_min_vpcc = f64::INFINITY;
    let mut max_i: f64 = 0.0;
    let mut max_p_bess: f64 = 0.0;
    let mut min_v_dc = f64::INFINITY;
    let mut draw_sum = 0.0;
    let mut draw_n = 0usize;
    let mut unserved = 0.0;
    let mut max_ref_rate: f64 = 0.0;
    let mut prev_ref: Option<f64> = None;
    let mut any_cessation = false;
    let mut any_voltage_floor = false;
    let mut any_infeasible = false;
    let mut any_collapse = false;

    for r in &trace.records {
        unserved += (r.p_load - r.p_served).max(0.0) * trace.dt;
        if let Some(p) = prev_ref {
            max_ref_rate = max_ref_rate.max((r.p_draw_ref - p) / trace.dt);
        }
        prev_ref = Some(r.p_draw_ref);
        any_cessation |= r.cessation;
        any_voltage_floor |= r.voltage_floor;
        any_infeasible |= r.infeasible_min_draw;
        any_collapse |= r.bus_collapse;

        if r.t >= start && r.t < end {
            min_vpcc = min_vpcc.min(r.v_pcc_mag);
            if r.t >= settled_start {
                settled_min_vpcc = settled_min_vpcc.min(r.v_pcc_mag);
            }
            max_i = max_i.max(r.i_mag);
            max_p_bess = max_p_bess.max(r.p_bess.abs());
            min_v_dc = min_v_dc.min(r.v_dc);
            draw_sum += r.p_draw;
            draw_n += 1;
        }
    }

    if draw_n == 0 {
        return Err(SimError::Metrics(format!(
            "no samples inside window [{start}, {end}]"
        )));
    }
    if settled_min_vpcc.is_infinite() {
        settled_min_vpcc = min_vpcc;
    }

    Ok(FaultMetrics {
        min_vpcc,
        settled_min_vpcc,
        max_i,
        mean_p_draw: draw_sum / draw_n as f64,
        min_v_dc,
        unserved_mwh: unserved * s_base_mw / 3600.0,
        max_ref_rate,
        max_p_bess,
        any_cessation,
        any_voltage_floor,
        any_infeasible_min_draw: any_infeasible,
        any_bus_collapse: any_collapse,
    })
}

/// Metrics for a trace using its own scenario's dip window and base.
pub fn metrics_for(trace: &Trace) -> Result<FaultMetrics, SimError> {
    let sc = &trace.scenario;
    fault_window_metrics(trace, (sc.dip_start, sc.dip_end), sc.s_base_mw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Text,
    Csv,
}

/// Render named metric rows in the comparative-table column order:
/// min|V_pcc|, max|I|, mean P_draw, min V_dc, unserved, then the settled
/// minimum and the reference rise rate.
pub fn render_table(rows: &[(String, FaultMetrics)], format: TableFormat) -> Result<String, SimError> {
    if rows.is_empty() {
        return Err(SimError::Metrics("no rows to render".into()));
    }
    let headers = [
        "case",
        "min_vpcc",
        "max_i",
        "mean_p_draw",
        "min_v_dc",
        "unserved_mwh",
        "settled_min_vpcc",
        "max_ref_rate",
        "flags",
    ];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, m)| {
            let mut flags = Vec::new();
            if m.any_cessation {
                flags.push("cessation");
            }
            if m.any_voltage_floor {
                flags.push("vfloor");
            }
            if m.any_infeasible_min_draw {
                flags.push("infeasible");
            }
            if m.any_bus_collapse {
                flags.push("collapse");
            }
            vec![
                name.clone(),
                format!("{:.3}", m.min_vpcc),
                format!("{:.3}", m.max_i),
                format!("{:.3}", m.mean_p_draw),
                format!("{:.3}", m.min_v_dc),
                format!("{:.5}", m.unserved_mwh),
                format!("{:.3}", m.settled_min_vpcc),
                format!("{:.3}", m.max_ref_rate),
                if flags.is_empty() {
                    "-".to_string()
                } else {
                    flags.join("+")
                },
            ]
        })
        .collect();

    match format {
        TableFormat::Csv => {
            let mut out = headers.join(",");
            out.push('\n');
            for row in &cells {
                out.push_str(&row.join(","));
                out.push('\n');
            }
            Ok(out)
        }
        TableFormat::Text => {
            let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
            for row in &cells {
                for (w, c) in widths.iter_mut().zip(row) {
                    *w = (*w).max(c.len());
                }
            }
            let mut out = String::new();
            for (w, h) in widths.iter().zip(&headers) {
                out.push_str(&format!("{h:<w$}  "));
            }
            out.push('\n');
            for (w, _) in widths.iter().zip(&headers) {
                out.push_str(&"-".repeat(*w));
                out.push_str("  ");
            }
            out.push('\n');
            for row in &cells {
                for (w, c) in widths.iter().zip(row) {
                    out.push_str(&format!("{c:<w$}  "));
                }
                out.push('\n');
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;
    use crate::sim::{Trace, TraceRecord};

    /// Synthetic trace builder: constant channels except where overridden.
    fn synthetic(dt: f64, n: usize, f: impl Fn(usize, f64) -> TraceRecord) -> Trace {
        let records = (0..n).map(|k| f(k, k as f64 * dt)).collect();
        Trace {
            records,
            dt,
            scenario: Scenario::default(),
            diverged: None,
        }
    }

    fn base_record(t: f64) -> TraceRecord {
        TraceRecord {
            t,
            p_draw: 1.0,
            p_grid: -1.0,
            p_load: 1.0,
            p_bess: 0.0,
            soc: 0.9,
            v_pcc_mag: 1.0,
            v_pcc_d: 1.0,
            v_pcc_q: 0.0,
            i_d: -0.667,
            i_q: 0.0,
            i_mag: 0.667,
            v_dc: 1.0,
            p_draw_ref: 1.0,
            mode: 1,
            cessation: false,
            voltage_floor: false,
            infeasible_min_draw: false,
            bus_collapse: false,
            p_served: 1.0,
            p_bess_cmd: 0.0,
            i_ref_mag: 0.667,
            mode1_addend: 0.0,
            mode3_overlay: 0.0,
            in_fault: false,
        }
    }

    #[test]
    fn full_cessation_trace_reproduces_analytic_unserved() {
        // 1.0 s trace, full shed over [0.5, 0.65): unserved = 50*0.15/3600.
        let dt = 1e-4;
        let tr = synthetic(dt, 10_000, |_, t| {
            let mut r = base_record(t);
            if (0.5..0.65).contains(&t) {
                r.p_served = 0.0;
                r.p_draw = 0.0;
                r.v_pcc_mag = 0.5;
                r.cessation = true;
            }
            r
        });
        let m = fault_window_metrics(&tr, (0.5, 0.65), 50.0).unwrap();
        let analytic = 1.0 * 0.15 * 50.0 / 3600.0;
        assert!(
            (m.unserved_mwh - analytic).abs() <= 2.0 * dt * 50.0 / 3600.0,
            "got {} want {analytic}",
            m.unserved_mwh
        );
    }

    #[test]
    fn fully_served_trace_has_zero_unserved() {
        let tr = synthetic(1e-4, 10_000, |_, t| base_record(t));
        let m = fault_window_metrics(&tr, (0.5, 0.65), 50.0).unwrap();
        assert_eq!(m.unserved_mwh, 0.0);
        assert_eq!(m.min_vpcc, 1.0);
        assert_eq!(m.mean_p_draw, 1.0);
    }

    #[test]
    fn settled_min_excludes_exactly_one_cycle() {
        // Voltage dips hard only during the first cycle of the window.
        let tr = synthetic(1e-4, 10_000, |_, t| {
            let mut r = base_record(t);
            if (0.5..0.65).contains(&t) {
                r.v_pcc_mag = if t < 0.5 + 1.0 / 60.0 { 0.3 } else { 0.6 };
            }
            r
        });
        let m = fault_window_metrics(&tr, (0.5, 0.65), 50.0).unwrap();
        assert!((m.min_vpcc - 0.3).abs() < 1e-12);
        assert!((m.settled_min_vpcc - 0.6).abs() < 1e-12);
        assert!(m.settled_min_vpcc >= m.min_vpcc);
    }

    #[test]
    fn ref_rate_ignores_downward_steps() {
        // Reference drops fast at fault entry, then ramps up at 0.2 p.u./s.
        let dt = 1e-4;
        let tr = synthetic(dt, 10_000, |_, t| {
            let mut r = base_record(t);
            r.p_draw_ref = if t < 0.5 {
                1.0
            } else if t < 0.65 {
                0.2
            } else {
                (0.2 + 0.2 * (t - 0.65)).min(1.0)
            };
            r
        });
        let m = fault_window_metrics(&tr, (0.5, 0.65), 50.0).unwrap();
        assert!((m.max_ref_rate - 0.2).abs() < 1e-6);
    }

    #[test]
    fn empty_window_is_an_error() {
        let tr = synthetic(1e-4, 100, |_, t| base_record(t));
        assert!(fault_window_metrics(&tr, (0.5, 0.5), 50.0).is_err());
        assert!(fault_window_metrics(&tr, (5.0, 6.0), 50.0).is_err());
    }

    #[test]
    fn render_both_formats() {
        let tr = synthetic(1e-4, 10_000, |_, t| base_record(t));
        let m = fault_window_metrics(&tr, (0.5, 0.65), 50.0).unwrap();
        let rows = vec![
            ("baseline".to_string(), m.clone()),
            ("variant".to_string(), m),
        ];
        let txt = render_table(&rows, TableFormat::Text).unwrap();
        assert!(txt.contains("baseline"));
        assert!(txt.contains("min_vpcc"));
        let csv = render_table(&rows, TableFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(render_table(&[], TableFormat::Text).is_err());
    }
}
