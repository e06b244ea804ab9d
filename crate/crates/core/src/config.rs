//! Flat INI-style scenario configuration and the batch study suites that
//! reproduce the comparative, stress, ablation, sweep, frequency and EMT
//! studies.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::SimError;
use crate::metrics::{metrics_for, render_table, FaultMetrics, TableFormat};
use crate::scenario::{get_key, ControllerKind, Scenario, PARAMETERS};
use crate::sim::{run_scenario, Trace};

/// Parse a flat INI document (`[section]` headers, `key = value` lines,
/// `#`/`;` comments) into a scenario on top of the defaults.
pub fn parse_config(text: &str) -> Result<Scenario, SimError> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(SimError::ConfigParse {
                    line: lineno + 1,
                    message: format!("unterminated section header `{line}`"),
                });
            }
            // sections are organizational; keys are globally unique
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(SimError::ConfigParse {
                line: lineno + 1,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    let sc = Scenario::default();
    sc.apply_overrides(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
}

/// Serialize every registry key grouped by section; `parse_config` of the
/// result reproduces the scenario exactly.
pub fn serialize_config(sc: &Scenario) -> String {
    let mut by_section: BTreeMap<&str, Vec<(&str, String)>> = BTreeMap::new();
    for p in PARAMETERS {
        let v = get_key(sc, p.key).expect("registered key");
        by_section.entry(p.section).or_default().push((p.key, v));
    }
    let mut out = String::new();
    for (section, entries) in by_section {
        out.push_str(&format!("[{section}]\n"));
        for (k, v) in entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out.push('\n');
    }
    out
}

/// Dump the parameter registry as aligned text.
pub fn registry_listing() -> String {
    let width = PARAMETERS.iter().map(|p| p.key.len()).max().unwrap_or(0);
    let mut out = String::new();
    let mut section = "";
    for p in PARAMETERS {
        if p.section != section {
            section = p.section;
            out.push_str(&format!("[{section}]\n"));
        }
        out.push_str(&format!("  {:<width$}  {}\n", p.key, p.doc));
    }
    out
}

/// The study catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyId {
    Table1,
    Stress,
    Ablation,
    Sweeps,
    Mode1Shaping,
    Mode1StiffBus,
    FreqProxy,
    NhSweep,
    EmtCompare,
}

impl StudyId {
    pub const ALL: [StudyId; 9] = [
        StudyId::Table1,
        StudyId::Stress,
        StudyId::Ablation,
        StudyId::Sweeps,
        StudyId::Mode1Shaping,
        StudyId::Mode1StiffBus,
        StudyId::FreqProxy,
        StudyId::NhSweep,
        StudyId::EmtCompare,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StudyId::Table1 => "table1",
            StudyId::Stress => "stress",
            StudyId::Ablation => "ablation",
            StudyId::Sweeps => "sweeps",
            StudyId::Mode1Shaping => "mode1-shaping",
            StudyId::Mode1StiffBus => "mode1-stiffbus",
            StudyId::FreqProxy => "freq-proxy",
            StudyId::NhSweep => "nh-sweep",
            StudyId::EmtCompare => "emt-compare",
        }
    }

    pub fn parse(s: &str) -> Result<Self, SimError> {
        Self::ALL
            .iter()
            .copied()
            .find(|id| id.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                SimError::Scenario(format!(
                    "unknown study `{s}`; available: {}",
                    Self::ALL.map(|i| i.name()).join(", ")
                ))
            })
    }
}

/// One suite row: a label and the overrides that define it.
#[derive(Debug, Clone)]
pub struct SuiteRow {
    pub label: String,
    pub overrides: Vec<(String, String)>,
}

fn row(label: &str, overrides: &[(&str, &str)]) -> SuiteRow {
    SuiteRow {
        label: label.to_string(),
        overrides: overrides
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
    }
}

/// Rows of the scenario-table studies (the non-scenario studies build their
/// own runs).
pub fn study_rows(id: StudyId) -> Vec<SuiteRow> {
    match id {
        StudyId::Table1 => vec![
            row("gfl-mc", &[("controller", "gfl-mc")]),
            row("gfl-pll", &[("controller", "gfl-pll")]),
            row("proposed", &[("controller", "proposed")]),
        ],
        StudyId::Stress => vec![
            row("baseline", &[]),
            row("low-dc-energy", &[("t_dc", "0.1")]),
            row("detection-delay", &[("t_det", "0.010")]),
            row("slow-bess", &[("tau_bess", "0.10")]),
            row("low-bess-power", &[("p_dis_max", "0.3")]),
            row("low-bess-ramp", &[("r_bess", "1.0")]),
            row("no-bess", &[("p_dis_max", "0.0")]),
        ],
        StudyId::Ablation => vec![
            row("baseline", &[]),
            row("no-q-support", &[("kv", "0.0")]),
            row("no-min-draw", &[("p_fault_min", "0.0")]),
            row("no-soft-return", &[("r_limit", "1e9")]),
            row("no-bess", &[("p_dis_max", "0.0")]),
        ],
        StudyId::Sweeps => vec![
            row("scr-1.2", &[("scr", "1.2")]),
            row("scr-1.5", &[("scr", "1.5")]),
            row("scr-2.0", &[("scr", "2.0")]),
            row("scr-3.0", &[("scr", "3.0")]),
            row("vdip-0.4", &[("v_dip", "0.4")]),
            row("vdip-0.5", &[("v_dip", "0.5")]),
            row("vdip-0.7", &[("v_dip", "0.7")]),
        ],
        _ => Vec::new(),
    }
}

/// Scenario used by the pulsed-load normal-operation studies.
pub fn pulsed_scenario() -> Scenario {
    let mut sc = Scenario::default();
    sc.duration = 6.0;
    sc.dip_start = 0.0;
    sc.dip_end = 0.0;
    sc.load_kind = crate::scenario::LoadKind::Pulsed;
    sc.load_level = 1.0;
    sc.pulse_amplitude = 0.25;
    sc.pulse_freq_hz = 1.0;
    sc.pulse_start = 1.0;
    sc.pulse_end = 5.0;
    sc.initial_ref = 1.0;
    sc
}

/// Scenario for the load-pickup shaping demonstration (step profile through
/// the rate-limited shaping filter).
pub fn pickup_scenario() -> Scenario {
    let mut sc = Scenario::default();
    sc.duration = 6.0;
    sc.dip_start = 0.0;
    sc.dip_end = 0.0;
    sc.load_kind = crate::scenario::LoadKind::Step;
    sc.load_step_time = 0.1;
    sc.initial_ref = 0.0;
    sc
}

/// Scenario whose traces feed the frequency-aggregation studies: the same
/// fault case observed from the start of the load pickup so the facility's
/// own ramp is part of the mapped disturbance.
pub fn aggregation_scenario() -> Scenario {
    let mut sc = Scenario::default();
    sc.initial_ref = 0.02;
    sc
}

/// EMT comparison scenario: settled full-load operating point, dip late in
/// the window.
pub fn emt_scenario() -> Scenario {
    let mut sc = Scenario::default();
    sc.duration = 8.0;
    sc.dip_start = 6.0;
    sc.dip_end = 6.15;
    sc.initial_ref = 1.0;
    sc
}

/// Outcome of one suite row.
pub struct RowResult {
    pub label: String,
    pub trace: Trace,
    pub metrics: FaultMetrics,
}

/// Run the scenario-table rows of a study against a base scenario.
pub fn run_rows(base: &Scenario, rows: &[SuiteRow]) -> Result<Vec<RowResult>, SimError> {
    let mut out = Vec::new();
    for r in rows {
        let sc = base.apply_overrides(r.overrides.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        let trace = run_scenario(&sc)?;
        let metrics = metrics_for(&trace)?;
        out.push(RowResult {
            label: r.label.clone(),
            trace,
            metrics,
        });
    }
    Ok(out)
}

fn write(path: &Path, contents: &str) -> Result<(), SimError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Run one study end to end, writing per-row traces, the metrics table and
/// plot-ready channel CSVs under `out_dir/<study>/`. Returns a short report.
pub fn run_suite(id: StudyId, out_dir: &Path, jobs: usize) -> Result<String, SimError> {
    let root: PathBuf = out_dir.join(id.name());
    let mut report = String::new();

    match id {
        StudyId::Table1 | StudyId::Stress | StudyId::Ablation | StudyId::Sweeps => {
            let base = Scenario::default();
            let rows = study_rows(id);
            let results = run_rows_parallel(&base, &rows, jobs)?;
            let mut table_rows = Vec::new();
            for rr in &results {
                write(
                    &root.join(&rr.label).join("trace.csv"),
                    &rr.trace.to_csv(),
                )?;
                for ch in ["p_draw", "v_pcc_mag", "i_mag", "v_dc", "p_bess", "soc"] {
                    write(
                        &root.join(&rr.label).join(format!("{ch}.csv")),
                        &rr.trace.channel_csv(ch)?,
                    )?;
                }
                table_rows.push((rr.label.clone(), rr.metrics.clone()));
            }
            let txt = render_table(&table_rows, TableFormat::Text)?;
            write(&root.join("metrics.txt"), &txt)?;
            write(
                &root.join("metrics.csv"),
                &render_table(&table_rows, TableFormat::Csv)?,
            )?;
            report.push_str(&txt);
        }
        StudyId::Mode1Shaping => {
            // (a) step pickup, (b) 1 Hz pulsed filtering
            let pickup = run_scenario(&pickup_scenario())?;
            for ch in ["p_draw", "p_load", "p_bess", "p_draw_ref"] {
                write(&root.join("pickup").join(format!("{ch}.csv")), &pickup.channel_csv(ch)?)?;
            }
            let pulsed = run_scenario(&pulsed_scenario())?;
            for ch in ["p_draw", "p_load", "p_bess", "soc"] {
                write(&root.join("pulsed").join(format!("{ch}.csv")), &pulsed.channel_csv(ch)?)?;
            }
            let att = crate::config::pulse_attenuation_db(&pulsed)?;
            report.push_str(&format!(
                "1 Hz grid-draw attenuation: {att:.1} dB (shaping filter vs raw load)\n"
            ));
            write(&root.join("attenuation.txt"), &report)?;
        }
        StudyId::Mode1StiffBus => {
            let mut on = pulsed_scenario();
            on.v_dc0 = 0.85;
            on.mode1_enabled = true;
            let mut off = on.clone();
            off.mode1_enabled = false;
            let tr_on = run_scenario(&on)?;
            let tr_off = run_scenario(&off)?;
            for (name, tr) in [("mode1-on", &tr_on), ("mode1-off", &tr_off)] {
                for ch in ["v_dc", "p_bess", "soc"] {
                    write(&root.join(name).join(format!("{ch}.csv")), &tr.channel_csv(ch)?)?;
                }
            }
            let last_on = tr_on.records.last().unwrap().v_dc;
            let last_off = tr_off.records.last().unwrap().v_dc;
            report.push_str(&format!(
                "final V_dc: mode1-on {last_on:.4}, mode1-off {last_off:.4} (start 0.85)\n"
            ));
            write(&root.join("summary.txt"), &report)?;
        }
        StudyId::FreqProxy => {
            let base = aggregation_scenario();
            let proxy = crate::studies::SwingProxy::from_scenario(&base);
            let runs = crate::studies::fault_aggregation_suite(&base, &proxy)?;
            for (tr, f) in &runs {
                write(
                    &root.join("fault-aggregation").join(format!("{}.csv", f.label)),
                    &f.to_csv(),
                )?;
                report.push_str(&format!(
                    "fault aggregation {}: peak deviation {:.4} Hz\n",
                    f.label,
                    f.peak_deviation(tr.scenario.f0_hz)
                ));
            }
            let mut ev = Scenario::default();
            ev.duration = 8.0;
            let (_tr_on, f_on) = crate::studies::run_ffr_event(&ev, 0.0167, 1.0, true)?;
            let (_tr_off, f_off) = crate::studies::run_ffr_event(&ev, 0.0167, 1.0, false)?;
            write(&root.join("ffr-event").join("mode3-on.csv"), &f_on.to_csv())?;
            write(&root.join("ffr-event").join("mode3-off.csv"), &f_off.to_csv())?;
            report.push_str(&format!(
                "ffr event nadir: mode3-on {:.4} Hz, mode3-off {:.4} Hz\n",
                f_on.min_f(),
                f_off.min_f()
            ));
            write(&root.join("summary.txt"), &report)?;
        }
        StudyId::NhSweep => {
            let base = aggregation_scenario();
            let cells = crate::studies::nh_sweep(&base, &[10.0, 20.0, 40.0], &[3.0, 5.0, 7.0])?;
            let csv = crate::studies::sweep_csv(&cells);
            write(&root.join("sweep.csv"), &csv)?;
            report.push_str(&csv);
        }
        StudyId::EmtCompare => {
            let sc = emt_scenario();
            let avg = run_scenario(&sc)?;
            let emt = crate::emt::run_emt(&sc)?;
            write(&root.join("averaged.csv"), &avg.to_csv())?;
            write(&root.join("emt.csv"), &emt.to_csv())?;
            for (name, pick) in [
                ("p_draw", (|r| r.p_draw) as fn(&crate::sim::TraceRecord) -> f64),
                ("v_pcc_mag", |r| r.v_pcc_mag),
                ("i_mag", |r| r.i_mag),
            ] {
                write(
                    &root.join(format!("compare_{name}.csv")),
                    &crate::emt::comparison_csv(&avg, &emt, pick),
                )?;
            }
            let pre = crate::emt::channel_rms_diff(&emt, &avg, |r| r.p_draw, 5.0, 6.0);
            report.push_str(&format!("pre-fault P_draw RMS difference: {pre:.4} p.u.\n"));
            write(&root.join("summary.txt"), &report)?;
        }
    }
    Ok(report)
}

/// Run rows concurrently up to `jobs`; results return in row order.
pub fn run_rows_parallel(
    base: &Scenario,
    rows: &[SuiteRow],
    jobs: usize,
) -> Result<Vec<RowResult>, SimError> {
    let jobs = jobs.max(1);
    if jobs == 1 || rows.len() <= 1 {
        return run_rows(base, rows);
    }
    let mut results: Vec<Option<Result<RowResult, SimError>>> =
        (0..rows.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots = std::sync::Mutex::new(&mut results);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(rows.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if k >= rows.len() {
                    break;
                }
                let r = &rows[k];
                let res = base
                    .apply_overrides(r.overrides.iter().map(|(a, b)| (a.as_str(), b.as_str())))
                    .and_then(|sc| run_scenario(&sc))
                    .and_then(|trace| {
                        let metrics = metrics_for(&trace)?;
                        Ok(RowResult {
                            label: r.label.clone(),
                            trace,
                            metrics,
                        })
                    });
                slots.lock().unwrap()[k] = Some(res);
            });
        }
    });
    results
        .into_iter()
        .map(|r| r.expect("row executed"))
        .collect()
}

/// Single-bin Fourier attenuation of the pulse frequency in the grid draw
/// relative to the load, over the pulse window (integer periods).
pub fn pulse_attenuation_db(trace: &Trace) -> Result<f64, SimError> {
    let sc = &trace.scenario;
    let f = sc.pulse_freq_hz;
    let (t0, t1) = (sc.pulse_start, sc.pulse_end);
    let periods = ((t1 - t0) * f).floor();
    if periods < 1.0 {
        return Err(SimError::Metrics("pulse window shorter than one period".into()));
    }
    let t_end = t0 + periods / f;
    let mut load_re = 0.0;
    let mut load_im = 0.0;
    let mut draw_re = 0.0;
    let mut draw_im = 0.0;
    let mut n = 0usize;
    for r in trace.records.iter().filter(|r| r.t >= t0 && r.t < t_end) {
        let ph = 2.0 * std::f64::consts::PI * f * (r.t - t0);
        let (s, c) = ph.sin_cos();
        load_re += r.p_load * c;
        load_im += r.p_load * s;
        draw_re += r.p_draw * c;
        draw_im += r.p_draw * s;
        n += 1;
    }
    if n == 0 {
        return Err(SimError::Metrics("no samples in pulse window".into()));
    }
    let load_mag = load_re.hypot(load_im);
    let draw_mag = draw_re.hypot(draw_im);
    if load_mag <= 0.0 {
        return Err(SimError::Metrics("load has no component at pulse frequency".into()));
    }
    Ok(20.0 * (load_mag / draw_mag).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_is_the_baseline() {
        let sc = parse_config("controller = proposed\n").unwrap();
        assert_eq!(sc.controller, ControllerKind::Proposed);
        assert_eq!(sc.scr, 1.5);
        assert_eq!(sc.v_dip, 0.5);
        assert_eq!(sc.dip_start, 0.50);
        assert_eq!(sc.dip_end, 0.65);
        assert_eq!(sc.i_max, 1.0);
    }

    #[test]
    fn sections_and_comments_accepted() {
        let text = "# comment\n[grid]\nscr = 3.0\n; another\n[bess]\np_dis_max = 0.5\n";
        let sc = parse_config(text).unwrap();
        assert_eq!(sc.scr, 3.0);
        assert_eq!(sc.p_dis_max, 0.5);
    }

    #[test]
    fn parse_error_carries_line_number() {
        let err = parse_config("scr = 1.5\nnot a kv line\n").unwrap_err();
        match err {
            SimError::ConfigParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn range_error_on_bad_value() {
        assert!(parse_config("v_dip = 1.5\n").is_err());
    }

    #[test]
    fn serialize_parse_round_trip() {
        let mut sc = Scenario::default();
        sc.scr = 2.25;
        sc.controller = ControllerKind::GflPll;
        sc.t_det = 0.004;
        let text = serialize_config(&sc);
        let back = parse_config(&text).unwrap();
        assert_eq!(back, sc);
    }

    #[test]
    fn stress_rows_match_labels() {
        let rows = study_rows(StudyId::Stress);
        assert_eq!(rows.len(), 7);
        assert_eq!(rows[0].label, "baseline");
        assert_eq!(rows[6].label, "no-bess");
        assert_eq!(rows[6].overrides[0], ("p_dis_max".into(), "0.0".into()));
    }

    #[test]
    fn ablation_rows_match_labels() {
        let rows = study_rows(StudyId::Ablation);
        assert_eq!(rows.len(), 5);
        let labels: Vec<_> = rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(
            labels,
            ["baseline", "no-q-support", "no-min-draw", "no-soft-return", "no-bess"]
        );
    }

    #[test]
    fn registry_listing_contains_all_keys() {
        let listing = registry_listing();
        for p in PARAMETERS {
            assert!(listing.contains(p.key));
        }
    }

    #[test]
    fn study_id_parsing() {
        assert_eq!(StudyId::parse("table1").unwrap(), StudyId::Table1);
        assert_eq!(StudyId::parse("nh-sweep").unwrap(), StudyId::NhSweep);
        assert!(StudyId::parse("nope").is_err());
    }
}
