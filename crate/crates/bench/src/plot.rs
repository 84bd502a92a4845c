//! Self-contained SVG line plots of relative error on a log scale.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::trace::{read_summary, read_trace, SummaryRow, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    ErrVsIter,
    ErrVsTime,
    ErrVsEta,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::ErrVsIter => "err_vs_iter",
            PlotKind::ErrVsTime => "err_vs_time",
            PlotKind::ErrVsEta => "err_vs_eta",
        }
    }

    fn x_label(self) -> &'static str {
        match self {
            PlotKind::ErrVsIter => "iteration",
            PlotKind::ErrVsTime => "wall time (s)",
            PlotKind::ErrVsEta => "step size",
        }
    }

    /// Whether the inputs are per-cell traces (otherwise a summary).
    pub fn reads_traces(self) -> bool {
        self != PlotKind::ErrVsEta
    }
}

impl std::str::FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [PlotKind::ErrVsIter, PlotKind::ErrVsTime, PlotKind::ErrVsEta]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown plot kind `{s}` (expected err_vs_iter, err_vs_time, or err_vs_eta)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub method: String,
    pub kappa: f64,
    pub points: Vec<(f64, f64)>,
}

/// Noise level encoded in a run id as `-snr{value}`.
fn snr_of(run_id: &str) -> Option<String> {
    let rest = &run_id[run_id.find("-snr")? + 4..];
    let end = rest.char_indices().skip(1).find(|&(_, c)| c == '-').map_or(rest.len(), |(i, _)| i);
    Some(rest[..end].to_string())
}

/// Identity of a curve: method and kappa, plus whatever else varies.
#[derive(Debug, Clone, PartialEq, PartialOrd)]
struct CurveKey {
    method: String,
    kappa: f64,
    transform: String,
    eta: Option<f64>,
    seed: u64,
    snr: Option<String>,
}

fn legend(keys: &[CurveKey]) -> Vec<String> {
    let varies = |f: &dyn Fn(&CurveKey) -> String| keys.iter().any(|k| f(k) != f(&keys[0]));
    let transform = varies(&|k| k.transform.clone());
    let eta = varies(&|k| format!("{:?}", k.eta));
    let seed = varies(&|k| k.seed.to_string());
    let snr = varies(&|k| format!("{:?}", k.snr));
    keys.iter()
        .map(|k| {
            let mut s = format!("{}, kappa={}", k.method, k.kappa);
            if transform {
                write!(s, ", {}", k.transform).unwrap();
            }
            if let (true, Some(e)) = (eta, k.eta) {
                write!(s, ", eta={e}").unwrap();
            }
            if seed {
                write!(s, ", seed={}", k.seed).unwrap();
            }
            if let (true, Some(v)) = (snr, &k.snr) {
                write!(s, ", snr={v}dB").unwrap();
            }
            s
        })
        .collect()
}

fn into_series(mut groups: Vec<(CurveKey, Vec<(f64, f64)>)>) -> Vec<Series> {
    groups.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let keys: Vec<CurveKey> = groups.iter().map(|g| g.0.clone()).collect();
    legend(&keys)
        .into_iter()
        .zip(groups)
        .map(|(label, (key, points))| Series { label, method: key.method, kappa: key.kappa, points })
        .collect()
}

/// One curve per trace.
pub fn series_from_traces(traces: &[Vec<TraceRow>], kind: PlotKind) -> Result<Vec<Series>> {
    let mut groups = Vec::new();
    for rows in traces.iter().filter(|r| !r.is_empty()) {
        let r0 = &rows[0];
        let key = CurveKey {
            method: r0.method.clone(),
            kappa: r0.kappa,
            transform: r0.transform.clone(),
            eta: Some(r0.eta),
            seed: r0.seed,
            snr: snr_of(&r0.run_id),
        };
        let points: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (if kind == PlotKind::ErrVsTime { r.wall_time_s } else { r.iter as f64 }, r.rel_err))
            .collect();
        groups.push((key, points));
    }
    if kind == PlotKind::ErrVsTime && groups.iter().all(|(_, p)| p.iter().all(|&(x, _)| x == 0.0)) {
        return Err(Error::EmptyTraceSet("traces carry no wall times (recorded with --no-timing)".into()));
    }
    Ok(into_series(groups))
}

/// One curve per (method, kappa, ...) with final error against the step size.
pub fn series_from_summary(rows: &[SummaryRow]) -> Vec<Series> {
    let mut groups: BTreeMap<String, (CurveKey, Vec<(f64, f64)>)> = BTreeMap::new();
    for r in rows {
        let key = CurveKey {
            method: r.method.clone(),
            kappa: r.kappa,
            transform: r.transform.clone(),
            eta: None,
            seed: r.seed,
            snr: r.snr_db.map(|s| s.to_string()),
        };
        let id = format!("{key:?}");
        let entry = groups.entry(id).or_insert_with(|| (key, Vec::new()));
        entry.1.push((r.eta, r.final_rel_err.unwrap_or(f64::NAN)));
    }
    let mut groups: Vec<_> = groups.into_values().collect();
    for g in &mut groups {
        g.1.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    into_series(groups)
}

const W: f64 = 820.0;
const H: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 560.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 440.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
const DASHES: [&str; 4] = ["", "7,4", "2,3", "9,3,2,3"];

fn nice_step(range: f64) -> f64 {
    let raw = range / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0].into_iter().map(|m| m * mag).find(|&s| s >= raw).unwrap_or(10.0 * mag)
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.6}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// Renders the curves; points with non-positive or non-finite error are
/// dropped because of the log axis.
pub fn render_svg(series: &[Series], kind: PlotKind, title: &str) -> Result<String> {
    let visible: Vec<(usize, Vec<(f64, f64)>)> = series
        .iter()
        .enumerate()
        .map(|(i, s)| {
            (i, s.points.iter().copied().filter(|&(x, y)| x.is_finite() && y.is_finite() && y > 0.0).collect())
        })
        .filter(|(_, p): &(usize, Vec<_>)| !p.is_empty())
        .collect();
    if visible.is_empty() {
        return Err(Error::EmptyTraceSet("no finite positive errors to plot".into()));
    }
    let all = || visible.iter().flat_map(|(_, p)| p.iter().copied());
    let (mut x0, mut x1) = all().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (x, _)| (a.min(x), b.max(x)));
    let (ylo, yhi) = all().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, y)| (a.min(y), b.max(y)));
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let d0 = ylo.log10().floor() as i32;
    let mut d1 = yhi.log10().ceil() as i32;
    if d1 <= d0 {
        d1 = d0 + 1;
    }
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (RIGHT - LEFT);
    let py = |y: f64| BOTTOM - (y.log10() - d0 as f64) / (d1 - d0) as f64 * (BOTTOM - TOP);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#, (LEFT + RIGHT) / 2.0, escape(title))
        .unwrap();

    let decade_step = ((d1 - d0) as f64 / 10.0).ceil().max(1.0) as i32;
    let mut d = d0;
    while d <= d1 {
        let y = BOTTOM - (d - d0) as f64 / (d1 - d0) as f64 * (BOTTOM - TOP);
        writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{RIGHT}" y2="{y:.2}" stroke="#dddddd"/>"##).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#, LEFT - 6.0, y + 4.0).unwrap();
        d += decade_step;
    }
    let step = nice_step(x1 - x0);
    let mut t = (x0 / step).ceil() * step;
    while t <= x1 + step * 1e-9 {
        let x = px(t);
        writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{BOTTOM}" stroke="#eeeeee"/>"##).unwrap();
        writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, BOTTOM + 16.0, tick_label(t)).unwrap();
        t += step;
    }
    writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        RIGHT - LEFT,
        BOTTOM - TOP
    )
    .unwrap();
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (LEFT + RIGHT) / 2.0, BOTTOM + 36.0, kind.x_label())
        .unwrap();
    writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">relative error</text>"#,
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0
    )
    .unwrap();

    let mut kappas: Vec<f64> = series.iter().map(|s| s.kappa).collect();
    kappas.sort_by(f64::total_cmp);
    kappas.dedup();
    let mut methods: Vec<&str> = series.iter().map(|s| s.method.as_str()).collect();
    methods.sort();
    methods.dedup();
    for (row, (i, pts)) in visible.iter().enumerate() {
        let ser = &series[*i];
        let color = COLORS[kappas.iter().position(|&k| k == ser.kappa).unwrap_or(0) % COLORS.len()];
        let dash = DASHES[methods.iter().position(|&m| m == ser.method).unwrap_or(0) % DASHES.len()];
        let dash_attr = if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash_attr} points="{}"/>"#,
            coords.join(" ")
        )
        .unwrap();
        let ly = TOP + 10.0 + 18.0 * row as f64;
        writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.5"{dash_attr}/>"#,
            RIGHT + 15.0,
            RIGHT + 45.0
        )
        .unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, RIGHT + 52.0, ly + 4.0, escape(&ser.label)).unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Reads the inputs for `kind` and renders them.
pub fn emit_plot(inputs: &[&Path], kind: PlotKind, title: &str) -> Result<String> {
    if inputs.is_empty() {
        return Err(Error::EmptyTraceSet("no input files".into()));
    }
    let series = if kind.reads_traces() {
        let traces = inputs.iter().map(|p| read_trace(p)).collect::<Result<Vec<_>>>()?;
        series_from_traces(&traces, kind)?
    } else {
        let mut rows = Vec::new();
        for p in inputs {
            rows.extend(read_summary(p)?);
        }
        series_from_summary(&rows)
    };
    render_svg(&series, kind, title)
}
