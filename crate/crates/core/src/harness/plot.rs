//! Static SVG line plots of P and Q against time.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::metrics::{step_windows, Channel};
use super::sim::{RunRecord, RunRow};
use crate::error::{Error, Result};

pub const MAX_POINTS: usize = 5000;
/// Zoomed view spans this long before and after the first step on the channel.
pub const ZOOM_BEFORE: f64 = 0.1;
pub const ZOOM_AFTER: f64 = 1.5;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Row stride keeping a trace at or under [`MAX_POINTS`].
pub fn stride(rows: usize) -> usize {
    rows.div_ceil(MAX_POINTS).max(1)
}

pub fn downsample(rows: &[RunRow]) -> impl Iterator<Item = &RunRow> {
    rows.iter().step_by(stride(rows.len()))
}

struct Trace {
    label: String,
    color: &'static str,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

/// Writes a full-run and a zoomed plot per channel, overlaying every record
/// and the reference of the first. Returns the files written.
pub fn emit_plots(records: &[RunRecord], channels: &[Channel], dir: &Path) -> Result<Vec<PathBuf>> {
    if channels.is_empty() {
        return Ok(Vec::new());
    }
    if records.is_empty() || records.iter().any(|r| r.rows.is_empty()) {
        return Err(Error::InvalidParams("plots need non-empty records".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for &ch in channels {
        let t_end = records[0].rows.last().map_or(0.0, |r| r.time);
        let zoom_at = step_windows(&records[0].rows, ch)
            .into_iter()
            .find(|w| w.magnitude() != 0.0)
            .or_else(|| step_windows(&records[0].rows, ch).into_iter().next())
            .map_or(0.0, |w| w.step_time);
        let views = [
            ("full", 0.0, t_end),
            ("zoom", (zoom_at - ZOOM_BEFORE).max(0.0), (zoom_at + ZOOM_AFTER).min(t_end)),
        ];
        for (view, t0, t1) in views {
            let traces = build_traces(records, ch, t0, t1);
            let title = format!("{} ({}) {}", ch.name(), ch.unit(), view);
            let y_range = (view == "zoom").then(|| zoom_range(&traces[0])).flatten();
            let svg = render(&title, &traces, t0, t1, y_range);
            let path = dir.join(format!("{}_{}.svg", ch.name().to_lowercase(), view));
            std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn build_traces(records: &[RunRecord], ch: Channel, t0: f64, t1: f64) -> Vec<Trace> {
    let slice = |rows: &[RunRow]| -> (usize, usize) {
        let a = rows.partition_point(|r| r.time < t0);
        let b = rows.partition_point(|r| r.time <= t1);
        (a, b.max(a))
    };
    let (a, b) = slice(&records[0].rows);
    let mut traces = vec![Trace {
        label: "reference".into(),
        color: "#555555",
        dashed: true,
        points: downsample(&records[0].rows[a..b])
            .map(|r| (r.time, ch.reference(r)))
            .collect(),
    }];
    for (i, rec) in records.iter().enumerate() {
        let (a, b) = slice(&rec.rows);
        traces.push(Trace {
            label: rec.label.clone(),
            color: PALETTE[i % PALETTE.len()],
            dashed: false,
            points: downsample(&rec.rows[a..b])
                .map(|r| (r.time, ch.output(r)))
                .collect(),
        });
    }
    traces
}

/// The reference span widened by its own size; traces leaving it are clipped.
fn zoom_range(reference: &Trace) -> Option<(f64, f64)> {
    let (lo, hi) = bounds(reference.points.iter().map(|p| p.1))?;
    let margin = (hi - lo).max(1.0) * 0.6;
    Some((lo - margin, hi + margin))
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    lo.is_finite().then_some((lo, hi))
}

/// Tick spacing of 1, 2 or 5 times a power of ten giving about `target` intervals.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, 5.0);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn render(title: &str, traces: &[Trace], t0: f64, t1: f64, y_range: Option<(f64, f64)>) -> String {
    let (mut y_lo, mut y_hi) = y_range
        .or_else(|| bounds(traces.iter().flat_map(|t| t.points.iter().map(|p| p.1))))
        .unwrap_or((0.0, 1.0));
    let pad = ((y_hi - y_lo) * 0.05).max(1e-9);
    y_lo -= pad;
    y_hi += pad;
    let t_span = if t1 > t0 { t1 - t0 } else { 1.0 };
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |t: f64| MARGIN_L + (t - t0) / t_span * plot_w;
    let sy = |v: f64| MARGIN_T + (y_hi - v.clamp(y_lo, y_hi)) / (y_hi - y_lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        MARGIN_L + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#000"/>"##
    );
    for t in ticks(t0, t0 + t_span) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{MARGIN_T}" x2="{x:.2}" y2="{}" stroke="#ddd"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"##,
            MARGIN_T + plot_h,
            MARGIN_T + plot_h + 18.0,
            tick(t)
        );
    }
    for v in ticks(y_lo, y_hi) {
        let y = sy(v);
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            MARGIN_L + plot_w,
            MARGIN_L - 6.0,
            y + 4.0,
            tick(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">time (s)</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 10.0
    );
    for (i, tr) in traces.iter().enumerate() {
        let pts: Vec<String> = tr
            .points
            .iter()
            .map(|&(t, v)| format!("{:.2},{:.2}", sx(t), sy(v)))
            .collect();
        let dash = if tr.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline data-label="{}" fill="none" stroke="{}" stroke-width="1.3"{dash} points="{}"/>"#,
            escape(&tr.label),
            tr.color,
            pts.join(" ")
        );
        let ly = MARGIN_T + 14.0 + 18.0 * i as f64;
        let lx = WIDTH - MARGIN_R + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
            lx + 22.0,
            tr.color,
            lx + 28.0,
            ly + 4.0,
            escape(&tr.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.1e}")
    } else {
        // Trim float noise such as 0.30000000000000004.
        format!("{}", (v * 1e6).round() / 1e6)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(n: usize) -> RunRecord {
        let rows = (0..n)
            .map(|k| {
                let time = k as f64 * 1e-3;
                let p_set = if time >= 1.0 { 100.0 } else { 0.0 };
                RunRow {
                    time,
                    e_cmd: 1.0,
                    omega_i: 1.0,
                    delta: 0.0,
                    p_out: p_set * 0.9,
                    q_out: 0.0,
                    p_set,
                    q_set: 0.0,
                    p_err: p_set * 0.1,
                    q_err: 0.0,
                }
            })
            .collect();
        RunRecord {
            label: "a<b".into(),
            dt: 1e-3,
            rows,
            decisions: Vec::new(),
            clamp_events: 0,
            all_divergent_events: 0,
            fault: None,
        }
    }

    fn polyline_point_counts(svg: &str) -> Vec<usize> {
        svg.lines()
            .filter(|l| l.starts_with("<polyline"))
            .map(|l| {
                let pts = l.split("points=\"").nth(1).unwrap();
                let pts = pts.split('"').next().unwrap();
                pts.split_whitespace().count()
            })
            .collect()
    }

    #[test]
    fn no_channels_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plots(&[record(10)], &[], dir.path()).unwrap();
        assert!(files.is_empty());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn full_and_zoom_per_channel() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plots(&[record(3000)], &Channel::BOTH, dir.path()).unwrap();
        let names: Vec<_> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["p_full.svg", "p_zoom.svg", "q_full.svg", "q_zoom.svg"]);
    }

    #[test]
    fn long_traces_are_downsampled_by_stride() {
        let n = 25_001;
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plots(&[record(n)], &[Channel::P], dir.path()).unwrap();
        let svg = std::fs::read_to_string(&files[0]).unwrap();
        let expected = n.div_ceil(stride(n));
        assert_eq!(stride(n), 6);
        assert_eq!(polyline_point_counts(&svg), vec![expected, expected]);
        assert!(expected <= MAX_POINTS);
        assert!(svg.contains("a&lt;b"));
    }

    #[test]
    fn ticks_use_round_steps() {
        assert_eq!(nice_step(10.0, 5.0), 2.0);
        assert_eq!(nice_step(0.7, 5.0), 0.1);
        let t = ticks(-0.1, 1.1);
        assert_eq!(t.len(), 6);
        for (i, v) in t.iter().enumerate() {
            assert!((v - 0.2 * i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn short_traces_keep_every_row() {
        assert_eq!(stride(0), 1);
        assert_eq!(stride(5000), 1);
        assert_eq!(stride(5001), 2);
        let rows = record(1234).rows;
        assert_eq!(downsample(&rows).count(), 1234);
    }
}
