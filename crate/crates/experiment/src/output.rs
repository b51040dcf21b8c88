use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fgr_core::QualityKind;

use crate::config::ExperimentConfig;
use crate::error::{ExperimentError, Result};
use crate::report::Summary;
use crate::runner::SimRecord;
use crate::stats::zscores;

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.json";
pub const WCATE_PLOT: &str = "redundancy-vs-wcate.svg";
pub const DISTANCE_PLOT: &str = "redundancy-vs-distance.svg";

pub const CSV_HEADER: [&str; 14] = [
    "sim_id",
    "r_wb",
    "r_wb_se",
    "r_wass",
    "r_wass_se",
    "q_wb_0",
    "q_wb_1",
    "q_wass_0",
    "q_wass_1",
    "wc_ate",
    "mean_dist_0",
    "mean_dist_1",
    "converged_0",
    "converged_1",
];

/// Shortest representation that parses back to the same `f64`.
fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn records_to_csv(records: &[SimRecord]) -> String {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in records {
        let row = [
            r.sim_id.to_string(),
            num(r.r_wb),
            num(r.r_wb_se),
            num(r.r_wass),
            num(r.r_wass_se),
            num(r.q_wb[0]),
            num(r.q_wb[1]),
            num(r.q_wass[0]),
            num(r.q_wass[1]),
            num(r.wc_ate),
            num(r.mean_dist[0]),
            num(r.mean_dist[1]),
            r.converged[0].to_string(),
            r.converged[1].to_string(),
        ];
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}

/// Parses the CSV columns back into records; per-pose distances, error text
/// and spot checks are not part of the file and come back empty.
pub fn records_from_csv(text: &str) -> std::result::Result<Vec<SimRecord>, String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()));
    }
    let mut out = vec![];
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        let f = |k: usize| -> std::result::Result<f64, String> {
            row[k].parse().map_err(|_| format!("row {}: bad number {:?} in {}", line + 1, &row[k], CSV_HEADER[k]))
        };
        let b = |k: usize| -> std::result::Result<bool, String> {
            row[k].parse().map_err(|_| format!("row {}: bad flag {:?} in {}", line + 1, &row[k], CSV_HEADER[k]))
        };
        out.push(SimRecord {
            sim_id: row[0].parse().map_err(|_| format!("row {}: bad sim_id", line + 1))?,
            r_wb: f(1)?,
            r_wb_se: f(2)?,
            r_wass: f(3)?,
            r_wass_se: f(4)?,
            q_wb: [f(5)?, f(6)?],
            q_wass: [f(7)?, f(8)?],
            wc_ate: f(9)?,
            mean_dist: [f(10)?, f(11)?],
            posewise_dist: [vec![], vec![]],
            converged: [b(12)?, b(13)?],
            error: None,
            self_redundancy_ok: None,
        });
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<SimRecord>> {
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    records_from_csv(&text).map_err(|reason| ExperimentError::Records {
        path: path.to_path_buf(),
        reason,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| ExperimentError::io(path, e))
}

struct Panel {
    title: String,
    x_label: String,
    y_label: String,
    /// `(x, y, colour value in [−1, 1] or None for the default colour)`
    points: Vec<(f64, f64, Option<f64>)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn colour(v: Option<f64>) -> String {
    match v {
        None => "#1f5fa8".into(),
        Some(t) => {
            // blue (low) to red (high)
            let u = (t.clamp(-1.0, 1.0) + 1.0) / 2.0;
            let r = (40.0 + 200.0 * u) as u8;
            let b = (240.0 - 200.0 * u) as u8;
            format!("#{r:02x}50{b:02x}")
        }
    }
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Side-by-side scatter panels as a standalone SVG document.
fn scatter_svg(panels: &[Panel]) -> String {
    let (w, h, m) = (420.0, 340.0, 55.0);
    let total_w = w * panels.len() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{h}" viewBox="0 0 {total_w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{total_w}" height="{h}" fill="white"/>"#);
    for (k, p) in panels.iter().enumerate() {
        let ox = k as f64 * w;
        let pts: Vec<_> = p.points.iter().filter(|(x, y, _)| x.is_finite() && y.is_finite()).collect();
        let (x0, x1) = bounds(pts.iter().map(|q| q.0));
        let (y0, y1) = bounds(pts.iter().map(|q| q.1));
        let sx = |x: f64| ox + m + (x - x0) / (x1 - x0) * (w - 1.5 * m);
        let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 1.8 * m);
        let _ = writeln!(s, r#"<g>"#);
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            ox + m,
            0.8 * m,
            w - 1.5 * m,
            h - 1.8 * m
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#,
            ox + m + (w - 1.5 * m) / 2.0,
            0.5 * m,
            escape(&p.title)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            ox + m + (w - 1.5 * m) / 2.0,
            h - 0.3 * m,
            escape(&p.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
            ox + 0.3 * m,
            h / 2.0,
            ox + 0.3 * m,
            h / 2.0,
            escape(&p.y_label)
        );
        for (v, anchor_y) in [(y0, h - m), (y1, 0.8 * m)] {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#, ox + m - 4.0, anchor_y);
        }
        for (v, anchor) in [(x0, "start"), (x1, "end")] {
            let x = if anchor == "start" { ox + m } else { ox + w - 0.5 * m };
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="{anchor}">{v:.3}</text>"#, h - m + 14.0);
        }
        for (x, y, c) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.7"/>"#,
                sx(*x),
                sy(*y),
                colour(*c)
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

fn label(kind: QualityKind) -> &'static str {
    match kind {
        QualityKind::Wb => "R^WB",
        QualityKind::Wass => "R^Wass",
    }
}

/// Redundancy against log₁₀ WC-ATE, one panel per kind.
pub fn wcate_plot(records: &[SimRecord], kinds: &[QualityKind]) -> String {
    let valid: Vec<&SimRecord> = records.iter().filter(|r| r.is_valid()).collect();
    let panels: Vec<Panel> = kinds
        .iter()
        .map(|&k| Panel {
            title: format!("{} vs WC-ATE", label(k)),
            x_label: label(k).into(),
            y_label: "log10 WC-ATE (m²)".into(),
            points: valid.iter().map(|r| (r.redundancy(k), r.wc_ate.max(1e-300).log10(), None)).collect(),
        })
        .collect();
    scatter_svg(&panels)
}

/// Mean distance to each landmark, coloured by batch z-scored redundancy.
pub fn distance_plot(records: &[SimRecord], kinds: &[QualityKind]) -> String {
    let valid: Vec<&SimRecord> = records.iter().filter(|r| r.is_valid()).collect();
    let panels: Vec<Panel> = kinds
        .iter()
        .map(|&k| {
            let z = zscores(&valid.iter().map(|r| r.redundancy(k)).collect::<Vec<_>>());
            Panel {
                title: format!("{} (z-scored) by landmark distance", label(k)),
                x_label: "mean distance to L0 (m)".into(),
                y_label: "mean distance to L1 (m)".into(),
                points: valid
                    .iter()
                    .zip(&z)
                    .map(|(r, z)| (r.mean_dist[0], r.mean_dist[1], Some(z / 2.0)))
                    .collect(),
            }
        })
        .collect();
    scatter_svg(&panels)
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))
}

pub fn write_records(dir: &Path, records: &[SimRecord]) -> Result<()> {
    create_dir(dir)?;
    write(&dir.join(RECORDS_FILE), &records_to_csv(records))
}

pub fn write_config(dir: &Path, config: &ExperimentConfig) -> Result<()> {
    create_dir(dir)?;
    write(&dir.join(CONFIG_FILE), &config.to_json())
}

/// Writes the summary and both plots.
pub fn emit_outputs(records: &[SimRecord], summary: &Summary, kinds: &[QualityKind], dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let json = serde_json::to_string_pretty(summary).expect("summary serializes");
    write(&dir.join(SUMMARY_FILE), &json)?;
    write(&dir.join(WCATE_PLOT), &wcate_plot(records, kinds))?;
    write(&dir.join(DISTANCE_PLOT), &distance_plot(records, kinds))
}
