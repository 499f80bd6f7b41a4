//! Report files: JSON, a one-row-per-metric CSV table and an SVG bar chart
//! of recall at each k.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EvalError, EvalReport, Metric};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_SVG: &str = "report.svg";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_row(out: &mut String, name: &str, m: &Metric) {
    let _ = writeln!(out, "{name},{},{},{}", m.baseline, opt(m.reranked), opt(m.delta));
}

pub fn render_csv(report: &EvalReport) -> String {
    let mut out = String::from("metric,baseline,reranked,delta\n");
    for r in &report.recall {
        csv_row(&mut out, &format!("R@{}", r.k), &r.value);
    }
    csv_row(&mut out, "AP", &report.mean_ap);
    for t in &report.threshold_recall {
        csv_row(&mut out, &format!("R@{}<={}km", t.k, t.threshold_km), &t.value);
    }
    let count = |n: usize| Metric {
        baseline: n as f64,
        reranked: None,
        delta: None,
    };
    csv_row(&mut out, "queries", &count(report.query_count));
    csv_row(&mut out, "skipped", &count(report.skipped_count));
    out
}

/// Grouped bars, one group per k, baseline on the left and reranked (if
/// any) on the right.
pub fn render_svg(report: &EvalReport) -> String {
    const W: f64 = 480.0;
    const H: f64 = 260.0;
    const PLOT_H: f64 = 180.0;
    const TOP: f64 = 30.0;
    const LEFT: f64 = 40.0;
    let groups = report.recall.len().max(1) as f64;
    let group_w = (W - LEFT - 20.0) / groups;
    let bar_w = group_w * 0.35;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{LEFT}" y="18">Recall at k</text>"#);
    let base_y = TOP + PLOT_H;
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{base_y}" x2="{}" y2="{base_y}" stroke="black"/>"#,
        W - 20.0
    );
    for tick in [0.0, 0.5, 1.0] {
        let y = base_y - tick * PLOT_H;
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{}" text-anchor="end">{tick:.1}</text><line x1="{LEFT}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/>"##,
            LEFT - 4.0,
            y + 4.0,
            W - 20.0
        );
    }
    for (i, r) in report.recall.iter().enumerate() {
        let x0 = LEFT + i as f64 * group_w + group_w * 0.15;
        let mut bar = |x: f64, v: f64, fill: &str| {
            let h = v.clamp(0.0, 1.0) * PLOT_H;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{:.2}" width="{bar_w:.2}" height="{h:.2}" fill="{fill}"><title>{v:.4}</title></rect>"#,
                base_y - h
            );
        };
        bar(x0, r.value.baseline, "#7f8c8d");
        if let Some(v) = r.value.reranked {
            bar(x0 + bar_w, v, "#2e86c1");
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">R@{}</text>"#,
            x0 + bar_w,
            base_y + 16.0,
            r.k
        );
    }
    let legend_y = H - 14.0;
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{}" width="10" height="10" fill="#7f8c8d"/><text x="{}" y="{legend_y}">baseline</text>"##,
        legend_y - 9.0,
        LEFT + 14.0
    );
    if report.mean_ap.reranked.is_some() {
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{}" width="10" height="10" fill="#2e86c1"/><text x="{}" y="{legend_y}">reranked</text>"##,
            LEFT + 90.0,
            legend_y - 9.0,
            LEFT + 104.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `report.json`, `report.csv` and `report.svg` into `dir`.
pub fn write_report(dir: &Path, report: &EvalReport) -> Result<(), EvalError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| EvalError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    for (name, body) in [
        (REPORT_JSON, json),
        (REPORT_CSV, render_csv(report)),
        (REPORT_SVG, render_svg(report)),
    ] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io(&path))?;
    }
    Ok(())
}
