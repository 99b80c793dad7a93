//! Method comparison: a CSV table of outcome rates and route metrics, bar
//! charts and per-method crossing heatmaps as static SVG.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::eval::{EvalReport, Heatmap};

pub const BENCH_TABLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: String,
    pub episodes: usize,
    pub success: f64,
    pub collision: f64,
    pub timeout: f64,
    /// Success rate minus that of the first method.
    pub success_delta: f64,
    /// Mean route length and speed over pairs every method solved.
    pub avg_distance: Option<f64>,
    pub avg_speed: Option<f64>,
}

/// Builds the comparison rows. Reports must share one start/goal list.
pub fn bench_rows(reports: &[EvalReport]) -> Result<Vec<BenchRow>> {
    let first = reports.first().ok_or_else(|| Error::InvalidInput("no reports to compare".into()))?;
    for r in reports {
        if r.pairs_hash != first.pairs_hash || r.episodes.len() != first.episodes.len() {
            return Err(Error::Protocol(format!(
                "report {:?} used start/goal list {} but {:?} used {}",
                r.method, r.pairs_hash, first.method, first.pairs_hash
            )));
        }
    }
    let common = reports
        .iter()
        .map(EvalReport::successful_indices)
        .reduce(|a, b| a.intersection(&b).copied().collect::<BTreeSet<_>>())
        .unwrap_or_default();
    let base = first.rates().success;
    Ok(reports
        .iter()
        .map(|r| {
            let rates = r.rates();
            let means = r.route_means(Some(&common));
            BenchRow {
                method: r.method.clone(),
                episodes: r.episodes.len(),
                success: rates.success,
                collision: rates.collision,
                timeout: rates.timeout,
                success_delta: rates.success - base,
                avg_distance: means.map(|m| m.0),
                avg_speed: means.map(|m| m.1),
            }
        })
        .collect())
}

pub fn bench_csv(rows: &[BenchRow]) -> Result<String> {
    let mut out = format!("# sddpg bench table v{BENCH_TABLE_VERSION}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["method", "episodes", "success", "collision", "timeout", "success_delta", "avg_distance", "avg_speed"])?;
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_default();
        for r in rows {
            w.write_record([
                r.method.clone(),
                r.episodes.to_string(),
                format!("{:.4}", r.success),
                format!("{:.4}", r.collision),
                format!("{:.4}", r.timeout),
                format!("{:.4}", r.success_delta),
                opt(r.avg_distance),
                opt(r.avg_speed),
            ])?;
        }
        w.flush()?;
    }
    String::from_utf8(out).map_err(|e| Error::Format(e.to_string()))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Vertical bar chart with one bar per label.
pub fn bar_chart_svg(title: &str, unit: &str, labels: &[String], values: &[f64]) -> String {
    let (w, h, left, bottom, top) = (120.0 + 90.0 * labels.len() as f64, 320.0, 60.0, 60.0, 40.0);
    let max = values.iter().copied().fold(0.0f64, f64::max);
    let max = if max > 0.0 { max * 1.1 } else { 1.0 };
    let plot_h = h - bottom - top;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#, h - bottom);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, h - bottom, w - 20.0);
    for i in 0..=4 {
        let v = max * i as f64 / 4.0;
        let y = h - bottom - plot_h * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v:.2}</text>"#, left - 6.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {0})" text-anchor="middle">{}</text>"#, top + plot_h / 2.0, escape(unit));
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let x = left + 20.0 + 90.0 * i as f64;
        let bh = plot_h * v / max;
        let _ = writeln!(s, r##"<rect x="{x}" y="{}" width="60" height="{bh}" fill="#4a7ab5"/>"##, h - bottom - bh);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{v:.3}</text>"#, x + 30.0, h - bottom - bh - 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, x + 30.0, h - bottom + 18.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}

/// Grid of cell success rates; uncrossed cells are grey.
pub fn heatmap_svg(title: &str, map: &Heatmap) -> String {
    let px = 32.0;
    let (w, h) = (map.cols as f64 * px + 40.0, map.rows as f64 * px + 60.0);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="10">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    for r in 0..map.rows {
        for c in 0..map.cols {
            let i = r * map.cols + c;
            let x = 20.0 + c as f64 * px;
            // row 0 is the bottom of the world
            let y = 40.0 + (map.rows - 1 - r) as f64 * px;
            let fill = match map.rate(i) {
                Some(rate) => {
                    let red = (255.0 * (1.0 - rate)).round() as u8;
                    let green = (255.0 * rate).round() as u8;
                    format!("rgb({red},{green},80)")
                }
                None => "#dddddd".to_string(),
            };
            let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="{px}" height="{px}" fill="{fill}" stroke="white"/>"#);
            if let Some(rate) = map.rate(i) {
                let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{:.2}</text>"#, x + px / 2.0, y + px / 2.0 + 3.0, rate);
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Files produced by one comparison, as `(file name, contents)`.
pub fn bench_artifacts(reports: &[EvalReport]) -> Result<Vec<(String, String)>> {
    let rows = bench_rows(reports)?;
    let mut files = vec![("bench.csv".to_string(), bench_csv(&rows)?)];
    if rows.len() >= 2 {
        let labels: Vec<String> = rows.iter().map(|r| r.method.clone()).collect();
        let success: Vec<f64> = rows.iter().map(|r| r.success).collect();
        files.push(("success.svg".into(), bar_chart_svg("Success rate", "rate", &labels, &success)));
        if rows.iter().all(|r| r.avg_distance.is_some()) {
            let d: Vec<f64> = rows.iter().map(|r| r.avg_distance.unwrap_or(0.0)).collect();
            let v: Vec<f64> = rows.iter().map(|r| r.avg_speed.unwrap_or(0.0)).collect();
            files.push(("distance.svg".into(), bar_chart_svg("Average route distance", "m", &labels, &d)));
            files.push(("speed.svg".into(), bar_chart_svg("Average speed", "m/s", &labels, &v)));
        }
    }
    let mut seen = BTreeSet::new();
    for r in reports {
        let mut name = sanitize(&r.method);
        let mut n = 1;
        while !seen.insert(name.clone()) {
            n += 1;
            name = format!("{}-{n}", sanitize(&r.method));
        }
        files.push((format!("heatmap-{name}.svg"), heatmap_svg(&format!("{} crossing success", r.method), &r.heatmap)));
    }
    Ok(files)
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}
