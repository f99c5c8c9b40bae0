//! `plot`: SVG heatmaps for matrix CSVs and line charts for conv series.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::report::CONV_DIR;
use super::CliError;

const CELL: f64 = 28.0;
const LABEL_W: f64 = 120.0;
const HEADER_H: f64 = 90.0;

/// Dark to light blue; higher values are lighter.
const DARK: (f64, f64, f64) = (8.0, 48.0, 107.0);
const LIGHT: (f64, f64, f64) = (222.0, 235.0, 247.0);

pub const CHART_LEFT: f64 = 50.0;
pub const CHART_TOP: f64 = 20.0;
pub const CHART_W: f64 = 500.0;
pub const CHART_H: f64 = 250.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCsv {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

fn malformed(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Plot(format!("{}: {}", path.display(), message.into()))
}

fn read_records(path: &Path) -> Result<Vec<csv::StringRecord>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| malformed(path, e.to_string()))?;
    reader
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| malformed(path, e.to_string()))
}

fn parse_cell(path: &Path, s: &str) -> Result<Option<f64>, CliError> {
    if s.trim().is_empty() {
        return Ok(None);
    }
    s.trim()
        .parse::<f64>()
        .map(Some)
        .map_err(|_| malformed(path, format!("`{s}` is not a number")))
}

pub fn read_matrix_csv(path: &Path) -> Result<MatrixCsv, CliError> {
    let records = read_records(path)?;
    let (header, body) = records.split_first().ok_or_else(|| malformed(path, "empty file"))?;
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if columns.is_empty() || body.len() != columns.len() {
        return Err(malformed(
            path,
            format!("expected a square matrix, got {} rows and {} columns", body.len(), columns.len()),
        ));
    }
    let rows = body
        .iter()
        .map(|r| {
            let mut it = r.iter();
            let label = it.next().unwrap_or_default().to_string();
            let values = it.map(|s| parse_cell(path, s)).collect::<Result<Vec<_>, _>>()?;
            Ok((label, values))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(MatrixCsv { columns, rows })
}

pub fn read_series_csv(path: &Path) -> Result<Vec<f64>, CliError> {
    let records = read_records(path)?;
    let (header, body) = records.split_first().ok_or_else(|| malformed(path, "empty file"))?;
    if header.iter().collect::<Vec<_>>() != ["tick", "mean_conv"] {
        return Err(malformed(path, "header must be `tick,mean_conv`"));
    }
    body.iter()
        .map(|r| {
            r.get(1)
                .and_then(|s| parse_cell(path, s).transpose())
                .unwrap_or_else(|| Err(malformed(path, "missing mean_conv value")))
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Colour for `t` in [0, 1]: 0 is darkest, 1 lightest.
pub fn blue(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let mix = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(DARK.0, LIGHT.0), mix(DARK.1, LIGHT.1), mix(DARK.2, LIGHT.2))
}

pub fn heatmap_svg(m: &MatrixCsv, title: &str) -> String {
    let n = m.columns.len();
    let values: Vec<f64> = m.rows.iter().flat_map(|(_, v)| v.iter().flatten().copied()).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm = |x: f64| if hi > lo { (x - lo) / (hi - lo) } else { 0.5 };
    let width = LABEL_W + CELL * n as f64 + 10.0;
    let height = HEADER_H + CELL * n as f64 + 10.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(s, r#"<text x="4" y="14" font-size="12">{}</text>"#, escape(title));
    for (j, col) in m.columns.iter().enumerate() {
        let x = LABEL_W + CELL * (j as f64 + 0.5);
        let y = HEADER_H - 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" transform="rotate(-60 {x} {y})">{}</text>"#,
            escape(col)
        );
    }
    for (i, (label, row)) in m.rows.iter().enumerate() {
        let y = HEADER_H + CELL * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LABEL_W - 4.0,
            y + CELL * 0.65,
            escape(label)
        );
        for (j, v) in row.iter().enumerate() {
            let x = LABEL_W + CELL * j as f64;
            let (fill, text) = match v {
                Some(v) => (blue(norm(*v)), format!("{v:.2}")),
                None => ("#bdbdbd".to_string(), "n/a".to_string()),
            };
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}"><title>{}</title></rect>"#,
                escape(&format!("{label} vs {}: {text}", m.columns[j]))
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Chart coordinates of point `i` of `n` with value `v` (y axis 0..1).
pub fn chart_point(i: usize, n: usize, v: f64) -> (f64, f64) {
    let x = if n <= 1 {
        CHART_LEFT + CHART_W / 2.0
    } else {
        CHART_LEFT + CHART_W * i as f64 / (n - 1) as f64
    };
    (x, CHART_TOP + CHART_H * (1.0 - v.clamp(0.0, 1.0)))
}

pub fn line_chart_svg(series: &[f64], title: &str) -> String {
    let bottom = CHART_TOP + CHART_H;
    let right = CHART_LEFT + CHART_W;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="10">"#,
        right + 20.0,
        bottom + 40.0
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{CHART_LEFT} {CHART_TOP} V{bottom} H{right}" fill="none" stroke="black"/>"#
    );
    for tick in [0.0, 0.5, 1.0] {
        let (_, y) = chart_point(0, 2, tick);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{tick:.1}</text>"#,
            CHART_LEFT - 4.0,
            y + 3.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">tick (0..{})</text>"#,
        CHART_LEFT + CHART_W / 2.0,
        bottom + 28.0,
        series.len().saturating_sub(1)
    );
    let points: Vec<String> = series
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let (x, y) = chart_point(i, series.len(), v);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#08306b" stroke-width="1.5"/>"##,
        points.join(" ")
    );
    s.push_str("</svg>\n");
    s
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "csv"))
        .collect();
    out.sort();
    Ok(out)
}

fn write_svg(csv_path: &Path, svg: &str) -> Result<PathBuf, CliError> {
    let path = csv_path.with_extension("svg");
    fs::write(&path, svg).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Renders every matrix and conv CSV under `report_dir` next to its source.
/// Returns the SVG paths written.
pub fn cmd_plot(report_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    let mut game_dirs: Vec<PathBuf> = fs::read_dir(report_dir)
        .map_err(|source| CliError::Io {
            path: report_dir.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    game_dirs.sort();
    for dir in game_dirs {
        let game = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        for csv_path in csv_files(&dir)? {
            let stat = csv_path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let m = read_matrix_csv(&csv_path)?;
            written.push(write_svg(&csv_path, &heatmap_svg(&m, &format!("{game}: {stat}")))?);
        }
        let conv = dir.join(CONV_DIR);
        if conv.is_dir() {
            for csv_path in csv_files(&conv)? {
                let agent = csv_path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                let series = read_series_csv(&csv_path)?;
                written.push(write_svg(&csv_path, &line_chart_svg(&series, &format!("{game}: mean conv of {agent}")))?);
            }
        }
    }
    if written.is_empty() {
        return Err(CliError::Plot(format!("no report CSVs under {}", report_dir.display())));
    }
    Ok(written)
}
