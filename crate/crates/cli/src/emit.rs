//! Report serialization: JSON, CSV decoherence matrix and SVG heatmap.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use histkit::histories::{DecoherenceMatrix, HistorySetSpec};
use histkit::C64;

use crate::run::RunReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            other => Err(format!("unknown format '{other}' (expected json, csv or svg)")),
        }
    }
}

#[derive(Debug)]
pub struct EmitError {
    pub path: PathBuf,
    pub source: std::io::Error,
}

impl std::fmt::Display for EmitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.source)
    }
}

impl std::error::Error for EmitError {}

/// Replaces anything outside `[A-Za-z0-9._-]` so names are safe as file stems.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect()
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), EmitError> {
    let err = |source| EmitError {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

pub fn to_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn complex_cell(z: C64) -> String {
    if z.im < 0.0 || (z.im == 0.0 && z.im.is_sign_negative()) {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

/// RFC 4180 CSV: header row of history labels, one row per history.
pub fn to_csv(d: &DecoherenceMatrix) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let header: Vec<String> = d.labels().iter().map(|a| HistorySetSpec::index_label(a)).collect();
    w.write_record(&header).expect("in-memory write");
    for i in 0..d.len() {
        let row: Vec<String> = (0..d.len()).map(|j| complex_cell(d.get(i, j))).collect();
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

const CELL: usize = 24;
const CHAR_W: usize = 7;

/// Log-scale ramp over `[1e-16, max]`: white for zero, dark blue at the maximum.
fn color(value: f64, max: f64) -> String {
    let floor = 1e-16_f64;
    let t = if value <= floor || max <= floor {
        0.0
    } else {
        ((value.log10() - floor.log10()) / (max.log10() - floor.log10())).clamp(0.0, 1.0)
    };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(255.0, 8.0), lerp(255.0, 48.0), lerp(255.0, 107.0))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Heatmap of `|D(α, β)|`; side length grows linearly with the history count.
pub fn to_svg(d: &DecoherenceMatrix, title: &str) -> String {
    let n = d.len();
    let labels: Vec<String> = d.labels().iter().map(|a| HistorySetSpec::index_label(a)).collect();
    let margin = 8 + CHAR_W * labels.iter().map(String::len).max().unwrap_or(1);
    let top = margin + 20;
    let width = margin + n * CELL + 8;
    let height = top + n * CELL + 8;
    let max = d.entries().data().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="monospace" font-size="11">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(s, r#"<text x="4" y="14">|D| {}</text>"#, escape(title));
    for (j, label) in labels.iter().enumerate() {
        let x = margin + j * CELL + CELL / 2;
        let y = top - 4;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" transform="rotate(-90 {x} {y})">{}</text>"#,
            escape(label)
        );
    }
    for (i, label) in labels.iter().enumerate() {
        let y = top + i * CELL;
        let _ = writeln!(s, r#"<text x="4" y="{}">{}</text>"#, y + CELL / 2 + 4, escape(label));
        for j in 0..n {
            let v = d.get(i, j).norm();
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{y}" width="{CELL}" height="{CELL}" fill="{}"><title>{:.3e}</title></rect>"#,
                margin + j * CELL,
                color(v, max),
                v
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the requested formats into `dir`, returning the paths written.
pub fn emit(report: &RunReport, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>, EmitError> {
    std::fs::create_dir_all(dir).map_err(|source| EmitError {
        path: dir.to_path_buf(),
        source,
    })?;
    let stem = file_stem(&report.scenario);
    let mut written = Vec::new();
    let mut formats = formats.to_vec();
    formats.sort();
    formats.dedup();
    for f in formats {
        let (path, bytes) = match f {
            Format::Json => (dir.join(format!("{stem}.json")), to_json(report)),
            Format::Csv => match &report.matrix {
                Some(d) => (dir.join(format!("{stem}.decoherence.csv")), to_csv(d)),
                None => continue,
            },
            Format::Svg => match &report.matrix {
                Some(d) => (dir.join(format!("{stem}.heatmap.svg")), to_svg(d, &report.scenario)),
                None => continue,
            },
        };
        write_atomic(&path, bytes.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
