//! Deterministic CSV, JSON and SVG writers. Every file carries the library
//! version and the configuration hash.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of the canonical JSON of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub struct Meta {
    pub command: String,
    pub config: Value,
    pub hash: String,
}

impl Meta {
    pub fn new<T: Serialize>(command: &str, config: &T) -> Meta {
        Meta {
            command: command.to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
            hash: config_hash(config),
        }
    }
}

pub enum Cell {
    Text(String),
    Int(i64),
    Float(f64),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => fmt_f64(*x),
        }
    }
}

/// RFC 4180 CSV preceded by `#` comment lines with the version and hash.
pub fn write_csv(path: &Path, meta: &Meta, header: &[&str], rows: &[Vec<Cell>], notes: &[String]) -> std::io::Result<()> {
    let mut out = Vec::new();
    writeln!(out, "# hyplab {VERSION} {}", meta.command)?;
    writeln!(out, "# config_sha256 {}", meta.hash)?;
    for n in notes {
        writeln!(out, "# {n}")?;
    }
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(&mut out);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
    }
    fs::write(path, out)
}

/// Pretty JSON `{"meta": {...}, "result": ...}`.
pub fn write_json<T: Serialize>(path: &Path, meta: &Meta, result: &T) -> std::io::Result<()> {
    let doc = json!({
        "meta": {
            "version": VERSION,
            "command": meta.command,
            "config_sha256": meta.hash,
            "config": meta.config,
        },
        "result": result,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("result serializes");
    text.push('\n');
    fs::write(path, text)
}

pub const SVG_SIZE: f64 = 1024.0;

/// Static 1024 x 1024 scatter plot with 1 px dots, scaled to the bounding
/// box of `points` with a 5% margin.
pub fn write_svg(path: &Path, meta: &Meta, title: &str, points: &[[f64; 2]]) -> std::io::Result<()> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-300);
    let scale = 0.9 * SVG_SIZE / span;
    let centre = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        SVG_SIZE
    );
    let _ = writeln!(s, "<!-- hyplab {VERSION} {} config_sha256 {} -->", meta.command, meta.hash);
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<g fill="black">"#);
    for p in points {
        let x = 0.5 * SVG_SIZE + scale * (p[0] - centre[0]);
        // SVG y runs downwards.
        let y = 0.5 * SVG_SIZE - scale * (p[1] - centre[1]);
        let _ = writeln!(s, r#"<rect x="{x:.2}" y="{y:.2}" width="1" height="1"/>"#);
    }
    let _ = writeln!(s, "</g>\n</svg>");
    fs::write(path, s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
