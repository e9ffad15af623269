//! File formats: the BER CSV written by `apnc simulate`, its SVG rendering,
//! and the JSON sample trace consumed by `apnc decode`.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, SampleVector};
use crate::error::{Error, Result};
use crate::harness::{curves_from_records, BerRecord, ConfigPoint, Curve};
use crate::modulation::ModScheme;

pub const SCHEMA_LINE: &str = "# schema=1";
pub const CSV_HEADER: &str = "scheme,delta,phi,ebn0_db,bits,errors,ber,stderr";

/// CSV text, LF line endings, shortest round-trip float formatting.
pub fn write_csv(records: &[BerRecord]) -> String {
    let mut out = String::new();
    out.push_str(SCHEMA_LINE);
    out.push('\n');
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let p = &r.point;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.scheme, p.delta, p.phi, p.ebn0_db, r.bits, r.errors, r.ber, r.stderr
        );
    }
    out
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.trim().parse().map_err(|_| {
        Error::Parse(format!(
            "line {line}: cannot parse `{raw}` in column {}",
            i + 1
        ))
    })
}

pub fn read_csv(text: &str) -> Result<Vec<BerRecord>> {
    match text.lines().next() {
        Some(l) if l.trim() == SCHEMA_LINE => {}
        _ => return Err(Error::Parse(format!("missing `{SCHEMA_LINE}` line"))),
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    let expected: Vec<&str> = CSV_HEADER.split(',').collect();
    if header.iter().map(str::trim).collect::<Vec<_>>() != expected {
        return Err(Error::Parse(format!(
            "unexpected header, want `{CSV_HEADER}`"
        )));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse(e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        let scheme: ModScheme = field::<String>(&row, 0, line)?.parse()?;
        out.push(BerRecord {
            point: ConfigPoint {
                scheme,
                delta: field(&row, 1, line)?,
                phi: field(&row, 2, line)?,
                ebn0_db: field(&row, 3, line)?,
            },
            bits: field(&row, 4, line)?,
            errors: field(&row, 5, line)?,
            ber: field(&row, 6, line)?,
            stderr: field(&row, 7, line)?,
        });
    }
    Ok(out)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Static log-scale BER plot with one polyline per `(delta, phi)` curve.
pub fn render_svg(records: &[BerRecord], title: &str) -> String {
    let curves: Vec<Curve> = curves_from_records(records);
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (70.0, 200.0, 40.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);

    let xs: Vec<f64> = records
        .iter()
        .map(|r| r.point.ebn0_db)
        .filter(|x| x.is_finite())
        .collect();
    let (mut x0, mut x1) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x1 = x0 + 1.0;
    }
    let min_ber = records
        .iter()
        .map(|r| r.ber)
        .filter(|&b| b > 0.0)
        .fold(1.0, f64::min);
    let d_lo = min_ber.log10().floor().min(-1.0);
    let d_hi = 0.0;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |b: f64| top + (d_hi - b.log10()) / (d_hi - d_lo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    // decade grid
    let mut d = d_lo as i32;
    while d as f64 <= d_hi {
        let y = sy(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0
        );
        d += 1;
    }
    let span = x1 - x0;
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .find(|st| span / st <= 12.0)
        .unwrap_or(20.0);
    let mut x = (x0 / step).ceil() * step;
    while x <= x1 + 1e-9 {
        let px = sx(x);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{top}" x2="{px:.2}" y2="{:.2}" stroke="#eee"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{x}</text>"##,
            top + ph,
            top + ph + 18.0
        );
        x += step;
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Eb/N0 (dB)</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">BER</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .filter(|p| p.ber > 0.0 && p.ebn0_db.is_finite())
            .map(|p| format!("{:.2},{:.2}", sx(p.ebn0_db), sy(p.ber)))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Snr {
    Number(f64),
    Text(String),
}

/// JSON form of a [`SampleVector`], optionally with the transmitted packets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub scheme: ModScheme,
    pub n_symbols: usize,
    pub delta: f64,
    pub phi: f64,
    ebn0_db: Snr,
    /// `[re, im]` per sample, `null` for an unusable sample.
    pub samples: Vec<Option<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xa: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xb: Option<Vec<usize>>,
}

impl Trace {
    pub fn from_samples(y: &SampleVector, truth: Option<(&[usize], &[usize])>) -> Self {
        let p = &y.params;
        Trace {
            scheme: p.scheme,
            n_symbols: p.n_symbols,
            delta: p.delta,
            phi: p.phi,
            ebn0_db: if p.ebn0_db.is_finite() {
                Snr::Number(p.ebn0_db)
            } else {
                Snr::Text("inf".into())
            },
            samples: y.samples.iter().map(|s| s.map(|c| [c.re, c.im])).collect(),
            xa: truth.map(|t| t.0.to_vec()),
            xb: truth.map(|t| t.1.to_vec()),
        }
    }

    pub fn ebn0_db(&self) -> Result<f64> {
        match &self.ebn0_db {
            Snr::Number(v) => Ok(*v),
            Snr::Text(t) if t.eq_ignore_ascii_case("inf") => Ok(f64::INFINITY),
            Snr::Text(t) => Err(Error::Parse(format!(
                "ebn0_db `{t}` is neither a number nor \"inf\""
            ))),
        }
    }

    pub fn to_samples(&self) -> Result<SampleVector> {
        let params = ChannelParams::new(
            self.scheme,
            self.n_symbols,
            self.delta,
            self.phi,
            self.ebn0_db()?,
        )?;
        let samples = self
            .samples
            .iter()
            .map(|s| s.map(|[re, im]| Complex64::new(re, im)))
            .collect();
        SampleVector::new(samples, params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}
