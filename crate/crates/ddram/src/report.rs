//! Output artifacts: the binary sample format, CSV with traceability
//! headers, JSON reports, and static SVG line charts.
//!
//! Binary sample layout: magic "DDRM", version u32, dim u32, count u64, then
//! count×dim little-endian f64 values row-major. CSV and JSON outputs start
//! with the config hash and tool version so any file can be traced back to
//! the exact configuration that produced it.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;

pub const SAMPLE_MAGIC: &[u8; 4] = b"DDRM";
pub const SAMPLE_VERSION: u32 = 1;

/// Crate version embedded in output headers.
pub fn tool_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad sample file {path}: {message}")]
    Format { path: String, message: String },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write samples in the binary column format.
pub fn write_samples(path: &Path, samples: &[DVector<f64>]) -> Result<(), ReportError> {
    let dim = samples.first().map_or(0, |s| s.len());
    let mut buf = Vec::with_capacity(20 + samples.len() * dim * 8);
    buf.extend_from_slice(SAMPLE_MAGIC);
    buf.extend_from_slice(&SAMPLE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    buf.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    for s in samples {
        for v in s.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, buf).map_err(io_err(path))
}

/// Read a binary sample file back.
pub fn read_samples(path: &Path) -> Result<Vec<DVector<f64>>, ReportError> {
    let mut file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut header = [0u8; 20];
    file.read_exact(&mut header).map_err(io_err(path))?;
    let bad = |message: &str| ReportError::Format {
        path: path.display().to_string(),
        message: message.into(),
    };
    if &header[0..4] != SAMPLE_MAGIC {
        return Err(bad("wrong magic"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != SAMPLE_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(header[12..20].try_into().unwrap()) as usize;
    let mut data = vec![0u8; count * dim * 8];
    file.read_exact(&mut data).map_err(io_err(path))?;
    let mut out = Vec::with_capacity(count);
    for r in 0..count {
        out.push(DVector::from_fn(dim, |i, _| {
            let o = (r * dim + i) * 8;
            f64::from_le_bytes(data[o..o + 8].try_into().unwrap())
        }));
    }
    Ok(out)
}

/// Write a CSV with `# config_hash = …` / `# version = …` header comments.
pub fn write_csv(
    path: &Path,
    config_hash: &str,
    columns: &[&str],
    rows: &[Vec<String>],
) -> Result<(), ReportError> {
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut text = String::new();
    text.push_str(&format!("# config_hash = {config_hash}\n"));
    text.push_str(&format!("# version = {}\n", tool_version()));
    text.push_str(&columns.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    file.write_all(text.as_bytes()).map_err(io_err(path))
}

/// Read back one of our CSVs: (columns, rows), comments skipped.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), ReportError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let columns = lines
        .next()
        .ok_or_else(|| ReportError::Format {
            path: path.display().to_string(),
            message: "empty csv".into(),
        })?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok((columns, rows))
}

/// Write a JSON report wrapped with the traceability header fields.
pub fn write_json<T: serde::Serialize>(
    path: &Path,
    config_hash: &str,
    data: &T,
) -> Result<(), ReportError> {
    let wrapped = serde_json::json!({
        "config_hash": config_hash,
        "version": tool_version(),
        "data": data,
    });
    let text = serde_json::to_string_pretty(&wrapped).expect("report serializes");
    std::fs::write(path, text).map_err(io_err(path))
}

/// One plotted series: a name and (x, y) points.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Render a static log–log (or linear) line chart as a standalone SVG.
pub fn line_chart_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    log_log: bool,
) -> String {
    const W: f64 = 640.0;
    const H: f64 = 440.0;
    const ML: f64 = 70.0;
    const MR: f64 = 140.0;
    const MT: f64 = 40.0;
    const MB: f64 = 55.0;
    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let tx = |v: f64| if log_log { v.max(1e-300).log10() } else { v };

    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|&(x, y)| (tx(x), tx(y))))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x0 < x1) {
        x1 = x0 + 1.0;
    }
    if !(y0 < y1) {
        y1 = y0 + 1.0;
    }
    let sx = move |x: f64| ML + (tx(x) - x0) / (x1 - x0) * (W - ML - MR);
    let sy = move |y: f64| H - MB - (tx(y) - y0) / (y1 - y0) * (H - MT - MB);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        W / 2.0,
        title
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n\
         <line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{0}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (ML + W - MR) / 2.0,
        H - 14.0,
        x_label
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0,
        y_label
    ));
    // Tick labels at the extremes.
    let fmt = |v: f64, log: bool| {
        let raw = if log { 10f64.powf(v) } else { v };
        if raw != 0.0 && (raw.abs() >= 1e4 || raw.abs() < 1e-3) {
            format!("{raw:.2e}")
        } else {
            format!("{raw:.3}")
        }
    };
    svg.push_str(&format!(
        "<text x=\"{ML}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"{}\" y=\"{0}\" text-anchor=\"middle\">{}</text>\n",
        H - MB + 18.0,
        fmt(x0, log_log),
        W - MR,
        fmt(x1, log_log)
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n\
         <text x=\"{0}\" y=\"{MT}\" text-anchor=\"end\">{}</text>\n",
        ML - 6.0,
        H - MB,
        fmt(y0, log_log),
        fmt(y1, log_log)
    ));
    for (k, s) in series.iter().enumerate() {
        let color = palette[k % palette.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        for &(x, y) in &s.points {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.6\" fill=\"{color}\"/>\n",
                sx(x),
                sy(y)
            ));
        }
        let ly = MT + 16.0 * k as f64;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{}\" y=\"{}\">{}</text>\n",
            W - MR + 10.0,
            W - MR + 34.0,
            W - MR + 40.0,
            ly + 4.0,
            s.name
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
