//! Deterministic result files: CSV tables, SVG line charts, manifests.
//!
//! Every writer formats numbers through `Display` (shortest round-trip
//! form) and fixes row/field order up front, so a run repeated with the
//! same spec and seed produces byte-identical files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

// ---------------------------------------------------------------------------
// CSV

/// Writes `header` and `rows` as a newline-terminated CSV file.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> std::io::Result<()> {
    let mut out = String::with_capacity(rows.len() * 32 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    std::fs::write(path, out)
}

// ---------------------------------------------------------------------------
// SVG line charts

/// One named polyline.
#[derive(Debug, Clone)]
pub struct Series {
    /// Legend label.
    pub label: String,
    /// `(x, y)` samples in drawing order.
    pub points: Vec<(f64, f64)>,
}

/// Fixed qualitative palette, cycled when there are many series.
const PALETTE: [&str; 6] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 616.0;
const TOP: f64 = 32.0;
const BOTTOM: f64 = 352.0;

/// Renders `series` as a static vector line chart.
pub fn write_line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> std::io::Result<()> {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    // Degenerate or empty ranges still produce a valid chart.
    if !x_min.is_finite() {
        (x_min, x_max, y_min, y_max) = (0.0, 1.0, 0.0, 1.0);
    }
    if x_max == x_min {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if y_max == y_min {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    let px = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * (RIGHT - LEFT);
    let py = |y: f64| BOTTOM - (y - y_min) / (y_max - y_min) * (BOTTOM - TOP);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        (LEFT + RIGHT) / 2.0,
        escape(title)
    ));
    // Axes.
    svg.push_str(&format!(
        "  <line x1=\"{LEFT}\" y1=\"{BOTTOM}\" x2=\"{RIGHT}\" y2=\"{BOTTOM}\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "  <line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{BOTTOM}\" stroke=\"black\"/>\n"
    ));
    // Extent labels and axis names.
    svg.push_str(&format!(
        "  <text x=\"{LEFT}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        BOTTOM + 16.0,
        tick(x_min)
    ));
    svg.push_str(&format!(
        "  <text x=\"{RIGHT}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        BOTTOM + 16.0,
        tick(x_max)
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        (LEFT + RIGHT) / 2.0,
        BOTTOM + 34.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
        LEFT - 6.0,
        BOTTOM,
        tick(y_min + pad)
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
        LEFT - 6.0,
        TOP + 10.0,
        tick(y_max - pad)
    ));
    svg.push_str(&format!(
        "  <text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">{}</text>\n",
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0,
        escape(y_label)
    ));

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        svg.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        let ly = TOP + 14.0 * i as f64 + 8.0;
        svg.push_str(&format!(
            "  <rect x=\"{:.1}\" y=\"{:.1}\" width=\"10\" height=\"3\" fill=\"{color}\"/>\n",
            RIGHT - 150.0,
            ly - 4.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{ly:.1}\">{}</text>\n",
            RIGHT - 136.0,
            escape(&s.label)
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)
}

/// Short numeric label for axis extents.
fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Minimal XML text escaping.
fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

// ---------------------------------------------------------------------------
// Manifest

/// Schema versions of every CSV this crate can emit; bump on change.
pub const FORMAT_VERSIONS: [(&str, u32); 5] = [
    ("train_curve", 1),
    ("eval", 1),
    ("sweep", 1),
    ("mse_verify", 1),
    ("fl_curve", 1),
];

/// Writes `manifest.toml`: seed, kind, wall time, format versions and
/// the emitted file list. Wall time lives here (and only here) so the
/// result CSVs stay byte-identical across repeated runs.
pub fn write_manifest(
    dir: &Path,
    kind: &str,
    seed: u64,
    wall_time_seconds: f64,
    gate_passed: bool,
    outputs: &[String],
) -> std::io::Result<()> {
    #[derive(serde::Serialize)]
    struct Manifest<'a> {
        run: Run<'a>,
        formats: BTreeMap<&'a str, u32>,
        outputs: Outputs<'a>,
    }
    #[derive(serde::Serialize)]
    struct Run<'a> {
        kind: &'a str,
        seed: u64,
        wall_time_seconds: f64,
        gate_passed: bool,
    }
    #[derive(serde::Serialize)]
    struct Outputs<'a> {
        files: &'a [String],
    }

    let manifest = Manifest {
        run: Run { kind, seed, wall_time_seconds, gate_passed },
        formats: FORMAT_VERSIONS.into_iter().collect(),
        outputs: Outputs { files: outputs },
    };
    let text = toml::to_string_pretty(&manifest).expect("manifest serializes");
    let mut file = std::fs::File::create(dir.join("manifest.toml"))?;
    file.write_all(text.as_bytes())
}

// ---------------------------------------------------------------------------
