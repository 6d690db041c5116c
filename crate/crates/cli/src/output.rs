//! Atomic file writes and the `log₂ sup` chart.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use thetareg::BlockRecord;

/// Writes through a sibling temporary file and a rename, so readers never see
/// a half-written file.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// `log₂ sup` against `j`, with the fitted line (slope `alpha_fit`) and the
/// predicted one (slope `alpha_pred`), both through the centroid of the points.
pub fn spectrum_svg(title: &str, records: &[BlockRecord], alpha_fit: Option<f64>, alpha_pred: Option<f64>) -> String {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.sup().filter(|s| *s > 0.0).map(|s| (r.j as f64, s.log2())))
        .collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    if pts.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 - x0 < 1.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1.0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let _ = writeln!(
        out,
        r#"<g stroke="black" stroke-width="1"><line x1="{m}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}"/></g>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">j</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{}" font-family="sans-serif" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">log2 sup</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for &(x, _) in &pts {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{x}</text>"#,
            sx(x),
            HEIGHT - MARGIN + 14.0
        );
    }

    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut line = |slope: f64, colour: &str, label: &str, row: f64| {
        let ya = my + slope * (x0 - mx);
        let yb = my + slope * (x1 - mx);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{colour}" stroke-width="1.5" stroke-dasharray="6 3"/>"#,
            sx(x0),
            sy(ya),
            sx(x1),
            sy(yb)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{row}" font-family="sans-serif" font-size="11" fill="{colour}">{label} {slope:.4}</text>"#,
            MARGIN + 10.0
        );
    };
    if let Some(a) = alpha_fit {
        line(a, "#1f77b4", "fitted slope", MARGIN + 5.0);
    }
    if let Some(a) = alpha_pred {
        line(a, "#d62728", "predicted slope", MARGIN + 20.0);
    }

    let path: Vec<String> = pts
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
        path.join(" ")
    );
    for &(x, y) in &pts {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="black"/>"#, sx(x), sy(y));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
