//! Hand-written SVG: overlap heatmaps and fidelity bar charts.
//!
//! Heatmap cells map a value `v`, clamped to `[0, 1]`, linearly from light gray
//! `rgb(235,235,235)` at 0 to dark red `rgb(165,15,21)` at 1. Every cell carries
//! its value to three decimals.

use std::fmt::Write;

use crate::formats::LabeledMatrix;

const CELL: usize = 36;
const MARGIN: usize = 80;
const LOW: [f64; 3] = [235.0, 235.0, 235.0];
const HIGH: [f64; 3] = [165.0, 15.0, 21.0];

/// Fill color for `v`.
pub fn color(v: f64) -> String {
    let t = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let c: Vec<u8> = LOW
        .iter()
        .zip(HIGH)
        .map(|(lo, hi)| (lo + t * (hi - lo)).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn heatmap(m: &LabeledMatrix, title: &str) -> String {
    let (rows, cols) = m.values.shape();
    let width = MARGIN + cols * CELL + 10;
    let height = MARGIN + rows * CELL + 10;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="16" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2,
        escape(title)
    );
    for (j, label) in m.col_labels.iter().enumerate() {
        let x = MARGIN + j * CELL + CELL / 2;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" font-size="9" text-anchor="start" transform="rotate(-60 {x} {})">{}</text>"#,
            MARGIN - 4,
            MARGIN - 4,
            escape(label)
        );
    }
    for (i, label) in m.row_labels.iter().enumerate() {
        let y = MARGIN + i * CELL;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="9" text-anchor="end">{}</text>"#,
            MARGIN - 4,
            y + CELL / 2 + 3,
            escape(label)
        );
        for j in 0..cols {
            let v = m.values[(i, j)];
            let x = MARGIN + j * CELL;
            let ink = if v > 0.5 { "#ffffff" } else { "#000000" };
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}"/>"#,
                color(v)
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="8" text-anchor="middle" fill="{ink}">{v:.3}</text>"#,
                x + CELL / 2,
                y + CELL / 2 + 3
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Vertical bars in `[0, 1]` with a dashed horizontal line at `threshold`.
pub fn bar_chart(labels: &[String], values: &[f64], threshold: f64, title: &str) -> String {
    let plot_h = 200.0;
    let bar = 24;
    let width = MARGIN + labels.len() * bar + 20;
    let height = 60 + plot_h as usize + 70;
    let base = 40.0 + plot_h;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="16" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2,
        escape(title)
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = base - tick * plot_h;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" font-size="9" text-anchor="end">{tick:.2}</text>"#,
            MARGIN - 6,
            y + 3.0
        );
    }
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let h = v.clamp(0.0, 1.0) * plot_h;
        let x = MARGIN + i * bar + 2;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{:.1}" width="{}" height="{h:.1}" fill="{}"/>"#,
            base - h,
            bar - 4,
            color(v)
        );
        let cx = x + (bar - 4) / 2;
        let _ = writeln!(
            s,
            r#"<text x="{cx}" y="{}" font-size="9" text-anchor="end" transform="rotate(-60 {cx} {})">{}</text>"#,
            base as usize + 12,
            base as usize + 12,
            escape(label)
        );
    }
    let ty = base - threshold.clamp(0.0, 1.0) * plot_h;
    let _ = writeln!(
        s,
        r##"<line x1="{MARGIN}" y1="{ty:.1}" x2="{}" y2="{ty:.1}" stroke="#000000" stroke-dasharray="4 3"/>"##,
        width - 20
    );
    s.push_str("</svg>\n");
    s
}
