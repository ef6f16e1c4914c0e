//! Static SVG renderings of an evaluation report.

use std::fmt::Write;

use super::report::EvalReport;

const CELL: f64 = 56.0;
const MARGIN: f64 = 70.0;

/// Heatmap of row-normalized counting percentages.
pub fn confusion_svg(report: &EvalReport) -> String {
    let pct = report.confusion.percentages();
    let rows = pct.len();
    let cols = rows + 1;
    let w = MARGIN + cols as f64 * CELL + 20.0;
    let h = MARGIN + rows as f64 * CELL + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">estimated speakers</text>"#, MARGIN + cols as f64 * CELL / 2.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">speakers</text>"#,
        MARGIN + rows as f64 * CELL / 2.0,
        MARGIN + rows as f64 * CELL / 2.0
    );
    for j in 0..cols {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{j}</text>"#,
            MARGIN + (j as f64 + 0.5) * CELL,
            MARGIN - 10.0
        );
    }
    for (i, row) in pct.iter().enumerate() {
        let y = MARGIN + i as f64 * CELL;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 10.0, y + CELL / 2.0 + 4.0, i + 1);
        for (j, &p) in row.iter().enumerate() {
            let x = MARGIN + j as f64 * CELL;
            let shade = (255.0 - 2.0 * p).clamp(55.0, 255.0) as u8;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="rgb({shade},{shade},255)" stroke="white"/>"#
            );
            let colour = if p > 60.0 { "white" } else { "black" };
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{colour}">{p:.1}</text>"#,
                x + CELL / 2.0,
                y + CELL / 2.0 + 4.0
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Bars of mean SI-SNR and SDR improvement per speaker count.
pub fn metrics_svg(report: &EvalReport) -> String {
    let aggs = &report.aggregates;
    let values: Vec<(f64, f64)> = aggs.iter().map(|a| (a.si_snri, a.sdri)).collect();
    let top = values
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .filter(|v| v.is_finite())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let plot_h = 240.0;
    let group = 90.0;
    let w = MARGIN + group * aggs.len().max(1) as f64 + 20.0;
    let h = plot_h * 2.0 + 80.0;
    let zero = 30.0 + plot_h;
    let scale = plot_h / top;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(s, r#"<line x1="{MARGIN}" y1="{zero}" x2="{}" y2="{zero}" stroke="black"/>"#, w - 20.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">0 dB</text>"#, MARGIN - 6.0, zero + 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{top:.1}</text>"#, MARGIN - 6.0, zero - plot_h + 4.0);
    let _ = writeln!(s, r##"<rect x="{}" y="8" width="12" height="12" fill="#3b6fb6"/><text x="{}" y="19">SI-SNRi</text>"##, MARGIN, MARGIN + 16.0);
    let _ = writeln!(s, r##"<rect x="{}" y="8" width="12" height="12" fill="#e08a2c"/><text x="{}" y="19">SDRi</text>"##, MARGIN + 90.0, MARGIN + 106.0);
    for (k, (a, &(si, sd))) in aggs.iter().zip(&values).enumerate() {
        let x0 = MARGIN + k as f64 * group + 15.0;
        for (off, v, colour) in [(0.0, si, "#3b6fb6"), (30.0, sd, "#e08a2c")] {
            if !v.is_finite() {
                continue;
            }
            let len = v.abs() * scale;
            let y = if v >= 0.0 { zero - len } else { zero };
            let _ = writeln!(s, r#"<rect x="{}" y="{y}" width="28" height="{len}" fill="{colour}"/>"#, x0 + off);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">N={}</text>"#, x0 + 29.0, h - 12.0, a.n);
    }
    s.push_str("</svg>\n");
    s
}
