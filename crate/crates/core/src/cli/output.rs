//! CSV tables and SVG bifurcation diagrams.

use std::fmt::Write as _;
use std::io::Write;

use crate::continuation::Branch;
use crate::error::{Error, Result};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{:.16e}", x)
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Header plus rows as RFC 4180 text.
pub fn write_csv<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
    let err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 60.0;

/// Round tick spacing giving about five ticks over `span`.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

/// `α` against `W*`. Stable stretches are solid, unstable ones dashed; events
/// are circles labelled T (transcritical), F (fold) and H (Hopf).
pub fn branch_svg(branches: &[Branch], alpha_lo: f64, alpha_hi: f64) -> String {
    let w_max = branches
        .iter()
        .flat_map(|b| b.points.iter().map(|p| p.w_star))
        .fold(0.0f64, f64::max);
    let w_hi = if w_max > 0.0 { 1.05 * w_max } else { 1.0 };
    let a_span = if alpha_hi > alpha_lo { alpha_hi - alpha_lo } else { 1.0 };
    let sx = |a: f64| MARGIN + (a - alpha_lo) / a_span * (WIDTH - 2.0 * MARGIN);
    let sy = |w: f64| HEIGHT - MARGIN - w / w_hi * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        r#"<g stroke="black" stroke-width="1"><line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#
    );
    let _ = writeln!(s, r#"<g font-family="sans-serif" font-size="12" fill="black">"#);
    let st = tick_step(a_span);
    let mut t = (alpha_lo / st).ceil() * st;
    while t <= alpha_hi + 1e-9 * a_span {
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 20.0,
            fmt_tick(t, st)
        );
        t += st;
    }
    let st = tick_step(w_hi);
    let mut t = 0.0;
    while t <= w_hi {
        let y = sy(t);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            fmt_tick(t, st)
        );
        t += st;
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">α</text>"#, 0.5 * WIDTH, HEIGHT - 15.0);
    let _ = writeln!(s, r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">W*</text>"#, 0.5 * HEIGHT, 0.5 * HEIGHT);
    let _ = writeln!(s, "</g>");

    for b in branches {
        // a segment is solid only when both ends are stable
        let seg_stable = |i: usize| b.points[i].stable && b.points[i + 1].stable;
        let mut k = 0;
        while k + 1 < b.points.len() {
            let stable = seg_stable(k);
            let mut end = k + 1;
            while end + 1 < b.points.len() && seg_stable(end) == stable {
                end += 1;
            }
            let pts: Vec<String> = b.points[k..=end]
                .iter()
                .map(|p| format!("{:.2},{:.2}", sx(p.alpha), sy(p.w_star)))
                .collect();
            let dash = if stable { "" } else { r#" stroke-dasharray="6,4""# };
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="black" stroke-width="1.5"{dash} points="{}"/>"#,
                pts.join(" ")
            );
            k = end;
        }
        for e in &b.bifurcations {
            let tag = match e.kind {
                crate::continuation::BifurcationKind::Transcritical => "T",
                crate::continuation::BifurcationKind::Fold => "F",
                crate::continuation::BifurcationKind::Hopf => "H",
            };
            let (x, y) = (sx(e.alpha), sy(e.w_star));
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="black"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{tag}</text>"#,
                x + 6.0,
                y - 6.0
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(t: f64, step: f64) -> String {
    let digits = (-step.log10().floor()).max(0.0) as usize;
    format!("{:.*}", digits, t)
}
