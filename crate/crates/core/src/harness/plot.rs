//! Two-panel SVG line plot of a sweep: gaps on the left, bounds on the right.

use std::fmt::Write as _;

use super::scenario::SweepRow;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

struct Series<'a> {
    label: &'a str,
    color: &'a str,
    points: Vec<(f64, f64)>,
    /// Half-widths of error bars, if any.
    err: Option<Vec<f64>>,
}

/// Round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|f| f * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() * step;
    (0..)
        .map(|i| first + step * i as f64)
        .take_while(|t| *t <= hi + step * 1e-9)
        .collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{:.3}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn panel(svg: &mut String, x0: f64, title: &str, x_label: &str, series: &[Series]) {
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for s in series {
        for (i, &(x, y)) in s.points.iter().enumerate() {
            let e = s.err.as_ref().map_or(0.0, |e| e[i]);
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y - e);
            ymax = ymax.max(y + e);
        }
    }
    if !xmin.is_finite() {
        return;
    }
    if xmax <= xmin {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if ymax <= ymin {
        ymax = ymin + 1.0;
    }
    ymax += 0.05 * (ymax - ymin);

    let (left, top) = (x0 + MARGIN_L, MARGIN_T);
    let (w, h) = (PANEL_W - MARGIN_L - MARGIN_R, PANEL_H - MARGIN_T - MARGIN_B);
    let sx = |x: f64| left + (x - xmin) / (xmax - xmin) * w;
    let sy = |y: f64| top + h - (y - ymin) / (ymax - ymin) * h;

    let _ = writeln!(
        svg,
        r##"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{title}</text>"#,
        left + w / 2.0,
        top - 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{x_label}</text>"#,
        left + w / 2.0,
        top + h + 38.0
    );
    for t in ticks(xmin, xmax) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="#444"/><text x="{x:.1}" y="{}" text-anchor="middle" font-size="10">{}</text>"##,
            top + h,
            top + h + 4.0,
            top + h + 16.0,
            fmt_tick(t)
        );
    }
    for t in ticks(ymin, ymax) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"##,
            left,
            left + w,
            left - 6.0,
            y + 3.0,
            fmt_tick(t)
        );
    }
    for (k, s) in series.iter().enumerate() {
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            path.join(" "),
            s.color
        );
        for (i, &(x, y)) in s.points.iter().enumerate() {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                sx(x),
                sy(y),
                s.color
            );
            if let Some(e) = &s.err {
                let _ = writeln!(
                    svg,
                    r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}"/>"#,
                    sx(x),
                    sy(y - e[i]),
                    sx(x),
                    sy(y + e[i]),
                    s.color
                );
            }
        }
        let ly = top + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/><text x="{}" y="{}" font-size="11">{}</text>"#,
            left + 8.0,
            left + 28.0,
            s.color,
            left + 34.0,
            ly + 4.0,
            s.label
        );
    }
}

/// Render the sweep; error bars are two standard errors.
pub fn sweep_svg(rows: &[SweepRow], parameter: &str) -> String {
    let xs: Vec<f64> = rows.iter().map(|r| r.swept_value).collect();
    let pts = |f: fn(&SweepRow) -> f64| xs.iter().copied().zip(rows.iter().map(f)).collect::<Vec<_>>();
    let gaps = [
        Series {
            label: "|gap|^avg",
            color: "#1f77b4",
            points: pts(|r| r.abs_avg_gap),
            err: Some(rows.iter().map(|r| 2.0 * r.abs_avg_gap_se).collect()),
        },
        Series {
            label: "|gap^avg|",
            color: "#d62728",
            points: pts(|r| r.avg_abs_gap),
            err: Some(rows.iter().map(|r| 2.0 * r.avg_abs_gap_se).collect()),
        },
    ];
    let bounds = [
        Series {
            label: "KL bound",
            color: "#2ca02c",
            points: pts(|r| r.bound_kl),
            err: None,
        },
        Series {
            label: "JS bound",
            color: "#9467bd",
            points: pts(|r| r.bound_js),
            err: None,
        },
        Series {
            label: "|gap|^avg",
            color: "#1f77b4",
            points: pts(|r| r.abs_avg_gap),
            err: None,
        },
    ];
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif">"#,
        2.0 * PANEL_W,
        PANEL_H,
        2.0 * PANEL_W,
        PANEL_H
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    panel(&mut svg, 0.0, "generalization gaps", parameter, &gaps);
    panel(&mut svg, PANEL_W, "upper bounds", parameter, &bounds);
    svg.push_str("</svg>\n");
    svg
}
