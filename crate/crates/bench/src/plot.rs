//! Plain-text SVG rendering of sweep CSVs.

use std::fmt::Write as _;

use thiserror::Error;

use crate::config::SweepKind;
use crate::sweep::{CellRecord, CSV_HEADER};

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("malformed sweep CSV: {0}")]
    Malformed(String),
    #[error("no data to plot")]
    Empty,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn field<T: std::str::FromStr>(s: &str, name: &str, line: usize) -> Result<T, PlotError> {
    s.parse()
        .map_err(|_| PlotError::Malformed(format!("line {line}: bad {name} {s:?}")))
}

fn opt_field(s: &str, name: &str, line: usize) -> Result<Option<f64>, PlotError> {
    if s.is_empty() {
        Ok(None)
    } else {
        field(s, name, line).map(Some)
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<CellRecord>, PlotError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        _ => return Err(PlotError::Malformed("missing or unexpected header".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let n = i + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(PlotError::Malformed(format!("line {n}: expected 10 fields, got {}", f.len())));
        }
        out.push(CellRecord {
            d: field(f[0], "d", n)?,
            tau: field(f[1], "tau", n)?,
            n_tilde: field(f[2], "n_tilde", n)?,
            trials: field(f[3], "trials", n)?,
            solvability_mean: field(f[4], "solvability_mean", n)?,
            eps_median: opt_field(f[5], "eps_median", n)?,
            eps_q1: opt_field(f[6], "eps_q1", n)?,
            eps_q3: opt_field(f[7], "eps_q3", n)?,
            wall_ms: opt_field(f[8], "wall_ms", n)?,
            seed: field(f[9], "seed", n)?,
        });
    }
    Ok(out)
}

struct Series {
    tau: f64,
    n_tilde: usize,
    points: Vec<(f64, f64)>,
}

fn collect_series(records: &[CellRecord], kind: SweepKind) -> Vec<Series> {
    let mut series: Vec<Series> = Vec::new();
    for r in records {
        let y = match kind {
            SweepKind::Solvability => Some(r.solvability_mean),
            SweepKind::Error => r.eps_median.filter(|&e| e > 0.0),
        };
        let Some(y) = y else { continue };
        let pos = series.iter().position(|s| s.tau == r.tau && s.n_tilde == r.n_tilde);
        let s = match pos {
            Some(p) => &mut series[p],
            None => {
                series.push(Series {
                    tau: r.tau,
                    n_tilde: r.n_tilde,
                    points: Vec::new(),
                });
                series.last_mut().unwrap()
            }
        };
        s.points.push((r.d as f64, y));
    }
    for s in &mut series {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    series.sort_by(|a, b| a.tau.total_cmp(&b.tau).then(b.n_tilde.cmp(&a.n_tilde)));
    series
}

/// One polyline per `(τ, ñ_s)`; linear y for solvability, log10 y for ε.
pub fn render_svg(records: &[CellRecord], kind: SweepKind) -> Result<String, PlotError> {
    let series = collect_series(records, kind);
    if series.is_empty() {
        return Err(PlotError::Empty);
    }
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (x_min, x_max) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (x_lo, x_hi) = if x_max > x_min { (x_min, x_max) } else { (x_min - 1.0, x_max + 1.0) };

    let (y_lo, y_hi, transform): (f64, f64, fn(f64) -> f64) = match kind {
        SweepKind::Solvability => (0.0, 1.0, |y| y),
        SweepKind::Error => {
            let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1.log10()));
            let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
            let (lo, hi) = (lo.floor(), hi.ceil());
            (lo, if hi > lo { hi } else { lo + 1.0 }, f64::log10)
        }
    };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| TOP + (1.0 - (transform(y) - y_lo) / (y_hi - y_lo)) * plot_h;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    if let Some(seed) = records.first().map(|r| r.seed) {
        writeln!(svg, "<desc>{} sweep, seed {seed}</desc>", kind.name()).unwrap();
    }
    writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    )
    .unwrap();

    let x_step = ((x_hi - x_lo) / 10.0).ceil().max(1.0);
    let mut x = x_lo.ceil();
    while x <= x_hi {
        let p = px(x);
        writeln!(
            svg,
            r#"<line x1="{p:.2}" y1="{:.2}" x2="{p:.2}" y2="{:.2}" stroke="black"/><text x="{p:.2}" y="{:.2}" text-anchor="middle">{x}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 20.0
        )
        .unwrap();
        x += x_step;
    }
    match kind {
        SweepKind::Solvability => {
            for k in 0..=4 {
                let y = k as f64 / 4.0;
                let p = py(y);
                writeln!(
                    svg,
                    r#"<line x1="{:.2}" y1="{p:.2}" x2="{LEFT}" y2="{p:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{y:.2}</text>"#,
                    LEFT - 5.0,
                    LEFT - 8.0,
                    p + 4.0
                )
                .unwrap();
            }
        }
        SweepKind::Error => {
            let mut e = y_lo as i32;
            while e as f64 <= y_hi {
                let p = TOP + (1.0 - (e as f64 - y_lo) / (y_hi - y_lo)) * plot_h;
                writeln!(
                    svg,
                    r#"<line x1="{:.2}" y1="{p:.2}" x2="{LEFT}" y2="{p:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"#,
                    LEFT - 5.0,
                    LEFT - 8.0,
                    p + 4.0
                )
                .unwrap();
                e += 1;
            }
        }
    }
    let y_label = match kind {
        SweepKind::Solvability => "mean solvability rate",
        SweepKind::Error => "median relative error",
    };
    writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">number of nodes d</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{y_label}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    )
    .unwrap();

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        if pts.len() > 1 {
            writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" ")).unwrap();
        }
        for &(x, y) in &s.points {
            writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y)).unwrap();
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">tau={} n={}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            s.tau,
            s.n_tilde
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::to_csv;

    fn rec(d: usize, tau: f64, s: f64, eps: Option<f64>) -> CellRecord {
        CellRecord {
            d,
            tau,
            n_tilde: 100,
            trials: 10,
            solvability_mean: s,
            eps_median: eps,
            eps_q1: eps,
            eps_q3: eps,
            wall_ms: None,
            seed: 5,
        }
    }

    #[test]
    fn csv_round_trip() {
        let recs = vec![rec(2, 1.0, 0.5, Some(1e-3)), rec(3, 1.0, 1.0, None)];
        assert_eq!(parse_csv(&to_csv(&recs)).unwrap(), recs);
    }

    #[test]
    fn malformed_csv_rejected() {
        assert!(parse_csv("").is_err());
        assert!(parse_csv("a,b\n1,2\n").is_err());
        let bad = format!("{CSV_HEADER}\n2,1,100,10,x,,,,,5\n");
        assert!(parse_csv(&bad).is_err());
    }

    #[test]
    fn empty_data_is_an_error() {
        assert!(matches!(render_svg(&[], SweepKind::Solvability), Err(PlotError::Empty)));
        assert!(matches!(
            render_svg(&[rec(2, 1.0, 0.0, None)], SweepKind::Error),
            Err(PlotError::Empty)
        ));
    }

    #[test]
    fn single_cell_has_one_marker() {
        let svg = render_svg(&[rec(4, 3.0, 1.0, Some(0.01))], SweepKind::Error).unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert!(svg.contains("tau=3 n=100"));
    }

    #[test]
    fn one_polyline_per_curve() {
        let mut recs = Vec::new();
        for d in 2..6 {
            recs.push(rec(d, 1.0, 0.5, Some(1e-4 * d as f64)));
            recs.push(rec(d, 2.0, 1.0, Some(1e-2)));
        }
        for kind in [SweepKind::Solvability, SweepKind::Error] {
            let svg = render_svg(&recs, kind).unwrap();
            assert_eq!(svg.matches("<polyline").count(), 2);
            assert_eq!(svg, render_svg(&recs, kind).unwrap());
        }
    }
}
