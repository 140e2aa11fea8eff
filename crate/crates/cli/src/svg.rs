//! Minimal static scatter plots of the figure tables.

use std::fmt::Write as _;

use crate::tables::{RawTable, Table};

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

/// Which columns of a table to plot, if any.
fn axes(name: &str) -> Option<(&'static str, &'static str)> {
    Some(match name {
        "pca_variance" => ("component", "trained_cumulative"),
        "state_projections" => ("pc1", "pc2"),
        "fixed_points" => ("pc1", "pc2"),
        "eigen_spectra" => ("re", "im"),
        "time_constants" => ("theta", "tau1"),
        "input_effects" => ("coefficient", "projection"),
        "input_projections" => ("theta", "positive_mean"),
        "overlaps" => ("theta", "overlap"),
        "linearization_error" => ("step", "relative_error"),
        _ => return None,
    })
}

/// Scatter of `y` against `x`; non-finite pairs are dropped.
pub fn scatter(title: &str, xlabel: &str, ylabel: &str, xs: &[f64], ys: &[f64]) -> String {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(&x, &y)| (x, y))
        .collect();
    let range = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(x), h.max(x)));
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = range(&mut pts.iter().map(|p| p.0));
    let (y0, y1) = range(&mut pts.iter().map(|p| p.1));
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{title}</text>"#, W / 2.0);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{ylabel}</text>"#, H / 2.0, H / 2.0);
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}">{x0:.3}</text>"#, H - PAD + 14.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{x1:.3}</text>"#, W - PAD, H - PAD + 14.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y0:.3}</text>"#, PAD - 4.0, H - PAD);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y1:.3}</text>"#, PAD - 4.0, PAD + 10.0);
    for (x, y) in pts {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="steelblue" fill-opacity="0.6"/>"#, px(x), py(y));
    }
    s.push_str("</svg>\n");
    s
}

/// SVG rendering of a figure table, when it has a natural 2-d view.
pub fn render(table: &Table) -> Option<String> {
    let (x, y) = axes(table.schema.name)?;
    let raw = RawTable::parse(&table.to_tsv());
    let (cx, cy) = (raw.column(x)?, raw.column(y)?);
    let parse = |r: &Vec<String>, c: usize| r[c].parse::<f64>().unwrap_or(f64::NAN);
    let xs: Vec<f64> = raw.rows.iter().map(|r| parse(r, cx)).collect();
    let ys: Vec<f64> = raw.rows.iter().map(|r| parse(r, cy)).collect();
    Some(scatter(table.schema.name, x, y, &xs, &ys))
}
