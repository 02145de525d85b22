//! SVG line plots of `u^i` against `x` on selected t-slices of a grid.

use std::fmt::Write as _;

use nijenhuis::flows::{flat_index, multi_index, SolutionGrid};

use crate::CliError;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const TICKS: usize = 5;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

/// Number of t-slices: lines of the grid along the first axis, indexed
/// lexicographically over the remaining axes.
pub fn slice_count(grid: &SolutionGrid) -> usize {
    grid.shape()[1..].iter().product()
}

fn slice_label(grid: &SolutionGrid, slice: usize) -> String {
    let shape = grid.shape();
    let t_idx = multi_index(&shape[1..], slice);
    let parts: Vec<String> = t_idx
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            format!(
                "{}={}",
                grid.axis_names[k + 1],
                num(grid.axes[k + 1].value(i))
            )
        })
        .collect();
    parts.join(", ")
}

fn num(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

fn expand(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = 0.5 * lo.abs().max(1.0);
        (lo - pad, hi + pad)
    }
}

/// Renders one polyline per component per requested slice, with axes, tick
/// labels and a legend. Output depends only on the grid and the slice list.
pub fn render_svg(grid: &SolutionGrid, slices: &[usize]) -> Result<String, CliError> {
    let count = slice_count(grid);
    if let Some(&s) = slices.iter().find(|&&s| s >= count) {
        return Err(CliError::Input(format!(
            "slice {s} out of range (grid has {count} slices)"
        )));
    }
    let shape = grid.shape();
    let x_axis = grid.axes[0];
    let node = |ix: usize, slice: usize| {
        let mut m = vec![ix];
        m.extend(multi_index(&shape[1..], slice));
        flat_index(&shape, &m)
    };

    let values = if slices.is_empty() {
        grid.u.iter().flatten().copied().collect::<Vec<_>>()
    } else {
        slices
            .iter()
            .flat_map(|&s| {
                (0..x_axis.count).flat_map(move |ix| grid.u[node(ix, s)].iter().copied())
            })
            .collect()
    };
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    let (ylo, yhi) = if lo.is_finite() {
        expand(lo, hi)
    } else {
        (-1.0, 1.0)
    };
    let (xlo, xhi) = expand(x_axis.min, x_axis.max);

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - xlo) / (xhi - xlo) * pw;
    let sy = |y: f64| TOP + (yhi - y) / (yhi - ylo) * ph;

    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        w,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(w, r#"<g id="axes" stroke="black" fill="none">"#);
    let _ = writeln!(
        w,
        r#"<rect x="{}" y="{}" width="{}" height="{}"/>"#,
        px(LEFT),
        px(TOP),
        px(pw),
        px(ph)
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let xv = xlo + f * (xhi - xlo);
        let yv = ylo + f * (yhi - ylo);
        let (x, y) = (sx(xv), sy(yv));
        let _ = writeln!(
            w,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
            px(x),
            px(TOP + ph),
            px(x),
            px(TOP + ph + 5.0)
        );
        let _ = writeln!(
            w,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
            px(LEFT - 5.0),
            px(y),
            px(LEFT),
            px(y)
        );
        let _ = writeln!(
            w,
            r#"<text x="{}" y="{}" text-anchor="middle" stroke="none" fill="black">{}</text>"#,
            px(x),
            px(TOP + ph + 20.0),
            num(xv)
        );
        let _ = writeln!(
            w,
            r#"<text x="{}" y="{}" text-anchor="end" stroke="none" fill="black">{}</text>"#,
            px(LEFT - 8.0),
            px(y + 4.0),
            num(yv)
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{}" y="{}" text-anchor="middle" stroke="none" fill="black">{}</text>"#,
        px(LEFT + pw / 2.0),
        px(HEIGHT - 10.0),
        grid.axis_names[0]
    );
    let _ = writeln!(w, "</g>");

    let _ = writeln!(w, r#"<g id="series" fill="none" stroke-width="1.5">"#);
    let mut legend = Vec::new();
    for (k, &slice) in slices.iter().enumerate() {
        for c in 0..grid.n {
            let color = PALETTE[(k * grid.n + c) % PALETTE.len()];
            let points: Vec<String> = (0..x_axis.count)
                .map(|ix| {
                    format!(
                        "{},{}",
                        px(sx(x_axis.value(ix))),
                        px(sy(grid.u[node(ix, slice)][c]))
                    )
                })
                .collect();
            let label = match slice_label(grid, slice) {
                l if l.is_empty() => format!("u{}", c + 1),
                l => format!("u{} @ {l}", c + 1),
            };
            let _ = writeln!(
                w,
                r#"<polyline stroke="{color}" points="{}"><title>{label}</title></polyline>"#,
                points.join(" ")
            );
            legend.push((color, label));
        }
    }
    let _ = writeln!(w, "</g>");

    let _ = writeln!(w, r#"<g id="legend">"#);
    for (i, (color, label)) in legend.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            w,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2"/>"#,
            px(x),
            px(y),
            px(x + 20.0),
            px(y)
        );
        let _ = writeln!(
            w,
            r#"<text x="{}" y="{}">{label}</text>"#,
            px(x + 26.0),
            px(y + 4.0)
        );
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(w, "</svg>");
    Ok(s)
}
