//! Self-contained SVG heatmaps.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::grid::{GridValues, Quantity};

const LEVELS: usize = 64;
const PLOT_PX: usize = 600;
const LEFT: usize = 70;
const TOP: usize = 40;

const VIRIDIS: [[f64; 3]; 9] = [
    [68.0, 1.0, 84.0],
    [71.0, 45.0, 123.0],
    [59.0, 82.0, 139.0],
    [44.0, 114.0, 142.0],
    [33.0, 145.0, 140.0],
    [40.0, 174.0, 128.0],
    [94.0, 201.0, 98.0],
    [173.0, 220.0, 48.0],
    [253.0, 231.0, 37.0],
];

fn color(level: usize) -> String {
    let x = level as f64 / (LEVELS - 1) as f64 * (VIRIDIS.len() - 1) as f64;
    let k = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let f = x - k as f64;
    let c: Vec<u8> = (0..3)
        .map(|i| (VIRIDIS[k][i] + f * (VIRIDIS[k + 1][i] - VIRIDIS[k][i])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// The `q`-quantile of the finite values (nearest rank).
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Color range: densities are clipped at the 99.5th percentile, CDFs use
/// their full range.
pub fn color_range(grid: &GridValues) -> (f64, f64) {
    let finite = grid.values.iter().copied().filter(|x| x.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = match grid.quantity {
        Quantity::Density => percentile(&grid.values, 0.995),
        Quantity::Cdf => finite.fold(f64::NEG_INFINITY, f64::max),
    };
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        (lo.min(0.0), lo.max(0.0) + 1.0)
    } else {
        (lo, hi)
    }
}

fn level(x: f64, lo: f64, hi: f64) -> usize {
    let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    if f.is_nan() {
        LEVELS - 1
    } else {
        (f * (LEVELS - 1) as f64).round() as usize
    }
}

/// Renders `grid` as a heatmap with `v` increasing upwards.
pub fn heatmap(grid: &GridValues, title: &str) -> String {
    let spec = &grid.spec;
    let cell = (PLOT_PX / spec.nu.max(spec.nv)).max(1);
    let (w, h) = (cell * spec.nu, cell * spec.nv);
    let (lo, hi) = color_range(grid);

    // One path per color level, horizontal runs merged.
    let mut paths: BTreeMap<usize, String> = BTreeMap::new();
    for j in 0..spec.nv {
        let y = TOP + (spec.nv - 1 - j) * cell;
        let mut i = 0;
        while i < spec.nu {
            let lv = level(grid.get(i, j), lo, hi);
            let start = i;
            while i < spec.nu && level(grid.get(i, j), lo, hi) == lv {
                i += 1;
            }
            let run = (i - start) * cell;
            let d = paths.entry(lv).or_default();
            let _ = write!(d, "M{} {}h{}v{}h-{}z", LEFT + start * cell, y, run, cell, run);
        }
    }

    let bar_x = LEFT + w + 20;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">"#,
        bar_x + 90,
        TOP + h + 50
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, LEFT + w / 2, escape(title));
    let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
    for (lv, d) in &paths {
        let _ = writeln!(s, r#"<path fill="{}" d="{}"/>"#, color(*lv), d);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{w}" height="{h}" fill="none" stroke="black"/>"#);

    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let x = LEFT as f64 + f * w as f64;
        let y = (TOP + h) as f64 - f * h as f64;
        let u = spec.u_min + f * (spec.u_max - spec.u_min);
        let v = spec.v_min + f * (spec.v_max - spec.v_min);
        let _ = writeln!(s, r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#, TOP + h, TOP + h + 5);
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{u:.3}</text>"#, TOP + h + 18);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/>"#, LEFT - 5);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v:.3}</text>"#, LEFT - 8, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">u</text>"#, LEFT + w / 2, TOP + h + 38);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">v</text>"#,
        TOP + h / 2,
        TOP + h / 2
    );

    let step = h as f64 / LEVELS as f64;
    for lv in 0..LEVELS {
        let y = TOP as f64 + h as f64 - (lv + 1) as f64 * step;
        let _ = writeln!(
            s,
            r#"<rect x="{bar_x}" y="{y:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            step + 0.5,
            color(lv)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, bar_x + 20, TOP + h, fmt_tick(lo));
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, bar_x + 20, TOP + 10, fmt_tick(hi));
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, bar_x, TOP - 8, grid.quantity.label());
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(x: f64) -> String {
    if x != 0.0 && (x.abs() >= 1e4 || x.abs() < 1e-2) {
        format!("{x:.2e}")
    } else {
        format!("{x:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
