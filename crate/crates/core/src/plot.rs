//! SVG track plots and heatmap exports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::bev::OccupancyMap;
use crate::metrics::TrackSet;

const MARGIN: f64 = 50.0;
const PX_PER_M: f64 = 20.0;

/// Deterministic `#rrggbb` color for a track id.
pub fn id_color(id: u64) -> String {
    let h = Sha256::digest(id.to_le_bytes());
    let hue = u16::from_le_bytes([h[0], h[1]]) as f64 / 65536.0 * 360.0;
    let (r, g, b) = hsv_to_rgb(hue, 0.75, 0.85);
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (u8, u8, u8) {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let q = |t: f64| ((t + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    (q(r), q(g), q(b))
}

fn polylines(set: &TrackSet) -> BTreeMap<u64, Vec<[f64; 2]>> {
    let mut lines: BTreeMap<u64, Vec<[f64; 2]>> = BTreeMap::new();
    for f in set.frames() {
        for &(id, p) in set.frame(f) {
            lines.entry(id).or_default().push(p);
        }
    }
    lines
}

/// Top-down plot of `[0, area_x] × [0, area_y]` with x to the right and y
/// upward. Ground truth, when given, is drawn in gray underneath.
pub fn tracks_svg(tracks: &TrackSet, gt: Option<&TrackSet>, area_x: f64, area_y: f64) -> String {
    let w = area_x * PX_PER_M + 2.0 * MARGIN;
    let h = area_y * PX_PER_M + 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + x * PX_PER_M;
    let sy = |y: f64| h - MARGIN - y * PX_PER_M;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        sx(0.0),
        sy(area_y),
        area_x * PX_PER_M,
        area_y * PX_PER_M
    );
    let step = tick_step(area_x.max(area_y));
    let mut t = 0.0;
    while t <= area_x + 1e-9 {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{t}</text>"#,
            sx(t),
            sy(0.0) + 14.0
        );
        t += step;
    }
    t = 0.0;
    while t <= area_y + 1e-9 {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{t}</text>"#,
            sx(0.0) - 4.0,
            sy(t) + 3.0
        );
        t += step;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">x (m)</text>"#,
        sx(area_x / 2.0),
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">y (m)</text>"#,
        sy(area_y / 2.0),
        sy(area_y / 2.0)
    );
    let line = |s: &mut String, pts: &[[f64; 2]], color: &str, width: f64, id: u64| {
        let coords: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p[0]), sy(p[1]))).collect();
        let _ = writeln!(
            s,
            r#"<polyline data-id="{id}" points="{}" fill="none" stroke="{color}" stroke-width="{width}"/>"#,
            coords.join(" ")
        );
    };
    if let Some(gt) = gt {
        let _ = writeln!(s, r#"<g class="gt">"#);
        for (id, pts) in polylines(gt) {
            line(&mut s, &pts, "#b0b0b0", 3.0, id);
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, r#"<g class="tracks">"#);
    for (id, pts) in polylines(tracks) {
        line(&mut s, &pts, &id_color(id), 1.5, id);
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

fn tick_step(extent: f64) -> f64 {
    [1.0, 2.0, 5.0, 10.0, 20.0, 50.0]
        .into_iter()
        .find(|&st| extent / st <= 10.0)
        .unwrap_or(100.0)
}

/// Binary 16-bit PGM: `P5`, maxval 65535, big-endian, one row per grid row.
/// Scores are clamped to `[0, 1]`.
pub fn heatmap_pgm(map: &OccupancyMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", map.cols(), map.rows()).into_bytes();
    out.reserve(2 * map.scores().len());
    for &v in map.scores() {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

// Anchors of the viridis ramp.
const RAMP: [(f64, [u8; 3]); 5] = [
    (0.0, [68, 1, 84]),
    (0.25, [59, 82, 139]),
    (0.5, [33, 145, 140]),
    (0.75, [94, 201, 98]),
    (1.0, [253, 231, 37]),
];

pub fn ramp_color(v: f64) -> [u8; 3] {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    for w in RAMP.windows(2) {
        let (a, ca) = w[0];
        let (b, cb) = w[1];
        if v <= b {
            let t = (v - a) / (b - a);
            let mix = |i: usize| (ca[i] as f64 + t * (cb[i] as f64 - ca[i] as f64)).round() as u8;
            return [mix(0), mix(1), mix(2)];
        }
    }
    RAMP[4].1
}

/// One rect per cell; grid rows run left to right, columns bottom to top.
pub fn heatmap_svg(map: &OccupancyMap, px_per_cell: f64) -> String {
    let (rows, cols) = (map.rows(), map.cols());
    let w = rows as f64 * px_per_cell;
    let h = cols as f64 * px_per_cell;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" shape-rendering="crispEdges">"#
    );
    for r in 0..rows {
        for c in 0..cols {
            let [cr, cg, cb] = ramp_color(map.get(r, c));
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="{px_per_cell}" height="{px_per_cell}" fill="#{cr:02x}{cg:02x}{cb:02x}"/>"##,
                r as f64 * px_per_cell,
                h - (c + 1) as f64 * px_per_cell
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
