//! Occupancy maps on the ground grid: Gaussian rendering, 3×3 max-pool NMS
//! and thresholded peak extraction with offset de-quantization.

use crate::geometry::{GridCoord, GroundGrid};

/// Default Gaussian spread for rendered targets, in cells.
pub const DEFAULT_SIGMA_CELLS: f64 = 1.0;
/// Default score threshold applied after NMS (strict `>`).
pub const DEFAULT_PEAK_THRESHOLD: f64 = 0.4;

/// Per-cell occupancy scores in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMap {
    grid: GroundGrid,
    scores: Vec<f64>,
}

impl OccupancyMap {
    pub fn zeros(grid: GroundGrid) -> Self {
        Self {
            grid,
            scores: vec![0.0; grid.len()],
        }
    }

    /// Builds a map from row-major scores. Returns `None` when the length does
    /// not match the grid or a score falls outside `[0, 1]`.
    pub fn from_scores(grid: GroundGrid, scores: Vec<f64>) -> Option<Self> {
        if scores.len() != grid.len() || scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return None;
        }
        Some(Self { grid, scores })
    }

    pub fn grid(&self) -> &GroundGrid {
        &self.grid
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.grid.cols + col]
    }

    pub fn rows(&self) -> usize {
        self.grid.rows
    }

    pub fn cols(&self) -> usize {
        self.grid.cols
    }

    pub fn max_score(&self) -> f64 {
        self.scores.iter().copied().fold(0.0, f64::max)
    }
}

/// Sub-cell offsets `(dx, dy)` in `[0, 1)` for every cell, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetField {
    rows: usize,
    cols: usize,
    offsets: Vec<(f64, f64)>,
}

impl OffsetField {
    /// Every cell resolved to its center.
    pub fn centered(grid: &GroundGrid) -> Self {
        Self::uniform(grid, 0.5, 0.5)
    }

    pub fn uniform(grid: &GroundGrid, dx: f64, dy: f64) -> Self {
        Self {
            rows: grid.rows,
            cols: grid.cols,
            offsets: vec![(dx, dy); grid.len()],
        }
    }

    pub fn from_offsets(grid: &GroundGrid, offsets: Vec<(f64, f64)>) -> Option<Self> {
        let in_range = |v: f64| (0.0..1.0).contains(&v);
        if offsets.len() != grid.len() || offsets.iter().any(|&(dx, dy)| !in_range(dx) || !in_range(dy)) {
            return None;
        }
        Some(Self {
            rows: grid.rows,
            cols: grid.cols,
            offsets,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> (f64, f64) {
        self.offsets[row * self.cols + col]
    }
}

/// A retained local maximum above threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub row: usize,
    pub col: usize,
    pub score: f64,
    pub offset_x: f64,
    pub offset_y: f64,
    pub world_x: f64,
    pub world_y: f64,
}

/// Renders `max_p exp(-d²/2σ²)` with `d` the distance, in cells, from each
/// cell center to point `p`. Points outside the grid still contribute their
/// in-grid tail.
pub fn render_heatmap(points: &[[f64; 2]], grid: &GroundGrid, sigma_cells: f64) -> OccupancyMap {
    assert!(sigma_cells > 0.0, "sigma_cells must be positive");
    let mut map = OccupancyMap::zeros(*grid);
    let inv = 1.0 / (2.0 * sigma_cells * sigma_cells);
    let cells: Vec<(f64, f64)> = points.iter().map(|p| grid.to_cell_units(p[0], p[1])).collect();
    for row in 0..grid.rows {
        let cr = row as f64 + 0.5;
        for col in 0..grid.cols {
            let cc = col as f64 + 0.5;
            let best = cells
                .iter()
                .map(|&(pr, pc)| {
                    let d2 = (cr - pr).powi(2) + (cc - pc).powi(2);
                    (-d2 * inv).exp()
                })
                .fold(0.0, f64::max);
            map.scores[row * grid.cols + col] = best;
        }
    }
    map
}

/// 3×3 max-pool suppression with truncated borders. A cell survives iff it
/// equals its neighborhood maximum and no equal neighbor precedes it in
/// `(row, col)` order.
pub fn nms_maxpool(map: &OccupancyMap) -> OccupancyMap {
    let (rows, cols) = (map.rows(), map.cols());
    let mut out = OccupancyMap::zeros(map.grid);
    for r in 0..rows {
        for c in 0..cols {
            let s = map.get(r, c);
            if s > 0.0 && is_local_max(map, r, c) {
                out.scores[r * cols + c] = s;
            }
        }
    }
    out
}

fn is_local_max(map: &OccupancyMap, r: usize, c: usize) -> bool {
    let s = map.get(r, c);
    for nr in r.saturating_sub(1)..=(r + 1).min(map.rows() - 1) {
        for nc in c.saturating_sub(1)..=(c + 1).min(map.cols() - 1) {
            if (nr, nc) == (r, c) {
                continue;
            }
            let n = map.get(nr, nc);
            if n > s || (n == s && (nr, nc) < (r, c)) {
                return false;
            }
        }
    }
    true
}

/// Applies [`nms_maxpool`] then keeps cells scoring strictly above
/// `threshold`, sorted by descending score (ties by `(row, col)`).
pub fn extract_peaks(map: &OccupancyMap, offsets: &OffsetField, threshold: f64) -> Vec<Peak> {
    assert_eq!(
        (offsets.rows, offsets.cols),
        (map.rows(), map.cols()),
        "offset field does not match the map"
    );
    let suppressed = nms_maxpool(map);
    let grid = map.grid;
    let mut peaks = Vec::new();
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            let score = suppressed.get(row, col);
            if score > threshold {
                let (offset_x, offset_y) = offsets.get(row, col);
                let [world_x, world_y] = grid
                    .grid_to_world(GridCoord { row, col, offset_x, offset_y })
                    .expect("cell is in bounds");
                peaks.push(Peak {
                    row,
                    col,
                    score,
                    offset_x,
                    offset_y,
                    world_x,
                    world_y,
                });
            }
        }
    }
    peaks.sort_by(|a, b| b.score.total_cmp(&a.score).then((a.row, a.col).cmp(&(b.row, b.col))));
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: usize, cols: usize) -> GroundGrid {
        GroundGrid::new(0.0, 0.0, 0.1, rows, cols).unwrap()
    }

    fn map_with(rows: usize, cols: usize, cells: &[(usize, usize, f64)]) -> OccupancyMap {
        let mut m = OccupancyMap::zeros(grid(rows, cols));
        for &(r, c, s) in cells {
            m.scores[r * cols + c] = s;
        }
        m
    }

    #[test]
    fn render_peak_and_neighbor() {
        let g = grid(5, 5);
        let center = g.cell_center(2, 2);
        let m = render_heatmap(&[center], &g, 1.0);
        assert!((m.get(2, 2) - 1.0).abs() < 1e-12);
        assert!((m.get(2, 3) - (-0.5f64).exp()).abs() < 1e-12);
        assert!((m.get(1, 2) - 0.6065306597126334).abs() < 1e-12);
    }

    #[test]
    fn render_max_not_sum() {
        let g = grid(6, 6);
        let p = [0.23, 0.31];
        assert_eq!(render_heatmap(&[p], &g, 1.0), render_heatmap(&[p, p], &g, 1.0));
    }

    #[test]
    fn render_empty_and_outside() {
        let g = grid(4, 4);
        assert_eq!(render_heatmap(&[], &g, 1.0).max_score(), 0.0);
        // one cell beyond the last row still lights the border
        let m = render_heatmap(&[[0.45, 0.05]], &g, 1.0);
        assert!((m.get(3, 0) - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn nms_cases() {
        let m = nms_maxpool(&map_with(3, 3, &[(1, 1, 0.9)]));
        assert_eq!(m.get(1, 1), 0.9);

        let m = nms_maxpool(&map_with(3, 3, &[(1, 1, 0.9), (1, 2, 0.8)]));
        assert_eq!((m.get(1, 1), m.get(1, 2)), (0.9, 0.0));

        let m = nms_maxpool(&map_with(3, 3, &[(1, 1, 0.9), (1, 2, 0.9)]));
        assert_eq!((m.get(1, 1), m.get(1, 2)), (0.9, 0.0));

        let m = nms_maxpool(&map_with(3, 3, &[(0, 2, 0.9), (1, 1, 0.9)]));
        assert_eq!((m.get(0, 2), m.get(1, 1)), (0.9, 0.0));
    }

    #[test]
    fn nms_plateau_keeps_one() {
        let m = nms_maxpool(&map_with(3, 4, &[(1, 0, 0.7), (1, 1, 0.7), (1, 2, 0.7), (1, 3, 0.7)]));
        let kept: Vec<_> = (0..4).filter(|&c| m.get(1, c) > 0.0).collect();
        assert_eq!(kept, vec![0]);
    }

    #[test]
    fn peaks_below_threshold_are_dropped() {
        let m = map_with(4, 4, &[(1, 1, 0.39), (3, 3, 0.4)]);
        assert!(extract_peaks(&m, &OffsetField::centered(m.grid()), 0.4).is_empty());
    }

    #[test]
    fn peak_world_position_uses_offset() {
        let m = map_with(4, 4, &[(2, 1, 0.9)]);
        let peaks = extract_peaks(&m, &OffsetField::centered(m.grid()), 0.4);
        assert_eq!(peaks.len(), 1);
        let p = peaks[0];
        assert!((p.world_x - 0.25).abs() < 1e-12 && (p.world_y - 0.15).abs() < 1e-12);
        assert_eq!((p.row, p.col, p.score), (2, 1, 0.9));
    }

    #[test]
    fn peaks_sorted_descending() {
        let m = map_with(6, 6, &[(0, 0, 0.5), (3, 3, 0.95), (5, 0, 0.7)]);
        let peaks = extract_peaks(&m, &OffsetField::centered(m.grid()), 0.4);
        let scores: Vec<f64> = peaks.iter().map(|p| p.score).collect();
        assert_eq!(scores, vec![0.95, 0.7, 0.5]);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let g = grid(2, 2);
        assert!(OccupancyMap::from_scores(g, vec![0.0; 3]).is_none());
        assert!(OccupancyMap::from_scores(g, vec![0.0, 0.0, 1.5, 0.0]).is_none());
        assert!(OffsetField::from_offsets(&g, vec![(0.0, 1.0); 4]).is_none());
    }
}
