#![allow(dead_code)]

use bevtrack::assoc::{KalmanNoise, TrackRow, Tracker, TrackerConfig};
use bevtrack::metrics::TrackSet;
use bevtrack::sim::DetectionRecord;
use rand::Rng;

/// Best `(matched count, total cost)` over every partial injection of rows
/// into columns using only finite entries: most matches first, then least cost.
pub fn brute_force_assignment(cost: &[Vec<f64>], cols: usize) -> (usize, f64) {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, count: usize, total: f64, best: &mut (usize, f64)) {
        if row == cost.len() {
            if count > best.0 || (count == best.0 && total < best.1) {
                *best = (count, total);
            }
            return;
        }
        go(cost, row + 1, used, count, total, best);
        for c in 0..used.len() {
            if !used[c] && cost[row][c].is_finite() {
                used[c] = true;
                go(cost, row + 1, used, count + 1, total + cost[row][c], best);
                used[c] = false;
            }
        }
    }
    let mut best = (0, 0.0);
    go(cost, 0, &mut vec![false; cols], 0, 0.0, &mut best);
    best
}

pub type Mat = Vec<Vec<f64>>;

pub fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            for t in 0..k {
                out[i][j] += a[i][t] * b[t][j];
            }
        }
    }
    out
}

pub fn transpose(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

pub fn mat_add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect()
}

pub fn mat_sub(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect()
}

pub fn diag(v: &[f64]) -> Mat {
    (0..v.len())
        .map(|i| (0..v.len()).map(|j| if i == j { v[i] } else { 0.0 }).collect())
        .collect()
}

pub fn inv2(s: &Mat) -> Mat {
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    vec![vec![s[1][1] / det, -s[0][1] / det], vec![-s[1][0] / det, s[0][0] / det]]
}

/// Textbook constant-velocity Kalman filter written out term by term.
#[derive(Clone, Debug)]
pub struct OracleKalman {
    pub x: Vec<f64>,
    pub p: Mat,
    noise: KalmanNoise,
}

impl OracleKalman {
    fn f() -> Mat {
        vec![
            vec![1.0, 0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ]
    }

    fn h() -> Mat {
        vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]
    }

    pub fn initiate(noise: KalmanNoise, z: [f64; 2]) -> Self {
        let (p, v) = (noise.init_pos_std.powi(2), noise.init_vel_std.powi(2));
        Self {
            x: vec![z[0], z[1], 0.0, 0.0],
            p: diag(&[p, p, v, v]),
            noise,
        }
    }

    pub fn predict(&mut self) {
        let f = Self::f();
        let x = mat_mul(&f, &self.x.iter().map(|v| vec![*v]).collect());
        self.x = x.into_iter().map(|r| r[0]).collect();
        let (qp, qv) = (self.noise.process_pos_std.powi(2), self.noise.process_vel_std.powi(2));
        self.p = mat_add(&mat_mul(&mat_mul(&f, &self.p), &transpose(&f)), &diag(&[qp, qp, qv, qv]));
    }

    pub fn innovation(&self, z: [f64; 2]) -> (Vec<f64>, Mat) {
        let h = Self::h();
        let r = self.noise.measurement_std.powi(2);
        let s = mat_add(&mat_mul(&mat_mul(&h, &self.p), &transpose(&h)), &diag(&[r, r]));
        (vec![z[0] - self.x[0], z[1] - self.x[1]], s)
    }

    pub fn mahalanobis_sq(&self, z: [f64; 2]) -> f64 {
        let (y, s) = self.innovation(z);
        let si = inv2(&s);
        y[0] * (si[0][0] * y[0] + si[0][1] * y[1]) + y[1] * (si[1][0] * y[0] + si[1][1] * y[1])
    }

    pub fn update(&mut self, z: [f64; 2]) {
        let h = Self::h();
        let (y, s) = self.innovation(z);
        let k = mat_mul(&mat_mul(&self.p, &transpose(&h)), &inv2(&s));
        for i in 0..4 {
            self.x[i] += k[i][0] * y[0] + k[i][1] * y[1];
        }
        let ikh = mat_sub(&diag(&[1.0; 4]), &mat_mul(&k, &h));
        self.p = mat_mul(&ikh, &self.p);
    }
}

pub fn random_noise<R: Rng>(rng: &mut R) -> KalmanNoise {
    KalmanNoise {
        init_pos_std: rng.random_range(0.05..2.0),
        init_vel_std: rng.random_range(0.05..2.0),
        process_pos_std: rng.random_range(0.01..0.5),
        process_vel_std: rng.random_range(0.01..0.8),
        measurement_std: rng.random_range(0.02..0.5),
    }
}

/// Two GT identities 5 m apart for frames 1..=10, predictions exact but with
/// their ids exchanged from frame 6 on.
pub fn swap_fixture() -> (TrackSet, TrackSet) {
    let mut gt = TrackSet::new();
    let mut pred = TrackSet::new();
    for f in 1..=10u32 {
        let a = [0.0, f as f64 * 0.3];
        let b = [5.0, f as f64 * 0.3];
        gt.push(f, 1, a);
        gt.push(f, 2, b);
        let (ia, ib) = if f < 6 { (10, 20) } else { (20, 10) };
        pred.push(f, ia, a);
        pred.push(f, ib, b);
    }
    (gt, pred)
}

pub fn unit(dim: usize, axis: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[axis] = 1.0;
    v
}

pub fn det(frame: u32, pos: [f64; 2], emb: &[f64]) -> DetectionRecord {
    DetectionRecord {
        frame,
        x: pos[0],
        y: pos[1],
        score: 0.9,
        embedding: emb.to_vec(),
    }
}

/// One identity seen on frames `0..=4`, absent for `gap` frames, then seen
/// again for three frames, moving at `velocity` m/frame throughout. Returns
/// the track ids reported on each detected frame.
pub fn gap_stream_ids(gap: u32, velocity: [f64; 2]) -> Vec<(u32, u64)> {
    let mut tracker = Tracker::new(TrackerConfig::default()).unwrap();
    let emb = unit(8, 0);
    let at = |f: u32| [2.0 + velocity[0] * f as f64, 3.0 + velocity[1] * f as f64];
    let mut ids = Vec::new();
    let last = 5 + gap + 3;
    for f in 0..last {
        let visible = f < 5 || f >= 5 + gap;
        let dets = if visible { vec![det(f, at(f), &emb)] } else { vec![] };
        for row in tracker.step(f, &dets).unwrap() {
            ids.push((row.frame, row.track_id));
        }
    }
    ids
}

pub fn rows_to_set(rows: &[TrackRow]) -> TrackSet {
    let mut s = TrackSet::new();
    for r in rows {
        s.push(r.frame, r.track_id, [r.x, r.y]);
    }
    s
}
