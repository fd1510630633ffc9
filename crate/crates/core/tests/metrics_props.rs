mod common;

use bevtrack::metrics::*;
use common::*;
use proptest::prelude::*;

fn points(max: usize) -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((0.0f64..3.0, 0.0f64..3.0).prop_map(|(x, y)| [x, y]), 0..=max)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Identity pairing by exhaustive search over injections of GT ids into
/// prediction ids (both padded with dummies to equal size).
fn brute_force_idtp(gt: &TrackSet, pred: &TrackSet, r: f64) -> usize {
    let g: Vec<u64> = gt.ids().into_iter().collect();
    let p: Vec<u64> = pred.ids().into_iter().collect();
    let n = g.len().max(p.len());
    let overlap = |gi: usize, pi: usize| -> usize {
        if gi >= g.len() || pi >= p.len() {
            return 0;
        }
        gt.frames()
            .map(|f| {
                let a = gt.frame(f).iter().find(|(id, _)| *id == g[gi]);
                let b = pred.frame(f).iter().find(|(id, _)| *id == p[pi]);
                match (a, b) {
                    (Some(a), Some(b)) if dist(a.1, b.1) <= r => 1,
                    _ => 0,
                }
            })
            .sum()
    };
    permutations(n)
        .into_iter()
        .map(|perm| (0..n).map(|i| overlap(i, perm[i])).sum())
        .max()
        .unwrap_or(0)
}

fn set_strategy() -> impl Strategy<Value = (TrackSet, TrackSet)> {
    let frame = (
        prop::collection::vec(0.0f64..4.0, 3),
        prop::collection::vec((0u64..4, 0.0f64..4.0, 0.0f64..4.0, any::<bool>()), 0..4),
    );
    prop::collection::vec(frame, 1..8).prop_map(|frames| {
        let mut gt = TrackSet::new();
        let mut pred = TrackSet::new();
        for (f, (gys, preds)) in frames.into_iter().enumerate() {
            let f = f as u32;
            gt.touch(f);
            pred.touch(f);
            for (k, y) in gys.iter().enumerate() {
                gt.push(f, k as u64 + 1, [k as f64 * 1.5, *y]);
            }
            let mut used = std::collections::BTreeSet::new();
            for (id, x, y, snap) in preds {
                if !used.insert(id) {
                    continue;
                }
                // snap onto a GT point sometimes so matches are common
                let pos = if snap { [(id % 3) as f64 * 1.5 + 0.1, gys[(id % 3) as usize]] } else { [x, y] };
                pred.push(f, 100 + id, pos);
            }
        }
        (gt, pred)
    })
}

proptest! {
    #[test]
    fn frame_matching_is_optimal(gt in points(6), pred in points(6), r in 0.2f64..2.0) {
        let m = match_frame(&gt, &pred, r).unwrap();
        let (small, large) = if gt.len() <= pred.len() { (&gt, &pred) } else { (&pred, &gt) };
        let mut best = (0usize, 0.0f64);
        for perm in permutations(large.len()) {
            let mut count = 0;
            let mut total = 0.0;
            for (i, &j) in perm.iter().take(small.len()).enumerate() {
                let d = dist(small[i], large[j]);
                if d <= r {
                    count += 1;
                    total += d;
                }
            }
            if count > best.0 || (count == best.0 && total < best.1) {
                best = (count, total);
            }
        }
        prop_assert_eq!(m.pairs.len(), best.0);
        let total: f64 = m.pairs.iter().map(|p| p.2).sum();
        prop_assert!((total - best.1).abs() <= 1e-9);
        prop_assert_eq!(m.fn_count, gt.len() - best.0);
        prop_assert_eq!(m.fp_count, pred.len() - best.0);
    }

    #[test]
    fn idf1_matches_brute_force_pairing((gt, pred) in set_strategy()) {
        let id = idf1(&gt, &pred, 1.0).unwrap();
        let idtp = brute_force_idtp(&gt, &pred, 1.0);
        prop_assert_eq!(id.idtp, idtp);
        prop_assert_eq!(id.idf1, 2.0 * idtp as f64 / (gt.len() + pred.len()) as f64);
    }

    #[test]
    fn relabeling_predictions_changes_nothing((gt, pred) in set_strategy(), a in 100u64..104, b in 100u64..104) {
        let swapped = pred.relabeled(|id| if id == a { b } else if id == b { a } else { id });
        let x = evaluate(&gt, &pred, None, 0.5, 1.0, ModpMode::Normalized).unwrap();
        let y = evaluate(&gt, &swapped, None, 0.5, 1.0, ModpMode::Normalized).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn rigid_translation_keeps_mota((gt, pred) in set_strategy(), dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
        let shift = |s: &TrackSet| {
            let mut out = TrackSet::new();
            for f in s.frames() {
                out.touch(f);
                for &(id, [x, y]) in s.frame(f) {
                    out.push(f, id, [x + dx, y + dy]);
                }
            }
            out
        };
        let a = clear_mot(&gt, &pred, 1.0).unwrap();
        let b = clear_mot(&shift(&gt), &shift(&pred), 1.0).unwrap();
        prop_assert_eq!(a.mota, b.mota);
        prop_assert_eq!(a.idsw, b.idsw);
    }

    #[test]
    fn detection_metric_bounds((gt, pred) in set_strategy()) {
        let frames: Vec<_> = gt.frames().map(|f| (gt.points(f), pred.points(f))).collect();
        let m = detection_metrics(&frames, 0.5, ModpMode::Normalized).unwrap();
        prop_assert!((0.0..=1.0).contains(&m.precision) && (0.0..=1.0).contains(&m.recall));
        prop_assert!(m.moda <= 1.0);
        prop_assert_eq!(m.moda == 1.0, m.fn_ == 0 && m.fp == 0);
        prop_assert_eq!(m.tp + m.fn_, m.gt);
    }
}

#[test]
fn swap_fixture_trace() {
    let (gt, pred) = swap_fixture();
    let mot = clear_mot(&gt, &pred, 1.0).unwrap();
    // frames 1-5: 10 TPs under the first pairing; frame 6 both GT ids change
    // track (2 switches); frames 7-10 persist the new pairing
    assert_eq!((mot.tp, mot.fp, mot.fn_, mot.idsw, mot.gt), (20, 0, 0, 2, 20));
    assert_eq!(mot.mota, 0.9);
    assert_eq!(mot.motp, 1.0);
    assert_eq!((mot.mt, mot.ml), (1.0, 0.0));
    let id = idf1(&gt, &pred, 1.0).unwrap();
    assert_eq!((id.idtp, id.idfp, id.idfn), (10, 10, 10));
    assert_eq!(id.idf1, 0.5);
    assert_eq!(brute_force_idtp(&gt, &pred, 1.0), 10);
}

#[test]
fn persistence_beats_a_closer_newcomer() {
    // track 7 drifts 0.8 m off GT while track 8 sits exactly on it: the
    // established pairing is kept, so no switch and one FP
    let mut gt = TrackSet::new();
    let mut pred = TrackSet::new();
    gt.push(0, 1, [0.0, 0.0]);
    pred.push(0, 7, [0.0, 0.0]);
    gt.push(1, 1, [0.0, 1.0]);
    pred.push(1, 7, [0.8, 1.0]);
    pred.push(1, 8, [0.0, 1.0]);
    let mot = clear_mot(&gt, &pred, 1.0).unwrap();
    assert_eq!((mot.tp, mot.fp, mot.idsw), (2, 1, 0));
    assert!((mot.motp - (1.0 - 0.4)).abs() < 1e-12);
    assert_eq!(mot.mota, 0.5);
}

#[test]
fn single_id_change_over_a_hundred_points() {
    let mut gt = TrackSet::new();
    let mut pred = TrackSet::new();
    for f in 0..100u32 {
        gt.push(f, 1, [f as f64, 0.0]);
        pred.push(f, if f < 50 { 1 } else { 2 }, [f as f64, 0.0]);
    }
    let mot = clear_mot(&gt, &pred, 1.0).unwrap();
    assert_eq!(mot.idsw, 1);
    assert_eq!(mot.mota, 0.99);
}

#[test]
fn detection_examples() {
    let gt: Vec<[f64; 2]> = (0..10).map(|i| [i as f64 * 3.0, 0.0]).collect();
    let mut pred: Vec<[f64; 2]> = gt[1..].to_vec();
    pred.push([100.0, 0.0]);
    pred.push([200.0, 0.0]);
    let m = detection_metrics(&[(gt, pred)], 0.5, ModpMode::Normalized).unwrap();
    assert_eq!((m.fn_, m.fp), (1, 2));
    assert!((m.moda - 0.7).abs() < 1e-15);
    let m = detection_metrics(&[(vec![[0.0, 0.0]], vec![[0.25, 0.0]])], 0.5, ModpMode::Normalized).unwrap();
    assert_eq!(m.modp, 0.5);
    let m = detection_metrics(&[(vec![[0.0, 0.0]], vec![[0.25, 0.0]])], 0.5, ModpMode::MeanDistance).unwrap();
    assert_eq!(m.modp, 0.25);
    assert!(matches!(
        detection_metrics(&[(vec![], vec![[0.0, 0.0]])], 0.5, ModpMode::Normalized),
        Err(MetricsError::UndefinedMetric(_))
    ));
}

#[test]
fn perfect_and_empty_tracking() {
    let (gt, _) = swap_fixture();
    let r = evaluate(&gt, &gt, None, 0.5, 1.0, ModpMode::Normalized).unwrap();
    assert_eq!((r.moda, r.modp, r.precision, r.recall), (1.0, 1.0, 1.0, 1.0));
    assert_eq!((r.mota, r.motp, r.idf1, r.idsw, r.mt, r.ml), (1.0, 1.0, 1.0, 0, 1.0, 0.0));
    let none = TrackSet::new();
    assert_eq!(idf1(&gt, &none, 1.0).unwrap().idf1, 0.0);
    let mot = clear_mot(&gt, &none, 1.0).unwrap();
    assert_eq!((mot.mota, mot.ml), (0.0, 1.0));
    assert!(clear_mot(&none, &gt, 1.0).is_err());
}

#[test]
fn duplicate_ids_are_rejected() {
    let mut gt = TrackSet::new();
    gt.push(0, 1, [0.0, 0.0]);
    let mut pred = TrackSet::new();
    pred.push(0, 5, [0.0, 0.0]);
    pred.push(0, 5, [1.0, 0.0]);
    assert_eq!(clear_mot(&gt, &pred, 1.0), Err(MetricsError::DuplicateId { frame: 0, id: 5 }));
}

#[test]
fn tsv_uses_percentages() {
    let (gt, pred) = swap_fixture();
    let r = evaluate(&gt, &pred, None, 0.5, 1.0, ModpMode::Normalized).unwrap();
    let cols: Vec<String> = r.to_tsv().split('\t').map(str::to_owned).collect();
    assert_eq!(cols.len(), MetricsReport::TSV_HEADER.split('\t').count());
    assert_eq!(cols[4], "90.0");
    assert_eq!(cols[6], "50.0");
    assert_eq!(cols[9], "2");
    let json = serde_json::to_value(r).unwrap();
    assert_eq!(json["fn"], 0);
    assert_eq!(json["mota"], 0.9);
}
