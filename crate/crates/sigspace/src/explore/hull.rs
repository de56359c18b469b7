//! ROC convex hull and Pareto staircase.
//!
//! `roc_hull` is the frontier used everywhere: inversion-replacement of
//! below-diagonal points, anchors injected, Graham scan, and the upper-left
//! chain returned in fpr order. The raw non-dominated staircase is exposed
//! separately for reporting; it never feeds area computations.

use crate::metrics::{invert, RocPoint};

/// Label of the injected (0,0) anchor (flag nothing).
pub const ALLOW_ALL_LABEL: &str = "allow-all";
/// Label of the injected (1,1) anchor (flag everything).
pub const BLOCK_ALL_LABEL: &str = "block-all";

pub fn is_anchor(p: &RocPoint) -> bool {
    (p.fpr == 0.0 && p.tpr == 0.0) || (p.fpr == 1.0 && p.tpr == 1.0)
}

/// The point as it participates in hulls: inverted when below the diagonal,
/// with -0.0 normalized so coordinate equality is usable as identity.
pub fn effective(p: &RocPoint) -> RocPoint {
    let mut e = if p.fpr > p.tpr { invert(p) } else { p.clone() };
    e.fpr += 0.0;
    e.tpr += 0.0;
    e
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn xy(p: &RocPoint) -> (f64, f64) {
    (p.fpr, p.tpr)
}

/// Convex-hull frontier of `points` with (0,0) and (1,1) always included:
/// the chain from (0,0) to (1,1), fpr ascending, collinear interior points
/// dropped. Coordinates must be finite and in the unit square.
pub fn roc_hull(points: &[RocPoint]) -> Vec<RocPoint> {
    let mut all: Vec<RocPoint> = points.iter().map(effective).collect();
    all.push(RocPoint::labeled(0.0, 0.0, ALLOW_ALL_LABEL));
    all.push(RocPoint::labeled(1.0, 1.0, BLOCK_ALL_LABEL));
    debug_assert!(all
        .iter()
        .all(|p| (0.0..=1.0).contains(&p.fpr) && (0.0..=1.0).contains(&p.tpr)));

    // exact-coordinate dedup, first occurrence keeps its label
    let mut uniq: Vec<RocPoint> = Vec::with_capacity(all.len());
    for p in all {
        if !uniq.iter().any(|q| q.fpr == p.fpr && q.tpr == p.tpr) {
            uniq.push(p);
        }
    }

    // pivot is (0,0): minimal in both coordinates, guaranteed present
    let pivot_idx = uniq
        .iter()
        .position(|p| p.fpr == 0.0 && p.tpr == 0.0)
        .expect("anchor injected");
    uniq.swap(0, pivot_idx);
    let pivot = uniq[0].clone();
    let origin = xy(&pivot);
    uniq[1..].sort_by(|a, b| {
        let c = cross(origin, xy(a), xy(b));
        if c > 0.0 {
            std::cmp::Ordering::Less
        } else if c < 0.0 {
            std::cmp::Ordering::Greater
        } else {
            let da = a.fpr * a.fpr + a.tpr * a.tpr;
            let db = b.fpr * b.fpr + b.tpr * b.tpr;
            da.total_cmp(&db)
        }
    });

    // strict left turns only: collinear points fall off the hull
    let mut stack: Vec<RocPoint> = vec![pivot];
    for p in &uniq[1..] {
        while stack.len() >= 2
            && cross(xy(&stack[stack.len() - 2]), xy(&stack[stack.len() - 1]), xy(p)) <= 0.0
        {
            stack.pop();
        }
        stack.push(p.clone());
    }

    // counterclockwise hull starts (0,0) -> (1,1) -> upper chain right-to-left;
    // reversing the tail yields the fpr-ascending frontier
    let mut frontier = vec![stack[0].clone()];
    frontier.extend(stack[1..].iter().rev().cloned());
    frontier
}

/// Raw non-dominated set of the input points (no inversion, no anchors),
/// sorted by fpr. Exact duplicates keep the first occurrence.
pub fn pareto_staircase(points: &[RocPoint]) -> Vec<RocPoint> {
    let mut uniq: Vec<RocPoint> = Vec::with_capacity(points.len());
    for p in points {
        if !uniq.iter().any(|q| q.fpr == p.fpr && q.tpr == p.tpr) {
            uniq.push(p.clone());
        }
    }
    uniq.sort_by(|a, b| a.fpr.total_cmp(&b.fpr).then(b.tpr.total_cmp(&a.tpr)));
    let mut out: Vec<RocPoint> = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for p in uniq {
        if p.tpr > best {
            best = p.tpr;
            out.push(p);
        }
    }
    out
}
