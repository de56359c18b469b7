//! Brute-force ROC frontier oracle. Gift-wraps the upper-left chain from
//! (0,0) to (1,1) with exact rational cross products, so collinear and
//! duplicate inputs cannot be misclassified by rounding. O(n^3) worst case;
//! deliberately shares no code with the production Graham scan.

use num_rational::BigRational;
use num_traits::Signed;

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite coordinate")
}

fn cross_sign(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> i32 {
    let v = (rat(b.0) - rat(a.0)) * (rat(c.1) - rat(a.1))
        - (rat(b.1) - rat(a.1)) * (rat(c.0) - rat(a.0));
    if v.is_positive() {
        1
    } else if v.is_negative() {
        -1
    } else {
        0
    }
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> BigRational {
    let dx = rat(b.0) - rat(a.0);
    let dy = rat(b.1) - rat(a.1);
    dx.clone() * dx + dy.clone() * dy
}

/// The point set the frontier is actually built over: raw points after the
/// bad-classifier inversion, plus the two anchors, exact-deduplicated.
fn effective_points(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut set: Vec<(f64, f64)> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut all: Vec<(f64, f64)> = points
        .iter()
        .map(|&(f, t)| if f > t { (1.0 - f, 1.0 - t) } else { (f, t) })
        // adding +0.0 canonicalizes a -0.0 produced by the inversion
        .map(|(f, t)| (f + 0.0, t + 0.0))
        .collect();
    all.push((0.0, 0.0));
    all.push((1.0, 1.0));
    for p in all {
        if seen.insert((p.0.to_bits(), p.1.to_bits())) {
            set.push(p);
        }
    }
    set
}

/// Expected frontier for raw classifier points: applies the bad-classifier
/// inversion, adds the two anchors, dedups exact coordinates, then wraps.
/// Returns the fpr-ascending vertex chain.
pub fn oracle_frontier(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let set = effective_points(points);
    let start = (0.0f64, 0.0f64);
    let goal = (1.0f64, 1.0f64);
    let mut chain = vec![start];
    let mut cur = start;
    while cur != goal {
        let mut best: Option<(f64, f64)> = None;
        for &cand in &set {
            if cand == cur {
                continue;
            }
            best = match best {
                None => Some(cand),
                Some(b) => {
                    let s = cross_sign(cur, b, cand);
                    // keep the most counterclockwise candidate; on exact
                    // collinearity keep the farthest, which drops interior
                    // collinear points from the chain
                    if s > 0 || (s == 0 && dist2(cur, cand) > dist2(cur, b)) {
                        Some(cand)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let next = best.expect("goal is always reachable");
        chain.push(next);
        cur = next;
        assert!(
            chain.len() <= set.len() + 1,
            "gift wrap failed to terminate"
        );
    }
    chain
}

/// Exhaustive certificate that `chain` is the upper frontier of `points`:
/// it must run from (0,0) to (1,1) through effective points only, turn
/// strictly clockwise at every interior vertex, and keep every effective
/// point weakly below every edge. Checks every point against every edge in
/// exact arithmetic, independent of how either hull was constructed.
pub fn assert_frontier_certificate(points: &[(f64, f64)], chain: &[(f64, f64)]) {
    let set = effective_points(points);
    let member = |p: (f64, f64)| {
        set.iter()
            .any(|q| q.0.to_bits() == p.0.to_bits() && q.1.to_bits() == p.1.to_bits())
    };

    assert!(chain.len() >= 2, "frontier lost an anchor: {chain:?}");
    assert_eq!(chain[0], (0.0, 0.0), "frontier must start at the origin");
    assert_eq!(*chain.last().unwrap(), (1.0, 1.0), "frontier must end at (1,1)");
    for p in chain {
        assert!(member(*p), "hull vertex {p:?} is not an input point");
    }
    for w in chain.windows(2) {
        assert!(
            w[0].0 <= w[1].0,
            "fpr must not decrease along the chain: {:?} -> {:?}",
            w[0],
            w[1]
        );
        for &p in &set {
            assert!(
                cross_sign(w[0], w[1], p) <= 0,
                "point {p:?} lies above hull edge {:?} -> {:?}",
                w[0],
                w[1]
            );
        }
    }
    for w in chain.windows(3) {
        assert!(
            cross_sign(w[0], w[1], w[2]) < 0,
            "collinear or reflex vertex in hull: {w:?}"
        );
    }
}
