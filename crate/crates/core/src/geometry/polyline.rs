//! Closed polylines: winding numbers and segment-intersection queries.
//!
//! Intersection queries bucket segments into a uniform grid so that dense
//! offset polylines (thousands of segments) can be tested repeatedly during
//! the tube-width bisection.

use super::vec2::{cross, sub, Vec2};

/// Winding number of the closed polyline `poly` around `p`.
pub fn winding_number(poly: &[Vec2], p: Vec2) -> i32 {
    let n = poly.len();
    let mut w = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if a[1] <= p[1] {
            if b[1] > p[1] && cross(sub(b, a), sub(p, a)) > 0.0 {
                w += 1;
            }
        } else if b[1] <= p[1] && cross(sub(b, a), sub(p, a)) < 0.0 {
            w -= 1;
        }
    }
    w
}

/// Shoelace area of a closed polyline (positive for counter-clockwise).
pub fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| cross(poly[i], poly[(i + 1) % n]))
        .sum::<f64>()
        * 0.5
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    cross(sub(b, a), sub(c, a))
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test (touching and collinear overlap count).
pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

struct Segment {
    a: Vec2,
    b: Vec2,
    poly: usize,
    index: usize,
    fixed: bool,
}

/// Returns true when any segment of the `moving` closed polylines crosses
/// another moving segment (adjacent segments of the same polyline excluded)
/// or a segment of the `fixed` closed polylines. Fixed–fixed pairs are never
/// tested.
pub fn closed_polylines_intersect(moving: &[Vec<Vec2>], fixed: &[Vec<Vec2>]) -> bool {
    let mut segs = Vec::new();
    let mut lens = Vec::new();
    for (group, is_fixed) in [(moving, false), (fixed, true)] {
        for poly in group {
            let id = lens.len();
            let n = poly.len();
            lens.push(n);
            for i in 0..n {
                segs.push(Segment {
                    a: poly[i],
                    b: poly[(i + 1) % n],
                    poly: id,
                    index: i,
                    fixed: is_fixed,
                });
            }
        }
    }
    if segs.len() < 2 {
        return false;
    }

    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for s in &segs {
        for p in [s.a, s.b] {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
    }
    let g = ((segs.len() as f64).sqrt().ceil() as usize).clamp(1, 512);
    let width = [
        ((hi[0] - lo[0]) / g as f64).max(f64::MIN_POSITIVE),
        ((hi[1] - lo[1]) / g as f64).max(f64::MIN_POSITIVE),
    ];
    let cell = |x: f64, d: usize| (((x - lo[d]) / width[d]) as usize).min(g - 1);

    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); g * g];
    for (id, s) in segs.iter().enumerate() {
        let (x0, x1) = (cell(s.a[0].min(s.b[0]), 0), cell(s.a[0].max(s.b[0]), 0));
        let (y0, y1) = (cell(s.a[1].min(s.b[1]), 1), cell(s.a[1].max(s.b[1]), 1));
        for cx in x0..=x1 {
            for cy in y0..=y1 {
                buckets[cx * g + cy].push(id);
            }
        }
    }

    for bucket in &buckets {
        for (k, &i) in bucket.iter().enumerate() {
            for &j in &bucket[k + 1..] {
                let (s, t) = (&segs[i], &segs[j]);
                if s.fixed && t.fixed {
                    continue;
                }
                if s.poly == t.poly {
                    let n = lens[s.poly];
                    let gap = s.index.abs_diff(t.index);
                    if gap <= 1 || gap == n - 1 {
                        continue;
                    }
                }
                if segments_intersect(s.a, s.b, t.a, t.b) {
                    return true;
                }
            }
        }
    }
    false
}
