//! Planar polygon helpers over closed rings.
//!
//! A ring is a slice of vertices without a repeated closing vertex; the edge
//! from the last vertex back to the first is implied.

use super::point::Point2;

/// Shoelace area, positive for counterclockwise rings.
pub fn signed_area(ring: &[Point2]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += ring[i].cross(ring[(i + 1) % n]);
    }
    acc * 0.5
}

pub fn perimeter(ring: &[Point2]) -> f64 {
    let n = ring.len();
    (0..n).map(|i| ring[i].dist(ring[(i + 1) % n])).sum()
}

/// Even-odd point containment. Points exactly on the boundary may land on
/// either side.
pub fn contains(ring: &[Point2], p: Point2) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let a = ring[i];
        let b = ring[j];
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    p.dist(closest_on_segment(p, a, b))
}

pub fn closest_on_segment(p: Point2, a: Point2, b: Point2) -> Point2 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Unsigned distance from `p` to the ring's boundary.
pub fn boundary_distance(ring: &[Point2], p: Point2) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| segment_distance(p, ring[i], ring[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Positive inside, negative outside.
pub fn signed_boundary_distance(ring: &[Point2], p: Point2) -> f64 {
    let d = boundary_distance(ring, p);
    if contains(ring, p) {
        d
    } else {
        -d
    }
}

/// Area centroid; falls back to the vertex mean for degenerate rings.
pub fn centroid(ring: &[Point2]) -> Point2 {
    let n = ring.len();
    let a = signed_area(ring);
    if n == 0 {
        return Point2::default();
    }
    if a.abs() < 1e-12 {
        let s = ring.iter().fold(Point2::default(), |s, &p| s + p);
        return s * (1.0 / n as f64);
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = ring[i];
        let q = ring[(i + 1) % n];
        let c = p.cross(q);
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    Point2::new(cx / (6.0 * a), cy / (6.0 * a))
}

/// Andrew's monotone chain. Returns a counterclockwise hull without
/// collinear points.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if (b - a).cross(p - a) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Proper intersection of segments `a0a1` and `b0b1`, as parameters along
/// each. Parallel segments never intersect here.
pub fn segment_intersection(a0: Point2, a1: Point2, b0: Point2, b1: Point2) -> Option<(f64, f64)> {
    let r = a1 - a0;
    let s = b1 - b0;
    let denom = r.cross(s);
    if denom.abs() < 1e-300 {
        return None;
    }
    let qp = b0 - a0;
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((t, u))
    } else {
        None
    }
}

/// Drop consecutive vertices closer than `tol` (including across the seam).
pub fn dedup_ring(ring: &mut Vec<Point2>, tol: f64) {
    ring.dedup_by(|b, a| a.dist(*b) <= tol);
    while ring.len() > 1 && ring[0].dist(ring[ring.len() - 1]) <= tol {
        ring.pop();
    }
}
