//! Polygon offsetting by shifted edges with self-intersection cleanup.
//!
//! The raw offset curve joins shifted edges with miters where neighbouring
//! edges overlap and with arcs where they open a gap. The raw curve is then
//! split at its self-intersections into non-crossing loops; a loop survives
//! if it bounds the positive-winding part of the curve and every vertex sits
//! at least the offset distance from the source boundary.

use super::layer::{Contour, Orientation};
use super::point::Point2;
use super::polygon;

/// Arc joins are sampled at most this many radians apart.
const ARC_STEP: f64 = std::f64::consts::PI / 16.0;
/// Intersection parameters closer than this to a segment end are ignored.
const PARAM_EPS: f64 = 1e-12;

/// Offsets a contour toward its material side (`distance > 0`) or away from
/// it (`distance < 0`). Outer contours shrink under a positive distance;
/// holes grow. The result may split or vanish.
pub fn offset_contour(contour: &Contour, distance: f64) -> Vec<Contour> {
    let mut ring = contour.vertices.clone();
    polygon::dedup_ring(&mut ring, 1e-9);
    if ring.len() < 3 {
        return Vec::new();
    }
    if polygon::signed_area(&ring) < 0.0 {
        ring.reverse();
    }
    if distance == 0.0 {
        return vec![contour.clone()];
    }
    // `ring` is now counterclockwise; a positive shift moves edges left (inside).
    let shift = if contour.is_outer() { distance } else { -distance };
    offset_ccw_ring(&ring, shift)
        .into_iter()
        .map(|r| {
            let ccw = polygon::signed_area(&r) > 0.0;
            // A grown hole's CCW loop is still a hole of the region.
            let o = if ccw == contour.is_outer() {
                Orientation::Outer
            } else {
                Orientation::Hole
            };
            Contour::new(r, contour.z, o)
        })
        .collect()
}

/// Offsets a counterclockwise ring by `shift` (positive = inward). Returned
/// rings keep their natural winding: CCW for material, CW for cavities.
pub fn offset_ccw_ring(ring: &[Point2], shift: f64) -> Vec<Vec<Point2>> {
    let raw = raw_offset(ring, shift);
    if raw.len() < 3 {
        return Vec::new();
    }
    let loops = uncross(&raw);
    let orient: Vec<f64> = loops.iter().map(|l| polygon::signed_area(l)).collect();
    let tol = 1e-9 + 1e-9 * shift.abs();
    let mut out = Vec::new();
    for (i, l) in loops.iter().enumerate() {
        let a = orient[i];
        if a.abs() < 1e-10 {
            continue;
        }
        let probe = probe_inside(l);
        let w_out: i32 = loops
            .iter()
            .enumerate()
            .filter(|&(j, o)| j != i && orient[j].abs() >= 1e-10 && polygon::contains(o, probe))
            .map(|(j, _)| if orient[j] > 0.0 { 1 } else { -1 })
            .sum();
        let boundary = if a > 0.0 { w_out == 0 } else { w_out == 1 };
        if !boundary {
            continue;
        }
        let valid = l.iter().all(|&v| {
            let d = polygon::boundary_distance(ring, v);
            let inside = polygon::contains(ring, v);
            d >= shift.abs() - tol && (inside == (shift > 0.0) || d <= tol)
        });
        if valid {
            let mut l = l.clone();
            polygon::dedup_ring(&mut l, 1e-9);
            if l.len() >= 3 {
                out.push(l);
            }
        }
    }
    out
}

fn raw_offset(ring: &[Point2], shift: f64) -> Vec<Point2> {
    let n = ring.len();
    let dir: Vec<Point2> = (0..n)
        .map(|i| {
            let d = ring[(i + 1) % n] - ring[i];
            d * (1.0 / d.norm())
        })
        .collect();
    let normal: Vec<Point2> = dir.iter().map(|d| d.perp()).collect();
    let mut out = Vec::with_capacity(n * 2);
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let p = ring[i];
        let (n0, n1) = (normal[prev], normal[i]);
        let turn = dir[prev].cross(dir[i]);
        let cos = n0.dot(n1);
        if turn.abs() < 1e-12 && cos > 0.0 {
            out.push(p + n1 * shift);
        } else if turn * shift > 0.0 {
            // Shifted edges overlap: meet at their lines' intersection.
            out.push(p + (n0 + n1) * (shift / (1.0 + cos)));
        } else {
            // Shifted edges open a gap: round it over the vertex. The join
            // sweeps by the corner's turning angle.
            let sign = shift.signum();
            let m0 = n0 * sign;
            let a0 = m0.y.atan2(m0.x);
            let sweep = if turn.abs() < 1e-12 {
                -sign * std::f64::consts::PI
            } else {
                turn.atan2(dir[prev].dot(dir[i]))
            };
            // Circumscribed samples: every chord is tangent to the circle, so
            // no point of the join comes closer than the offset distance.
            let steps = ((sweep.abs() / ARC_STEP).ceil() as usize).max(1);
            let step = sweep / steps as f64;
            let r = shift.abs();
            let outer_r = r / (step * 0.5).cos();
            let at = |a: f64, rad: f64| p + Point2::new(a.cos(), a.sin()) * rad;
            out.push(at(a0, r));
            for k in 0..steps {
                out.push(at(a0 + step * (k as f64 + 0.5), outer_r));
            }
            out.push(at(a0 + sweep, r));
        }
    }
    polygon::dedup_ring(&mut out, 1e-12);
    out
}

/// Splits a closed, possibly self-intersecting curve into loops that touch
/// but never cross, by swapping continuations at each crossing.
fn uncross(raw: &[Point2]) -> Vec<Vec<Point2>> {
    let n = raw.len();
    let seg_box = |i: usize| {
        let (a, b) = (raw[i], raw[(i + 1) % n]);
        (a.x.min(b.x), a.x.max(b.x), a.y.min(b.y), a.y.max(b.y))
    };
    let boxes: Vec<_> = (0..n).map(seg_box).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| boxes[a].0.total_cmp(&boxes[b].0));
    // Per segment: (param, node id, point).
    let mut hits: Vec<Vec<(f64, usize, Point2)>> = vec![Vec::new(); n];
    let mut nodes = 0usize;
    for (oi, &i) in order.iter().enumerate() {
        for &j in &order[oi + 1..] {
            if boxes[j].0 > boxes[i].1 {
                break;
            }
            let (lo, hi) = (i.min(j), i.max(j));
            if hi == lo + 1 || (lo == 0 && hi == n - 1) {
                continue;
            }
            if boxes[i].2 > boxes[j].3 || boxes[j].2 > boxes[i].3 {
                continue;
            }
            let (a0, a1) = (raw[lo], raw[(lo + 1) % n]);
            let (b0, b1) = (raw[hi], raw[(hi + 1) % n]);
            if let Some((t, u)) = polygon::segment_intersection(a0, a1, b0, b1) {
                let inner = |s: f64| s > PARAM_EPS && s < 1.0 - PARAM_EPS;
                if inner(t) && inner(u) {
                    let p = a0.lerp(a1, t);
                    hits[lo].push((t, nodes, p));
                    hits[hi].push((u, nodes, p));
                    nodes += 1;
                }
            }
        }
    }
    if nodes == 0 {
        return vec![raw.to_vec()];
    }
    let mut seq: Vec<(Point2, Option<usize>)> = Vec::with_capacity(n + 2 * nodes);
    for (i, h) in hits.iter_mut().enumerate() {
        seq.push((raw[i], None));
        h.sort_by(|a, b| a.0.total_cmp(&b.0));
        seq.extend(h.iter().map(|&(_, id, p)| (p, Some(id))));
    }
    let mut partner_of_node: Vec<[usize; 2]> = vec![[usize::MAX; 2]; nodes];
    for (pos, &(_, id)) in seq.iter().enumerate() {
        if let Some(id) = id {
            let slot = &mut partner_of_node[id];
            if slot[0] == usize::MAX {
                slot[0] = pos;
            } else {
                slot[1] = pos;
            }
        }
    }
    let partner = |pos: usize| -> Option<usize> {
        seq[pos].1.map(|id| {
            let s = partner_of_node[id];
            if s[0] == pos {
                s[1]
            } else {
                s[0]
            }
        })
    };
    let len = seq.len();
    let mut used = vec![false; len];
    let mut loops = Vec::new();
    for start in 0..len {
        if used[start] {
            continue;
        }
        let mut pts = Vec::new();
        let mut p = start;
        loop {
            used[p] = true;
            pts.push(seq[p].0);
            let mut q = (p + 1) % len;
            if let Some(other) = partner(q) {
                q = other;
            }
            if q == start || used[q] {
                break;
            }
            p = q;
        }
        if pts.len() >= 3 {
            loops.push(pts);
        }
    }
    loops
}

/// A point just inside the loop (on the side its winding encloses), next to
/// its longest edge.
fn probe_inside(ring: &[Point2]) -> Point2 {
    let n = ring.len();
    let i = (0..n)
        .max_by(|&a, &b| {
            ring[a]
                .dist(ring[(a + 1) % n])
                .total_cmp(&ring[b].dist(ring[(b + 1) % n]))
        })
        .unwrap_or(0);
    let (a, b) = (ring[i], ring[(i + 1) % n]);
    let len = a.dist(b);
    let side = if polygon::signed_area(ring) > 0.0 { 1.0 } else { -1.0 };
    a.lerp(b, 0.5) + (b - a).perp() * (side * (1e-7_f64).max(len * 1e-7) / len)
}
