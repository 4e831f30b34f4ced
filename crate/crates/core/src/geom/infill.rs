//! Shell-bounded infill: material only within `shell_depth` of the outer
//! wall, leaving a hollow core behind an internal wall.

use super::error::{GeomError, Result};
use super::layer::{Contour, Layer};
use super::offset::offset_contour;
use super::point::{Point2, Point3};
use super::polygon;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfillPattern {
    Zigzag,
    Concentric,
}

impl std::str::FromStr for InfillPattern {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "zigzag" => Ok(Self::Zigzag),
            "concentric" => Ok(Self::Concentric),
            _ => Err(format!("unknown infill pattern '{s}'")),
        }
    }
}

/// The internal wall: each outer contour offset inward by `shell_depth`.
pub fn internal_wall(layer: &Layer, shell_depth: f64) -> Vec<Contour> {
    layer
        .regions
        .iter()
        .flat_map(|r| offset_contour(&layer.contours[r.outer], shell_depth))
        .collect()
}

pub fn infill_region(
    layer: &Layer,
    shell_depth: f64,
    spacing: f64,
    pattern: InfillPattern,
) -> Result<Vec<Vec<Point3>>> {
    if !(shell_depth > 0.0) || !(spacing > 0.0) {
        return Err(GeomError::InvalidParameter(format!(
            "shell depth and spacing must be positive (got {shell_depth}, {spacing})"
        )));
    }
    if layer.regions.is_empty() || layer.region_area() <= 0.0 {
        return Err(GeomError::DegenerateLayer { layer: layer.index });
    }
    let mut out = Vec::new();
    for region in &layer.regions {
        let outer = &layer.contours[region.outer];
        let holes: Vec<&Contour> = region.holes.iter().map(|&h| &layer.contours[h]).collect();
        let core = offset_contour(outer, shell_depth);
        match pattern {
            InfillPattern::Zigzag => out.extend(zigzag(outer, &holes, &core, spacing)),
            InfillPattern::Concentric => out.extend(concentric(outer, &holes, shell_depth, spacing)),
        }
    }
    Ok(out)
}

/// Where a scanline crosses a boundary loop.
#[derive(Clone, Copy, Debug)]
struct Crossing {
    x: f64,
    ring: usize,
    edge: usize,
}

#[derive(Clone, Copy, Debug)]
struct Span {
    lo: Crossing,
    hi: Crossing,
}

fn crossings(rings: &[&[Point2]], ids: std::ops::Range<usize>, y: f64) -> Vec<Crossing> {
    let mut xs = Vec::new();
    for id in ids {
        let r = rings[id];
        let n = r.len();
        for e in 0..n {
            let (a, b) = (r[e], r[(e + 1) % n]);
            if (a.y > y) != (b.y > y) {
                let x = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
                xs.push(Crossing { x, ring: id, edge: e });
            }
        }
    }
    xs.sort_by(|a, b| a.x.total_cmp(&b.x));
    xs
}

fn pair_up(xs: Vec<Crossing>) -> Vec<Span> {
    xs.chunks_exact(2).map(|c| Span { lo: c[0], hi: c[1] }).collect()
}

/// `keep` minus `cut`, both sorted and internally disjoint.
fn subtract(keep: &[Span], cut: &[Span]) -> Vec<Span> {
    let mut out = Vec::new();
    for s in keep {
        let mut pieces = vec![*s];
        for c in cut {
            let mut next = Vec::new();
            for p in pieces {
                if c.hi.x <= p.lo.x || c.lo.x >= p.hi.x {
                    next.push(p);
                    continue;
                }
                if c.lo.x > p.lo.x {
                    next.push(Span { lo: p.lo, hi: c.lo });
                }
                if c.hi.x < p.hi.x {
                    next.push(Span { lo: c.hi, hi: p.hi });
                }
            }
            pieces = next;
        }
        out.extend(pieces);
    }
    out.retain(|s| s.hi.x - s.lo.x > 1e-9);
    out
}

fn zigzag(outer: &Contour, holes: &[&Contour], core: &[Contour], spacing: f64) -> Vec<Vec<Point3>> {
    let mut rings: Vec<&[Point2]> = vec![&outer.vertices];
    rings.extend(holes.iter().map(|h| h.vertices.as_slice()));
    let n_region = rings.len();
    rings.extend(core.iter().map(|c| c.vertices.as_slice()));
    let (ymin, ymax) = outer
        .vertices
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
    let mut lines: Vec<(f64, Vec<Span>)> = Vec::new();
    let mut j = 0usize;
    loop {
        let y = ymin + spacing * (j as f64 + 0.5);
        if y >= ymax {
            break;
        }
        let region = pair_up(crossings(&rings, 0..n_region, y));
        let cut = pair_up(crossings(&rings, n_region..rings.len(), y));
        lines.push((y, subtract(&region, &cut)));
        j += 1;
    }
    chain(&rings, &lines, outer.z)
}

/// Boundary walk from a crossing on line `y0` to one on line `y1`, staying
/// within the band between them. Returns the intermediate ring vertices.
fn walk(ring: &[Point2], from: Crossing, to: Crossing, y0: f64, y1: f64) -> Option<Vec<Point2>> {
    if from.ring != to.ring {
        return None;
    }
    let n = ring.len();
    let (lo, hi) = (y0.min(y1) - 1e-9, y0.max(y1) + 1e-9);
    let in_band = |v: Point2| v.y >= lo && v.y <= hi;
    let forward = || {
        let mut pts = Vec::new();
        let mut e = from.edge;
        while e != to.edge {
            e = (e + 1) % n;
            let v = ring[e];
            if !in_band(v) || pts.len() > n {
                return None;
            }
            pts.push(v);
        }
        Some(pts)
    };
    let backward = || {
        let mut pts = Vec::new();
        let mut e = from.edge;
        while e != to.edge {
            let v = ring[e];
            if !in_band(v) || pts.len() > n {
                return None;
            }
            pts.push(v);
            e = (e + n - 1) % n;
        }
        Some(pts)
    };
    if from.edge == to.edge {
        return Some(Vec::new());
    }
    let len = |p: &Vec<Point2>| p.len();
    match (forward(), backward()) {
        (Some(f), Some(b)) => Some(if len(&f) <= len(&b) { f } else { b }),
        (f, b) => f.or(b),
    }
}

fn chain(rings: &[&[Point2]], lines: &[(f64, Vec<Span>)], z: f64) -> Vec<Vec<Point3>> {
    let mut used: Vec<Vec<bool>> = lines.iter().map(|(_, s)| vec![false; s.len()]).collect();
    let mut out = Vec::new();
    for j0 in 0..lines.len() {
        for i0 in 0..lines[j0].1.len() {
            if used[j0][i0] {
                continue;
            }
            used[j0][i0] = true;
            let (y, s) = (lines[j0].0, lines[j0].1[i0]);
            let mut pts = vec![Point2::new(s.lo.x, y), Point2::new(s.hi.x, y)];
            let (mut j, mut cur, mut at_hi) = (j0, s, true);
            while j + 1 < lines.len() {
                let (y0, y1) = (lines[j].0, lines[j + 1].0);
                let end = if at_hi { cur.hi } else { cur.lo };
                let mut best: Option<(usize, f64, Vec<Point2>)> = None;
                for (k, cand) in lines[j + 1].1.iter().enumerate() {
                    if used[j + 1][k] || cand.hi.x < cur.lo.x || cand.lo.x > cur.hi.x {
                        continue;
                    }
                    let target = if at_hi { cand.hi } else { cand.lo };
                    let Some(path) = walk(rings[end.ring], end, target, y0, y1) else {
                        continue;
                    };
                    let d = (target.x - end.x).abs();
                    if best.as_ref().is_none_or(|b| d < b.1) {
                        best = Some((k, d, path));
                    }
                }
                let Some((k, _, path)) = best else { break };
                used[j + 1][k] = true;
                let cand = lines[j + 1].1[k];
                pts.extend(path);
                let (near, far) = if at_hi { (cand.hi, cand.lo) } else { (cand.lo, cand.hi) };
                pts.push(Point2::new(near.x, y1));
                pts.push(Point2::new(far.x, y1));
                at_hi = !at_hi;
                cur = cand;
                j += 1;
            }
            pts.dedup();
            out.push(pts.into_iter().map(|p| p.at_z(z)).collect());
        }
    }
    out
}

fn concentric(outer: &Contour, holes: &[&Contour], shell_depth: f64, spacing: f64) -> Vec<Vec<Point3>> {
    let mut out = Vec::new();
    let mut k = 1usize;
    loop {
        let d = spacing * k as f64;
        if d > shell_depth * (1.0 + 1e-12) {
            break;
        }
        let loops = offset_contour(outer, d);
        if loops.is_empty() {
            break;
        }
        for l in loops {
            let closed: Vec<Point2> = l.vertices.iter().chain(l.vertices.first()).copied().collect();
            for piece in clip_outside(&closed, holes) {
                if piece.len() >= 2 {
                    out.push(piece.into_iter().map(|p| p.at_z(outer.z)).collect());
                }
            }
        }
        k += 1;
    }
    out
}

/// Splits an open polyline where it enters any of `holes`, keeping the
/// parts outside them.
fn clip_outside(line: &[Point2], holes: &[&Contour]) -> Vec<Vec<Point2>> {
    if holes.is_empty() {
        return vec![line.to_vec()];
    }
    let inside_any = |p: Point2| holes.iter().any(|h| h.contains(p));
    let mut pieces: Vec<Vec<Point2>> = Vec::new();
    let mut cur: Vec<Point2> = Vec::new();
    for w in line.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut ts = vec![0.0, 1.0];
        for h in holes {
            let n = h.vertices.len();
            for e in 0..n {
                if let Some((t, _)) = polygon::segment_intersection(a, b, h.vertices[e], h.vertices[(e + 1) % n]) {
                    ts.push(t);
                }
            }
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        for t in ts.windows(2) {
            let (p, q) = (a.lerp(b, t[0]), a.lerp(b, t[1]));
            if inside_any(p.lerp(q, 0.5)) {
                if cur.len() >= 2 {
                    pieces.push(std::mem::take(&mut cur));
                }
                cur.clear();
            } else {
                if cur.last() != Some(&p) {
                    cur.push(p);
                }
                cur.push(q);
            }
        }
    }
    if cur.len() >= 2 {
        pieces.push(cur);
    }
    pieces
}
