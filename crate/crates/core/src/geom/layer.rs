use super::point::{Point2, Point3};
use super::polygon;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Counterclockwise boundary of material.
    Outer,
    /// Clockwise boundary of a cavity.
    Hole,
}

/// A closed, simple polygon lying in the plane `z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub vertices: Vec<Point2>,
    pub z: f64,
    pub orientation: Orientation,
}

impl Contour {
    /// Wraps a ring, reversing it if needed so the winding matches
    /// `orientation`.
    pub fn new(mut vertices: Vec<Point2>, z: f64, orientation: Orientation) -> Self {
        let a = polygon::signed_area(&vertices);
        let want_ccw = orientation == Orientation::Outer;
        if (a > 0.0) != want_ccw {
            vertices.reverse();
        }
        Contour {
            vertices,
            z,
            orientation,
        }
    }

    /// Orientation inferred from the winding.
    pub fn from_ring(vertices: Vec<Point2>, z: f64) -> Self {
        let orientation = if polygon::signed_area(&vertices) >= 0.0 {
            Orientation::Outer
        } else {
            Orientation::Hole
        };
        Contour {
            vertices,
            z,
            orientation,
        }
    }

    pub fn signed_area(&self) -> f64 {
        polygon::signed_area(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn perimeter(&self) -> f64 {
        polygon::perimeter(&self.vertices)
    }

    pub fn is_outer(&self) -> bool {
        self.orientation == Orientation::Outer
    }

    pub fn contains(&self, p: Point2) -> bool {
        polygon::contains(&self.vertices, p)
    }

    /// Closed 3D loop starting at vertex `start`, first vertex repeated at
    /// the end.
    pub fn closed_loop(&self, start: usize) -> Vec<Point3> {
        let n = self.vertices.len();
        (0..=n)
            .map(|i| self.vertices[(start + i) % n].at_z(self.z))
            .collect()
    }

    /// Validity per the contour invariants; used by tests and debug checks.
    pub fn is_valid(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let a = self.signed_area();
        if (a > 0.0) != self.is_outer() || a == 0.0 {
            return false;
        }
        for i in 0..n {
            for j in i + 1..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a0, a1) = (self.vertices[i], self.vertices[(i + 1) % n]);
                let (b0, b1) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if let Some((t, u)) = polygon::segment_intersection(a0, a1, b0, b1) {
                    if t > 1e-9 && t < 1.0 - 1e-9 && u > 1e-9 && u < 1.0 - 1e-9 {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// An outer contour together with the holes it directly encloses, as
/// indices into [`Layer::contours`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub outer: usize,
    pub holes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub index: usize,
    pub z: f64,
    pub contours: Vec<Contour>,
    pub regions: Vec<Region>,
}

impl Layer {
    /// Builds a layer from loops of arbitrary winding: nesting depth decides
    /// which loops are outers (even depth) and which are holes (odd depth).
    pub fn from_rings(index: usize, z: f64, rings: Vec<Vec<Point2>>) -> Layer {
        let depth: Vec<usize> = rings
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let probe = interior_probe(r);
                rings
                    .iter()
                    .enumerate()
                    .filter(|&(j, o)| j != i && polygon::contains(o, probe))
                    .count()
            })
            .collect();
        let contours: Vec<Contour> = rings
            .into_iter()
            .zip(&depth)
            .map(|(r, d)| {
                let o = if d % 2 == 0 {
                    Orientation::Outer
                } else {
                    Orientation::Hole
                };
                Contour::new(r, z, o)
            })
            .collect();
        let mut regions: Vec<Region> = contours
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_outer())
            .map(|(i, _)| Region {
                outer: i,
                holes: Vec::new(),
            })
            .collect();
        for (h, c) in contours.iter().enumerate().filter(|(_, c)| !c.is_outer()) {
            let probe = interior_probe(&c.vertices);
            // Parent: the enclosing outer one level up.
            let parent = regions.iter_mut().find(|r| {
                depth[r.outer] + 1 == depth[h] && contours[r.outer].contains(probe)
            });
            if let Some(r) = parent {
                r.holes.push(h);
            }
        }
        Layer {
            index,
            z,
            contours,
            regions,
        }
    }

    pub fn outer_contours(&self) -> impl Iterator<Item = &Contour> {
        self.contours.iter().filter(|c| c.is_outer())
    }

    /// Area of outers minus holes.
    pub fn region_area(&self) -> f64 {
        self.contours.iter().map(|c| c.signed_area()).sum()
    }
}

/// A point just inside the ring near its first edge, for nesting tests that
/// should not hit shared boundary points.
fn interior_probe(ring: &[Point2]) -> Point2 {
    let n = ring.len();
    if n < 3 {
        return ring.first().copied().unwrap_or_default();
    }
    let ccw = polygon::signed_area(ring) > 0.0;
    // Pick the longest edge to keep the probe well away from corners.
    let i = (0..n)
        .max_by(|&a, &b| {
            ring[a]
                .dist(ring[(a + 1) % n])
                .total_cmp(&ring[b].dist(ring[(b + 1) % n]))
        })
        .unwrap_or(0);
    let (a, b) = (ring[i], ring[(i + 1) % n]);
    let len = a.dist(b);
    let mid = a.lerp(b, 0.5);
    let inward = (b - a).perp() * (1.0 / len);
    let eps = (len * 1e-6).max(1e-9);
    if ccw {
        mid + inward * eps
    } else {
        mid - inward * eps
    }
}
