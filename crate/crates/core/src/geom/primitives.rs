//! Closed test solids: boxes and surfaces of revolution.

use super::mesh::Mesh;
use super::point::Point3;
use std::f64::consts::TAU;

/// Axis-aligned box, 12 outward-wound triangles.
pub fn cuboid(min: Point3, max: Point3) -> Mesh {
    let v = |i: usize| {
        Point3::new(
            if i & 1 == 0 { min.x } else { max.x },
            if i & 2 == 0 { min.y } else { max.y },
            if i & 4 == 0 { min.z } else { max.z },
        )
    };
    const FACES: [[usize; 4]; 6] = [
        [0, 2, 3, 1], // bottom
        [4, 5, 7, 6], // top
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let tris = FACES
        .iter()
        .flat_map(|f| [[v(f[0]), v(f[1]), v(f[2])], [v(f[0]), v(f[2]), v(f[3])]])
        .collect();
    Mesh::from_triangles(tris).expect("box is non-degenerate")
}

/// Solid of revolution about the vertical axis through `center`.
///
/// `profile` lists `(z, radius)` pairs bottom to top with strictly increasing
/// z; a zero radius collapses that ring to a point. Flat caps close any
/// non-zero end ring.
pub fn revolve(center: Point3, profile: &[(f64, f64)], segments: usize) -> Mesh {
    assert!(profile.len() >= 2 && segments >= 3);
    let ring = |z: f64, r: f64| -> Vec<Point3> {
        if r == 0.0 {
            vec![Point3::new(center.x, center.y, center.z + z)]
        } else {
            (0..segments)
                .map(|j| {
                    let a = TAU * j as f64 / segments as f64;
                    Point3::new(center.x + r * a.cos(), center.y + r * a.sin(), center.z + z)
                })
                .collect()
        }
    };
    let rings: Vec<Vec<Point3>> = profile.iter().map(|&(z, r)| ring(z, r)).collect();
    let mut tris = Vec::new();
    for w in rings.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        for j in 0..segments {
            let k = (j + 1) % segments;
            match (a.len(), b.len()) {
                (1, 1) => {}
                (1, _) => tris.push([a[0], b[k], b[j]]),
                (_, 1) => tris.push([a[j], a[k], b[0]]),
                _ => {
                    tris.push([a[j], a[k], b[k]]);
                    tris.push([a[j], b[k], b[j]]);
                }
            }
        }
    }
    let first = &rings[0];
    if first.len() > 1 {
        let c = Point3::new(center.x, center.y, center.z + profile[0].0);
        for j in 0..segments {
            tris.push([c, first[(j + 1) % segments], first[j]]);
        }
    }
    let last = &rings[rings.len() - 1];
    if last.len() > 1 {
        let c = Point3::new(center.x, center.y, center.z + profile[profile.len() - 1].0);
        for j in 0..segments {
            tris.push([c, last[j], last[(j + 1) % segments]]);
        }
    }
    Mesh::from_triangles(tris).expect("revolved solid is non-degenerate")
}

pub fn cylinder(center: Point3, radius: f64, height: f64, segments: usize) -> Mesh {
    revolve(center, &[(0.0, radius), (height, radius)], segments)
}

/// Cone standing on its base with the apex at `height`.
pub fn cone(center: Point3, radius: f64, height: f64, segments: usize) -> Mesh {
    revolve(center, &[(0.0, radius), (height, 0.0)], segments)
}

pub fn frustum(center: Point3, bottom_radius: f64, top_radius: f64, height: f64, segments: usize) -> Mesh {
    revolve(center, &[(0.0, bottom_radius), (height, top_radius)], segments)
}

/// A closed vase body: radius swells gently and stays within a 15 degree wall
/// slope.
pub fn vase(center: Point3, height: f64, base_radius: f64, segments: usize) -> Mesh {
    let steps = 60;
    let profile: Vec<(f64, f64)> = (0..=steps)
        .map(|i| {
            let z = height * i as f64 / steps as f64;
            let r = base_radius * (1.0 + 0.25 * (std::f64::consts::PI * z / height).sin());
            (z, r)
        })
        .collect();
    revolve(center, &profile, segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solids_are_watertight() {
        let o = Point3::default();
        assert!(cuboid(o, Point3::new(1.0, 2.0, 3.0)).watertight);
        assert!(cylinder(o, 5.0, 10.0, 32).watertight);
        assert!(cone(o, 5.0, 10.0, 32).watertight);
        assert!(frustum(o, 5.0, 8.0, 10.0, 32).watertight);
        assert!(vase(o, 150.0, 40.0, 48).watertight);
    }

    #[test]
    fn cuboid_normals_point_outward() {
        let m = cuboid(Point3::default(), Point3::new(2.0, 2.0, 2.0));
        let c = m.bbox.center();
        for t in &m.triangles {
            let n = (t[1] - t[0]).cross(t[2] - t[0]);
            let mid = (t[0] + t[1] + t[2]) * (1.0 / 3.0);
            assert!(n.dot(mid - c) > 0.0);
        }
    }
}
