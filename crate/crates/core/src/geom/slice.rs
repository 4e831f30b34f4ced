//! Planar slicing of closed meshes at mid-layer heights.

use super::error::{GeomError, Result};
use super::layer::Layer;
use super::mesh::{vertex_key, Mesh};
use super::point::{Point2, Point3};
use super::polygon;
use std::collections::HashMap;

/// Loop endpoints closer than this are welded.
pub const WELD_TOLERANCE: f64 = 1e-4;

/// Slices `mesh` with planes at `z_min + (k + 0.5) * layer_height`.
pub fn slice_mesh(mesh: &Mesh, layer_height: f64) -> Result<Vec<Layer>> {
    if !(layer_height > 0.0 && layer_height.is_finite()) {
        return Err(GeomError::InvalidParameter(format!(
            "layer height must be positive, got {layer_height}"
        )));
    }
    if !mesh.watertight {
        return Err(GeomError::NonWatertight);
    }
    let indexed = IndexedMesh::new(mesh);
    let (z_min, z_max) = (mesh.bbox.min.z, mesh.bbox.max.z);
    let mut layers = Vec::new();
    let mut k = 0usize;
    loop {
        let z = z_min + (k as f64 + 0.5) * layer_height;
        if z >= z_max {
            break;
        }
        let rings = indexed.section(z).map_err(|_| GeomError::OpenLoop { layer: k })?;
        layers.push(Layer::from_rings(k, z, rings));
        k += 1;
    }
    Ok(layers)
}

struct IndexedMesh {
    verts: Vec<Point3>,
    tris: Vec<[u32; 3]>,
    /// Triangle indices sorted by their lowest z.
    by_zmin: Vec<(f64, f64, u32)>,
}

struct OpenLoop;

impl IndexedMesh {
    fn new(mesh: &Mesh) -> Self {
        let mut ids: HashMap<[u64; 3], u32> = HashMap::new();
        let mut verts = Vec::new();
        let tris: Vec<[u32; 3]> = mesh
            .triangles
            .iter()
            .map(|t| {
                t.map(|p| {
                    *ids.entry(vertex_key(p)).or_insert_with(|| {
                        verts.push(p);
                        (verts.len() - 1) as u32
                    })
                })
            })
            .collect();
        let mut by_zmin: Vec<(f64, f64, u32)> = tris
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let zs = t.map(|v| verts[v as usize].z);
                (zs[0].min(zs[1]).min(zs[2]), zs[0].max(zs[1]).max(zs[2]), i as u32)
            })
            .collect();
        by_zmin.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        IndexedMesh { verts, tris, by_zmin }
    }

    /// Cross-section loops at height `z`. Vertices lying exactly on the plane
    /// count as above it, so every crossing triangle contributes exactly one
    /// segment between two of its edges.
    fn section(&self, z: f64) -> std::result::Result<Vec<Vec<Point2>>, OpenLoop> {
        let above = |v: u32| self.verts[v as usize].z >= z;
        // Crossing nodes keyed by mesh edge, numbered in discovery order.
        let mut node_of: HashMap<(u32, u32), usize> = HashMap::new();
        let mut points: Vec<Point2> = Vec::new();
        let mut adj: Vec<Vec<usize>> = Vec::new();
        let end = self.by_zmin.partition_point(|e| e.0 <= z);
        let mut active: Vec<u32> = self.by_zmin[..end]
            .iter()
            .filter(|e| e.1 >= z)
            .map(|e| e.2)
            .collect();
        active.sort_unstable();
        for ti in active {
            let t = self.tris[ti as usize];
            let mut nodes = [0usize; 2];
            let mut found = 0;
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                if above(a) == above(b) {
                    continue;
                }
                let key = (a.min(b), a.max(b));
                let id = *node_of.entry(key).or_insert_with(|| {
                    let (lo, hi) = if above(a) { (b, a) } else { (a, b) };
                    let (lo, hi) = (self.verts[lo as usize], self.verts[hi as usize]);
                    let t = (z - lo.z) / (hi.z - lo.z);
                    points.push(lo.lerp(hi, t).xy());
                    adj.push(Vec::new());
                    points.len() - 1
                });
                if found < 2 {
                    nodes[found] = id;
                }
                found += 1;
            }
            if found == 0 {
                continue;
            }
            if found != 2 {
                return Err(OpenLoop);
            }
            adj[nodes[0]].push(nodes[1]);
            adj[nodes[1]].push(nodes[0]);
        }
        if adj.iter().any(|a| a.len() != 2) {
            return Err(OpenLoop);
        }
        let mut visited = vec![false; points.len()];
        let mut rings = Vec::new();
        for start in 0..points.len() {
            if visited[start] {
                continue;
            }
            let mut ring = Vec::new();
            let (mut prev, mut cur) = (usize::MAX, start);
            loop {
                visited[cur] = true;
                ring.push(points[cur]);
                let next = if adj[cur][0] != prev { adj[cur][0] } else { adj[cur][1] };
                prev = cur;
                cur = next;
                if cur == start {
                    break;
                }
                if visited[cur] {
                    return Err(OpenLoop);
                }
            }
            polygon::dedup_ring(&mut ring, WELD_TOLERANCE);
            if ring.len() >= 3 && polygon::signed_area(&ring).abs() > 1e-9 {
                rings.push(ring);
            }
        }
        Ok(rings)
    }
}
