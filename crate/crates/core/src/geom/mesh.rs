//! Triangle-soup ingestion for STL (ASCII and binary) and OBJ.

use super::error::{GeomError, Result};
use super::point::Point3;
use std::collections::HashMap;

/// Triangles smaller than this (mm²) are dropped on ingest.
pub const DEGENERATE_AREA: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    StlAscii,
    StlBinary,
    Obj,
}

impl MeshFormat {
    /// Guess the format from a file extension and the leading bytes.
    pub fn detect(bytes: &[u8], extension: Option<&str>) -> MeshFormat {
        if extension.is_some_and(|e| e.eq_ignore_ascii_case("obj")) {
            return MeshFormat::Obj;
        }
        // Binary files may also start with "solid"; trust the size formula first.
        if bytes.len() >= 84 {
            let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
            if bytes.len() == 84 + 50 * n {
                return MeshFormat::StlBinary;
            }
        }
        let head = &bytes[..bytes.len().min(512)];
        let text = String::from_utf8_lossy(head);
        if text.trim_start().starts_with("solid") && text.contains("facet") {
            MeshFormat::StlAscii
        } else {
            MeshFormat::StlBinary
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub min: Point3,
    pub max: Point3,
}

impl BoundingBox {
    pub fn of<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = BoundingBox { min: first, max: first };
        for p in it {
            b.min = Point3::new(b.min.x.min(p.x), b.min.y.min(p.y), b.min.z.min(p.z));
            b.max = Point3::new(b.max.x.max(p.x), b.max.y.max(p.y), b.max.z.max(p.z));
        }
        Some(b)
    }

    pub fn center(&self) -> Point3 {
        self.min.midpoint(self.max)
    }

    pub fn size(&self) -> Point3 {
        self.max - self.min
    }

    pub fn volume(&self) -> f64 {
        let s = self.size();
        s.x * s.y * s.z
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub triangles: Vec<[Point3; 3]>,
    pub bbox: BoundingBox,
    pub watertight: bool,
    /// Triangles discarded on ingest for having (near) zero area.
    pub dropped_degenerate: usize,
}

impl Mesh {
    /// Builds a mesh from raw triangles, dropping degenerate ones and
    /// computing bbox and watertightness.
    pub fn from_triangles(raw: Vec<[Point3; 3]>) -> Result<Mesh> {
        let before = raw.len();
        let triangles: Vec<[Point3; 3]> = raw.into_iter().filter(|t| !is_degenerate(t)).collect();
        let dropped = before - triangles.len();
        if dropped > 0 {
            log::warn!("dropped {dropped} degenerate triangles");
        }
        let bbox = BoundingBox::of(triangles.iter().flatten()).ok_or(GeomError::EmptyMesh)?;
        let watertight = is_watertight(&triangles);
        Ok(Mesh {
            triangles,
            bbox,
            watertight,
            dropped_degenerate: dropped,
        })
    }

    pub fn transformed(&self, f: impl Fn(Point3) -> Point3) -> Result<Mesh> {
        Mesh::from_triangles(self.triangles.iter().map(|t| [f(t[0]), f(t[1]), f(t[2])]).collect())
    }

    pub fn translated(&self, d: Point3) -> Result<Mesh> {
        self.transformed(|p| p + d)
    }

    /// Little-endian binary STL with facet normals from the winding.
    pub fn to_stl_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(84 + 50 * self.triangles.len());
        let mut header = [0u8; 80];
        let tag = b"loadpath binary stl";
        header[..tag.len()].copy_from_slice(tag);
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.triangles.len() as u32).to_le_bytes());
        for t in &self.triangles {
            let n = facet_normal(t);
            for p in std::iter::once(n).chain(t.iter().copied()) {
                for c in [p.x, p.y, p.z] {
                    out.extend_from_slice(&(c as f32).to_le_bytes());
                }
            }
            out.extend_from_slice(&[0, 0]);
        }
        out
    }

    pub fn to_stl_ascii(&self, name: &str) -> String {
        use std::fmt::Write;
        let mut s = format!("solid {name}\n");
        for t in &self.triangles {
            let n = facet_normal(t);
            let _ = writeln!(s, "  facet normal {:e} {:e} {:e}", n.x, n.y, n.z);
            s.push_str("    outer loop\n");
            for p in t {
                let _ = writeln!(s, "      vertex {:e} {:e} {:e}", p.x, p.y, p.z);
            }
            s.push_str("    endloop\n  endfacet\n");
        }
        let _ = writeln!(s, "endsolid {name}");
        s
    }
}

fn facet_normal(t: &[Point3; 3]) -> Point3 {
    let n = (t[1] - t[0]).cross(t[2] - t[0]);
    let len = n.norm();
    if len > 0.0 {
        n * (1.0 / len)
    } else {
        n
    }
}

fn triangle_area(t: &[Point3; 3]) -> f64 {
    (t[1] - t[0]).cross(t[2] - t[0]).norm() * 0.5
}

fn is_degenerate(t: &[Point3; 3]) -> bool {
    t[0] == t[1] || t[1] == t[2] || t[0] == t[2] || triangle_area(t) < DEGENERATE_AREA
}

/// Bit-exact vertex key; `-0.0` and `0.0` collapse together.
pub(crate) fn vertex_key(p: Point3) -> [u64; 3] {
    let k = |v: f64| if v == 0.0 { 0u64 } else { v.to_bits() };
    [k(p.x), k(p.y), k(p.z)]
}

/// Every undirected edge, keyed by vertex coordinates, is shared by exactly
/// two triangles.
pub fn is_watertight(triangles: &[[Point3; 3]]) -> bool {
    if triangles.is_empty() {
        return false;
    }
    let mut ids: HashMap<[u64; 3], u32> = HashMap::new();
    let mut edges: HashMap<(u32, u32), u32> = HashMap::new();
    for t in triangles {
        let v: Vec<u32> = t
            .iter()
            .map(|&p| {
                let next = ids.len() as u32;
                *ids.entry(vertex_key(p)).or_insert(next)
            })
            .collect();
        for i in 0..3 {
            let (a, b) = (v[i], v[(i + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    edges.values().all(|&c| c == 2)
}

pub fn load_mesh(bytes: &[u8], format: MeshFormat) -> Result<Mesh> {
    if bytes.is_empty() {
        return Err(GeomError::EmptyInput);
    }
    let raw = match format {
        MeshFormat::StlBinary => parse_stl_binary(bytes)?,
        MeshFormat::StlAscii => parse_stl_ascii(&String::from_utf8_lossy(bytes))?,
        MeshFormat::Obj => parse_obj(&String::from_utf8_lossy(bytes))?,
    };
    Mesh::from_triangles(raw)
}

fn parse_stl_binary(bytes: &[u8]) -> Result<Vec<[Point3; 3]>> {
    if bytes.len() < 84 {
        return Err(GeomError::TruncatedHeader);
    }
    let declared = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as u64;
    let body = (bytes.len() - 84) as u64;
    if body != declared * 50 {
        return Err(GeomError::TriangleCountMismatch {
            declared,
            found: body / 50,
        });
    }
    let f = |off: usize| f32::from_le_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]]) as f64;
    Ok(bytes[84..]
        .chunks_exact(50)
        .enumerate()
        .map(|(i, _)| {
            let base = 84 + i * 50 + 12;
            let v = |k: usize| Point3::new(f(base + 12 * k), f(base + 12 * k + 4), f(base + 12 * k + 8));
            [v(0), v(1), v(2)]
        })
        .collect())
}

fn parse_stl_ascii(text: &str) -> Result<Vec<[Point3; 3]>> {
    let mut tris = Vec::new();
    let mut facet: Option<(usize, Vec<Point3>)> = None;
    let bad = |line: usize, reason: &str| GeomError::UnparsableFacet {
        line,
        reason: reason.to_string(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let mut tok = raw.split_whitespace();
        let Some(kw) = tok.next() else { continue };
        match kw {
            "solid" | "endsolid" | "outer" | "endloop" => {}
            "facet" => {
                if facet.is_some() {
                    return Err(bad(line, "nested facet"));
                }
                facet = Some((line, Vec::with_capacity(3)));
            }
            "vertex" => {
                let Some((_, verts)) = facet.as_mut() else {
                    return Err(bad(line, "vertex outside facet"));
                };
                let coords: Vec<f64> = tok
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad(line, "non-numeric vertex"))?;
                if coords.len() != 3 || coords.iter().any(|c| !c.is_finite()) {
                    return Err(bad(line, "vertex needs 3 finite coordinates"));
                }
                verts.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            "endfacet" => {
                let Some((start, verts)) = facet.take() else {
                    return Err(bad(line, "endfacet without facet"));
                };
                if verts.len() != 3 {
                    return Err(bad(start, "facet must have exactly 3 vertices"));
                }
                tris.push([verts[0], verts[1], verts[2]]);
            }
            other => return Err(bad(line, &format!("unexpected token '{other}'"))),
        }
    }
    if let Some((start, _)) = facet {
        return Err(bad(start, "unterminated facet"));
    }
    Ok(tris)
}

fn parse_obj(text: &str) -> Result<Vec<[Point3; 3]>> {
    let mut verts: Vec<Point3> = Vec::new();
    let mut tris = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let mut tok = raw.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| GeomError::ObjSyntax {
                        line,
                        reason: "non-numeric vertex".into(),
                    })?;
                if c.len() != 3 {
                    return Err(GeomError::ObjSyntax {
                        line,
                        reason: "vertex needs 3 coordinates".into(),
                    });
                }
                verts.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut face = Vec::new();
                for t in tok {
                    let first = t.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| GeomError::ObjSyntax {
                        line,
                        reason: format!("bad face index '{t}'"),
                    })?;
                    let resolved = if i > 0 {
                        i - 1
                    } else {
                        verts.len() as i64 + i
                    };
                    if i == 0 || resolved < 0 || resolved >= verts.len() as i64 {
                        return Err(GeomError::ObjSyntax {
                            line,
                            reason: format!("face index {i} out of range"),
                        });
                    }
                    face.push(verts[resolved as usize]);
                }
                if face.len() < 3 {
                    return Err(GeomError::ObjShortFace { line });
                }
                for k in 1..face.len() - 1 {
                    tris.push([face[0], face[k], face[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(tris)
}
