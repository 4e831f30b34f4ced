//! Mesh ingestion, slicing, offsetting, spiralization, infill and overhang
//! detection.

mod error;
mod infill;
mod layer;
mod mesh;
mod offset;
mod overhang;
mod point;
pub mod polygon;
pub mod primitives;
mod slice;
mod spiral;
mod toolpath;

pub use error::{GeomError, Result};
pub use infill::{infill_region, internal_wall, InfillPattern};
pub use layer::{Contour, Layer, Orientation, Region};
pub use mesh::{is_watertight, load_mesh, BoundingBox, Mesh, MeshFormat, DEGENERATE_AREA};
pub use offset::{offset_ccw_ring, offset_contour};
pub use overhang::{overhang_flags, OverhangFlag, DEFAULT_MAX_ANGLE_DEG};
pub use point::{polyline_length, Point2, Point3};
pub use slice::{slice_mesh, WELD_TOLERANCE};
pub use spiral::{nearest_vertex, ramped_loop, spiralize};
pub use toolpath::{ExtrudeEdge, Segment, SegmentKind, Toolpath, ToolpathBuilder, TRAVEL_THRESHOLD};

/// Perimeters, optional internal wall and infill for every layer, in layer
/// order. Loops start at the vertex nearest the previous loop's end.
pub fn layers_to_toolpath(
    layers: &[Layer],
    layer_height: f64,
    infill: Option<(f64, f64, InfillPattern)>,
) -> Result<Toolpath> {
    let mut b = ToolpathBuilder::new(layer_height);
    for layer in layers {
        let mut loops: Vec<&Contour> = layer.contours.iter().collect();
        let walls = match infill {
            Some((shell, _, _)) => internal_wall(layer, shell),
            None => Vec::new(),
        };
        loops.extend(walls.iter());
        for c in loops {
            let start = match b.last_point() {
                Some(p) => nearest_vertex(&c.vertices, p.xy()),
                None => 0,
            };
            b.extrude(&c.closed_loop(start), layer.index);
        }
        if let Some((shell, spacing, pattern)) = infill {
            for line in infill_region(layer, shell, spacing, pattern)? {
                b.extrude(&line, layer.index);
            }
        }
    }
    let tp = b.finish();
    tp.validate()?;
    Ok(tp)
}
