//! Physical viability of a print: accumulated mass and its centre, the
//! support polygon, compressive load on fresh layers, drying pace and
//! firing shrinkage compensation.

use crate::geom::polygon::{convex_hull, signed_boundary_distance};
use crate::geom::{Layer, Mesh, Point2, Point3, SegmentKind, Toolpath};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;
use thiserror::Error;

pub const GRAVITY: f64 = 9.80665;
pub const DEFAULT_WET_DENSITY: f64 = 1800.0;
const MM3_TO_M3: f64 = 1e-9;
const MM2_TO_M2: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("toolpath has no extrude segments")]
    NoExtrusion,
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shrinkage must lie in [0, 1), got {0}")]
    Shrinkage(f64),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Geom(#[from] crate::geom::GeomError),
}

fn default_density() -> f64 {
    DEFAULT_WET_DENSITY
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialMix {
    pub clay_powder_kg: f64,
    #[serde(default)]
    pub sand_kg: f64,
    #[serde(default)]
    pub paper_pulp_kg: f64,
    #[serde(default)]
    pub water_kg: f64,
    /// kg/m³
    #[serde(default = "default_density")]
    pub wet_density: f64,
    /// Compressive strength of fresh extrusion, Pa.
    pub bearing_strength_pa: f64,
    /// Strength gained per minute of drying, Pa.
    #[serde(default)]
    pub drying_gain_pa_per_min: f64,
    /// Firing temperature in °C to linear shrinkage fraction.
    #[serde(default)]
    pub fired_shrinkage: BTreeMap<u32, f64>,
}

impl MaterialMix {
    pub fn from_json(text: &str) -> Result<Self, StabilityError> {
        let m: MaterialMix = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), StabilityError> {
        let bad = |m: String| Err(StabilityError::InvalidMaterial(m));
        for (name, v) in [
            ("sand_kg", self.sand_kg),
            ("paper_pulp_kg", self.paper_pulp_kg),
            ("water_kg", self.water_kg),
            ("bearing_strength_pa", self.bearing_strength_pa),
            ("drying_gain_pa_per_min", self.drying_gain_pa_per_min),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.clay_powder_kg > 0.0 && self.clay_powder_kg.is_finite()) {
            return bad(format!("clay_powder_kg must be positive, got {}", self.clay_powder_kg));
        }
        if !(self.wet_density > 0.0 && self.wet_density.is_finite()) {
            return bad(format!("wet_density must be positive, got {}", self.wet_density));
        }
        if let Some((t, s)) = self.fired_shrinkage.iter().find(|(_, s)| !(**s >= 0.0 && **s < 1.0)) {
            return bad(format!("shrinkage at {t} °C must lie in [0, 1), got {s}"));
        }
        Ok(())
    }

    pub fn batch_mass_kg(&self) -> f64 {
        self.clay_powder_kg + self.sand_kg + self.paper_pulp_kg + self.water_kg
    }

    /// Shrinkage at the nearest tabulated temperature at or below `celsius`.
    pub fn shrinkage_at(&self, celsius: u32) -> Option<f64> {
        self.fired_shrinkage.range(..=celsius).next_back().map(|(_, s)| *s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComPoint {
    pub layer: usize,
    /// kg deposited in layers 0..=layer.
    pub cumulative_mass: f64,
    pub com: Point3,
}

fn check_bead(bead_area_mm2: f64) -> Result<(), StabilityError> {
    if bead_area_mm2 > 0.0 && bead_area_mm2.is_finite() {
        Ok(())
    } else {
        Err(StabilityError::InvalidParameter(format!("bead area must be positive, got {bead_area_mm2}")))
    }
}

/// Per-layer extrusion length and first moments, mm.
struct LayerSums {
    length: Vec<f64>,
    moment: Vec<Point3>,
}

fn layer_sums(toolpath: &Toolpath) -> Result<LayerSums, StabilityError> {
    let edges = toolpath.extrude_edges();
    let Some(max) = edges.iter().map(|e| e.layer).max() else {
        return Err(StabilityError::NoExtrusion);
    };
    let mut s = LayerSums {
        length: vec![0.0; max + 1],
        moment: vec![Point3::default(); max + 1],
    };
    for e in &edges {
        let l = e.length();
        s.length[e.layer] += l;
        s.moment[e.layer] = s.moment[e.layer] + e.from.midpoint(e.to) * l;
    }
    Ok(s)
}

/// Mass-weighted centre of everything deposited up to each layer. Each
/// extruded edge is a point mass at its midpoint.
pub fn cumulative_com(toolpath: &Toolpath, bead_area_mm2: f64, mix: &MaterialMix) -> Result<Vec<ComPoint>, StabilityError> {
    check_bead(bead_area_mm2)?;
    let sums = layer_sums(toolpath)?;
    let kg_per_mm = bead_area_mm2 * MM3_TO_M3 * mix.wet_density;
    let mut length = 0.0;
    let mut moment = Point3::default();
    let mut out = Vec::with_capacity(sums.length.len());
    for (layer, (&l, &m)) in sums.length.iter().zip(&sums.moment).enumerate() {
        length += l;
        moment = moment + m;
        let com = if length > 0.0 { moment * (1.0 / length) } else { Point3::default() };
        out.push(ComPoint {
            layer,
            cumulative_mass: length * kg_per_mm,
            com,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "layer", rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Tipping(usize),
    Crushing(usize),
    TooFast(usize),
}

impl Verdict {
    pub fn is_stable(&self) -> bool {
        *self == Verdict::Stable
    }

    pub fn layer(&self) -> Option<usize> {
        match *self {
            Verdict::Stable => None,
            Verdict::Tipping(k) | Verdict::Crushing(k) | Verdict::TooFast(k) => Some(k),
        }
    }

    /// The earlier failure wins; on equal layers tipping, then crushing,
    /// then drying.
    pub fn combine(self, other: Verdict) -> Verdict {
        let rank = |v: &Verdict| match v {
            Verdict::Stable => (usize::MAX, 3),
            Verdict::Tipping(k) => (*k, 0),
            Verdict::Crushing(k) => (*k, 1),
            Verdict::TooFast(k) => (*k, 2),
        };
        if rank(&other) < rank(&self) {
            other
        } else {
            self
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Stable => write!(f, "stable"),
            Verdict::Tipping(k) => write!(f, "tipping({k})"),
            Verdict::Crushing(k) => write!(f, "crushing({k})"),
            Verdict::TooFast(k) => write!(f, "too_fast({k})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupportReport {
    /// Signed distance of each COM inside the base hull, mm.
    pub margins: Vec<f64>,
    pub verdict: Verdict,
}

/// Convex hull of all outer contour vertices.
pub fn base_hull(layer: &Layer) -> Vec<Point2> {
    let pts: Vec<Point2> = layer.outer_contours().flat_map(|c| c.vertices.iter().copied()).collect();
    convex_hull(&pts)
}

/// Convex hull of the first layer's extruded points.
pub fn toolpath_base_hull(toolpath: &Toolpath) -> Vec<Point2> {
    let pts: Vec<Point2> = toolpath
        .extrude_edges()
        .iter()
        .filter(|e| e.layer == 0)
        .flat_map(|e| [e.from.xy(), e.to.xy()])
        .collect();
    convex_hull(&pts)
}

/// Layer `k` tips when its COM lies less than `margin_mm` inside the hull.
pub fn support_check_hull(series: &[ComPoint], hull: &[Point2], margin_mm: f64) -> SupportReport {
    let margins: Vec<f64> = series
        .iter()
        .map(|c| {
            if hull.len() < 3 {
                f64::NEG_INFINITY
            } else {
                signed_boundary_distance(hull, c.com.xy())
            }
        })
        .collect();
    let verdict = series
        .iter()
        .zip(&margins)
        .find(|(_, &m)| m < margin_mm)
        .map_or(Verdict::Stable, |(c, _)| Verdict::Tipping(c.layer));
    SupportReport { margins, verdict }
}

pub fn support_check(series: &[ComPoint], base_layer: &Layer, margin_mm: f64) -> SupportReport {
    support_check_hull(series, &base_hull(base_layer), margin_mm)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoadReport {
    /// Stress on each layer from everything above it once printing ends, Pa.
    pub stress_pa: Vec<f64>,
    pub verdict: Verdict,
}

/// Compressive check of each layer against the weight of the layers above.
/// The bearing section of layer `j` is its wall length times the bead
/// width (`bead_area / layer_height`). After layer `m` finishes, layer `j`
/// has dried for the summed durations of layers `j+1..=m`.
pub fn load_check(
    toolpath: &Toolpath,
    bead_area_mm2: f64,
    mix: &MaterialMix,
    layer_times: &[f64],
) -> Result<LoadReport, StabilityError> {
    check_bead(bead_area_mm2)?;
    let sums = layer_sums(toolpath)?;
    let n = sums.length.len();
    if layer_times.len() < n {
        return Err(StabilityError::InvalidParameter(format!(
            "{} layer times given for {n} layers",
            layer_times.len()
        )));
    }
    let kg_per_mm = bead_area_mm2 * MM3_TO_M3 * mix.wet_density;
    let bead_width = bead_area_mm2 / toolpath.layer_height;
    let area_m2: Vec<f64> = sums.length.iter().map(|l| l * bead_width * MM2_TO_M2).collect();
    let weight: Vec<f64> = sums.length.iter().map(|l| l * kg_per_mm * GRAVITY).collect();
    let stress = |load: f64, j: usize| if load == 0.0 { 0.0 } else { load / area_m2[j] };
    let mut verdict = Verdict::Stable;
    // load[j]: weight resting on j after the current layer; age[j]: seconds.
    let mut load = vec![0.0; n];
    let mut age = vec![0.0; n];
    'time: for m in 1..n {
        for j in 0..m {
            load[j] += weight[m];
            age[j] += layer_times[m];
            let strength = mix.bearing_strength_pa + mix.drying_gain_pa_per_min * age[j] / 60.0;
            if verdict.is_stable() && stress(load[j], j) > strength {
                verdict = Verdict::Crushing(j);
                break 'time;
            }
        }
    }
    // Final stresses are reported regardless of where the check stopped.
    let mut above = 0.0;
    let mut stress_pa = vec![0.0; n];
    for j in (0..n).rev() {
        stress_pa[j] = stress(above, j);
        above += weight[j];
    }
    Ok(LoadReport { stress_pa, verdict })
}

/// First layer printed faster than the clay can take the next one.
pub fn drying_gate(layer_times: &[f64], min_layer_time_s: f64) -> Verdict {
    layer_times
        .iter()
        .position(|&t| t < min_layer_time_s)
        .map_or(Verdict::Stable, Verdict::TooFast)
}

/// Pre-scales a mesh so it fires back to its design size.
pub fn shrink_compensate(mesh: &Mesh, shrinkage: f64) -> Result<Mesh, StabilityError> {
    if !(0.0..1.0).contains(&shrinkage) {
        return Err(StabilityError::Shrinkage(shrinkage));
    }
    if shrinkage == 0.0 {
        return Ok(mesh.clone());
    }
    let k = 1.0 / (1.0 - shrinkage);
    let c = mesh.bbox.center();
    Ok(mesh.transformed(|p| c + (p - c) * k)?)
}

/// Extruded length per layer with no bead of the layer below within one
/// bead width. The analysis reports these spans; it does not model sag.
pub fn floating_spans(toolpath: &Toolpath, bead_width_mm: f64) -> Vec<f64> {
    let edges = toolpath.extrude_edges();
    let n = edges.iter().map(|e| e.layer + 1).max().unwrap_or(0);
    let mut out = vec![0.0; n];
    if !(bead_width_mm > 0.0) {
        return out;
    }
    let cell = bead_width_mm;
    let key = |p: Point2| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
    // Grid of layer edges, sampled so every sample is within half a cell of
    // its neighbours.
    let mut grids: Vec<HashMap<(i64, i64), Vec<(Point2, Point2)>>> = vec![HashMap::new(); n];
    for e in &edges {
        let (a, b) = (e.from.xy(), e.to.xy());
        let steps = ((a.dist(b) / (cell * 0.5)).ceil() as usize).max(1);
        let mut cells: Vec<(i64, i64)> = (0..=steps).map(|i| key(a.lerp(b, i as f64 / steps as f64))).collect();
        cells.dedup();
        for c in cells {
            grids[e.layer].entry(c).or_default().push((a, b));
        }
    }
    for e in edges.iter().filter(|e| e.layer > 0) {
        let mid = e.from.midpoint(e.to).xy();
        let (cx, cy) = key(mid);
        let below = &grids[e.layer - 1];
        let supported = (-1..=1).any(|dx| {
            (-1..=1).any(|dy| {
                below.get(&(cx + dx, cy + dy)).is_some_and(|v| {
                    v.iter()
                        .any(|&(a, b)| crate::geom::polygon::segment_distance(mid, a, b) <= bead_width_mm)
                })
            })
        });
        if !supported {
            out[e.layer] += e.length();
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerStability {
    pub layer: usize,
    pub cumulative_mass: f64,
    pub com: Point3,
    pub support_margin: f64,
    pub stress_pa: f64,
    pub duration_s: f64,
    /// Advisory only.
    pub floating_mm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub layers: Vec<LayerStability>,
    pub total_mass_kg: f64,
    pub support: Verdict,
    pub load: Verdict,
    pub drying: Verdict,
    pub verdict: Verdict,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalysisParams {
    pub bead_area_mm2: f64,
    pub margin_mm: f64,
    pub min_layer_time_s: f64,
}

/// Runs every check. The base support polygon is the hull of layer 0.
pub fn analyze(
    toolpath: &Toolpath,
    mix: &MaterialMix,
    params: &AnalysisParams,
    layer_times: &[f64],
) -> Result<StabilityReport, StabilityError> {
    mix.validate()?;
    if !(params.min_layer_time_s > 0.0) {
        return Err(StabilityError::InvalidParameter("minimum layer time must be positive".into()));
    }
    if !params.margin_mm.is_finite() {
        return Err(StabilityError::InvalidParameter("margin must be finite".into()));
    }
    if toolpath.segments.iter().all(|s| s.kind != SegmentKind::Extrude) {
        return Err(StabilityError::NoExtrusion);
    }
    let series = cumulative_com(toolpath, params.bead_area_mm2, mix)?;
    let support = support_check_hull(&series, &toolpath_base_hull(toolpath), params.margin_mm);
    let load = load_check(toolpath, params.bead_area_mm2, mix, layer_times)?;
    let drying = drying_gate(&layer_times[..series.len()], params.min_layer_time_s);
    let floating = floating_spans(toolpath, params.bead_area_mm2 / toolpath.layer_height);
    let layers = series
        .iter()
        .map(|c| LayerStability {
            layer: c.layer,
            cumulative_mass: c.cumulative_mass,
            com: c.com,
            support_margin: support.margins[c.layer],
            stress_pa: load.stress_pa[c.layer],
            duration_s: layer_times[c.layer],
            floating_mm: floating[c.layer],
        })
        .collect();
    Ok(StabilityReport {
        layers,
        total_mass_kg: series.last().map_or(0.0, |c| c.cumulative_mass),
        support: support.verdict,
        load: load.verdict,
        drying,
        verdict: support.verdict.combine(load.verdict).combine(drying),
    })
}

impl StabilityReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>5} {:>10} {:>10} {:>10} {:>10} {:>10} {:>12} {:>9} {:>9}",
            "layer", "mass_kg", "com_x", "com_y", "com_z", "margin", "stress_pa", "time_s", "float_mm"
        );
        for l in &self.layers {
            let _ = writeln!(
                s,
                "{:>5} {:>10.4} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>12.1} {:>9.1} {:>9.1}",
                l.layer, l.cumulative_mass, l.com.x, l.com.y, l.com.z, l.support_margin, l.stress_pa, l.duration_s, l.floating_mm
            );
        }
        let _ = writeln!(s, "total mass {:.3} kg", self.total_mass_kg);
        let _ = writeln!(
            s,
            "support {}, load {}, drying {}, verdict {}",
            self.support, self.load, self.drying, self.verdict
        );
        s
    }
}
