//! Pareto dominance, min-max normalization and exact 3-D hypervolume.

use serde::{Deserialize, Serialize};

/// The three minimized objectives: global error, communication overhead
/// and privacy budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub f_ge: f64,
    pub f_co: f64,
    pub f_pb: f64,
}

impl ObjectiveVector {
    pub fn new(f_ge: f64, f_co: f64, f_pb: f64) -> Self {
        Self { f_ge, f_co, f_pb }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.f_ge, self.f_co, self.f_pb]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// True iff `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationBounds {
    pub ideal: [f64; 3],
    pub nadir: [f64; 3],
}

impl NormalizationBounds {
    /// Per-axis minima and maxima. Returns `None` for an empty input.
    pub fn from_points<'a, I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a [f64; 3]>,
    {
        let mut it = points.into_iter().peekable();
        it.peek()?;
        let mut ideal = [f64::INFINITY; 3];
        let mut nadir = [f64::NEG_INFINITY; 3];
        for p in it {
            for k in 0..3 {
                ideal[k] = ideal[k].min(p[k]);
                nadir[k] = nadir[k].max(p[k]);
            }
        }
        Some(Self { ideal, nadir })
    }

    /// `(f - ideal) / (nadir - ideal)`; a degenerate axis maps to 0.
    pub fn apply(&self, p: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for k in 0..3 {
            let span = self.nadir[k] - self.ideal[k];
            out[k] = if span > 0.0 {
                (p[k] - self.ideal[k]) / span
            } else {
                0.0
            };
        }
        out
    }
}

/// Min-max normalizes a non-empty set of vectors over its own bounds.
pub fn normalize(vectors: &[[f64; 3]]) -> Option<(Vec<[f64; 3]>, NormalizationBounds)> {
    let bounds = NormalizationBounds::from_points(vectors)?;
    let out = vectors.iter().map(|v| bounds.apply(v)).collect();
    Some((out, bounds))
}

/// Area dominated in the plane by `pts` up to `(ref_y, ref_z)`.
/// Every point must be strictly below the reference on both axes.
fn hypervolume_2d(pts: &mut [[f64; 2]], ref_y: f64, ref_z: f64) -> f64 {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut best_z = ref_z;
    for (i, p) in pts.iter().enumerate() {
        if p[1] < best_z {
            best_z = p[1];
        }
        let next_y = pts.get(i + 1).map_or(ref_y, |n| n[0]);
        area += (next_y - p[0]) * (ref_z - best_z);
    }
    area
}

/// Exact hypervolume of the union of boxes `[p, ref]` in three dimensions.
///
/// Points that are not strictly better than the reference on every axis
/// contribute nothing and are dropped. The volume is accumulated slice by
/// slice along the first axis, each slice being a 2-D sweep.
pub fn hypervolume(points: &[[f64; 3]], reference: [f64; 3]) -> f64 {
    let mut pts: Vec<[f64; 3]> = points
        .iter()
        .filter(|p| (0..3).all(|k| p[k] < reference[k]))
        .copied()
        .collect();
    if pts.is_empty() {
        return 0.0;
    }
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut volume = 0.0;
    let mut slice: Vec<[f64; 2]> = Vec::with_capacity(pts.len());
    for i in 0..pts.len() {
        slice.push([pts[i][1], pts[i][2]]);
        let next_x = pts.get(i + 1).map_or(reference[0], |n| n[0]);
        let depth = next_x - pts[i][0];
        if depth > 0.0 {
            volume += depth * hypervolume_2d(&mut slice, reference[1], reference[2]);
        }
    }
    volume
}
