//! Geometric primitives: locations, datasets, anchor sets and affine gauges.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 2;

/// A point in geographic space `G` or deformed space `D` (dimension 1 or 2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location {
    coords: [f64; MAX_DIM],
    dim: usize,
}

impl Location {
    pub fn new(coords: &[f64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "locations must have 1 or 2 coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate in {coords:?}"
            )));
        }
        let mut buf = [0.0; MAX_DIM];
        buf[..coords.len()].copy_from_slice(coords);
        Ok(Self {
            coords: buf,
            dim: coords.len(),
        })
    }

    pub fn x(x: f64) -> Self {
        Self {
            coords: [x, 0.0],
            dim: 1,
        }
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Self {
            coords: [x, y],
            dim: 2,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    #[inline]
    pub fn coord(&self, axis: usize) -> f64 {
        self.coords[axis]
    }

    /// Squared Euclidean distance without a dimension check.
    #[inline]
    pub(crate) fn dist2_unchecked(&self, other: &Location) -> f64 {
        let dx = self.coords[0] - other.coords[0];
        let dy = self.coords[1] - other.coords[1];
        dx * dx + dy * dy
    }

    #[inline]
    pub(crate) fn dist_unchecked(&self, other: &Location) -> f64 {
        self.dist2_unchecked(other).sqrt()
    }

    /// Componentwise difference `self - other`.
    pub(crate) fn sub(&self, other: &Location) -> [f64; MAX_DIM] {
        [
            self.coords[0] - other.coords[0],
            self.coords[1] - other.coords[1],
        ]
    }
}

/// Euclidean distance between two locations of equal dimension.
pub fn distance(a: &Location, b: &Location) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    Ok(a.dist_unchecked(b))
}

/// Symmetric matrix of Euclidean distances with a zero diagonal.
pub fn pairwise_distances(points: &[Location]) -> Result<DMatrix<f64>> {
    if points.len() < 2 {
        return Err(Error::InvalidInput(
            "pairwise distances need at least two points".into(),
        ));
    }
    let dim = points[0].dim;
    if let Some(bad) = points.iter().find(|p| p.dim != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.dim,
        });
    }
    let m = points.len();
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let d = points[i].dist_unchecked(&points[j]);
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    Ok(out)
}

/// Min-max scale the off-diagonal entries of a square matrix to `[0, 1]`.
///
/// The diagonal is pinned at zero. Fails when every off-diagonal entry is
/// equal, since no affine map sends them onto `[0, 1]`.
pub fn minmax_scale(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = matrix.nrows();
    if m != matrix.ncols() || m < 2 {
        return Err(Error::InvalidInput(format!(
            "min-max scaling needs a square matrix of size >= 2, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let v = matrix[(i, j)];
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite entry at ({i}, {j})"
                    )));
                }
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if hi <= lo {
        return Err(Error::DegenerateScaling(lo));
    }
    let span = hi - lo;
    Ok(DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            0.0
        } else {
            ((matrix[(i, j)] - lo) / span).clamp(0.0, 1.0)
        }
    }))
}

/// One observation `Z(s_i)` at a location.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub location: Location,
    pub value: f64,
}

/// A single realization observed at `n` distinct locations.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    dim: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a dataset needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        let dim = samples[0].location.dim();
        let mut seen = HashSet::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if s.location.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.location.dim(),
                });
            }
            if !s.value.is_finite() {
                return Err(Error::InvalidInput(format!("sample {i} has a non-finite value")));
            }
            let key = (
                normalize_zero(s.location.coord(0)).to_bits(),
                normalize_zero(s.location.coord(1)).to_bits(),
            );
            if !seen.insert(key) {
                return Err(Error::InvalidInput(format!(
                    "sample {i} duplicates the coordinates {:?}",
                    s.location.coords()
                )));
            }
        }
        Ok(Self { samples, dim })
    }

    /// Build from parallel location and value slices.
    pub fn from_parts(locations: &[Location], values: &[f64]) -> Result<Self> {
        if locations.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} locations but {} values",
                locations.len(),
                values.len()
            )));
        }
        Self::new(
            locations
                .iter()
                .zip(values)
                .map(|(&location, &value)| Sample { location, value })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn locations(&self) -> Vec<Location> {
        self.samples.iter().map(|s| s.location).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.value).collect()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().map(|s| s.value).sum::<f64>() / self.len() as f64
    }

    /// Axis-aligned bounding box as `(min, max)` per axis.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|axis| {
                self.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                    let c = s.location.coord(axis);
                    (lo.min(c), hi.max(c))
                })
            })
            .collect()
    }

    /// Subset by sample indices, preserving the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(indices.iter().map(|&i| self.samples[i]).collect())
    }
}

fn normalize_zero(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

/// Representative locations used for NMDS and as thin-plate spline centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    points: Vec<Location>,
}

impl AnchorSet {
    pub fn new(points: Vec<Location>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidInput("empty anchor set".into()));
        };
        let dim = first.dim();
        if points.len() < dim + 2 {
            return Err(Error::InvalidInput(format!(
                "{} anchors are too few in dimension {dim}; need at least {}",
                points.len(),
                dim + 2
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            for (j, q) in points.iter().enumerate().take(i) {
                if p == q {
                    return Err(Error::InvalidInput(format!(
                        "anchors {j} and {i} coincide at {:?}",
                        p.coords()
                    )));
                }
            }
        }
        if dim == 2 && all_collinear(&points) {
            return Err(Error::InvalidInput(
                "anchors are collinear; the affine part is not identifiable".into(),
            ));
        }
        Ok(Self { points })
    }

    /// Regular grid with `counts[axis]` nodes per axis spanning `bounds[axis]`.
    pub fn regular_grid(bounds: &[(f64, f64)], counts: &[usize]) -> Result<Self> {
        if bounds.len() != counts.len() || bounds.is_empty() || bounds.len() > MAX_DIM {
            return Err(Error::InvalidInput(
                "grid bounds and counts must both have 1 or 2 entries".into(),
            ));
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::InvalidInput("grid counts must be at least 2".into()));
        }
        let axis = |a: usize, k: usize| {
            let (lo, hi) = bounds[a];
            lo + (hi - lo) * k as f64 / (counts[a] - 1) as f64
        };
        let points = match counts.len() {
            1 => (0..counts[0]).map(|i| Location::x(axis(0, i))).collect(),
            _ => {
                let mut pts = Vec::with_capacity(counts[0] * counts[1]);
                for j in 0..counts[1] {
                    for i in 0..counts[0] {
                        pts.push(Location::xy(axis(0, i), axis(1, j)));
                    }
                }
                pts
            }
        };
        Self::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[Location] {
        &self.points
    }
}

fn all_collinear(points: &[Location]) -> bool {
    let a = points[0];
    let Some(b) = points.iter().copied().max_by(|p, q| {
        a.dist2_unchecked(p).total_cmp(&a.dist2_unchecked(q))
    }) else {
        return true;
    };
    let ab = b.sub(&a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return true;
    }
    points.iter().all(|p| {
        let ap = p.sub(&a);
        let cross = ab[0] * ap[1] - ab[1] * ap[0];
        cross.abs() <= 1e-12 * len2
    })
}

/// Affine map `u -> A u + b` with a regular matrix `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeTransform {
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
}

impl GaugeTransform {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let p = matrix.nrows();
        if p == 0 || p > MAX_DIM || matrix.ncols() != p || offset.len() != p {
            return Err(Error::InvalidInput(format!(
                "gauge needs a square 1x1 or 2x2 matrix and matching offset, got {}x{} and {}",
                matrix.nrows(),
                matrix.ncols(),
                offset.len()
            )));
        }
        let det = matrix.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::InvalidInput("gauge matrix is singular".into()));
        }
        Ok(Self { matrix, offset })
    }

    /// Homothety plus rotation (and optional reflection) plus translation.
    pub fn similarity(dim: usize, scale: f64, angle: f64, reflect: bool, offset: &[f64]) -> Result<Self> {
        if scale <= 0.0 {
            return Err(Error::InvalidInput("similarity scale must be positive".into()));
        }
        let sign = if reflect { -1.0 } else { 1.0 };
        let matrix = match dim {
            1 => DMatrix::from_element(1, 1, sign * scale),
            2 => {
                let (s, c) = angle.sin_cos();
                DMatrix::from_row_slice(2, 2, &[c * scale, -s * scale * sign, s * scale, c * scale * sign])
            }
            _ => return Err(Error::InvalidInput(format!("unsupported dimension {dim}"))),
        };
        Self::new(matrix, DVector::from_column_slice(offset))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn apply(&self, u: &Location) -> Result<Location> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.dim(),
            });
        }
        let v = &self.matrix * DVector::from_column_slice(u.coords()) + &self.offset;
        Location::new(v.as_slice())
    }

    /// Uniform scale factor when the matrix is a scaled orthogonal matrix.
    pub fn similarity_scale(&self) -> Option<f64> {
        let p = self.dim();
        let gram = self.matrix.transpose() * &self.matrix;
        let s2 = gram[(0, 0)];
        let tol = 1e-10 * s2.max(1.0);
        for i in 0..p {
            for j in 0..p {
                let expect = if i == j { s2 } else { 0.0 };
                if (gram[(i, j)] - expect).abs() > tol {
                    return None;
                }
            }
        }
        Some(s2.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&Location::xy(0.0, 0.0), &Location::xy(3.0, 4.0)).unwrap(), 5.0);
        let p = Location::xy(0.3, -1.7);
        assert_eq!(distance(&p, &p).unwrap(), 0.0);
        assert_eq!(distance(&Location::x(0.0), &Location::x(0.25)).unwrap(), 0.25);
        assert!(matches!(
            distance(&Location::x(0.0), &Location::xy(0.0, 0.0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pairwise_small_line() {
        let pts = [Location::x(0.0), Location::x(1.0), Location::x(3.0)];
        let d = pairwise_distances(&pts).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 3.0, 1.0, 0.0, 2.0, 3.0, 2.0, 0.0]);
        assert_eq!(d, expect);
    }

    #[test]
    fn pairwise_matches_double_loop() {
        let pts: Vec<_> = [(0.1, 0.9), (0.4, 0.2), (0.77, 0.31), (0.05, 0.5), (0.6, 0.6)]
            .iter()
            .map(|&(x, y)| Location::xy(x, y))
            .collect();
        let d = pairwise_distances(&pts).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let (xi, yi) = (pts[i].coord(0), pts[i].coord(1));
                let (xj, yj) = (pts[j].coord(0), pts[j].coord(1));
                let expect = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
                assert!((d[(i, j)] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn minmax_examples() {
        let degenerate = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]);
        assert!(matches!(minmax_scale(&degenerate), Err(Error::DegenerateScaling(_))));

        let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 3.0, 1.0, 0.0, 2.0, 3.0, 2.0, 0.0]);
        let s = minmax_scale(&m).unwrap();
        assert_eq!(s[(0, 1)], 0.0);
        assert_eq!(s[(1, 2)], 0.5);
        assert_eq!(s[(0, 2)], 1.0);
        assert_eq!(s[(1, 1)], 0.0);
    }

    #[test]
    fn dataset_rejects_duplicates_and_singletons() {
        let a = Sample { location: Location::xy(0.0, 0.0), value: 1.0 };
        assert!(Dataset::new(vec![a]).is_err());
        assert!(Dataset::new(vec![a, a]).is_err());
        let b = Sample { location: Location::xy(0.0, 1.0), value: 2.0 };
        assert_eq!(Dataset::new(vec![a, b]).unwrap().len(), 2);
    }

    #[test]
    fn anchor_set_invariants() {
        assert!(AnchorSet::new(vec![Location::x(0.0), Location::x(1.0)]).is_err());
        let line: Vec<_> = (0..5).map(|i| Location::xy(i as f64, 2.0 * i as f64)).collect();
        assert!(AnchorSet::new(line).is_err());
        let grid = AnchorSet::regular_grid(&[(0.0, 1.0), (0.0, 2.0)], &[3, 4]).unwrap();
        assert_eq!(grid.len(), 12);
        assert_eq!(grid.points()[11], Location::xy(1.0, 2.0));
    }

    #[test]
    fn gauge_similarity_scale() {
        let g = GaugeTransform::similarity(2, 2.5, 0.7, true, &[1.0, -1.0]).unwrap();
        assert!((g.similarity_scale().unwrap() - 2.5).abs() < 1e-12);
        let shear = GaugeTransform::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
            DVector::zeros(2),
        )
        .unwrap();
        assert!(shear.similarity_scale().is_none());
        assert!(GaugeTransform::new(DMatrix::zeros(2, 2), DVector::zeros(2)).is_err());
    }

    proptest! {
        #[test]
        fn triangle_inequality(a in prop::array::uniform2(-10.0..10.0f64),
                               b in prop::array::uniform2(-10.0..10.0f64),
                               c in prop::array::uniform2(-10.0..10.0f64)) {
            let (a, b, c) = (Location::xy(a[0], a[1]), Location::xy(b[0], b[1]), Location::xy(c[0], c[1]));
            let ab = distance(&a, &b).unwrap();
            let bc = distance(&b, &c).unwrap();
            let ac = distance(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert_eq!(ab, distance(&b, &a).unwrap());
        }

        #[test]
        fn minmax_affine_invariance(vals in prop::collection::vec(0.0..5.0f64, 6),
                                    scale in 0.1..10.0f64,
                                    shift in -3.0..3.0f64) {
            // 4x4 symmetric matrix from 6 upper-triangle entries
            let mut m = DMatrix::zeros(4, 4);
            let mut k = 0;
            for i in 0..4 {
                for j in (i + 1)..4 {
                    m[(i, j)] = vals[k];
                    m[(j, i)] = vals[k];
                    k += 1;
                }
            }
            prop_assume!(vals.iter().any(|v| (v - vals[0]).abs() > 1e-6));
            let t = DMatrix::from_fn(4, 4, |i, j| if i == j { 0.0 } else { scale * m[(i, j)] + shift });
            let a = minmax_scale(&m).unwrap();
            let b = minmax_scale(&t).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert!((a[(i, j)] - b[(i, j)]).abs() < 1e-10);
                }
            }
        }
    }
}
