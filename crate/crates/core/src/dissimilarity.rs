//! Composite anchor dissimilarities and the NMDS pair weights.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernel::{KernelEstimator, KernelMoments, KernelSpec};
use crate::spatial::{minmax_scale, AnchorSet, Dataset};

/// Mixture `ω Γ̃ + (1 - ω) D̃` of the scaled kernel variogram and scaled distances.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeDissimilarity {
    pub delta: DMatrix<f64>,
    pub lambda: f64,
    pub omega: f64,
}

impl CompositeDissimilarity {
    pub fn size(&self) -> usize {
        self.delta.nrows()
    }
}

/// Symmetric NMDS weights `p_ij`; only the off-diagonal entries are used.
#[derive(Clone, Debug, PartialEq)]
pub struct NmdsWeights {
    pub weights: DMatrix<f64>,
}

impl NmdsWeights {
    /// Uniform unit weights.
    pub fn uniform(m: usize) -> Self {
        Self {
            weights: DMatrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { 1.0 }),
        }
    }
}

fn anchor_moments(anchors: &AnchorSet, estimator: &KernelEstimator) -> Vec<KernelMoments> {
    anchors.points().iter().map(|x| estimator.moments(x)).collect()
}

fn check_dims(anchors: &AnchorSet, data: &Dataset) -> Result<()> {
    if anchors.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: anchors.dim(),
        });
    }
    Ok(())
}

/// Kernel variogram estimate between every pair of anchors.
pub fn gamma_matrix(anchors: &AnchorSet, data: &Dataset, lambda: f64) -> Result<DMatrix<f64>> {
    check_dims(anchors, data)?;
    let estimator = KernelEstimator::new(data, KernelSpec::new(lambda)?);
    let moments = anchor_moments(anchors, &estimator);
    let m = anchors.len();
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let v = KernelEstimator::from_moments(&moments[i], &moments[j]).ok_or(
                Error::EmptyKernelSupport {
                    bandwidth: lambda,
                    first: i,
                    second: j,
                },
            )?;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Convex combination of the separately min-max scaled matrices.
pub fn composite(
    gamma: &DMatrix<f64>,
    distances: &DMatrix<f64>,
    lambda: f64,
    omega: f64,
) -> Result<CompositeDissimilarity> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(Error::InvalidInput(format!("omega must lie in [0, 1], got {omega}")));
    }
    if gamma.shape() != distances.shape() {
        return Err(Error::InvalidInput(format!(
            "variogram matrix {:?} and distance matrix {:?} differ in shape",
            gamma.shape(),
            distances.shape()
        )));
    }
    let d = minmax_scale(distances)?;
    let delta = if omega == 0.0 {
        d
    } else {
        let g = minmax_scale(gamma)?;
        if omega == 1.0 {
            g
        } else {
            g * omega + d * (1.0 - omega)
        }
    };
    Ok(CompositeDissimilarity { delta, lambda, omega })
}

/// Kernel mass over all data pairs for each anchor pair, divided by the anchor distance.
pub fn nmds_weights(anchors: &AnchorSet, data: &Dataset, lambda: f64) -> Result<NmdsWeights> {
    check_dims(anchors, data)?;
    let estimator = KernelEstimator::new(data, KernelSpec::new(lambda)?);
    let moments = anchor_moments(anchors, &estimator);
    let pts = anchors.points();
    let m = anchors.len();
    let mut w = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let v = moments[i].mass * moments[j].mass / pts[i].dist_unchecked(&pts[j]);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(NmdsWeights { weights: w })
}
