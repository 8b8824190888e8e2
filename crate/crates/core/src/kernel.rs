//! Variogram cloud and the kernel estimator of the non-stationary variogram.
//!
//! The estimator at a pair of locations `(x, y)` is a local average of the
//! squared increments `(Z_k - Z_l)^2` weighted by the product kernel
//! `K(x, s_k; λ) K(y, s_l; λ)`, normalized by twice the total weight. The
//! double sum runs over all ordered pairs including `k = l`.
//!
//! Because the weight factorizes, both sums reduce to kernel moments of the
//! values around `x` and around `y`:
//!
//! ```text
//! Σ_kl a_k b_l (z_k - z_l)^2 = A2 B0 - 2 A1 B1 + A0 B2
//! Σ_kl a_k b_l              = A0 B0
//! ```
//!
//! with `A_r = Σ_k a_k z_k^r`. Values are centered on the data mean before
//! the moments are taken so the cancellation stays benign.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{Dataset, Location};

/// Isotropic bandwidth shared by both kernel factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    bandwidth: f64,
}

impl KernelSpec {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "kernel bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(Self { bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    #[inline]
    pub fn weight(&self, x: &Location, s: &Location) -> f64 {
        epanechnikov_at(x.dist2_unchecked(s), self.bandwidth)
    }
}

/// Unnormalized Epanechnikov kernel `1 - (d/λ)^2` on `d <= λ`, else 0.
pub fn epanechnikov(x: &Location, s: &Location, bandwidth: f64) -> f64 {
    epanechnikov_at(x.dist2_unchecked(s), bandwidth)
}

#[inline]
fn epanechnikov_at(dist2: f64, bandwidth: f64) -> f64 {
    let r2 = dist2 / (bandwidth * bandwidth);
    if r2 <= 1.0 {
        1.0 - r2
    } else {
        0.0
    }
}

/// Half squared increments `½(Z_i - Z_j)^2` for every ordered pair.
#[derive(Clone, Debug, PartialEq)]
pub struct VariogramCloud {
    entries: DMatrix<f64>,
}

impl VariogramCloud {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Iterate over `(i, j, value)` for all ordered pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| (0..n).map(move |j| (i, j, self.entries[(i, j)])))
    }
}

pub fn variogram_cloud(data: &Dataset) -> VariogramCloud {
    let z = data.values();
    let n = z.len();
    VariogramCloud {
        entries: DMatrix::from_fn(n, n, |i, j| 0.5 * (z[i] - z[j]).powi(2)),
    }
}

/// Kernel moments `(Σ K, Σ K z, Σ K z²)` of centered values about a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KernelMoments {
    pub mass: f64,
    pub first: f64,
    pub second: f64,
}

impl KernelMoments {
    /// Remove the contribution of one observation with kernel weight `w`.
    #[inline]
    pub fn without(self, w: f64, z: f64) -> Self {
        Self {
            mass: self.mass - w,
            first: self.first - w * z,
            second: self.second - w * z * z,
        }
    }
}

/// Evaluates the kernel estimator for one realization and one bandwidth.
#[derive(Clone, Debug)]
pub struct KernelEstimator {
    locations: Vec<Location>,
    centered: Vec<f64>,
    kernel: KernelSpec,
}

impl KernelEstimator {
    pub fn new(data: &Dataset, kernel: KernelSpec) -> Self {
        let mean = data.mean();
        Self {
            locations: data.locations(),
            centered: data.values().into_iter().map(|z| z - mean).collect(),
            kernel,
        }
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    /// Centered observation values in dataset order.
    pub fn centered_values(&self) -> &[f64] {
        &self.centered
    }

    pub fn moments(&self, x: &Location) -> KernelMoments {
        let mut m = KernelMoments::default();
        for (s, &z) in self.locations.iter().zip(&self.centered) {
            let w = self.kernel.weight(x, s);
            if w > 0.0 {
                m.mass += w;
                m.first += w * z;
                m.second += w * z * z;
            }
        }
        m
    }

    /// Estimate from precomputed moments; `None` when the kernel support is empty.
    #[inline]
    pub fn from_moments(a: &KernelMoments, b: &KernelMoments) -> Option<f64> {
        let denom = a.mass * b.mass;
        if !(denom > 0.0) {
            return None;
        }
        let num = a.second * b.mass - 2.0 * a.first * b.first + a.mass * b.second;
        Some((num / (2.0 * denom)).max(0.0))
    }

    pub fn estimate(&self, x: &Location, y: &Location) -> Option<f64> {
        if x == y {
            return Some(0.0);
        }
        Self::from_moments(&self.moments(x), &self.moments(y))
    }
}

/// Kernel estimate of the non-stationary variogram between `x` and `y`.
pub fn ns_variogram(x: &Location, y: &Location, data: &Dataset, bandwidth: f64) -> Result<f64> {
    for p in [x, y] {
        if p.dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                found: p.dim(),
            });
        }
    }
    let kernel = KernelSpec::new(bandwidth)?;
    KernelEstimator::new(data, kernel)
        .estimate(x, y)
        .ok_or(Error::EmptyKernelSupport {
            bandwidth,
            first: 0,
            second: 1,
        })
}
