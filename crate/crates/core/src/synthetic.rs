//! Synthetic non-stationary fields with known deformations.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::{realization_rng, GaussianSampler, MeanModel, DEFAULT_SIM_CAP};
use crate::spatial::{Dataset, Location};
use crate::variogram::{MixtureVariogram, StructureKind};

pub const EXPONENT_1D: i32 = 4;
pub const RANGE_1D: f64 = 0.125;
pub const RANGE_2D: f64 = 0.05;
/// Grid side the 2D range refers to.
pub const REFERENCE_SIDE_2D: usize = 200;
pub const DEFAULT_SIDE_2D: usize = 60;
pub const MIN_SIDE_2D: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrueDeformation {
    /// `f(x) = x^exponent` on [0, 1].
    Power1d { exponent: i32 },
    /// `f(s) = o + (s − o)‖s − o‖`.
    Radial2d { center: [f64; 2] },
}

impl TrueDeformation {
    pub fn apply(&self, s: &Location) -> Location {
        match *self {
            TrueDeformation::Power1d { exponent } => Location::x(s.coord(0).powi(exponent)),
            TrueDeformation::Radial2d { center } => {
                let dx = s.coord(0) - center[0];
                let dy = s.coord(1) - center[1];
                let r = dx.hypot(dy);
                Location::xy(center[0] + dx * r, center[1] + dy * r)
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrueDeformation::Power1d { .. } => 1,
            TrueDeformation::Radial2d { .. } => 2,
        }
    }
}

/// A synthetic dataset with its generating model.
#[derive(Clone, Debug)]
pub struct SyntheticField {
    pub data: Dataset,
    pub deformation: TrueDeformation,
    pub model: MixtureVariogram,
}

impl SyntheticField {
    pub fn true_deformed(&self) -> Vec<Location> {
        self.data.samples().iter().map(|s| self.deformation.apply(&s.location)).collect()
    }
}

fn simulate_at(locations: Vec<Location>, deformation: TrueDeformation, model: MixtureVariogram, seed: u64) -> Result<SyntheticField> {
    let deformed: Vec<Location> = locations.iter().map(|s| deformation.apply(s)).collect();
    let sampler = GaussianSampler::new(&deformed, &model, MeanModel::new(0.0)?, DEFAULT_SIM_CAP)?;
    let values = sampler.draw(&mut realization_rng(seed, 1));
    Ok(SyntheticField {
        data: Dataset::from_parts(&locations, &values)?,
        deformation,
        model,
    })
}

/// `n` uniform locations on [0, 1]; values are a zero-mean, unit-sill
/// exponential field (range 0.125) evaluated at `x⁴`.
pub fn gen_1d(n: usize, seed: u64) -> Result<SyntheticField> {
    if n < 2 {
        return Err(Error::InvalidInput("need at least 2 locations".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let locations: Vec<Location> = (0..n).map(|_| Location::x(rng.random())).collect();
    let model = MixtureVariogram::single(StructureKind::Exponential, 1.0, RANGE_1D)?;
    simulate_at(
        locations,
        TrueDeformation::Power1d { exponent: EXPONENT_1D },
        model,
        seed,
    )
}

/// Cubic range for a `side × side` grid: the reference range stretched so it
/// spans the same number of grid spacings as on the reference grid.
pub fn range_2d(side: usize) -> f64 {
    RANGE_2D * (REFERENCE_SIDE_2D - 1) as f64 / (side.max(2) - 1) as f64
}

/// Regular `side × side` grid on [0, 1]², values a zero-mean, unit-sill cubic
/// field at the radial deformation of the grid. Uses [`range_2d`].
pub fn gen_2d(side: usize, seed: u64) -> Result<SyntheticField> {
    gen_2d_with_range(side, range_2d(side), seed)
}

pub fn gen_2d_with_range(side: usize, range: f64, seed: u64) -> Result<SyntheticField> {
    if side < MIN_SIDE_2D {
        return Err(Error::InvalidInput(format!("grid side must be at least {MIN_SIDE_2D}")));
    }
    if side * side > DEFAULT_SIM_CAP {
        return Err(Error::InvalidInput(format!(
            "a {side}×{side} grid exceeds the {DEFAULT_SIM_CAP}-point simulation cap; use a side of at most {}",
            (DEFAULT_SIM_CAP as f64).sqrt().floor()
        )));
    }
    let step = 1.0 / (side - 1) as f64;
    let locations: Vec<Location> = (0..side * side)
        .map(|k| Location::xy((k % side) as f64 * step, (k / side) as f64 * step))
        .collect();
    let model = MixtureVariogram::single(StructureKind::Cubic, 1.0, range)?;
    simulate_at(locations, TrueDeformation::Radial2d { center: [0.5, 0.5] }, model, seed)
}

/// Disjoint random train/validation split.
pub fn split(data: &Dataset, train_n: usize, valid_n: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if train_n + valid_n > data.len() {
        return Err(Error::InvalidInput(format!(
            "{train_n} + {valid_n} exceeds the {} available samples",
            data.len()
        )));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((data.subset(&idx[..train_n])?, data.subset(&idx[train_n..train_n + valid_n])?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deformations() {
        let p = TrueDeformation::Power1d { exponent: 4 };
        assert_eq!(p.apply(&Location::x(0.0)).coord(0), 0.0);
        assert_eq!(p.apply(&Location::x(1.0)).coord(0), 1.0);
        assert_eq!(p.apply(&Location::x(0.5)).coord(0), 0.0625);
        let r = TrueDeformation::Radial2d { center: [0.5, 0.5] };
        assert_eq!(r.apply(&Location::xy(0.5, 0.5)), Location::xy(0.5, 0.5));
        let c = r.apply(&Location::xy(1.0, 1.0));
        let expect = 0.5 + 0.5 * 0.5f64.sqrt();
        assert!((c.coord(0) - expect).abs() < 1e-15 && (c.coord(1) - expect).abs() < 1e-15);
        assert!((expect - 0.8536).abs() < 1e-4);
        for k in 1..20 {
            let s = Location::xy(0.5 + 0.02 * k as f64, 0.5 + 0.01 * k as f64);
            let rad = (0.02f64.powi(2) + 0.01f64.powi(2)).sqrt() * k as f64;
            assert!((r.apply(&s).dist_unchecked(&Location::xy(0.5, 0.5)) - rad * rad).abs() < 1e-14);
        }
    }

    #[test]
    fn deformations_are_monotone() {
        let p = TrueDeformation::Power1d { exponent: 4 };
        let r = TrueDeformation::Radial2d { center: [0.5, 0.5] };
        let mut prev = -1.0;
        let mut prev_r = -1.0;
        for k in 0..=1000 {
            let t = k as f64 / 1000.0;
            let v = p.apply(&Location::x(t)).coord(0);
            assert!(v > prev || k == 0);
            prev = v;
            let s = Location::xy(0.5 + 0.5 * t * 0.6, 0.5 - 0.5 * t * 0.8);
            let d = r.apply(&s).dist_unchecked(&Location::xy(0.5, 0.5));
            assert!(d > prev_r || k == 0);
            prev_r = d;
        }
    }

    #[test]
    fn split_properties() {
        let locs: Vec<_> = (0..100).map(|i| Location::x(i as f64)).collect();
        let vals: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let data = Dataset::from_parts(&locs, &vals).unwrap();
        let (a, b) = split(&data, 60, 40, 1).unwrap();
        let mut all: Vec<f64> = a.values().into_iter().chain(b.values()).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, vals);
        let (a2, _) = split(&data, 60, 40, 1).unwrap();
        assert_eq!(a.values(), a2.values());
        let (a3, _) = split(&data, 60, 40, 2).unwrap();
        assert_ne!(a.values(), a3.values());
        assert!(split(&data, 60, 41, 1).is_err());
    }

    #[test]
    fn grid_limits() {
        assert!(gen_2d(9, 1).is_err());
        assert!(gen_2d(64, 1).is_err());
        assert!(gen_1d(1, 1).is_err());
    }

    #[test]
    fn range_scaling() {
        assert!((range_2d(200) - 0.05).abs() < 1e-15);
        assert!(range_2d(60) > 0.05);
    }
}
