//! End-to-end estimation: anchors → dissimilarities → NMDS → thin-plate
//! spline → variogram mixture in the deformed space.

use crate::dissimilarity::{composite, gamma_matrix, nmds_weights};
use crate::error::{Result, StageContext};
use crate::nmds::{align_to, nmds_fit, Configuration, StressValue, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};
use crate::spatial::{pairwise_distances, AnchorSet, Dataset, Location};
use crate::tps::{tps_fit, ThinPlateSpline};
use crate::tuning::HyperParams;
use crate::variogram::{
    default_dictionary, default_max_dist, experimental_variogram, fit_mixture, ExperimentalVariogram,
    MixtureVariogram, DEFAULT_LAGS,
};

/// Largest default anchor count.
pub const MAX_DEFAULT_ANCHORS: usize = 125;

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub n_lags: usize,
    /// Variogram cutoff in the deformed space; half the largest deformed distance when unset.
    pub max_dist: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
            n_lags: DEFAULT_LAGS,
            max_dist: None,
        }
    }
}

/// A fitted deformation model together with the intermediate products.
#[derive(Clone, Debug)]
pub struct DeformationFit {
    /// `None` for the stationary baseline.
    pub hyper: Option<HyperParams>,
    pub anchors: Option<AnchorSet>,
    /// Anchor images after alignment to the anchors.
    pub configuration: Option<Configuration>,
    pub stress: Option<StressValue>,
    pub spline: ThinPlateSpline,
    pub model: MixtureVariogram,
    pub experimental: ExperimentalVariogram,
    /// Data locations pushed through the spline.
    pub deformed: Vec<Location>,
}

/// Regular anchor grid over the data bounding box with about
/// `min(125, n / 4)` points.
pub fn default_anchors(data: &Dataset) -> Result<AnchorSet> {
    let target = (data.len() / 4).clamp(4, MAX_DEFAULT_ANCHORS);
    let bounds = data.bounding_box();
    let counts = match data.dim() {
        1 => vec![target],
        _ => {
            let side = ((target as f64).sqrt().floor() as usize).max(2);
            vec![side, side]
        }
    };
    AnchorSet::regular_grid(&bounds, &counts)
}

/// Full non-stationary fit at fixed hyper-parameters.
pub fn fit_deformation(
    data: &Dataset,
    anchors: &AnchorSet,
    hyper: HyperParams,
    options: &FitOptions,
) -> Result<DeformationFit> {
    let gamma = gamma_matrix(anchors, data, hyper.lambda).stage("kernel variogram")?;
    let distances = pairwise_distances(anchors.points()).stage("anchor distances")?;
    let delta = composite(&gamma, &distances, hyper.lambda, hyper.omega).stage("dissimilarity")?;
    let weights = nmds_weights(anchors, data, hyper.lambda).stage("nmds weights")?;
    let (config, stress) =
        nmds_fit(&delta, &weights, anchors, options.tol, options.max_iter).stage("nmds")?;
    let (aligned, _) = align_to(&config, anchors).stage("alignment")?;
    let spline = tps_fit(anchors, &aligned).stage("thin-plate spline")?;
    let mut fit = fit_in_deformed_space(data, spline, options)?;
    fit.hyper = Some(hyper);
    fit.anchors = Some(anchors.clone());
    fit.configuration = Some(aligned);
    fit.stress = Some(stress);
    Ok(fit)
}

/// Stationary baseline: the identity deformation with the same variogram fit.
pub fn fit_stationary(data: &Dataset, options: &FitOptions) -> Result<DeformationFit> {
    fit_in_deformed_space(data, ThinPlateSpline::identity(data.dim()), options)
}

fn fit_in_deformed_space(data: &Dataset, spline: ThinPlateSpline, options: &FitOptions) -> Result<DeformationFit> {
    let deformed = spline.eval_many(&data.locations()).stage("deformation")?;
    let max_dist = options.max_dist.unwrap_or_else(|| default_max_dist(&deformed));
    let experimental =
        experimental_variogram(&deformed, &data.values(), options.n_lags, max_dist).stage("experimental variogram")?;
    let model = fit_mixture(&experimental, &default_dictionary(&experimental)).stage("variogram fit")?;
    Ok(DeformationFit {
        hyper: None,
        anchors: None,
        configuration: None,
        stress: None,
        spline,
        model,
        experimental,
        deformed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_field(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let locs: Vec<_> = (0..n).map(|_| Location::xy(rng.random(), rng.random())).collect();
        let vals: Vec<f64> = locs
            .iter()
            .map(|p| (6.0 * p.coord(0)).sin() + (4.0 * p.coord(1)).cos() + 0.05 * rng.random::<f64>())
            .collect();
        Dataset::from_parts(&locs, &vals).unwrap()
    }

    #[test]
    fn default_anchor_counts() {
        let data = smooth_field(200, 1);
        assert_eq!(default_anchors(&data).unwrap().len(), 49);
        let big = smooth_field(1000, 2);
        assert_eq!(default_anchors(&big).unwrap().len(), 121);
    }

    #[test]
    fn omega_zero_keeps_geography() {
        let data = smooth_field(150, 3);
        let anchors = AnchorSet::regular_grid(&[(0.0, 1.0), (0.0, 1.0)], &[5, 5]).unwrap();
        let fit = fit_deformation(&data, &anchors, HyperParams::new(0.5, 0.0).unwrap(), &FitOptions::default()).unwrap();
        for (a, u) in anchors.points().iter().zip(&fit.configuration.as_ref().unwrap().points) {
            assert!(a.dist_unchecked(u) < 1e-4, "{a:?} -> {u:?}");
        }
        assert!(fit.stress.unwrap().value < 1e-6);
    }

    #[test]
    fn stage_names_are_reported() {
        let data = smooth_field(40, 4);
        let anchors = AnchorSet::regular_grid(&[(-5.0, 6.0), (-5.0, 6.0)], &[3, 3]).unwrap();
        let err = fit_deformation(&data, &anchors, HyperParams::new(0.2, 0.5).unwrap(), &FitOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "kernel variogram", .. }), "{err}");
        assert!(err.is_numerical());
    }
}
