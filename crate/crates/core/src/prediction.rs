//! Kriging and Gaussian simulation in the deformed space.
//!
//! All systems are written in covariance form, `C(h) = total sill - γ₀(h)`,
//! which is valid because every admissible structure is bounded. The data
//! covariance matrix is factored once and reused for every target.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::par_map;
use crate::spatial::{Dataset, Location};
use crate::tps::ThinPlateSpline;
use crate::variogram::MixtureVariogram;

/// Largest number of locations the dense sampler will factor.
pub const DEFAULT_SIM_CAP: usize = 4000;
const FIRST_JITTER: f64 = 1e-10;
const LAST_JITTER: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrigingResult {
    pub estimate: f64,
    pub variance: f64,
    pub weights: Vec<f64>,
    /// Multiplier in the variogram convention: variance = Σ αᵢ γ₀(hᵢ₀) + lagrange.
    pub lagrange: f64,
}

impl KrigingResult {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanModel {
    pub mean: f64,
}

impl MeanModel {
    pub fn new(mean: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::InvalidInput("mean must be finite".into()));
        }
        Ok(Self { mean })
    }

    /// Arithmetic mean of the data values.
    pub fn from_data(data: &Dataset) -> Self {
        Self { mean: data.mean() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationEnsemble {
    /// One vector of target values per realization.
    pub realizations: Vec<Vec<f64>>,
    pub seed: u64,
}

impl SimulationEnsemble {
    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    /// Pointwise sample mean and (unbiased) variance across realizations.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.realizations.len() as f64;
        let width = self.realizations.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; width];
        for r in &self.realizations {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; width];
        for r in &self.realizations {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / (n - 1.0).max(1.0);
            }
        }
        (mean, var)
    }
}

fn covariance_matrix(points: &[Location], model: &MixtureVariogram) -> DMatrix<f64> {
    let n = points.len();
    let sill = model.total_sill();
    let mut c = DMatrix::from_element(n, n, sill);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = sill - model.value(points[i].dist_unchecked(&points[j]));
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// Up to ten index pairs of points closer than `tol` times the coordinate extent.
fn close_pairs(points: &[Location], tol: f64) -> Vec<(usize, usize)> {
    let extent = points
        .iter()
        .flat_map(|p| p.coords().iter().map(|v| v.abs()))
        .fold(1.0, f64::max);
    let mut pairs = vec![];
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if points[i].dist_unchecked(&points[j]) <= tol * extent {
                pairs.push((i, j));
                if pairs.len() == 10 {
                    return pairs;
                }
            }
        }
    }
    pairs
}

fn describe_pairs(pairs: &[(usize, usize)]) -> String {
    if pairs.is_empty() {
        "no near-duplicate deformed points found; the variogram model may be too smooth".into()
    } else {
        let list: Vec<String> = pairs.iter().map(|(i, j)| format!("({i}, {j})")).collect();
        format!("near-duplicate deformed points: {}", list.join(", "))
    }
}

/// Cholesky factor of `matrix + jitter·scale·I` with the jitter escalated by
/// powers of ten from `first` to `last`. Returns the factor and the jitter used.
fn factor_with_jitter(
    matrix: &DMatrix<f64>,
    scale: f64,
    first: Option<f64>,
    last: f64,
) -> Option<(Cholesky<f64, Dyn>, f64)> {
    if first.is_none() {
        if let Some(chol) = matrix.clone().cholesky() {
            return Some((chol, 0.0));
        }
    }
    let mut jitter = first.unwrap_or(FIRST_JITTER);
    while jitter <= last * 1.000001 {
        let mut m = matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter * scale;
        }
        if let Some(chol) = m.cholesky() {
            return Some((chol, jitter));
        }
        jitter *= 10.0;
    }
    None
}

/// Factored kriging system over data images in the deformed space.
#[derive(Clone, Debug)]
pub struct KrigingSystem {
    points: Vec<Location>,
    values: Vec<f64>,
    model: MixtureVariogram,
    chol: Cholesky<f64, Dyn>,
    cinv_one: DVector<f64>,
    one_cinv_one: f64,
    jitter: f64,
}

impl KrigingSystem {
    pub fn new(points: Vec<Location>, values: Vec<f64>, model: MixtureVariogram) -> Result<Self> {
        if points.is_empty() || points.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} points and {} values",
                points.len(),
                values.len()
            )));
        }
        let duplicates = close_pairs(&points, 1e-12);
        if !duplicates.is_empty() {
            return Err(Error::SingularSystem(describe_pairs(&duplicates)));
        }
        let c = covariance_matrix(&points, &model);
        let (chol, jitter) = factor_with_jitter(&c, model.total_sill(), None, FIRST_JITTER)
            .ok_or_else(|| Error::SingularSystem(describe_pairs(&close_pairs(&points, 1e-8))))?;
        let cinv_one = chol.solve(&DVector::from_element(points.len(), 1.0));
        let one_cinv_one = cinv_one.sum();
        Ok(Self {
            points,
            values,
            model,
            chol,
            cinv_one,
            one_cinv_one,
            jitter,
        })
    }

    /// Pushes the data through the deformation first.
    pub fn from_data(data: &Dataset, spline: &ThinPlateSpline, model: &MixtureVariogram) -> Result<Self> {
        let points = spline.eval_many(&data.locations())?;
        Self::new(points, data.values(), model.clone())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Location] {
        &self.points
    }

    pub fn model(&self) -> &MixtureVariogram {
        &self.model
    }

    /// Diagonal jitter (relative to the total sill) that made the system factorable.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn coincident(&self, u0: &Location) -> Option<usize> {
        self.points.iter().position(|p| p.dist2_unchecked(u0) == 0.0)
    }

    fn unit_result(&self, k: usize) -> KrigingResult {
        let mut weights = vec![0.0; self.len()];
        weights[k] = 1.0;
        KrigingResult {
            estimate: self.values[k],
            variance: 0.0,
            weights,
            lagrange: 0.0,
        }
    }

    fn target_covariances(&self, u0: &Location) -> DVector<f64> {
        let sill = self.model.total_sill();
        DVector::from_iterator(
            self.len(),
            self.points.iter().map(|p| sill - self.model.value(p.dist_unchecked(u0))),
        )
    }

    /// Ordinary kriging at a deformed target. A target that coincides with a
    /// data image returns that datum with zero variance.
    pub fn ordinary(&self, u0: &Location) -> KrigingResult {
        if let Some(k) = self.coincident(u0) {
            return self.unit_result(k);
        }
        let c0 = self.target_covariances(u0);
        let sk = self.chol.solve(&c0);
        let mu = (sk.sum() - 1.0) / self.one_cinv_one;
        let alpha = sk - &self.cinv_one * mu;
        let estimate = alpha.iter().zip(&self.values).map(|(a, z)| a * z).sum();
        let variance = self.model.total_sill() - alpha.dot(&c0) - mu;
        KrigingResult {
            estimate,
            variance: variance.max(0.0),
            weights: alpha.iter().copied().collect(),
            lagrange: -mu,
        }
    }

    /// Simple kriging with a known mean; the weights need not sum to one.
    pub fn simple(&self, u0: &Location, mean: MeanModel) -> KrigingResult {
        if let Some(k) = self.coincident(u0) {
            return self.unit_result(k);
        }
        let c0 = self.target_covariances(u0);
        let alpha = self.chol.solve(&c0);
        let estimate = mean.mean + alpha.iter().zip(&self.values).map(|(a, z)| a * (z - mean.mean)).sum::<f64>();
        let variance = self.model.total_sill() - alpha.dot(&c0);
        KrigingResult {
            estimate,
            variance: variance.max(0.0),
            weights: alpha.iter().copied().collect(),
            lagrange: 0.0,
        }
    }

    /// Leave-one-out ordinary kriging predictions and variances at every datum,
    /// from the closed form on the inverse of the bordered system.
    pub fn leave_one_out(&self) -> Vec<(f64, f64)> {
        let n = self.len();
        if n < 2 {
            return vec![];
        }
        let cinv = self.chol.inverse();
        let z = DVector::from_column_slice(&self.values);
        let cinv_z = &cinv * &z;
        let one_cinv_z = self.cinv_one.dot(&z);
        (0..n)
            .map(|i| {
                let q_ii = cinv[(i, i)] - self.cinv_one[i] * self.cinv_one[i] / self.one_cinv_one;
                let r_i = cinv_z[i] - self.cinv_one[i] * one_cinv_z / self.one_cinv_one;
                let error = r_i / q_ii;
                (self.values[i] - error, 1.0 / q_ii)
            })
            .collect()
    }
}

/// Ordinary kriging at geographic targets through the deformation.
pub fn ordinary_kriging(
    targets: &[Location],
    data: &Dataset,
    spline: &ThinPlateSpline,
    model: &MixtureVariogram,
) -> Result<Vec<KrigingResult>> {
    let system = KrigingSystem::from_data(data, spline, model)?;
    let images = spline.eval_many(targets)?;
    Ok(par_map(&images, |u| system.ordinary(u)))
}

/// Simple kriging with known mean at geographic targets through the deformation.
pub fn simple_kriging(
    targets: &[Location],
    data: &Dataset,
    spline: &ThinPlateSpline,
    model: &MixtureVariogram,
    mean: MeanModel,
) -> Result<Vec<KrigingResult>> {
    let system = KrigingSystem::from_data(data, spline, model)?;
    let images = spline.eval_many(targets)?;
    Ok(par_map(&images, |u| system.simple(u, mean)))
}

/// Dense Gaussian sampler with mean `m` and covariance `C(h)` over fixed points.
#[derive(Clone, Debug)]
pub struct GaussianSampler {
    lower: DMatrix<f64>,
    mean: f64,
    jitter: f64,
}

impl GaussianSampler {
    pub fn new(points: &[Location], model: &MixtureVariogram, mean: MeanModel, cap: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("no locations to simulate".into()));
        }
        if points.len() > cap {
            return Err(Error::TooLarge(points.len(), cap));
        }
        let c = covariance_matrix(points, model);
        let (chol, jitter) = factor_with_jitter(&c, model.total_sill(), Some(FIRST_JITTER), LAST_JITTER)
            .ok_or(Error::NotPositiveDefinite { jitter: LAST_JITTER })?;
        Ok(Self {
            lower: chol.unpack(),
            mean: mean.mean,
            jitter,
        })
    }

    pub fn len(&self) -> usize {
        self.lower.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.nrows() == 0
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let xi = DVector::from_iterator(self.len(), (0..self.len()).map(|_| StandardNormal.sample(rng)));
        (&self.lower * xi).iter().map(|v| v + self.mean).collect()
    }
}

/// Generator for realization `index` of a run seeded with `seed`; independent
/// of the order in which realizations are produced.
pub fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One unconditional draw at deformed-space locations.
pub fn unconditional_sim(
    locations: &[Location],
    model: &MixtureVariogram,
    mean: MeanModel,
    seed: u64,
) -> Result<Vec<f64>> {
    let sampler = GaussianSampler::new(locations, model, mean, DEFAULT_SIM_CAP)?;
    Ok(sampler.draw(&mut realization_rng(seed, 0)))
}

/// Conditional simulation by kriging the residual of an unconditional draw.
///
/// With simple-kriging weights `α(u)` and mean `m`: `y* = m + Σ αᵢ (yᵢ - m)`,
/// an unconditional draw `w` over targets and data images jointly, its own
/// kriged estimate `w*` from the draw at the data images, and `z = y* + w - w*`.
pub fn conditional_sim(
    targets: &[Location],
    data: &Dataset,
    spline: &ThinPlateSpline,
    model: &MixtureVariogram,
    mean: MeanModel,
    n_real: usize,
    seed: u64,
) -> Result<SimulationEnsemble> {
    if n_real == 0 {
        return Err(Error::InvalidInput("need at least one realization".into()));
    }
    let system = KrigingSystem::from_data(data, spline, model)?;
    let images = spline.eval_many(targets)?;
    let kriged: Vec<KrigingResult> = par_map(&images, |u| system.simple(u, mean));

    // Targets sitting on a data image reuse that datum's simulated value, so the
    // joint covariance stays nonsingular and conditioning is exact.
    let n = system.len();
    let mut union: Vec<Location> = system.points().to_vec();
    let slot: Vec<usize> = images
        .iter()
        .map(|u| match system.coincident(u) {
            Some(k) => k,
            None => {
                union.push(*u);
                union.len() - 1
            }
        })
        .collect();
    let sampler = GaussianSampler::new(&union, model, mean, DEFAULT_SIM_CAP)?;

    let indices: Vec<u64> = (0..n_real as u64).collect();
    let realizations = par_map(&indices, |&r| {
        let w = sampler.draw(&mut realization_rng(seed, r));
        kriged
            .iter()
            .zip(&slot)
            .map(|(k, &s)| {
                let w_star = mean.mean
                    + k.weights.iter().zip(&w[..n]).map(|(a, wi)| a * (wi - mean.mean)).sum::<f64>();
                k.estimate + w[s] - w_star
            })
            .collect()
    });
    Ok(SimulationEnsemble { realizations, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variogram::StructureKind;
    use rand::Rng;

    fn exp_model(sill: f64, range: f64) -> MixtureVariogram {
        MixtureVariogram::single(StructureKind::Exponential, sill, range).unwrap()
    }

    /// Ordinary kriging by solving the bordered variogram system directly.
    fn bordered_ok(points: &[Location], values: &[f64], model: &MixtureVariogram, u0: &Location) -> (f64, f64, Vec<f64>) {
        let n = points.len();
        let mut k = DMatrix::zeros(n + 1, n + 1);
        let mut rhs = DVector::zeros(n + 1);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = model.value(points[i].dist_unchecked(&points[j]));
            }
            k[(i, n)] = 1.0;
            k[(n, i)] = 1.0;
            rhs[i] = model.value(points[i].dist_unchecked(u0));
        }
        rhs[n] = 1.0;
        let sol = k.lu().solve(&rhs).unwrap();
        let est = (0..n).map(|i| sol[i] * values[i]).sum();
        let var = (0..n).map(|i| sol[i] * rhs[i]).sum::<f64>() + sol[n];
        (est, var, sol.iter().take(n).copied().collect())
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Location> {
        (0..n).map(|_| Location::xy(rng.random(), rng.random())).collect()
    }

    #[test]
    fn matches_bordered_variogram_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let pts = random_points(&mut rng, 12);
        let vals: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
        let model = MixtureVariogram::new(vec![
            crate::variogram::BasicStructure::nugget(0.1).unwrap(),
            crate::variogram::BasicStructure::new(StructureKind::Spherical, 1.3, 0.6).unwrap(),
        ])
        .unwrap();
        let sys = KrigingSystem::new(pts.clone(), vals.clone(), model.clone()).unwrap();
        for _ in 0..5 {
            let u0 = Location::xy(rng.random(), rng.random());
            let r = sys.ordinary(&u0);
            let (est, var, w) = bordered_ok(&pts, &vals, &model, &u0);
            assert!((r.estimate - est).abs() < 1e-10);
            assert!((r.variance - var).abs() < 1e-10);
            for (a, b) in r.weights.iter().zip(&w) {
                assert!((a - b).abs() < 1e-10);
            }
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            let via_lagrange: f64 = r
                .weights
                .iter()
                .zip(&pts)
                .map(|(a, p)| a * model.value(p.dist_unchecked(&u0)))
                .sum::<f64>()
                + r.lagrange;
            assert!((r.variance - via_lagrange).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_at_data_points() {
        let pts = vec![Location::xy(0.0, 0.0), Location::xy(1.0, 0.0), Location::xy(0.0, 1.0)];
        let sys = KrigingSystem::new(pts.clone(), vec![1.0, 2.0, 4.0], exp_model(1.0, 0.5)).unwrap();
        let r = sys.ordinary(&pts[2]);
        assert_eq!(r.estimate, 4.0);
        assert_eq!(r.variance, 0.0);
        // a target a hair away still interpolates to high accuracy
        let r = sys.ordinary(&Location::xy(1e-12, 1.0));
        assert!((r.estimate - 4.0).abs() < 1e-8);
    }

    #[test]
    fn single_datum() {
        let sys = KrigingSystem::new(vec![Location::x(0.3)], vec![7.5], exp_model(1.0, 1.0)).unwrap();
        let r = sys.ordinary(&Location::x(0.9));
        assert!((r.weights[0] - 1.0).abs() < 1e-14);
        assert!((r.estimate - 7.5).abs() < 1e-14);
    }

    #[test]
    fn symmetric_pair() {
        let sys = KrigingSystem::new(vec![Location::x(0.0), Location::x(1.0)], vec![2.0, 6.0], exp_model(1.0, 0.4)).unwrap();
        let r = sys.ordinary(&Location::x(0.5));
        assert!((r.weights[0] - 0.5).abs() < 1e-14);
        assert!((r.estimate - 4.0).abs() < 1e-13);
        // by hand: variance = γ(0.5) + λ with λ = γ(0.5) − γ(1)/2
        let m = exp_model(1.0, 0.4);
        let expect = 2.0 * m.value(0.5) - 0.5 * m.value(1.0);
        assert!((r.variance - expect).abs() < 1e-13);
    }

    #[test]
    fn duplicate_images_are_reported() {
        let pts = vec![Location::x(0.0), Location::x(0.0), Location::x(1.0)];
        let err = KrigingSystem::new(pts, vec![1.0, 2.0, 3.0], exp_model(1.0, 1.0)).unwrap_err();
        match err {
            Error::SingularSystem(msg) => assert!(msg.contains("(0, 1)"), "{msg}"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn leave_one_out_matches_refits() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pts = random_points(&mut rng, 15);
        let vals: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
        let model = exp_model(2.0, 0.3);
        let sys = KrigingSystem::new(pts.clone(), vals.clone(), model.clone()).unwrap();
        let loo = sys.leave_one_out();
        for i in 0..15 {
            let keep: Vec<usize> = (0..15).filter(|&k| k != i).collect();
            let sub = KrigingSystem::new(
                keep.iter().map(|&k| pts[k]).collect(),
                keep.iter().map(|&k| vals[k]).collect(),
                model.clone(),
            )
            .unwrap();
            let r = sub.ordinary(&pts[i]);
            assert!((loo[i].0 - r.estimate).abs() < 1e-9, "{i}");
            assert!((loo[i].1 - r.variance).abs() < 1e-9, "{i}");
        }
    }

    #[test]
    fn simple_kriging_known_mean() {
        let sys = KrigingSystem::new(vec![Location::x(0.0)], vec![3.0], exp_model(1.0, 1.0)).unwrap();
        let r = sys.simple(&Location::x(1.0), MeanModel::new(1.0).unwrap());
        let rho = (-1.0f64).exp();
        assert!((r.estimate - (1.0 + rho * 2.0)).abs() < 1e-14);
        assert!((r.variance - (1.0 - rho * rho)).abs() < 1e-14);
    }

    #[test]
    fn sampler_is_seed_deterministic() {
        let pts = vec![Location::x(0.0), Location::x(0.5)];
        let a = unconditional_sim(&pts, &exp_model(1.0, 1.0), MeanModel::new(0.0).unwrap(), 9).unwrap();
        let b = unconditional_sim(&pts, &exp_model(1.0, 1.0), MeanModel::new(0.0).unwrap(), 9).unwrap();
        let c = unconditional_sim(&pts, &exp_model(1.0, 1.0), MeanModel::new(0.0).unwrap(), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sampler_cap() {
        let pts: Vec<_> = (0..5).map(|i| Location::x(i as f64)).collect();
        let err = GaussianSampler::new(&pts, &exp_model(1.0, 1.0), MeanModel::new(0.0).unwrap(), 4).unwrap_err();
        assert!(matches!(err, Error::TooLarge(5, 4)));
    }

    #[test]
    fn single_location_draw_is_scaled_normal() {
        let model = exp_model(4.0, 1.0);
        let v = unconditional_sim(&[Location::x(0.0)], &model, MeanModel::new(3.0).unwrap(), 1).unwrap();
        let mut rng = realization_rng(1, 0);
        let xi: f64 = StandardNormal.sample(&mut rng);
        // the factor of 4·(1 + 1e-10) differs from 2 only in the last bits
        assert!((v[0] - (3.0 + 2.0 * xi)).abs() < 1e-9);
    }

    #[test]
    fn conditional_sim_honours_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let locs = random_points(&mut rng, 10);
        let vals: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let data = Dataset::from_parts(&locs, &vals).unwrap();
        let spline = ThinPlateSpline::identity(2);
        let mut targets = locs[..3].to_vec();
        targets.push(Location::xy(0.5, 0.5));
        let model = exp_model(1.0, 0.3);
        let ens = conditional_sim(&targets, &data, &spline, &model, MeanModel::from_data(&data), 25, 5).unwrap();
        assert_eq!(ens.len(), 25);
        for r in &ens.realizations {
            for k in 0..3 {
                assert!((r[k] - vals[k]).abs() < 1e-8);
            }
        }
        let again = conditional_sim(&targets, &data, &spline, &model, MeanModel::from_data(&data), 25, 5).unwrap();
        assert_eq!(ens, again);
    }
}
