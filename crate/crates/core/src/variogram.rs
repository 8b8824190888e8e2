//! Isotropic stationary variogram structures, their mixtures, the experimental
//! variogram in the deformed space and the composed non-stationary variogram.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::Location;
use crate::tps::ThinPlateSpline;

pub const DEFAULT_LAGS: usize = 15;
/// Relative sill below which a fitted component is dropped.
const PRUNE_FRACTION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureKind {
    Nugget,
    Exponential,
    Spherical,
    Gaussian,
    Cubic,
}

impl StructureKind {
    pub const RANGED: [StructureKind; 4] = [
        StructureKind::Exponential,
        StructureKind::Spherical,
        StructureKind::Gaussian,
        StructureKind::Cubic,
    ];

    /// Unit-sill value at distance `h` for scale `a`.
    pub fn unit(self, h: f64, a: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        match self {
            StructureKind::Nugget => 1.0,
            StructureKind::Exponential => 1.0 - (-h / a).exp(),
            StructureKind::Gaussian => 1.0 - (-(h / a) * (h / a)).exp(),
            StructureKind::Spherical => {
                let r = h / a;
                if r >= 1.0 {
                    1.0
                } else {
                    1.5 * r - 0.5 * r * r * r
                }
            }
            StructureKind::Cubic => {
                let r = h / a;
                if r >= 1.0 {
                    1.0
                } else {
                    let r2 = r * r;
                    let r3 = r2 * r;
                    7.0 * r2 - 8.75 * r3 + 3.5 * r3 * r2 - 0.75 * r3 * r2 * r2
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StructureKind::Nugget => "nugget",
            StructureKind::Exponential => "exponential",
            StructureKind::Spherical => "spherical",
            StructureKind::Gaussian => "gaussian",
            StructureKind::Cubic => "cubic",
        }
    }
}

impl fmt::Display for StructureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StructureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "nugget" | "nug" => StructureKind::Nugget,
            "exponential" | "exp" => StructureKind::Exponential,
            "spherical" | "sph" => StructureKind::Spherical,
            "gaussian" | "gau" => StructureKind::Gaussian,
            "cubic" | "cub" => StructureKind::Cubic,
            other => return Err(Error::Parse(format!("unknown structure kind {other:?}"))),
        })
    }
}

/// One bounded basic structure `c γ_k(h / a)`. The range is 0 for the nugget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasicStructure {
    pub kind: StructureKind,
    pub sill: f64,
    pub range: f64,
}

impl BasicStructure {
    pub fn new(kind: StructureKind, sill: f64, range: f64) -> Result<Self> {
        if !(sill > 0.0 && sill.is_finite()) {
            return Err(Error::InvalidInput(format!("sill must be positive, got {sill}")));
        }
        let range = if kind == StructureKind::Nugget {
            0.0
        } else if range > 0.0 && range.is_finite() {
            range
        } else {
            return Err(Error::InvalidInput(format!(
                "{kind} range must be positive, got {range}"
            )));
        };
        Ok(Self { kind, sill, range })
    }

    pub fn nugget(sill: f64) -> Result<Self> {
        Self::new(StructureKind::Nugget, sill, 0.0)
    }

    pub fn eval(&self, h: f64) -> f64 {
        self.sill * self.kind.unit(h, self.range)
    }
}

/// Nonnegative combination of basic structures: the variogram of the deformed space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureVariogram {
    components: Vec<BasicStructure>,
}

impl MixtureVariogram {
    pub fn new(components: Vec<BasicStructure>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("a mixture needs at least one component".into()));
        }
        Ok(Self { components })
    }

    pub fn single(kind: StructureKind, sill: f64, range: f64) -> Result<Self> {
        Self::new(vec![BasicStructure::new(kind, sill, range)?])
    }

    pub fn components(&self) -> &[BasicStructure] {
        &self.components
    }

    pub fn total_sill(&self) -> f64 {
        self.components.iter().map(|c| c.sill).sum()
    }

    pub fn nugget(&self) -> f64 {
        self.components
            .iter()
            .filter(|c| c.kind == StructureKind::Nugget)
            .map(|c| c.sill)
            .sum()
    }

    pub fn max_range(&self) -> f64 {
        self.components.iter().map(|c| c.range).fold(0.0, f64::max)
    }

    /// γ₀(h) for `h >= 0`, with no input check.
    #[inline]
    pub fn value(&self, h: f64) -> f64 {
        self.components.iter().map(|c| c.eval(h)).sum()
    }

    /// Covariance `C(h) = total sill - γ₀(h)`.
    #[inline]
    pub fn covariance(&self, h: f64) -> f64 {
        self.total_sill() - self.value(h)
    }

    /// The same model with every range multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::InvalidInput("range factor must be positive".into()));
        }
        Ok(Self {
            components: self
                .components
                .iter()
                .map(|c| BasicStructure {
                    range: c.range * factor,
                    ..*c
                })
                .collect(),
        })
    }

    /// One line per component: `kind sill range`.
    pub fn to_text(&self) -> String {
        self.components
            .iter()
            .map(|c| format!("{} {:.17e} {:.17e}\n", c.kind, c.sill, c.range))
            .collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let components = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|line| {
                let parts: Vec<&str> = line.split_whitespace().collect();
                let kind: StructureKind = parts[0].parse()?;
                let num = |i: usize| -> Result<f64> {
                    parts
                        .get(i)
                        .ok_or_else(|| Error::Parse(format!("missing field {i} in {line:?}")))?
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("{line:?}: {e}")))
                };
                let sill = num(1)?;
                let range = if kind == StructureKind::Nugget && parts.len() == 2 { 0.0 } else { num(2)? };
                BasicStructure::new(kind, sill, range)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }
}

pub fn gamma0_eval(model: &MixtureVariogram, h: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::InvalidInput(format!("lag must be nonnegative, got {h}")));
    }
    Ok(model.value(h))
}

/// γ(x, y) = γ₀(‖f(x) − f(y)‖).
pub fn gamma_ns(x: &Location, y: &Location, spline: &ThinPlateSpline, model: &MixtureVariogram) -> Result<f64> {
    let fx = spline.eval(x)?;
    let fy = spline.eval(y)?;
    Ok(model.value(fx.dist_unchecked(&fy)))
}

/// Binned half mean squared increments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentalVariogram {
    /// Bin midpoints.
    pub lags: Vec<f64>,
    /// Mean pair distance inside each bin (the midpoint when empty).
    pub mean_distance: Vec<f64>,
    pub values: Vec<f64>,
    pub counts: Vec<usize>,
    pub max_dist: f64,
}

impl ExperimentalVariogram {
    pub fn occupied(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn empty_bins(&self) -> Vec<usize> {
        (0..self.counts.len()).filter(|&k| self.counts[k] == 0).collect()
    }
}

/// Half the largest pairwise distance, the default variogram cutoff.
pub fn default_max_dist(points: &[Location]) -> f64 {
    let mut best: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(a.dist2_unchecked(b));
        }
    }
    0.5 * best.sqrt()
}

pub fn experimental_variogram(
    points: &[Location],
    values: &[f64],
    n_lags: usize,
    max_dist: f64,
) -> Result<ExperimentalVariogram> {
    if points.len() != values.len() {
        return Err(Error::InvalidInput(format!(
            "{} points but {} values",
            points.len(),
            values.len()
        )));
    }
    if n_lags < 2 {
        return Err(Error::InvalidInput("need at least 2 lag classes".into()));
    }
    if !(max_dist > 0.0 && max_dist.is_finite()) {
        return Err(Error::InvalidInput(format!("max_dist must be positive, got {max_dist}")));
    }
    let width = max_dist / n_lags as f64;
    let mut sums = vec![0.0; n_lags];
    let mut dists = vec![0.0; n_lags];
    let mut counts = vec![0usize; n_lags];
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = points[i].dist_unchecked(&points[j]);
            if d <= 0.0 || d > max_dist {
                continue;
            }
            let k = ((d / width).ceil() as usize).clamp(1, n_lags) - 1;
            let inc = values[i] - values[j];
            sums[k] += 0.5 * inc * inc;
            dists[k] += d;
            counts[k] += 1;
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::InvalidInput(format!("no pair lies within {max_dist}")));
    }
    let lags: Vec<f64> = (0..n_lags).map(|k| (k as f64 + 0.5) * width).collect();
    Ok(ExperimentalVariogram {
        mean_distance: (0..n_lags)
            .map(|k| if counts[k] > 0 { dists[k] / counts[k] as f64 } else { lags[k] })
            .collect(),
        values: (0..n_lags)
            .map(|k| if counts[k] > 0 { sums[k] / counts[k] as f64 } else { 0.0 })
            .collect(),
        lags,
        counts,
        max_dist,
    })
}

/// Candidate unit-sill structure for the mixture fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub kind: StructureKind,
    pub range: f64,
}

/// Nugget plus each ranged kind over a geometric range grid spanning the lags.
pub fn default_dictionary(ev: &ExperimentalVariogram) -> Vec<Candidate> {
    let width = ev.max_dist / ev.lags.len() as f64;
    let (lo, hi) = (width, 2.0 * ev.max_dist);
    let steps = 10;
    let ranges: Vec<f64> = (0..steps)
        .map(|k| lo * (hi / lo).powf(k as f64 / (steps - 1) as f64))
        .collect();
    let mut dict = vec![Candidate {
        kind: StructureKind::Nugget,
        range: 0.0,
    }];
    for kind in StructureKind::RANGED {
        dict.extend(ranges.iter().map(|&range| Candidate { kind, range }));
    }
    dict
}

/// Nonnegative least squares (Lawson–Hanson active set).
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.amax().max(1.0) * b.amax().max(1.0);
    for _outer in 0..(3 * n + 10) {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        for _inner in 0..(3 * n + 10) {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
            let z_sub = least_squares(&sub, b);
            let mut z = DVector::zeros(n);
            for (c, &k) in idx.iter().enumerate() {
                z[k] = z_sub[c];
            }
            if idx.iter().all(|&k| z[k] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for &k in &idx {
                if z[k] <= 0.0 {
                    let denom = x[k] - z[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[k] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            x += (&z - &x) * alpha;
            for &k in &idx {
                if x[k] <= 1e-15 {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
        }
    }
    x
}

fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Parsimonious nonnegative mixture matching the experimental variogram.
///
/// Lags are weighted by `count / lag²`; components carrying less than 1e-3 of
/// the total sill are pruned and the survivors refit.
pub fn fit_mixture(ev: &ExperimentalVariogram, dictionary: &[Candidate]) -> Result<MixtureVariogram> {
    let rows: Vec<usize> = (0..ev.counts.len()).filter(|&k| ev.counts[k] > 0).collect();
    if rows.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "mixture fit needs at least 2 occupied lags, found {}",
            rows.len()
        )));
    }
    if dictionary.is_empty() {
        return Err(Error::InvalidInput("empty structure dictionary".into()));
    }
    if rows.iter().all(|&k| ev.values[k] <= 0.0) {
        return Err(Error::NoSpatialStructure);
    }
    let weights: Vec<f64> = rows
        .iter()
        .map(|&k| (ev.counts[k] as f64).sqrt() / ev.mean_distance[k])
        .collect();
    let solve = |cands: &[Candidate]| -> DVector<f64> {
        let a = DMatrix::from_fn(rows.len(), cands.len(), |r, c| {
            let k = rows[r];
            weights[r] * cands[c].kind.unit(ev.mean_distance[k], cands[c].range)
        });
        let b = DVector::from_fn(rows.len(), |r, _| weights[r] * ev.values[rows[r]]);
        nnls(&a, &b)
    };

    let mut active: Vec<Candidate> = dictionary.to_vec();
    let mut sills = solve(&active);
    loop {
        let total: f64 = sills.sum();
        if !(total > 0.0) {
            return Err(Error::NoSpatialStructure);
        }
        let keep: Vec<usize> = (0..active.len())
            .filter(|&k| sills[k] >= PRUNE_FRACTION * total)
            .collect();
        if keep.len() == active.len() {
            break;
        }
        active = keep.iter().map(|&k| active[k]).collect();
        sills = solve(&active);
    }
    let components = active
        .iter()
        .zip(sills.iter())
        .map(|(c, &s)| BasicStructure::new(c.kind, s, c.range))
        .collect::<Result<Vec<_>>>()?;
    MixtureVariogram::new(components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nmds::Configuration;
    use crate::spatial::AnchorSet;
    use crate::tps::tps_fit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn basic_values() {
        let sph = MixtureVariogram::single(StructureKind::Spherical, 2.0, 1.0).unwrap();
        assert_eq!(gamma0_eval(&sph, 0.0).unwrap(), 0.0);
        assert!((gamma0_eval(&sph, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(gamma0_eval(&sph, 1e6).unwrap(), 2.0);
        let exp = MixtureVariogram::single(StructureKind::Exponential, 1.0, 1.0).unwrap();
        assert!((gamma0_eval(&exp, 1.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        let nug = MixtureVariogram::new(vec![BasicStructure::nugget(0.7).unwrap()]).unwrap();
        assert_eq!(gamma0_eval(&nug, 0.0).unwrap(), 0.0);
        assert_eq!(gamma0_eval(&nug, 1e-9).unwrap(), 0.7);
        assert!(gamma0_eval(&nug, -1.0).is_err());
        let cubic = MixtureVariogram::single(StructureKind::Cubic, 3.0, 0.5).unwrap();
        assert!((cubic.value(0.5) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_structures() {
        assert!(BasicStructure::new(StructureKind::Exponential, 0.0, 1.0).is_err());
        assert!(BasicStructure::new(StructureKind::Spherical, 1.0, 0.0).is_err());
        assert!(MixtureVariogram::new(vec![]).is_err());
    }

    #[test]
    fn structures_are_monotone_and_reach_sill() {
        for kind in StructureKind::RANGED {
            let mut prev = 0.0;
            for i in 0..=2000 {
                let h = i as f64 * 0.002;
                let v = kind.unit(h, 0.7);
                assert!(v >= prev - 1e-14, "{kind} decreases at {h}");
                prev = v;
            }
            assert!((kind.unit(100.0 * 0.7, 0.7) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn text_round_trip() {
        let m = MixtureVariogram::new(vec![
            BasicStructure::nugget(46.0).unwrap(),
            BasicStructure::new(StructureKind::Exponential, 21.0, 187.0).unwrap(),
            BasicStructure::new(StructureKind::Spherical, 89.0, 234.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(MixtureVariogram::from_text(&m.to_text()).unwrap(), m);
        assert_eq!(
            MixtureVariogram::from_text("nugget 2\n").unwrap().components()[0].sill,
            2.0
        );
        assert!(MixtureVariogram::from_text("linear 1 2\n").is_err());
    }

    fn brute_force_bins(points: &[Location], values: &[f64], n_lags: usize, max_dist: f64) -> (Vec<f64>, Vec<usize>) {
        let width = max_dist / n_lags as f64;
        let mut sums = vec![0.0; n_lags];
        let mut counts = vec![0; n_lags];
        for i in 0..points.len() {
            for j in 0..points.len() {
                if i >= j {
                    continue;
                }
                let d = ((points[i].coord(0) - points[j].coord(0)).powi(2)
                    + (points[i].coord(1) - points[j].coord(1)).powi(2))
                .sqrt();
                for k in 0..n_lags {
                    if d > k as f64 * width && d <= (k + 1) as f64 * width {
                        sums[k] += 0.5 * (values[i] - values[j]).powi(2);
                        counts[k] += 1;
                    }
                }
            }
        }
        let means = sums.iter().zip(&counts).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
        (means, counts)
    }

    #[test]
    fn experimental_examples() {
        let pts = [Location::xy(0.0, 0.0), Location::xy(0.3, 0.4)];
        let ev = experimental_variogram(&pts, &[1.0, 4.0], 5, 1.0).unwrap();
        assert_eq!(ev.occupied(), 1);
        assert_eq!(ev.counts[2], 1);
        assert_eq!(ev.values[2], 4.5);
        assert_eq!(ev.empty_bins(), vec![0, 1, 3, 4]);

        let ev = experimental_variogram(&pts, &[2.0, 2.0], 5, 1.0).unwrap();
        assert!(ev.values.iter().all(|&v| v == 0.0));
        assert!(experimental_variogram(&pts, &[1.0, 2.0], 5, 0.1).is_err());
        assert!(experimental_variogram(&pts, &[1.0, 2.0], 1, 1.0).is_err());
    }

    #[test]
    fn experimental_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pts: Vec<_> = (0..10).map(|_| Location::xy(rng.random(), rng.random())).collect();
        let vals: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ev = experimental_variogram(&pts, &vals, 6, 0.8).unwrap();
        let (means, counts) = brute_force_bins(&pts, &vals, 6, 0.8);
        assert_eq!(ev.counts, counts);
        for (a, b) in ev.values.iter().zip(&means) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    fn exact_ev(model: &MixtureVariogram, lags: &[f64]) -> ExperimentalVariogram {
        ExperimentalVariogram {
            lags: lags.to_vec(),
            mean_distance: lags.to_vec(),
            values: lags.iter().map(|&h| model.value(h)).collect(),
            counts: vec![100; lags.len()],
            max_dist: lags[lags.len() - 1] + 0.5 * (lags[1] - lags[0]),
        }
    }

    #[test]
    fn recovers_two_structure_mixture() {
        let truth = MixtureVariogram::new(vec![
            BasicStructure::new(StructureKind::Exponential, 62.0, 101.0).unwrap(),
            BasicStructure::new(StructureKind::Spherical, 102.0, 428.0).unwrap(),
        ])
        .unwrap();
        let lags: Vec<f64> = (0..15).map(|k| 20.0 + 40.0 * k as f64).collect();
        let ev = exact_ev(&truth, &lags);
        let mut dict = vec![];
        for kind in [StructureKind::Exponential, StructureKind::Spherical] {
            for range in [50.0, 101.0, 200.0, 428.0, 800.0] {
                dict.push(Candidate { kind, range });
            }
        }
        let fit = fit_mixture(&ev, &dict).unwrap();
        let sill_of = |kind, range| {
            fit.components()
                .iter()
                .filter(|c| c.kind == kind && c.range == range)
                .map(|c| c.sill)
                .sum::<f64>()
        };
        assert!((sill_of(StructureKind::Exponential, 101.0) - 62.0).abs() < 0.05 * 62.0, "{fit:?}");
        assert!((sill_of(StructureKind::Spherical, 428.0) - 102.0).abs() < 0.05 * 102.0, "{fit:?}");
    }

    #[test]
    fn single_spherical_is_exact() {
        let truth = MixtureVariogram::single(StructureKind::Spherical, 1.5, 0.4).unwrap();
        let lags: Vec<f64> = (0..15).map(|k| 0.025 + 0.05 * k as f64).collect();
        let ev = exact_ev(&truth, &lags);
        let fit = fit_mixture(&ev, &default_dictionary_with(&ev, 0.4)).unwrap();
        assert_eq!(fit.components().len(), 1, "{fit:?}");
        let resid: f64 = lags.iter().map(|&h| (fit.value(h) - truth.value(h)).abs()).fold(0.0, f64::max);
        assert!(resid <= 1e-8);
    }

    fn default_dictionary_with(ev: &ExperimentalVariogram, extra: f64) -> Vec<Candidate> {
        let mut d = default_dictionary(ev);
        d.push(Candidate { kind: StructureKind::Spherical, range: extra });
        d
    }

    #[test]
    fn white_noise_is_mostly_nugget() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let pts: Vec<_> = (0..400).map(|_| Location::xy(rng.random(), rng.random())).collect();
        let vals: Vec<f64> = (0..400).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let ev = experimental_variogram(&pts, &vals, DEFAULT_LAGS, default_max_dist(&pts)).unwrap();
        let fit = fit_mixture(&ev, &default_dictionary(&ev)).unwrap();
        assert!(fit.nugget() >= 0.9 * fit.total_sill(), "{fit:?}");
    }

    #[test]
    fn all_zero_variogram_has_no_structure() {
        let pts: Vec<_> = (0..5).map(|i| Location::x(i as f64)).collect();
        let ev = experimental_variogram(&pts, &[1.0; 5], 4, 4.0).unwrap();
        assert!(matches!(fit_mixture(&ev, &default_dictionary(&ev)), Err(Error::NoSpatialStructure)));
    }

    #[test]
    fn nnls_simple() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, -1.0, 0.0]);
        let x = nnls(&a, &b);
        assert!(x.iter().all(|&v| v >= 0.0));
        assert!(x[1].abs() < 1e-12);
        assert!((x[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gamma_ns_composition() {
        let model = MixtureVariogram::single(StructureKind::Exponential, 1.0, 0.3).unwrap();
        let id = ThinPlateSpline::identity(2);
        let x = Location::xy(0.1, 0.2);
        let y = Location::xy(0.6, 0.4);
        assert_eq!(gamma_ns(&x, &x, &id, &model).unwrap(), 0.0);
        assert_eq!(gamma_ns(&x, &y, &id, &model).unwrap(), model.value(x.dist_unchecked(&y)));

        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let anchors = AnchorSet::new((0..7).map(|_| Location::xy(rng.random(), rng.random())).collect()).unwrap();
        let images = Configuration {
            points: (0..7).map(|_| Location::xy(rng.random(), rng.random())).collect(),
        };
        let spline = tps_fit(&anchors, &images).unwrap();
        let fx = spline.eval(&x).unwrap();
        let fy = spline.eval(&y).unwrap();
        let d = ((fx.coord(0) - fy.coord(0)).powi(2) + (fx.coord(1) - fy.coord(1)).powi(2)).sqrt();
        assert!((gamma_ns(&x, &y, &spline, &model).unwrap() - gamma0_eval(&model, d).unwrap()).abs() < 1e-15);
    }
}
