//! Hyper-parameter selection and predictive scores.
//!
//! The bandwidth is screened with a leave-two-out variogram criterion (CV1);
//! the best few bandwidths are then crossed with the mixing weights and
//! ranked by leave-one-out kriging error (CV2).

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::kernel::{KernelEstimator, KernelMoments, KernelSpec};
use crate::parallel::par_map;
use crate::pipeline::{fit_deformation, FitOptions};
use crate::prediction::KrigingSystem;
use crate::spatial::{AnchorSet, Dataset};

pub const DEFAULT_SHORTLIST: usize = 3;
/// Leave-two-out kernel mass below which a pair counts as unsupported.
const MIN_MASS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub lambda: f64,
    pub omega: f64,
}

impl HyperParams {
    pub fn new(lambda: f64, omega: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("bandwidth must be positive, got {lambda}")));
        }
        if !(0.0..=1.0).contains(&omega) {
            return Err(Error::InvalidInput(format!("omega must lie in [0, 1], got {omega}")));
        }
        Ok(Self { lambda, omega })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CvStage {
    Cv1,
    Cv2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CvStatus {
    Ok,
    /// Some pairs had no kernel support and were left out; the score is
    /// rescaled to the full pair count.
    Partial { skipped: usize },
    Undefined { reason: String },
}

impl fmt::Display for CvStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CvStatus::Ok => f.write_str("ok"),
            CvStatus::Partial { skipped } => write!(f, "partial: {skipped} pairs skipped"),
            CvStatus::Undefined { reason } => write!(f, "undefined: {reason}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub lambda: f64,
    /// Absent for CV1.
    pub omega: Option<f64>,
    pub score: Option<f64>,
    pub status: CvStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CVScores {
    pub stage: CvStage,
    pub entries: Vec<CvEntry>,
}

impl CVScores {
    /// Defined entries in ascending score, ties broken by smaller λ then ω.
    pub fn ranked(&self) -> Vec<&CvEntry> {
        let mut defined: Vec<&CvEntry> = self.entries.iter().filter(|e| e.score.is_some()).collect();
        defined.sort_by(|a, b| {
            a.score
                .unwrap()
                .total_cmp(&b.score.unwrap())
                .then(a.lambda.total_cmp(&b.lambda))
                .then(a.omega.unwrap_or(0.0).total_cmp(&b.omega.unwrap_or(0.0)))
        });
        defined
    }

    pub fn best(&self) -> Option<&CvEntry> {
        self.ranked().into_iter().next()
    }
}

/// Leave-two-out variogram criterion at one bandwidth:
/// `(1/n²) Σ_{i≠j} (γ̂₋ᵢ₋ⱼ(sᵢ, sⱼ) − γ*ᵢⱼ)²`.
pub fn cv1_score(data: &Dataset, lambda: f64) -> Result<CvEntry> {
    let estimator = KernelEstimator::new(data, KernelSpec::new(lambda)?);
    let locs = estimator.locations();
    let z = estimator.centered_values();
    let kernel = estimator.kernel();
    let moments: Vec<KernelMoments> = locs.iter().map(|s| estimator.moments(s)).collect();
    let n = locs.len();
    let mut total = 0.0;
    let mut evaluated = 0usize;
    let mut skipped = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let k_ij = kernel.weight(&locs[i], &locs[j]);
            let a = moments[i].without(1.0, z[i]).without(k_ij, z[j]);
            let b = moments[j].without(k_ij, z[i]).without(1.0, z[j]);
            if a.mass < MIN_MASS || b.mass < MIN_MASS {
                skipped += 2;
                continue;
            }
            let est = KernelEstimator::from_moments(&a, &b).unwrap_or(0.0);
            let cloud = 0.5 * (z[i] - z[j]) * (z[i] - z[j]);
            total += 2.0 * (est - cloud) * (est - cloud);
            evaluated += 2;
        }
    }
    let n2 = (n * n) as f64;
    let (score, status) = if evaluated == 0 {
        (
            None,
            CvStatus::Undefined {
                reason: format!("no pair has leave-two-out kernel support at bandwidth {lambda}"),
            },
        )
    } else if skipped == 0 {
        (Some(total / n2), CvStatus::Ok)
    } else {
        let scale = (n * (n - 1)) as f64 / evaluated as f64;
        (Some(total * scale / n2), CvStatus::Partial { skipped })
    };
    Ok(CvEntry {
        lambda,
        omega: None,
        score,
        status,
    })
}

pub fn cv1(data: &Dataset, lambda_grid: &[f64]) -> Result<CVScores> {
    if lambda_grid.is_empty() {
        return Err(Error::InvalidInput("empty bandwidth grid".into()));
    }
    for &l in lambda_grid {
        KernelSpec::new(l)?;
    }
    let entries = par_map(lambda_grid, |&l| cv1_score(data, l)).into_iter().collect::<Result<_>>()?;
    Ok(CVScores {
        stage: CvStage::Cv1,
        entries,
    })
}

/// Leave-one-out kriging error with the deformation and variogram fitted once
/// on all data.
pub fn cv2(data: &Dataset, hyper: HyperParams, anchors: &AnchorSet, options: &FitOptions) -> Result<f64> {
    let fit = fit_deformation(data, anchors, hyper, options)?;
    let system = KrigingSystem::new(fit.deformed, data.values(), fit.model)?;
    let loo = system.leave_one_out();
    let values = data.values();
    let sse: f64 = loo.iter().zip(&values).map(|((p, _), z)| (z - p) * (z - p)).sum();
    Ok(sse / values.len() as f64)
}

fn cv2_entry(data: &Dataset, hyper: HyperParams, anchors: &AnchorSet, options: &FitOptions) -> CvEntry {
    let (score, status) = match cv2(data, hyper, anchors, options) {
        Ok(s) if s.is_finite() => (Some(s), CvStatus::Ok),
        Ok(s) => (
            None,
            CvStatus::Undefined {
                reason: format!("non-finite score {s}"),
            },
        ),
        Err(e) => (None, CvStatus::Undefined { reason: e.to_string() }),
    };
    CvEntry {
        lambda: hyper.lambda,
        omega: Some(hyper.omega),
        score,
        status,
    }
}

/// Outcome of the two-stage search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub hyper: HyperParams,
    pub cv1: CVScores,
    pub cv2: CVScores,
}

fn sorted_grid(grid: &[f64]) -> Vec<f64> {
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// CV1 over the bandwidths, then CV2 on the `shortlist` best bandwidths
/// crossed with every mixing weight.
pub fn select(
    data: &Dataset,
    anchors: &AnchorSet,
    lambda_grid: &[f64],
    omega_grid: &[f64],
    shortlist: usize,
    options: &FitOptions,
) -> Result<Selection> {
    if lambda_grid.is_empty() || omega_grid.is_empty() {
        return Err(Error::InvalidInput("hyper-parameter grids must be nonempty".into()));
    }
    if shortlist == 0 {
        return Err(Error::InvalidInput("shortlist size must be positive".into()));
    }
    let lambdas = sorted_grid(lambda_grid);
    let omegas = sorted_grid(omega_grid);
    for &w in &omegas {
        HyperParams::new(1.0, w)?;
    }
    let cv1_scores = cv1(data, &lambdas)?;
    let short: Vec<f64> = cv1_scores.ranked().iter().take(shortlist).map(|e| e.lambda).collect();
    if short.is_empty() {
        return Err(Error::NoDefinedScore);
    }
    let mut pairs = vec![];
    for &l in &lambdas {
        if short.contains(&l) {
            pairs.extend(omegas.iter().map(|&w| HyperParams { lambda: l, omega: w }));
        }
    }
    let cv2_scores = CVScores {
        stage: CvStage::Cv2,
        entries: par_map(&pairs, |&hp| cv2_entry(data, hp, anchors, options)),
    };
    let best = cv2_scores.best().ok_or(Error::NoDefinedScore)?;
    let hyper = HyperParams {
        lambda: best.lambda,
        omega: best.omega.unwrap_or(0.0),
    };
    Ok(Selection {
        hyper,
        cv1: cv1_scores,
        cv2: cv2_scores,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub mae: f64,
    pub rmse: f64,
    /// Mean squared standardized error; 1 for calibrated predictions.
    pub nmse: f64,
    /// Summed negative log predictive density.
    pub logs: f64,
    pub crps: f64,
}

/// CRPS of a Gaussian predictive distribution for an error `e = truth − mean`.
pub fn gaussian_crps(error: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return error.abs();
    }
    let std = Normal::standard();
    let u = error / sigma;
    sigma * (u * (2.0 * std.cdf(u) - 1.0) + 2.0 * std.pdf(u) - 1.0 / PI.sqrt())
}

/// Scores Gaussian predictions. A zero standard deviation is allowed only
/// where the prediction is exact; such points add nothing to the scores that
/// need a density.
pub fn score(predictions: &[f64], std_devs: &[f64], truths: &[f64]) -> Result<ScoreReport> {
    let n = predictions.len();
    if n == 0 || std_devs.len() != n || truths.len() != n {
        return Err(Error::InvalidInput(format!(
            "score needs equal nonzero lengths, got {}, {}, {}",
            n,
            std_devs.len(),
            truths.len()
        )));
    }
    let (mut abs, mut sq, mut nmse, mut logs, mut crps) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..n {
        let e = truths[k] - predictions[k];
        let s = std_devs[k];
        if !(s >= 0.0) {
            return Err(Error::InvalidInput(format!("negative standard deviation at {k}")));
        }
        abs += e.abs();
        sq += e * e;
        crps += gaussian_crps(e, s);
        if s == 0.0 {
            if e != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "zero standard deviation with nonzero error at {k}"
                )));
            }
            continue;
        }
        nmse += (e / s) * (e / s);
        logs += 0.5 * (2.0 * PI * s * s).ln() + e * e / (2.0 * s * s);
    }
    let nf = n as f64;
    Ok(ScoreReport {
        mae: abs / nf,
        rmse: (sq / nf).sqrt(),
        nmse: nmse / nf,
        logs,
        crps: crps / nf,
    })
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut r = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = 0.5 * (start + end - 1) as f64 + 1.0;
        for &k in &order[start..end] {
            r[k] = avg;
        }
        start = end;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidInput("spearman needs two equal-length samples of size ≥ 2".into()));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::InvalidInput("spearman is undefined for a constant sample".into()));
    }
    Ok(sab / (saa * sbb).sqrt())
}
