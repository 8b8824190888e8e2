//! Weighted non-metric multidimensional scaling of the anchor points.
//!
//! The fit alternates a weighted monotone regression of the configuration
//! distances on the dissimilarities with a weighted Guttman transform
//! (SMACOF majorization step) toward the resulting disparities. Each accepted
//! update is checked against the normalized stress and backtracked by halving
//! when it fails to decrease, so the stress trace never increases.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dissimilarity::{CompositeDissimilarity, NmdsWeights};
use crate::error::{Error, Result};
use crate::spatial::{AnchorSet, GaugeTransform, Location};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 500;

/// Anchor images in the deformed space, one per anchor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub points: Vec<Location>,
}

impl Configuration {
    pub fn from_anchors(anchors: &AnchorSet) -> Self {
        Self {
            points: anchors.points().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Location::dim)
    }

    fn to_matrix(&self) -> DMatrix<f64> {
        let q = self.dim();
        DMatrix::from_fn(self.len(), q, |i, a| self.points[i].coord(a))
    }

    fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let points = (0..m.nrows())
            .map(|i| {
                let row: Vec<f64> = m.row(i).iter().copied().collect();
                Location::new(&row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points })
    }

    /// Apply an affine gauge to every point.
    pub fn transformed(&self, gauge: &GaugeTransform) -> Result<Self> {
        Ok(Self {
            points: self.points.iter().map(|p| gauge.apply(p)).collect::<Result<_>>()?,
        })
    }
}

/// Monotone regression values, in the order the targets were supplied.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneFit {
    pub fitted: Vec<f64>,
    /// Permutation that sorts the inputs by key (ties by target, then index).
    pub order: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressValue {
    pub value: f64,
    pub trace: Vec<f64>,
}

fn sort_order(keys: &[f64], targets: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| {
        keys[a]
            .total_cmp(&keys[b])
            .then_with(|| targets[a].total_cmp(&targets[b]))
            .then_with(|| a.cmp(&b))
    });
    order
}

/// Pool-adjacent-violators over targets already arranged in key order.
fn pava_sorted(targets: &[f64], weights: &[f64]) -> Vec<f64> {
    struct Block {
        weight: f64,
        weighted_sum: f64,
        plain_sum: f64,
        count: usize,
    }
    impl Block {
        fn value(&self) -> f64 {
            if self.weight > 0.0 {
                self.weighted_sum / self.weight
            } else {
                self.plain_sum / self.count as f64
            }
        }
    }

    let mut blocks: Vec<Block> = Vec::with_capacity(targets.len());
    for (&y, &w) in targets.iter().zip(weights) {
        blocks.push(Block {
            weight: w,
            weighted_sum: w * y,
            plain_sum: y,
            count: 1,
        });
        while blocks.len() > 1 {
            let n = blocks.len();
            if blocks[n - 2].value() <= blocks[n - 1].value() {
                break;
            }
            let last = blocks.pop().unwrap();
            let prev = blocks.last_mut().unwrap();
            prev.weight += last.weight;
            prev.weighted_sum += last.weighted_sum;
            prev.plain_sum += last.plain_sum;
            prev.count += last.count;
        }
    }
    let mut out = Vec::with_capacity(targets.len());
    for b in &blocks {
        let v = b.value();
        out.extend(std::iter::repeat_n(v, b.count));
    }
    out
}

/// Weighted least-squares fit non-decreasing in `keys` (primary treatment of ties).
pub fn weighted_isotonic_regression(targets: &[f64], keys: &[f64], weights: &[f64]) -> Result<MonotoneFit> {
    let n = targets.len();
    if keys.len() != n || weights.len() != n {
        return Err(Error::InvalidInput(format!(
            "isotonic regression inputs differ in length ({n}, {}, {})",
            keys.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
    }
    if !weights.iter().any(|&w| w > 0.0) {
        return Err(Error::InvalidInput("all isotonic regression weights are zero".into()));
    }
    let order = sort_order(keys, targets);
    Ok(fit_in_order(targets, weights, order))
}

fn fit_in_order(targets: &[f64], weights: &[f64], order: Vec<usize>) -> MonotoneFit {
    let t: Vec<f64> = order.iter().map(|&i| targets[i]).collect();
    let w: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
    let sorted = pava_sorted(&t, &w);
    let mut fitted = vec![0.0; targets.len()];
    for (k, &i) in order.iter().enumerate() {
        fitted[i] = sorted[k];
    }
    MonotoneFit { fitted, order }
}

/// Upper-triangle pairs with their dissimilarity and weight.
struct PairTable {
    first: Vec<usize>,
    second: Vec<usize>,
    delta: Vec<f64>,
    weight: Vec<f64>,
}

impl PairTable {
    fn new(delta: &CompositeDissimilarity, weights: &NmdsWeights, m: usize) -> Result<Self> {
        if delta.size() != m || weights.weights.nrows() != m || weights.weights.ncols() != m {
            return Err(Error::InvalidInput(format!(
                "dissimilarity ({}) / weight ({}) sizes do not match {m} points",
                delta.size(),
                weights.weights.nrows()
            )));
        }
        let cap = m * (m - 1) / 2;
        let mut t = PairTable {
            first: Vec::with_capacity(cap),
            second: Vec::with_capacity(cap),
            delta: Vec::with_capacity(cap),
            weight: Vec::with_capacity(cap),
        };
        for i in 0..m {
            for j in (i + 1)..m {
                let w = weights.weights[(i, j)];
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::InvalidInput(format!("invalid weight {w} at ({i}, {j})")));
                }
                t.first.push(i);
                t.second.push(j);
                t.delta.push(delta.delta[(i, j)]);
                t.weight.push(w);
            }
        }
        if !t.weight.iter().any(|&w| w > 0.0) {
            return Err(Error::InvalidInput("all NMDS weights are zero".into()));
        }
        Ok(t)
    }

    fn distances(&self, u: &DMatrix<f64>) -> Vec<f64> {
        self.first
            .iter()
            .zip(&self.second)
            .map(|(&i, &j)| (u.row(i) - u.row(j)).norm())
            .collect()
    }

    /// Normalized stress and the disparities achieving it.
    fn evaluate(&self, u: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
        let h = self.distances(u);
        let norm: f64 = h.iter().zip(&self.weight).map(|(h, w)| w * h * h).sum();
        if !(norm > 0.0) {
            return Err(Error::DegenerateConfiguration);
        }
        let fit = fit_in_order(&h, &self.weight, sort_order(&self.delta, &h));
        let raw: f64 = fit
            .fitted
            .iter()
            .zip(&h)
            .zip(&self.weight)
            .map(|((f, h), w)| w * (f - h) * (f - h))
            .sum();
        Ok(((raw / norm).sqrt(), fit.fitted))
    }
}

/// Normalized weighted stress of a configuration.
pub fn stress(
    config: &Configuration,
    delta: &CompositeDissimilarity,
    weights: &NmdsWeights,
) -> Result<StressValue> {
    let table = PairTable::new(delta, weights, config.len())?;
    let (value, _) = table.evaluate(&config.to_matrix())?;
    Ok(StressValue {
        value,
        trace: vec![value],
    })
}

fn guttman_operator(table: &PairTable, m: usize) -> Result<DMatrix<f64>> {
    let mut v: DMatrix<f64> = DMatrix::zeros(m, m);
    for k in 0..table.weight.len() {
        let (i, j, w) = (table.first[k], table.second[k], table.weight[k]);
        v[(i, j)] -= w;
        v[(j, i)] -= w;
        v[(i, i)] += w;
        v[(j, j)] += w;
    }
    // The Laplacian is singular by construction (translations); the
    // threshold must be relative to its scale or that null space leaks in.
    let scale = v.amax().max(f64::MIN_POSITIVE);
    v.pseudo_inverse(1e-10 * scale)
        .map_err(|e| Error::SingularSystem(format!("NMDS weight Laplacian: {e}")))
}

fn guttman_step(
    table: &PairTable,
    v_plus: &DMatrix<f64>,
    u: &DMatrix<f64>,
    disparities: &[f64],
    movable: &[bool],
) -> DMatrix<f64> {
    let m = u.nrows();
    let h = table.distances(u);
    let mut b = DMatrix::zeros(m, m);
    for k in 0..h.len() {
        if h[k] > 0.0 {
            let (i, j) = (table.first[k], table.second[k]);
            let c = table.weight[k] * disparities[k] / h[k];
            b[(i, j)] -= c;
            b[(j, i)] -= c;
            b[(i, i)] += c;
            b[(j, j)] += c;
        }
    }
    let mut next = v_plus * (b * u);
    for (i, &free) in movable.iter().enumerate() {
        if !free {
            next.set_row(i, &u.row(i));
        }
    }
    next
}

/// Fit the anchor images, starting from the anchor configuration itself.
pub fn nmds_fit(
    delta: &CompositeDissimilarity,
    weights: &NmdsWeights,
    init: &AnchorSet,
    tol: f64,
    max_iter: usize,
) -> Result<(Configuration, StressValue)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let m = init.len();
    let table = PairTable::new(delta, weights, m)?;
    let v_plus = guttman_operator(&table, m)?;
    let mut movable = vec![false; m];
    for k in 0..table.weight.len() {
        if table.weight[k] > 0.0 {
            movable[table.first[k]] = true;
            movable[table.second[k]] = true;
        }
    }

    let mut u = Configuration::from_anchors(init).to_matrix();
    let (mut s, mut disp) = table.evaluate(&u)?;
    let mut trace = vec![s];

    for iteration in 1..=max_iter {
        if s <= 1e-14 {
            break;
        }
        // Scale the disparities so that the current configuration is optimally
        // scaled against them; the Guttman step then cannot raise the
        // normalized stress.
        let eta2: f64 = table.distances(&u).iter().zip(&table.weight).map(|(h, w)| w * h * h).sum();
        let d2: f64 = disp.iter().zip(&table.weight).map(|(d, w)| w * d * d).sum();
        if d2 > 0.0 {
            let scale = eta2 / d2;
            disp.iter_mut().for_each(|d| *d *= scale);
        }
        let proposal = guttman_step(&table, &v_plus, &u, &disp, &movable);

        let mut accepted = None;
        let mut t = 1.0;
        for _ in 0..40 {
            let candidate = if t == 1.0 {
                proposal.clone()
            } else {
                &u + (&proposal - &u) * t
            };
            match table.evaluate(&candidate) {
                Ok((sc, dc)) if sc <= s => {
                    accepted = Some((candidate, sc, dc));
                    break;
                }
                Ok((sc, _)) if !sc.is_finite() => {
                    let mut tr = trace.clone();
                    tr.push(sc);
                    return Err(Error::StressIncrease { iteration, trace: tr });
                }
                _ => t *= 0.5,
            }
        }
        let Some((next, s_next, d_next)) = accepted else {
            break;
        };
        if s_next > s {
            let mut tr = trace.clone();
            tr.push(s_next);
            return Err(Error::StressIncrease { iteration, trace: tr });
        }
        let rel = (s - s_next) / s;
        u = next;
        s = s_next;
        disp = d_next;
        trace.push(s);
        if rel < tol {
            break;
        }
    }

    Ok((
        Configuration::from_matrix(&u)?,
        StressValue { value: s, trace },
    ))
}

/// Similarity (scale, orthogonal map, translation) bringing `config` closest
/// to `target` in least squares. Stress is unchanged by the result.
pub fn align_to(config: &Configuration, target: &AnchorSet) -> Result<(Configuration, GaugeTransform)> {
    let q = config.dim();
    if target.dim() != q || target.len() != config.len() {
        return Err(Error::InvalidInput("alignment needs matching configurations".into()));
    }
    let m = config.len();
    let u = config.to_matrix();
    let x = Configuration::from_anchors(target).to_matrix();
    let mu = u.row_mean();
    let mx = x.row_mean();
    let uc = DMatrix::from_fn(m, q, |i, a| u[(i, a)] - mu[a]);
    let xc = DMatrix::from_fn(m, q, |i, a| x[(i, a)] - mx[a]);
    let norm = uc.norm_squared();
    if !(norm > 0.0) {
        return Err(Error::DegenerateConfiguration);
    }
    let cross = uc.transpose() * &xc;
    let svd = cross.svd(true, true);
    let (Some(left), Some(right_t)) = (svd.u, svd.v_t) else {
        return Err(Error::SingularSystem("Procrustes SVD failed".into()));
    };
    let rotation = left * right_t; // maps centered rows of u onto x
    let scale = svd.singular_values.sum() / norm;
    let matrix = rotation.transpose() * scale;
    let offset = mx.transpose() - &matrix * mu.transpose();
    let gauge = GaugeTransform::new(matrix, offset)?;
    Ok((config.transformed(&gauge)?, gauge))
}
