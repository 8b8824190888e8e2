//! Thin-plate spline deformation `f(x) = c + A x + Vᵀ σ(x)` through the anchors.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::nmds::Configuration;
use crate::spatial::{AnchorSet, GaugeTransform, Location};

/// Ridge added to the radial block when the plain solve is ill-conditioned.
const FALLBACK_RIDGE: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-8;

/// Radial basis `‖h‖² log ‖h‖`, zero at the origin.
pub fn sigma(h: &[f64]) -> f64 {
    let r2: f64 = h.iter().map(|v| v * v).sum();
    radial(r2)
}

#[inline]
fn radial(r2: f64) -> f64 {
    if r2 > 0.0 {
        0.5 * r2 * r2.ln()
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThinPlateSpline {
    /// `c`, length q.
    offset: DVector<f64>,
    /// `A`, q × p.
    affine: DMatrix<f64>,
    /// `V`, m × q.
    radial: DMatrix<f64>,
    centers: Vec<Location>,
    ridge: f64,
}

impl ThinPlateSpline {
    /// The identity map of dimension `dim`, with no radial part.
    pub fn identity(dim: usize) -> Self {
        Self {
            offset: DVector::zeros(dim),
            affine: DMatrix::identity(dim, dim),
            radial: DMatrix::zeros(0, dim),
            centers: Vec::new(),
            ridge: 0.0,
        }
    }

    pub fn from_parts(
        offset: DVector<f64>,
        affine: DMatrix<f64>,
        radial: DMatrix<f64>,
        centers: Vec<Location>,
    ) -> Result<Self> {
        let q = offset.len();
        let p = affine.ncols();
        if affine.nrows() != q || radial.ncols() != q || radial.nrows() != centers.len() || q != p {
            return Err(Error::InvalidInput(format!(
                "inconsistent spline shapes: c {q}, A {}x{}, V {}x{}, {} centers",
                affine.nrows(),
                affine.ncols(),
                radial.nrows(),
                radial.ncols(),
                centers.len()
            )));
        }
        if let Some(c) = centers.iter().find(|c| c.dim() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: c.dim(),
            });
        }
        Ok(Self {
            offset,
            affine,
            radial,
            centers,
            ridge: 0.0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.affine.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.affine.nrows()
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn affine(&self) -> &DMatrix<f64> {
        &self.affine
    }

    pub fn radial(&self) -> &DMatrix<f64> {
        &self.radial
    }

    pub fn centers(&self) -> &[Location] {
        &self.centers
    }

    /// Ridge used in the fit (0 unless the plain system was ill-conditioned).
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn eval(&self, x: &Location) -> Result<Location> {
        if x.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.dim(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &Location) -> Location {
        let q = self.output_dim();
        let p = self.input_dim();
        let mut out = [0.0; 2];
        for a in 0..q {
            let mut v = self.offset[a];
            for b in 0..p {
                v += self.affine[(a, b)] * x.coord(b);
            }
            out[a] = v;
        }
        for (k, c) in self.centers.iter().enumerate() {
            let s = radial(x.dist2_unchecked(c));
            if s != 0.0 {
                for (a, o) in out.iter_mut().enumerate().take(q) {
                    *o += self.radial[(k, a)] * s;
                }
            }
        }
        if q == 1 {
            Location::x(out[0])
        } else {
            Location::xy(out[0], out[1])
        }
    }

    pub fn eval_many(&self, xs: &[Location]) -> Result<Vec<Location>> {
        xs.iter().map(|x| self.eval(x)).collect()
    }

    /// Compose with a gauge: `x -> G(f(x))`.
    pub fn apply_gauge(&self, gauge: &GaugeTransform) -> Result<Self> {
        if gauge.dim() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                found: gauge.dim(),
            });
        }
        let g = gauge.matrix();
        Ok(Self {
            offset: g * &self.offset + gauge.offset(),
            affine: g * &self.affine,
            radial: &self.radial * g.transpose(),
            centers: self.centers.clone(),
            ridge: self.ridge,
        })
    }

    /// Max-norm residual of the side conditions `1ᵀV = 0`, `XᵀV = 0`.
    pub fn side_condition_residual(&self) -> f64 {
        let q = self.output_dim();
        let p = self.input_dim();
        let mut worst: f64 = 0.0;
        for a in 0..q {
            let sum: f64 = self.radial.column(a).sum();
            worst = worst.max(sum.abs());
            for b in 0..p {
                let moment: f64 = self
                    .centers
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c.coord(b) * self.radial[(k, a)])
                    .sum();
                worst = worst.max(moment.abs());
            }
        }
        worst
    }

    /// Flat text: `p q m`, then c, A, V and the centers, row-major.
    pub fn to_text(&self) -> String {
        let p = self.input_dim();
        let q = self.output_dim();
        let m = self.centers.len();
        let mut s = format!("{p} {q} {m}\n");
        let row = |s: &mut String, vals: &mut dyn Iterator<Item = f64>| {
            let parts: Vec<String> = vals.map(|v| format!("{v:.17e}")).collect();
            let _ = writeln!(s, "{}", parts.join(" "));
        };
        row(&mut s, &mut self.offset.iter().copied());
        for a in 0..q {
            row(&mut s, &mut self.affine.row(a).iter().copied());
        }
        for k in 0..m {
            row(&mut s, &mut self.radial.row(k).iter().copied());
        }
        for c in &self.centers {
            row(&mut s, &mut c.coords().iter().copied());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut next_row = |n: usize| -> Result<Vec<f64>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("spline text ended early".into()))?;
            let vals = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != n {
                return Err(Error::Parse(format!("expected {n} values, found {}", vals.len())));
            }
            Ok(vals)
        };
        let header = next_row(3)?;
        let (p, q, m) = (header[0] as usize, header[1] as usize, header[2] as usize);
        if p == 0 || p > 2 || q != p {
            return Err(Error::Parse(format!("unsupported spline dimensions p={p}, q={q}")));
        }
        let offset = DVector::from_vec(next_row(q)?);
        let mut affine = DMatrix::zeros(q, p);
        for a in 0..q {
            affine.set_row(a, &DMatrix::from_row_slice(1, p, &next_row(p)?).row(0));
        }
        let mut radial = DMatrix::zeros(m, q);
        for k in 0..m {
            radial.set_row(k, &DMatrix::from_row_slice(1, q, &next_row(q)?).row(0));
        }
        let centers = (0..m)
            .map(|_| next_row(p).and_then(|r| Location::new(&r)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(offset, affine, radial, centers)
    }
}

/// Interpolate `f(x_i) = u_i` under the side conditions.
pub fn tps_fit(anchors: &AnchorSet, images: &Configuration) -> Result<ThinPlateSpline> {
    let m = anchors.len();
    let p = anchors.dim();
    if images.len() != m {
        return Err(Error::InvalidInput(format!(
            "{m} anchors but {} images",
            images.len()
        )));
    }
    if images.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: images.dim(),
        });
    }
    let x = anchors.points();
    let size = m + p + 1;
    let mut system = DMatrix::zeros(size, size);
    for i in 0..m {
        for j in (i + 1)..m {
            let s = radial(x[i].dist2_unchecked(&x[j]));
            system[(i, j)] = s;
            system[(j, i)] = s;
        }
        system[(i, m)] = 1.0;
        system[(m, i)] = 1.0;
        for b in 0..p {
            system[(i, m + 1 + b)] = x[i].coord(b);
            system[(m + 1 + b, i)] = x[i].coord(b);
        }
    }
    let mut rhs = DMatrix::zeros(size, p);
    for i in 0..m {
        for a in 0..p {
            rhs[(i, a)] = images.points[i].coord(a);
        }
    }

    let scale = rhs.amax().max(1.0);
    let mut solved = None;
    for ridge in [0.0, FALLBACK_RIDGE] {
        let mut sys = system.clone();
        for i in 0..m {
            sys[(i, i)] += ridge;
        }
        if let Some(sol) = sys.clone().lu().solve(&rhs) {
            let resid = (&sys * &sol - &rhs).amax();
            if sol.iter().all(|v| v.is_finite()) && resid <= RESIDUAL_TOL * scale {
                solved = Some((sol, ridge));
                break;
            }
        }
    }
    let Some((sol, ridge)) = solved else {
        return Err(Error::SingularSystem(
            "thin-plate spline system is singular; anchors may be collinear or nearly coincident".into(),
        ));
    };
    let radial_coef = sol.rows(0, m).into_owned();
    let offset = DVector::from_fn(p, |a, _| sol[(m, a)]);
    let affine = DMatrix::from_fn(p, p, |a, b| sol[(m + 1 + b, a)]);
    Ok(ThinPlateSpline {
        offset,
        affine,
        radial: radial_coef,
        centers: x.to_vec(),
        ridge,
    })
}

pub fn tps_eval(spline: &ThinPlateSpline, x: &Location) -> Result<Location> {
    spline.eval(x)
}

/// Finite-difference Jacobian sign survey over probe locations.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldReport {
    pub probes: usize,
    pub positive: usize,
    pub negative: usize,
    /// Share of probes whose Jacobian sign differs from the majority (0 = no fold seen).
    pub fold_fraction: f64,
    pub min_jacobian: f64,
    pub max_jacobian: f64,
}

impl FoldReport {
    pub fn folded(&self) -> bool {
        self.fold_fraction > 0.0
    }
}

pub fn jacobian_determinant(spline: &ThinPlateSpline, x: &Location, step: f64) -> f64 {
    let p = spline.input_dim();
    let shift = |axis: usize, d: f64| {
        let mut c = [x.coord(0), x.coord(1)];
        c[axis] += d;
        if p == 1 {
            Location::x(c[0])
        } else {
            Location::xy(c[0], c[1])
        }
    };
    let mut jac = [[0.0; 2]; 2];
    for b in 0..p {
        let fp = spline.eval_unchecked(&shift(b, step));
        let fm = spline.eval_unchecked(&shift(b, -step));
        for (a, row) in jac.iter_mut().enumerate().take(p) {
            row[b] = (fp.coord(a) - fm.coord(a)) / (2.0 * step);
        }
    }
    if p == 1 {
        jac[0][0]
    } else {
        jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0]
    }
}

pub fn fold_check(spline: &ThinPlateSpline, probes: &[Location]) -> Result<FoldReport> {
    if let Some(bad) = probes.iter().find(|x| x.dim() != spline.input_dim()) {
        return Err(Error::DimensionMismatch {
            expected: spline.input_dim(),
            found: bad.dim(),
        });
    }
    let extent = spline
        .centers()
        .iter()
        .chain(probes)
        .flat_map(|c| c.coords().to_vec())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    let step = 1e-6 * extent;
    let dets: Vec<f64> = probes.iter().map(|x| jacobian_determinant(spline, x, step)).collect();
    let positive = dets.iter().filter(|&&d| d > 0.0).count();
    let negative = dets.iter().filter(|&&d| d < 0.0).count();
    let majority = positive.max(negative);
    let n = dets.len();
    Ok(FoldReport {
        probes: n,
        positive,
        negative,
        fold_fraction: if n == 0 { 0.0 } else { (n - majority) as f64 / n as f64 },
        min_jacobian: dets.iter().copied().fold(f64::INFINITY, f64::min),
        max_jacobian: dets.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_anchors(rng: &mut ChaCha8Rng, m: usize) -> AnchorSet {
        AnchorSet::new((0..m).map(|_| Location::xy(rng.random(), rng.random())).collect()).unwrap()
    }

    #[test]
    fn sigma_values() {
        assert_eq!(sigma(&[0.0, 0.0]), 0.0);
        assert!(sigma(&[0.6, 0.8]).abs() < 1e-15);
        let e = std::f64::consts::E;
        assert!((sigma(&[e]) - e * e).abs() < 1e-12);
    }

    #[test]
    fn identity_data_gives_identity_map() {
        let anchors = AnchorSet::regular_grid(&[(0.0, 1.0), (0.0, 1.0)], &[4, 4]).unwrap();
        let s = tps_fit(&anchors, &Configuration::from_anchors(&anchors)).unwrap();
        assert!((s.affine() - DMatrix::identity(2, 2)).amax() < 1e-8);
        assert!(s.offset().amax() < 1e-8);
        assert!(s.radial().amax() < 1e-8);
        let x = Location::xy(0.37, 0.81);
        let fx = s.eval(&x).unwrap();
        assert!((fx.coord(0) - 0.37).abs() < 1e-8 && (fx.coord(1) - 0.81).abs() < 1e-8);
        let id = ThinPlateSpline::identity(2).eval(&x).unwrap();
        assert_eq!(id, x);
    }

    #[test]
    fn affine_images_have_no_radial_part() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let anchors = random_anchors(&mut rng, 9);
        let g = GaugeTransform::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, -0.4, 1.5]),
            DVector::from_vec(vec![1.0, -2.0]),
        )
        .unwrap();
        let images = Configuration::from_anchors(&anchors).transformed(&g).unwrap();
        let s = tps_fit(&anchors, &images).unwrap();
        assert!(s.radial().amax() < 1e-8);
        assert!((s.affine() - g.matrix()).amax() < 1e-8);

        let line = AnchorSet::new((0..5).map(|i| Location::x(i as f64 * 0.25)).collect()).unwrap();
        let doubled = Configuration {
            points: line.points().iter().map(|p| Location::x(2.0 * p.coord(0) + 1.0)).collect(),
        };
        let s = tps_fit(&line, &doubled).unwrap();
        assert!((s.affine()[(0, 0)] - 2.0).abs() < 1e-8);
        assert!((s.offset()[0] - 1.0).abs() < 1e-8);
        assert!(s.radial().amax() < 1e-8);
    }

    #[test]
    fn random_fit_interpolates_and_satisfies_side_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let anchors = random_anchors(&mut rng, 8);
        let images = Configuration {
            points: (0..8).map(|_| Location::xy(rng.random(), rng.random())).collect(),
        };
        let s = tps_fit(&anchors, &images).unwrap();
        for (x, u) in anchors.points().iter().zip(&images.points) {
            let f = s.eval(x).unwrap();
            assert!((f.coord(0) - u.coord(0)).abs() < 1e-8);
            assert!((f.coord(1) - u.coord(1)).abs() < 1e-8);
        }
        assert!(s.side_condition_residual() < 1e-8);

        // term-by-term evaluation
        let x = Location::xy(0.42, 0.13);
        let mut expect = [s.offset()[0], s.offset()[1]];
        for a in 0..2 {
            expect[a] += s.affine()[(a, 0)] * 0.42 + s.affine()[(a, 1)] * 0.13;
            for (k, c) in anchors.points().iter().enumerate() {
                expect[a] += s.radial()[(k, a)] * sigma(&[0.42 - c.coord(0), 0.13 - c.coord(1)]);
            }
        }
        let got = s.eval(&x).unwrap();
        assert!((got.coord(0) - expect[0]).abs() < 1e-12);
        assert!((got.coord(1) - expect[1]).abs() < 1e-12);
    }

    #[test]
    fn continuity_under_small_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let anchors = random_anchors(&mut rng, 8);
        let images = Configuration {
            points: (0..8).map(|_| Location::xy(rng.random(), rng.random())).collect(),
        };
        let s = tps_fit(&anchors, &images).unwrap();
        let x = Location::xy(0.5, 0.5);
        let y = Location::xy(0.5 + 1e-9, 0.5 - 1e-9);
        let (fx, fy) = (s.eval(&x).unwrap(), s.eval(&y).unwrap());
        assert!(fx.dist_unchecked(&fy) < 1e-6);
    }

    #[test]
    fn collinear_images_still_fit_but_collinear_anchors_are_rejected() {
        let line: Vec<_> = (0..5).map(|i| Location::xy(i as f64, i as f64)).collect();
        assert!(AnchorSet::new(line).is_err());
    }

    #[test]
    fn fold_detection() {
        let anchors = AnchorSet::regular_grid(&[(0.0, 1.0), (0.0, 1.0)], &[4, 4]).unwrap();
        let probes = AnchorSet::regular_grid(&[(0.1, 0.9), (0.1, 0.9)], &[9, 9]).unwrap();
        let identity = tps_fit(&anchors, &Configuration::from_anchors(&anchors)).unwrap();
        assert_eq!(fold_check(&identity, probes.points()).unwrap().fold_fraction, 0.0);

        // Swap the images of two interior neighbours to force a local fold.
        let mut images = Configuration::from_anchors(&anchors);
        images.points.swap(5, 6);
        let folded = tps_fit(&anchors, &images).unwrap();
        let report = fold_check(&folded, probes.points()).unwrap();
        assert!(report.fold_fraction > 0.0, "{report:?}");
    }

    #[test]
    fn monotone_1d_map_has_one_sign() {
        let anchors = AnchorSet::new((0..=10).map(|i| Location::x(i as f64 / 10.0)).collect()).unwrap();
        let images = Configuration {
            points: anchors.points().iter().map(|p| Location::x(p.coord(0).powi(4) + 0.05 * p.coord(0))).collect(),
        };
        let s = tps_fit(&anchors, &images).unwrap();
        let probes: Vec<_> = (1..200).map(|i| Location::x(i as f64 / 200.0)).collect();
        let r = fold_check(&s, &probes).unwrap();
        assert_eq!(r.negative, 0, "{r:?}");
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let anchors = random_anchors(&mut rng, 6);
        let images = Configuration {
            points: (0..6).map(|_| Location::xy(rng.random(), rng.random())).collect(),
        };
        let s = tps_fit(&anchors, &images).unwrap();
        let back = ThinPlateSpline::from_text(&s.to_text()).unwrap();
        assert!((back.radial() - s.radial()).amax() < 1e-12);
        assert!((back.affine() - s.affine()).amax() < 1e-12);
        assert_eq!(back.centers(), s.centers());
        assert!(ThinPlateSpline::from_text("2 2 1\n0 0\n").is_err());
    }

    #[test]
    fn gauge_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let anchors = random_anchors(&mut rng, 7);
        let images = Configuration {
            points: (0..7).map(|_| Location::xy(rng.random(), rng.random())).collect(),
        };
        let s = tps_fit(&anchors, &images).unwrap();
        let g = GaugeTransform::similarity(2, 1.7, 0.4, false, &[0.3, 0.2]).unwrap();
        let t = s.apply_gauge(&g).unwrap();
        let x = Location::xy(0.3, 0.9);
        let direct = g.apply(&s.eval(&x).unwrap()).unwrap();
        let composed = t.eval(&x).unwrap();
        assert!(direct.dist_unchecked(&composed) < 1e-12);
    }
}
