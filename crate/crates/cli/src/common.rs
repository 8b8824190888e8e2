//! Input loading and flag/config merging shared by the commands.

use std::fs;
use std::path::{Path, PathBuf};

use spacedeform::io::{read_dataset, read_locations};
use spacedeform::pipeline::default_anchors;
use spacedeform::{AnchorSet, Dataset, FitOptions, Location};

use crate::config::{check_counts, RunConfig};
use crate::error::{CliError, CliResult, Context};
use crate::ModelArgs;

pub struct LoadedData {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
    pub data: Dataset,
}

pub fn load_data(path: &Path) -> CliResult<LoadedData> {
    let bytes = fs::read(path).context(format!("reading {}", path.display()))?;
    let data = read_dataset(&bytes[..]).context(format!("data {}", path.display()))?;
    Ok(LoadedData {
        path: path.to_path_buf(),
        bytes,
        data,
    })
}

pub fn load_locations(path: &Path, dim: usize) -> CliResult<Vec<Location>> {
    let file = fs::File::open(path).context(format!("reading {}", path.display()))?;
    let locations = read_locations(file).context(format!("locations {}", path.display()))?;
    if locations[0].dim() != dim {
        return Err(CliError::data(format!(
            "{} has {}-dimensional locations but the data are {dim}-dimensional",
            path.display(),
            locations[0].dim()
        )));
    }
    Ok(locations)
}

/// The flag value, else the config value, else a usage error naming the flag.
pub fn required<T: Clone>(flag: Option<T>, config: &Option<T>, name: &str) -> CliResult<T> {
    flag.or_else(|| config.clone())
        .ok_or_else(|| CliError::usage(format!("--{name} is required (or set it in the config file)")))
}

pub fn out_dir(flag: Option<PathBuf>, config: &RunConfig) -> PathBuf {
    flag.or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("."))
}

/// Regular grid with `counts[a]` points along axis `a` of `bounds`, x fastest.
pub fn grid_points(bounds: &[(f64, f64)], counts: &[usize]) -> CliResult<Vec<Location>> {
    check_counts("grid", counts)?;
    if counts.len() != bounds.len() {
        return Err(CliError::usage(format!(
            "grid needs {} counts for {}-dimensional data, got {}",
            bounds.len(),
            bounds.len(),
            counts.len()
        )));
    }
    let axis = |a: usize, k: usize| {
        let (lo, hi) = bounds[a];
        if counts[a] == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * k as f64 / (counts[a] - 1) as f64
        }
    };
    Ok(match counts.len() {
        1 => (0..counts[0]).map(|i| Location::x(axis(0, i))).collect(),
        _ => (0..counts[1])
            .flat_map(|j| (0..counts[0]).map(move |i| (i, j)))
            .map(|(i, j)| Location::xy(axis(0, i), axis(1, j)))
            .collect(),
    })
}

pub fn fit_options(args: &ModelArgs, config: &RunConfig) -> CliResult<FitOptions> {
    let defaults = FitOptions::default();
    let options = FitOptions {
        tol: args.tol.or(config.fit.tol).unwrap_or(defaults.tol),
        max_iter: args.max_iter.or(config.fit.max_iter).unwrap_or(defaults.max_iter),
        n_lags: args.n_lags.or(config.fit.n_lags).unwrap_or(defaults.n_lags),
        max_dist: args.max_dist.or(config.fit.max_dist),
    };
    if !(options.tol > 0.0) || options.max_iter == 0 || options.n_lags < 2 {
        return Err(CliError::usage("--tol and --max-iter must be positive and --n-lags at least 2"));
    }
    if options.max_dist.is_some_and(|d| !(d > 0.0)) {
        return Err(CliError::usage("--max-dist must be positive"));
    }
    Ok(options)
}

pub fn anchors(args: &ModelArgs, config: &RunConfig, data: &Dataset) -> CliResult<AnchorSet> {
    let file = args.anchors.clone().or_else(|| if args.anchor_grid.is_some() { None } else { config.anchors.file.clone() });
    if let Some(path) = file {
        let points = load_locations(&path, data.dim())?;
        return Ok(AnchorSet::new(points).context(format!("anchors {}", path.display()))?);
    }
    match args.anchor_grid.clone().or_else(|| config.anchors.grid.clone()) {
        Some(counts) => {
            check_counts("anchor grid", &counts)?;
            if counts.len() != data.dim() {
                return Err(CliError::usage(format!(
                    "anchor grid needs {} counts for {}-dimensional data",
                    data.dim(),
                    data.dim()
                )));
            }
            Ok(AnchorSet::regular_grid(&data.bounding_box(), &counts).context("anchor grid")?)
        }
        None => Ok(default_anchors(data).context("default anchors")?),
    }
}

/// Search grids: the bandwidth grid defaults to fractions 0.15, 0.25, …, 0.85
/// of the largest side of the data box, the mixing grid to 0.05, 0.15, …, 0.95.
pub fn search_grids(args: &ModelArgs, config: &RunConfig, data: &Dataset) -> CliResult<(Vec<f64>, Vec<f64>, usize)> {
    let extent = data.bounding_box().iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
    let lambdas = args
        .lambda_grid
        .clone()
        .or_else(|| config.hyper.lambda_grid.clone())
        .unwrap_or_else(|| (0..8).map(|k| (0.15 + 0.1 * k as f64) * extent).collect());
    let omegas = args
        .omega_grid
        .clone()
        .or_else(|| config.hyper.omega_grid.clone())
        .unwrap_or_else(|| (0..10).map(|k| 0.05 + 0.1 * k as f64).collect());
    let shortlist = args
        .shortlist
        .or(config.hyper.shortlist)
        .unwrap_or(spacedeform::tuning::DEFAULT_SHORTLIST);
    if lambdas.is_empty() || omegas.is_empty() || shortlist == 0 {
        return Err(CliError::usage("search grids must be nonempty and --shortlist positive"));
    }
    if lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(CliError::usage("bandwidths must be positive"));
    }
    if omegas.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
        return Err(CliError::usage("mixing weights must lie in [0, 1]"));
    }
    Ok((lambdas, omegas, shortlist))
}
