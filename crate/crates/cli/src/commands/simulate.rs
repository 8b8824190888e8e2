use serde::Serialize;
use spacedeform::prediction::{conditional_sim, simple_kriging};
use spacedeform::MeanModel;

use super::krige::{explicit_targets, load_inputs};
use crate::common::out_dir;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{coord_header, coords, num, write_csv, write_json};
use crate::SimulateArgs;

const DEFAULT_REALIZATIONS: usize = 100;

#[derive(Serialize)]
struct CheckReport {
    realizations: usize,
    targets: usize,
    /// Largest |realization − datum| over all data locations and realizations.
    max_data_misfit: f64,
    /// Largest |ensemble mean − simple kriging| in Monte Carlo standard errors.
    max_mean_z: f64,
    targets_within_3se: usize,
    /// Largest relative gap between ensemble and kriging variance.
    max_variance_rel_error: f64,
    targets_variance_within_10pct: usize,
}

pub fn run(args: SimulateArgs, config: &RunConfig) -> CliResult<()> {
    let inputs = load_inputs(&args.targets, config)?;
    let targets = explicit_targets(&args.targets, config, &inputs.bundle)?
        .ok_or_else(|| CliError::usage("--targets or --target-grid is required"))?;
    let n_real = args.n_real.or(config.simulate.n_real).unwrap_or(DEFAULT_REALIZATIONS);
    if n_real == 0 {
        return Err(CliError::usage("--n-real must be positive"));
    }
    let seed = args.seed.or(config.seed).unwrap_or(1);
    let spline = inputs.bundle.spline()?;
    let model = inputs.bundle.model()?;
    let mean = MeanModel::new(inputs.bundle.mean)?;
    let data = &inputs.data.data;

    // Data locations reuse the conditioning slots of the joint draw, so adding
    // them for the check leaves the realizations at the targets unchanged.
    let mut sites = targets.clone();
    if args.check {
        sites.extend(data.locations());
    }
    let ensemble = conditional_sim(&sites, data, &spline, &model, mean, n_real, seed)?;
    let nt = targets.len();

    let dir = out_dir(args.out, config);
    let mut header = coord_header(&["x", "y"], inputs.bundle.dim);
    header.extend((0..n_real).map(|r| format!("r{r}")));
    write_csv(
        &dir.join("simulations.csv"),
        &header,
        targets
            .iter()
            .enumerate()
            .map(|(k, t)| coords(t).chain(ensemble.realizations.iter().map(|r| num(r[k]))).collect()),
    )?;

    if args.check {
        let values = data.values();
        let max_data_misfit = ensemble
            .realizations
            .iter()
            .flat_map(|r| r[nt..].iter().zip(&values).map(|(v, z)| (v - z).abs()))
            .fold(0.0, f64::max);
        let (ens_mean, ens_var) = ensemble.moments();
        let sk = simple_kriging(&targets, data, &spline, &model, mean)?;
        let floor = 1e-12 * model.total_sill();
        let (mut max_z, mut within, mut max_rel, mut var_ok) = (0.0f64, 0, 0.0f64, 0);
        for (k, r) in sk.iter().enumerate() {
            let se = (ens_var[k] / n_real as f64).sqrt();
            let gap = (ens_mean[k] - r.estimate).abs();
            let z = if se > 0.0 { gap / se } else if gap <= floor { 0.0 } else { f64::INFINITY };
            max_z = max_z.max(z);
            within += usize::from(z <= 3.0);
            let rel = if r.variance > floor { (ens_var[k] - r.variance).abs() / r.variance } else { 0.0 };
            max_rel = max_rel.max(rel);
            var_ok += usize::from(rel <= 0.1);
        }
        let report = CheckReport {
            realizations: n_real,
            targets: nt,
            max_data_misfit,
            max_mean_z: max_z,
            targets_within_3se: within,
            max_variance_rel_error: max_rel,
            targets_variance_within_10pct: var_ok,
        };
        write_json(&dir.join("check.json"), &report)?;
        eprintln!(
            "data misfit {:e}; mean within 3 SE at {within}/{nt} targets; variance within 10% at {var_ok}/{nt}",
            max_data_misfit
        );
    }
    eprintln!("wrote {n_real} realizations at {nt} targets to {}", dir.display());
    Ok(())
}
