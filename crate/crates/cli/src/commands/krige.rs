use std::path::PathBuf;

use serde::Serialize;
use spacedeform::io::read_dataset;
use spacedeform::prediction::ordinary_kriging;
use spacedeform::tuning::{score, ScoreReport};
use spacedeform::{Dataset, Location};

use crate::bundle::{sha256_hex, FitBundle};
use crate::common::{grid_points, load_data, load_locations, out_dir, required, LoadedData};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Context};
use crate::output::{coord_header, coords, num, write_csv, write_json};
use crate::{KrigeArgs, TargetArgs};

pub struct Inputs {
    pub bundle: FitBundle,
    pub data: LoadedData,
}

/// Loads the bundle and the conditioning data, falling back to the data
/// file recorded in the bundle.
pub fn load_inputs(args: &TargetArgs, config: &RunConfig) -> CliResult<Inputs> {
    let bundle_path = required(args.bundle.clone(), &config.bundle, "bundle")?;
    let bundle = FitBundle::load(&bundle_path)?;
    let data_path = args
        .data
        .clone()
        .or_else(|| config.data.clone())
        .unwrap_or_else(|| PathBuf::from(&bundle.provenance.data_path));
    let data = load_data(&data_path)?;
    if data.data.dim() != bundle.dim {
        return Err(CliError::data(format!(
            "{} is {}-dimensional but the bundle was fitted to {}-dimensional data",
            data_path.display(),
            data.data.dim(),
            bundle.dim
        )));
    }
    if sha256_hex(&data.bytes) != bundle.provenance.data_sha256 {
        eprintln!(
            "note: {} differs from the data the bundle was fitted to",
            data_path.display()
        );
    }
    Ok(Inputs { bundle, data })
}

/// Targets from a file or a grid over the bundle's data box, if either is set.
pub fn explicit_targets(args: &TargetArgs, config: &RunConfig, bundle: &FitBundle) -> CliResult<Option<Vec<Location>>> {
    let bounds: Vec<(f64, f64)> = bundle.bounds.iter().map(|b| (b[0], b[1])).collect();
    if let Some(path) = &args.targets {
        return load_locations(path, bundle.dim).map(Some);
    }
    if let Some(counts) = &args.target_grid {
        return grid_points(&bounds, counts).map(Some);
    }
    if let Some(path) = &config.targets.file {
        return load_locations(path, bundle.dim).map(Some);
    }
    if let Some(counts) = &config.targets.grid {
        return grid_points(&bounds, counts).map(Some);
    }
    Ok(None)
}

#[derive(Serialize)]
struct Scores {
    targets: usize,
    #[serde(flatten)]
    report: ScoreReport,
}

pub fn run(args: KrigeArgs, config: &RunConfig) -> CliResult<()> {
    let inputs = load_inputs(&args.targets, config)?;
    let truth_path = args.truth.or_else(|| config.targets.truth.clone());
    let truth: Option<Dataset> = match &truth_path {
        Some(p) => {
            let file = std::fs::File::open(p).context(format!("reading {}", p.display()))?;
            Some(read_dataset(file).context(format!("truth {}", p.display()))?)
        }
        None => None,
    };
    let targets = match (explicit_targets(&args.targets, config, &inputs.bundle)?, &truth) {
        (Some(_), Some(_)) => {
            return Err(CliError::usage("give either targets or --truth, not both; truth locations are the targets"))
        }
        (Some(t), None) => t,
        (None, Some(t)) => {
            if t.dim() != inputs.bundle.dim {
                return Err(CliError::data("truth dimension does not match the bundle"));
            }
            t.locations()
        }
        (None, None) => return Err(CliError::usage("--targets, --target-grid or --truth is required")),
    };

    let spline = inputs.bundle.spline()?;
    let model = inputs.bundle.model()?;
    let results = ordinary_kriging(&targets, &inputs.data.data, &spline, &model)?;
    let dir = out_dir(args.out, config);
    let mut header = coord_header(&["x", "y"], inputs.bundle.dim);
    header.extend(["estimate".to_string(), "std_dev".to_string()]);
    write_csv(
        &dir.join("predictions.csv"),
        &header,
        targets
            .iter()
            .zip(&results)
            .map(|(t, r)| coords(t).chain([num(r.estimate), num(r.std_dev())]).collect()),
    )?;
    if let Some(truth) = truth {
        let estimates: Vec<f64> = results.iter().map(|r| r.estimate).collect();
        let sds: Vec<f64> = results.iter().map(|r| r.std_dev()).collect();
        let report = score(&estimates, &sds, &truth.values())?;
        write_json(
            &dir.join("scores.json"),
            &Scores {
                targets: targets.len(),
                report,
            },
        )?;
        eprintln!("rmse {} crps {}", report.rmse, report.crps);
    }
    eprintln!("wrote {} predictions to {}", targets.len(), dir.display());
    Ok(())
}
