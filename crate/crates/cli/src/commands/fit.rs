use serde::Serialize;
use spacedeform::pipeline::{fit_deformation, fit_stationary};
use spacedeform::tps::fold_check;
use spacedeform::tuning::select;
use spacedeform::{DeformationFit, HyperParams};

use super::write_selection;
use crate::bundle::{FitBundle, Provenance, SplineParts, FORMAT_VERSION};
use crate::common::{anchors, fit_options, grid_points, load_data, out_dir, required, search_grids};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{coord_header, coords, num, write_csv, write_json, write_text};
use crate::FitArgs;

#[derive(Serialize)]
struct FoldSummary {
    probes: usize,
    positive: usize,
    negative: usize,
    fold_fraction: f64,
    min_jacobian: f64,
    max_jacobian: f64,
    folded: bool,
}

pub fn run(args: FitArgs, config: &RunConfig) -> CliResult<()> {
    let path = required(args.model.data.clone(), &config.data, "data")?;
    let loaded = load_data(&path)?;
    let data = &loaded.data;
    let options = fit_options(&args.model, config)?;
    let dir = out_dir(args.model.out.clone(), config);
    let stationary = args.stationary || config.fit.stationary.unwrap_or(false);

    let fit: DeformationFit = if stationary {
        fit_stationary(data, &options)?
    } else {
        let anchors = anchors(&args.model, config, data)?;
        let hyper = match (args.lambda.or(config.hyper.lambda), args.omega.or(config.hyper.omega)) {
            (Some(lambda), Some(omega)) => {
                HyperParams::new(lambda, omega).map_err(|e| CliError::usage(format!("--lambda/--omega: {e}")))?
            }
            (None, None) => {
                let (lambdas, omegas, shortlist) = search_grids(&args.model, config, data)?;
                let selection = select(data, &anchors, &lambdas, &omegas, shortlist, &options)?;
                write_selection(&dir, &selection)?;
                selection.hyper
            }
            _ => return Err(CliError::usage("--lambda and --omega must be given together")),
        };
        fit_deformation(data, &anchors, hyper, &options)?
    };

    let dim = data.dim();
    let bounds = data.bounding_box();
    let bundle = FitBundle {
        format: FORMAT_VERSION,
        provenance: Provenance::new(&loaded.path, &loaded.bytes, data.len()),
        dim,
        bounds: bounds.iter().map(|&(lo, hi)| [lo, hi]).collect(),
        stationary,
        hyper: fit.hyper,
        mean: data.mean(),
        anchors: fit.anchors.as_ref().map(|a| a.points().iter().map(|p| p.coords().to_vec()).collect()),
        stress: fit.stress.as_ref().map(|s| s.value),
        spline: SplineParts::from_spline(&fit.spline),
        variogram: fit.model.components().to_vec(),
    };
    write_json(&dir.join("bundle.json"), &bundle)?;
    write_text(&dir.join("spline.txt"), &fit.spline.to_text())?;
    write_text(&dir.join("variogram.txt"), &fit.model.to_text())?;

    let mut header = coord_header(&["x", "y"], dim);
    header.extend(coord_header(&["u", "v"], dim));
    header.push("z".into());
    write_csv(
        &dir.join("deformed.csv"),
        &header,
        data.samples()
            .iter()
            .zip(&fit.deformed)
            .map(|(s, u)| coords(&s.location).chain(coords(u)).chain([num(s.value)]).collect()),
    )?;

    if let Some(stress) = &fit.stress {
        write_csv(
            &dir.join("stress.csv"),
            &["iteration".into(), "stress".into()],
            stress.trace.iter().enumerate().map(|(k, s)| vec![k.to_string(), num(*s)]),
        )?;
    }

    let ev = &fit.experimental;
    write_csv(
        &dir.join("variogram.csv"),
        &["lag".into(), "mean_distance".into(), "count".into(), "experimental".into(), "fitted".into()],
        (0..ev.lags.len()).map(|k| {
            vec![
                num(ev.lags[k]),
                num(ev.mean_distance[k]),
                ev.counts[k].to_string(),
                if ev.counts[k] > 0 { num(ev.values[k]) } else { String::new() },
                num(fit.model.value(ev.mean_distance[k])),
            ]
        }),
    )?;

    let probe_counts = if dim == 1 { vec![1001] } else { vec![51, 51] };
    let fold = fold_check(&fit.spline, &grid_points(&bounds, &probe_counts)?)?;
    write_json(
        &dir.join("fold.json"),
        &FoldSummary {
            probes: fold.probes,
            positive: fold.positive,
            negative: fold.negative,
            fold_fraction: fold.fold_fraction,
            min_jacobian: fold.min_jacobian,
            max_jacobian: fold.max_jacobian,
            folded: fold.folded(),
        },
    )?;

    match fit.hyper {
        Some(h) => eprintln!("lambda {} omega {}", h.lambda, h.omega),
        None => eprintln!("stationary fit"),
    }
    if fold.folded() {
        eprintln!("warning: the deformation folds on {:.1}% of the probes", 100.0 * fold.fold_fraction);
    }
    eprintln!("wrote {}", dir.display());
    Ok(())
}
