use serde::Serialize;
use spacedeform::synthetic::{gen_1d, gen_2d, range_2d, split, SyntheticField, TrueDeformation, RANGE_2D};
use spacedeform::{Dataset, Location};

use crate::common::out_dir;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{coord_header, coords, num, write_csv, write_json, write_text};
use crate::{Example, GenArgs};

#[derive(Serialize)]
struct GenReport {
    example: &'static str,
    seed: u64,
    locations: usize,
    deformation: TrueDeformation,
    variogram: String,
    /// Factor applied to the reference range so the field stays correlated on a coarse grid.
    range_scale: Option<f64>,
}

pub fn write_dataset(path: &std::path::Path, data: &Dataset) -> CliResult<()> {
    let mut header = coord_header(&["x", "y"], data.dim());
    header.push("z".into());
    write_csv(
        path,
        &header,
        data.samples().iter().map(|s| coords(&s.location).chain([num(s.value)]).collect()),
    )
}

fn write_truth(path: &std::path::Path, field: &SyntheticField) -> CliResult<()> {
    let dim = field.data.dim();
    let mut header = coord_header(&["x", "y"], dim);
    header.extend(coord_header(&["fx", "fy"], dim));
    let truth: Vec<Location> = field.true_deformed();
    write_csv(
        path,
        &header,
        field.data.samples().iter().zip(&truth).map(|(s, t)| coords(&s.location).chain(coords(t)).collect()),
    )
}

pub fn run(args: GenArgs, config: &RunConfig) -> CliResult<()> {
    let seed = args.seed.or(config.seed).unwrap_or(1);
    let dir = out_dir(args.out, config);
    let (field, name, range_scale) = match args.example {
        Example::OneD => (gen_1d(args.n, seed)?, "1d", None),
        Example::TwoD => (gen_2d(args.grid, seed)?, "2d", Some(range_2d(args.grid) / RANGE_2D)),
    };
    write_dataset(&dir.join("data.csv"), &field.data)?;
    write_truth(&dir.join("truth.csv"), &field)?;
    write_text(&dir.join("variogram.txt"), &field.model.to_text())?;
    if let Some(counts) = args.split {
        let [train_n, valid_n] = counts[..] else {
            return Err(CliError::usage("--split takes two counts, e.g. 1200,1000"));
        };
        if train_n == 0 || valid_n == 0 {
            return Err(CliError::usage("--split counts must be positive"));
        }
        let (train, valid) = split(&field.data, train_n, valid_n, seed)?;
        write_dataset(&dir.join("train.csv"), &train)?;
        write_dataset(&dir.join("valid.csv"), &valid)?;
    }
    write_json(
        &dir.join("gen.json"),
        &GenReport {
            example: name,
            seed,
            locations: field.data.len(),
            deformation: field.deformation,
            variogram: field.model.to_text(),
            range_scale,
        },
    )
}
