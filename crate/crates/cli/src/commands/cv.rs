use spacedeform::tuning::select;

use super::write_selection;
use crate::common::{anchors, fit_options, load_data, out_dir, required, search_grids};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::CvArgs;

pub fn run(args: CvArgs, config: &RunConfig) -> CliResult<()> {
    let path = required(args.model.data.clone(), &config.data, "data")?;
    let loaded = load_data(&path)?;
    let options = fit_options(&args.model, config)?;
    let anchors = anchors(&args.model, config, &loaded.data)?;
    let (lambdas, omegas, shortlist) = search_grids(&args.model, config, &loaded.data)?;
    let selection = select(&loaded.data, &anchors, &lambdas, &omegas, shortlist, &options)?;
    let dir = out_dir(args.model.out, config);
    write_selection(&dir, &selection)?;
    eprintln!("lambda {} omega {}", selection.hyper.lambda, selection.hyper.omega);
    Ok(())
}
