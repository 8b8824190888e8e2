use spacedeform::variogram::gamma_ns;
use spacedeform::Location;

use crate::bundle::FitBundle;
use crate::common::{load_data, load_locations, out_dir, required};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{coord_header, coords, num, write_csv};
use crate::DiagArgs;

fn shifted(p: &Location, d: &[f64]) -> Location {
    match p.dim() {
        1 => Location::x(p.coord(0) + d[0]),
        _ => Location::xy(p.coord(0) + d[0], p.coord(1) + d[1]),
    }
}

/// Square grid of offsets with `k` steps per half-axis, clipped to the disc.
fn disc_offsets(dim: usize, radius: f64, k: usize) -> Vec<Vec<f64>> {
    let k = k as i64;
    let step = radius / k as f64;
    let steps: Vec<f64> = (-k..=k).map(|i| i as f64 * step).collect();
    match dim {
        1 => steps.iter().map(|&dx| vec![dx]).collect(),
        _ => steps
            .iter()
            .flat_map(|&dy| steps.iter().map(move |&dx| vec![dx, dy]))
            .filter(|d| d[0].hypot(d[1]) <= radius * (1.0 + 1e-12))
            .collect(),
    }
}

fn default_probes(bundle: &FitBundle) -> Vec<Location> {
    let at = |b: [f64; 2], t: f64| b[0] + t * (b[1] - b[0]);
    let ts = [0.25, 0.5, 0.75];
    match bundle.dim {
        1 => ts.iter().map(|&t| Location::x(at(bundle.bounds[0], t))).collect(),
        _ => ts
            .iter()
            .flat_map(|&ty| ts.iter().map(move |&tx| (tx, ty)))
            .map(|(tx, ty)| Location::xy(at(bundle.bounds[0], tx), at(bundle.bounds[1], ty)))
            .collect(),
    }
}

pub fn run(args: DiagArgs, config: &RunConfig) -> CliResult<()> {
    let bundle = FitBundle::load(&required(args.bundle, &config.bundle, "bundle")?)?;
    let spline = bundle.spline()?;
    let model = bundle.model()?;
    let dim = bundle.dim;
    let probes = match args.probes {
        Some(path) => load_locations(&path, dim)?,
        None => default_probes(&bundle),
    };
    let extent = bundle.bounds.iter().map(|b| b[1] - b[0]).fold(0.0, f64::max);
    let radius = args.radius.unwrap_or(0.25 * extent);
    if !(radius > 0.0 && radius.is_finite()) || args.resolution == 0 {
        return Err(CliError::usage("--radius and --resolution must be positive"));
    }
    let offsets = disc_offsets(dim, radius, args.resolution);
    let dir = out_dir(args.out, config);

    let mut header = vec!["probe".to_string()];
    header.extend(coord_header(&["px", "py"], dim));
    header.extend(coord_header(&["dx", "dy"], dim));
    header.push("gamma".into());
    let mut rows = Vec::with_capacity(probes.len() * offsets.len());
    for (id, p) in probes.iter().enumerate() {
        for d in &offsets {
            let g = gamma_ns(p, &shifted(p, d), &spline, &model)?;
            let mut row = vec![id.to_string()];
            row.extend(coords(p));
            row.extend(d.iter().map(|&v| num(v)));
            row.push(num(g));
            rows.push(row);
        }
    }
    write_csv(&dir.join("contours.csv"), &header, rows)?;

    let mut map_header = coord_header(&["x", "y"], dim);
    map_header.extend(coord_header(&["u", "v"], dim));
    if let Some(anchors) = &bundle.anchors {
        let mut rows = vec![];
        for a in anchors {
            let a = Location::new(a)?;
            let u = spline.eval(&a)?;
            rows.push(coords(&a).chain(coords(&u)).collect());
        }
        write_csv(&dir.join("anchors.csv"), &map_header, rows)?;
    }
    if let Some(path) = args.data.or_else(|| config.data.clone()) {
        let loaded = load_data(&path)?;
        let data = &loaded.data;
        let deformed = spline.eval_many(&data.locations())?;
        let mut header = map_header.clone();
        header.push("z".into());
        write_csv(
            &dir.join("deformed.csv"),
            &header,
            data.samples()
                .iter()
                .zip(&deformed)
                .map(|(s, u)| coords(&s.location).chain(coords(u)).chain([num(s.value)]).collect()),
        )?;
    }
    eprintln!("wrote contour samples for {} probes to {}", probes.len(), dir.display());
    Ok(())
}
