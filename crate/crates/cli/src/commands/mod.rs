pub mod cv;
pub mod diag;
pub mod fit;
pub mod gen;
pub mod krige;
pub mod simulate;

use std::path::Path;

use serde::Serialize;
use spacedeform::tuning::Selection;

use crate::error::CliResult;
use crate::output::{num, write_csv, write_json};

#[derive(Serialize)]
struct Selected {
    lambda: f64,
    omega: f64,
    cv1_method: &'static str,
    cv2_method: &'static str,
}

fn score_cell(score: Option<f64>) -> String {
    score.map(num).unwrap_or_default()
}

/// `cv1.csv`, `cv2.csv` and `selected.json` in `dir`.
pub fn write_selection(dir: &Path, selection: &Selection) -> CliResult<()> {
    write_csv(
        &dir.join("cv1.csv"),
        &["lambda".into(), "score".into(), "status".into()],
        selection
            .cv1
            .entries
            .iter()
            .map(|e| vec![num(e.lambda), score_cell(e.score), e.status.to_string()]),
    )?;
    write_csv(
        &dir.join("cv2.csv"),
        &["lambda".into(), "omega".into(), "score".into(), "status".into()],
        selection.cv2.entries.iter().map(|e| {
            vec![
                num(e.lambda),
                e.omega.map(num).unwrap_or_default(),
                score_cell(e.score),
                e.status.to_string(),
            ]
        }),
    )?;
    write_json(
        &dir.join("selected.json"),
        &Selected {
            lambda: selection.hyper.lambda,
            omega: selection.hyper.omega,
            cv1_method: "leave-two-out kernel variogram error over all data pairs",
            cv2_method: "leave-one-out ordinary kriging with the deformation and variogram fitted once on all data",
        },
    )
}
