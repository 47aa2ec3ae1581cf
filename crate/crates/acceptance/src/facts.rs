//! Marginals of the Adult fixture.

use faircompass_core::feature_distribution;

use crate::{adult_dataset, ensure, err, Outcome};

pub const ROWS: usize = 32_561;
pub const FEATURES: usize = 14;
pub const MALE_FRACTION: f64 = 0.6692;
pub const MALE_TOLERANCE: f64 = 0.001;
pub const HOURS_40_FRACTION: f64 = 0.467;
pub const HOURS_40_TOLERANCE: f64 = 0.01;

pub fn check() -> Outcome {
    let ds = adult_dataset(true)?;
    ensure!(ds.row_count() == ROWS, "{} rows, expected {ROWS}", ds.row_count());
    ensure!(
        ds.features().len() == FEATURES,
        "{} features, expected {FEATURES}",
        ds.features().len()
    );

    let sex = feature_distribution(&ds, "sex").map_err(err("sex"))?;
    let male = sex.fraction("Male").ok_or("no Male bin")?;
    ensure!(
        (male - MALE_FRACTION).abs() <= MALE_TOLERANCE,
        "male fraction {male:.4}"
    );
    let female = sex.fraction("Female").ok_or("no Female bin")?;
    ensure!(
        male > 1.9 * female,
        "male {male:.4} is not about twice female {female:.4}"
    );

    let hours = feature_distribution(&ds, "hours-per-week").map_err(err("hours"))?;
    let forty = hours.fraction("40").ok_or("no 40-hour bin")?;
    ensure!(
        (forty - HOURS_40_FRACTION).abs() <= HOURS_40_TOLERANCE,
        "40-hour fraction {forty:.4}"
    );
    Ok(format!("{ROWS} rows, male {male:.4}, 40 hours {forty:.4}"))
}
