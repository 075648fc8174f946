//! Synthetic case-control data shaped like the INTERSTROKE extract: the same
//! fifteen indicators, 13,712 rows split evenly into cases and controls. The
//! generating model is invented; only the schema and sampling design match.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nuisance::expit;
use crate::rng::{stage, Stream};

pub const INTERSTROKE_ROWS: usize = 13_712;
pub const OUTCOME: &str = "case";
pub const CONTINUOUS: [&str; 4] = ["age", "whr", "diet", "lipids"];
pub const DISCRETE: [&str; 10] = [
    "region",
    "smoking",
    "stress",
    "exercise",
    "diabetes",
    "heart_disease",
    "hypertension",
    "sex",
    "alcohol",
    "education",
];
pub const EXPOSURES: [&str; 6] = [
    "hypertension",
    "diabetes",
    "heart_disease",
    "smoking",
    "stress",
    "exercise",
];
pub const COLUMNS: [&str; 15] = [
    "case",
    "region",
    "smoking",
    "stress",
    "exercise",
    "diabetes",
    "heart_disease",
    "hypertension",
    "sex",
    "age",
    "whr",
    "alcohol",
    "diet",
    "lipids",
    "education",
];

/// Covariates for one exposure: every other indicator except the outcome,
/// plus the continuous and discrete columns to interact.
pub struct ExposureDesign {
    pub covariates: Vec<&'static str>,
    pub continuous: Vec<&'static str>,
    pub discrete: Vec<&'static str>,
}

pub fn exposure_design(exposure: &str) -> Result<ExposureDesign> {
    if !EXPOSURES.contains(&exposure) {
        return Err(Error::Argument(format!("unknown exposure `{exposure}`")));
    }
    let keep = |c: &&&str| **c != exposure && **c != OUTCOME;
    Ok(ExposureDesign {
        covariates: COLUMNS.iter().filter(keep).copied().collect(),
        continuous: CONTINUOUS.to_vec(),
        discrete: DISCRETE.iter().filter(keep).copied().collect(),
    })
}

/// Column-major table in [`COLUMNS`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTable {
    pub columns: Vec<Vec<f64>>,
}

impl SyntheticTable {
    pub fn nrows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        COLUMNS
            .iter()
            .position(|c| *c == name)
            .map(|j| self.columns[j].as_slice())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(COLUMNS)?;
        for i in 0..self.nrows() {
            w.write_record(self.columns.iter().map(|c| {
                let v = c[i];
                if v.fract() == 0.0 {
                    format!("{v:.0}")
                } else {
                    format!("{v:.3}")
                }
            }))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn bern(rng: &mut impl Rng, p: f64) -> f64 {
    (rng.random::<f64>() < p) as u8 as f64
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Draws people from a synthetic population and keeps them by outcome until
/// `per_arm` cases and `per_arm` controls are collected, cases first.
pub fn synthetic_interstroke(per_arm: usize, seed: u64) -> SyntheticTable {
    let mut rng = Stream::new(seed).path(&[stage::DATA, 0x7374_726b]).rng();
    let age_d = Normal::<f64>::new(62.0, 13.0).unwrap();
    let whr_d = Normal::<f64>::new(0.93, 0.08).unwrap();
    let diet_d = Normal::<f64>::new(50.0, 15.0).unwrap();
    let lip_d = Normal::<f64>::new(0.80, 0.25).unwrap();
    let mut cases: Vec<[f64; 15]> = Vec::with_capacity(per_arm);
    let mut controls: Vec<[f64; 15]> = Vec::with_capacity(per_arm);
    while cases.len() < per_arm || controls.len() < per_arm {
        let region = rng.random_range(1..=7) as f64;
        let sex = bern(&mut rng, 0.4);
        let age = round3(age_d.sample(&mut rng).clamp(18.0, 100.0));
        let whr = round3(whr_d.sample(&mut rng).clamp(0.5, 2.0));
        let diet = round3(diet_d.sample(&mut rng).clamp(0.0, 100.0));
        let lipids = round3(lip_d.sample(&mut rng).clamp(0.05, 2.0));
        let education = rng.random_range(1..=4) as f64;
        let alcohol = rng.random_range(1..=3) as f64;
        let ac = (age - 62.0) / 13.0;
        let wc = (whr - 0.93) / 0.08;
        let smoking = bern(
            &mut rng,
            expit(-1.0 + 0.9 * (1.0 - sex) - 0.3 * ac + 0.1 * (region - 4.0)),
        );
        let stress = bern(
            &mut rng,
            expit(-1.2 + 0.3 * sex - 0.2 * ac + 0.2 * (4.0 - education) * 0.5),
        );
        let exercise = bern(
            &mut rng,
            expit(1.2 + 0.3 * ac - 0.15 * (education - 2.5) - 0.1 * (diet - 50.0) / 15.0),
        );
        let diabetes = bern(&mut rng, expit(-1.7 + 0.3 * ac + 0.4 * wc));
        let hypertension = bern(&mut rng, expit(-0.3 + 0.6 * ac + 0.3 * wc));
        let heart_disease = bern(&mut rng, expit(-2.4 + 0.5 * ac + 0.2 * smoking));
        let eta = -2.6
            + 1.2 * hypertension
            + 1.1 * heart_disease
            + 0.7 * smoking
            + 0.45 * stress
            + 0.5 * exercise
            + 0.4 * diabetes
            + 0.25 * ac
            + 0.2 * wc
            - 0.15 * (diet - 50.0) / 15.0
            + 0.3 * (lipids - 0.8) / 0.25
            + 0.1 * (alcohol - 1.0)
            + 0.05 * (region - 4.0);
        let y = bern(&mut rng, expit(eta));
        let row = [
            y,
            region,
            smoking,
            stress,
            exercise,
            diabetes,
            heart_disease,
            hypertension,
            sex,
            age,
            whr,
            alcohol,
            diet,
            lipids,
            education,
        ];
        if y == 1.0 && cases.len() < per_arm {
            cases.push(row);
        } else if y == 0.0 && controls.len() < per_arm {
            controls.push(row);
        }
    }
    let columns = (0..COLUMNS.len())
        .map(|j| cases.iter().chain(&controls).map(|r| r[j]).collect())
        .collect();
    SyntheticTable { columns }
}
