use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::report::format_float;
use super::{ExperimentConfig, ExperimentError};
use crate::influence::{evaluate_influence, InfluenceFunctional};
use crate::observables::{duality_report, meter_variance};

/// Columns after the swept parameters, in order.
pub const SWEEP_COLUMNS: [&str; 13] = [
    "gamma_A",
    "gamma_B",
    "gamma_AB",
    "g_R_BB",
    "chi_bar_B",
    "m_decoh",
    "epsilon2",
    "sigma2",
    "visibility",
    "d_b_threshold",
    "d_b_phi",
    "slack",
    "n_created",
];

/// Sweep results in grid order: the first axis varies slowest. Swept
/// parameters come first, as `axis_<name>`, followed by [`SWEEP_COLUMNS`].
#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SweepTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Comma-separated, one header line, every value with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

fn grid(config: &ExperimentConfig) -> Vec<Vec<f64>> {
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &config.sweep.axes {
        let values = axis.values();
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    points
}

/// Runs every grid point of `[[sweep.axes]]`. Points that differ only in
/// `epsilon2` share their pairings.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepTable, ExperimentError> {
    config.validate()?;
    if config.sweep.axes.is_empty() {
        return Err(ExperimentError::NoSweepAxes);
    }
    let spec = config.effective_quadrature()?;
    let requested = config.requested_functionals()?;
    let names: Vec<&str> = config
        .sweep
        .axes
        .iter()
        .map(|a| a.parameter.as_str())
        .collect();
    let points = grid(config);

    let mut configs = Vec::with_capacity(points.len());
    for p in &points {
        let mut c = config.clone();
        for (name, &v) in names.iter().zip(p) {
            c.set(name, v)?;
        }
        configs.push(c);
    }
    // Pairings do not depend on the meter variance.
    let key = |c: &ExperimentConfig| {
        let mut k = c.clone();
        k.meter.epsilon2 = 1.0;
        k.to_toml_string()
    };
    let mut unique: BTreeMap<String, usize> = BTreeMap::new();
    let mut representatives = Vec::new();
    for c in &configs {
        unique.entry(key(c)).or_insert_with(|| {
            representatives.push(c.clone());
            representatives.len() - 1
        });
    }
    let influences: Vec<InfluenceFunctional> = representatives
        .par_iter()
        .map(|c| -> Result<_, ExperimentError> {
            let setup = c.setup()?;
            Ok(evaluate_influence(&setup, &spec, &requested)?.functional)
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(points.len());
    for (p, c) in points.iter().zip(&configs) {
        let infl = influences[unique[&key(c)]];
        let setup = c.setup()?;
        let eps2 = setup.meter_epsilon2;
        let d = duality_report(&setup, &infl)?;
        let mut row = p.clone();
        row.extend([
            infl.gamma_a,
            infl.gamma_b,
            infl.gamma_ab,
            infl.g_r_bb,
            infl.chi_bar_b,
            infl.m_decoh,
            eps2,
            meter_variance(&infl, eps2)?,
            d.visibility,
            d.d_b_threshold,
            d.d_b_phi,
            d.slack,
            d.n_created,
        ]);
        rows.push(row);
    }
    let mut header: Vec<String> = names.iter().map(|s| format!("axis_{s}")).collect();
    header.extend(SWEEP_COLUMNS.iter().map(|s| s.to_string()));
    Ok(SweepTable { header, rows })
}
