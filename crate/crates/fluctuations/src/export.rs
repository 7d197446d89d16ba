//! Tables, matrix reports and plotting scripts.

use std::io::Write;

use nalgebra::DMatrix;
use qm_core::fmt::sig17;
use serde_json::{json, Value};

use crate::error::Result;
use crate::legendre::RateFunction;

/// Columns `alpha_<label>…, e`.
pub fn write_cumulant_csv<W: Write>(
    out: W,
    labels: &[String],
    alphas: &[Vec<f64>],
    values: &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = labels.iter().map(|l| format!("alpha_{l}")).collect();
    header.push("e".into());
    w.write_record(&header)?;
    for (a, e) in alphas.iter().zip(values) {
        let mut row: Vec<String> = a.iter().map(|&x| sig17(x)).collect();
        row.push(sig17(*e));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `s_<label>…, I, finite`; infinite values are written as `inf`.
pub fn write_rate_csv<W: Write>(out: W, labels: &[String], rf: &RateFunction) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = labels.iter().map(|l| format!("s_{l}")).collect();
    header.push("I".into());
    header.push("finite".into());
    w.write_record(&header)?;
    for (s, p) in rf.grid.iter().zip(&rf.points) {
        let mut row: Vec<String> = s.iter().map(|&x| sig17(x)).collect();
        row.push(sig17(p.value));
        row.push(p.is_finite().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn matrix_json(m: &DMatrix<f64>) -> Value {
    json!((0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect::<Vec<f64>>())
        .collect::<Vec<_>>())
}

/// Gnuplot script drawing column `y` against column `x` of a CSV file.
pub fn plot_script(csv_name: &str, x: usize, y: usize, xlabel: &str, ylabel: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key off\n\
         set xlabel '{xlabel}'\n\
         set ylabel '{ylabel}'\n\
         set terminal pngcairo size 800,600\n\
         set output '{stem}.png'\n\
         plot '{csv_name}' every ::1 using {x}:{y} with linespoints\n",
        stem = csv_name.trim_end_matches(".csv"),
    )
}
