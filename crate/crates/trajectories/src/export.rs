//! CSV and JSON output of sampled records.

use std::io::Write;

use qm_core::fmt::sig17;
use serde_json::{json, Value};

use crate::error::Result;
use crate::sampler::EntropyRecord;

/// One row per trajectory: seed, total increment, per-label sums and the
/// number of renormalized steps, all floats at 17 significant digits.
pub fn write_records_csv<W: Write>(
    out: W,
    records: &[EntropyRecord],
    labels: &[String],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["seed".to_string(), "sigma".to_string()];
    header.extend(labels.iter().map(|l| format!("s_n_j_{l}")));
    header.push("renormalizations".to_string());
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.seed.to_string(), sig17(r.sigma)];
        row.extend(r.s_n_j.iter().map(|&s| sig17(s)));
        row.push(r.renormalizations.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn records_json(records: &[EntropyRecord], labels: &[String]) -> Value {
    let rows: Vec<Value> = records
        .iter()
        .map(|r| {
            let mut v = json!({
                "seed": r.seed,
                "n_steps": r.n_steps,
                "omega0": labels[r.omega0],
                "sigma": r.sigma,
                "s_n_j": r.s_n_j,
                "renormalizations": r.renormalizations,
            });
            if let Some(steps) = &r.steps {
                v["omega_word"] = json!(steps
                    .iter()
                    .map(|s| labels[s.omega].as_str())
                    .collect::<Vec<_>>());
                v["xi_word"] = json!(steps.iter().map(|s| s.xi).collect::<Vec<_>>());
                v["increments"] = json!(steps.iter().map(|s| s.increment).collect::<Vec<_>>());
            }
            v
        })
        .collect();
    json!({ "labels": labels, "records": rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample_entropy_process, TrajectoryConfig};
    use mris_probes::fixtures;

    #[test]
    fn csv_round_trips_values() {
        let m = fixtures::two_temperature();
        let recs = sample_entropy_process(&m, &TrajectoryConfig::new(20, 3, 5)).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &recs, m.labels()).unwrap();
        let mut rd = csv::Reader::from_reader(buf.as_slice());
        assert_eq!(rd.headers().unwrap().len(), 5);
        for (row, r) in rd.records().zip(&recs) {
            let row = row.unwrap();
            assert_eq!(row[0].parse::<u64>().unwrap(), r.seed);
            assert_eq!(row[1].parse::<f64>().unwrap(), r.sigma);
        }
    }

    #[test]
    fn json_includes_words_only_when_recorded() {
        let m = fixtures::two_temperature();
        let plain = sample_entropy_process(&m, &TrajectoryConfig::new(5, 1, 0)).unwrap();
        assert!(records_json(&plain, m.labels())["records"][0]
            .get("xi_word")
            .is_none());
        let rec = sample_entropy_process(&m, &TrajectoryConfig::new(5, 1, 0).recording()).unwrap();
        assert_eq!(
            records_json(&rec, m.labels())["records"][0]["xi_word"]
                .as_array()
                .unwrap()
                .len(),
            5
        );
    }
}
