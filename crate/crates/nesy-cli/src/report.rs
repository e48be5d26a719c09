//! Benchmark report rows plus lossless CSV and human-readable markdown
//! rendering.

use crate::errors::CliError;

pub const CSV_HEADER: &str = "task,mode,train_ms_per_sample,test_ms_per_sample,peak_mem_mb,runs";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub task: String,
    pub mode: String,
    pub train_ms_per_sample: f64,
    pub test_ms_per_sample: f64,
    pub peak_mem_mb: f64,
    pub runs: u32,
}

/// Render CSV. Floats use Rust's shortest round-trip formatting, so parsing
/// the output reproduces the records bit-for-bit.
pub fn to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.task, r.mode, r.train_ms_per_sample, r.test_ms_per_sample, r.peak_mem_mb, r.runs
        ));
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<BenchRecord>, CliError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(CliError::Data(format!("bad CSV header: {other:?}"))),
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(CliError::Data(format!("row {}: expected 6 fields", i + 2)));
        }
        let num = |j: usize| -> Result<f64, CliError> {
            fields[j].parse().map_err(|_| CliError::Data(format!("row {}: bad number {:?}", i + 2, fields[j])))
        };
        records.push(BenchRecord {
            task: fields[0].to_string(),
            mode: fields[1].to_string(),
            train_ms_per_sample: num(2)?,
            test_ms_per_sample: num(3)?,
            peak_mem_mb: num(4)?,
            runs: fields[5]
                .parse()
                .map_err(|_| CliError::Data(format!("row {}: bad runs {:?}", i + 2, fields[5])))?,
        });
    }
    Ok(records)
}

pub fn to_markdown(records: &[BenchRecord]) -> String {
    let mut out = String::new();
    out.push_str("# Benchmark report\n\n");
    out.push_str(
        "Peak memory is process resident-set size sampled every 100 ms (not allocator-exact); \
         times are wall-clock per sample, averaged over the listed number of runs.\n\n",
    );
    out.push_str("| task | mode | train_ms_per_sample | test_ms_per_sample | peak_mem_mb | runs |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for r in records {
        out.push_str(&format!(
            "| {} | {} | {:.4} | {:.4} | {:.1} | {} |\n",
            r.task, r.mode, r.train_ms_per_sample, r.test_ms_per_sample, r.peak_mem_mb, r.runs
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<BenchRecord> {
        vec![
            BenchRecord {
                task: "mnist-sum".into(),
                mode: "exact/reasoner".into(),
                train_ms_per_sample: 0.123456789012345,
                test_ms_per_sample: 1.0 / 3.0,
                peak_mem_mb: 57.25,
                runs: 5,
            },
            BenchRecord {
                task: "shapes".into(),
                mode: "topk:3/reasoner".into(),
                train_ms_per_sample: 2.5,
                test_ms_per_sample: 0.75,
                peak_mem_mb: 120.0,
                runs: 5,
            },
        ]
    }

    #[test]
    fn csv_round_trips_exactly() {
        let records = sample();
        assert_eq!(parse_csv(&to_csv(&records)).unwrap(), records);
    }

    #[test]
    fn rejects_malformed_csv() {
        assert!(parse_csv("nope\n1,2").is_err());
        let mut text = String::from(CSV_HEADER);
        text.push_str("\na,b,1,2,3\n");
        assert!(parse_csv(&text).is_err());
    }

    #[test]
    fn markdown_has_exact_columns() {
        let md = to_markdown(&sample());
        assert!(md.contains("| task | mode | train_ms_per_sample | test_ms_per_sample | peak_mem_mb | runs |"));
    }
}
