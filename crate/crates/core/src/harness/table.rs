//! Trajectory tables. CSV columns are `t, loss, grad_norm, quasi_norm,
//! balance_residual, w_1 … w_d`, one row per snapshot, every value written
//! with 17 significant digits so a parse returns the identical bits.

use std::io::{Read, Write};
use std::path::Path;

use serde_json::{Map, Number, Value};

use super::{HarnessError, TableFormat};
use crate::dynamics::TrajectorySnapshot;
use crate::objective::EffectiveWeights;

pub const TABLE_FIXED_COLUMNS: [&str; 5] = ["t", "loss", "grad_norm", "quasi_norm", "balance_residual"];

fn header(dim: usize) -> Vec<String> {
    TABLE_FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((1..=dim).map(|i| format!("w_{i}")))
        .collect()
}

fn fixed_values(s: &TrajectorySnapshot) -> [f64; 5] {
    [s.t, s.loss, s.grad_norm, s.quasi_norm, s.balance_residual]
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `snapshots` as a table. Every snapshot must carry `dim` weights.
pub fn emit_table<W: Write>(
    snapshots: &[TrajectorySnapshot],
    dim: usize,
    format: TableFormat,
    out: W,
) -> std::io::Result<()> {
    let invalid = |m: String| std::io::Error::new(std::io::ErrorKind::InvalidInput, m);
    if snapshots.is_empty() {
        return Err(invalid("empty trajectory".into()));
    }
    if let Some(s) = snapshots.iter().find(|s| s.w.len() != dim) {
        return Err(invalid(format!("snapshot at t = {} has {} weights, expected {dim}", s.t, s.w.len())));
    }
    match format {
        TableFormat::Csv => {
            let mut wtr = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(out);
            wtr.write_record(header(dim))?;
            for s in snapshots {
                let row = fixed_values(s).into_iter().chain(s.w.as_slice().iter().copied()).map(fmt);
                wtr.write_record(row)?;
            }
            wtr.flush()
        }
        TableFormat::Json => {
            let names = header(dim);
            let rows: Vec<Value> = snapshots
                .iter()
                .map(|s| {
                    let values = fixed_values(s).into_iter().chain(s.w.as_slice().iter().copied());
                    let obj: Map<String, Value> = names
                        .iter()
                        .cloned()
                        .zip(values.map(|x| Number::from_f64(x).map_or(Value::Null, Value::Number)))
                        .collect();
                    Value::Object(obj)
                })
                .collect();
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, &rows)?;
            out.write_all(b"\n")?;
            out.flush()
        }
    }
}

fn snapshot_from(values: &[f64]) -> TrajectorySnapshot {
    TrajectorySnapshot {
        t: values[0],
        loss: values[1],
        grad_norm: values[2],
        quasi_norm: values[3],
        balance_residual: values[4],
        w: EffectiveWeights(values[5..].to_vec()),
    }
}

/// Parses a table written by [`emit_table`].
pub fn parse_table<R: Read>(input: R, format: TableFormat) -> Result<Vec<TrajectorySnapshot>, String> {
    match format {
        TableFormat::Csv => {
            let mut rdr = csv::Reader::from_reader(input);
            let head = rdr.headers().map_err(|e| e.to_string())?.clone();
            let n = head.len();
            if n < TABLE_FIXED_COLUMNS.len() + 1 {
                return Err(format!("expected at least 6 columns, found {n}"));
            }
            if head.iter().ne(header(n - TABLE_FIXED_COLUMNS.len()).iter().map(String::as_str)) {
                return Err(format!("unexpected header {head:?}"));
            }
            let mut out = Vec::new();
            for (line, rec) in rdr.records().enumerate() {
                let rec = rec.map_err(|e| e.to_string())?;
                let values = rec
                    .iter()
                    .map(|x| x.parse::<f64>().map_err(|e| format!("row {}: {x:?}: {e}", line + 1)))
                    .collect::<Result<Vec<_>, _>>()?;
                out.push(snapshot_from(&values));
            }
            Ok(out)
        }
        TableFormat::Json => {
            let rows: Vec<Map<String, Value>> = serde_json::from_reader(input).map_err(|e| e.to_string())?;
            let mut out = Vec::with_capacity(rows.len());
            for (r, row) in rows.iter().enumerate() {
                let dim = row.len().saturating_sub(TABLE_FIXED_COLUMNS.len());
                let values = header(dim)
                    .iter()
                    .map(|k| {
                        row.get(k)
                            .and_then(Value::as_f64)
                            .ok_or_else(|| format!("row {r}: missing or non-numeric {k:?}"))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                out.push(snapshot_from(&values));
            }
            Ok(out)
        }
    }
}

pub fn read_table_file(path: &Path, format: TableFormat) -> Result<Vec<TrajectorySnapshot>, HarnessError> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    parse_table(std::io::BufReader::new(file), format).map_err(|message| HarnessError::Table {
        path: path.to_path_buf(),
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn snap(t: f64, w: Vec<f64>) -> TrajectorySnapshot {
        TrajectorySnapshot {
            t,
            w: EffectiveWeights(w),
            loss: 0.1 + t,
            quasi_norm: 2.0 / 3.0,
            balance_residual: 0.0,
            grad_norm: 1e-300,
        }
    }

    #[test]
    fn single_row_csv() {
        let mut buf = Vec::new();
        emit_table(&[snap(0.0, vec![1.0, 2.0])], 2, TableFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "t,loss,grad_norm,quasi_norm,balance_residual,w_1,w_2");
        assert_eq!(lines[1].split(',').count(), 7);
        assert!(text.ends_with('\n') && !text.contains('\r'));
    }

    #[test]
    fn rejects_empty_and_ragged() {
        assert!(emit_table(&[], 2, TableFormat::Csv, Vec::new()).is_err());
        assert!(emit_table(&[snap(0.0, vec![1.0])], 2, TableFormat::Json, Vec::new()).is_err());
    }

    #[test]
    fn json_keys_match_csv_columns() {
        let mut buf = Vec::new();
        emit_table(&[snap(1.0, vec![3.0])], 1, TableFormat::Json, &mut buf).unwrap();
        let v: Vec<Map<String, Value>> = serde_json::from_slice(&buf).unwrap();
        let keys: Vec<&String> = v[0].keys().collect();
        assert_eq!(keys, ["t", "loss", "grad_norm", "quasi_norm", "balance_residual", "w_1"]);
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![
            any::<f64>().prop_filter("finite", |x| x.is_finite()),
            -1e3..1e3f64,
        ]
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            rows in prop::collection::vec((finite(), finite(), prop::collection::vec(finite(), 3)), 1..6),
            json in any::<bool>(),
        ) {
            let format = if json { TableFormat::Json } else { TableFormat::Csv };
            let snaps: Vec<TrajectorySnapshot> = rows
                .into_iter()
                .map(|(t, loss, w)| TrajectorySnapshot { loss, ..snap(t, w) })
                .collect();
            let mut buf = Vec::new();
            emit_table(&snaps, 3, format, &mut buf).unwrap();
            let back = parse_table(buf.as_slice(), format).unwrap();
            prop_assert_eq!(back.len(), snaps.len());
            for (a, b) in back.iter().zip(&snaps) {
                let bits = |s: &TrajectorySnapshot| -> Vec<u64> {
                    fixed_values(s).iter().chain(s.w.as_slice()).map(|x| x.to_bits()).collect()
                };
                prop_assert_eq!(bits(a), bits(b));
            }
        }
    }
}
