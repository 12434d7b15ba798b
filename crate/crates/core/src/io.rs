//! CSV emitters and readers for profiles and training datasets.
//!
//! Numbers are written with 17 significant digits so that every `f64`
//! survives a write/read cycle unchanged.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simulation::SimulationResult;

pub const PROFILE_HEADER: [&str; 6] = [
    "time_s",
    "x_m",
    "temperature_K",
    "q_cond_W_m2",
    "q_rad_W_m2",
    "q_total_W_m2",
];

pub const DATASET_HEADER: [&str; 5] = [
    "time_s",
    "x_m",
    "temperature_K",
    "q_rad_W_m2",
    "q_cond_W_m2",
];

pub const RUN_ID: &str = "run_id";

/// Lossless decimal representation (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One solver sample: a node at a snapshot time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatasetRow {
    pub run_id: usize,
    pub t: f64,
    pub x: f64,
    pub temperature: f64,
    pub q_rad: f64,
    pub q_cond: f64,
}

/// One row per (snapshot, node), snapshot-major.
pub fn emit_dataset(result: &SimulationResult, run_id: usize) -> Result<Vec<DatasetRow>> {
    if result.snapshots.is_empty() {
        return Err(Error::Input("simulation result has no snapshots".into()));
    }
    let mut rows = Vec::with_capacity(result.snapshots.len() * result.x.len());
    for s in &result.snapshots {
        for (i, &x) in result.x.iter().enumerate() {
            rows.push(DatasetRow {
                run_id,
                t: s.t,
                x,
                temperature: s.temperature[i],
                q_rad: s.q_rad[i],
                q_cond: s.q_cond[i],
            });
        }
    }
    Ok(rows)
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

pub fn write_profile_csv<W: Write>(result: &SimulationResult, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(PROFILE_HEADER)?;
    for s in &result.snapshots {
        for (i, &x) in result.x.iter().enumerate() {
            w.write_record(
                [
                    s.t,
                    x,
                    s.temperature[i],
                    s.q_cond[i],
                    s.q_rad[i],
                    s.q_total[i],
                ]
                .map(fmt_f64),
            )?;
        }
    }
    w.flush().map_err(|e| Error::io("<profile csv>", e))?;
    Ok(())
}

/// Writes dataset rows; with `with_run_id` the `run_id` column is prepended.
pub fn write_dataset_csv<W: Write>(rows: &[DatasetRow], with_run_id: bool, out: W) -> Result<()> {
    let mut w = writer(out);
    if with_run_id {
        let mut header = vec![RUN_ID];
        header.extend(DATASET_HEADER);
        w.write_record(&header)?;
    } else {
        w.write_record(DATASET_HEADER)?;
    }
    for r in rows {
        let values = [r.t, r.x, r.temperature, r.q_rad, r.q_cond].map(fmt_f64);
        if with_run_id {
            let mut rec = vec![r.run_id.to_string()];
            rec.extend(values);
            w.write_record(&rec)?;
        } else {
            w.write_record(&values)?;
        }
    }
    w.flush().map_err(|e| Error::io("<dataset csv>", e))?;
    Ok(())
}

/// Reads a dataset CSV, with or without a leading `run_id` column.
pub fn read_dataset_csv<R: Read>(input: R) -> Result<Vec<DatasetRow>> {
    let mut r = csv::ReaderBuilder::new().from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let with_run_id = header.first().map(String::as_str) == Some(RUN_ID);
    let body: Vec<&str> = header
        .iter()
        .skip(usize::from(with_run_id))
        .map(String::as_str)
        .collect();
    if body != DATASET_HEADER {
        return Err(Error::Input(format!(
            "dataset header mismatch: expected {:?}, got {:?}",
            DATASET_HEADER, header
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let run_id = if with_run_id {
            rec[0]
                .parse()
                .map_err(|_| Error::Input(format!("row {}: bad run_id `{}`", line + 1, &rec[0])))?
        } else {
            0
        };
        let off = usize::from(with_run_id);
        let v = parse_fields(&rec, off, 5, line)?;
        rows.push(DatasetRow {
            run_id,
            t: v[0],
            x: v[1],
            temperature: v[2],
            q_rad: v[3],
            q_cond: v[4],
        });
    }
    Ok(rows)
}

/// A row of the profile CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub t: f64,
    pub x: f64,
    pub temperature: f64,
    pub q_cond: f64,
    pub q_rad: f64,
    pub q_total: f64,
}

pub fn read_profile_csv<R: Read>(input: R) -> Result<Vec<ProfileRow>> {
    let mut r = csv::ReaderBuilder::new().from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != PROFILE_HEADER {
        return Err(Error::Input(format!(
            "profile header mismatch: expected {:?}, got {:?}",
            PROFILE_HEADER, header
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let v = parse_fields(&rec?, 0, 6, line)?;
        rows.push(ProfileRow {
            t: v[0],
            x: v[1],
            temperature: v[2],
            q_cond: v[3],
            q_rad: v[4],
            q_total: v[5],
        });
    }
    Ok(rows)
}

fn parse_fields(
    rec: &csv::StringRecord,
    offset: usize,
    count: usize,
    line: usize,
) -> Result<Vec<f64>> {
    if rec.len() != offset + count {
        return Err(Error::Input(format!(
            "row {}: expected {} fields, got {}",
            line + 1,
            offset + count,
            rec.len()
        )));
    }
    (offset..offset + count)
        .map(|i| {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Input(format!("row {}: bad number `{}`", line + 1, &rec[i])))
        })
        .collect()
}
