//! Result tables on disk.
//!
//! CSV columns: `axis,value,algorithm,metric,mean,stderr,trials`, one row per
//! (point, algorithm, metric). The JSON form carries the same rows plus the
//! resolved configuration and base seed.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::harness::sweep::{ResultRow, ResultTable};

pub const CSV_HEADER: &str = "axis,value,algorithm,metric,mean,stderr,trials";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDocument {
    pub config: SystemConfig,
    pub config_hash: String,
    pub base_seed: u64,
    pub rows: Vec<ResultRow>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn write_csv<W: Write>(table: &ResultTable, w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(CSV_HEADER.split(',')).map_err(csv_err)?;
    for r in &table.rows {
        wtr.write_record([
            r.axis.clone(),
            r.value.to_string(),
            r.algorithm.clone(),
            r.metric.clone(),
            r.mean.to_string(),
            r.stderr.to_string(),
            r.trials.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<ResultTable> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Format(format!("unexpected CSV header `{}`", header.join(","))));
    }
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>().map_err(csv_err)?;
    Ok(ResultTable { rows })
}

pub fn to_csv_string(table: &ResultTable) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(table, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

pub fn document(table: &ResultTable, cfg: &SystemConfig, base_seed: u64) -> TableDocument {
    TableDocument { config: cfg.clone(), config_hash: cfg.hash(), base_seed, rows: table.rows.clone() }
}

pub fn write_json<W: Write>(doc: &TableDocument, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, doc)?;
    Ok(())
}

pub fn read_json<R: Read>(r: R) -> Result<TableDocument> {
    Ok(serde_json::from_reader(r)?)
}

/// Writes `table` to `path`; the format follows the extension (`.json`, otherwise CSV).
pub fn emit(table: &ResultTable, cfg: &SystemConfig, base_seed: u64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    if path.extension().is_some_and(|e| e == "json") {
        write_json(&document(table, cfg, base_seed), &mut file)?;
    } else {
        write_csv(table, &mut file)?;
    }
    file.flush()?;
    Ok(())
}
