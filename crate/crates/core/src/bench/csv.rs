use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::ExperimentRecord;
use crate::error::{Result, SlsError};

pub const CSV_HEADER: &str = "sweep,repeat,seed,err_l2_rel,err_linf_rel,newton_iters_max,runtime_ms,failed";

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CsvRow {
    pub sweep: f64,
    pub repeat: usize,
    pub seed: u64,
    pub err_l2_rel: f64,
    pub err_linf_rel: f64,
    pub newton_iters_max: usize,
    pub runtime_ms: f64,
    pub failed: bool,
}

impl From<&ExperimentRecord> for CsvRow {
    fn from(r: &ExperimentRecord) -> Self {
        CsvRow {
            sweep: r.sweep_value,
            repeat: r.repeat,
            seed: r.seed,
            err_l2_rel: r.err_l2_rel,
            err_linf_rel: r.err_linf_rel,
            newton_iters_max: r.newton_iters_max,
            runtime_ms: r.runtime_ms,
            failed: r.failed,
        }
    }
}

fn format_error(e: csv::Error) -> SlsError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => SlsError::Io(io),
        kind => SlsError::Format(format!("CSV: {kind:?}")),
    }
}

/// Writes the records ordered by `(sweep, repeat)`. Errors and runtimes use
/// 17 significant digits, enough to recover every bit; the sweep value uses
/// the shortest exact form.
pub fn write_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut sorted: Vec<&ExperimentRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.sweep_value.total_cmp(&b.sweep_value).then(a.repeat.cmp(&b.repeat)));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(',')).map_err(format_error)?;
    for r in sorted {
        w.write_record([
            r.sweep_value.to_string(),
            r.repeat.to_string(),
            r.seed.to_string(),
            format!("{:.16e}", r.err_l2_rel),
            format!("{:.16e}", r.err_linf_rel),
            r.newton_iters_max.to_string(),
            format!("{:.16e}", r.runtime_ms),
            r.failed.to_string(),
        ])
        .map_err(format_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    write_csv(records, BufWriter::new(File::create(path)?))
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    parse_csv(File::open(path)?)
}

pub fn parse_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(format_error)?;
    if !header.iter().eq(CSV_HEADER.split(',')) {
        return Err(SlsError::Format(format!("bad CSV header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(format_error)).collect()
}
