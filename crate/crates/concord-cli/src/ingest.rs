//! CSV ingestion: header-based or index-based column selection, with
//! malformed rows dropped and counted rather than aborting the run.

use std::path::Path;

use anyhow::Context;
use concord_core::{BivariateSample, Error as CoreError};

pub struct Ingested {
    pub sample: BivariateSample,
    pub dropped: usize,
    pub columns: [String; 2],
}

/// Resolves one selector against the header row: exact name match first,
/// then a zero-based index.
fn resolve(headers: &csv::StringRecord, selector: &str) -> anyhow::Result<usize> {
    let wanted = selector.trim();
    if let Some(pos) = headers.iter().position(|h| h == wanted) {
        return Ok(pos);
    }
    if let Ok(idx) = wanted.parse::<usize>() {
        if idx < headers.len() {
            return Ok(idx);
        }
        return Err(CoreError::Config(format!(
            "column index {idx} out of range: the file has {} columns",
            headers.len()
        ))
        .into());
    }
    Err(CoreError::Config(format!(
        "unknown column {wanted:?}; available columns: {}",
        headers
            .iter()
            .map(|h| format!("{h:?}"))
            .collect::<Vec<_>>()
            .join(", ")
    ))
    .into())
}

fn parse_field(field: Option<&str>) -> Option<f64> {
    field
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|v| v.is_finite())
}

/// Reads the two selected columns from a headered CSV file. Rows whose
/// selected fields are missing or non-numeric are dropped and counted; fewer
/// than three usable rows is an error.
pub fn ingest_csv(path: &Path, selectors: &str) -> anyhow::Result<Ingested> {
    let (sel1, sel2) = selectors.split_once(',').ok_or_else(|| {
        anyhow::Error::from(CoreError::Config(format!(
            "--columns expects two comma-separated selectors, got {selectors:?}"
        )))
    })?;
    if sel2.contains(',') {
        return Err(CoreError::Config(format!(
            "--columns expects exactly two selectors, got {selectors:?}"
        ))
        .into());
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let headers = reader
        .headers()
        .with_context(|| format!("cannot read the header row of {}", path.display()))?
        .clone();
    let i1 = resolve(&headers, sel1)?;
    let i2 = resolve(&headers, sel2)?;
    let columns = [headers[i1].to_string(), headers[i2].to_string()];

    let mut x1 = Vec::new();
    let mut x2 = Vec::new();
    let mut dropped = 0usize;
    for record in reader.records() {
        let Ok(record) = record else {
            dropped += 1;
            continue;
        };
        match (parse_field(record.get(i1)), parse_field(record.get(i2))) {
            (Some(a), Some(b)) => {
                x1.push(a);
                x2.push(b);
            }
            _ => dropped += 1,
        }
    }
    if x1.len() < 3 {
        return Err(CoreError::TooFewObservations {
            needed: 3,
            got: x1.len(),
        }
        .into());
    }
    let sample = BivariateSample::with_labels(x1, x2, columns[0].clone(), columns[1].clone())?;
    Ok(Ingested {
        sample,
        dropped,
        columns,
    })
}
