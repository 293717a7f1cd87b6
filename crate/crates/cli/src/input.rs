use std::fs::File;
use std::io::Read;
use std::path::Path;

use pwdeming::{MCDataset, PairedSample};

use crate::Failure;

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name))
}

/// Reads a comma-separated file with a header naming `x`, `y` and optionally
/// `id`. Without an `id` column samples are numbered from 1 in file order.
pub fn read_dataset(path: &Path) -> Result<MCDataset, Failure> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<MCDataset, Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Failure::Data(format!("line 1: {e}")))?
        .clone();
    let (xi, yi) = match (column(&headers, "x"), column(&headers, "y")) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(Failure::Data("line 1: header must name columns x and y".into())),
    };
    let id = column(&headers, "id");
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| {
            let at = e.position().map_or(line as u64, |p| p.line());
            Failure::Data(format!("line {at}: {e}"))
        })?;
        let line = record.position().map_or(line as u64, |p| p.line());
        let field = |i: usize, name: &str| -> Result<f64, Failure> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Failure::Data(format!("line {line}: {name} value {raw:?} is not a finite number")))
        };
        let index = match id {
            Some(i) => {
                let raw = record.get(i).unwrap_or("");
                raw.parse::<usize>()
                    .ok()
                    .filter(|&v| v >= 1)
                    .ok_or_else(|| Failure::Data(format!("line {line}: id {raw:?} is not a positive integer")))?
            }
            None => row + 1,
        };
        samples.push(PairedSample {
            index,
            x: field(xi, "x")?,
            y: field(yi, "y")?,
        });
    }
    MCDataset::new(samples).map_err(Failure::from)
}
