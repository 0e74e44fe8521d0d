//! CSV snapshots: a `# t=<seconds>` comment line, then `x,rho,v` rows at cell
//! centres. Floats use the shortest representation that parses back exactly.

use std::fs;
use std::path::Path;

use super::IoError;
use crate::domain::FlowState;

/// Snapshot file contents as text.
pub fn format_snapshot(state: &FlowState) -> Result<String, csv::Error> {
    let mut out = format!("# t={:?}\n", state.t).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["x", "rho", "v"])?;
        for (i, x) in state.grid.centers().into_iter().enumerate() {
            w.write_record([
                format!("{x:?}"),
                format!("{:?}", state.rho[i]),
                format!("{:?}", state.v[i]),
            ])?;
        }
        w.flush()?;
    }
    Ok(String::from_utf8(out).expect("snapshot text is ASCII"))
}

pub fn write_snapshot(state: &FlowState, path: &Path) -> Result<(), IoError> {
    let text = format_snapshot(state).map_err(|e| IoError::csv(path, e))?;
    fs::write(path, text).map_err(|e| IoError::io(path, e))
}

/// Columns of a snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotData {
    pub t: f64,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotData, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_snapshot(&text).map_err(|message| IoError::Format {
        path: path.to_path_buf(),
        message,
    })
}

pub fn parse_snapshot(text: &str) -> Result<SnapshotData, String> {
    let (first, body) = text.split_once('\n').ok_or("snapshot is empty")?;
    let t = first
        .strip_prefix("# t=")
        .and_then(|t| t.trim().parse::<f64>().ok())
        .ok_or_else(|| format!("expected `# t=<seconds>`, found `{first}`"))?;
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?;
    if header != vec!["x", "rho", "v"] {
        return Err(format!("expected header x,rho,v, found {header:?}"));
    }
    let mut data = SnapshotData {
        t,
        x: Vec::new(),
        rho: Vec::new(),
        v: Vec::new(),
    };
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let num = |k: usize| {
            record[k]
                .parse::<f64>()
                .map_err(|_| format!("row {}: `{}` is not a number", row + 1, &record[k]))
        };
        data.x.push(num(0)?);
        data.rho.push(num(1)?);
        data.v.push(num(2)?);
    }
    Ok(data)
}
