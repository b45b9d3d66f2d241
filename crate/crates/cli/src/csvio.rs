//! Comma-separated time series with a header row.

use std::path::Path;

use modelcheck::Trajectory;

use crate::error::{io, CliError, Result};

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers.iter().position(|h| h.trim() == name).ok_or_else(|| CliError::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: format!("missing column '{name}' (found: {})", headers.iter().collect::<Vec<_>>().join(", ")),
    })
}

/// Load the `output` column as observations and, when named, the `input`
/// column as the exogenous signal.
pub fn load_timeseries_csv(path: &Path, input: Option<&str>, output: &str) -> Result<Trajectory> {
    let file = std::fs::File::open(path).map_err(io(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let y_col = column(&headers, output, path)?;
    let u_col = input.map(|name| column(&headers, name, path)).transpose()?;

    let (mut y, mut u) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize, name: &str| -> Result<f64> {
            let raw = record.get(col).unwrap_or("").trim();
            raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| CliError::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("column '{name}': '{raw}' is not a finite number"),
            })
        };
        y.push(field(y_col, output)?);
        if let (Some(col), Some(name)) = (u_col, input) {
            u.push(field(col, name)?);
        }
    }
    if y.is_empty() {
        return Err(CliError::Parse { path: path.to_path_buf(), line: 1, msg: "no data rows".into() });
    }
    Ok(if u_col.is_some() { Trajectory::with_inputs(y, u) } else { Trajectory::new(y) })
}

/// Write a trajectory in the format read by [`load_timeseries_csv`]. The
/// input column is written only if the trajectory has inputs.
pub fn write_timeseries_csv(path: &Path, y: &Trajectory, input: &str, output: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    match &y.inputs {
        Some(u) => {
            w.write_record([input, output])?;
            for (a, b) in u.iter().zip(&y.observations) {
                w.write_record([a.to_string(), b.to_string()])?;
            }
        }
        None => {
            w.write_record([output])?;
            for b in &y.observations {
                w.write_record([b.to_string()])?;
            }
        }
    }
    w.flush().map_err(io(path))?;
    Ok(())
}
