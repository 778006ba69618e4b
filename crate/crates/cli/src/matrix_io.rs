//! Dense matrix files: headerless CSV, or the `WSC1` binary layout
//! (magic, u64 rows, u64 cols, row-major f64, all little-endian).

use std::fs;
use std::io::Write;
use std::path::Path;
use wsc_core::json::format_f64;
use wsc_core::Mat;

pub const MAGIC: &[u8; 4] = b"WSC1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Wsc1,
}

pub fn read(path: &Path) -> Result<Mat<f64>, String> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let parsed = if bytes.starts_with(MAGIC) {
        parse_binary(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|_| "not UTF-8 and no WSC1 header".to_string())?;
        parse_csv(text)
    };
    parsed.map_err(|e| format!("{}: {e}", path.display()))
}

pub fn write(path: &Path, a: &Mat<f64>, format: Format) -> Result<(), String> {
    let bytes = match format {
        Format::Csv => to_csv(a).into_bytes(),
        Format::Wsc1 => to_binary(a),
    };
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn parse_csv(text: &str) -> Result<Mat<f64>, String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                let field = field.trim();
                match field.parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(x),
                    Ok(_) => Err(format!("line {}: non-finite entry {field:?}", line_no + 1)),
                    Err(_) => Err(format!("line {}: cannot parse {field:?}", line_no + 1)),
                }
            })
            .collect::<Result<Vec<f64>, String>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(format!(
                    "line {}: {} columns, expected {}",
                    line_no + 1,
                    row.len(),
                    first.len()
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("empty matrix".into());
    }
    Ok(Mat::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]))
}

fn parse_binary(bytes: &[u8]) -> Result<Mat<f64>, String> {
    let word = |at: usize| -> Result<u64, String> {
        bytes
            .get(at..at + 8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| "truncated WSC1 header".to_string())
    };
    let rows = word(4)? as usize;
    let cols = word(12)? as usize;
    let body = &bytes[20..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .ok_or("WSC1 shape overflows")?;
    if body.len() != expected {
        return Err(format!(
            "WSC1 declares {rows}x{cols} ({expected} bytes) but holds {} bytes",
            body.len()
        ));
    }
    if rows == 0 || cols == 0 {
        return Err("empty matrix".into());
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if values.iter().any(|x| !x.is_finite()) {
        return Err("non-finite entry".into());
    }
    Ok(Mat::from_fn(rows, cols, |i, j| values[i * cols + j]))
}

pub fn to_csv(a: &Mat<f64>) -> String {
    let mut out = String::with_capacity(a.nrows() * a.ncols() * 24);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format_f64(a[(i, j)]));
        }
        out.push('\n');
    }
    out
}

pub fn to_binary(a: &Mat<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * a.nrows() * a.ncols());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(a.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(a.ncols() as u64).to_le_bytes());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out.extend_from_slice(&a[(i, j)].to_le_bytes());
        }
    }
    out
}
