//! Field dumps: a JSON header next to either raw little-endian `f64` data or
//! a CSV grid (one row per second-axis index).
//!
//! `stem.json` holds the header; the samples go to `stem.bin` or `stem.csv`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::domain::{DomainKind, DomainSpec, Field};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldFormat {
    Binary,
    Csv,
}

impl FieldFormat {
    fn extension(self) -> &'static str {
        match self {
            FieldFormat::Binary => "bin",
            FieldFormat::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub name: String,
    pub dims: [usize; 2],
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
    pub domain: DomainKind,
    pub format: FieldFormat,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mass: Option<f64>,
}

impl FieldHeader {
    pub fn for_domain(name: &str, domain: &DomainSpec, format: FieldFormat) -> Self {
        Self {
            name: name.to_string(),
            dims: domain.dims(),
            origin: domain.origin(),
            spacing: domain.spacing(),
            domain: domain.kind(),
            format,
            alpha: None,
            mass: None,
        }
    }
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Write `field` under `stem`, returning the header and data paths.
pub fn write_field(stem: &Path, header: &FieldHeader, field: &Field) -> Result<(PathBuf, PathBuf)> {
    if header.dims != [field.n1, field.n2] {
        return Err(Error::Shape { expected: header.dims[0] * header.dims[1], got: field.len() });
    }
    let hpath = with_ext(stem, "json");
    let dpath = with_ext(stem, header.format.extension());
    fs::write(&hpath, serde_json::to_string_pretty(header)? + "\n")?;
    let mut out = std::io::BufWriter::new(fs::File::create(&dpath)?);
    match header.format {
        FieldFormat::Binary => {
            for v in &field.values {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        FieldFormat::Csv => {
            for row in field.values.chunks(field.n1) {
                let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
                writeln!(out, "{}", line.join(","))?;
            }
        }
    }
    out.flush()?;
    Ok((hpath, dpath))
}

/// Read a field written by [`write_field`].
pub fn read_field(stem: &Path) -> Result<(FieldHeader, Field)> {
    let header: FieldHeader = serde_json::from_str(&fs::read_to_string(with_ext(stem, "json"))?)?;
    let [n1, n2] = header.dims;
    let dpath = with_ext(stem, header.format.extension());
    let values = match header.format {
        FieldFormat::Binary => {
            let bytes = fs::read(&dpath)?;
            if bytes.len() != 8 * n1 * n2 {
                return Err(Error::Shape { expected: n1 * n2, got: bytes.len() / 8 });
            }
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect()
        }
        FieldFormat::Csv => {
            let text = fs::read_to_string(&dpath)?;
            let mut v = Vec::with_capacity(n1 * n2);
            for (r, line) in text.lines().enumerate() {
                for cell in line.split(',') {
                    v.push(cell.trim().parse::<f64>().map_err(|e| {
                        Error::Format(format!("{}: row {r}: {e}", dpath.display()))
                    })?);
                }
            }
            v
        }
    };
    let field = Field::from_vec(n1, n2, values)?;
    Ok((header, field))
}
