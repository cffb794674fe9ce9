use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense n x d feature matrix, row-major `f32`, aligned to string ids.
///
/// On disk: a JSON header (`{n, d, dtype, layout, ids}`) next to a raw
/// little-endian binary payload with the same stem and a `.bin` extension.
/// Consumers accumulate in `f64`; storage stays `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    n: usize,
    d: usize,
    dtype: String,
    layout: String,
    ids: Vec<String>,
}

impl FeatureStore {
    pub fn new(dim: usize, ids: Vec<String>, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimMismatch {
                expected: 1,
                got: 0,
                context: "feature dimension must be positive".into(),
            });
        }
        if data.len() != ids.len() * dim {
            return Err(Error::DimMismatch {
                expected: ids.len() * dim,
                got: data.len(),
                context: "payload length vs n * d".into(),
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line: None,
                msg: format!("non-finite feature value at flat index {bad}"),
            });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId { id: id.clone() });
            }
        }
        Ok(Self {
            dim,
            ids,
            data,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn row_by_id(&self, id: &str) -> Option<&[f32]> {
        self.row_index(id).map(|i| self.row(i))
    }

    fn payload_path(header_path: &Path) -> PathBuf {
        header_path.with_extension("bin")
    }

    /// Read a store from its JSON header; the payload sits next to it.
    pub fn read(header_path: impl AsRef<Path>) -> Result<Self> {
        let header_path = header_path.as_ref();
        let header: Header = serde_json::from_str(&std::fs::read_to_string(header_path)?)?;
        if header.dtype != "f32" {
            return Err(Error::Parse {
                line: None,
                msg: format!("unsupported dtype `{}` (expected f32)", header.dtype),
            });
        }
        if header.layout != "row-major" {
            return Err(Error::Parse {
                line: None,
                msg: format!("unsupported layout `{}` (expected row-major)", header.layout),
            });
        }
        if header.ids.len() != header.n {
            return Err(Error::DimMismatch {
                expected: header.n,
                got: header.ids.len(),
                context: "header n vs ids length".into(),
            });
        }

        let mut payload = Vec::new();
        std::fs::File::open(Self::payload_path(header_path))?.read_to_end(&mut payload)?;
        let want = header.n * header.d * 4;
        if payload.len() != want {
            return Err(Error::DimMismatch {
                expected: want,
                got: payload.len(),
                context: "payload byte length".into(),
            });
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(header.d, header.ids, data)
    }

    /// Write header + payload. Round-trips bit-exactly.
    pub fn write(&self, header_path: impl AsRef<Path>) -> Result<()> {
        let header_path = header_path.as_ref();
        let header = Header {
            n: self.ids.len(),
            d: self.dim,
            dtype: "f32".into(),
            layout: "row-major".into(),
            ids: self.ids.clone(),
        };
        std::fs::write(header_path, serde_json::to_string_pretty(&header)? + "\n")?;

        let mut out = std::io::BufWriter::new(std::fs::File::create(Self::payload_path(
            header_path,
        ))?);
        for v in &self.data {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    /// Ingest a CSV of `id, v1, ..., vd` rows. A first line whose value
    /// columns do not parse as numbers is treated as a header and skipped.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut ids = Vec::new();
        let mut data: Vec<f32> = Vec::new();
        let mut dim: Option<usize> = None;
        let mut seen = HashSet::new();

        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() < 2 {
                return Err(Error::Parse {
                    line: Some(i + 1),
                    msg: "expected an id column plus at least one value column".into(),
                });
            }
            let values: std::result::Result<Vec<f32>, _> =
                fields[1..].iter().map(|f| f.parse::<f32>()).collect();
            let values = match values {
                Ok(v) => v,
                Err(e) if i == 0 => {
                    let _ = e; // header row
                    continue;
                }
                Err(e) => {
                    return Err(Error::Parse {
                        line: Some(i + 1),
                        msg: format!("bad value column: {e}"),
                    })
                }
            };
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::DimMismatch {
                        expected: d,
                        got: values.len(),
                        context: format!("csv line {}", i + 1),
                    })
                }
                Some(_) => {}
            }
            if !seen.insert(fields[0].to_string()) {
                return Err(Error::DuplicateId {
                    id: fields[0].to_string(),
                });
            }
            ids.push(fields[0].to_string());
            data.extend(values);
        }

        let dim = dim.ok_or(Error::Parse {
            line: None,
            msg: "csv contains no data rows".into(),
        })?;
        Self::new(dim, ids, data)
    }
}
