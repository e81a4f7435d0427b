use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::EmbedError;

/// Token → vector table with a fixed dimensionality. Iteration order is
/// insertion order, which keeps saved files reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl WordVectors {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Inserts or replaces the vector for `token`.
    pub fn insert(&mut self, token: &str, vector: &[f64]) -> Result<(), EmbedError> {
        if vector.len() != self.dim {
            return Err(EmbedError::LengthMismatch(vector.len(), self.dim));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::NonFinite(token.to_string()));
        }
        match self.index.get(token) {
            Some(&i) => self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(vector),
            None => {
                self.index.insert(token.to_string(), self.tokens.len());
                self.tokens.push(token.to_string());
                self.data.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.tokens
            .iter()
            .enumerate()
            .map(move |(i, t)| (t.as_str(), &self.data[i * self.dim..(i + 1) * self.dim]))
    }

    /// Plain-text word2vec format: a `"N dim"` header, then one
    /// `token v1 … vdim` row per entry. Floats use the shortest decimal that
    /// round-trips exactly.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.len(), self.dim);
        for (token, v) in self.iter() {
            out.push_str(token);
            for x in v {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, EmbedError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(EmbedError::Format {
            line: 1,
            message: "missing header".into(),
        })?;
        let bad_header = || EmbedError::Format {
            line: 1,
            message: format!("expected \"N dim\" header, got {header:?}"),
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(bad_header());
        }
        let n: usize = fields[0].parse().map_err(|_| bad_header())?;
        let dim: usize = fields[1].parse().map_err(|_| bad_header())?;
        if dim == 0 {
            return Err(bad_header());
        }
        let mut vectors = WordVectors::new(dim);
        for (i, line) in lines {
            let line_no = i + 1;
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap_or_default();
            let values = parts
                .map(|p| p.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EmbedError::Format {
                    line: line_no,
                    message: format!("bad float: {e}"),
                })?;
            if values.len() != dim {
                return Err(EmbedError::Format {
                    line: line_no,
                    message: format!("row has {} components, header says {dim}", values.len()),
                });
            }
            vectors.insert(token, &values).map_err(|e| EmbedError::Format {
                line: line_no,
                message: e.to_string(),
            })?;
        }
        if vectors.len() != n {
            return Err(EmbedError::Format {
                line: 1,
                message: format!("header declares {n} rows, found {}", vectors.len()),
            });
        }
        Ok(vectors)
    }

    pub fn save(&self, path: &Path) -> crate::Result<()> {
        crate::io::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let text = std::fs::read_to_string(path).map_err(|e| EmbedError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_text(&text)
    }
}
