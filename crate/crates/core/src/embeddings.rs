//! Word-vector tables and the Euclidean word-to-word travel cost.
//!
//! Two on-disk layouts are supported:
//!
//! * text: `token v1 ... vd` per line, optional `vocab dim` first line;
//! * binary (word2vec): ASCII header `"<vocab> <dim>\n"`, then per record the
//!   token bytes, one `0x20`, and `dim` little-endian `f32`s, optionally
//!   followed by `0x0A`.

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::path::Path;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("token `{token}` at byte {offset} has {found} components, expected {expected}")]
    DimensionMismatch { token: String, offset: usize, expected: usize, found: usize },
    #[error("binary file truncated at byte {offset}: {message}")]
    Truncated { offset: usize, message: String },
    #[error("token `{0}` is not in the embedding table")]
    Missing(String),
    #[error("invalid table: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingFormat {
    Text,
    Binary,
}

impl EmbeddingFormat {
    /// `.bin` means binary, anything else text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("bin") => EmbeddingFormat::Binary,
            _ => EmbeddingFormat::Text,
        }
    }
}

impl FromStr for EmbeddingFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(EmbeddingFormat::Text),
            "binary" | "bin" => Ok(EmbeddingFormat::Binary),
            other => Err(format!("unknown embedding format `{other}` (expected text or binary)")),
        }
    }
}

/// Non-negative Euclidean distance between two word vectors.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct WordCost(f64);

impl WordCost {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Token → fixed-length vector map. Insertion order is kept for serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::Invalid("dimension must be positive".into()));
        }
        Ok(Self { dim, words: Vec::new(), index: HashMap::new(), data: Vec::new() })
    }

    /// Builds a table from `(token, vector)` pairs; later duplicates win.
    pub fn from_pairs<I, S>(dim: usize, pairs: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = Self::new(dim)?;
        for (token, vector) in pairs {
            table.insert(token.into(), &vector)?;
        }
        Ok(table)
    }

    /// Inserts or replaces a vector. Returns `true` when it replaced one.
    pub fn insert(&mut self, token: String, vector: &[f64]) -> Result<bool, EmbeddingError> {
        if vector.len() != self.dim {
            return Err(EmbeddingError::DimensionMismatch {
                token,
                offset: 0,
                expected: self.dim,
                found: vector.len(),
            });
        }
        if let Some(bad) = vector.iter().find(|v| !v.is_finite()) {
            return Err(EmbeddingError::Invalid(format!("token `{token}` has non-finite component {bad}")));
        }
        if let Some(&i) = self.index.get(&token) {
            self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(vector);
            return Ok(true);
        }
        self.index.insert(token.clone(), self.words.len());
        self.words.push(token);
        self.data.extend_from_slice(vector);
        Ok(false)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    /// Scales every non-zero vector to unit L2 norm.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        for row in out.data.chunks_mut(self.dim) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
        out
    }

    /// Keeps only the tokens accepted by `keep`, preserving order.
    pub fn filtered(&self, mut keep: impl FnMut(&str) -> bool) -> Self {
        let mut out = Self::new(self.dim).expect("dim already validated");
        for word in &self.words {
            if keep(word) {
                out.insert(word.clone(), self.get(word).expect("indexed")).expect("same dim");
            }
        }
        out
    }

    pub fn load(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<Self, EmbeddingError> {
        let bytes = std::fs::read(path)?;
        match format {
            EmbeddingFormat::Text => Self::parse_text(&bytes),
            EmbeddingFormat::Binary => Self::parse_binary(&bytes),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<(), EmbeddingError> {
        let mut file = io::BufWriter::new(std::fs::File::create(path)?);
        match format {
            EmbeddingFormat::Text => self.write_text(&mut file)?,
            EmbeddingFormat::Binary => self.write_binary(&mut file)?,
        }
        file.flush()?;
        Ok(())
    }

    pub fn parse_text(bytes: &[u8]) -> Result<Self, EmbeddingError> {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| EmbeddingError::Parse { offset: e.valid_up_to(), message: "invalid UTF-8".into() })?;

        let mut table: Option<Self> = None;
        let mut offset = 0;
        for (line_no, line) in text.split_inclusive('\n').enumerate() {
            let line_offset = offset;
            offset += line.len();
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if line_no == 0 && fields.len() == 2 {
                if let (Ok(_), Ok(dim)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                    table = Some(Self::new(dim).map_err(|_| EmbeddingError::Parse {
                        offset: line_offset,
                        message: "header dimension must be positive".into(),
                    })?);
                    continue;
                }
            }
            let token = fields[0];
            let values = fields[1..]
                .iter()
                .map(|f| {
                    f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| EmbeddingError::Parse {
                        offset: line_offset,
                        message: format!("token `{token}`: bad component {f:?}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let table = match &mut table {
                Some(t) => t,
                None => table.insert(Self::new(values.len()).map_err(|_| EmbeddingError::Parse {
                    offset: line_offset,
                    message: format!("token `{token}` has no components"),
                })?),
            };
            if values.len() != table.dim {
                return Err(EmbeddingError::DimensionMismatch {
                    token: token.to_string(),
                    offset: line_offset,
                    expected: table.dim,
                    found: values.len(),
                });
            }
            if table.insert(token.to_string(), &values)? {
                warn!("duplicate embedding for `{token}` at byte {line_offset}; keeping the later one");
            }
        }
        table.ok_or_else(|| EmbeddingError::Parse { offset: 0, message: "empty embedding file".into() })
    }

    pub fn parse_binary(bytes: &[u8]) -> Result<Self, EmbeddingError> {
        let header_end = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| EmbeddingError::Truncated { offset: bytes.len(), message: "missing header line".into() })?;
        let header = std::str::from_utf8(&bytes[..header_end])
            .map_err(|_| EmbeddingError::Parse { offset: 0, message: "header is not ASCII".into() })?;
        let mut parts = header.split_whitespace();
        let (vocab, dim) = match (parts.next(), parts.next(), parts.next()) {
            (Some(v), Some(d), None) => match (v.parse::<usize>(), d.parse::<usize>()) {
                (Ok(v), Ok(d)) if d > 0 => (v, d),
                _ => return Err(EmbeddingError::Parse { offset: 0, message: format!("bad header {header:?}") }),
            },
            _ => return Err(EmbeddingError::Parse { offset: 0, message: format!("bad header {header:?}") }),
        };

        let mut table = Self::new(dim)?;
        let mut pos = header_end + 1;
        let record_bytes = dim * 4;
        for record in 0..vocab {
            let start = pos;
            let space = bytes[pos..].iter().position(|&b| b == b' ').ok_or_else(|| EmbeddingError::Truncated {
                offset: start,
                message: format!("record {record} of {vocab}: missing token terminator"),
            })?;
            let token = std::str::from_utf8(&bytes[pos..pos + space]).map_err(|_| EmbeddingError::Parse {
                offset: start,
                message: format!("record {record}: token is not UTF-8"),
            })?;
            if token.is_empty() || token.contains(char::is_whitespace) {
                return Err(EmbeddingError::Parse {
                    offset: start,
                    message: format!("record {record}: bad token {token:?}"),
                });
            }
            pos += space + 1;
            if bytes.len() - pos < record_bytes {
                return Err(EmbeddingError::Truncated {
                    offset: bytes.len(),
                    message: format!(
                        "record {record} (`{token}`) needs {record_bytes} vector bytes, {} left",
                        bytes.len() - pos
                    ),
                });
            }
            let vector: Vec<f64> = bytes[pos..pos + record_bytes]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            pos += record_bytes;
            if bytes.get(pos) == Some(&b'\n') {
                pos += 1;
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(EmbeddingError::Parse {
                    offset: start,
                    message: format!("token `{token}` has a non-finite component"),
                });
            }
            if table.insert(token.to_string(), &vector)? {
                warn!("duplicate embedding for `{token}` at byte {start}; keeping the later one");
            }
        }
        Ok(table)
    }

    /// Text layout with a `vocab dim` header; values use shortest round-trip formatting.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for word in &self.words {
            write!(out, "{word}")?;
            for v in self.get(word).expect("indexed") {
                write!(out, " {v:?}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// word2vec binary layout; components are narrowed to `f32`.
    pub fn write_binary<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for word in &self.words {
            out.write_all(word.as_bytes())?;
            out.write_all(b" ")?;
            for &v in self.get(word).expect("indexed") {
                out.write_all(&(v as f32).to_le_bytes())?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads all of `reader` then parses it in the given format.
    pub fn read<R: Read>(mut reader: R, format: EmbeddingFormat) -> Result<Self, EmbeddingError> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        match format {
            EmbeddingFormat::Text => Self::parse_text(&bytes),
            EmbeddingFormat::Binary => Self::parse_binary(&bytes),
        }
    }
}

/// Euclidean distance between the vectors of `w1` and `w2`.
pub fn word_cost(table: &EmbeddingTable, w1: &str, w2: &str) -> Result<WordCost, EmbeddingError> {
    let a = table.get(w1).ok_or_else(|| EmbeddingError::Missing(w1.to_string()))?;
    let b = table.get(w2).ok_or_else(|| EmbeddingError::Missing(w2.to_string()))?;
    Ok(WordCost(euclidean(a, b)))
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_plain_text() {
        let t = EmbeddingTable::parse_text(b"a 1.0 0.0\nb 0.0 1.0").unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("b"), Some(&[0.0, 1.0][..]));
    }

    #[test]
    fn parses_text_with_header() {
        let t = EmbeddingTable::parse_text(b"2 3\nx 1 2 3\ny 4 5 6\n").unwrap();
        assert_eq!((t.dim(), t.len()), (3, 2));
    }

    #[test]
    fn ragged_text_rows_name_the_token() {
        let err = EmbeddingTable::parse_text(b"a 1 2 3\nbad 1 2 3 4\n").unwrap_err();
        match err {
            EmbeddingError::DimensionMismatch { token, offset, expected, found } => {
                assert_eq!((token.as_str(), offset, expected, found), ("bad", 8, 3, 4));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_tokens_keep_last() {
        let t = EmbeddingTable::parse_text(b"a 1 1\nb 2 2\na 3 3\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("a"), Some(&[3.0, 3.0][..]));
    }

    fn binary_fixture(trailing_newline: bool) -> Vec<u8> {
        let mut bytes = b"2 3\n".to_vec();
        for (token, vals) in [("cat", [1.0f32, 2.0, 3.0]), ("dog", [-1.0, 0.5, 0.25])] {
            bytes.extend_from_slice(token.as_bytes());
            bytes.push(b' ');
            for v in vals {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            if trailing_newline {
                bytes.push(b'\n');
            }
        }
        bytes
    }

    #[test]
    fn parses_binary_with_and_without_newlines() {
        for newline in [true, false] {
            let t = EmbeddingTable::parse_binary(&binary_fixture(newline)).unwrap();
            assert_eq!((t.dim(), t.len()), (3, 2));
            assert_eq!(t.get("dog"), Some(&[-1.0, 0.5, 0.25][..]));
        }
    }

    #[test]
    fn truncated_binary_is_error() {
        let bytes = binary_fixture(true);
        for cut in [bytes.len() - 3, 10, 5] {
            let err = EmbeddingTable::parse_binary(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, EmbeddingError::Truncated { .. }), "cut {cut}: {err:?}");
        }
    }

    #[test]
    fn binary_writer_matches_layout() {
        let t = EmbeddingTable::parse_binary(&binary_fixture(true)).unwrap();
        let mut out = Vec::new();
        t.write_binary(&mut out).unwrap();
        assert_eq!(out, binary_fixture(true));
    }

    #[test]
    fn word_cost_examples() {
        let t = EmbeddingTable::parse_text(b"e1 1 0\ne2 0 1\n").unwrap();
        assert_eq!(word_cost(&t, "e1", "e1").unwrap().value(), 0.0);
        assert_eq!(word_cost(&t, "e1", "e2").unwrap().value(), 2f64.sqrt());
        assert!(matches!(word_cost(&t, "e1", "zz"), Err(EmbeddingError::Missing(w)) if w == "zz"));
    }

    #[test]
    fn word_cost_matches_independent_norm() {
        let u = [0.3, -1.2, 2.5, 0.0, 4.75];
        let v = [1.1, 0.4, -0.5, 2.0, 4.5];
        let t = EmbeddingTable::from_pairs(5, [("u", u.to_vec()), ("v", v.to_vec())]).unwrap();
        // Expanded form |u|^2 + |v|^2 - 2 u.v as a separate arithmetic route.
        let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        let nu: f64 = u.iter().map(|a| a * a).sum();
        let nv: f64 = v.iter().map(|a| a * a).sum();
        let expected = (nu + nv - 2.0 * dot).sqrt();
        assert!((word_cost(&t, "u", "v").unwrap().value() - expected).abs() < 1e-12);
    }

    #[test]
    fn normalization_is_opt_in() {
        let t = EmbeddingTable::parse_text(b"a 3 4\n").unwrap();
        assert_eq!(t.get("a"), Some(&[3.0, 4.0][..]));
        assert_eq!(t.normalized().get("a"), Some(&[0.6, 0.8][..]));
    }

    fn table_strategy() -> impl Strategy<Value = EmbeddingTable> {
        (1usize..6).prop_flat_map(|dim| {
            prop::collection::btree_map("[a-z]{1,6}", prop::collection::vec(-1e3f64..1e3, dim), 1..8)
                .prop_map(move |m| EmbeddingTable::from_pairs(dim, m).unwrap())
        })
    }

    proptest! {
        #[test]
        fn text_round_trip(table in table_strategy()) {
            let mut buf = Vec::new();
            table.write_text(&mut buf).unwrap();
            prop_assert_eq!(EmbeddingTable::parse_text(&buf).unwrap(), table);
        }

        #[test]
        fn cost_is_symmetric_and_triangle(table in table_strategy(), i in 0usize..8, j in 0usize..8, k in 0usize..8) {
            let words: Vec<&str> = table.words().collect();
            let (a, b, c) = (words[i % words.len()], words[j % words.len()], words[k % words.len()]);
            let ab = word_cost(&table, a, b).unwrap().value();
            prop_assert_eq!(ab, word_cost(&table, b, a).unwrap().value());
            let ac = word_cost(&table, a, c).unwrap().value();
            let cb = word_cost(&table, c, b).unwrap().value();
            prop_assert!(ab <= ac + cb + 1e-9);
            prop_assert!(ab >= 0.0);
        }
    }
}
