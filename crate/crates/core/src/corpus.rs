//! On-disk formats: unit/token records (JSON Lines), binary feature
//! matrices (`FEAT`) and the feature manifest.
//!
//! Record files hold one JSON object per line. Readers are strict: every
//! line yields either a record or an error carrying its line number, and
//! duplicate ids are rejected.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Frame period of feature matrices and unit sequences, in milliseconds.
pub const FRAME_PERIOD_MS: u32 = 20;

pub(crate) const FEATURE_MAGIC: [u8; 4] = *b"FEAT";
pub(crate) const FORMAT_VERSION: u32 = 1;
pub(crate) const HEADER_LEN: u64 = 16;

/// One utterance's discrete unit sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UtteranceRecord {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub units: Vec<u32>,
}

/// One utterance's text as word tokens (already lemmatized upstream, if at all).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TokenRecord {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub tokens: Vec<String>,
}

/// Frame-level features of one utterance, row-major `n_frames × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub id: String,
    pub group: Option<String>,
    n_frames: usize,
    dim: usize,
    values: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(id: impl Into<String>, dim: usize, values: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("feature dim must be >= 1".into()));
        }
        if values.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: values.len() % dim,
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                frame: pos / dim,
                component: pos % dim,
            });
        }
        Ok(FeatureMatrix {
            id: id.into(),
            group: None,
            n_frames: values.len() / dim,
            dim,
            values,
        })
    }

    pub fn with_group(mut self, group: Option<String>) -> Self {
        self.group = group;
        self
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn frame_period_ms(&self) -> u32 {
        FRAME_PERIOD_MS
    }
}

/// Manifest line mapping an utterance id to its feature file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

#[derive(Deserialize)]
struct RawUnitRecord {
    id: String,
    #[serde(default)]
    group: Option<String>,
    units: Vec<Value>,
}

#[derive(Deserialize)]
struct RawTokenRecord {
    id: String,
    #[serde(default)]
    group: Option<String>,
    tokens: Vec<String>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Walks the lines of a JSONL stream, handing each non-terminal line to
/// `parse` together with its 1-based line number.
fn parse_lines<R, T, F>(reader: R, path: &Path, mut parse: F) -> Result<Vec<T>>
where
    R: BufRead,
    F: FnMut(&str) -> std::result::Result<T, String>,
{
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        let record = parse(line).map_err(|reason| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: idx + 1,
            reason,
        })?;
        out.push(record);
    }
    Ok(out)
}

fn check_id(id: &str, seen: &mut HashSet<String>) -> std::result::Result<(), String> {
    if id.is_empty() {
        return Err("empty id".into());
    }
    if !seen.insert(id.to_owned()) {
        return Err(format!("duplicate id {id:?}"));
    }
    Ok(())
}

fn unit_from_json(value: &Value) -> std::result::Result<u32, String> {
    value
        .as_u64()
        .and_then(|u| u32::try_from(u).ok())
        .ok_or_else(|| format!("unit {value} is not an integer in 0..={}", u32::MAX))
}

/// Parses unit records from any buffered reader; `path` only labels errors.
pub fn parse_unit_records<R: BufRead>(reader: R, path: &Path) -> Result<Vec<UtteranceRecord>> {
    let mut seen = HashSet::new();
    parse_lines(reader, path, |line| {
        let raw: RawUnitRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        check_id(&raw.id, &mut seen)?;
        let units = raw
            .units
            .iter()
            .map(unit_from_json)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(UtteranceRecord {
            id: raw.id,
            group: raw.group,
            units,
        })
    })
}

pub fn parse_token_records<R: BufRead>(reader: R, path: &Path) -> Result<Vec<TokenRecord>> {
    let mut seen = HashSet::new();
    parse_lines(reader, path, |line| {
        let raw: RawTokenRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        check_id(&raw.id, &mut seen)?;
        if let Some(pos) = raw.tokens.iter().position(String::is_empty) {
            return Err(format!("empty token at position {pos}"));
        }
        Ok(TokenRecord {
            id: raw.id,
            group: raw.group,
            tokens: raw.tokens,
        })
    })
}

pub fn read_unit_records(path: impl AsRef<Path>) -> Result<Vec<UtteranceRecord>> {
    let path = path.as_ref();
    parse_unit_records(BufReader::new(open(path)?), path)
}

pub fn read_token_records(path: impl AsRef<Path>) -> Result<Vec<TokenRecord>> {
    let path = path.as_ref();
    parse_token_records(BufReader::new(open(path)?), path)
}

fn write_jsonl<T: Serialize>(records: &[T], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_unit_records(records: &[UtteranceRecord], path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(records, path.as_ref())
}

pub fn write_token_records(records: &[TokenRecord], path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(records, path.as_ref())
}

/// Reads a manifest. Relative feature paths are resolved against the
/// manifest's own directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let mut seen = HashSet::new();
    parse_lines(BufReader::new(open(path)?), path, |line| {
        let mut entry: ManifestEntry = serde_json::from_str(line).map_err(|e| e.to_string())?;
        check_id(&entry.id, &mut seen)?;
        if entry.path.is_relative() {
            entry.path = base.join(&entry.path);
        }
        Ok(entry)
    })
}

pub fn write_manifest(entries: &[ManifestEntry], path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(entries, path.as_ref())
}

/// Loads every feature file listed in a manifest, labelling each matrix
/// with the manifest id and group.
pub fn load_manifest_features(path: impl AsRef<Path>) -> Result<Vec<FeatureMatrix>> {
    read_manifest(path)?
        .into_iter()
        .map(|entry| {
            let mut m = read_feature_matrix(&entry.path)?;
            m.id = entry.id;
            m.group = entry.group;
            Ok(m)
        })
        .collect()
}

/// Reads a `magic | version | rows | cols | f32 payload` file, the layout
/// shared by feature matrices and codebooks.
pub(crate) fn read_f32_grid(path: &Path, magic: [u8; 4]) -> Result<(usize, usize, Vec<f32>)> {
    let mut bytes = Vec::new();
    open(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN as usize {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected: HEADER_LEN,
            actual: bytes.len() as u64,
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let found: [u8; 4] = bytes[0..4].try_into().unwrap();
    if found != magic {
        return Err(Error::BadMagic {
            path: path.into(),
            expected: magic,
            found,
        });
    }
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(Error::BadVersion {
            path: path.into(),
            version,
        });
    }
    let (rows, cols) = (word(8) as u64, word(12) as u64);
    if cols == 0 {
        return Err(Error::BadHeader {
            path: path.into(),
            reason: "dimension is 0".into(),
        });
    }
    let expected = HEADER_LEN + 4 * rows * cols;
    if bytes.len() as u64 != expected {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    let values = bytes[HEADER_LEN as usize..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((rows as usize, cols as usize, values))
}

pub(crate) fn write_f32_grid(
    path: &Path,
    magic: [u8; 4],
    rows: usize,
    cols: usize,
    values: impl IntoIterator<Item = f32>,
) -> Result<()> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} exceeds u32")))
    };
    let mut buf = Vec::with_capacity(HEADER_LEN as usize + 4 * rows * cols);
    buf.extend_from_slice(&magic);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&to_u32(rows, "row count")?.to_le_bytes());
    buf.extend_from_slice(&to_u32(cols, "dimension")?.to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads a `FEAT` file. The matrix id defaults to the file stem.
pub fn read_feature_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let (_, dim, values) = read_f32_grid(path, FEATURE_MAGIC)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    FeatureMatrix::new(id, dim, values)
}

pub fn write_feature_matrix(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_f32_grid(
        path.as_ref(),
        FEATURE_MAGIC,
        matrix.n_frames,
        matrix.dim,
        matrix.values.iter().copied(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn units(text: &str) -> Result<Vec<UtteranceRecord>> {
        parse_unit_records(text.as_bytes(), Path::new("mem"))
    }

    fn tokens(text: &str) -> Result<Vec<TokenRecord>> {
        parse_token_records(text.as_bytes(), Path::new("mem"))
    }

    fn malformed_line(err: Error) -> usize {
        match err {
            Error::MalformedRecord { line, .. } => line,
            other => panic!("expected MalformedRecord, got {other:?}"),
        }
    }

    #[test]
    fn parses_unit_line() {
        let recs = units(r#"{"id":"u1","units":[3,50,200]}"#).unwrap();
        assert_eq!(
            recs,
            vec![UtteranceRecord {
                id: "u1".into(),
                group: None,
                units: vec![3, 50, 200]
            }]
        );
    }

    #[test]
    fn empty_input_is_empty_list() {
        assert!(units("").unwrap().is_empty());
        assert!(tokens("").unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_units_with_line_numbers() {
        assert_eq!(malformed_line(units(r#"{"id":"u2","units":[-1]}"#).unwrap_err()), 1);
        let two = "{\"id\":\"a\",\"units\":[1]}\n{\"id\":\"b\",\"units\":[1.5]}\n";
        assert_eq!(malformed_line(units(two).unwrap_err()), 2);
        assert_eq!(malformed_line(units(r#"{"id":"","units":[]}"#).unwrap_err()), 1);
        let dup = "{\"id\":\"a\",\"units\":[1]}\n{\"id\":\"a\",\"units\":[2]}\n";
        assert_eq!(malformed_line(units(dup).unwrap_err()), 2);
        assert_eq!(malformed_line(units("not json").unwrap_err()), 1);
        let blank = "{\"id\":\"a\",\"units\":[1]}\n\n{\"id\":\"b\",\"units\":[1]}\n";
        assert_eq!(malformed_line(units(blank).unwrap_err()), 2);
    }

    #[test]
    fn unknown_keys_ignored_and_group_kept() {
        let recs = units(r#"{"id":"u","units":[],"group":"low","speaker":"s1"}"#).unwrap();
        assert_eq!(recs[0].group.as_deref(), Some("low"));
    }

    #[test]
    fn token_records() {
        let recs = tokens(r#"{"id":"t1","tokens":["the","cat"]}"#).unwrap();
        assert_eq!(recs[0].tokens, vec!["the", "cat"]);
        assert_eq!(recs[0].group, None);

        let recs = tokens(r#"{"id":"t1","tokens":["x"],"group":"native"}"#).unwrap();
        assert_eq!(recs[0].group.as_deref(), Some("native"));

        let err = tokens(r#"{"id":"t1","tokens":["a",""]}"#).unwrap_err();
        assert_eq!(malformed_line(err), 1);
    }

    #[test]
    fn feature_file_roundtrip_and_header_checks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("utt.feat");

        let mut bytes = b"FEAT".to_vec();
        for w in [1u32, 2, 3] {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        for v in [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, &bytes).unwrap();
        let m = read_feature_matrix(&path).unwrap();
        assert_eq!((m.n_frames(), m.dim(), m.id.as_str()), (2, 3, "utt"));
        assert_eq!(m.frame(1), &[4.0, 5.0, 6.0]);

        let out = dir.path().join("copy.feat");
        write_feature_matrix(&m, &out).unwrap();
        assert_eq!(std::fs::read(&out).unwrap(), bytes);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(read_feature_matrix(&path), Err(Error::BadMagic { .. })));

        let mut bad = bytes.clone();
        bad[4] = 2;
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(
            read_feature_matrix(&path),
            Err(Error::BadVersion { version: 2, .. })
        ));

        std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(
            read_feature_matrix(&path),
            Err(Error::TruncatedPayload { expected: 40, actual: 39, .. })
        ));

        let mut long = bytes.clone();
        long.extend_from_slice(&[0; 4]);
        std::fs::write(&path, &long).unwrap();
        assert!(matches!(read_feature_matrix(&path), Err(Error::TruncatedPayload { .. })));

        let mut nan = bytes.clone();
        nan[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        std::fs::write(&path, &nan).unwrap();
        assert!(matches!(
            read_feature_matrix(&path),
            Err(Error::NonFiniteValue { frame: 0, component: 1 })
        ));
    }

    #[test]
    fn empty_feature_matrix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.feat");
        let mut bytes = b"FEAT".to_vec();
        for w in [1u32, 0, 4] {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        std::fs::write(&path, &bytes).unwrap();
        let m = read_feature_matrix(&path).unwrap();
        assert_eq!((m.n_frames(), m.dim()), (0, 4));
        assert_eq!(m.frames().len(), 0);
    }

    #[test]
    fn manifest_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let m = FeatureMatrix::new("x", 2, vec![0.5, 1.5]).unwrap();
        write_feature_matrix(&m, dir.path().join("a.feat")).unwrap();
        let manifest = dir.path().join("manifest.jsonl");
        std::fs::write(
            &manifest,
            "{\"id\":\"utt-a\",\"path\":\"a.feat\",\"group\":\"native\"}\n",
        )
        .unwrap();
        let loaded = load_manifest_features(&manifest).unwrap();
        assert_eq!(loaded[0].id, "utt-a");
        assert_eq!(loaded[0].group.as_deref(), Some("native"));
        assert_eq!(loaded[0].values(), &[0.5, 1.5]);
    }

    #[test]
    fn unit_writer_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.jsonl");
        let recs = vec![UtteranceRecord {
            id: "u1".into(),
            group: Some("g".into()),
            units: vec![3, 50, 200],
        }];
        write_unit_records(&recs, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        assert_eq!(first, b"{\"id\":\"u1\",\"group\":\"g\",\"units\":[3,50,200]}\n");
        write_unit_records(&recs, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);

        write_unit_records(&[], &path).unwrap();
        assert!(std::fs::read(&path).unwrap().is_empty());
    }
}
