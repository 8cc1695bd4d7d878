//! The `LWPDUMP1` embedding-dump format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic       8 bytes   "LWPDUMP1"
//! header_len  u64
//! header      header_len bytes of UTF-8 JSON (a serialized DumpHeader)
//! padding     zero bytes up to the next 8-byte boundary
//! blocks      one row-major f32 matrix per (condition, layer), each at its
//!             declared byte_offset (8-byte aligned)
//! ```
//!
//! Row `r` of block `(c, l)` holds the last-token embedding of `samples[r]`
//! under condition `c` at layer `l`. Layers are 1-based. Every sample has a
//! row under every condition, compliant or not.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Cursor, Read, Seek, SeekFrom, Write};
use std::path::Path;
use std::sync::Mutex;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"LWPDUMP1";
pub const FORMAT_VERSION: u32 = 1;

const PREAMBLE_LEN: u64 = 16;

/// `(condition_id, layer)`
pub type BlockKey = (u32, u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    Anchor,
    Lexical,
    SemanticNegation,
    OutputFormat,
}

impl ConditionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConditionKind::Anchor => "anchor",
            ConditionKind::Lexical => "lexical",
            ConditionKind::SemanticNegation => "semantic_negation",
            ConditionKind::OutputFormat => "output_format",
        }
    }
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ConditionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "anchor" => Ok(ConditionKind::Anchor),
            "lexical" => Ok(ConditionKind::Lexical),
            "semantic_negation" => Ok(ConditionKind::SemanticNegation),
            "output_format" => Ok(ConditionKind::OutputFormat),
            other => Err(format!("unknown condition kind {other:?}")),
        }
    }
}

/// A prompt under which embeddings were extracted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub id: u32,
    pub kind: ConditionKind,
    pub prompt_text: String,
    pub expected_answer: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub sample_id: String,
    pub class_index: usize,
    pub split: Split,
    /// Whether the model answered as expected under each condition.
    pub compliance: BTreeMap<u32, bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockIndex {
    pub condition_id: u32,
    pub layer: u32,
    pub byte_offset: u64,
    pub rows: u64,
    pub cols: u64,
}

impl BlockIndex {
    pub fn key(&self) -> BlockKey {
        (self.condition_id, self.layer)
    }

    pub fn byte_len(&self) -> u64 {
        self.rows * self.cols * 4
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub format_version: u32,
    pub model_name: String,
    pub num_layers: u32,
    pub hidden_dim: u32,
    pub class_names: Vec<String>,
    pub conditions: Vec<Condition>,
    pub samples: Vec<SampleMeta>,
    pub blocks: Vec<BlockIndex>,
}

impl DumpHeader {
    /// Builds a header declaring one block per (condition, layer), in
    /// condition order then layer order. Offsets are assigned by the writer.
    pub fn new(
        model_name: impl Into<String>,
        num_layers: u32,
        hidden_dim: u32,
        class_names: Vec<String>,
        conditions: Vec<Condition>,
        samples: Vec<SampleMeta>,
    ) -> Self {
        let rows = samples.len() as u64;
        let blocks = conditions
            .iter()
            .flat_map(|c| {
                (1..=num_layers).map(move |layer| BlockIndex {
                    condition_id: c.id,
                    layer,
                    byte_offset: 0,
                    rows,
                    cols: hidden_dim as u64,
                })
            })
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            model_name: model_name.into(),
            num_layers,
            hidden_dim,
            class_names,
            conditions,
            samples,
            blocks,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn condition(&self, id: u32) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.id == id)
    }

    pub fn anchor(&self) -> Option<&Condition> {
        self.conditions
            .iter()
            .find(|c| c.kind == ConditionKind::Anchor)
    }

    pub fn block(&self, condition_id: u32, layer: u32) -> Option<&BlockIndex> {
        self.blocks
            .iter()
            .find(|b| b.condition_id == condition_id && b.layer == layer)
    }

    fn data_start(json_len: u64) -> u64 {
        align8(PREAMBLE_LEN + json_len)
    }
}

/// A single problem found in a dump. Every variant names what it is about.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("bad magic")]
    BadMagic,
    #[error("truncated header")]
    TruncatedHeader,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported format_version {0}")]
    UnsupportedVersion(u32),
    #[error("num_layers must be >= 1")]
    NoLayers,
    #[error("hidden_dim must be >= 1")]
    NoHiddenDim,
    #[error("need at least 2 classes, found {0}")]
    TooFewClasses(usize),
    #[error("duplicate class name {0:?}")]
    DuplicateClassName(String),
    #[error("expected exactly one anchor condition, found {0}")]
    AnchorCount(usize),
    #[error("duplicate condition id {0}")]
    DuplicateConditionId(u32),
    #[error("condition {0} has an empty prompt_text")]
    EmptyPrompt(u32),
    #[error("condition {condition_id}: {detail}")]
    ExpectedAnswer { condition_id: u32, detail: String },
    #[error("duplicate sample_id {0:?}")]
    DuplicateSampleId(String),
    #[error("sample {sample_id:?}: class_index {class_index} out of range")]
    ClassOutOfRange {
        sample_id: String,
        class_index: usize,
    },
    #[error("sample {sample_id:?}: no compliance entry for condition {condition_id}")]
    MissingCompliance {
        sample_id: String,
        condition_id: u32,
    },
    #[error("sample {sample_id:?}: compliance entry for undeclared condition {condition_id}")]
    UndeclaredCompliance {
        sample_id: String,
        condition_id: u32,
    },
    #[error("missing block (condition_id={0}, layer={1})")]
    MissingBlock(u32, u32),
    #[error("duplicate block (condition_id={0}, layer={1})")]
    DuplicateBlock(u32, u32),
    #[error("unexpected block (condition_id={0}, layer={1})")]
    UnexpectedBlock(u32, u32),
    #[error("block (condition_id={condition_id}, layer={layer}) has shape {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    BlockShape {
        condition_id: u32,
        layer: u32,
        rows: u64,
        cols: u64,
        expected_rows: u64,
        expected_cols: u64,
    },
    #[error("block (condition_id={0}, layer={1}) offset {2} is not 8-byte aligned")]
    MisalignedBlock(u32, u32, u64),
    #[error("block (condition_id={0}, layer={1}) overlaps the header")]
    BlockOverlapsHeader(u32, u32),
    #[error("blocks (condition_id={}, layer={}) and (condition_id={}, layer={}) overlap", .0.0, .0.1, .1.0, .1.1)]
    OverlappingBlocks(BlockKey, BlockKey),
    #[error("truncated block (condition_id={0}, layer={1})")]
    TruncatedBlock(u32, u32),
    #[error("file has {0} trailing bytes after the last block")]
    TrailingBytes(u64),
    #[error("non-finite value in block (condition_id={condition_id}, layer={layer}) at row {row}, col {col}")]
    NonFinite {
        condition_id: u32,
        layer: u32,
        row: usize,
        col: usize,
    },
}

#[derive(Debug, Error)]
pub enum DumpError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{0}")]
    Format(#[from] Violation),
    #[error("tensor mismatch: {0}")]
    TensorMismatch(String),
    #[error("no block (condition_id={0}, layer={1}) in dump")]
    UnknownBlock(u32, u32),
}

pub type Result<T, E = DumpError> = std::result::Result<T, E>;

fn align8(n: u64) -> u64 {
    n.div_ceil(8) * 8
}

/// Checks every header invariant that does not depend on the file layout.
pub fn header_violations(h: &DumpHeader) -> Vec<Violation> {
    let mut out = Vec::new();
    if h.format_version != FORMAT_VERSION {
        out.push(Violation::UnsupportedVersion(h.format_version));
    }
    if h.num_layers == 0 {
        out.push(Violation::NoLayers);
    }
    if h.hidden_dim == 0 {
        out.push(Violation::NoHiddenDim);
    }
    if h.class_names.len() < 2 {
        out.push(Violation::TooFewClasses(h.class_names.len()));
    }
    let mut seen = HashSet::new();
    for name in &h.class_names {
        if !seen.insert(name.as_str()) {
            out.push(Violation::DuplicateClassName(name.clone()));
        }
    }

    let anchors: Vec<&Condition> = h
        .conditions
        .iter()
        .filter(|c| c.kind == ConditionKind::Anchor)
        .collect();
    if anchors.len() != 1 {
        out.push(Violation::AnchorCount(anchors.len()));
    }
    let mut ids = BTreeSet::new();
    for c in &h.conditions {
        if !ids.insert(c.id) {
            out.push(Violation::DuplicateConditionId(c.id));
        }
        if c.prompt_text.is_empty() {
            out.push(Violation::EmptyPrompt(c.id));
        }
    }
    if let [anchor] = anchors.as_slice() {
        for c in &h.conditions {
            let detail = match c.kind {
                ConditionKind::Lexical if c.expected_answer != anchor.expected_answer => {
                    Some(format!(
                        "lexical variant expects {:?} but anchor expects {:?}",
                        c.expected_answer, anchor.expected_answer
                    ))
                }
                ConditionKind::SemanticNegation if c.expected_answer == anchor.expected_answer => {
                    Some(format!(
                        "semantic negation must flip the expected answer {:?}",
                        anchor.expected_answer
                    ))
                }
                _ => None,
            };
            if let Some(detail) = detail {
                out.push(Violation::ExpectedAnswer {
                    condition_id: c.id,
                    detail,
                });
            }
        }
    }

    let mut sample_ids = HashSet::new();
    for s in &h.samples {
        if !sample_ids.insert(s.sample_id.as_str()) {
            out.push(Violation::DuplicateSampleId(s.sample_id.clone()));
        }
        if s.class_index >= h.class_names.len() {
            out.push(Violation::ClassOutOfRange {
                sample_id: s.sample_id.clone(),
                class_index: s.class_index,
            });
        }
        for &id in &ids {
            if !s.compliance.contains_key(&id) {
                out.push(Violation::MissingCompliance {
                    sample_id: s.sample_id.clone(),
                    condition_id: id,
                });
            }
        }
        for &id in s.compliance.keys() {
            if !ids.contains(&id) {
                out.push(Violation::UndeclaredCompliance {
                    sample_id: s.sample_id.clone(),
                    condition_id: id,
                });
            }
        }
    }

    let mut declared = BTreeSet::new();
    for b in &h.blocks {
        let (c, l) = b.key();
        if !ids.contains(&c) || l == 0 || l > h.num_layers {
            out.push(Violation::UnexpectedBlock(c, l));
            continue;
        }
        if !declared.insert(b.key()) {
            out.push(Violation::DuplicateBlock(c, l));
        }
        let (rows, cols) = (h.samples.len() as u64, h.hidden_dim as u64);
        if b.rows != rows || b.cols != cols {
            out.push(Violation::BlockShape {
                condition_id: c,
                layer: l,
                rows: b.rows,
                cols: b.cols,
                expected_rows: rows,
                expected_cols: cols,
            });
        }
    }
    for &c in &ids {
        for l in 1..=h.num_layers {
            if !declared.contains(&(c, l)) {
                out.push(Violation::MissingBlock(c, l));
            }
        }
    }
    out
}

/// Checks block placement against the header size and the file length.
fn layout_violations(h: &DumpHeader, data_start: u64, file_len: u64) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut spans: Vec<(u64, u64, BlockKey)> = Vec::new();
    let mut end = data_start;
    for b in &h.blocks {
        let (c, l) = b.key();
        if b.byte_offset % 8 != 0 {
            out.push(Violation::MisalignedBlock(c, l, b.byte_offset));
        }
        if b.byte_offset < data_start {
            out.push(Violation::BlockOverlapsHeader(c, l));
        }
        let block_end = b.byte_offset.saturating_add(b.byte_len());
        if block_end > file_len {
            out.push(Violation::TruncatedBlock(c, l));
        }
        if b.byte_len() > 0 {
            spans.push((b.byte_offset, block_end, b.key()));
        }
        end = end.max(block_end);
    }
    spans.sort_unstable();
    for pair in spans.windows(2) {
        if pair[1].0 < pair[0].1 {
            out.push(Violation::OverlappingBlocks(pair[0].2, pair[1].2));
        }
    }
    if file_len > end {
        out.push(Violation::TrailingBytes(file_len - end));
    }
    out
}

/// Writes a dump, assigning block offsets, and returns the header as written.
///
/// `header.blocks` declares which tensors must be present; declared offsets
/// are ignored and recomputed.
pub fn write_dump<W: Write>(
    writer: W,
    header: &DumpHeader,
    tensors: &BTreeMap<BlockKey, Array2<f32>>,
) -> Result<DumpHeader> {
    if let Some(v) = header_violations(header).into_iter().next() {
        return Err(v.into());
    }
    let declared: BTreeSet<BlockKey> = header.blocks.iter().map(BlockIndex::key).collect();
    for key in tensors.keys() {
        if !declared.contains(key) {
            return Err(DumpError::TensorMismatch(format!(
                "tensor (condition_id={}, layer={}) has no declared block",
                key.0, key.1
            )));
        }
    }
    for b in &header.blocks {
        let (c, l) = b.key();
        let t = tensors.get(&(c, l)).ok_or_else(|| {
            DumpError::TensorMismatch(format!("no tensor for block (condition_id={c}, layer={l})"))
        })?;
        if t.nrows() as u64 != b.rows || t.ncols() as u64 != b.cols {
            return Err(DumpError::TensorMismatch(format!(
                "tensor (condition_id={c}, layer={l}) is {}x{}, block declares {}x{}",
                t.nrows(),
                t.ncols(),
                b.rows,
                b.cols
            )));
        }
        if let Some(((row, col), _)) = t.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Violation::NonFinite {
                condition_id: c,
                layer: l,
                row,
                col,
            }
            .into());
        }
    }

    // Offsets are encoded in the header, so its length depends on them.
    // Iterate to the (monotone) fixed point.
    let mut out = header.clone();
    let mut data_start = 0;
    let json = loop {
        let mut cursor = data_start;
        for b in &mut out.blocks {
            b.byte_offset = cursor;
            cursor = align8(cursor + b.byte_len());
        }
        let json = serde_json::to_vec(&out).map_err(io::Error::other)?;
        let needed = DumpHeader::data_start(json.len() as u64);
        if needed == data_start {
            break json;
        }
        data_start = needed;
    };

    let mut w = BufWriter::new(writer);
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    let mut pos = PREAMBLE_LEN + json.len() as u64;
    let mut buf = Vec::new();
    for b in &out.blocks {
        pad_to(&mut w, &mut pos, b.byte_offset)?;
        let t = &tensors[&b.key()];
        buf.clear();
        buf.reserve(t.len() * 4);
        for v in t.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        pos += buf.len() as u64;
    }
    w.flush()?;
    Ok(out)
}

fn pad_to<W: Write>(w: &mut W, pos: &mut u64, target: u64) -> io::Result<()> {
    const ZEROS: [u8; 8] = [0; 8];
    debug_assert!(target >= *pos && target - *pos < 8);
    w.write_all(&ZEROS[..(target - *pos) as usize])?;
    *pos = target;
    Ok(())
}

pub fn write_dump_file(
    path: impl AsRef<Path>,
    header: &DumpHeader,
    tensors: &BTreeMap<BlockKey, Array2<f32>>,
) -> Result<DumpHeader> {
    let file = File::create(path)?;
    write_dump(file, header, tensors)
}

/// Reads the preamble and header JSON. Returns the header and data start.
fn read_header<R: Read>(r: &mut R) -> Result<(DumpHeader, u64)> {
    let mut magic = [0u8; 8];
    read_or(r, &mut magic, Violation::BadMagic)?;
    if &magic != MAGIC {
        return Err(Violation::BadMagic.into());
    }
    let mut len = [0u8; 8];
    read_or(r, &mut len, Violation::TruncatedHeader)?;
    let len = u64::from_le_bytes(len);
    let mut json = Vec::new();
    r.take(len).read_to_end(&mut json)?;
    if (json.len() as u64) < len {
        return Err(Violation::TruncatedHeader.into());
    }
    let header: DumpHeader =
        serde_json::from_slice(&json).map_err(|e| Violation::MalformedHeader(e.to_string()))?;
    Ok((header, DumpHeader::data_start(len)))
}

fn read_or<R: Read>(r: &mut R, buf: &mut [u8], short: Violation) -> Result<()> {
    match r.read_exact(buf) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Err(short.into()),
        Err(e) => Err(e.into()),
    }
}

/// An opened, validated dump. Blocks are read on demand; the handle can be
/// shared between threads.
#[derive(Debug)]
pub struct Dump<R = File> {
    header: DumpHeader,
    source: Mutex<R>,
}

impl Dump<File> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        parse_dump(File::open(path)?)
    }
}

impl Dump<Cursor<Vec<u8>>> {
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        parse_dump(Cursor::new(bytes))
    }
}

/// Parses and validates a dump. The first violation found is returned as
/// the error.
pub fn parse_dump<R: Read + Seek>(mut source: R) -> Result<Dump<R>> {
    let file_len = source.seek(SeekFrom::End(0))?;
    source.seek(SeekFrom::Start(0))?;
    let (header, data_start) = read_header(&mut source)?;
    let mut problems = header_violations(&header);
    if problems.is_empty() {
        problems = layout_violations(&header, data_start, file_len);
    }
    if let Some(v) = problems.into_iter().next() {
        return Err(v.into());
    }
    Ok(Dump {
        header,
        source: Mutex::new(source),
    })
}

impl<R: Read + Seek> Dump<R> {
    pub fn header(&self) -> &DumpHeader {
        &self.header
    }

    /// Reads the `rows x hidden_dim` matrix for `(condition_id, layer)`.
    pub fn block(&self, condition_id: u32, layer: u32) -> Result<Array2<f32>> {
        let b = *self
            .header
            .block(condition_id, layer)
            .ok_or(DumpError::UnknownBlock(condition_id, layer))?;
        let mut bytes = vec![0u8; b.byte_len() as usize];
        {
            let mut src = self.source.lock().unwrap_or_else(|e| e.into_inner());
            src.seek(SeekFrom::Start(b.byte_offset))?;
            read_or(
                &mut *src,
                &mut bytes,
                Violation::TruncatedBlock(condition_id, layer),
            )?;
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(
            Array2::from_shape_vec((b.rows as usize, b.cols as usize), data)
                .expect("block length matches its declared shape"),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DumpSummary {
    pub model_name: String,
    pub num_layers: u32,
    pub hidden_dim: u32,
    pub num_classes: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    /// `(condition_id, kind, fraction of samples compliant)`
    pub compliance_rates: Vec<(u32, ConditionKind, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub summary: Option<DumpSummary>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.violations.is_empty() {
            writeln!(f, "invalid: {} violation(s)", self.violations.len())?;
            for v in &self.violations {
                writeln!(f, "  - {v}")?;
            }
            return Ok(());
        }
        writeln!(f, "valid")?;
        if let Some(s) = &self.summary {
            writeln!(f, "  model:       {}", s.model_name)?;
            writeln!(f, "  layers (L):  {}", s.num_layers)?;
            writeln!(f, "  hidden (d):  {}", s.hidden_dim)?;
            writeln!(f, "  classes (N): {}", s.num_classes)?;
            writeln!(f, "  train/test:  {}/{}", s.train_samples, s.test_samples)?;
            for (id, kind, rate) in &s.compliance_rates {
                writeln!(f, "  compliance[{id} {kind}]: {rate:.4}")?;
            }
        }
        Ok(())
    }
}

/// Checks a dump file and reports every problem found. Only failing to
/// read the file at all is an error.
pub fn validate_dump(path: impl AsRef<Path>) -> io::Result<ValidationReport> {
    let bytes = std::fs::read(path)?;
    Ok(validate_bytes(&bytes))
}

pub fn validate_bytes(bytes: &[u8]) -> ValidationReport {
    let invalid = |v: Violation| ValidationReport {
        violations: vec![v],
        summary: None,
    };
    let (header, data_start) = match read_header(&mut Cursor::new(bytes)) {
        Ok(x) => x,
        Err(DumpError::Format(v)) => return invalid(v),
        Err(e) => return invalid(Violation::MalformedHeader(e.to_string())),
    };
    let file_len = bytes.len() as u64;
    let mut violations = header_violations(&header);
    violations.extend(layout_violations(&header, data_start, file_len));

    for b in &header.blocks {
        let end = b.byte_offset.saturating_add(b.byte_len());
        if b.cols == 0 || end > file_len {
            continue;
        }
        let payload = &bytes[b.byte_offset as usize..end as usize];
        if let Some(i) = payload
            .chunks_exact(4)
            .position(|c| !f32::from_le_bytes([c[0], c[1], c[2], c[3]]).is_finite())
        {
            violations.push(Violation::NonFinite {
                condition_id: b.condition_id,
                layer: b.layer,
                row: i / b.cols as usize,
                col: i % b.cols as usize,
            });
        }
    }

    if !violations.is_empty() {
        return ValidationReport {
            violations,
            summary: None,
        };
    }
    let n = header.samples.len();
    let count = |split| header.samples.iter().filter(|s| s.split == split).count();
    let compliance_rates = header
        .conditions
        .iter()
        .map(|c| {
            let ok = header
                .samples
                .iter()
                .filter(|s| s.compliance.get(&c.id).copied().unwrap_or(false))
                .count();
            let rate = if n == 0 { 1.0 } else { ok as f64 / n as f64 };
            (c.id, c.kind, rate)
        })
        .collect();
    ValidationReport {
        violations,
        summary: Some(DumpSummary {
            model_name: header.model_name.clone(),
            num_layers: header.num_layers,
            hidden_dim: header.hidden_dim,
            num_classes: header.num_classes(),
            train_samples: count(Split::Train),
            test_samples: count(Split::Test),
            compliance_rates,
        }),
    }
}
