//! Binary model checkpoints.
//!
//! Layout (all integers u32 little-endian):
//!
//! ```text
//! "SDYN" | version | tag_len | tag bytes | hidden | input | vocab | state | n_tensors
//! per tensor: name_len | name bytes | rows | cols | rows*cols f32 LE, row-major
//! ```
//!
//! Tensors are written in a fixed order: `embedding`, `cell.<name>` for each
//! cell tensor, `readout` (1×state), `readout_bias` (1×1). The vocabulary is
//! stored next to the checkpoint as `<stem>.vocab`, one token per line,
//! reserved tokens first.

use std::fs;
use std::path::{Path, PathBuf};

use sentidyn::cells::{Architecture, CellParameters};
use sentidyn::numerics::Matrix;
use sentidyn::training::{ClassifierModel, Vocabulary, OOV_TOKEN, PAD_TOKEN};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"SDYN";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ClassifierModel,
    pub vocab: Vocabulary,
}

pub fn vocab_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("vocab")
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("dimension fits in u32").to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

fn put_tensor(out: &mut Vec<u8>, name: &str, rows: usize, cols: usize, data: &[f64]) {
    put_str(out, name);
    put_u32(out, rows);
    put_u32(out, cols);
    for &v in data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CliError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CliError::Checkpoint("non-UTF-8 name".into()))
    }

    fn tensor(&mut self, expected: &str) -> Result<Matrix> {
        let name = self.string()?;
        if name != expected {
            return Err(CliError::Checkpoint(format!("expected tensor '{expected}', found '{name}'")));
        }
        let rows = self.u32()?;
        let cols = self.u32()?;
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| CliError::Checkpoint(format!("tensor '{name}' is too large")))?;
        let raw = self.take(n)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Ok(Matrix::from_vec(rows, cols, data)?)
    }
}

impl Checkpoint {
    pub fn new(model: ClassifierModel, vocab: Vocabulary) -> Result<Self> {
        if model.vocab_size() != vocab.len() {
            return Err(CliError::Checkpoint(format!(
                "embedding has {} rows but the vocabulary has {} tokens",
                model.vocab_size(),
                vocab.len()
            )));
        }
        Ok(Self { model, vocab })
    }

    pub fn architecture(&self) -> Architecture {
        self.model.architecture()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.model;
        let cell = &m.cell;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, cell.architecture().tag());
        put_u32(&mut out, cell.hidden_size());
        put_u32(&mut out, cell.input_size());
        put_u32(&mut out, m.vocab_size());
        put_u32(&mut out, cell.state_size());
        put_u32(&mut out, cell.tensors().len() + 3);
        put_tensor(&mut out, "embedding", m.embedding.rows(), m.embedding.cols(), m.embedding.as_slice());
        for (name, t) in cell.tensor_names().iter().zip(cell.tensors()) {
            put_tensor(&mut out, &format!("cell.{name}"), t.rows(), t.cols(), t.as_slice());
        }
        put_tensor(&mut out, "readout", 1, m.readout.len(), &m.readout);
        put_tensor(&mut out, "readout_bias", 1, 1, &[m.readout_bias]);
        out
    }

    pub fn vocab_text(&self) -> String {
        let mut s = String::new();
        for t in self.vocab.tokens() {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    /// Parses a checkpoint. When `expected` is given, a different
    /// architecture tag is an error.
    pub fn from_parts(bytes: &[u8], vocab_text: &str, expected: Option<Architecture>) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(CliError::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()? as u32;
        if version != VERSION {
            return Err(CliError::Checkpoint(format!("unsupported version {version} (expected {VERSION})")));
        }
        let tag = r.string()?;
        let arch: Architecture = tag
            .parse()
            .map_err(|_| CliError::Checkpoint(format!("unknown architecture tag '{tag}'")))?;
        if let Some(want) = expected {
            if want != arch {
                return Err(CliError::Checkpoint(format!("checkpoint holds a {arch} model, expected {want}")));
            }
        }
        let hidden = r.u32()?;
        let input = r.u32()?;
        let vocab_size = r.u32()?;
        let state = r.u32()?;
        if state != arch.state_size(hidden) {
            return Err(CliError::Checkpoint(format!("state size {state} inconsistent with {arch} of hidden size {hidden}")));
        }
        let layout = arch.tensor_layout(hidden, input);
        let n = r.u32()?;
        if n != layout.len() + 3 {
            return Err(CliError::Checkpoint(format!("expected {} tensors, found {n}", layout.len() + 3)));
        }
        let embedding = r.tensor("embedding")?;
        if embedding.rows() != vocab_size || embedding.cols() != input {
            return Err(CliError::Checkpoint("embedding shape disagrees with header".into()));
        }
        let mut tensors = Vec::with_capacity(layout.len());
        for (name, _, _) in &layout {
            tensors.push(r.tensor(&format!("cell.{name}"))?);
        }
        let cell = CellParameters::from_tensors(arch, hidden, input, tensors)?;
        let readout = r.tensor("readout")?;
        if readout.rows() != 1 || readout.cols() != state {
            return Err(CliError::Checkpoint("readout shape disagrees with header".into()));
        }
        let bias = r.tensor("readout_bias")?;
        if bias.rows() != 1 || bias.cols() != 1 {
            return Err(CliError::Checkpoint("readout_bias must be 1x1".into()));
        }
        if r.pos != bytes.len() {
            return Err(CliError::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let model = ClassifierModel {
            embedding,
            cell,
            readout: readout.into_vec(),
            readout_bias: bias[(0, 0)],
        };
        model.validate()?;

        let lines: Vec<&str> = vocab_text.lines().collect();
        if lines.len() < 2 || lines[0] != OOV_TOKEN || lines[1] != PAD_TOKEN {
            return Err(CliError::Checkpoint("vocabulary must start with the reserved tokens".into()));
        }
        let vocab = Vocabulary::from_tokens(&lines[2..])?;
        Self::new(model, vocab)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))?;
        let vp = vocab_path(path);
        fs::write(&vp, self.vocab_text()).map_err(|e| CliError::io(&vp, e))
    }

    pub fn load(path: &Path, expected: Option<Architecture>) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        let vp = vocab_path(path);
        let text = fs::read_to_string(&vp).map_err(|e| CliError::io(&vp, e))?;
        Self::from_parts(&bytes, &text, expected)
    }

    /// The model with every parameter rounded to f32, i.e. exactly what a
    /// save/load cycle produces.
    pub fn rounded(model: &ClassifierModel) -> ClassifierModel {
        let mut m = model.clone();
        let round = |v: &mut f64| *v = *v as f32 as f64;
        m.embedding.as_mut_slice().iter_mut().for_each(round);
        for t in m.cell.tensors_mut() {
            t.as_mut_slice().iter_mut().for_each(round);
        }
        m.readout.iter_mut().for_each(round);
        round(&mut m.readout_bias);
        m
    }
}
