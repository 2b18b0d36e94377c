//! Reader for the subset of NPY we accept: format version 1.0, C order,
//! little-endian `<f4` or `<f8`. Anything else is rejected with a typed error.

use std::path::Path;

use crate::binio::{checked_product, read_file, write_file, Cursor};
use crate::data_model::{TrialSet, N_LABEL_DIMS};
use crate::error::{bail, Error, Result};

const NPY_MAGIC: &[u8; 6] = b"\x93NUMPY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NpyDtype {
    F32,
    F64,
}

impl NpyDtype {
    fn descr(self) -> &'static str {
        match self {
            NpyDtype::F32 => "<f4",
            NpyDtype::F64 => "<f8",
        }
    }

    fn width(self) -> usize {
        match self {
            NpyDtype::F32 => 4,
            NpyDtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NpyMeta {
    pub dtype: NpyDtype,
    pub fortran_order: bool,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
enum Literal {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

/// Minimal parser for the Python dict literal in an NPY header.
struct DictParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> DictParser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() != Some(c) {
            bail!(Format, "NPY header: expected {:?} at offset {}", c as char, self.pos);
        }
        self.pos += 1;
        Ok(())
    }

    fn string(&mut self) -> Result<String> {
        let quote = match self.peek() {
            Some(q @ (b'\'' | b'"')) => q,
            _ => bail!(Format, "NPY header: expected string at offset {}", self.pos),
        };
        self.pos += 1;
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos] != quote {
            self.pos += 1;
        }
        if self.pos >= self.s.len() {
            bail!(Format, "NPY header: unterminated string");
        }
        let out = std::str::from_utf8(&self.s[start..self.pos])
            .map_err(|_| Error::Format("NPY header: non-UTF-8 string".into()))?
            .to_string();
        self.pos += 1;
        Ok(out)
    }

    fn word(&mut self) -> &'a [u8] {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        &self.s[start..self.pos]
    }

    fn tuple(&mut self) -> Result<Vec<usize>> {
        self.expect(b'(')?;
        let mut dims = Vec::new();
        loop {
            if self.peek() == Some(b')') {
                self.pos += 1;
                return Ok(dims);
            }
            let w = self.word();
            if w.is_empty() || !w.iter().all(u8::is_ascii_digit) {
                bail!(Format, "NPY header: bad shape entry at offset {}", self.pos);
            }
            let d: usize = std::str::from_utf8(w)
                .unwrap()
                .parse()
                .map_err(|_| Error::Format("NPY header: shape entry overflows".into()))?;
            dims.push(d);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b')') => {}
                _ => bail!(Format, "NPY header: malformed shape tuple"),
            }
        }
    }

    fn value(&mut self) -> Result<Literal> {
        match self.peek() {
            Some(b'\'' | b'"') => Ok(Literal::Str(self.string()?)),
            Some(b'(') => Ok(Literal::Tuple(self.tuple()?)),
            _ => match self.word() {
                b"True" => Ok(Literal::Bool(true)),
                b"False" => Ok(Literal::Bool(false)),
                _ => bail!(Format, "NPY header: unsupported value at offset {}", self.pos),
            },
        }
    }

    fn dict(&mut self) -> Result<Vec<(String, Literal)>> {
        self.expect(b'{')?;
        let mut entries = Vec::new();
        loop {
            if self.peek() == Some(b'}') {
                self.pos += 1;
                break;
            }
            let key = self.string()?;
            self.expect(b':')?;
            let value = self.value()?;
            entries.push((key, value));
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {}
                _ => bail!(Format, "NPY header: expected ',' or '}}'"),
            }
        }
        if self.peek().is_some() {
            bail!(Format, "NPY header: trailing characters after dict");
        }
        Ok(entries)
    }
}

fn parse_header_dict(text: &[u8]) -> Result<NpyMeta> {
    let entries = DictParser { s: text, pos: 0 }.dict()?;
    let (mut descr, mut fortran, mut shape) = (None, None, None);
    for (key, value) in entries {
        match (key.as_str(), value) {
            ("descr", Literal::Str(s)) if descr.is_none() => descr = Some(s),
            ("fortran_order", Literal::Bool(b)) if fortran.is_none() => fortran = Some(b),
            ("shape", Literal::Tuple(t)) if shape.is_none() => shape = Some(t),
            (k, _) => bail!(Format, "NPY header: unexpected or duplicate key {k:?}"),
        }
    }
    let descr = descr.ok_or_else(|| Error::Format("NPY header: missing descr".into()))?;
    let fortran_order =
        fortran.ok_or_else(|| Error::Format("NPY header: missing fortran_order".into()))?;
    let shape = shape.ok_or_else(|| Error::Format("NPY header: missing shape".into()))?;
    let dtype = match descr.as_str() {
        "<f4" => NpyDtype::F32,
        "<f8" => NpyDtype::F64,
        other => bail!(UnsupportedDtype, "NPY dtype {other:?} (accepted: <f4, <f8)"),
    };
    Ok(NpyMeta {
        dtype,
        fortran_order,
        shape,
    })
}

/// Parses an NPY image into its metadata and values narrowed to f32.
pub fn decode_npy(bytes: &[u8]) -> Result<(NpyMeta, Vec<f32>)> {
    let mut cur = Cursor::new(bytes, "NPY");
    if cur.take(6)? != NPY_MAGIC {
        bail!(Format, "NPY: missing \\x93NUMPY magic");
    }
    let version = cur.take(2)?;
    if version != [1, 0] {
        bail!(Format, "NPY: only version 1.0 is supported, found {}.{}", version[0], version[1]);
    }
    let header_len = cur.u16()? as usize;
    let header = cur.take(header_len)?;
    let meta = parse_header_dict(header)?;
    if meta.fortran_order {
        bail!(UnsupportedLayout, "NPY: fortran_order arrays are not supported");
    }
    let count = checked_product(&meta.shape, "NPY")?;
    let width = meta.dtype.width();
    let nbytes = count
        .checked_mul(width)
        .ok_or_else(|| Error::Format("NPY: payload size overflows".into()))?;
    let raw = cur.take(nbytes)?;
    cur.finish()?;
    let values = match meta.dtype {
        NpyDtype::F32 => raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        NpyDtype::F64 => raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()) as f32)
            .collect(),
    };
    Ok((meta, values))
}

/// Writes a version 1.0 C-order NPY image. Values are stored with the
/// requested dtype.
pub fn encode_npy(shape: &[usize], values: &[f64], dtype: NpyDtype) -> Vec<u8> {
    let shape_txt = match shape.len() {
        1 => format!("({},)", shape[0]),
        _ => format!(
            "({})",
            shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        dtype.descr(),
        shape_txt
    );
    // Pad so the payload starts on a 64-byte boundary, newline-terminated.
    let unpadded = 10 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');
    let mut out = Vec::with_capacity(10 + header.len() + values.len() * dtype.width());
    out.extend_from_slice(NPY_MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for &v in values {
        match dtype {
            NpyDtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            NpyDtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    out
}

pub fn write_npy(path: &Path, shape: &[usize], values: &[f64], dtype: NpyDtype) -> Result<()> {
    write_file(path, &encode_npy(shape, values, dtype))
}

/// Builds a trial set from a (trials, channels, samples) data array and a
/// (trials, 4) label array.
pub fn trial_set_from_npy(
    data: &[u8],
    labels: &[u8],
    sample_rate_hz: f32,
) -> Result<TrialSet> {
    let (dmeta, dvals) = decode_npy(data)?;
    let (lmeta, lvals) = decode_npy(labels)?;
    if dmeta.shape.len() != 3 {
        bail!(Shape, "data array must have rank 3, found shape {:?}", dmeta.shape);
    }
    if lmeta.shape.len() != 2 || lmeta.shape[1] != N_LABEL_DIMS {
        bail!(Shape, "labels array must have shape (trials, 4), found {:?}", lmeta.shape);
    }
    if lmeta.shape[0] != dmeta.shape[0] {
        bail!(
            Shape,
            "data has {} trials but labels have {}",
            dmeta.shape[0],
            lmeta.shape[0]
        );
    }
    TrialSet::new(
        dmeta.shape[0],
        dmeta.shape[1],
        dmeta.shape[2],
        sample_rate_hz,
        dvals,
        lvals,
    )
}

pub fn read_npy_pair(data_path: &Path, labels_path: &Path, sample_rate_hz: f32) -> Result<TrialSet> {
    let data = read_file(data_path)?;
    let labels = read_file(labels_path)?;
    trial_set_from_npy(&data, &labels, sample_rate_hz)
}
