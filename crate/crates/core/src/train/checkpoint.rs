//! EMOC: trained-model checkpoints.
//!
//! Little-endian layout:
//!
//! | size | field                                          |
//! |------|------------------------------------------------|
//! | 4    | magic `"EMOC"`                                 |
//! | 2    | version (u16) = 1                              |
//! | 2    | flags (u16): bit 0 optimizer state present     |
//! | 4    | config text length `L` (u32)                   |
//! | L    | config text, UTF-8 `key = value` lines         |
//! | 4    | parameter count `P` (u32)                      |
//! | 4P   | parameters, f32, canonical block order         |
//!
//! With flag bit 0 the optimizer follows: step `t` (u64), then the first
//! and second moments as `P` f32 each. The config text carries the model
//! shape, which must reproduce `P`.

use std::path::Path;

use crate::binio::{put_f32s, read_file, write_file, Cursor};
use crate::config::{join_list, parse_list, IniDoc};
use crate::data_model::LabelDim;
use crate::error::{bail, Error, Result};
use crate::net::params::{ModelConfig, ModelParams};
use crate::train::adam::{AdamHyper, AdamState};

pub const EMOC_MAGIC: &[u8; 4] = b"EMOC";
pub const EMOC_VERSION: u16 = 1;
const FLAG_ADAM: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub label_dim: LabelDim,
    /// Epoch the parameters were taken from (0 = untrained).
    pub epoch: usize,
    /// Test accuracy recorded when the checkpoint was taken.
    pub test_accuracy: f64,
    pub adam: Option<AdamState<f32>>,
}

fn config_text(ck: &Checkpoint) -> String {
    let c = &ck.params.config;
    let mut lines = vec![
        format!("seq_len = {}", c.seq_len),
        format!("input_dim = {}", c.input_dim),
        format!("bi_units = {}", c.bi_units),
        format!("lstm_units = {}", join_list(&c.lstm_units)),
        format!("dropout = {}", join_list(&c.dropout)),
        format!("dense_units = {}", join_list(&c.dense_units)),
        format!("n_classes = {}", c.n_classes),
        format!("label_dim = {}", ck.label_dim),
        format!("epoch = {}", ck.epoch),
        format!("test_accuracy = {}", ck.test_accuracy),
    ];
    if let Some(a) = &ck.adam {
        let h = a.hyper;
        lines.push(format!("lr = {}", h.lr));
        lines.push(format!("beta1 = {}", h.beta1));
        lines.push(format!("beta2 = {}", h.beta2));
        lines.push(format!("eps = {}", h.eps));
    }
    lines.join("\n") + "\n"
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Result<Vec<u8>> {
    let text = config_text(ck);
    let n = ck.params.len();
    let n32 = u32::try_from(n).map_err(|_| Error::InvalidArg(format!("{n} parameters exceed u32")))?;
    let mut out = Vec::with_capacity(16 + text.len() + n * 12);
    out.extend_from_slice(EMOC_MAGIC);
    out.extend_from_slice(&EMOC_VERSION.to_le_bytes());
    let flags = if ck.adam.is_some() { FLAG_ADAM } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&n32.to_le_bytes());
    put_f32s(&mut out, &ck.params.values);
    if let Some(a) = &ck.adam {
        if a.m.len() != n || a.v.len() != n {
            bail!(Shape, "optimizer moments do not match {n} parameters");
        }
        out.extend_from_slice(&a.t.to_le_bytes());
        put_f32s(&mut out, &a.m);
        put_f32s(&mut out, &a.v);
    }
    Ok(out)
}

struct Parsed {
    model: ModelConfig,
    label_dim: LabelDim,
    epoch: usize,
    test_accuracy: f64,
    hyper: Option<AdamHyper>,
}

fn parse_config(text: &str) -> Result<Parsed> {
    let doc = IniDoc::parse(text)?;
    let mut model = ModelConfig::default();
    let mut label_dim = None;
    let mut epoch = 0;
    let mut test_accuracy = f64::NAN;
    let mut hyper = AdamHyper::default();
    let mut adam_keys = 0;
    for (k, v) in doc.entries() {
        match k {
            "seq_len" => model.seq_len = doc.parse_value(k, v)?,
            "input_dim" => model.input_dim = doc.parse_value(k, v)?,
            "bi_units" => model.bi_units = doc.parse_value(k, v)?,
            "lstm_units" => model.lstm_units = parse_list(k, v)?,
            "dropout" => model.dropout = parse_list(k, v)?,
            "dense_units" => model.dense_units = parse_list(k, v)?,
            "n_classes" => model.n_classes = doc.parse_value(k, v)?,
            "label_dim" => label_dim = Some(doc.parse_value(k, v)?),
            "epoch" => epoch = doc.parse_value(k, v)?,
            "test_accuracy" => test_accuracy = doc.parse_value(k, v)?,
            "lr" | "beta1" | "beta2" | "eps" => {
                let x: f64 = doc.parse_value(k, v)?;
                match k {
                    "lr" => hyper.lr = x,
                    "beta1" => hyper.beta1 = x,
                    "beta2" => hyper.beta2 = x,
                    _ => hyper.eps = x,
                }
                adam_keys += 1;
            }
            other => bail!(Format, "unknown key {other:?}"),
        }
    }
    model.validate()?;
    let label_dim = label_dim.ok_or_else(|| Error::Format("missing label_dim".into()))?;
    Ok(Parsed {
        model,
        label_dim,
        epoch,
        test_accuracy,
        hyper: (adam_keys == 4).then_some(hyper),
    })
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut cur = Cursor::new(bytes, "EMOC");
    if cur.take(4)? != EMOC_MAGIC {
        bail!(Format, "EMOC: bad magic");
    }
    let version = cur.u16()?;
    if version != EMOC_VERSION {
        bail!(Format, "EMOC: unsupported version {version}");
    }
    let flags = cur.u16()?;
    if flags & !FLAG_ADAM != 0 {
        bail!(Format, "EMOC: unknown flags {flags:#06x}");
    }
    let text_len = cur.u32()? as usize;
    let text = std::str::from_utf8(cur.take(text_len)?).map_err(|_| Error::Format("EMOC: config text is not UTF-8".into()))?;
    let parsed = parse_config(text).map_err(|e| Error::Format(format!("EMOC config: {e}")))?;
    let n = cur.u32()? as usize;
    let expected = parsed.model.param_count();
    if n != expected {
        bail!(Format, "EMOC: {n} parameters stored, config implies {expected}");
    }
    let values = cur.f32_vec(n)?;
    let adam = if flags & FLAG_ADAM != 0 {
        let hyper = parsed
            .hyper
            .ok_or_else(|| Error::Format("EMOC: optimizer state without lr/beta1/beta2/eps".into()))?;
        let t = cur.u64()?;
        let m = cur.f32_vec(n)?;
        let v = cur.f32_vec(n)?;
        Some(AdamState { hyper, t, m, v })
    } else {
        None
    };
    cur.finish()?;
    Ok(Checkpoint {
        params: ModelParams::from_values(&parsed.model, values)?,
        label_dim: parsed.label_dim,
        epoch: parsed.epoch,
        test_accuracy: parsed.test_accuracy,
        adam,
    })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    write_file(path, &encode_checkpoint(ck)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&read_file(path)?)
}
