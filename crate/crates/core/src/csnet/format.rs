//! CSNT model files.
//!
//! ```text
//! "CSNT" | u32 version = 1 | u32 B | u32 n_B | u32 m | u32 d | u32 f
//! f32 tensors in parameter order, row-major, no per-tensor headers
//! ```
//!
//! All integers and floats are little-endian. The sampling ratio is
//! recovered as `n_B / B^2`; the seed and `final_relu` are not stored.

use std::io::{Read, Write};
use std::path::Path;

use super::{CsNetConfig, CsNetModel, DeepLayer};
use crate::error::{Error, Result};
use crate::netcore::{Real, Tensor};

const MAGIC: &[u8; 4] = b"CSNT";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 28;

pub fn write_csnt<T: Real>(model: &CsNetModel<T>, mut out: impl Write) -> std::io::Result<()> {
    let cfg = model.config();
    out.write_all(MAGIC)?;
    for v in [
        VERSION as usize,
        cfg.block_size,
        model.measurements(),
        cfg.deep_depth,
        cfg.deep_width,
        cfg.deep_filter,
    ] {
        out.write_all(&(v as u32).to_le_bytes())?;
    }
    for t in model.parameters() {
        for &v in t.data() {
            out.write_all(&(v.f64() as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Parses a CSNT stream; `name` labels format errors.
pub fn read_csnt<T: Real>(mut input: impl Read, name: &str) -> Result<CsNetModel<T>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| Error::io(name, e))?;
    let bad = |msg: String| Error::format(name, msg);
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("header: file is {} bytes, need {HEADER_LEN}", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("magic: expected \"CSNT\"".into()));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize;
    if word(0) != VERSION as usize {
        return Err(bad(format!("version: unsupported value {}", word(0))));
    }
    let (b, nb, m, d, f) = (word(1), word(2), word(3), word(4), word(5));
    if b < 2 {
        return Err(bad(format!("B: {b} is below 2")));
    }
    if nb == 0 || nb > b * b {
        return Err(bad(format!("n_B: {nb} is outside 1..={} for B = {b}", b * b)));
    }
    if m == 0 {
        return Err(bad("m: need at least one layer".into()));
    }
    if d == 0 {
        return Err(bad("d: need at least one filter".into()));
    }
    if f % 2 == 0 {
        return Err(bad(format!("f: {f} is not odd")));
    }
    let config = CsNetConfig {
        block_size: b,
        sampling_ratio: nb as f64 / (b * b) as f64,
        deep_depth: m,
        deep_width: d,
        deep_filter: f,
        final_relu: false,
        seed: 0,
    };
    if config.measurements() != nb {
        return Err(bad(format!("n_B: {nb} is inconsistent with its own ratio")));
    }

    // shapes follow from the header alone
    let shell = CsNetModel::<T>::from_parts(
        config.clone(),
        Tensor::zeros(&[b, b, 1, nb]),
        Tensor::zeros(&[1, 1, nb, b * b]),
        (0..m)
            .map(|k| {
                let cin = if k == 0 { 1 } else { d };
                let cout = if k + 1 == m { 1 } else { d };
                DeepLayer {
                    filters: Tensor::zeros(&[f, f, cin, cout]),
                    bias: Tensor::zeros(&[cout]),
                }
            })
            .collect(),
    )
    .map_err(|e| bad(format!("header: {e}")))?;
    let shapes = shell.parameter_shapes();
    let floats: usize = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    let expected = HEADER_LEN + 4 * floats;
    if bytes.len() != expected {
        return Err(bad(format!(
            "tensors: expected {} bytes of weights, found {}",
            expected - HEADER_LEN,
            bytes.len() - HEADER_LEN
        )));
    }
    let mut values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| T::of(f32::from_le_bytes(c.try_into().unwrap()) as f64));
    let mut tensors = shapes.iter().map(|shape| {
        let n = shape.iter().product();
        Tensor::new(shape, values.by_ref().take(n).collect()).expect("length checked")
    });
    let sampling = tensors.next().unwrap();
    let init = tensors.next().unwrap();
    let mut deep = Vec::with_capacity(m);
    while let (Some(filters), Some(bias)) = (tensors.next(), tensors.next()) {
        deep.push(DeepLayer { filters, bias });
    }
    CsNetModel::from_parts(config, sampling, init, deep)
}

pub fn save_model<T: Real>(model: &CsNetModel<T>, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csnt(model, &mut buf).expect("writing to memory");
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Real>(path: &Path) -> Result<CsNetModel<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csnt(std::io::BufReader::new(file), &path.display().to_string())
}
