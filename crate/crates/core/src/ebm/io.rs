//! Versioned binary container for model parameters.
//!
//! ```text
//! "LOPM" | version u32 | kind u8 | tensor count u32
//! dimension table: per tensor, name (u16 length + utf-8) | ndim u8 | dims u64…
//! tensor data:     per tensor, little-endian f64 values in row-major order
//! metadata:        u64 length | JSON document
//! ```
//! All integers are little-endian.

use std::collections::HashMap;

use super::params::{CrbmParams, FactorDims, FgcrbmParams, ModelKind, ModelParams, RbmParams, UnitDims};
use super::EbmError;

pub const MAGIC: &[u8; 4] = b"LOPM";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_container(params: &ModelParams, metadata: &serde_json::Value) -> Vec<u8> {
    let tensors = params.tensors();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(params.kind().code());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in &tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.ndim() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
    }
    for (_, t) in &tensors {
        for &v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let meta = serde_json::to_vec(metadata).expect("json values serialize");
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, section: &str) -> Result<&'a [u8], EbmError> {
        if self.bytes.len() - self.pos < n {
            return Err(EbmError::Truncated {
                section: section.to_string(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, section: &str) -> Result<u8, EbmError> {
        Ok(self.take(1, section)?[0])
    }

    fn u16(&mut self, section: &str) -> Result<u16, EbmError> {
        Ok(u16::from_le_bytes(self.take(2, section)?.try_into().unwrap()))
    }

    fn u32(&mut self, section: &str) -> Result<u32, EbmError> {
        Ok(u32::from_le_bytes(self.take(4, section)?.try_into().unwrap()))
    }

    fn u64(&mut self, section: &str) -> Result<u64, EbmError> {
        Ok(u64::from_le_bytes(self.take(8, section)?.try_into().unwrap()))
    }
}

fn skeleton(kind: ModelKind, shapes: &HashMap<String, Vec<usize>>) -> Result<ModelParams, EbmError> {
    let dim = |name: &str, axis: usize| -> Result<usize, EbmError> {
        shapes
            .get(name)
            .and_then(|s| s.get(axis).copied())
            .ok_or_else(|| EbmError::Corrupt(format!("dimension table lacks `{name}`")))
    };
    Ok(match kind {
        ModelKind::Rbm => ModelParams::Rbm(RbmParams::zeros(dim("weights", 0)?, dim("weights", 1)?)),
        ModelKind::Crbm => ModelParams::Crbm(CrbmParams::zeros(
            dim("weights", 0)?,
            dim("weights", 1)?,
            dim("context_visible", 0)?,
        )),
        ModelKind::Fgcrbm => ModelParams::Fgcrbm(FgcrbmParams::zeros(
            UnitDims {
                visible: dim("coupling.visible", 0)?,
                hidden: dim("coupling.hidden", 0)?,
                context: dim("visible_gate.context", 0)?,
                feature: dim("coupling.feature", 0)?,
            },
            FactorDims {
                coupling: dim("coupling.visible", 1)?,
                visible_gate: dim("visible_gate.unit", 1)?,
                hidden_gate: dim("hidden_gate.unit", 1)?,
            },
        )),
    })
}

pub fn read_container(bytes: &[u8]) -> Result<(ModelParams, serde_json::Value), EbmError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "header")? != MAGIC {
        return Err(EbmError::Corrupt("not a model file (bad magic)".into()));
    }
    let version = r.u32("header")?;
    if version != FORMAT_VERSION {
        return Err(EbmError::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let code = r.u8("header")?;
    let kind = ModelKind::from_code(code).ok_or_else(|| EbmError::Corrupt(format!("unknown model kind code {code}")))?;
    let count = r.u32("header")? as usize;

    let mut table = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let len = r.u16("dimension table")? as usize;
        let name = std::str::from_utf8(r.take(len, "dimension table")?)
            .map_err(|_| EbmError::Corrupt("tensor name is not utf-8".into()))?
            .to_string();
        let ndim = r.u8("dimension table")? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u64("dimension table")? as usize);
        }
        table.push((name, shape));
    }
    let shapes: HashMap<String, Vec<usize>> = table.iter().cloned().collect();
    let mut params = skeleton(kind, &shapes)?;

    {
        let mut slots = params.tensors_mut();
        if slots.len() != table.len() {
            return Err(EbmError::Corrupt(format!(
                "{} tensors for a {kind} model, expected {}",
                table.len(),
                slots.len()
            )));
        }
        for ((name, shape), (want_name, slot)) in table.iter().zip(slots.iter_mut()) {
            if name != want_name || shape.as_slice() != slot.shape() {
                return Err(EbmError::Corrupt(format!(
                    "tensor `{name}` {shape:?} does not fit slot `{want_name}` {:?}",
                    slot.shape()
                )));
            }
            let section = format!("tensor data `{name}`");
            let raw = r.take(slot.len() * 8, &section)?;
            for (dst, chunk) in slot.iter_mut().zip(raw.chunks_exact(8)) {
                *dst = f64::from_le_bytes(chunk.try_into().unwrap());
            }
        }
    }

    let len = r.u64("metadata")? as usize;
    let meta = r.take(len, "metadata")?;
    let metadata = serde_json::from_slice(meta).map_err(|e| EbmError::Corrupt(format!("metadata: {e}")))?;
    if r.pos != bytes.len() {
        return Err(EbmError::Corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    params.validate()?;
    Ok((params, metadata))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use serde_json::json;

    fn fgcrbm() -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let dims = UnitDims { visible: 5, hidden: 4, context: 6, feature: 3 };
        let factors = FactorDims { coupling: 2, visible_gate: 3, hidden_gate: 4 };
        let mut p = FgcrbmParams::random(dims, factors, 1.0, &mut rng);
        p.visible_bias.fill(-0.125);
        ModelParams::Fgcrbm(p)
    }

    #[test]
    fn round_trip_is_bitwise() {
        let p = fgcrbm();
        let meta = json!({"horizon": 4, "quantization": 8});
        let bytes = write_container(&p, &meta);
        let (back, back_meta) = read_container(&bytes).unwrap();
        assert_eq!(back_meta, meta);
        for ((_, a), (_, b)) in p.tensors().iter().zip(back.tensors().iter()) {
            assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(back, p);
    }

    #[test]
    fn truncation_names_the_section() {
        let bytes = write_container(&fgcrbm(), &json!({}));
        let err = read_container(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(&err, EbmError::Truncated { section } if section == "metadata"), "{err}");
        let err = read_container(&bytes[..bytes.len() - 40]).unwrap_err();
        assert!(matches!(&err, EbmError::Truncated { section } if section.starts_with("tensor data")), "{err}");
        let err = read_container(&bytes[..10]).unwrap_err();
        assert!(matches!(&err, EbmError::Truncated { section } if section == "header"), "{err}");
    }

    #[test]
    fn version_mismatch_is_reported() {
        let mut bytes = write_container(&fgcrbm(), &json!({}));
        bytes[4] = 9;
        assert!(matches!(read_container(&bytes), Err(EbmError::Version { found: 9, .. })));
        bytes[0] = b'X';
        assert!(matches!(read_container(&bytes), Err(EbmError::Corrupt(_))));
    }
}
