//! Weight container I/O.
//!
//! The on-disk format is the safetensors layout: an 8-byte little-endian
//! header length, a JSON header mapping tensor names to dtype/shape/offsets,
//! and a raw little-endian payload. Containers written here are always fp32;
//! fp16/bf16 payloads are upcast on load.

use std::collections::BTreeMap;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{
    FfnFamily, LayerWeights, ModelConfig, NormWeights, PositionFamily,
    TransformerWeights,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorInfo {
    pub dtype: String,
    pub shape: Vec<usize>,
    pub data_offsets: (u64, u64),
}

#[derive(Debug, Clone)]
pub struct ContainerHeader {
    pub tensors: BTreeMap<String, TensorInfo>,
    pub metadata: BTreeMap<String, String>,
}

/// Expected tensor names and shapes for a config, in schema order.
pub fn schema(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let d = config.d_model;
    let mut out = vec![
        ("embedding".to_string(), vec![config.vocab_size, d]),
        ("unembedding".to_string(), vec![config.vocab_size, d]),
        ("final_norm.scale".to_string(), vec![d]),
    ];
    if config.position_family == PositionFamily::LearnedAbsolute {
        out.push(("pos_embedding".to_string(), vec![config.context_limit, d]));
    }
    for i in 0..config.n_layers {
        for name in ["w_q", "w_k", "w_v", "w_o"] {
            out.push((format!("layers.{i}.attn.{name}"), vec![d, d]));
        }
        out.push((format!("layers.{i}.ffn.fc1"), vec![config.d_ffn, d]));
        if config.ffn_family == FfnFamily::Gated {
            out.push((format!("layers.{i}.ffn.gate"), vec![config.d_ffn, d]));
        }
        out.push((format!("layers.{i}.ffn.fc2"), vec![d, config.d_ffn]));
        out.push((format!("layers.{i}.norm1.scale"), vec![d]));
        out.push((format!("layers.{i}.norm2.scale"), vec![d]));
    }
    out
}

fn norm_bias_name(base: &str) -> String {
    base.replace(".scale", ".bias")
}

pub fn read_header(path: impl AsRef<Path>) -> Result<ContainerHeader> {
    let path = path.as_ref();
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes).map_err(|e| Error::io(path, e))?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes).map_err(|e| Error::io(path, e))?;
    parse_header(&header_bytes)
}

pub fn parse_header(bytes: &[u8]) -> Result<ContainerHeader> {
    let value: serde_json::Value = serde_json::from_slice(bytes)
        .map_err(|e| Error::Container(format!("header is not valid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Container("header is not a JSON object".into()))?;
    let mut tensors = BTreeMap::new();
    let mut metadata = BTreeMap::new();
    for (name, entry) in obj {
        if name == "__metadata__" {
            if let Some(map) = entry.as_object() {
                for (k, v) in map {
                    metadata.insert(k.clone(), v.as_str().unwrap_or_default().to_string());
                }
            }
            continue;
        }
        let info: TensorInfo = serde_json::from_value(entry.clone())
            .map_err(|e| Error::Container(format!("bad entry for tensor `{name}`: {e}")))?;
        tensors.insert(name.clone(), info);
    }
    Ok(ContainerHeader { tensors, metadata })
}

fn dtype_size(dtype: &str) -> Option<usize> {
    match dtype {
        "F32" => Some(4),
        "F16" | "BF16" => Some(2),
        _ => None,
    }
}

fn f16_to_f32(bits: u16) -> f32 {
    let sign = u32::from(bits >> 15) << 31;
    let exp = u32::from((bits >> 10) & 0x1f);
    let mant = u32::from(bits & 0x3ff);
    let out = if exp == 0 {
        if mant == 0 {
            sign
        } else {
            // subnormal: renormalize
            let mut exp = 127 - 15 + 1;
            let mut mant = mant;
            while mant & 0x400 == 0 {
                mant <<= 1;
                exp -= 1;
            }
            sign | ((exp as u32) << 23) | ((mant & 0x3ff) << 13)
        }
    } else if exp == 0x1f {
        sign | 0x7f80_0000 | (mant << 13)
    } else {
        sign | ((exp + 127 - 15) << 23) | (mant << 13)
    };
    f32::from_bits(out)
}

fn bf16_to_f32(bits: u16) -> f32 {
    f32::from_bits(u32::from(bits) << 16)
}

fn decode_f32(name: &str, dtype: &str, bytes: &[u8]) -> Result<Vec<f32>> {
    match dtype {
        "F32" => Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect()),
        "F16" => Ok(bytes
            .chunks_exact(2)
            .map(|c| f16_to_f32(u16::from_le_bytes([c[0], c[1]])))
            .collect()),
        "BF16" => Ok(bytes
            .chunks_exact(2)
            .map(|c| bf16_to_f32(u16::from_le_bytes([c[0], c[1]])))
            .collect()),
        other => Err(Error::UnsupportedDtype {
            name: name.to_string(),
            dtype: other.to_string(),
        }),
    }
}

struct TensorReader<R> {
    reader: R,
    header: ContainerHeader,
    payload_start: u64,
}

impl<R: Read + Seek> TensorReader<R> {
    fn fetch(&mut self, name: &str, expected_shape: &[usize]) -> Result<Vec<f32>> {
        let info = self
            .header
            .tensors
            .get(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))?
            .clone();
        if info.shape != expected_shape {
            return Err(Error::ShapeMismatch {
                name: name.to_string(),
                expected: expected_shape.to_vec(),
                actual: info.shape.clone(),
            });
        }
        let elem = dtype_size(&info.dtype).ok_or_else(|| Error::UnsupportedDtype {
            name: name.to_string(),
            dtype: info.dtype.clone(),
        })?;
        let count: usize = info.shape.iter().product();
        let (begin, end) = info.data_offsets;
        if end.saturating_sub(begin) as usize != count * elem {
            return Err(Error::Container(format!(
                "tensor `{name}` offsets cover {} bytes, expected {}",
                end.saturating_sub(begin),
                count * elem
            )));
        }
        self.reader
            .seek(SeekFrom::Start(self.payload_start + begin))
            .map_err(|e| Error::Container(format!("seek failed for `{name}`: {e}")))?;
        let mut bytes = vec![0u8; count * elem];
        self.reader
            .read_exact(&mut bytes)
            .map_err(|e| Error::Container(format!("short read for `{name}`: {e}")))?;
        decode_f32(name, &info.dtype, &bytes)
    }

    fn fetch_matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<Array2<f32>> {
        let data = self.fetch(name, &[rows, cols])?;
        Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::Container(format!("tensor `{name}`: {e}")))
    }

    fn fetch_vector(&mut self, name: &str, len: usize) -> Result<Array1<f32>> {
        Ok(Array1::from_vec(self.fetch(name, &[len])?))
    }

    fn fetch_optional_vector(&mut self, name: &str, len: usize) -> Result<Option<Array1<f32>>> {
        if self.header.tensors.contains_key(name) {
            Ok(Some(self.fetch_vector(name, len)?))
        } else {
            Ok(None)
        }
    }
}

/// Load and validate a weight container against a config.
pub fn load_weights(path: impl AsRef<Path>, config: &ModelConfig) -> Result<TransformerWeights> {
    let path = path.as_ref();
    config.validate()?;
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes).map_err(|e| Error::io(path, e))?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes).map_err(|e| Error::io(path, e))?;
    let header = parse_header(&header_bytes)?;
    validate_names(&header, config)?;
    let mut reader = TensorReader {
        reader: file,
        header,
        payload_start: 8 + header_len as u64,
    };

    let d = config.d_model;
    let embedding = reader.fetch_matrix("embedding", config.vocab_size, d)?;
    let unembedding = reader.fetch_matrix("unembedding", config.vocab_size, d)?;
    let pos_embedding = match config.position_family {
        PositionFamily::LearnedAbsolute => {
            Some(reader.fetch_matrix("pos_embedding", config.context_limit, d)?)
        }
        PositionFamily::Rotary => None,
    };
    let final_norm = NormWeights {
        scale: reader.fetch_vector("final_norm.scale", d)?,
        bias: reader.fetch_optional_vector("final_norm.bias", d)?,
    };
    let mut layers = Vec::with_capacity(config.n_layers);
    for i in 0..config.n_layers {
        let at = |n: &str| format!("layers.{i}.attn.{n}");
        layers.push(LayerWeights {
            w_q: reader.fetch_matrix(&at("w_q"), d, d)?,
            w_k: reader.fetch_matrix(&at("w_k"), d, d)?,
            w_v: reader.fetch_matrix(&at("w_v"), d, d)?,
            w_o: reader.fetch_matrix(&at("w_o"), d, d)?,
            fc1: reader.fetch_matrix(&format!("layers.{i}.ffn.fc1"), config.d_ffn, d)?,
            gate: match config.ffn_family {
                FfnFamily::Gated => Some(reader.fetch_matrix(
                    &format!("layers.{i}.ffn.gate"),
                    config.d_ffn,
                    d,
                )?),
                FfnFamily::SingleGate => None,
            },
            fc2: reader.fetch_matrix(&format!("layers.{i}.ffn.fc2"), d, config.d_ffn)?,
            norm1: NormWeights {
                scale: reader.fetch_vector(&format!("layers.{i}.norm1.scale"), d)?,
                bias: reader.fetch_optional_vector(&format!("layers.{i}.norm1.bias"), d)?,
            },
            norm2: NormWeights {
                scale: reader.fetch_vector(&format!("layers.{i}.norm2.scale"), d)?,
                bias: reader.fetch_optional_vector(&format!("layers.{i}.norm2.bias"), d)?,
            },
        });
    }
    Ok(TransformerWeights {
        config: config.clone(),
        embedding,
        pos_embedding,
        unembedding,
        final_norm,
        layers,
    })
}

/// Reject tensors outside the schema; catches config/container mismatches
/// before any shape check would.
fn validate_names(header: &ContainerHeader, config: &ModelConfig) -> Result<()> {
    let mut allowed: std::collections::BTreeSet<String> =
        schema(config).into_iter().map(|(n, _)| n).collect();
    let biased: Vec<String> = allowed
        .iter()
        .filter(|n| n.contains(".norm") || n.starts_with("final_norm"))
        .map(|n| norm_bias_name(n))
        .collect();
    allowed.extend(biased);
    for name in header.tensors.keys() {
        if !allowed.contains(name) {
            return Err(Error::Container(format!("unexpected tensor `{name}`")));
        }
    }
    Ok(())
}

/// Serialize weights into `out` in the container layout, fp32, with tensor
/// names sorted so the byte stream is reproducible.
pub fn write_container<W: Write>(weights: &TransformerWeights, out: &mut W) -> std::io::Result<()> {
    let mut tensors: BTreeMap<String, (Vec<usize>, Vec<f32>)> = BTreeMap::new();
    let put_mat = |tensors: &mut BTreeMap<String, (Vec<usize>, Vec<f32>)>,
                       name: String,
                       m: &Array2<f32>| {
        tensors.insert(
            name,
            (m.shape().to_vec(), m.iter().copied().collect::<Vec<f32>>()),
        );
    };
    let put_vec = |tensors: &mut BTreeMap<String, (Vec<usize>, Vec<f32>)>,
                   name: String,
                   v: &Array1<f32>| {
        tensors.insert(name, (vec![v.len()], v.to_vec()));
    };

    put_mat(&mut tensors, "embedding".into(), &weights.embedding);
    put_mat(&mut tensors, "unembedding".into(), &weights.unembedding);
    if let Some(pos) = &weights.pos_embedding {
        put_mat(&mut tensors, "pos_embedding".into(), pos);
    }
    put_vec(&mut tensors, "final_norm.scale".into(), &weights.final_norm.scale);
    if let Some(b) = &weights.final_norm.bias {
        put_vec(&mut tensors, "final_norm.bias".into(), b);
    }
    for (i, layer) in weights.layers.iter().enumerate() {
        put_mat(&mut tensors, format!("layers.{i}.attn.w_q"), &layer.w_q);
        put_mat(&mut tensors, format!("layers.{i}.attn.w_k"), &layer.w_k);
        put_mat(&mut tensors, format!("layers.{i}.attn.w_v"), &layer.w_v);
        put_mat(&mut tensors, format!("layers.{i}.attn.w_o"), &layer.w_o);
        put_mat(&mut tensors, format!("layers.{i}.ffn.fc1"), &layer.fc1);
        if let Some(g) = &layer.gate {
            put_mat(&mut tensors, format!("layers.{i}.ffn.gate"), g);
        }
        put_mat(&mut tensors, format!("layers.{i}.ffn.fc2"), &layer.fc2);
        put_vec(&mut tensors, format!("layers.{i}.norm1.scale"), &layer.norm1.scale);
        if let Some(b) = &layer.norm1.bias {
            put_vec(&mut tensors, format!("layers.{i}.norm1.bias"), b);
        }
        put_vec(&mut tensors, format!("layers.{i}.norm2.scale"), &layer.norm2.scale);
        if let Some(b) = &layer.norm2.bias {
            put_vec(&mut tensors, format!("layers.{i}.norm2.bias"), b);
        }
    }

    let mut offset = 0u64;
    let mut header = BTreeMap::new();
    for (name, (shape, data)) in &tensors {
        let nbytes = (data.len() * 4) as u64;
        header.insert(
            name.clone(),
            TensorInfo {
                dtype: "F32".to_string(),
                shape: shape.clone(),
                data_offsets: (offset, offset + nbytes),
            },
        );
        offset += nbytes;
    }
    let header_json = serde_json::to_vec(&header).expect("header serializes");
    out.write_all(&(header_json.len() as u64).to_le_bytes())?;
    out.write_all(&header_json)?;
    for (_, (_, data)) in &tensors {
        for v in data {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Write an edited or constructed model to disk.
pub fn export_weights(weights: &TransformerWeights, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = std::io::BufWriter::new(file);
    write_container(weights, &mut writer).map_err(|e| Error::io(path, e))?;
    writer
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .sync_all()
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hash_bytes(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::weights::random_model;
    use crate::model::{Activation, NeuronId, NormFamily};

    fn config() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            d_model: 8,
            n_heads: 2,
            d_head: 4,
            d_ffn: 6,
            vocab_size: 16,
            context_limit: 32,
            ffn_family: FfnFamily::SingleGate,
            norm_family: NormFamily::PreRmsnorm,
            position_family: PositionFamily::Rotary,
            activation: Some(Activation::Gelu),
            bos_token_id: 0,
            add_bos: true,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = config();
        let w = random_model(&cfg, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.safetensors");
        export_weights(&w, &path).unwrap();
        let back = load_weights(&path, &cfg).unwrap();
        assert_eq!(w.embedding, back.embedding);
        assert_eq!(w.unembedding, back.unembedding);
        for (a, b) in w.layers.iter().zip(back.layers.iter()) {
            assert_eq!(a.w_q, b.w_q);
            assert_eq!(a.w_o, b.w_o);
            assert_eq!(a.fc1, b.fc1);
            assert_eq!(a.fc2, b.fc2);
            assert_eq!(a.norm1.scale, b.norm1.scale);
        }
    }

    #[test]
    fn missing_tensor_is_named() {
        let cfg = config();
        let w = random_model(&cfg, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.safetensors");
        export_weights(&w, &path).unwrap();

        // Re-write the container without one tensor.
        let mut buf = Vec::new();
        write_container(&w, &mut buf).unwrap();
        let header_len = u64::from_le_bytes(buf[..8].try_into().unwrap()) as usize;
        let mut header: BTreeMap<String, TensorInfo> =
            serde_json::from_slice(&buf[8..8 + header_len]).unwrap();
        header.remove("layers.0.ffn.fc2").unwrap();
        let new_header = serde_json::to_vec(&header).unwrap();
        let mut mutated = Vec::new();
        mutated.extend_from_slice(&(new_header.len() as u64).to_le_bytes());
        mutated.extend_from_slice(&new_header);
        mutated.extend_from_slice(&buf[8 + header_len..]);
        std::fs::write(&path, &mutated).unwrap();

        let err = load_weights(&path, &cfg).unwrap_err();
        assert!(err.to_string().contains("layers.0.ffn.fc2"), "{err}");
    }

    #[test]
    fn shape_mismatch_is_named() {
        let cfg = config();
        let w = random_model(&cfg, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.safetensors");
        export_weights(&w, &path).unwrap();
        let mut other = cfg.clone();
        other.d_ffn = 7;
        let err = load_weights(&path, &other).unwrap_err();
        match err {
            Error::ShapeMismatch { name, .. } => assert!(name.contains("ffn.fc1")),
            other => panic!("expected shape mismatch, got {other}"),
        }
    }

    #[test]
    fn header_names_match_schema() {
        let cfg = config();
        let w = random_model(&cfg, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.safetensors");
        export_weights(&w, &path).unwrap();
        let header = read_header(&path).unwrap();
        let expected: std::collections::BTreeSet<String> =
            schema(&cfg).into_iter().map(|(n, _)| n).collect();
        let got: std::collections::BTreeSet<String> = header.tensors.keys().cloned().collect();
        assert_eq!(expected, got);
    }

    #[test]
    fn f16_and_bf16_payloads_upcast() {
        assert_eq!(f16_to_f32(0x3c00), 1.0);
        assert_eq!(f16_to_f32(0xc000), -2.0);
        assert_eq!(f16_to_f32(0x0000), 0.0);
        assert!(f16_to_f32(0x7c00).is_infinite());
        assert_eq!(bf16_to_f32(0x3f80), 1.0);
        assert_eq!(bf16_to_f32(0xbf00), -0.5);

        // A container holding an F16 tensor loads with values upcast.
        let cfg = config();
        let w = random_model(&cfg, 5).unwrap();
        let mut buf = Vec::new();
        write_container(&w, &mut buf).unwrap();
        let header_len = u64::from_le_bytes(buf[..8].try_into().unwrap()) as usize;
        let mut header: BTreeMap<String, TensorInfo> =
            serde_json::from_slice(&buf[8..8 + header_len]).unwrap();
        let payload = buf[8 + header_len..].to_vec();

        // Convert final_norm.scale (all ones) to F16 in place.
        let info = header.get_mut("final_norm.scale").unwrap();
        let (begin, end) = info.data_offsets;
        let snipped: Vec<u8> = payload[begin as usize..end as usize].to_vec();
        let halves: Vec<u8> = snipped
            .chunks_exact(4)
            .flat_map(|c| {
                let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                let bits: u16 = if v == 1.0 { 0x3c00 } else { 0 };
                bits.to_le_bytes()
            })
            .collect();
        // Rebuild payload with the shorter tensor at the end to keep other
        // offsets valid.
        let removed = end - begin;
        let mut new_payload: Vec<u8> = Vec::new();
        new_payload.extend_from_slice(&payload[..begin as usize]);
        new_payload.extend_from_slice(&payload[end as usize..]);
        let new_begin = new_payload.len() as u64;
        new_payload.extend_from_slice(&halves);
        info.dtype = "F16".into();
        info.data_offsets = (new_begin, new_begin + halves.len() as u64);
        for (name, other) in header.iter_mut() {
            if name != "final_norm.scale" && other.data_offsets.0 >= end {
                other.data_offsets.0 -= removed;
                other.data_offsets.1 -= removed;
            }
        }

        let new_header = serde_json::to_vec(&header).unwrap();
        let mut mutated = Vec::new();
        mutated.extend_from_slice(&(new_header.len() as u64).to_le_bytes());
        mutated.extend_from_slice(&new_header);
        mutated.extend_from_slice(&new_payload);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f16.safetensors");
        std::fs::write(&path, &mutated).unwrap();
        let back = load_weights(&path, &cfg).unwrap();
        assert_eq!(back.final_norm.scale, Array1::<f32>::ones(cfg.d_model));
    }

    #[test]
    fn unsupported_dtype_is_named() {
        let cfg = config();
        let w = random_model(&cfg, 6).unwrap();
        let mut buf = Vec::new();
        write_container(&w, &mut buf).unwrap();
        let header_len = u64::from_le_bytes(buf[..8].try_into().unwrap()) as usize;
        let mut header: BTreeMap<String, TensorInfo> =
            serde_json::from_slice(&buf[8..8 + header_len]).unwrap();
        header.get_mut("embedding").unwrap().dtype = "I8".into();
        let new_header = serde_json::to_vec(&header).unwrap();
        let mut mutated = Vec::new();
        mutated.extend_from_slice(&(new_header.len() as u64).to_le_bytes());
        mutated.extend_from_slice(&new_header);
        mutated.extend_from_slice(&buf[8 + header_len..]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.safetensors");
        std::fs::write(&path, &mutated).unwrap();
        match load_weights(&path, &cfg).unwrap_err() {
            Error::UnsupportedDtype { name, dtype } => {
                assert_eq!(name, "embedding");
                assert_eq!(dtype, "I8");
            }
            other => panic!("expected dtype error, got {other}"),
        }
    }

    /// Header-level validation of a container with GPT-2-small geometry:
    /// 12 layers, d_model 768, d_ffn 3072, vocab 50257, learned positions.
    #[test]
    fn gpt2_small_header_validates() {
        let cfg = ModelConfig {
            n_layers: 12,
            d_model: 768,
            n_heads: 12,
            d_head: 64,
            d_ffn: 3072,
            vocab_size: 50257,
            context_limit: 1024,
            ffn_family: FfnFamily::SingleGate,
            norm_family: NormFamily::PreLayernorm,
            position_family: PositionFamily::LearnedAbsolute,
            activation: Some(Activation::Gelu),
            bos_token_id: 50256,
            add_bos: false,
        };
        cfg.validate().unwrap();
        let expected = schema(&cfg);
        let mut offset = 0u64;
        let mut header = BTreeMap::new();
        for (name, shape) in &expected {
            let nbytes = (shape.iter().product::<usize>() * 4) as u64;
            header.insert(
                name.clone(),
                TensorInfo {
                    dtype: "F32".into(),
                    shape: shape.clone(),
                    data_offsets: (offset, offset + nbytes),
                },
            );
            offset += nbytes;
        }
        let bytes = serde_json::to_vec(&header).unwrap();
        let parsed = parse_header(&bytes).unwrap();
        validate_names(&parsed, &cfg).unwrap();
        assert_eq!(parsed.tensors.len(), expected.len());
        assert_eq!(parsed.tensors["layers.11.ffn.fc1"].shape, vec![3072, 768]);
        assert_eq!(parsed.tensors["embedding"].shape, vec![50257, 768]);
    }

    #[test]
    fn unexpected_tensor_is_rejected() {
        let cfg = config();
        let w = random_model(&cfg, 9).unwrap();
        let mut buf = Vec::new();
        write_container(&w, &mut buf).unwrap();
        let header_len = u64::from_le_bytes(buf[..8].try_into().unwrap()) as usize;
        let mut header: BTreeMap<String, TensorInfo> =
            serde_json::from_slice(&buf[8..8 + header_len]).unwrap();
        header.insert(
            "layers.0.ffn.mystery".into(),
            TensorInfo {
                dtype: "F32".into(),
                shape: vec![1],
                data_offsets: (0, 4),
            },
        );
        let new_header = serde_json::to_vec(&header).unwrap();
        let mut mutated = Vec::new();
        mutated.extend_from_slice(&(new_header.len() as u64).to_le_bytes());
        mutated.extend_from_slice(&new_header);
        mutated.extend_from_slice(&buf[8 + header_len..]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("extra.safetensors");
        std::fs::write(&path, &mutated).unwrap();
        let err = load_weights(&path, &cfg).unwrap_err();
        assert!(err.to_string().contains("mystery"));
    }

    #[test]
    fn content_hash_tracks_edits() {
        let cfg = config();
        let w = random_model(&cfg, 3).unwrap();
        let h1 = w.content_hash();
        assert_eq!(h1, w.content_hash());
        let edited =
            crate::editing::mask_neurons(&w, &[NeuronId::ffn(0, 1)]).unwrap();
        assert_ne!(h1, edited.content_hash());
    }
}
