//! On-disk formats. All integers little-endian.
//!
//! Artifact container (48-byte header, then payload):
//!
//! ```text
//! offset  size  field
//!      0     4  magic "OTPN"
//!      4     2  format version (u16) = 1
//!      6     1  kind: 1 weights, 2 dataset spec, 3 config, 4 metrics
//!      7     1  reserved, 0
//!      8     8  payload length (u64)
//!     16    32  SHA-256 of the payload
//!     48     …  payload
//! ```
//!
//! Weights payload: `u32` spec-JSON length, the network spec as JSON, `u64`
//! value count, then every stored number (see `Network::state_vec`) as `f32`.
//! Dataset specs and configs carry a JSON payload. Metric tables are plain
//! CSV whose first line is `#schema=<name>/v<k>`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{Network, NetworkSpec};

pub const MAGIC: [u8; 4] = *b"OTPN";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    Weights = 1,
    DatasetSpec = 2,
    Config = 3,
    Metrics = 4,
}

impl ArtifactKind {
    fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            1 => ArtifactKind::Weights,
            2 => ArtifactKind::DatasetSpec,
            3 => ArtifactKind::Config,
            4 => ArtifactKind::Metrics,
            t => return Err(Error::Format(format!("unknown artifact kind tag {t}"))),
        })
    }
}

pub fn encode_artifact(kind: ArtifactKind, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend(MAGIC);
    out.extend(FORMAT_VERSION.to_le_bytes());
    out.push(kind as u8);
    out.push(0);
    out.extend((payload.len() as u64).to_le_bytes());
    out.extend(Sha256::digest(payload));
    out.extend(payload);
    out
}

/// Validates the header and checksum and returns the payload.
pub fn decode_artifact(bytes: &[u8], expected: ArtifactKind) -> Result<&[u8]> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion { found: version, supported: FORMAT_VERSION });
    }
    let kind = ArtifactKind::from_tag(bytes[6])?;
    if kind != expected {
        return Err(Error::Format(format!("expected a {expected:?} artifact, found {kind:?}")));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != len {
        return Err(Error::Format(format!("payload is {} bytes, header says {len}", payload.len())));
    }
    if Sha256::digest(payload)[..] != bytes[16..48] {
        return Err(Error::Checksum(format!("{kind:?} payload")));
    }
    Ok(payload)
}

/// Temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn encode_weights(net: &Network) -> Result<Vec<u8>> {
    let spec = serde_json::to_vec(net.spec()).map_err(|e| Error::Format(e.to_string()))?;
    let state = net.state_vec();
    let mut out = Vec::with_capacity(12 + spec.len() + 4 * state.len());
    out.extend(u32::try_from(spec.len()).map_err(|_| Error::Format("spec too large".into()))?.to_le_bytes());
    out.extend(&spec);
    out.extend((state.len() as u64).to_le_bytes());
    for v in state {
        out.extend((v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_weights(payload: &[u8]) -> Result<Network> {
    let short = || Error::Format("truncated weights payload".into());
    let spec_len = u32::from_le_bytes(payload.get(..4).ok_or_else(short)?.try_into().expect("4 bytes")) as usize;
    let spec_bytes = payload.get(4..4 + spec_len).ok_or_else(short)?;
    let spec: NetworkSpec = serde_json::from_slice(spec_bytes).map_err(|e| Error::Format(e.to_string()))?;
    let rest = &payload[4 + spec_len..];
    let count = u64::from_le_bytes(rest.get(..8).ok_or_else(short)?.try_into().expect("8 bytes")) as usize;
    let values = &rest[8..];
    if values.len() != 4 * count {
        return Err(Error::Format(format!("{} value bytes for {count} values", values.len())));
    }
    let state: Vec<f64> = values
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let mut net = Network::new(spec, 0)?;
    net.load_state_vec(&state)?;
    Ok(net)
}

pub fn save_network(path: &Path, net: &Network) -> Result<()> {
    write_atomic(path, &encode_artifact(ArtifactKind::Weights, &encode_weights(net)?))
}

pub fn load_network(path: &Path) -> Result<Network> {
    decode_weights(decode_artifact(&read(path)?, ArtifactKind::Weights)?)
}

/// JSON payload inside an artifact container (dataset specs, configs).
pub fn save_json<T: Serialize>(path: &Path, kind: ArtifactKind, value: &T) -> Result<()> {
    let payload = serde_json::to_vec_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(path, &encode_artifact(kind, &payload))
}

pub fn load_json<T: DeserializeOwned>(path: &Path, kind: ArtifactKind) -> Result<T> {
    let bytes = read(path)?;
    serde_json::from_slice(decode_artifact(&bytes, kind)?).map_err(|e| Error::Format(e.to_string()))
}

pub fn encode_csv<T: Serialize>(schema: &str, rows: &[T]) -> Result<Vec<u8>> {
    let mut out = format!("#schema={schema}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        for r in rows {
            w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))?;
    }
    Ok(out)
}

/// Parses a table written by [`encode_csv`], checking the schema line.
pub fn decode_csv<T: DeserializeOwned>(schema: &str, bytes: &[u8]) -> Result<Vec<T>> {
    let want = format!("#schema={schema}");
    let first = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    if first != want.as_bytes() {
        return Err(Error::Format(format!(
            "expected schema line {want:?}, found {:?}",
            String::from_utf8_lossy(first)
        )));
    }
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(bytes)
        .deserialize()
        .map(|r| r.map_err(|e| Error::Format(e.to_string())))
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, schema: &str, rows: &[T]) -> Result<()> {
    write_atomic(path, &encode_csv(schema, rows)?)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>> {
    decode_csv(schema, &read(path)?)
}

/// Hex SHA-256 of a file, for reproducibility checks.
pub fn file_digest(path: &Path) -> Result<String> {
    Ok(Sha256::digest(read(path)?).iter().map(|b| format!("{b:02x}")).collect())
}
