//! Fitted-model artifact.
//!
//! Layout: the magic bytes `GPCERT1\n`, a little-endian `u32` header length,
//! a JSON header, then little-endian `f64` blocks holding the inputs
//! (row-major `N × m`), the targets (`N × n`), the lower triangle of the
//! Cholesky factor (row by row) and the weight vectors (`n × N`).

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gp::{Dataset, TrainedGP};
use crate::kernels::KernelSpec;

const MAGIC: &[u8; 8] = b"GPCERT1\n";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelHeader {
    pub kernel: KernelSpec,
    pub jitter: f64,
    pub prior_mean: Vec<f64>,
    pub n_train: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    /// SHA-256 of the training data.
    pub fingerprint: String,
    #[serde(with = "crate::float_serde")]
    pub log_marginal_likelihood: f64,
    /// SHA-256 of the binary block.
    pub checksum: String,
}

impl ModelHeader {
    pub fn describe(gp: &TrainedGP) -> Result<ModelHeader> {
        let data = gp
            .dataset()
            .ok_or_else(|| Error::input("a model without training data has nothing to store"))?;
        Ok(ModelHeader {
            kernel: gp.spec().clone(),
            jitter: gp.jitter(),
            prior_mean: gp.prior_mean().to_vec(),
            n_train: gp.num_train(),
            input_dim: gp.input_dim(),
            output_dim: gp.output_dim(),
            fingerprint: data.fingerprint(),
            log_marginal_likelihood: gp.log_marginal_likelihood(),
            checksum: hex::encode(Sha256::digest(payload(gp))),
        })
    }
}

fn payload(gp: &TrainedGP) -> Vec<u8> {
    let n = gp.num_train();
    let mut out = Vec::with_capacity(8 * n * (n + 4));
    let mut put = |v: f64| out.extend_from_slice(&v.to_le_bytes());
    gp.inputs().iter().flatten().for_each(|v| put(*v));
    gp.targets().iter().flatten().for_each(|v| put(*v));
    let l = gp.cholesky_factor();
    for i in 0..n {
        for j in 0..=i {
            put(l[(i, j)]);
        }
    }
    for w in gp.all_weights() {
        w.iter().for_each(|v| put(*v));
    }
    out
}

pub fn encode_model(gp: &TrainedGP) -> Result<Vec<u8>> {
    let header = ModelHeader::describe(gp)?;
    let json = serde_json::to_vec(&header).map_err(|e| Error::Parse(e.to_string()))?;
    let len = u32::try_from(json.len()).map_err(|_| Error::input("model header too large"))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload(gp));
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<(TrainedGP, ModelHeader)> {
    let bad = |why: &str| Error::Parse(format!("model artifact: {why}"));
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic bytes"));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().expect("four bytes")) as usize;
    let body = bytes.get(12..12 + len).ok_or_else(|| bad("truncated header"))?;
    let header: ModelHeader = serde_json::from_slice(body).map_err(|e| bad(&e.to_string()))?;
    let (n, m, k) = (header.n_train, header.input_dim, header.output_dim);
    let count = n * m + n * k + n * (n + 1) / 2 + k * n;
    let block = &bytes[12 + len..];
    if block.len() != 8 * count {
        return Err(bad(&format!("expected {count} values, found {} bytes", block.len())));
    }
    if hex::encode(Sha256::digest(block)) != header.checksum {
        return Err(bad("checksum mismatch"));
    }
    let mut values = block
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")));
    let mut take = |count: usize| -> Vec<f64> { values.by_ref().take(count).collect() };
    let inputs: Vec<Vec<f64>> = take(n * m).chunks(m.max(1)).map(<[f64]>::to_vec).collect();
    let targets: Vec<Vec<f64>> = take(n * k).chunks(k.max(1)).map(<[f64]>::to_vec).collect();
    let packed = take(n * (n + 1) / 2);
    let mut chol = DMatrix::zeros(n, n);
    let mut it = packed.into_iter();
    for i in 0..n {
        for j in 0..=i {
            chol[(i, j)] = it.next().expect("counted");
        }
    }
    let weights: Vec<DVector<f64>> = (0..k).map(|_| DVector::from_vec(take(n))).collect();
    let data = Dataset::new(inputs, targets)?;
    if data.fingerprint() != header.fingerprint {
        return Err(bad("training data does not match the stored fingerprint"));
    }
    let gp = TrainedGP::from_parts(
        header.kernel.clone(),
        &data,
        header.jitter,
        header.prior_mean.clone(),
        chol,
        weights,
    )?;
    Ok((gp, header))
}

pub fn write_model(path: &Path, gp: &TrainedGP) -> Result<ModelHeader> {
    let bytes = encode_model(gp)?;
    std::fs::write(path, bytes).map_err(Error::io(path))?;
    ModelHeader::describe(gp)
}

pub fn read_model(path: &Path) -> Result<(TrainedGP, ModelHeader)> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    decode_model(&bytes)
}
