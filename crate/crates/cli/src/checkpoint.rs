//! Binary ensemble checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "SBOLABCK"
//! version      u32
//! n_max        u64
//! samples      u64
//! seed         u64
//! alpha beta gamma kappa cutoff tail_level s1 s2   8 x f64
//! config_len   u64, then config_len bytes of UTF-8 config text
//! hash         u64      FNV-1a of every other byte of the file, in order
//! payload      per sample: u (Re, Im) for n = -N..N, v (Re, Im) for n = -N..N, log_weight
//! ```

use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;

use num_complex::Complex64;

use sbo_core::gibbs::{GibbsConfig, WeightedEnsemble, WeightedSample};
use sbo_core::{RealSpectralField, SBOParams, SpectralField, SpectralPair};

use crate::error::{CheckpointError, CliError};

pub const MAGIC: &[u8; 8] = b"SBOLABCK";
pub const FORMAT_VERSION: u32 = 1;

/// Relative slack on the L² cutoff, covering the rounding of `|a_0|²`.
const CUTOFF_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub ensemble: WeightedEnsemble,
    pub config: String,
}

/// FNV-1a over the header (without the hash field) followed by the payload.
pub fn content_hash(head: &[u8], payload: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(head);
    h.write(payload);
    h.finish()
}

fn put_f64(out: &mut Vec<u8>, x: f64) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, x: u64) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_field(out: &mut Vec<u8>, f: &SpectralField) {
    for c in f.coeffs() {
        put_f64(out, c.re);
        put_f64(out, c.im);
    }
}

pub fn encode(ensemble: &WeightedEnsemble, config: &str) -> Vec<u8> {
    let c = &ensemble.config;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_u64(&mut out, c.n_max as u64);
    put_u64(&mut out, ensemble.samples.len() as u64);
    put_u64(&mut out, c.seed);
    let p = &c.params;
    for x in [p.alpha, p.beta, p.gamma, p.kappa, c.cutoff, c.tail_level, c.s1, c.s2] {
        put_f64(&mut out, x);
    }
    put_u64(&mut out, config.len() as u64);
    out.extend_from_slice(config.as_bytes());
    let hash_at = out.len();
    put_u64(&mut out, 0);
    let body_at = out.len();
    for s in &ensemble.samples {
        put_field(&mut out, &s.state.u);
        put_field(&mut out, s.state.v.as_field());
        put_f64(&mut out, s.log_weight);
    }
    let h = content_hash(&out[..hash_at], &out[body_at..]);
    out[hash_at..body_at].copy_from_slice(&h.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.bytes.len() - self.pos < n {
            return Err(CheckpointError::Truncated {
                expected: (self.pos + n) as u64,
                found: self.bytes.len() as u64,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn field(&mut self, n_max: usize) -> Result<Vec<Complex64>, CheckpointError> {
        (0..2 * n_max + 1)
            .map(|_| Ok(Complex64::new(self.f64()?, self.f64()?)))
            .collect()
    }
}

fn header(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Header(msg.into())
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let n_max = r.u64()?;
    let samples = r.u64()?;
    let seed = r.u64()?;
    let mut f = [0.0; 8];
    for x in &mut f {
        *x = r.f64()?;
    }
    let [alpha, beta, gamma, kappa, cutoff, tail_level, s1, s2] = f;
    let config_len = r.u64()?;
    if n_max == 0 || n_max > 1 << 20 || config_len > 1 << 24 {
        return Err(header(format!("implausible sizes n_max {n_max}, config {config_len}")));
    }
    let config = String::from_utf8(r.take(config_len as usize)?.to_vec())
        .map_err(|_| header("config is not UTF-8"))?;
    let hash_at = r.pos;
    let stored = r.u64()?;
    let n_max = n_max as usize;
    let per_sample = (2 * (2 * n_max + 1) * 2 + 1) * 8;
    let expected = r.pos as u64 + samples.saturating_mul(per_sample as u64);
    if bytes.len() as u64 != expected {
        return Err(CheckpointError::Truncated {
            expected,
            found: bytes.len() as u64,
        });
    }
    let computed = content_hash(&bytes[..hash_at], &bytes[r.pos..]);
    if computed != stored {
        return Err(CheckpointError::HashMismatch { stored, computed });
    }

    let params = SBOParams::new(alpha, beta, gamma).map_err(|e| header(e.to_string()))?;
    if params.kappa.to_bits() != kappa.to_bits() {
        return Err(header(format!("kappa {kappa} does not match the couplings")));
    }
    let gibbs = GibbsConfig {
        n_max,
        cutoff,
        tail_level,
        s1,
        s2,
        ensemble_size: samples as usize,
        seed,
        params,
    };
    gibbs.validate().map_err(|e| header(e.to_string()))?;

    let b2 = cutoff * cutoff;
    let mut out = Vec::with_capacity(samples as usize);
    for i in 0..samples as usize {
        let invariant = |reason: String| CheckpointError::Invariant { sample: i, reason };
        let u = SpectralField::from_coeffs(n_max, r.field(n_max)?).map_err(|e| invariant(e.to_string()))?;
        let v = SpectralField::from_coeffs(n_max, r.field(n_max)?).map_err(|e| invariant(e.to_string()))?;
        let v = RealSpectralField::from_field(v).map_err(|e| invariant(e.to_string()))?;
        let log_weight = r.f64()?;
        if log_weight.is_nan() || log_weight == f64::INFINITY {
            return Err(invariant(format!("log weight {log_weight}")));
        }
        let l2: f64 = u.coeffs().iter().map(|z| z.norm_sqr()).sum();
        if l2 > b2 * (1.0 + CUTOFF_SLACK) {
            return Err(invariant(format!("L2 mass {l2} exceeds B^2 = {b2}")));
        }
        if v.coeff(0).re.abs() > cutoff {
            return Err(invariant(format!("mean of v {} exceeds B = {cutoff}", v.coeff(0).re)));
        }
        let state = SpectralPair::new(u, v).map_err(|e| invariant(e.to_string()))?;
        out.push(WeightedSample { state, log_weight });
    }
    Ok(Checkpoint {
        ensemble: WeightedEnsemble {
            samples: out,
            config: gibbs,
        },
        config,
    })
}

pub fn save_checkpoint(ensemble: &WeightedEnsemble, config: &str, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, encode(ensemble, config)).map_err(|e| CliError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|source| CliError::Checkpoint {
        path: path.to_path_buf(),
        source,
    })
}
