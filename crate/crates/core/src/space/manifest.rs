//! Versioned JSON manifest of a space and the binary eigendata sidecar.
//!
//! Sidecar layout (little endian): magic `GFLEIG01`, u32 block count, then per
//! block u64 n, n eigenvalues, n·n column-major eigenvectors, n values of √m,
//! all as f64; finally the 32-byte SHA-256 of everything after the magic.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{compute_spectrum, DenseSpectrum, GridSpec, Parts, Space, Spectrum};
use crate::error::{Error, Result};
use crate::numeric::SymmetricEigen;
use crate::scalar::Real;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"GFLEIG01";

/// Serializable description of a space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceManifest {
    pub format_version: u32,
    pub spec: GridSpec,
    pub potential: Vec<f64>,
    /// Hex SHA-256 of the spectral sidecar payload.
    pub spectrum_checksum: String,
}

impl SpaceManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: SpaceManifest = serde_json::from_str(s)?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::config("format_version", format!("unsupported version {}", m.format_version)));
        }
        Ok(m)
    }

    /// Rebuilds the space (recomputing the spectrum) and verifies the checksum.
    pub fn rebuild<T: Real>(&self) -> Result<Space<T>> {
        let pot: Vec<T> = self.potential.iter().map(|&v| T::of(v)).collect();
        let space = Space::build(&self.spec, &pot)?;
        let sum = hex::encode(Sha256::digest(encode_blocks(&space.spectrum)));
        if sum != self.spectrum_checksum {
            return Err(Error::numerical("manifest rebuild", "spectrum checksum mismatch"));
        }
        Ok(space)
    }
}

/// Key identifying the inputs of a spectral computation.
fn cache_key<T: Real>(spec: &GridSpec, potential: &[T]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(FORMAT_VERSION.to_le_bytes());
    h.update(std::any::type_name::<T>().as_bytes());
    h.update(serde_json::to_vec(spec)?);
    for v in potential {
        h.update(v.to64().to_le_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

fn encode_blocks<T: Real>(spectrum: &Spectrum<T>) -> Vec<u8> {
    let blocks = spectrum.to_blocks();
    let mut out = Vec::new();
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for (n, values, vectors, sqrt_m) in blocks {
        out.extend_from_slice(&(n as u64).to_le_bytes());
        for v in values.iter().chain(&vectors).chain(&sqrt_m) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn decode_blocks<T: Real>(bytes: &[u8]) -> Result<Vec<DenseSpectrum<T>>> {
    let bad = |what: &str| Error::numerical("eigen sidecar", what.to_string());
    let mut pos = 0usize;
    let mut take = |k: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + k).ok_or_else(|| bad("truncated file"))?;
        pos += k;
        Ok(s)
    };
    let count = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    if count == 0 || count > 2 {
        return Err(bad("invalid block count"));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        if n == 0 || n > super::DENSE_SPECTRUM_LIMIT {
            return Err(bad("invalid block size"));
        }
        let mut read = |k: usize| -> Result<Vec<T>> {
            let raw = take(8 * k)?;
            Ok(raw.chunks_exact(8).map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap()))).collect())
        };
        let values = read(n)?;
        let vectors = read(n * n)?;
        let sqrt_m = read(n)?;
        out.push(DenseSpectrum { eig: SymmetricEigen { n, values, vectors }, sqrt_m });
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(out)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

impl<T: Real> Space<T> {
    pub fn manifest(&self) -> SpaceManifest {
        SpaceManifest {
            format_version: FORMAT_VERSION,
            spec: self.spec.clone(),
            potential: self.potential.iter().map(|v| v.to64()).collect(),
            spectrum_checksum: hex::encode(Sha256::digest(encode_blocks(&self.spectrum))),
        }
    }

    /// Path of the sidecar for this space inside `dir`.
    pub fn sidecar_path(&self, dir: &Path) -> Result<PathBuf> {
        Ok(dir.join(format!("{}.eig", cache_key(&self.spec, &self.potential)?)))
    }

    /// Writes the eigendata sidecar into `dir` and returns its path.
    pub fn save_spectrum(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let payload = encode_blocks(&self.spectrum);
        let mut bytes = Vec::with_capacity(payload.len() + 40);
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&payload);
        bytes.extend_from_slice(&Sha256::digest(&payload));
        let path = self.sidecar_path(dir)?;
        write_atomic(&path, &bytes)?;
        Ok(path)
    }

    /// Builds a space, reusing eigendata from `dir` when a matching sidecar
    /// exists and writing one otherwise. Corrupt sidecars are recomputed.
    pub fn build_cached(spec: &GridSpec, potential: &[T], dir: &Path) -> Result<Self> {
        let parts = Parts::assemble(spec, potential)?;
        let path = dir.join(format!("{}.eig", cache_key(spec, potential)?));
        if let Ok(factors) = load_sidecar::<T>(&path) {
            let expected = match (spec.dimension, factors.len()) {
                (1, 1) | (2, 1) => factors[0].n() == parts.measure.len(),
                (2, 2) => factors.iter().all(|f| f.n() == spec.nodes_per_axis),
                _ => false,
            };
            if expected {
                let spectrum = if factors.len() == 1 {
                    Spectrum::Dense(factors.into_iter().next().unwrap())
                } else {
                    Spectrum::Tensor(factors)
                };
                return Ok(parts.finish(spec, potential, spectrum));
            }
        }
        let spectrum = compute_spectrum(&parts.axes, potential, &parts.generator, &parts.measure)?;
        let space = parts.finish(spec, potential, spectrum);
        space.save_spectrum(dir)?;
        Ok(space)
    }
}

fn load_sidecar<T: Real>(path: &Path) -> Result<Vec<DenseSpectrum<T>>> {
    let bytes = fs::read(path)?;
    if bytes.len() < MAGIC.len() + 32 || &bytes[..8] != MAGIC {
        return Err(Error::numerical("eigen sidecar", "bad magic"));
    }
    let (payload, sum) = bytes[8..].split_at(bytes.len() - 8 - 32);
    if Sha256::digest(payload).as_slice() != sum {
        return Err(Error::numerical("eigen sidecar", "checksum mismatch"));
    }
    decode_blocks(payload)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let spec = GridSpec::interval_1d(-2.0, 2.0, 16);
        let s = Space::<f64>::from_fn(&spec, |x| x[0] * x[0] * 0.5).unwrap();
        let m = s.manifest();
        let back = SpaceManifest::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let rebuilt: Space<f64> = back.rebuild().unwrap();
        assert_eq!(rebuilt.manifest(), m);
    }

    #[test]
    fn manifest_rejects_unknown_version() {
        let spec = GridSpec::torus_1d(1.0, 8);
        let s = Space::<f64>::build(&spec, &[0.0; 8]).unwrap();
        let mut m = s.manifest();
        m.format_version = 99;
        assert!(SpaceManifest::from_json(&m.to_json().unwrap()).is_err());
    }

    #[test]
    fn sidecar_cache_reuses_and_recovers() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GridSpec::interval(2, -1.0, 1.0, 6);
        let pot: Vec<f64> = (0..36).map(|k| (k as f64 * 0.37).sin()).collect();
        let a = Space::build_cached(&spec, &pot, dir.path()).unwrap();
        let path = a.sidecar_path(dir.path()).unwrap();
        assert!(path.exists());
        let b = Space::build_cached(&spec, &pot, dir.path()).unwrap();
        assert_eq!(a.eigenvalues(), b.eigenvalues());
        assert_ne!(a.id(), b.id());

        let mut bytes = fs::read(&path).unwrap();
        bytes[20] ^= 0xff;
        fs::write(&path, bytes).unwrap();
        let c = Space::build_cached(&spec, &pot, dir.path()).unwrap();
        assert_eq!(a.eigenvalues(), c.eigenvalues());
    }
}
