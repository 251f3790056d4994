//! Named analytic derivation families (JSON/TOML) and the raw coefficient
//! sidecar format.
//!
//! Sidecar layout (little endian): magic `GFLCOF01`, u32 axis count, u64 node
//! count, then axis-major f64 coefficients and the 32-byte SHA-256 of the
//! bytes between magic and digest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Derivation;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::space::{Potential, Space};

const MAGIC: &[u8; 8] = b"GFLCOF01";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DerivationSpec {
    /// Constant coefficient vector.
    Constant { velocity: Vec<f64> },
    /// b^x = amplitude · cos(frequency · θ) + offset, other axes zero.
    Cosine {
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        offset: f64,
    },
    /// b^x = amplitude · sin(frequency · θ) + offset, other axes zero.
    Sine {
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        offset: f64,
    },
    /// b^x = amplitude · sign(sin θ)|sin θ|^exponent: Sobolev but not Lipschitz for exponent < 1.
    RoughSine { exponent: f64, #[serde(default = "one")] amplitude: f64 },
    /// 2D rotation b = (−D_y ψ, D_x ψ), ψ = amplitude · sin θ_x sin θ_y; discretely divergence-free on flat tori.
    Rotation { #[serde(default = "one")] amplitude: f64 },
    /// Gradient derivation of an analytic potential.
    Gradient { potential: Potential },
    /// Raw coefficients from a sidecar file.
    Coefficients { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

/// Angular coordinate θ ∈ [0, 2π) on tori; x itself on intervals.
fn angle<T: Real>(space: &Space<T>, x: &[T], a: usize) -> f64 {
    let ax = &space.axes()[a];
    if ax.periodic {
        (x[a] - ax.start).to64() * 2.0 * std::f64::consts::PI / ax.length.to64()
    } else {
        x[a].to64()
    }
}

/// Centred difference of f along `axis`, with zero-flux ghosts at Neumann ends.
pub fn centered_difference<T: Real>(space: &Space<T>, f: &[T], axis: usize) -> Vec<T> {
    let h2 = T::of(2.0) * space.axes()[axis].spacing;
    (0..space.len())
        .map(|k| {
            let p = space.neighbor(k, axis, true).unwrap_or(k);
            let m = space.neighbor(k, axis, false).unwrap_or(k);
            (f[p] - f[m]) / h2
        })
        .collect()
}

impl DerivationSpec {
    pub fn build<T: Real>(&self, space: &Space<T>) -> Result<Derivation<T>> {
        let d = space.dimension();
        let first_axis = |g: &dyn Fn(f64) -> f64| {
            Derivation::from_fn(space, |x| {
                let mut v = vec![T::zero(); d];
                v[0] = T::of(g(angle(space, x, 0)));
                v
            })
        };
        match self {
            DerivationSpec::Constant { velocity } => {
                if velocity.len() != d {
                    return Err(Error::config("velocity", format!("expected {d} components, got {}", velocity.len())));
                }
                Derivation::from_fn(space, |_| velocity.iter().map(|&v| T::of(v)).collect())
            }
            &DerivationSpec::Cosine { amplitude, frequency, offset } => first_axis(&|t| amplitude * (frequency * t).cos() + offset),
            &DerivationSpec::Sine { amplitude, frequency, offset } => first_axis(&|t| amplitude * (frequency * t).sin() + offset),
            &DerivationSpec::RoughSine { exponent, amplitude } => {
                if !(exponent > 0.0) {
                    return Err(Error::config("exponent", "must be positive"));
                }
                first_axis(&|t| amplitude * t.sin().signum() * t.sin().abs().powf(exponent))
            }
            &DerivationSpec::Rotation { amplitude } => {
                if d != 2 {
                    return Err(Error::config("family", "rotation needs a 2D space"));
                }
                let psi: Vec<T> = (0..space.len())
                    .map(|k| {
                        let x = space.coords(k);
                        T::of(amplitude * angle(space, &x, 0).sin() * angle(space, &x, 1).sin())
                    })
                    .collect();
                let dx = centered_difference(space, &psi, 0);
                let dy = centered_difference(space, &psi, 1);
                Derivation::vector(space, vec![space.wrap(dy.into_iter().map(|v| -v).collect()), space.wrap(dx)])
            }
            DerivationSpec::Gradient { potential } => {
                let v = space.field_fn(|x| {
                    let xs: Vec<f64> = x.iter().map(|c| c.to64()).collect();
                    T::of(potential.eval(&xs))
                });
                Derivation::gradient(space, &v)
            }
            DerivationSpec::Coefficients { path } => {
                let c = read_coefficients(path)?;
                if c.len() != d || c.iter().any(|a| a.len() != space.len()) {
                    return Err(Error::config("path", "coefficient file does not match the space"));
                }
                Derivation::vector(space, c.into_iter().map(|a| space.wrap(a.into_iter().map(T::of).collect())).collect())
            }
        }
    }
}

pub fn write_coefficients(path: &Path, coeffs: &[Vec<f64>]) -> Result<()> {
    let nodes = coeffs.first().map_or(0, |a| a.len());
    if coeffs.iter().any(|a| a.len() != nodes) {
        return Err(Error::domain("ragged coefficient arrays"));
    }
    let mut payload = Vec::with_capacity(12 + 8 * nodes * coeffs.len());
    payload.extend_from_slice(&(coeffs.len() as u32).to_le_bytes());
    payload.extend_from_slice(&(nodes as u64).to_le_bytes());
    for v in coeffs.iter().flatten() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let mut bytes = MAGIC.to_vec();
    bytes.extend_from_slice(&payload);
    bytes.extend_from_slice(&Sha256::digest(&payload));
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_coefficients(path: &Path) -> Result<Vec<Vec<f64>>> {
    let bytes = std::fs::read(path)?;
    let bad = |m: &str| Error::config("path", format!("{}: {m}", path.display()));
    if bytes.len() < 8 + 12 + 32 || &bytes[..8] != MAGIC {
        return Err(bad("not a coefficient sidecar"));
    }
    let payload = &bytes[8..bytes.len() - 32];
    if Sha256::digest(payload).as_slice() != &bytes[bytes.len() - 32..] {
        return Err(bad("checksum mismatch"));
    }
    let axes = u32::from_le_bytes(payload[..4].try_into().unwrap()) as usize;
    let nodes = u64::from_le_bytes(payload[4..12].try_into().unwrap()) as usize;
    let data = &payload[12..];
    if axes == 0 || data.len() != axes.saturating_mul(nodes).saturating_mul(8) {
        return Err(bad("inconsistent sizes"));
    }
    let flat: Vec<f64> = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(flat.chunks(nodes.max(1)).map(|c| c.to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::GridSpec;

    #[test]
    fn parse_and_build_families() {
        let s = Potential::Flat.build_space::<f64>(&GridSpec::torus(2, 2.0 * std::f64::consts::PI, 16)).unwrap();
        let spec: DerivationSpec = serde_json::from_str(r#"{"family":"rotation"}"#).unwrap();
        let b = spec.build(&s).unwrap();
        assert!(b.divergence(&s, 0.0).unwrap().max_abs() < 1e-12);
        let c: DerivationSpec = toml::from_str("family = \"constant\"\nvelocity = [1.0, 0.5]\n").unwrap();
        assert!(c.build(&s).is_ok());
        let bad: DerivationSpec = serde_json::from_str(r#"{"family":"constant","velocity":[1.0]}"#).unwrap();
        assert!(matches!(bad.build(&s), Err(Error::Config { .. })));
        assert!(serde_json::from_str::<DerivationSpec>(r#"{"family":"sine","amplitude":1,"bogus":2}"#).is_err());
    }

    #[test]
    fn coefficient_sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.cof");
        let s = Potential::Flat.build_space::<f64>(&GridSpec::torus_1d(1.0, 8)).unwrap();
        let coeffs = vec![(0..8).map(|k| k as f64 * 0.25 - 1.0).collect::<Vec<_>>()];
        write_coefficients(&path, &coeffs).unwrap();
        assert_eq!(read_coefficients(&path).unwrap(), coeffs);
        let b = DerivationSpec::Coefficients { path: path.clone() }.build(&s).unwrap();
        assert_eq!(b.velocity(&s, 0.0).unwrap()[0], coeffs[0]);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[30] ^= 1;
        std::fs::write(&path, bytes).unwrap();
        assert!(read_coefficients(&path).is_err());
    }
}
