//! CSV monitor traces and binary field dumps of continuity solutions.
//!
//! Field dump layout (little endian): magic `GFLFLD01`, u64 node count, u64
//! record count, then per record the time and the nodal values as f64.

use std::io::Write;
use std::path::Path;

use super::CESolution;
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAGIC: &[u8; 8] = b"GFLFLD01";

/// Writes `t,mass,l1,l2,linf` per step.
pub fn write_trace_csv<T: Real>(sol: &CESolution<T>, out: &mut impl Write) -> Result<()> {
    writeln!(out, "t,mass,l1,l2,linf")?;
    for k in 0..sol.step_times.len() {
        writeln!(out, "{:.10e},{:.16e},{:.16e},{:.16e},{:.16e}", sol.step_times[k], sol.mass[k], sol.l1[k], sol.l2[k], sol.linf[k])?;
    }
    Ok(())
}

pub fn write_fields<T: Real>(sol: &CESolution<T>, path: &Path) -> Result<()> {
    let n = sol.fields.first().map_or(0, |f| f.len());
    let mut bytes = Vec::with_capacity(24 + sol.fields.len() * 8 * (n + 1));
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(n as u64).to_le_bytes());
    bytes.extend_from_slice(&(sol.fields.len() as u64).to_le_bytes());
    for (t, f) in sol.times.iter().zip(&sol.fields) {
        bytes.extend_from_slice(&t.to_le_bytes());
        for v in f.values() {
            bytes.extend_from_slice(&v.to64().to_le_bytes());
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Reads a field dump back as (time, values) records.
pub fn read_fields(path: &Path) -> Result<Vec<(f64, Vec<f64>)>> {
    let bytes = std::fs::read(path)?;
    let bad = || Error::config("path", format!("{} is not a field dump", path.display()));
    if bytes.len() < 24 || &bytes[..8] != MAGIC {
        return Err(bad());
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let body = &bytes[24..];
    if body.len() != count.checked_mul((n + 1) * 8).ok_or_else(bad)? {
        return Err(bad());
    }
    let vals: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(vals.chunks(n + 1).map(|r| (r[0], r[1..].to_vec())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::Derivation;
    use crate::continuity::{solve_viscous_ce, CeConfig};
    use crate::space::{build_space, GridSpec, Space};

    #[test]
    fn trace_and_dump_round_trip() {
        let s: Space<f64> = build_space(&GridSpec::torus_1d(1.0, 16), &[0.0; 16]).unwrap();
        let u0 = s.field_fn(|x| x[0]);
        let sol = solve_viscous_ce(&s, &Derivation::zero(&s), &u0, &CeConfig::new(0.1, 0.1, 0.05)).unwrap();
        let mut csv = Vec::new();
        write_trace_csv(&sol, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("t,mass,l1,l2,linf\n"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.bin");
        write_fields(&sol, &p).unwrap();
        let back = read_fields(&p).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[2].1, sol.last().values());
    }
}
