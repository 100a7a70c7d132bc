//! Binary checkpoint and resume-state files.
//!
//! Checkpoint layout, all integers little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `SEMFCKPT` |
//! | 4 | format version (1) |
//! | 5 x 4 | trunk depth, trunk width, position levels, direction levels, class count |
//! | 8 | parameter count `n` |
//! | 4 n | parameters as `f32` |
//!
//! The resume state (`SEMFSTAT`) stores parameters and optimizer moments at
//! the training precision so a resumed run continues bit for bit.

use std::path::Path;

use semfield_core::field::{NetworkArchitecture, ParameterSet};
use semfield_core::train::{AdamState, TrainState};
use semfield_core::{ClassId, Real};

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SEMFCKPT";
pub const STATE_MAGIC: &[u8; 8] = b"SEMFSTAT";
pub const FORMAT_VERSION: u32 = 1;

fn put_arch(out: &mut Vec<u8>, a: &NetworkArchitecture) {
    for v in [
        a.trunk_depth,
        a.trunk_width,
        a.position_encoding_levels,
        a.direction_encoding_levels,
        a.class_count,
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
}

pub fn encode_checkpoint<F: Real>(params: &ParameterSet<F>) -> Vec<u8> {
    let mut out = Vec::with_capacity(40 + 4 * params.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_arch(&mut out, params.architecture());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params.values() {
        out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
    }
    out
}

/// Sequential little-endian reader with file-level diagnostics.
struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.path,
                format!("truncated at byte {}", self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn header(&mut self, magic: &[u8; 8], what: &str) -> Result<()> {
        if self.take(8)? != magic {
            return Err(Error::format(
                self.path,
                format!("not a {what} file (bad magic)"),
            ));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::format(
                self.path,
                format!("unsupported {what} version {version}"),
            ));
        }
        Ok(())
    }

    fn arch(&mut self) -> Result<NetworkArchitecture> {
        let mut v = [0usize; 5];
        for x in &mut v {
            *x = self.u32()? as usize;
        }
        let arch = NetworkArchitecture {
            trunk_depth: v[0],
            trunk_width: v[1],
            position_encoding_levels: v[2],
            direction_encoding_levels: v[3],
            class_count: v[4],
        };
        arch.validate()
            .map_err(|e| Error::format(self.path, e.to_string()))?;
        Ok(arch)
    }

    fn count(&mut self, arch: &NetworkArchitecture) -> Result<usize> {
        let n = self.u64()? as usize;
        if n != arch.parameter_count() {
            return Err(Error::format(
                self.path,
                format!(
                    "parameter count {n} does not match the architecture ({})",
                    arch.parameter_count()
                ),
            ));
        }
        Ok(n)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(
                self.path,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

/// `path` is only used in diagnostics.
pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<ParameterSet<f32>> {
    let mut c = Cursor {
        path,
        bytes,
        pos: 0,
    };
    c.header(CHECKPOINT_MAGIC, "checkpoint")?;
    let arch = c.arch()?;
    let n = c.count(&arch)?;
    let values = c
        .take(4 * n)?
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    c.finish()?;
    ParameterSet::from_values(arch, values).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_checkpoint<F: Real>(path: &Path, params: &ParameterSet<F>) -> Result<()> {
    write_atomic(path, &encode_checkpoint(params))
}

pub fn read_checkpoint(path: &Path) -> Result<ParameterSet<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}

/// Reads a checkpoint and checks it against the configured architecture.
pub fn read_checkpoint_for(
    path: &Path,
    expected: &NetworkArchitecture,
) -> Result<ParameterSet<f32>> {
    let p = read_checkpoint(path)?;
    if p.architecture() != expected {
        return Err(Error::ArchitectureMismatch {
            expected: *expected,
            found: *p.architecture(),
        });
    }
    Ok(p)
}

fn put_reals<F: Real>(out: &mut Vec<u8>, v: &[F]) {
    let wide = core::mem::size_of::<F>() == 8;
    for x in v {
        let x = x.to_f64_lossy();
        if wide {
            out.extend_from_slice(&x.to_le_bytes());
        } else {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
}

fn get_reals<F: Real>(c: &mut Cursor<'_>, n: usize) -> Result<Vec<F>> {
    let w = core::mem::size_of::<F>();
    let raw = c.take(w * n)?;
    Ok(raw
        .chunks_exact(w)
        .map(|b| {
            if w == 8 {
                F::lit(f64::from_le_bytes(b.try_into().unwrap()))
            } else {
                F::lit(f32::from_le_bytes(b.try_into().unwrap()) as f64)
            }
        })
        .collect())
}

pub fn encode_state<F: Real>(state: &TrainState<F>) -> Vec<u8> {
    let n = state.params.len();
    let mut out = Vec::new();
    out.extend_from_slice(STATE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(core::mem::size_of::<F>() as u32).to_le_bytes());
    put_arch(&mut out, state.params.architecture());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for v in [
        state.iteration as u64,
        state.selfsup_cycles,
        state.adam.step,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    put_reals(&mut out, state.params.values());
    put_reals(&mut out, &state.adam.m);
    put_reals(&mut out, &state.adam.v);
    out.extend_from_slice(&(state.supervision.len() as u64).to_le_bytes());
    let pixels = state.supervision.first().map_or(0, Vec::len);
    out.extend_from_slice(&(pixels as u64).to_le_bytes());
    for map in &state.supervision {
        out.extend_from_slice(map);
    }
    out
}

pub fn decode_state<F: Real>(bytes: &[u8], path: &Path) -> Result<TrainState<F>> {
    let mut c = Cursor {
        path,
        bytes,
        pos: 0,
    };
    c.header(STATE_MAGIC, "training state")?;
    let width = c.u32()? as usize;
    if width != core::mem::size_of::<F>() {
        return Err(Error::format(
            path,
            format!(
                "state stored with {}-byte floats, run uses {}",
                width,
                core::mem::size_of::<F>()
            ),
        ));
    }
    let arch = c.arch()?;
    let n = c.count(&arch)?;
    let iteration = c.u64()? as usize;
    let selfsup_cycles = c.u64()?;
    let step = c.u64()?;
    let values = get_reals::<F>(&mut c, n)?;
    let m = get_reals::<F>(&mut c, n)?;
    let v = get_reals::<F>(&mut c, n)?;
    let frames = c.u64()? as usize;
    let pixels = c.u64()? as usize;
    let mut supervision: Vec<Vec<ClassId>> = Vec::with_capacity(frames);
    for _ in 0..frames {
        supervision.push(c.take(pixels)?.to_vec());
    }
    c.finish()?;
    let params =
        ParameterSet::from_values(arch, values).map_err(|e| Error::format(path, e.to_string()))?;
    Ok(TrainState {
        iteration,
        params,
        adam: AdamState { m, v, step },
        supervision,
        selfsup_cycles,
    })
}

pub fn write_state<F: Real>(path: &Path, state: &TrainState<F>) -> Result<()> {
    write_atomic(path, &encode_state(state))
}

pub fn read_state<F: Real>(path: &Path) -> Result<TrainState<F>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_state(&bytes, path)
}

/// Writes to a sibling temporary file and renames it over `path`, so an
/// interrupted write never leaves a truncated file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
