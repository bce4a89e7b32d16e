//! Binary checkpoint format for trained models.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"POLDDPM1"
//! 8       4     format version (u32) = 1
//! 12      1     representation tag (0 grid, 1 raw, 2 encoded)
//! 13      4     hidden width (u32)
//! 17      4     time-embedding dimension (u32)
//! 21      4     training patch size (u32)
//! 25      4     schedule timestep count (u32)
//! 29      8     schedule beta_start (f64)
//! 37      8     schedule beta_end (f64)
//! 45      8     parameter count (u64)
//! 53      8·n   parameters (f64), flat in the model's visitor order
//! ```
//!
//! The architecture descriptor (tag, width, embedding dimension) fully
//! determines the parameter layout, so loading reconstructs the model and
//! overwrites its values; round trips are bit-exact.

use crate::diffusion::model::{DiffusionModel, ModelConfig};
use crate::diffusion::repr::TargetRepresentation;
use crate::diffusion::schedule::{make_schedule, NoiseSchedule};
use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"POLDDPM1";
const VERSION: u32 = 1;

/// Everything needed to resume sampling: the model, the schedule it was
/// trained with, and the condition patch size.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: DiffusionModel,
    pub schedule: NoiseSchedule,
    pub patch_size: usize,
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let model = &checkpoint.model;
    let schedule = &checkpoint.schedule;
    let params = model.param_values();
    let mut buf = Vec::with_capacity(53 + 8 * params.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(model.config.representation.tag());
    buf.extend_from_slice(&(model.config.width as u32).to_le_bytes());
    buf.extend_from_slice(&(model.config.time_embed_dim as u32).to_le_bytes());
    buf.extend_from_slice(&(checkpoint.patch_size as u32).to_le_bytes());
    buf.extend_from_slice(&(schedule.t_count() as u32).to_le_bytes());
    buf.extend_from_slice(&schedule.beta(1).to_le_bytes());
    buf.extend_from_slice(&schedule.beta(schedule.t_count()).to_le_bytes());
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in &params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    let mut file = std::fs::File::create(path)
        .map_err(|e| Error::Io(format!("cannot create checkpoint {}: {e}", path.display())))?;
    file.write_all(&buf)
        .map_err(|e| Error::Io(format!("cannot write checkpoint {}: {e}", path.display())))?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Io(format!(
                "checkpoint truncated: wanted {} bytes at offset {}, file has {}",
                n,
                self.pos,
                self.buf.len()
            )));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("length checked")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("length checked")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("length checked")))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("cannot open checkpoint {}: {e}", path.display())))?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf)
        .map_err(|e| Error::Io(format!("cannot read checkpoint {}: {e}", path.display())))?;
    let mut r = Reader { buf: &buf, pos: 0 };

    if r.take(8)? != MAGIC {
        return Err(Error::Io(format!("{} is not a model checkpoint (bad magic)", path.display())));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Io(format!(
            "unsupported checkpoint version {version} (this build reads {VERSION})"
        )));
    }
    let repr = TargetRepresentation::from_tag(r.take(1)?[0])?;
    let width = r.u32()? as usize;
    let time_embed_dim = r.u32()? as usize;
    let patch_size = r.u32()? as usize;
    let t_count = r.u32()? as usize;
    let beta_start = r.f64()?;
    let beta_end = r.f64()?;
    let param_count = r.u64()? as usize;

    let config = ModelConfig { representation: repr, width, time_embed_dim };
    let mut model = DiffusionModel::new(config, 0)?;
    if model.param_count() != param_count {
        return Err(Error::Io(format!(
            "checkpoint declares {param_count} parameters but the {repr} architecture \
             (width {width}, embedding {time_embed_dim}) has {}",
            model.param_count()
        )));
    }
    let mut params = Vec::with_capacity(param_count);
    for _ in 0..param_count {
        params.push(r.f64()?);
    }
    if r.pos != buf.len() {
        return Err(Error::Io(format!(
            "checkpoint has {} trailing bytes",
            buf.len() - r.pos
        )));
    }
    model.set_param_values(&params)?;
    let schedule = make_schedule(t_count, beta_start, beta_end)?;
    Ok(Checkpoint { model, schedule, patch_size })
}
