//! Checkpoints: a PLY cloud for interchange plus a binary sidecar holding
//! exact `f64` parameters, optimizer moments, densify stats and the
//! iteration counter.
//!
//! Sidecar layout (little-endian): magic `SPLATCKP`, `u32` version,
//! `u64` iteration, `u64` Adam step, `u64` count, `f64` scene extent, then per
//! Gaussian 23 parameters, 23 first moments, 23 second moments (all `f64`),
//! `f64` gradient sum and `u32` count.

use std::fs;
use std::path::{Path, PathBuf};

use super::adam::OptimizerState;
use crate::error::{Error, Result};
use crate::scene::ply::write_ply;
use crate::scene::{Gaussian3D, GaussianCloud, ParamKind, PARAMS_PER_GAUSSIAN};

const MAGIC: &[u8; 8] = b"SPLATCKP";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub iteration: usize,
    pub cloud: GaussianCloud,
    pub optimizer: OptimizerState,
}

/// `<dir>/iter_000123.ply` and `<dir>/iter_000123.ckpt`.
pub fn checkpoint_paths(dir: &Path, iteration: usize) -> (PathBuf, PathBuf) {
    let stem = format!("iter_{iteration:06}");
    (dir.join(format!("{stem}.ply")), dir.join(format!("{stem}.ckpt")))
}

/// Sidecar path paired with a checkpoint PLY.
pub fn sidecar_for(ply: &Path) -> PathBuf {
    ply.with_extension("ckpt")
}

impl Checkpoint {
    pub fn save(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let (ply, side) = checkpoint_paths(dir, self.iteration);
        write_ply(&self.cloud, &ply)?;
        fs::write(&side, self.encode()).map_err(|e| Error::io(&side, e))?;
        Ok((ply, side))
    }

    pub fn load(sidecar: &Path) -> Result<Checkpoint> {
        let bytes = fs::read(sidecar).map_err(|e| Error::io(sidecar, e))?;
        Checkpoint::decode(&bytes, &sidecar.display().to_string())
    }

    pub fn encode(&self) -> Vec<u8> {
        let n = self.cloud.len();
        let mut b = Vec::with_capacity(44 + n * (69 * 8 + 12));
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(&(self.iteration as u64).to_le_bytes());
        b.extend_from_slice(&self.optimizer.step.to_le_bytes());
        b.extend_from_slice(&(n as u64).to_le_bytes());
        b.extend_from_slice(&self.cloud.scene_extent.to_le_bytes());
        for i in 0..n {
            let g = self.cloud.get(i);
            for k in 0..PARAMS_PER_GAUSSIAN {
                b.extend_from_slice(&g.param(ParamKind::from_flat(k)).to_le_bytes());
            }
            for v in self.optimizer.m[i].iter().chain(&self.optimizer.v[i]) {
                b.extend_from_slice(&v.to_le_bytes());
            }
            b.extend_from_slice(&self.cloud.densify_stats.grad_sum[i].to_le_bytes());
            b.extend_from_slice(&self.cloud.densify_stats.count[i].to_le_bytes());
        }
        b
    }

    pub fn decode(bytes: &[u8], name: &str) -> Result<Checkpoint> {
        let truncated = |what: &str| Error::Truncated {
            file: name.into(),
            detail: format!("checkpoint ends while reading {what}"),
        };
        let mut pos = 0usize;
        let mut take = |n: usize, what: &str| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(|| truncated(what))?;
            pos += n;
            Ok(s)
        };
        if take(8, "magic")? != MAGIC {
            return Err(Error::Malformed {
                file: name.into(),
                detail: "not a checkpoint sidecar (bad magic)".into(),
            });
        }
        let version = u32::from_le_bytes(take(4, "version")?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Malformed {
                file: name.into(),
                detail: format!("unsupported checkpoint version {version}"),
            });
        }
        let mut u64_at = |what: &str| -> Result<u64> { Ok(u64::from_le_bytes(take(8, what)?.try_into().unwrap())) };
        let iteration = u64_at("iteration")? as usize;
        let step = u64_at("adam step")?;
        let n = u64_at("count")? as usize;
        let extent = f64::from_bits(u64_at("scene extent")?);
        let record = 69 * 8 + 12;
        if (bytes.len() - pos) / record < n {
            return Err(truncated("gaussian records"));
        }
        let f = |p: &mut usize| {
            let v = f64::from_le_bytes(bytes[*p..*p + 8].try_into().unwrap());
            *p += 8;
            v
        };
        let mut cloud = GaussianCloud::new(extent);
        let mut opt = OptimizerState::new(0);
        opt.step = step;
        for i in 0..n {
            let mut g = Gaussian3D {
                position: [0.0; 3],
                log_scale: [0.0; 3],
                rotation: [0.0; 4],
                opacity_logit: 0.0,
                sh_coeffs: [0.0; 12],
            };
            for k in 0..PARAMS_PER_GAUSSIAN {
                *g.param_mut(ParamKind::from_flat(k)) = f(&mut pos);
            }
            cloud.push(g);
            let m: [f64; PARAMS_PER_GAUSSIAN] = std::array::from_fn(|_| f(&mut pos));
            let v: [f64; PARAMS_PER_GAUSSIAN] = std::array::from_fn(|_| f(&mut pos));
            opt.m.push(m);
            opt.v.push(v);
            cloud.densify_stats.grad_sum[i] = f(&mut pos);
            cloud.densify_stats.count[i] = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
            pos += 4;
        }
        Ok(Checkpoint {
            iteration,
            cloud,
            optimizer: opt,
        })
    }
}
