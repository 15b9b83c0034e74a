//! Versioned binary checkpoints. The byte layout is specified in
//! `docs/checkpoint-format.md`; keep the two in sync.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::reinforce::{BaselineState, Trainer, TrainingConfig};

pub const MAGIC: [u8; 4] = *b"MCCK";
pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to resume training bit-exactly: the per-epoch random
/// streams are derived from the master seed and the epoch counter.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: PolicyParams,
    pub baseline: BaselineState,
    pub master_seed: u64,
    pub epoch: u64,
}

impl Checkpoint {
    pub fn from_trainer(trainer: &Trainer) -> Self {
        Checkpoint {
            params: trainer.params().clone(),
            baseline: trainer.baseline().clone(),
            master_seed: trainer.seed(),
            epoch: trainer.epoch(),
        }
    }

    pub fn into_trainer(self, config: TrainingConfig) -> Result<Trainer> {
        Trainer::resume(config, self.params, self.baseline, self.master_seed, self.epoch)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let mut out = Vec::with_capacity(64 + 24 * p.n_params() + 8 * self.baseline.epoch_mean_rewards.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(p.layer_sizes().len() as u32).to_le_bytes());
        for &n in p.layer_sizes() {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        out.extend_from_slice(&(p.n_params() as u64).to_le_bytes());
        for block in [p.theta(), p.adam_m(), p.adam_v()] {
            for x in block {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out.extend_from_slice(&p.adam_t().to_le_bytes());
        out.extend_from_slice(&self.master_seed.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        let history = &self.baseline.epoch_mean_rewards;
        out.extend_from_slice(&(history.len() as u64).to_le_bytes());
        for x in history {
            out.extend_from_slice(&x.to_le_bytes());
        }
        let checksum = fnv1a64(&out);
        out.extend_from_slice(&checksum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::CorruptCheckpoint("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if bytes.len() < 8 {
            return Err(Error::CorruptCheckpoint("truncated".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
        if fnv1a64(body) != stored {
            return Err(Error::CorruptCheckpoint("checksum mismatch".into()));
        }
        r.bytes = body;

        let n_layers = r.u32()? as usize;
        if n_layers > 64 {
            return Err(Error::CorruptCheckpoint(format!("{n_layers} layers")));
        }
        let layer_sizes = (0..n_layers).map(|_| r.u32().map(|n| n as usize)).collect::<Result<Vec<_>>>()?;
        let n_params = r.u64()? as usize;
        if n_params != PolicyParams::n_params_for(&layer_sizes) {
            return Err(Error::CorruptCheckpoint(format!(
                "{n_params} parameters do not fit layers {layer_sizes:?}"
            )));
        }
        let theta = r.f64s(n_params)?;
        let adam_m = r.f64s(n_params)?;
        let adam_v = r.f64s(n_params)?;
        let adam_t = r.u64()?;
        let master_seed = r.u64()?;
        let epoch = r.u64()?;
        let n_history = r.u64()? as usize;
        let epoch_mean_rewards = r.f64s(n_history)?;
        if r.pos != r.bytes.len() {
            return Err(Error::CorruptCheckpoint("trailing bytes".into()));
        }
        let params = PolicyParams::from_parts(layer_sizes, theta, adam_m, adam_v, adam_t)
            .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        Ok(Checkpoint {
            params,
            baseline: BaselineState { epoch_mean_rewards },
            master_seed,
            epoch,
        })
    }
}

/// Write `checkpoint` to `path` through a temporary file, so a crash never
/// leaves a half-written checkpoint behind.
pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(&checkpoint.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::CorruptCheckpoint("truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::CorruptCheckpoint("length overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Gradient;
    use crate::rng::NoiseConfig;

    fn sample() -> Checkpoint {
        let mut rng = NoiseConfig::new(4, 0).rng();
        let mut params = PolicyParams::init(&[2, 5, 4, 11], &mut rng).unwrap();
        let g = Gradient((0..params.n_params()).map(|i| (i as f64 * 0.3).sin()).collect());
        params.adam_update(&g, 1e-3).unwrap();
        Checkpoint {
            params,
            baseline: BaselineState {
                epoch_mean_rewards: vec![1.5, -2.25, 1e300],
            },
            master_seed: 0xdead_beef,
            epoch: 3,
        }
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        save_checkpoint(&path, &c).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), c);
    }

    #[test]
    fn wrong_version_is_explicit() {
        let mut bytes = sample().to_bytes();
        bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::CheckpointVersion { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = sample().to_bytes();
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(matches!(Checkpoint::from_bytes(&flipped), Err(Error::CorruptCheckpoint(_))));
        assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::CorruptCheckpoint(_))));
        assert!(matches!(Checkpoint::from_bytes(b"XXXX"), Err(Error::CorruptCheckpoint(_))));
    }

    #[test]
    fn header_layout() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..4], b"MCCK");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        let n = PolicyParams::n_params_for(&[2, 5, 4, 11]);
        assert_eq!(bytes.len(), 4 + 4 + 4 + 16 + 8 + 24 * n + 8 * 3 + 8 + 8 * 3 + 8);
    }
}
