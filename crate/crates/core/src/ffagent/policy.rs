//! Trained Q-policies and the `FFWQ` checkpoint format:
//!
//! ```text
//! "FFWQ" | version u16 | kind u8 | layer count u8
//! per layer: rows u32 | cols u32 | rows*cols f32 (row-major) | rows f32 biases
//! ```
//!
//! `kind` is the strategy code (0 slow, 1 normal, 2 fast) or 3 for a
//! centralized controller network.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::network::{Dense, Mlp};
use super::{AgentError, PolicyBank, SkipPolicy, Strategy};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"FFWQ";
pub const CHECKPOINT_VERSION: u16 = 1;
const CONTROLLER_TAG: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointKind {
    Agent(Strategy),
    Controller,
}

impl CheckpointKind {
    fn tag(self) -> u8 {
        match self {
            CheckpointKind::Agent(s) => s.code(),
            CheckpointKind::Controller => CONTROLLER_TAG,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            CONTROLLER_TAG => Some(CheckpointKind::Controller),
            t => Strategy::from_code(t).map(CheckpointKind::Agent),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: CheckpointKind,
    pub net: Mlp,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.push(self.kind.tag());
        out.push(self.net.layers().len() as u8);
        for layer in self.net.layers() {
            out.extend_from_slice(&(layer.outputs() as u32).to_le_bytes());
            out.extend_from_slice(&(layer.inputs() as u32).to_le_bytes());
            for w in layer.weights.iter() {
                out.extend_from_slice(&w.to_le_bytes());
            }
            for b in layer.bias.iter() {
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AgentError> {
        let bad = |msg: String| AgentError::BadCheckpoint(msg);
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8], AgentError> {
            if bytes.len() - pos < n {
                return Err(bad(format!("truncated at byte offset {pos}")));
            }
            let s = &bytes[pos..pos + n];
            pos += n;
            Ok(s)
        };
        if take(4)? != CHECKPOINT_MAGIC {
            return Err(bad("bad magic".into()));
        }
        let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let tag = take(1)?[0];
        let kind = CheckpointKind::from_tag(tag).ok_or_else(|| bad(format!("unknown kind tag {tag}")))?;
        let count = take(1)?[0] as usize;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let rows = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let cols = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let floats = |raw: &[u8]| -> Vec<f32> {
                raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()
            };
            let w = floats(take(rows * cols * 4)?);
            let b = floats(take(rows * 4)?);
            layers.push(Dense {
                weights: Array2::from_shape_vec((rows, cols), w).unwrap(),
                bias: Array1::from(b),
            });
        }
        if pos != bytes.len() {
            return Err(bad(format!("{} trailing bytes", bytes.len() - pos)));
        }
        let net = Mlp::from_layers(layers).map_err(bad)?;
        Ok(Self { kind, net })
    }
}

pub fn write_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<(), AgentError> {
    fs::write(path, ckpt.to_bytes())?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, AgentError> {
    Checkpoint::from_bytes(&fs::read(path)?)
}

/// A Q-network trained for one pace. Output `i` is the value of skipping
/// `i + 1` frames.
#[derive(Debug, Clone, PartialEq)]
pub struct QPolicy {
    strategy: Strategy,
    net: Mlp,
}

impl QPolicy {
    pub fn new(strategy: Strategy, net: Mlp) -> Result<Self, AgentError> {
        if net.output_dim() != strategy.action_space() {
            return Err(AgentError::BadCheckpoint(format!(
                "{strategy} policy needs {} outputs, network has {}",
                strategy.action_space(),
                net.output_dim()
            )));
        }
        Ok(Self { strategy, net })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn q_values(&self, feature: &[f32]) -> Result<Vec<f32>, AgentError> {
        if feature.len() != self.input_dim() {
            return Err(AgentError::DimensionMismatch { expected: self.input_dim(), got: feature.len() });
        }
        Ok(self.net.forward(feature))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AgentError> {
        write_checkpoint(
            path,
            &Checkpoint { kind: CheckpointKind::Agent(self.strategy), net: self.net.clone() },
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AgentError> {
        match read_checkpoint(path)? {
            Checkpoint { kind: CheckpointKind::Agent(s), net } => Self::new(s, net),
            Checkpoint { kind: CheckpointKind::Controller, .. } => {
                Err(AgentError::BadCheckpoint("expected an agent checkpoint, found a controller".into()))
            }
        }
    }
}

impl SkipPolicy for QPolicy {
    fn input_dim(&self) -> Option<usize> {
        Some(self.net.input_dim())
    }

    fn choose(&self, feature: &[f32]) -> usize {
        argmax(&self.net.forward(feature)) + 1
    }
}

/// Index of the largest value; the smallest index wins ties.
pub(crate) fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One trained policy per pace.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySet {
    pub slow: QPolicy,
    pub normal: QPolicy,
    pub fast: QPolicy,
}

impl PolicySet {
    pub fn new(slow: QPolicy, normal: QPolicy, fast: QPolicy) -> Result<Self, AgentError> {
        for (expected, p) in [(Strategy::Slow, &slow), (Strategy::Normal, &normal), (Strategy::Fast, &fast)] {
            if p.strategy() != expected {
                return Err(AgentError::BadCheckpoint(format!(
                    "expected a {expected} policy, found {}",
                    p.strategy()
                )));
            }
        }
        if slow.input_dim() != normal.input_dim() || normal.input_dim() != fast.input_dim() {
            return Err(AgentError::BadCheckpoint("policies disagree on input dimension".into()));
        }
        Ok(Self { slow, normal, fast })
    }

    pub fn get(&self, strategy: Strategy) -> &QPolicy {
        match strategy {
            Strategy::Slow => &self.slow,
            Strategy::Normal => &self.normal,
            Strategy::Fast => &self.fast,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.normal.input_dim()
    }

    pub fn file_name(strategy: Strategy) -> String {
        format!("{}.ffwq", strategy.name())
    }

    /// Writes `slow.ffwq`, `normal.ffwq` and `fast.ffwq` into `dir`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<(), AgentError> {
        fs::create_dir_all(dir.as_ref())?;
        for s in Strategy::ALL {
            self.get(s).save(dir.as_ref().join(Self::file_name(s)))?;
        }
        Ok(())
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, AgentError> {
        let load = |s: Strategy| QPolicy::load(dir.as_ref().join(Self::file_name(s)));
        Self::new(load(Strategy::Slow)?, load(Strategy::Normal)?, load(Strategy::Fast)?)
    }
}

impl PolicyBank for PolicySet {
    fn policy(&self, strategy: Strategy) -> &dyn SkipPolicy {
        self.get(strategy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let policy = QPolicy::new(Strategy::Fast, Mlp::new(&[6, 10, 8, 35], &mut rng)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fast.ffwq");
        policy.save(&path).unwrap();
        assert_eq!(QPolicy::load(&path).unwrap(), policy);
    }

    #[test]
    fn checkpoint_header_layout() {
        let ckpt = Checkpoint { kind: CheckpointKind::Agent(Strategy::Normal), net: Mlp::zeros(&[2, 3, 25]) };
        let bytes = ckpt.to_bytes();
        assert_eq!(&bytes[..4], b"FFWQ");
        assert_eq!(&bytes[4..6], &1u16.to_le_bytes());
        assert_eq!(bytes[6], 1);
        assert_eq!(bytes[7], 2);
        assert_eq!(&bytes[8..12], &3u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        let expected = 8 + (8 + 4 * (3 * 2 + 3)) + (8 + 4 * (25 * 3 + 25));
        assert_eq!(bytes.len(), expected);
    }

    #[test]
    fn rejects_wrong_output_width() {
        assert!(QPolicy::new(Strategy::Slow, Mlp::zeros(&[4, 8, 25])).is_err());
    }

    #[test]
    fn q_values_dimension_mismatch() {
        let p = QPolicy::new(Strategy::Slow, Mlp::zeros(&[4, 8, 15])).unwrap();
        assert!(matches!(
            p.q_values(&[0.0; 3]),
            Err(AgentError::DimensionMismatch { expected: 4, got: 3 })
        ));
        assert_eq!(p.q_values(&[1.0; 4]).unwrap(), vec![0.0; 15]);
    }

    #[test]
    fn argmax_prefers_smallest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0; 5]), 0);
    }

    #[test]
    fn truncated_checkpoint_rejected() {
        let bytes = Checkpoint { kind: CheckpointKind::Controller, net: Mlp::zeros(&[2, 27]) }.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::from_bytes(&bytes).is_ok());
    }
}
