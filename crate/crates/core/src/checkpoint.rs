//! Versioned JSON snapshot of a training run. Floats are written in
//! shortest round-trip form, so a save/load cycle is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dfa::{FeedbackMatrices, NetworkParams, TrainConfig, Trainer};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to continue the shuffle sequence: per-epoch orders
/// are derived from the run seed and the epoch index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub epochs_completed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub train: TrainConfig,
    pub rng: RngState,
    pub params: NetworkParams,
    pub feedback: FeedbackMatrices,
}

impl Checkpoint {
    pub fn from_trainer(trainer: &Trainer) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            train: *trainer.config(),
            rng: RngState {
                seed: trainer.config().seed,
                epochs_completed: trainer.epochs_completed(),
            },
            params: trainer.params().clone(),
            feedback: trainer.feedback().clone(),
        }
    }

    pub fn into_trainer(self) -> Result<Trainer> {
        Trainer::resume(self.params, self.feedback, self.train, self.rng.epochs_completed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialises")
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let ck: Self = serde_json::from_str(text).map_err(|source| Error::Json { path: path.into(), source })?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::format(
                path,
                format!("checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})", ck.version),
            ));
        }
        ck.feedback.check_against(&ck.params)?;
        NetworkParams::new(ck.params.layers().to_vec())?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfa::LayerSpec;

    fn sample() -> Checkpoint {
        let specs = LayerSpec::chain(&[5, 4, 3]).unwrap();
        let mut params = NetworkParams::init(&specs, 1).unwrap();
        params.layers_mut()[0].biases[1] = -0.0;
        params.layers_mut()[1].biases[0] = 1e-300;
        params.layers_mut()[1].biases[2] = 0.1 + 0.2;
        let feedback = FeedbackMatrices::generate(&specs, 2, 1.0).unwrap();
        let trainer = Trainer::resume(params, feedback, TrainConfig::default(), 3).unwrap();
        Checkpoint::from_trainer(&trainer)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let ck = sample();
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        let bits = |c: &Checkpoint| -> Vec<u64> {
            c.params
                .layers()
                .iter()
                .flat_map(|l| l.weights.as_slice().iter().chain(&l.biases))
                .chain(c.feedback.matrices.iter().flat_map(|m| m.as_slice()))
                .map(|v| v.to_bits())
                .collect()
        };
        assert_eq!(bits(&ck), bits(&back));
        assert_eq!(back, ck);
        assert_eq!(back.rng.epochs_completed, 3);
        assert_eq!(back.to_json(), ck.to_json());
    }

    #[test]
    fn rejects_wrong_version_and_garbage() {
        let mut ck = sample();
        ck.version = 99;
        let err = Checkpoint::from_json(&ck.to_json(), Path::new("x.json")).unwrap_err();
        assert!(err.to_string().contains("version 99"));
        assert!(Checkpoint::from_json("{", Path::new("x.json")).is_err());
    }
}
