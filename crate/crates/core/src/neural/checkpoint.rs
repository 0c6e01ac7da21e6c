//! Checkpoints: a JSON manifest plus a raw little-endian `f64` weight file
//! laid out in manifest block order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{BnStats, Network};
use super::params::Block;
use super::{HyperParams, NeuralError, Topology, TrainConfig, TrainedModel};

pub const CHECKPOINT_FORMAT: &str = "sharpecast-checkpoint-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub topology: Topology,
    pub train_config: TrainConfig,
    pub hyper_params: Option<HyperParams>,
    pub seed: u64,
    /// Relative to the manifest's directory.
    pub weights_file: String,
    pub n_weights: usize,
    pub blocks: Vec<Block>,
    pub bn_running: Vec<BnStats>,
}

/// Writes `manifest_path` and a sibling `.weights` file.
pub fn save_checkpoint(model: &TrainedModel, manifest_path: &Path) -> Result<(), NeuralError> {
    let weights_path = manifest_path.with_extension("weights");
    let weights_file = weights_path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| NeuralError::Checkpoint(format!("bad path {}", manifest_path.display())))?
        .to_string();
    let net = &model.network;
    let manifest = CheckpointManifest {
        format: CHECKPOINT_FORMAT.into(),
        topology: net.topology.clone(),
        train_config: model.config,
        hyper_params: model.hyper_params.clone(),
        seed: model.seed,
        weights_file,
        n_weights: net.params.len(),
        blocks: net.layout.blocks.clone(),
        bn_running: net.bn_running.clone(),
    };
    let bytes: Vec<u8> = net.params.iter().flat_map(|w| w.to_le_bytes()).collect();
    fs::write(&weights_path, bytes)?;
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    fs::write(manifest_path, json + "\n")?;
    Ok(())
}

pub fn load_checkpoint(manifest_path: &Path) -> Result<TrainedModel, NeuralError> {
    let text = fs::read_to_string(manifest_path)?;
    let m: CheckpointManifest = serde_json::from_str(&text).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    if m.format != CHECKPOINT_FORMAT {
        return Err(NeuralError::Checkpoint(format!("unknown format `{}`", m.format)));
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let bytes = fs::read(dir.join(&m.weights_file))?;
    if bytes.len() != m.n_weights * 8 {
        return Err(NeuralError::Checkpoint(format!("expected {} bytes of weights, found {}", m.n_weights * 8, bytes.len())));
    }
    let params: Vec<f64> =
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    let network = Network::from_parts(m.topology, params, m.bn_running)?;
    if network.layout.blocks != m.blocks {
        return Err(NeuralError::Checkpoint("block layout does not match the topology".into()));
    }
    Ok(TrainedModel { network, config: m.train_config, hyper_params: m.hyper_params, seed: m.seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{train_with, Activation, CellKind};
    use crate::preprocess::WindowedDataset;
    use ndarray::{s, Array2, Array3};

    #[test]
    fn roundtrip_preserves_predictions() {
        let topology = Topology {
            n_series: 2,
            input_len: 4,
            horizon: 2,
            cell: CellKind::Lstm,
            n_layers: 2,
            units: 4,
            activation: Activation::Tanh,
            use_batchnorm: true,
            bn_before_dropout: true,
            dropout_input: 0.0,
            dropout_hidden: 0.2,
        };
        let ds = WindowedDataset {
            inputs: Array3::from_shape_fn((6, 4, 2), |(a, b, c)| ((a + 2 * b + 3 * c) as f64).sin()),
            targets: Array2::from_shape_fn((6, 4), |(a, b)| ((a * b) as f64).cos()),
            input_len: 4,
            horizon: 2,
        };
        let cfg = TrainConfig { learning_rate: 0.01, batch_size: 3, epochs: 2, weight_decay: 0.0 };
        let (model, _) = train_with(&ds, topology, cfg, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_checkpoint(&model, &path).unwrap();
        assert_eq!(fs::metadata(dir.path().join("model.weights")).unwrap().len() as usize, model.network.n_params() * 8);
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, model);
        let w = ds.inputs.slice(s![2, .., ..]);
        assert_eq!(back.predict(w).unwrap(), model.predict(w).unwrap());

        fs::write(dir.path().join("model.weights"), [0u8; 8]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(NeuralError::Checkpoint(_))));
    }
}
