use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelParams, NnError, TrainConfig, NUM_CLASSES};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// On-disk form of a trained model (`model.json`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub hidden_size: usize,
    #[serde(rename = "W1")]
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    #[serde(rename = "W2")]
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
    pub config: TrainConfig,
    /// Path of the normalization stats the inputs were scaled with.
    pub norm_stats_ref: String,
    pub train_history: Vec<EpochRecord>,
}

impl Checkpoint {
    pub fn new(params: &ModelParams, config: TrainConfig, norm_stats_ref: impl Into<String>, history: Vec<EpochRecord>) -> Self {
        let rows = |flat: &[f64], width: usize| flat.chunks(width).map(<[f64]>::to_vec).collect();
        Self {
            hidden_size: params.hidden_size,
            w1: rows(&params.w1, params.input_size),
            b1: params.b1.clone(),
            w2: rows(&params.w2, params.hidden_size),
            b2: params.b2.clone(),
            config,
            norm_stats_ref: norm_stats_ref.into(),
            train_history: history,
        }
    }

    /// Rebuilds the parameter tensors, checking every shape.
    pub fn params(&self) -> Result<ModelParams, NnError> {
        let h = self.hidden_size;
        let input_size = self.w1.first().map_or(0, Vec::len);
        let shape_err = |m: &str| NnError::Checkpoint(format!("{m} (hidden_size {h}, input {input_size})"));
        if self.w1.len() != h || self.w1.iter().any(|r| r.len() != input_size) {
            return Err(shape_err("W1 is not hidden_size rows of equal length"));
        }
        if self.w2.len() != NUM_CLASSES || self.w2.iter().any(|r| r.len() != h) {
            return Err(shape_err("W2 is not 2 rows of hidden_size"));
        }
        let p = ModelParams {
            input_size,
            hidden_size: h,
            w1: self.w1.concat(),
            b1: self.b1.clone(),
            w2: self.w2.concat(),
            b2: self.b2.clone(),
        };
        p.validate().map_err(|e| NnError::Checkpoint(e.to_string()))?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(w, self).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text = fs::read_to_string(path)?;
        let cp: Self = serde_json::from_str(&text).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
        cp.params()?;
        Ok(cp)
    }
}

/// Writes `epoch,train_loss,val_loss` rows.
pub fn write_curves(path: &Path, history: &[EpochRecord]) -> Result<(), NnError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    for r in history {
        w.serialize(r).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history() -> Vec<EpochRecord> {
        vec![
            EpochRecord { epoch: 0, train_loss: 0.7, val_loss: 0.71 },
            EpochRecord { epoch: 1, train_loss: 0.52, val_loss: 0.6 },
        ]
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m/model.json");
        let params = ModelParams::init(6, 3, 11);
        let cp = Checkpoint::new(&params, TrainConfig::default(), "stats.json", history());
        cp.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, cp);
        assert_eq!(back.params().unwrap(), params);
    }

    #[test]
    fn documented_keys_present() {
        let cp = Checkpoint::new(&ModelParams::zeros(2, 2), TrainConfig::default(), "s", history());
        let v = serde_json::to_value(&cp).unwrap();
        for key in ["hidden_size", "W1", "b1", "W2", "b2", "config", "norm_stats_ref", "train_history"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["W1"].as_array().unwrap().len(), 2);
        assert_eq!(v["train_history"][1]["val_loss"], 0.6);
    }

    #[test]
    fn inconsistent_shapes_rejected() {
        let mut cp = Checkpoint::new(&ModelParams::zeros(3, 2), TrainConfig::default(), "s", vec![]);
        cp.w1[1].pop();
        assert!(matches!(cp.params(), Err(NnError::Checkpoint(_))));
        let mut cp = Checkpoint::new(&ModelParams::zeros(3, 2), TrainConfig::default(), "s", vec![]);
        cp.hidden_size = 3;
        assert!(cp.params().is_err());
    }

    #[test]
    fn curves_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        write_curves(&path, &history()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "epoch,train_loss,val_loss\n0,0.7,0.71\n1,0.52,0.6\n");
    }
}
