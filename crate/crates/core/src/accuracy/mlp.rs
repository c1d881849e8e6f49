//! Small fully connected regressor `(K^3+3) -> 32 -> 16 -> 1` trained with
//! minibatch SGD on squared error. Hidden layers use ReLU and the output is
//! logistic, so every prediction lies in `(0, 1)`.
//!
//! Inputs are standardized with per-feature mean and scale captured from the
//! training data; the statistics are stored in the model and persisted with it.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HIDDEN_SIZES: [usize; 2] = [32, 16];

const BIN_MAGIC: &[u8; 8] = b"CSMLP\0v1";

// keeps the shuffle stream distinct from the initialization stream
const SHUFFLE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`, row-major.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn glorot(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.gen_range(-limit..=limit))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            biases: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let s: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out.push(s + self.biases[o]);
        }
    }

    fn n_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub layers: Vec<DenseLayer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-2,
            seed: 7,
        }
    }
}

/// Input features and target for one labelled instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub features: Vec<f64>,
    pub label: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases, identity standardization.
    pub fn new(input_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![input_dim];
        sizes.extend(HIDDEN_SIZES);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| DenseLayer::glorot(w[0], w[1], &mut rng))
            .collect();
        Self {
            input_mean: vec![0.0; input_dim],
            input_scale: vec![1.0; input_dim],
            layers,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    /// Sets standardization from data: mean and 1/std per feature
    /// (unit scale for constant features).
    pub fn fit_standardization(&mut self, data: &[TrainingSample]) {
        let d = self.input_dim();
        let n = data.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for s in data {
            for (m, v) in mean.iter_mut().zip(&s.features) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for s in data {
            for ((v, m), x) in var.iter_mut().zip(&mean).zip(&s.features) {
                *v += (x - m) * (x - m) / n;
            }
        }
        self.input_mean = mean;
        self.input_scale = var
            .iter()
            .map(|v| if *v > 1e-12 { 1.0 / v.sqrt() } else { 1.0 })
            .collect();
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.input_mean)
            .zip(&self.input_scale)
            .map(|((v, m), s)| (v - m) * s)
            .collect()
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: features.len(),
            });
        }
        Ok(self.forward(features).last().unwrap()[0])
    }

    /// Activations of every layer, post-nonlinearity; the first entry is the
    /// standardized input.
    fn forward(&self, features: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(self.standardize(features));
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.forward(acts.last().unwrap(), &mut z);
            if i == last {
                z.iter_mut().for_each(|v| *v = sigmoid(*v));
            } else {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::n_params).sum()
    }

    /// All trainable parameters, layer by layer: weights (row-major) then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(&l.weights);
            out.extend(&l.biases);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: params.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Mean squared error over `batch` and its gradient with respect to
    /// [`parameters`](Self::parameters), in the same order.
    pub fn loss_and_gradient(&self, batch: &[TrainingSample]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::EmptyData);
        }
        let n = batch.len() as f64;
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]))
            .collect();
        let mut loss = 0.0;
        let last = self.layers.len() - 1;
        for s in batch {
            if s.features.len() != self.input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.input_dim(),
                    got: s.features.len(),
                });
            }
            let acts = self.forward(&s.features);
            let y = acts[last + 1][0];
            let err = y - s.label;
            loss += err * err / n;

            // delta = dL/dz for the current layer
            let mut delta = vec![2.0 * err / n * y * (1.0 - y)];
            for li in (0..=last).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let (gw, gb) = &mut grads[li];
                for o in 0..layer.outputs {
                    gb[o] += delta[o];
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, x) in row.iter_mut().zip(input) {
                        *g += delta[o] * x;
                    }
                }
                if li > 0 {
                    let mut prev = vec![0.0; layer.inputs];
                    for o in 0..layer.outputs {
                        let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                        for (p, w) in prev.iter_mut().zip(row) {
                            *p += delta[o] * w;
                        }
                    }
                    // ReLU derivative from the stored activation
                    for (p, a) in prev.iter_mut().zip(input) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        let mut flat = Vec::with_capacity(self.n_params());
        for (gw, gb) in grads {
            flat.extend(gw);
            flat.extend(gb);
        }
        Ok((loss, flat))
    }

    pub fn mse(&self, data: &[TrainingSample]) -> Result<f64> {
        Ok(eval_metrics(self, data)?.mse)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        m.check_shapes()?;
        Ok(m)
    }

    /// Little-endian binary layout:
    ///
    /// ```text
    /// magic      8 bytes  "CSMLP\0v1"
    /// input_dim  u32
    /// mean       f64 x input_dim
    /// scale      f64 x input_dim
    /// n_layers   u32
    /// per layer: inputs u32, outputs u32,
    ///            weights f64 x (outputs*inputs) row-major, biases f64 x outputs
    /// ```
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(BIN_MAGIC);
        out.extend((self.input_dim() as u32).to_le_bytes());
        for v in self.input_mean.iter().chain(&self.input_scale) {
            out.extend(v.to_le_bytes());
        }
        out.extend((self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            out.extend((l.inputs as u32).to_le_bytes());
            out.extend((l.outputs as u32).to_le_bytes());
            for v in l.weights.iter().chain(&l.biases) {
                out.extend(v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let fmt = |m: &str| Error::ModelFormat(m.to_string());
        let mut magic = [0u8; 8];
        bytes.read_exact(&mut magic).map_err(|_| fmt("truncated header"))?;
        if &magic != BIN_MAGIC {
            return Err(fmt("bad magic"));
        }
        let read_u32 = |b: &mut &[u8]| -> Result<usize> {
            let mut buf = [0u8; 4];
            b.read_exact(&mut buf).map_err(|_| fmt("truncated"))?;
            Ok(u32::from_le_bytes(buf) as usize)
        };
        let read_f64s = |b: &mut &[u8], n: usize| -> Result<Vec<f64>> {
            if n > b.len() / 8 {
                return Err(Error::ModelFormat("truncated".into()));
            }
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                let mut buf = [0u8; 8];
                b.read_exact(&mut buf)
                    .map_err(|_| Error::ModelFormat("truncated".into()))?;
                v.push(f64::from_le_bytes(buf));
            }
            Ok(v)
        };
        let d = read_u32(&mut bytes)?;
        let input_mean = read_f64s(&mut bytes, d)?;
        let input_scale = read_f64s(&mut bytes, d)?;
        let nl = read_u32(&mut bytes)?;
        let mut layers = Vec::with_capacity(nl);
        for _ in 0..nl {
            let inputs = read_u32(&mut bytes)?;
            let outputs = read_u32(&mut bytes)?;
            let weights = read_f64s(&mut bytes, inputs * outputs)?;
            let biases = read_f64s(&mut bytes, outputs)?;
            layers.push(DenseLayer {
                inputs,
                outputs,
                weights,
                biases,
            });
        }
        if !bytes.is_empty() {
            return Err(fmt("trailing bytes"));
        }
        let m = Self {
            input_mean,
            input_scale,
            layers,
        };
        m.check_shapes()?;
        Ok(m)
    }

    pub fn save_bin(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load_bin(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    fn check_shapes(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ModelFormat(m));
        if self.layers.is_empty() {
            return bad("no layers".into());
        }
        let d = self.layers[0].inputs;
        if self.input_mean.len() != d || self.input_scale.len() != d {
            return bad("standardization length differs from input size".into());
        }
        let mut prev = d;
        for (i, l) in self.layers.iter().enumerate() {
            if l.inputs != prev
                || l.weights.len() != l.inputs * l.outputs
                || l.biases.len() != l.outputs
            {
                return bad(format!("layer {i} has inconsistent shape"));
            }
            prev = l.outputs;
        }
        if prev != 1 {
            return bad("output size must be 1".into());
        }
        let finite = self
            .parameters()
            .iter()
            .chain(&self.input_mean)
            .chain(&self.input_scale)
            .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite parameter".into());
        }
        Ok(())
    }
}

/// Trains a fresh model; returns the parameters with the lowest training MSE
/// seen at any epoch boundary (the initial model included).
pub fn train_mlp(data: &[TrainingSample], cfg: &TrainConfig) -> Result<MlpModel> {
    Ok(train_mlp_with_history(data, cfg)?.0)
}

/// Like [`train_mlp`], also returning training MSE before the first epoch and
/// after each epoch.
pub fn train_mlp_with_history(
    data: &[TrainingSample],
    cfg: &TrainConfig,
) -> Result<(MlpModel, Vec<f64>)> {
    let first = data.first().ok_or(Error::EmptyData)?;
    let dim = first.features.len();
    if let Some(bad) = data.iter().find(|s| s.features.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.features.len(),
        });
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::param("train", "batch_size and learning_rate must be positive"));
    }

    let mut model = MlpModel::new(dim, cfg.seed);
    model.fit_standardization(data);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_SALT);
    let mut order: Vec<usize> = (0..data.len()).collect();

    let mut history = vec![model.mse(data)?];
    let mut best = (history[0], model.clone());
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i].clone()));
            let (_, grad) = model.loss_and_gradient(&batch)?;
            let mut params = model.parameters();
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
            model.set_parameters(&params)?;
        }
        let mse = model.mse(data)?;
        history.push(mse);
        if mse < best.0 {
            best = (mse, model.clone());
        }
    }
    Ok((best.1, history))
}


#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub mse: f64,
    pub mae: f64,
    /// Variance of the absolute error around `mae`.
    pub vae: f64,
}

/// MSE, MAE and VAE of a list of signed errors.
pub fn error_metrics(errors: &[f64]) -> Result<ErrorMetrics> {
    if errors.is_empty() {
        return Err(Error::EmptyData);
    }
    let n = errors.len() as f64;
    let mse = errors.iter().map(|e| e * e).sum::<f64>() / n;
    let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
    let vae = errors.iter().map(|e| (e.abs() - mae).powi(2)).sum::<f64>() / n;
    Ok(ErrorMetrics { mse, mae, vae })
}

pub fn eval_metrics(model: &MlpModel, data: &[TrainingSample]) -> Result<ErrorMetrics> {
    let errors = data
        .iter()
        .map(|s| Ok(model.predict(&s.features)? - s.label))
        .collect::<Result<Vec<_>>>()?;
    error_metrics(&errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_samples(n: usize, dim: usize, seed: u64) -> Vec<TrainingSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let features: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..20.0)).collect();
                let label = (features.iter().sum::<f64>() / (10.0 * dim as f64)).min(1.0);
                TrainingSample { features, label }
            })
            .collect()
    }

    #[test]
    fn metric_examples() {
        assert_eq!(
            error_metrics(&[0.0, 0.0]).unwrap(),
            ErrorMetrics { mse: 0.0, mae: 0.0, vae: 0.0 }
        );
        let m = error_metrics(&[0.1, -0.1]).unwrap();
        assert!((m.mse - 0.01).abs() < 1e-15 && (m.mae - 0.1).abs() < 1e-15 && m.vae.abs() < 1e-15);
        let m = error_metrics(&[0.0, 0.2]).unwrap();
        assert!((m.mse - 0.02).abs() < 1e-15);
        assert!((m.mae - 0.1).abs() < 1e-15);
        assert!((m.vae - 0.01).abs() < 1e-15);
        assert!(matches!(error_metrics(&[]), Err(Error::EmptyData)));
    }

    #[test]
    fn output_is_a_probability() {
        let m = MlpModel::new(11, 3);
        for x in [0.0, 1.0, 1e3, -1e3, 1e6] {
            let y = m.predict(&[x; 11]).unwrap();
            assert!((0.0..=1.0).contains(&y));
        }
        assert!(matches!(m.predict(&[0.0; 10]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_epochs_is_initial_model() {
        let data = random_samples(20, 5, 1);
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let trained = train_mlp(&data, &cfg).unwrap();
        let mut init = MlpModel::new(5, cfg.seed);
        init.fit_standardization(&data);
        assert_eq!(trained, init);
    }

    #[test]
    fn constant_labels_are_learned() {
        let data: Vec<_> = random_samples(200, 6, 2)
            .into_iter()
            .map(|s| TrainingSample { label: 0.5, ..s })
            .collect();
        let cfg = TrainConfig { epochs: 500, learning_rate: 0.1, ..TrainConfig::default() };
        // the default 200 epochs at 1e-2 leave a few inputs up to 0.06 away
        let m = train_mlp(&data, &cfg).unwrap();
        for s in &data {
            assert!((m.predict(&s.features).unwrap() - 0.5).abs() <= 0.05);
        }
    }

    #[test]
    fn training_loss_does_not_increase() {
        let data = random_samples(100, 8, 4);
        let (model, history) = train_mlp_with_history(&data, &TrainConfig::default()).unwrap();
        assert_eq!(history.len(), 201);
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "{} -> {}", w[0], w[1]);
        }
        assert!(model.mse(&data).unwrap() <= history[0]);
    }

    #[test]
    fn training_rejects_bad_input() {
        let mut data = random_samples(4, 3, 0);
        data[2].features.push(1.0);
        assert!(matches!(
            train_mlp(&data, &TrainConfig::default()),
            Err(Error::DimensionMismatch { expected: 3, got: 4 })
        ));
        assert!(matches!(train_mlp(&[], &TrainConfig::default()), Err(Error::EmptyData)));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = random_samples(8, 7, 9);
        let mut m = MlpModel::new(7, 5);
        m.fit_standardization(&data);
        let (_, grad) = m.loss_and_gradient(&data).unwrap();
        let base = m.parameters();
        let h = 1e-5;
        for (i, g) in grad.iter().enumerate() {
            let mut p = base.clone();
            p[i] += h;
            m.set_parameters(&p).unwrap();
            let up = m.loss_and_gradient(&data).unwrap().0;
            p[i] -= 2.0 * h;
            m.set_parameters(&p).unwrap();
            let down = m.loss_and_gradient(&data).unwrap().0;
            let fd = (up - down) / (2.0 * h);
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-7);
            assert!(rel <= 1e-4, "param {i}: analytic {g} numeric {fd}");
        }
    }

    #[test]
    fn persistence_round_trips() {
        let data = random_samples(10, 4, 6);
        let m = train_mlp(&data, &TrainConfig { epochs: 3, ..TrainConfig::default() }).unwrap();
        assert_eq!(MlpModel::from_bytes(&m.to_bytes()).unwrap(), m);
        let dir = tempfile::tempdir().unwrap();
        m.save_bin(&dir.path().join("m.bin")).unwrap();
        m.save_json(&dir.path().join("m.json")).unwrap();
        assert_eq!(MlpModel::load_bin(&dir.path().join("m.bin")).unwrap(), m);
        assert_eq!(MlpModel::load_json(&dir.path().join("m.json")).unwrap(), m);
        let bytes = m.to_bytes();
        assert!(MlpModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(MlpModel::from_bytes(b"nonsense").is_err());
        // magic, input size, then the first standardization mean
        assert_eq!(&bytes[..8], BIN_MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(bytes[12..20].try_into().unwrap()), m.input_mean[0]);
    }
}
