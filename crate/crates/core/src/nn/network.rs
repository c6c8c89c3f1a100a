use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelParams, NnError, NUM_CLASSES};

/// Where the output-layer dropout rate is applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputDropoutSite {
    /// Mask the two logits before the softmax.
    #[default]
    Logits,
    /// Apply a second mask to the hidden activations as they leave the
    /// hidden layer, before the output weights.
    HiddenOutput,
}

/// Drop rates (not keep rates) for the three dropout sites.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dropout {
    pub input: f64,
    pub hidden: f64,
    pub output: f64,
    #[serde(default)]
    pub output_site: OutputDropoutSite,
}

impl Default for Dropout {
    fn default() -> Self {
        Self { input: 0.5, hidden: 0.45, output: 0.3, output_site: OutputDropoutSite::Logits }
    }
}

impl Dropout {
    pub const NONE: Dropout = Dropout { input: 0.0, hidden: 0.0, output: 0.0, output_site: OutputDropoutSite::Logits };

    pub fn validate(&self) -> Result<(), NnError> {
        for (name, r) in [("input", self.input), ("hidden", self.hidden), ("output", self.output)] {
            if !(0.0..1.0).contains(&r) {
                return Err(NnError::Config(format!("{name} dropout rate {r} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

pub enum Mode<'a> {
    Eval,
    Train { dropout: &'a Dropout, rng: &'a mut ChaCha8Rng },
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input after dropout.
    input: Vec<f64>,
    /// Hidden pre-activations.
    pre: Vec<f64>,
    /// Per hidden unit: product of all dropout scales applied to it.
    hidden_scale: Vec<f64>,
    /// Hidden values seen by the output weights.
    hidden: Vec<f64>,
    logit_scale: [f64; NUM_CLASSES],
    logits: [f64; NUM_CLASSES],
    pub probs: [f64; NUM_CLASSES],
}

// Inverted dropout factor: 0 with probability `rate`, else 1 / (1 - rate).
fn mask(rate: f64, rng: &mut ChaCha8Rng) -> f64 {
    if rate == 0.0 {
        return 1.0;
    }
    let keep = 1.0 - rate;
    if rng.gen::<f64>() < keep {
        1.0 / keep
    } else {
        0.0
    }
}

fn check_input(params: &ModelParams, x: &[f32]) -> Result<(), NnError> {
    if x.len() != params.input_size {
        return Err(NnError::Shape(format!("input of length {} (expected {})", x.len(), params.input_size)));
    }
    Ok(())
}

/// Runs the network on one example.
///
/// Eval mode applies no masks and touches no state, so repeated calls agree
/// bit for bit.
pub fn forward(params: &ModelParams, x: &[f32], mode: Mode<'_>) -> Result<([f64; NUM_CLASSES], ForwardCache), NnError> {
    check_input(params, x)?;
    let (n_in, n_hid) = (params.input_size, params.hidden_size);
    let mut input: Vec<f64> = x.iter().map(|v| f64::from(*v)).collect();
    let mut hidden_scale = vec![1.0; n_hid];
    let mut logit_scale = [1.0; NUM_CLASSES];

    let mut rng_dropout = match mode {
        Mode::Eval => None,
        Mode::Train { dropout, rng } => Some((dropout, rng)),
    };
    if let Some((d, rng)) = rng_dropout.as_mut() {
        input.iter_mut().for_each(|v| *v *= mask(d.input, rng));
        for s in hidden_scale.iter_mut() {
            *s = mask(d.hidden, rng);
            if d.output_site == OutputDropoutSite::HiddenOutput {
                *s *= mask(d.output, rng);
            }
        }
        if d.output_site == OutputDropoutSite::Logits {
            logit_scale.iter_mut().for_each(|s| *s = mask(d.output, rng));
        }
    }

    let mut pre = params.b1.clone();
    for (i, z) in pre.iter_mut().enumerate() {
        let row = &params.w1[i * n_in..(i + 1) * n_in];
        *z += row.iter().zip(&input).map(|(w, v)| w * v).sum::<f64>();
    }
    let hidden: Vec<f64> = pre.iter().zip(&hidden_scale).map(|(z, s)| z.max(0.0) * s).collect();

    let mut logits = [0.0; NUM_CLASSES];
    for (k, l) in logits.iter_mut().enumerate() {
        let row = &params.w2[k * n_hid..(k + 1) * n_hid];
        *l = (params.b2[k] + row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>()) * logit_scale[k];
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(NnError::NonFinite("logit"));
    }
    let probs = softmax(logits);
    Ok((probs, ForwardCache { input, pre, hidden_scale, hidden, logit_scale, logits, probs }))
}

fn softmax(logits: [f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp = logits.map(|l| (l - max).exp());
    let sum: f64 = exp.iter().sum();
    exp.map(|e| e / sum)
}

// -ln p[class] = softplus(other logit - own logit), stable at both extremes.
fn cross_entropy(logits: &[f64; NUM_CLASSES], class: usize) -> f64 {
    let d = logits[1 - class] - logits[class];
    if d > 0.0 {
        d + (-d).exp().ln_1p()
    } else {
        d.exp().ln_1p()
    }
}

/// Accumulates `weight * d(-ln p[class])/dθ` into `grads`.
fn backward(params: &ModelParams, cache: &ForwardCache, class: usize, weight: f64, grads: &mut ModelParams) {
    let (n_in, n_hid) = (params.input_size, params.hidden_size);
    let mut d_logit = [0.0; NUM_CLASSES];
    for k in 0..NUM_CLASSES {
        let target = if k == class { 1.0 } else { 0.0 };
        d_logit[k] = (cache.probs[k] - target) * cache.logit_scale[k] * weight;
    }

    let mut d_hidden = vec![0.0; n_hid];
    for k in 0..NUM_CLASSES {
        grads.b2[k] += d_logit[k];
        let w_row = &params.w2[k * n_hid..(k + 1) * n_hid];
        let g_row = &mut grads.w2[k * n_hid..(k + 1) * n_hid];
        for i in 0..n_hid {
            g_row[i] += d_logit[k] * cache.hidden[i];
            d_hidden[i] += d_logit[k] * w_row[i];
        }
    }

    for i in 0..n_hid {
        if cache.pre[i] <= 0.0 || cache.hidden_scale[i] == 0.0 {
            continue;
        }
        let dz = d_hidden[i] * cache.hidden_scale[i];
        grads.b1[i] += dz;
        let g_row = &mut grads.w1[i * n_in..(i + 1) * n_in];
        for (g, v) in g_row.iter_mut().zip(&cache.input) {
            *g += dz * v;
        }
    }
}

/// Mean cross-entropy over a batch and its gradient.
///
/// `dropout = None` disables every mask (and consumes no randomness).
/// Backpropagation reuses the masks drawn in each example's forward pass.
pub fn loss_and_grads(
    params: &ModelParams,
    batch: &[(&[f32], usize)],
    dropout: Option<&Dropout>,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, ModelParams), NnError> {
    if batch.is_empty() {
        return Err(NnError::EmptyPartition("batch"));
    }
    let weight = 1.0 / batch.len() as f64;
    let mut grads = ModelParams::zeros(params.input_size, params.hidden_size);
    let mut loss = 0.0;
    for &(x, class) in batch {
        if class >= NUM_CLASSES {
            return Err(NnError::Shape(format!("class index {class} out of range")));
        }
        let mode = match dropout {
            Some(d) => Mode::Train { dropout: d, rng: &mut *rng },
            None => Mode::Eval,
        };
        let (_, cache) = forward(params, x, mode)?;
        loss += cross_entropy(&cache.logits, class) * weight;
        backward(params, &cache, class, weight, &mut grads);
    }
    Ok((loss, grads))
}

/// Mean eval-mode cross-entropy over labelled examples.
pub fn mean_loss<'a, I>(params: &ModelParams, examples: I) -> Result<f64, NnError>
where
    I: IntoIterator<Item = (&'a [f32], usize)>,
{
    let (mut sum, mut n) = (0.0, 0usize);
    for (x, class) in examples {
        let (_, cache) = forward(params, x, Mode::Eval)?;
        sum += cross_entropy(&cache.logits, class);
        n += 1;
    }
    if n == 0 {
        return Err(NnError::EmptyPartition("loss"));
    }
    Ok(sum / n as f64)
}
