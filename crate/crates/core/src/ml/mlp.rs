//! Multi-layer perceptron with softmax output and cross-entropy loss,
//! trained by mini-batch Adam or SGD with optional early stopping on a
//! stratified validation holdout.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::ml::ParamMap;
use crate::rng::{derive_seed, seeded_rng};

pub const ADAM_LEARNING_RATE: f64 = 1e-2;
pub const SGD_LEARNING_RATE: f64 = 1e-3;
pub const MAX_EPOCHS: usize = 2000;
pub const EARLY_STOP_PATIENCE: usize = 50;
pub const PLATEAU_PATIENCE: usize = 10;
pub const LOSS_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Logistic,
    Tanh,
    Relu,
}

impl Activation {
    pub fn parse(s: &str) -> Result<Activation> {
        match s {
            "logistic" => Ok(Activation::Logistic),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidInput(format!("unknown activation {other:?}"))),
        }
    }

    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output a = act(z).
    fn derivative_from_output(&self, a: f64) -> f64 {
        match self {
            Activation::Logistic => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Solver {
    Adam,
    Sgd,
}

#[derive(Debug, Clone)]
pub struct MlpNet {
    /// Per layer: in x out weight matrix and out-sized bias.
    weights: Vec<Array2<f64>>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
}

struct Gradients {
    weights: Vec<Array2<f64>>,
    biases: Vec<Vec<f64>>,
}

impl MlpNet {
    /// Glorot-uniform initialized network: `hidden_layers` hidden layers of
    /// `hidden_nodes` units feeding a softmax layer over `n_classes`.
    pub fn new_random(
        d_in: usize,
        hidden_layers: usize,
        hidden_nodes: usize,
        n_classes: usize,
        activation: Activation,
        seed: u64,
    ) -> MlpNet {
        let mut sizes = vec![d_in];
        sizes.extend(std::iter::repeat(hidden_nodes).take(hidden_layers));
        sizes.push(n_classes);
        let mut rng = seeded_rng(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(Array2::from_shape_fn((fan_in, fan_out), |_| {
                rng.gen_range(-bound..bound)
            }));
            biases.push(vec![0.0; fan_out]);
        }
        MlpNet {
            weights,
            biases,
            activation,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.biases.last().map_or(0, |b| b.len())
    }

    /// Activations of every layer for a batch; last entry is the softmax.
    fn forward(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        let n_layers = self.weights.len();
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(n_layers + 1);
        acts.push(x.clone());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[l].dot(w);
            for mut row in z.rows_mut() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v += b[j];
                }
            }
            if l + 1 < n_layers {
                z.mapv_inplace(|v| self.activation.apply(v));
            } else {
                softmax_rows(&mut z);
            }
            acts.push(z);
        }
        acts
    }

    /// Mean cross-entropy plus L2 penalty alpha/(2m) * sum of squared weights.
    pub fn loss(&self, x: &Array2<f64>, y: &[usize], alpha: f64) -> f64 {
        let acts = self.forward(x);
        let probs = acts.last().unwrap();
        let m = x.nrows() as f64;
        let mut ce = 0.0;
        for (r, &cls) in y.iter().enumerate() {
            ce -= probs[[r, cls]].max(1e-12).ln();
        }
        let l2: f64 = self
            .weights
            .iter()
            .map(|w| w.iter().map(|v| v * v).sum::<f64>())
            .sum();
        ce / m + alpha * l2 / (2.0 * m)
    }

    fn loss_and_grad(&self, x: &Array2<f64>, y: &[usize], alpha: f64) -> (f64, Gradients) {
        let acts = self.forward(x);
        let probs = acts.last().unwrap();
        let m = x.nrows() as f64;
        let n_layers = self.weights.len();

        let mut ce = 0.0;
        for (r, &cls) in y.iter().enumerate() {
            ce -= probs[[r, cls]].max(1e-12).ln();
        }
        let l2: f64 = self
            .weights
            .iter()
            .map(|w| w.iter().map(|v| v * v).sum::<f64>())
            .sum();
        let loss = ce / m + alpha * l2 / (2.0 * m);

        // softmax + cross-entropy: delta = (p - onehot) / m
        let mut delta = probs.clone();
        for (r, &cls) in y.iter().enumerate() {
            delta[[r, cls]] -= 1.0;
        }
        delta.mapv_inplace(|v| v / m);

        let mut grad_w = vec![Array2::<f64>::zeros((0, 0)); n_layers];
        let mut grad_b = vec![Vec::new(); n_layers];
        for l in (0..n_layers).rev() {
            let a_prev = &acts[l];
            let mut gw = a_prev.t().dot(&delta);
            gw.scaled_add(alpha / m, &self.weights[l]);
            grad_b[l] = delta.sum_axis(ndarray::Axis(0)).to_vec();
            if l > 0 {
                let mut next = delta.dot(&self.weights[l].t());
                for (v, a) in next.iter_mut().zip(acts[l].iter()) {
                    *v *= self.activation.derivative_from_output(*a);
                }
                delta = next;
            }
            grad_w[l] = gw;
        }
        (
            loss,
            Gradients {
                weights: grad_w,
                biases: grad_b,
            },
        )
    }

    /// All parameters as one flat vector (weights then biases, layer order).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for w in &self.weights {
            out.extend(w.iter().copied());
        }
        for b in &self.biases {
            out.extend(b.iter().copied());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut cursor = 0usize;
        for w in &mut self.weights {
            for v in w.iter_mut() {
                *v = flat[cursor];
                cursor += 1;
            }
        }
        for b in &mut self.biases {
            for v in b.iter_mut() {
                *v = flat[cursor];
                cursor += 1;
            }
        }
        assert_eq!(cursor, flat.len());
    }

    /// Loss plus the full analytic gradient in [`flat_params`] layout.
    pub fn loss_and_gradients_flat(
        &self,
        x: &Array2<f64>,
        y: &[usize],
        alpha: f64,
    ) -> (f64, Vec<f64>) {
        let (loss, grads) = self.loss_and_grad(x, y, alpha);
        let mut flat = Vec::new();
        for w in &grads.weights {
            flat.extend(w.iter().copied());
        }
        for b in &grads.biases {
            flat.extend(b.iter().copied());
        }
        (loss, flat)
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let row = Array2::from_shape_fn((1, x.len()), |(_, c)| x[c]);
        let acts = self.forward(&row);
        let probs = acts.last().unwrap();
        let mut best = 0usize;
        for c in 1..probs.ncols() {
            if probs[[0, c]] > probs[[0, best]] {
                best = c;
            }
        }
        best
    }

    /// Trains a network from hyperparameters; deterministic in `seed`.
    pub fn fit(
        x: &Array2<f64>,
        y: &[usize],
        n_classes: usize,
        params: &ParamMap,
        seed: u64,
    ) -> Result<MlpNet> {
        let hidden_layers = params.get("hidden_layers").and_then(|v| v.as_usize()).unwrap();
        let hidden_nodes = params.get("hidden_nodes").and_then(|v| v.as_usize()).unwrap();
        let alpha = params.get("alpha").and_then(|v| v.as_f64()).unwrap();
        let activation = Activation::parse(params.get("activation").and_then(|v| v.as_str()).unwrap())?;
        let solver = match params.get("solver").and_then(|v| v.as_str()).unwrap() {
            "adam" => Solver::Adam,
            "sgd" => Solver::Sgd,
            other => return Err(Error::InvalidInput(format!("unknown solver {other:?}"))),
        };

        let mut net = MlpNet::new_random(
            x.ncols(),
            hidden_layers,
            hidden_nodes,
            n_classes,
            activation,
            derive_seed(seed, &[0]),
        );
        let mut rng = seeded_rng(derive_seed(seed, &[1]));

        // stratified 10% holdout for early stopping, when the data can spare it
        let (train_rows, val_rows) = holdout_split(y, n_classes, &mut rng);
        let use_early_stop = !val_rows.is_empty();

        let batch_size = 32.min(train_rows.len()).max(1);
        let mut adam = AdamState::new(&net);
        let mut order = train_rows.clone();

        let (xv, yv) = subset(x, y, &val_rows);
        let mut best_val = f64::INFINITY;
        let mut best_params: Option<Vec<f64>> = None;
        let mut patience = 0usize;
        let mut prev_train_loss = f64::INFINITY;
        let mut plateau = 0usize;

        for _epoch in 0..MAX_EPOCHS {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            let mut batches = 0usize;
            for chunk in order.chunks(batch_size) {
                let (xb, yb) = subset(x, y, chunk);
                let (loss, grads) = net.loss_and_grad(&xb, &yb, alpha);
                epoch_loss += loss;
                batches += 1;
                match solver {
                    Solver::Adam => adam.step(&mut net, &grads),
                    Solver::Sgd => {
                        for (w, g) in net.weights.iter_mut().zip(&grads.weights) {
                            w.scaled_add(-SGD_LEARNING_RATE, g);
                        }
                        for (b, g) in net.biases.iter_mut().zip(&grads.biases) {
                            for (v, gv) in b.iter_mut().zip(g) {
                                *v -= SGD_LEARNING_RATE * gv;
                            }
                        }
                    }
                }
            }
            epoch_loss /= batches.max(1) as f64;

            if use_early_stop {
                let val_loss = net.loss(&xv, &yv, alpha);
                if val_loss < best_val - LOSS_TOLERANCE {
                    best_val = val_loss;
                    best_params = Some(net.flat_params());
                    patience = 0;
                } else {
                    patience += 1;
                    if patience >= EARLY_STOP_PATIENCE {
                        break;
                    }
                }
            } else {
                if epoch_loss > prev_train_loss - LOSS_TOLERANCE {
                    plateau += 1;
                    if plateau >= PLATEAU_PATIENCE {
                        break;
                    }
                } else {
                    plateau = 0;
                }
                prev_train_loss = epoch_loss;
            }
        }
        if let Some(p) = best_params {
            net.set_flat_params(&p);
        }
        Ok(net)
    }
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.iter().cloned().fold(f64::MIN, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

fn subset(x: &Array2<f64>, y: &[usize], rows: &[usize]) -> (Array2<f64>, Vec<usize>) {
    let xb = Array2::from_shape_fn((rows.len(), x.ncols()), |(r, c)| x[[rows[r], c]]);
    let yb = rows.iter().map(|&r| y[r]).collect();
    (xb, yb)
}

/// Per-class 10% holdout; disabled (empty validation) when any class would
/// lose its last training member or the data is tiny.
fn holdout_split(y: &[usize], n_classes: usize, rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    let n = y.len();
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in y.iter().enumerate() {
        per_class[c].push(i);
    }
    let feasible = n >= 10 && per_class.iter().all(|v| v.is_empty() || v.len() >= 2);
    if !feasible {
        return ((0..n).collect(), Vec::new());
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for rows in per_class.iter_mut() {
        if rows.is_empty() {
            continue;
        }
        rows.shuffle(rng);
        let take = ((rows.len() as f64 * 0.1).round() as usize)
            .max(1)
            .min(rows.len() - 1);
        val.extend_from_slice(&rows[..take]);
        train.extend_from_slice(&rows[take..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Adam optimizer state (beta1 = 0.9, beta2 = 0.999).
struct AdamState {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(net: &MlpNet) -> AdamState {
        AdamState {
            m_w: net.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            v_w: net.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            m_b: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_b: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, net: &mut MlpNet, grads: &Gradients) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let bc2 = 1.0 - Self::BETA2.powi(self.t as i32);
        for l in 0..net.weights.len() {
            for ((w, g), (m, v)) in net.weights[l]
                .iter_mut()
                .zip(grads.weights[l].iter())
                .zip(self.m_w[l].iter_mut().zip(self.v_w[l].iter_mut()))
            {
                *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                *w -= ADAM_LEARNING_RATE * (*m / bc1) / ((*v / bc2).sqrt() + Self::EPS);
            }
            for ((b, g), (m, v)) in net.biases[l]
                .iter_mut()
                .zip(grads.biases[l].iter())
                .zip(self.m_b[l].iter_mut().zip(self.v_b[l].iter_mut()))
            {
                *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                *b -= ADAM_LEARNING_RATE * (*m / bc1) / ((*v / bc2).sqrt() + Self::EPS);
            }
        }
    }
}

/// Largest relative gradient deviation between the analytic gradient and a
/// central finite difference, over all parameters.
pub fn gradient_check(
    net: &MlpNet,
    x: &Array2<f64>,
    y: &[usize],
    alpha: f64,
    step: f64,
) -> f64 {
    let (_, analytic) = net.loss_and_gradients_flat(x, y, alpha);
    let base = net.flat_params();
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut probe = net.clone();
        let mut p = base.clone();
        p[i] += step;
        probe.set_flat_params(&p);
        let plus = probe.loss(x, y, alpha);
        p[i] = base[i] - step;
        probe.set_flat_params(&p);
        let minus = probe.loss(x, y, alpha);
        let numeric = (plus - minus) / (2.0 * step);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}
