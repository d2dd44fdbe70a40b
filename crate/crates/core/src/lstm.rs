//! Multi-layer LSTM regression network in plain f64, with exact
//! backpropagation through time and a finite-difference gradient checker.
//!
//! Parameters live in one flat vector. Per layer, gate order is
//! input / forget / cell / output, each block of `hidden` rows; the blocks of
//! `W` (input weights), `U` (recurrent weights) and `b` follow each other,
//! layers in order, then the linear output head. The last timestep's top
//! hidden state feeds the head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmSpec {
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
}

impl LstmSpec {
    pub fn new(input: usize, hidden: usize, layers: usize) -> Self {
        assert!(input > 0 && hidden > 0 && layers > 0);
        Self {
            input,
            hidden,
            layers,
        }
    }

    fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input
        } else {
            self.hidden
        }
    }

    fn layer_params(&self, layer: usize) -> usize {
        let d = self.layer_input(layer);
        4 * self.hidden * (d + self.hidden + 1)
    }

    pub fn param_count(&self) -> usize {
        let body: usize = (0..self.layers).map(|l| self.layer_params(l)).sum();
        body + self.hidden + 1
    }

    fn layer_offset(&self, layer: usize) -> usize {
        (0..layer).map(|l| self.layer_params(l)).sum()
    }

    /// Named parameter tensors as ranges into the flat vector.
    pub fn tensors(&self) -> Vec<(String, std::ops::Range<usize>)> {
        let mut out = Vec::new();
        for l in 0..self.layers {
            let base = self.layer_offset(l);
            let d = self.layer_input(l);
            let w = 4 * self.hidden * d;
            let u = 4 * self.hidden * self.hidden;
            let b = 4 * self.hidden;
            out.push((format!("layer{l}.w"), base..base + w));
            out.push((format!("layer{l}.u"), base + w..base + w + u));
            out.push((format!("layer{l}.b"), base + w + u..base + w + u + b));
        }
        let head = self.layer_offset(self.layers);
        out.push(("head.w".into(), head..head + self.hidden));
        out.push(("head.b".into(), head + self.hidden..head + self.hidden + 1));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmNetwork {
    pub spec: LstmSpec,
    pub params: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct LayerView<'a> {
    w: &'a [f64],
    u: &'a [f64],
    b: &'a [f64],
    input: usize,
}

/// Per-layer, per-timestep activations recorded during the forward pass.
struct LayerCache {
    xs: Vec<Vec<f64>>,
    gate_i: Vec<Vec<f64>>,
    gate_f: Vec<Vec<f64>>,
    gate_g: Vec<Vec<f64>>,
    gate_o: Vec<Vec<f64>>,
    cell: Vec<Vec<f64>>,
    tanh_cell: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
}

pub struct ForwardCache {
    layers: Vec<LayerCache>,
    pub output: f64,
}

impl LstmNetwork {
    pub fn zeroed(spec: LstmSpec) -> Self {
        let params = vec![0.0; spec.param_count()];
        Self { spec, params }
    }

    /// Uniform init scaled by fan-in, forget-gate biases at 1.
    pub fn random_init<R: Rng>(spec: LstmSpec, rng: &mut R) -> Self {
        let mut net = Self::zeroed(spec);
        for l in 0..spec.layers {
            let base = spec.layer_offset(l);
            let d = spec.layer_input(l);
            let h = spec.hidden;
            let w_scale = 1.0 / (d as f64).sqrt();
            let u_scale = 1.0 / (h as f64).sqrt();
            for idx in 0..4 * h * d {
                net.params[base + idx] = rng.gen_range(-w_scale..w_scale);
            }
            for idx in 0..4 * h * h {
                net.params[base + 4 * h * d + idx] = rng.gen_range(-u_scale..u_scale);
            }
            let b_off = base + 4 * h * (d + h);
            for j in 0..h {
                net.params[b_off + h + j] = 1.0;
            }
        }
        let head = spec.layer_offset(spec.layers);
        let scale = 1.0 / (spec.hidden as f64).sqrt();
        for j in 0..spec.hidden {
            net.params[head + j] = rng.gen_range(-scale..scale);
        }
        net
    }

    fn layer_view(&self, layer: usize) -> LayerView<'_> {
        let base = self.spec.layer_offset(layer);
        let d = self.spec.layer_input(layer);
        let h = self.spec.hidden;
        LayerView {
            w: &self.params[base..base + 4 * h * d],
            u: &self.params[base + 4 * h * d..base + 4 * h * (d + h)],
            b: &self.params[base + 4 * h * (d + h)..base + 4 * h * (d + h + 1)],
            input: d,
        }
    }

    fn head(&self) -> (&[f64], f64) {
        let off = self.spec.layer_offset(self.spec.layers);
        (
            &self.params[off..off + self.spec.hidden],
            self.params[off + self.spec.hidden],
        )
    }

    /// Scalar prediction for a chronological feature window. Allocation-lean
    /// path for inference-heavy callers; training uses [`Self::forward`].
    pub fn predict(&self, window: &[Vec<f64>]) -> Result<f64> {
        if window.is_empty() {
            return Err(Error::InvalidArgument("empty input window".into()));
        }
        for row in window {
            if row.len() != self.spec.input {
                return Err(Error::InvalidArgument(format!(
                    "expected {} features per row, got {}",
                    self.spec.input,
                    row.len()
                )));
            }
        }
        let h = self.spec.hidden;
        let layers = self.spec.layers;
        let mut hidden = vec![vec![0.0f64; h]; layers];
        let mut cell = vec![vec![0.0f64; h]; layers];
        let mut z = vec![0.0f64; 4 * h];
        let mut carry = vec![0.0f64; h];
        for row in window {
            for l in 0..layers {
                let view = self.layer_view(l);
                let x: &[f64] = if l == 0 { row } else { &carry };
                let h_prev = &hidden[l];
                for (r, z_r) in z.iter_mut().enumerate() {
                    let mut acc = view.b[r];
                    let w_row = &view.w[r * view.input..(r + 1) * view.input];
                    for (c, &xc) in x.iter().enumerate() {
                        acc += w_row[c] * xc;
                    }
                    let u_row = &view.u[r * h..(r + 1) * h];
                    for (c, &hc) in h_prev.iter().enumerate() {
                        acc += u_row[c] * hc;
                    }
                    *z_r = acc;
                }
                for j in 0..h {
                    let gate_i = sigmoid(z[j]);
                    let gate_f = sigmoid(z[h + j]);
                    let gate_g = z[2 * h + j].tanh();
                    let gate_o = sigmoid(z[3 * h + j]);
                    let c_new = gate_f * cell[l][j] + gate_i * gate_g;
                    cell[l][j] = c_new;
                    carry[j] = gate_o * c_new.tanh();
                }
                hidden[l].copy_from_slice(&carry);
            }
        }
        let (head_w, head_b) = self.head();
        Ok(head_b
            + head_w
                .iter()
                .zip(&hidden[layers - 1])
                .map(|(&w, &v)| w * v)
                .sum::<f64>())
    }

    pub fn forward(&self, window: &[Vec<f64>]) -> Result<ForwardCache> {
        if window.is_empty() {
            return Err(Error::InvalidArgument("empty input window".into()));
        }
        for row in window {
            if row.len() != self.spec.input {
                return Err(Error::InvalidArgument(format!(
                    "expected {} features per row, got {}",
                    self.spec.input,
                    row.len()
                )));
            }
        }
        let steps = window.len();
        let h = self.spec.hidden;
        let mut layers = Vec::with_capacity(self.spec.layers);
        let mut inputs: Vec<Vec<f64>> = window.to_vec();

        for l in 0..self.spec.layers {
            let view = self.layer_view(l);
            let mut cache = LayerCache {
                xs: std::mem::take(&mut inputs),
                gate_i: Vec::with_capacity(steps),
                gate_f: Vec::with_capacity(steps),
                gate_g: Vec::with_capacity(steps),
                gate_o: Vec::with_capacity(steps),
                cell: Vec::with_capacity(steps),
                tanh_cell: Vec::with_capacity(steps),
                hidden: Vec::with_capacity(steps),
            };
            let mut h_prev = vec![0.0; h];
            let mut c_prev = vec![0.0; h];
            for t in 0..steps {
                let x = &cache.xs[t];
                let mut z = vec![0.0; 4 * h];
                for (r, z_r) in z.iter_mut().enumerate() {
                    let mut acc = view.b[r];
                    let w_row = &view.w[r * view.input..(r + 1) * view.input];
                    for (c, &xc) in x.iter().enumerate() {
                        acc += w_row[c] * xc;
                    }
                    let u_row = &view.u[r * h..(r + 1) * h];
                    for (c, &hc) in h_prev.iter().enumerate() {
                        acc += u_row[c] * hc;
                    }
                    *z_r = acc;
                }
                let gate_i: Vec<f64> = z[0..h].iter().map(|&v| sigmoid(v)).collect();
                let gate_f: Vec<f64> = z[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
                let gate_g: Vec<f64> = z[2 * h..3 * h].iter().map(|&v| v.tanh()).collect();
                let gate_o: Vec<f64> = z[3 * h..4 * h].iter().map(|&v| sigmoid(v)).collect();
                let cell: Vec<f64> = (0..h)
                    .map(|j| gate_f[j] * c_prev[j] + gate_i[j] * gate_g[j])
                    .collect();
                let tanh_cell: Vec<f64> = cell.iter().map(|&v| v.tanh()).collect();
                let hidden_t: Vec<f64> = (0..h).map(|j| gate_o[j] * tanh_cell[j]).collect();

                h_prev.clone_from(&hidden_t);
                c_prev.clone_from(&cell);
                cache.gate_i.push(gate_i);
                cache.gate_f.push(gate_f);
                cache.gate_g.push(gate_g);
                cache.gate_o.push(gate_o);
                cache.cell.push(cell);
                cache.tanh_cell.push(tanh_cell);
                cache.hidden.push(hidden_t);
            }
            inputs = cache.hidden.clone();
            layers.push(cache);
        }

        let (head_w, head_b) = self.head();
        let last = &layers[self.spec.layers - 1].hidden[steps - 1];
        let output = head_b
            + head_w
                .iter()
                .zip(last)
                .map(|(&w, &v)| w * v)
                .sum::<f64>();
        Ok(ForwardCache { layers, output })
    }

    /// Accumulates dLoss/dParams into `grads` given dLoss/dOutput.
    pub fn backward(&self, cache: &ForwardCache, d_output: f64, grads: &mut [f64]) {
        let h = self.spec.hidden;
        let steps = cache.layers[0].xs.len();
        let (head_w, _) = self.head();
        let head_off = self.spec.layer_offset(self.spec.layers);

        let top = self.spec.layers - 1;
        let last_hidden = &cache.layers[top].hidden[steps - 1];
        for j in 0..h {
            grads[head_off + j] += d_output * last_hidden[j];
        }
        grads[head_off + h] += d_output;

        // dh contributions flowing into each layer from outside (the head and
        // the layer above); updated as we descend.
        let mut dh_acc: Vec<Vec<f64>> = vec![vec![0.0; h]; steps];
        for j in 0..h {
            dh_acc[steps - 1][j] = d_output * head_w[j];
        }

        for l in (0..self.spec.layers).rev() {
            let view = self.layer_view(l);
            let layer = &cache.layers[l];
            let base = self.spec.layer_offset(l);
            let d = view.input;
            let w_off = base;
            let u_off = base + 4 * h * d;
            let b_off = base + 4 * h * (d + h);

            let mut dx_acc: Vec<Vec<f64>> = if l > 0 {
                vec![vec![0.0; h]; steps]
            } else {
                Vec::new()
            };
            let mut dc = vec![0.0; h];
            let mut dz = vec![0.0; 4 * h];
            for t in (0..steps).rev() {
                let dh = &dh_acc[t];
                let tanh_c = &layer.tanh_cell[t];
                let gate_i = &layer.gate_i[t];
                let gate_f = &layer.gate_f[t];
                let gate_g = &layer.gate_g[t];
                let gate_o = &layer.gate_o[t];
                for j in 0..h {
                    dc[j] += dh[j] * gate_o[j] * (1.0 - tanh_c[j] * tanh_c[j]);
                    let d_o = dh[j] * tanh_c[j];
                    dz[3 * h + j] = d_o * gate_o[j] * (1.0 - gate_o[j]);
                    let d_i = dc[j] * gate_g[j];
                    dz[j] = d_i * gate_i[j] * (1.0 - gate_i[j]);
                    let c_prev = if t > 0 { layer.cell[t - 1][j] } else { 0.0 };
                    let d_f = dc[j] * c_prev;
                    dz[h + j] = d_f * gate_f[j] * (1.0 - gate_f[j]);
                    let d_g = dc[j] * gate_i[j];
                    dz[2 * h + j] = d_g * (1.0 - gate_g[j] * gate_g[j]);
                    dc[j] *= gate_f[j];
                }

                let x = &layer.xs[t];
                for (r, &dz_r) in dz.iter().enumerate() {
                    if dz_r == 0.0 {
                        continue;
                    }
                    let w_row = w_off + r * d;
                    for (c, &xc) in x.iter().enumerate() {
                        grads[w_row + c] += dz_r * xc;
                    }
                    if t > 0 {
                        let h_prev = &layer.hidden[t - 1];
                        let u_row = u_off + r * h;
                        for (c, &hc) in h_prev.iter().enumerate() {
                            grads[u_row + c] += dz_r * hc;
                        }
                    }
                    grads[b_off + r] += dz_r;
                }

                if t > 0 {
                    let dh_prev = &mut dh_acc[t - 1];
                    for (r, &dz_r) in dz.iter().enumerate() {
                        if dz_r == 0.0 {
                            continue;
                        }
                        let u_row = &view.u[r * h..(r + 1) * h];
                        for (c, item) in dh_prev.iter_mut().enumerate() {
                            *item += dz_r * u_row[c];
                        }
                    }
                }
                if l > 0 {
                    let dx = &mut dx_acc[t];
                    for (r, &dz_r) in dz.iter().enumerate() {
                        if dz_r == 0.0 {
                            continue;
                        }
                        let w_row = &view.w[r * d..(r + 1) * d];
                        for (c, item) in dx.iter_mut().enumerate() {
                            *item += dz_r * w_row[c];
                        }
                    }
                }
            }
            if l > 0 {
                dh_acc = dx_acc;
            }
        }
    }

    /// Mean squared error over a batch plus parameter gradients.
    pub fn batch_loss_and_grads(
        &self,
        batch: &[(Vec<Vec<f64>>, f64)],
    ) -> Result<(f64, Vec<f64>)> {
        let mut grads = vec![0.0; self.spec.param_count()];
        let mut loss = 0.0;
        let n = batch.len() as f64;
        for (window, target) in batch {
            let cache = self.forward(window)?;
            let err = cache.output - target;
            loss += err * err / n;
            self.backward(&cache, 2.0 * err / n, &mut grads);
        }
        Ok((loss, grads))
    }

    pub fn batch_loss(&self, batch: &[(Vec<Vec<f64>>, f64)]) -> Result<f64> {
        let mut loss = 0.0;
        let n = batch.len() as f64;
        for (window, target) in batch {
            let err = self.predict(window)? - target;
            loss += err * err / n;
        }
        Ok(loss)
    }
}

/// Adam with bias correction; gradients are globally norm-clipped first.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clip_norm: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(learning_rate: f64, clip_norm: f64, params: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm,
            m: vec![0.0; params],
            v: vec![0.0; params],
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut [f64], grads: &mut [f64]) {
        let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > self.clip_norm && norm > 0.0 {
            let scale = self.clip_norm / norm;
            for g in grads.iter_mut() {
                *g *= scale;
            }
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for j in 0..params.len() {
            self.m[j] = self.beta1 * self.m[j] + (1.0 - self.beta1) * grads[j];
            self.v[j] = self.beta2 * self.v[j] + (1.0 - self.beta2) * grads[j] * grads[j];
            let m_hat = self.m[j] / bc1;
            let v_hat = self.v[j] / bc2;
            params[j] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Result of a finite-difference check: worst relative error overall and per
/// named tensor.
#[derive(Debug, Clone)]
pub struct GradientCheckReport {
    pub max_relative_error: f64,
    pub per_tensor: Vec<(String, f64)>,
}

/// Compares analytic gradients against central finite differences for every
/// parameter. The step must lie in [1e-6, 1e-4].
pub fn gradient_check(
    network: &LstmNetwork,
    batch: &[(Vec<Vec<f64>>, f64)],
    step: f64,
) -> Result<GradientCheckReport> {
    if !(1e-6..=1e-4).contains(&step) {
        return Err(Error::InvalidArgument(format!(
            "perturbation {step} outside [1e-6, 1e-4]"
        )));
    }
    let (_, analytic) = network.batch_loss_and_grads(batch)?;
    let mut probe = network.clone();
    let mut per_tensor = Vec::new();
    let mut max_rel = 0.0f64;
    for (name, range) in network.spec.tensors() {
        let mut tensor_max = 0.0f64;
        for idx in range {
            let original = probe.params[idx];
            probe.params[idx] = original + step;
            let up = probe.batch_loss(batch)?;
            probe.params[idx] = original - step;
            let down = probe.batch_loss(batch)?;
            probe.params[idx] = original;
            let numeric = (up - down) / (2.0 * step);
            let rel = (analytic[idx] - numeric).abs()
                / (analytic[idx].abs().max(numeric.abs()) + 1e-6);
            tensor_max = tensor_max.max(rel);
        }
        max_rel = max_rel.max(tensor_max);
        per_tensor.push((name, tensor_max));
    }
    Ok(GradientCheckReport {
        max_relative_error: max_rel,
        per_tensor,
    })
}
