//! Stacked LSTM with per-stream softmax heads, forward and BPTT.
//!
//! All weights live in one flat buffer described by a [`Layout`]. Input
//! weight matrices are stored row-per-input (`[inputs × 4H]`), so a sparse
//! one-hot input costs one row addition per hot entry. Gate order inside
//! each `4H` row is input, forget, candidate, output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::multistream::PITCH_CLASSES;

/// Probability floor applied before taking logs in the loss.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub n_streams: usize,
    pub n_durations: usize,
    pub plan_width: usize,
    pub layers: usize,
    pub units: usize,
}

impl ModelDims {
    pub fn frame_len(&self) -> usize {
        self.n_streams * (PITCH_CLASSES + self.n_durations)
    }

    /// Width of the first layer's input: frame then plan bits.
    pub fn input_width(&self) -> usize {
        self.frame_len() + self.plan_width
    }

    fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_width()
        } else {
            self.units
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerSlots {
    inputs: usize,
    w_in: usize,
    w_rec: usize,
    bias: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeadSlots {
    classes: usize,
    w: usize,
    b: usize,
}

/// Named tensor inside the flat parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    layers: Vec<LayerSlots>,
    pitch_heads: Vec<HeadSlots>,
    duration_heads: Vec<HeadSlots>,
    total: usize,
}

impl Layout {
    pub fn new(dims: &ModelDims) -> Self {
        let h4 = 4 * dims.units;
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let layers = (0..dims.layers)
            .map(|l| {
                let inputs = dims.layer_input(l);
                LayerSlots { inputs, w_in: take(inputs * h4), w_rec: take(dims.units * h4), bias: take(h4) }
            })
            .collect();
        let mut head = |classes: usize| HeadSlots { classes, w: take(dims.units * classes), b: take(classes) };
        let pitch_heads = (0..dims.n_streams).map(|_| head(PITCH_CLASSES)).collect();
        let duration_heads = (0..dims.n_streams).map(|_| head(dims.n_durations)).collect();
        Layout { layers, pitch_heads, duration_heads, total: at }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn tensors(&self, units: usize) -> Vec<TensorSpec> {
        let h4 = 4 * units;
        let mut out = Vec::new();
        for (l, s) in self.layers.iter().enumerate() {
            out.push(TensorSpec { name: format!("lstm{l}.w_in"), shape: vec![s.inputs, h4], offset: s.w_in });
            out.push(TensorSpec { name: format!("lstm{l}.w_rec"), shape: vec![units, h4], offset: s.w_rec });
            out.push(TensorSpec { name: format!("lstm{l}.bias"), shape: vec![h4], offset: s.bias });
        }
        for (kind, heads) in [("pitch", &self.pitch_heads), ("duration", &self.duration_heads)] {
            for (s, h) in heads.iter().enumerate() {
                out.push(TensorSpec { name: format!("{kind}{s}.w"), shape: vec![units, h.classes], offset: h.w });
                out.push(TensorSpec { name: format!("{kind}{s}.b"), shape: vec![h.classes], offset: h.b });
            }
        }
        out
    }
}

/// Output distributions for one prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// One 90-way distribution per stream.
    pub pitch: Vec<Vec<f64>>,
    /// One `n_d`-way distribution per stream.
    pub duration: Vec<Vec<f64>>,
}

/// Classification targets for one note-set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub pitch: Vec<usize>,
    pub duration: Vec<usize>,
    /// Streams excluded from the loss because their symbol is a forced SUSTAIN.
    pub masked: Vec<bool>,
}

/// Sparse input for one timestep: `(index, value)` pairs into the first
/// layer's input vector.
pub type SparseInput = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dims: ModelDims,
    layout: Layout,
    data: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

struct LayerTrace {
    /// Per timestep, `H` values each.
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

struct Trace {
    steps: usize,
    layers: Vec<LayerTrace>,
    prediction: Prediction,
}

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Self {
        let layout = Layout::new(&dims);
        let data = vec![0.0; layout.total()];
        ModelParams { dims, layout, data }
    }

    /// Uniform `±1/sqrt(fan_in)` weights, zero biases except forget gates at 1.
    pub fn init<R: Rng>(dims: ModelDims, rng: &mut R) -> Self {
        let mut p = Self::zeros(dims);
        let h = dims.units;
        for spec in p.layout.tensors(h) {
            // the leading dimension of every matrix is its fan-in
            if spec.shape.len() == 2 {
                let bound = 1.0 / (spec.shape[0] as f64).sqrt();
                for v in &mut p.data[spec.offset..spec.offset + spec.len()] {
                    *v = rng.gen_range(-bound..bound);
                }
            }
        }
        for l in 0..dims.layers {
            let b = p.layout.layers[l].bias;
            p.data[b + h..b + 2 * h].fill(1.0);
        }
        p
    }

    pub fn from_data(dims: ModelDims, data: Vec<f64>) -> Result<Self, ModelError> {
        let layout = Layout::new(&dims);
        if data.len() != layout.total() {
            return Err(ModelError::Dimension { what: "parameter count".into(), expected: layout.total(), found: data.len() });
        }
        Ok(ModelParams { dims, layout, data })
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn tensors(&self) -> Vec<TensorSpec> {
        self.layout.tensors(self.dims.units)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Builds the first-layer sparse input for one frame given as hot indices.
    pub fn sparse_step(&self, hot: &[u32], plan: &[f64]) -> SparseInput {
        let frame_len = self.dims.frame_len();
        let mut x: SparseInput = hot.iter().map(|&i| (i as usize, 1.0)).collect();
        x.extend(plan.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (frame_len + j, v)));
        x
    }

    /// Output distributions for dense frames and a plan vector.
    pub fn forward(&self, frames: &[Vec<f64>], plan: &[f64]) -> Result<Prediction, ModelError> {
        let frame_len = self.dims.frame_len();
        if plan.len() != self.dims.plan_width {
            return Err(ModelError::Dimension { what: "plan width".into(), expected: self.dims.plan_width, found: plan.len() });
        }
        let mut inputs = Vec::with_capacity(frames.len());
        for f in frames {
            if f.len() != frame_len {
                return Err(ModelError::Dimension { what: "frame length".into(), expected: frame_len, found: f.len() });
            }
            let mut x: SparseInput = f.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i, v)).collect();
            x.extend(plan.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (frame_len + j, v)));
            inputs.push(x);
        }
        Ok(self.forward_sparse(&inputs))
    }

    pub fn forward_sparse(&self, inputs: &[SparseInput]) -> Prediction {
        self.trace(inputs).prediction
    }

    fn trace(&self, inputs: &[SparseInput]) -> Trace {
        let h = self.dims.units;
        let h4 = 4 * h;
        let steps = inputs.len();
        let w = &self.data;
        let mut layers: Vec<LayerTrace> = Vec::with_capacity(self.dims.layers);
        let mut a = vec![0.0; h4];
        for (l, slots) in self.layout.layers.iter().enumerate() {
            let mut tr = LayerTrace {
                i: vec![0.0; steps * h],
                f: vec![0.0; steps * h],
                g: vec![0.0; steps * h],
                o: vec![0.0; steps * h],
                c: vec![0.0; steps * h],
                tanh_c: vec![0.0; steps * h],
                h: vec![0.0; steps * h],
            };
            let w_in = &w[slots.w_in..slots.w_in + slots.inputs * h4];
            let w_rec = &w[slots.w_rec..slots.w_rec + h * h4];
            let bias = &w[slots.bias..slots.bias + h4];
            for t in 0..steps {
                a.copy_from_slice(bias);
                if l == 0 {
                    for &(k, x) in &inputs[t] {
                        axpy(x, &w_in[k * h4..(k + 1) * h4], &mut a);
                    }
                } else {
                    let below = &layers[l - 1].h[t * h..(t + 1) * h];
                    for (k, &x) in below.iter().enumerate() {
                        axpy(x, &w_in[k * h4..(k + 1) * h4], &mut a);
                    }
                }
                if t > 0 {
                    let (prev, _) = tr.h.split_at(t * h);
                    let h_prev = &prev[(t - 1) * h..];
                    for (j, &x) in h_prev.iter().enumerate() {
                        axpy(x, &w_rec[j * h4..(j + 1) * h4], &mut a);
                    }
                }
                for u in 0..h {
                    let i = sigmoid(a[u]);
                    let f = sigmoid(a[h + u]);
                    let g = a[2 * h + u].tanh();
                    let o = sigmoid(a[3 * h + u]);
                    let c_prev = if t > 0 { tr.c[(t - 1) * h + u] } else { 0.0 };
                    let c = f * c_prev + i * g;
                    let tc = c.tanh();
                    let at = t * h + u;
                    tr.i[at] = i;
                    tr.f[at] = f;
                    tr.g[at] = g;
                    tr.o[at] = o;
                    tr.c[at] = c;
                    tr.tanh_c[at] = tc;
                    tr.h[at] = o * tc;
                }
            }
            layers.push(tr);
        }

        let top: Vec<f64> = if steps == 0 {
            vec![0.0; h]
        } else {
            layers.last().map(|tr| tr.h[(steps - 1) * h..steps * h].to_vec()).unwrap_or_else(|| vec![0.0; h])
        };
        let head = |slots: &HeadSlots| {
            let mut z = w[slots.b..slots.b + slots.classes].to_vec();
            for (j, &x) in top.iter().enumerate() {
                axpy(x, &w[slots.w + j * slots.classes..slots.w + (j + 1) * slots.classes], &mut z);
            }
            softmax_in_place(&mut z);
            z
        };
        let prediction = Prediction {
            pitch: self.layout.pitch_heads.iter().map(head).collect(),
            duration: self.layout.duration_heads.iter().map(head).collect(),
        };
        Trace { steps, layers, prediction }
    }

    /// Loss of one example; adds `scale · ∂loss/∂θ` into `grad`.
    pub fn accumulate_gradient(&self, inputs: &[SparseInput], target: &Target, scale: f64, grad: &mut [f64]) -> f64 {
        assert_eq!(grad.len(), self.data.len(), "gradient buffer has the wrong size");
        let tr = self.trace(inputs);
        let value = loss(&tr.prediction, target);
        let unmasked = target.masked.iter().filter(|m| !**m).count();
        if unmasked == 0 || tr.steps == 0 {
            return value;
        }
        let h = self.dims.units;
        let h4 = 4 * h;
        let steps = tr.steps;
        let w = &self.data;
        let norm = scale / unmasked as f64;
        let top = &tr.layers[self.dims.layers - 1].h[(steps - 1) * h..steps * h];

        let mut dh_top = vec![0.0; h];
        let heads = [(&self.layout.pitch_heads, &tr.prediction.pitch, &target.pitch), (&self.layout.duration_heads, &tr.prediction.duration, &target.duration)];
        for (slots, probs, classes) in heads {
            for s in 0..self.dims.n_streams {
                if target.masked[s] {
                    continue;
                }
                let hs = &slots[s];
                let mut dz = probs[s].clone();
                dz[classes[s]] -= 1.0;
                for v in dz.iter_mut() {
                    *v *= norm;
                }
                axpy(1.0, &dz, &mut grad[hs.b..hs.b + hs.classes]);
                for j in 0..h {
                    let row = hs.w + j * hs.classes;
                    axpy(top[j], &dz, &mut grad[row..row + hs.classes]);
                    dh_top[j] += dot(&w[row..row + hs.classes], &dz);
                }
            }
        }

        // dh arriving from above, per timestep
        let mut from_above = vec![0.0; steps * h];
        from_above[(steps - 1) * h..].copy_from_slice(&dh_top);
        let mut dgates = vec![0.0; h4];
        for l in (0..self.dims.layers).rev() {
            let slots = self.layout.layers[l];
            let tr_l = &tr.layers[l];
            let mut to_below = if l > 0 { vec![0.0; steps * h] } else { Vec::new() };
            let mut dh_next = vec![0.0; h];
            let mut dc_next = vec![0.0; h];
            for t in (0..steps).rev() {
                for u in 0..h {
                    let at = t * h + u;
                    let dh = from_above[at] + dh_next[u];
                    let (i, f, g, o, tc) = (tr_l.i[at], tr_l.f[at], tr_l.g[at], tr_l.o[at], tr_l.tanh_c[at]);
                    let c_prev = if t > 0 { tr_l.c[at - h] } else { 0.0 };
                    let d_o = dh * tc;
                    let dc = dc_next[u] + dh * o * (1.0 - tc * tc);
                    dgates[u] = dc * g * i * (1.0 - i);
                    dgates[h + u] = dc * c_prev * f * (1.0 - f);
                    dgates[2 * h + u] = dc * i * (1.0 - g * g);
                    dgates[3 * h + u] = d_o * o * (1.0 - o);
                    dc_next[u] = dc * f;
                }
                axpy(1.0, &dgates, &mut grad[slots.bias..slots.bias + h4]);
                if l == 0 {
                    for &(k, x) in &inputs[t] {
                        let row = slots.w_in + k * h4;
                        axpy(x, &dgates, &mut grad[row..row + h4]);
                    }
                } else {
                    let below = &tr.layers[l - 1].h[t * h..(t + 1) * h];
                    for k in 0..h {
                        let row = slots.w_in + k * h4;
                        axpy(below[k], &dgates, &mut grad[row..row + h4]);
                        to_below[t * h + k] = dot(&w[row..row + h4], &dgates);
                    }
                }
                if t > 0 {
                    let h_prev = &tr_l.h[(t - 1) * h..t * h];
                    for j in 0..h {
                        let row = slots.w_rec + j * h4;
                        axpy(h_prev[j], &dgates, &mut grad[row..row + h4]);
                        dh_next[j] = dot(&w[row..row + h4], &dgates);
                    }
                } else {
                    dh_next.fill(0.0);
                }
            }
            from_above = to_below;
        }
        value
    }
}

/// Mean per-stream cross-entropy of pitch plus that of duration, over
/// unmasked streams.
pub fn loss(prediction: &Prediction, target: &Target) -> f64 {
    let unmasked = target.masked.iter().filter(|m| !**m).count();
    if unmasked == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for s in 0..target.masked.len() {
        if target.masked[s] {
            continue;
        }
        total -= prediction.pitch[s][target.pitch[s]].max(LOG_FLOOR).ln();
        total -= prediction.duration[s][target.duration[s]].max(LOG_FLOOR).ln();
    }
    total / unmasked as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims() -> ModelDims {
        ModelDims { n_streams: 2, n_durations: 3, plan_width: 2, layers: 2, units: 4 }
    }

    #[test]
    fn layout_covers_every_tensor_once() {
        let d = dims();
        let layout = Layout::new(&d);
        let mut spans: Vec<(usize, usize)> = layout.tensors(d.units).iter().map(|t| (t.offset, t.len())).collect();
        spans.sort();
        let mut at = 0;
        for (o, n) in spans {
            assert_eq!(o, at);
            at += n;
        }
        assert_eq!(at, layout.total());
    }

    #[test]
    fn zero_weights_give_uniform_outputs() {
        let d = dims();
        let p = ModelParams::zeros(d);
        let frames = vec![vec![0.0; d.frame_len()]; 3];
        let out = p.forward(&frames, &[1.0, 0.0]).unwrap();
        for dist in &out.pitch {
            assert!(dist.iter().all(|&x| (x - 1.0 / 90.0).abs() < 1e-15));
        }
        for dist in &out.duration {
            assert!(dist.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        }
    }

    #[test]
    fn dimension_mismatches_are_errors() {
        let d = dims();
        let p = ModelParams::zeros(d);
        assert!(matches!(p.forward(&[vec![0.0; 5]], &[0.0, 0.0]), Err(ModelError::Dimension { .. })));
        assert!(matches!(p.forward(&[vec![0.0; d.frame_len()]], &[0.0]), Err(ModelError::Dimension { .. })));
    }

    #[test]
    fn loss_values() {
        let uniform = Prediction { pitch: vec![vec![1.0 / 90.0; 90]; 5], duration: vec![vec![0.1; 10]; 5] };
        let t = Target { pitch: vec![3; 5], duration: vec![7; 5], masked: vec![false; 5] };
        // oracle: ln 90 + ln 10
        assert!((loss(&uniform, &t) - (90f64.ln() + 10f64.ln())).abs() < 1e-3);
        assert!((loss(&uniform, &t) - 6.8024).abs() < 1e-3);

        let mut onehot = uniform.clone();
        for s in 0..5 {
            onehot.pitch[s] = (0..90).map(|c| if c == 3 { 1.0 } else { 0.0 }).collect();
            onehot.duration[s] = (0..10).map(|c| if c == 7 { 1.0 } else { 0.0 }).collect();
        }
        assert_eq!(loss(&onehot, &t), 0.0);

        let mut one = t.clone();
        one.masked = vec![true, true, false, true, true];
        let mut mixed = uniform.clone();
        mixed.pitch[2] = (0..90).map(|c| if c == 3 { 0.5 } else { 0.5 / 89.0 }).collect();
        assert!((loss(&mixed, &one) - (-(0.5f64.ln()) + 10f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn plan_bits_change_outputs() {
        let d = dims();
        let p = ModelParams::init(d, &mut ChaCha8Rng::seed_from_u64(3));
        let frames = vec![vec![0.0; d.frame_len()]; 2];
        let a = p.forward(&frames, &[1.0, 0.0]).unwrap();
        let b = p.forward(&frames, &[0.0, 1.0]).unwrap();
        assert_ne!(a, b);
    }
}
