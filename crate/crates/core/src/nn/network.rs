use ndarray::{Array2, ArrayView2, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dueling;
use super::layers::{Dense, Lstm, LstmTrace};
use super::NnError;

/// Architecture of a factored dueling Q-network.
///
/// The input is a stack of `history` observation slices of `frame_width`
/// features each. With `recurrent_width` set, an LSTM unrolls over the slices
/// and its final hidden state feeds the dense trunk; otherwise the stack is
/// consumed as one flat vector. The output row holds `heads * actions_per_head`
/// advantages (head-major) followed by `heads` state values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub frame_width: usize,
    pub history: usize,
    pub recurrent_width: Option<usize>,
    pub dense_widths: Vec<usize>,
    pub heads: usize,
    pub actions_per_head: usize,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn input_width(&self) -> usize {
        self.frame_width * self.history
    }

    pub fn output_width(&self) -> usize {
        self.heads * self.actions_per_head + self.heads
    }

    pub fn parameter_count(&self) -> usize {
        let mut count = 0;
        let mut width = match self.recurrent_width {
            Some(h) => {
                count += self.frame_width * 4 * h + h * 4 * h + 4 * h;
                h
            }
            None => self.input_width(),
        };
        for &next in self.dense_widths.iter().chain(std::iter::once(&self.output_width())) {
            count += width * next + next;
            width = next;
        }
        count
    }

    fn validate(&self) -> Result<(), NnError> {
        if self.frame_width == 0 || self.history == 0 {
            return Err(NnError::InvalidSpec("empty input".into()));
        }
        if self.heads == 0 || self.actions_per_head == 0 {
            return Err(NnError::InvalidSpec("empty head layout".into()));
        }
        if self.recurrent_width == Some(0) || self.dense_widths.contains(&0) {
            return Err(NnError::InvalidSpec("zero-width layer".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    spec: NetworkSpec,
    pub lstm: Option<Lstm>,
    pub hidden: Vec<Dense>,
    pub output: Dense,
}

/// Intermediate values of one batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    lstm: Option<LstmTrace>,
    /// Rectified outputs of each hidden dense layer.
    activations: Vec<Array2<f64>>,
    /// Raw output rows: advantages then values.
    pub raw: Array2<f64>,
}

impl ForwardCache {
    /// Dueling-aggregated Q-values, `batch × (heads * actions_per_head)`.
    pub fn q_values(&self, spec: &NetworkSpec) -> Array2<f64> {
        dueling::aggregate_batch(&self.raw.view(), spec.heads, spec.actions_per_head)
    }
}

impl QNetwork {
    /// Seeded construction; the same spec always yields identical weights.
    pub fn new(spec: NetworkSpec) -> Result<Self, NnError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let lstm = spec
            .recurrent_width
            .map(|h| Lstm::init(spec.frame_width, h, &mut rng));
        let mut width = spec.recurrent_width.unwrap_or_else(|| spec.input_width());
        let mut hidden = Vec::with_capacity(spec.dense_widths.len());
        for &next in &spec.dense_widths {
            hidden.push(Dense::init(width, next, &mut rng));
            width = next;
        }
        let output = Dense::init(width, spec.output_width(), &mut rng);
        Ok(Self {
            spec,
            lstm,
            hidden,
            output,
        })
    }

    /// Same architecture with every parameter set to zero; used as a
    /// gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self {
            spec: self.spec.clone(),
            lstm: self
                .lstm
                .as_ref()
                .map(|l| Lstm::zeros(l.input_width(), l.width())),
            hidden: self
                .hidden
                .iter()
                .map(|d| Dense::zeros(d.input_width(), d.output_width()))
                .collect(),
            output: Dense::zeros(self.output.input_width(), self.output.output_width()),
        }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn forward(&self, input: &ArrayView2<'_, f64>) -> Result<ForwardCache, NnError> {
        if input.ncols() != self.spec.input_width() {
            return Err(NnError::Dimension {
                expected: self.spec.input_width(),
                found: input.ncols(),
            });
        }
        let lstm = self
            .lstm
            .as_ref()
            .map(|cell| cell.forward(input, self.spec.history));
        let mut activations: Vec<Array2<f64>> = Vec::with_capacity(self.hidden.len());
        for (idx, layer) in self.hidden.iter().enumerate() {
            let x = match (idx, &lstm) {
                (0, Some(trace)) => trace.hidden.last().expect("unrolled").view(),
                (0, None) => input.view(),
                _ => activations[idx - 1].view(),
            };
            let mut y = layer.forward(&x);
            y.mapv_inplace(|v| v.max(0.0));
            activations.push(y);
        }
        let last = match (activations.last(), &lstm) {
            (Some(a), _) => a.view(),
            (None, Some(trace)) => trace.hidden.last().expect("unrolled").view(),
            (None, None) => input.view(),
        };
        let raw = self.output.forward(&last);
        Ok(ForwardCache {
            lstm,
            activations,
            raw,
        })
    }

    /// Dueling Q-values for a batch of stacked observations.
    pub fn q_values(&self, input: &ArrayView2<'_, f64>) -> Result<Array2<f64>, NnError> {
        Ok(self.forward(input)?.q_values(&self.spec))
    }

    /// Exact parameter gradients given the upstream gradient on the raw
    /// output rows (advantages then values).
    pub fn backward_raw(
        &self,
        input: &ArrayView2<'_, f64>,
        cache: &ForwardCache,
        d_raw: &ArrayView2<'_, f64>,
    ) -> QNetwork {
        let mut grad = self.zeros_like();
        let lstm_out = cache.lstm.as_ref().map(|t| t.hidden.last().expect("unrolled"));
        let layer_input = |idx: usize| -> ArrayView2<'_, f64> {
            if idx == 0 {
                match lstm_out {
                    Some(h) => h.view(),
                    None => input.view(),
                }
            } else {
                cache.activations[idx - 1].view()
            }
        };
        let needs_input_grad = !self.hidden.is_empty() || self.lstm.is_some();
        let mut upstream = self
            .output
            .backward(
                &layer_input(self.hidden.len()),
                d_raw,
                &mut grad.output,
                needs_input_grad,
            )
            .unwrap_or_default();
        for idx in (0..self.hidden.len()).rev() {
            Zip::from(&mut upstream)
                .and(&cache.activations[idx])
                .for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
            let want = idx > 0 || self.lstm.is_some();
            upstream = self.hidden[idx]
                .backward(&layer_input(idx), &upstream.view(), &mut grad.hidden[idx], want)
                .unwrap_or_default();
        }
        if let (Some(cell), Some(trace), Some(g)) =
            (self.lstm.as_ref(), cache.lstm.as_ref(), grad.lstm.as_mut())
        {
            cell.backward(input, trace, upstream, g);
        }
        grad
    }

    /// Gradients given an upstream gradient on the dueling Q-values.
    pub fn backward(
        &self,
        input: &ArrayView2<'_, f64>,
        cache: &ForwardCache,
        d_q: &ArrayView2<'_, f64>,
    ) -> QNetwork {
        let d_raw = dueling::backward_batch(d_q, self.spec.heads, self.spec.actions_per_head);
        self.backward_raw(input, cache, &d_raw.view())
    }

    /// Parameter slices in a fixed order: recurrent cell, hidden layers,
    /// output layer; weight before bias.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        if let Some(l) = &self.lstm {
            out.push(l.input_weight.as_slice().expect("standard layout"));
            out.push(l.recurrent_weight.as_slice().expect("standard layout"));
            out.push(l.bias.as_slice().expect("standard layout"));
        }
        for d in self.hidden.iter().chain(std::iter::once(&self.output)) {
            out.push(d.weight.as_slice().expect("standard layout"));
            out.push(d.bias.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        if let Some(l) = &mut self.lstm {
            out.push(l.input_weight.as_slice_mut().expect("standard layout"));
            out.push(l.recurrent_weight.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
        }
        for d in self.hidden.iter_mut().chain(std::iter::once(&mut self.output)) {
            out.push(d.weight.as_slice_mut().expect("standard layout"));
            out.push(d.bias.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.params().concat()
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<(), NnError> {
        let expected = self.spec.parameter_count();
        if values.len() != expected {
            return Err(NnError::Dimension {
                expected,
                found: values.len(),
            });
        }
        let mut offset = 0;
        for slot in self.params_mut() {
            slot.copy_from_slice(&values[offset..offset + slot.len()]);
            offset += slot.len();
        }
        Ok(())
    }
}
