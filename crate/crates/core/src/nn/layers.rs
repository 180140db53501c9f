use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::sparse;

/// Fully connected layer computing `y = x·W + b` for a row-major batch `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Array2::zeros((input, output)),
            bias: Array1::zeros(output),
        }
    }

    /// Uniform fan-in scaled initialization, zero bias.
    pub fn init<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        let weight = Array2::from_shape_fn((input, output), |_| rng.random_range(-bound..=bound));
        Self {
            weight,
            bias: Array1::zeros(output),
        }
    }

    pub fn input_width(&self) -> usize {
        self.weight.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.weight.ncols()
    }

    pub fn forward(&self, x: &ArrayView2<'_, f64>) -> Array2<f64> {
        let mut y = sparse::matmul(x, &self.weight);
        y += &self.bias;
        y
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the layer input.
    pub fn backward(
        &self,
        x: &ArrayView2<'_, f64>,
        dy: &ArrayView2<'_, f64>,
        grad: &mut Dense,
        want_input_grad: bool,
    ) -> Option<Array2<f64>> {
        sparse::accumulate_outer(&mut grad.weight.view_mut(), x, dy);
        grad.bias += &dy.sum_axis(Axis(0));
        want_input_grad.then(|| dy.dot(&self.weight.t()))
    }
}

/// Long short-term memory cell with input, forget, cell and output gates.
///
/// Gate pre-activations are packed column-wise as `[i | f | g | o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub input_weight: Array2<f64>,
    pub recurrent_weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Activations recorded during an unroll, one entry per history slice.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    pub input_gate: Vec<Array2<f64>>,
    pub forget_gate: Vec<Array2<f64>>,
    pub cell_gate: Vec<Array2<f64>>,
    pub output_gate: Vec<Array2<f64>>,
    /// Cell states `c_0..c_H`, with `c_0 = 0`.
    pub cells: Vec<Array2<f64>>,
    /// Hidden states `h_0..h_H`, with `h_0 = 0`.
    pub hidden: Vec<Array2<f64>>,
    /// `tanh(c_t)` for steps 1..=H, kept for the backward pass.
    pub cell_tanh: Vec<Array2<f64>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Lstm {
    pub fn zeros(input: usize, width: usize) -> Self {
        Self {
            input_weight: Array2::zeros((input, 4 * width)),
            recurrent_weight: Array2::zeros((width, 4 * width)),
            bias: Array1::zeros(4 * width),
        }
    }

    /// Fan-in scaled uniform weights; the forget-gate bias starts at one.
    pub fn init<R: Rng>(input: usize, width: usize, rng: &mut R) -> Self {
        let bound = 1.0 / ((input + width).max(1) as f64).sqrt();
        let mut cell = Self::zeros(input, width);
        cell.input_weight
            .mapv_inplace(|_| rng.random_range(-bound..=bound));
        cell.recurrent_weight
            .mapv_inplace(|_| rng.random_range(-bound..=bound));
        cell.bias.slice_mut(s![width..2 * width]).fill(1.0);
        cell
    }

    pub fn width(&self) -> usize {
        self.recurrent_weight.nrows()
    }

    pub fn input_width(&self) -> usize {
        self.input_weight.nrows()
    }

    /// Unrolls over `steps` equally sized column slices of `x`.
    pub fn forward(&self, x: &ArrayView2<'_, f64>, steps: usize) -> LstmTrace {
        let batch = x.nrows();
        let width = self.width();
        let feat = self.input_width();
        let mut trace = LstmTrace {
            input_gate: Vec::with_capacity(steps),
            forget_gate: Vec::with_capacity(steps),
            cell_gate: Vec::with_capacity(steps),
            output_gate: Vec::with_capacity(steps),
            cells: vec![Array2::zeros((batch, width))],
            hidden: vec![Array2::zeros((batch, width))],
            cell_tanh: Vec::with_capacity(steps),
        };
        for step in 0..steps {
            let xt = x.slice(s![.., step * feat..(step + 1) * feat]);
            let mut z = sparse::matmul(&xt, &self.input_weight);
            // The initial hidden state is zero, so step 0 has no recurrent term.
            if step > 0 {
                general_mat_mul(1.0, &trace.hidden[step], &self.recurrent_weight, 1.0, &mut z);
            }
            z += &self.bias;
            let i = z.slice(s![.., 0..width]).mapv(sigmoid);
            let f = z.slice(s![.., width..2 * width]).mapv(sigmoid);
            let g = z.slice(s![.., 2 * width..3 * width]).mapv(f64::tanh);
            let o = z.slice(s![.., 3 * width..4 * width]).mapv(sigmoid);
            let c = &f * &trace.cells[step] + &i * &g;
            let tanh_c = c.mapv(f64::tanh);
            let h = &o * &tanh_c;
            trace.input_gate.push(i);
            trace.forget_gate.push(f);
            trace.cell_gate.push(g);
            trace.output_gate.push(o);
            trace.cells.push(c);
            trace.hidden.push(h);
            trace.cell_tanh.push(tanh_c);
        }
        trace
    }

    /// Back-propagates a gradient on the final hidden state through the unroll.
    pub fn backward(
        &self,
        x: &ArrayView2<'_, f64>,
        trace: &LstmTrace,
        d_last_hidden: Array2<f64>,
        grad: &mut Lstm,
    ) {
        let steps = trace.input_gate.len();
        let width = self.width();
        let feat = self.input_width();
        let batch = x.nrows();
        let mut dh = d_last_hidden;
        let mut dc = Array2::<f64>::zeros((batch, width));
        let mut dz = Array2::<f64>::zeros((batch, 4 * width));
        for step in (0..steps).rev() {
            let i = &trace.input_gate[step];
            let f = &trace.forget_gate[step];
            let g = &trace.cell_gate[step];
            let o = &trace.output_gate[step];
            let c_prev = &trace.cells[step];
            let tanh_c = &trace.cell_tanh[step];

            // dc accumulates the path through h_t = o * tanh(c_t).
            Zip::from(&mut dc)
                .and(&dh)
                .and(o)
                .and(tanh_c)
                .for_each(|dc, &dh, &o, &tc| *dc += dh * o * (1.0 - tc * tc));

            Zip::from(dz.slice_mut(s![.., 0..width]))
                .and(&dc)
                .and(i)
                .and(g)
                .for_each(|d, &dc, &i, &g| *d = dc * g * i * (1.0 - i));
            Zip::from(dz.slice_mut(s![.., width..2 * width]))
                .and(&dc)
                .and(f)
                .and(c_prev)
                .for_each(|d, &dc, &f, &cp| *d = dc * cp * f * (1.0 - f));
            Zip::from(dz.slice_mut(s![.., 2 * width..3 * width]))
                .and(&dc)
                .and(i)
                .and(g)
                .for_each(|d, &dc, &i, &g| *d = dc * i * (1.0 - g * g));
            Zip::from(dz.slice_mut(s![.., 3 * width..4 * width]))
                .and(&dh)
                .and(tanh_c)
                .and(o)
                .for_each(|d, &dh, &tc, &o| *d = dh * tc * o * (1.0 - o));

            let xt = x.slice(s![.., step * feat..(step + 1) * feat]);
            sparse::accumulate_outer(&mut grad.input_weight.view_mut(), &xt, &dz.view());
            grad.bias += &dz.sum_axis(Axis(0));

            if step > 0 {
                general_mat_mul(1.0, &trace.hidden[step].t(), &dz, 1.0, &mut grad.recurrent_weight);
                dh = dz.dot(&self.recurrent_weight.t());
                dc *= f;
            }
        }
    }
}
