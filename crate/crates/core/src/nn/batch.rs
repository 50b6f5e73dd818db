use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::{MlpParams, NnError};

/// Cached activations of a batched forward pass.
pub struct BatchForward {
    // inputs[l] is the input of layer l, pre[l] its affine output
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl BatchForward {
    /// `n × output_dim` network outputs.
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn output_column(&self, j: usize) -> Vec<f64> {
        self.output.column(j).to_vec()
    }

    pub fn batch_size(&self) -> usize {
        self.output.nrows()
    }
}

impl MlpParams {
    fn weight_matrix(&self, l: usize) -> ArrayView2<'_, f64> {
        let shape = self.layers[l];
        ArrayView2::from_shape((shape.fan_out, shape.fan_in), &self.flat[shape.weights()]).expect("layout")
    }

    /// Forward pass over the rows of `x` (`n × input_dim`).
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<BatchForward, NnError> {
        self.check_input(x.ncols())?;
        let last = self.layers.len() - 1;
        let act = self.config.activation;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (li, shape) in self.layers.iter().enumerate() {
            let w = self.weight_matrix(li);
            let b = Array1::from(self.flat[shape.biases()].to_vec());
            let z = h.dot(&w.t()) + &b;
            let next = if li < last { z.mapv(|v| act.apply(v)) } else { z.clone() };
            inputs.push(h);
            pre.push(z);
            h = next;
        }
        Ok(BatchForward { inputs, pre, output: h })
    }

    /// Backward pass for upstream gradient `d_out` (`n × output_dim`).
    /// Returns the parameter gradient summed over rows and the input gradient
    /// of every row.
    pub fn backward_batch(&self, fwd: &BatchForward, d_out: ArrayView2<'_, f64>) -> (Vec<f64>, Array2<f64>) {
        let mut grad = vec![0.0; self.flat.len()];
        let act = self.config.activation;
        let mut dz = d_out.to_owned();
        for li in (0..self.layers.len()).rev() {
            let shape = self.layers[li];
            let gw = dz.t().dot(&fwd.inputs[li]);
            grad[shape.weights()].copy_from_slice(gw.as_slice().expect("contiguous"));
            let gb = dz.sum_axis(Axis(0));
            grad[shape.biases()].copy_from_slice(gb.as_slice().expect("contiguous"));
            let dh = dz.dot(&self.weight_matrix(li));
            if li == 0 {
                return (grad, dh);
            }
            let prev_pre = &fwd.pre[li - 1];
            dz = dh;
            ndarray::Zip::from(&mut dz)
                .and(prev_pre)
                .for_each(|d, &z| *d *= act.derivative(z));
        }
        unreachable!("network has at least one layer")
    }

    /// Per-row parameter gradients (`n × param_count`) for upstream gradient `d_out`.
    pub fn per_sample_grads(&self, fwd: &BatchForward, d_out: ArrayView2<'_, f64>) -> Array2<f64> {
        let n = d_out.nrows();
        let mut out = Array2::zeros((n, self.flat.len()));
        let act = self.config.activation;
        let mut dz = d_out.to_owned();
        for li in (0..self.layers.len()).rev() {
            let shape = self.layers[li];
            let a = &fwd.inputs[li];
            for i in 0..n {
                let mut row = out.row_mut(i);
                let ws = row.slice_mut(s![shape.weights()]);
                let mut ws = ws.into_shape_with_order((shape.fan_out, shape.fan_in)).expect("layout");
                for o in 0..shape.fan_out {
                    let d = dz[[i, o]];
                    for k in 0..shape.fan_in {
                        ws[[o, k]] = d * a[[i, k]];
                    }
                }
                let mut bs = row.slice_mut(s![shape.biases()]);
                bs.assign(&dz.row(i));
            }
            if li == 0 {
                break;
            }
            let mut dh = dz.dot(&self.weight_matrix(li));
            ndarray::Zip::from(&mut dh)
                .and(&fwd.pre[li - 1])
                .for_each(|d, &z| *d *= act.derivative(z));
            dz = dh;
        }
        out
    }
}
