//! Row-major N-dimensional transforms built from one 1D plan per axis length.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub(crate) struct AxisFft {
    len: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for AxisFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AxisFft").field("len", &self.len).field("dim", &self.dim).finish()
    }
}

impl AxisFft {
    pub(crate) fn new(len: usize, dim: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            dim,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    /// Unnormalized forward transform over every axis.
    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, &self.forward);
    }

    /// Inverse transform including the `1/M^N` normalization.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Forward transform along a single axis.
    pub(crate) fn forward_axis(&self, data: &mut [Complex64], axis: usize) {
        self.apply_axis(data, axis, &self.forward);
    }

    fn apply(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        for axis in 0..self.dim {
            self.apply_axis(data, axis, plan);
        }
    }

    fn apply_axis(&self, data: &mut [Complex64], axis: usize, plan: &Arc<dyn Fft<f64>>) {
        let m = self.len;
        let stride = m.pow((self.dim - 1 - axis) as u32);
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        if stride == 1 {
            plan.process_with_scratch(data, &mut scratch);
            return;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        let block = m * stride;
        for outer in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}
