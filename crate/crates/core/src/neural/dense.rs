//! Densely connected layer with optional tanh squashing.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::linalg::{tanh, Mat};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Linear,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub(crate) w: Mat,
    pub(crate) b: Vec<f64>,
    pub(crate) act: Activation,
    #[serde(skip)]
    wg: Option<Mat>,
    #[serde(skip)]
    bg: Vec<f64>,
}

/// Forward cache: input and post-activation output.
pub(crate) struct DenseCache {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl DenseLayer {
    pub fn new(input: usize, output: usize, act: Activation, rng: &mut Rng) -> Self {
        DenseLayer {
            w: Mat::uniform_init(output, input, rng),
            b: (0..output).map(|_| rng.uniform(-0.05, 0.05)).collect(),
            act,
            wg: None,
            bg: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows()
    }

    pub(crate) fn forward(&self, x: &[f64]) -> (Vec<f64>, DenseCache) {
        let mut y = self.w.matvec(x);
        for (v, b) in y.iter_mut().zip(&self.b) {
            *v += b;
        }
        if self.act == Activation::Tanh {
            for v in y.iter_mut() {
                *v = tanh(*v);
            }
        }
        (
            y.clone(),
            DenseCache {
                x: x.to_vec(),
                y,
            },
        )
    }

    /// Accumulates gradients and returns `dL/dx`.
    pub(crate) fn backward(&mut self, cache: &DenseCache, dy: &[f64]) -> Vec<f64> {
        let mut dpre: Vec<f64> = dy.to_vec();
        if self.act == Activation::Tanh {
            for (d, y) in dpre.iter_mut().zip(&cache.y) {
                *d *= 1.0 - y * y;
            }
        }
        let wg = self
            .wg
            .get_or_insert_with(|| Mat::zeros(self.w.rows(), self.w.cols()));
        wg.add_outer(&dpre, &cache.x);
        for (g, d) in self.bg.iter_mut().zip(&dpre) {
            *g += d;
        }
        self.w.matvec_t(&dpre)
    }

    pub(crate) fn zero_grads(&mut self) {
        if let Some(wg) = &mut self.wg {
            wg.fill_zero();
        }
        self.bg.fill(0.0);
    }

    pub(crate) fn sgd_step(&mut self, scale: f64) {
        if let Some(wg) = &self.wg {
            self.w.axpy(scale, wg);
        }
        for (b, g) in self.b.iter_mut().zip(&self.bg) {
            *b -= scale * g;
        }
    }

    pub(crate) fn param_count(&self) -> usize {
        self.w.data().len() + self.b.len()
    }

    pub(crate) fn params_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.w.data());
        out.extend_from_slice(&self.b);
    }

    pub(crate) fn grads_into(&self, out: &mut Vec<f64>) {
        match &self.wg {
            Some(wg) => out.extend_from_slice(wg.data()),
            None => out.extend(core::iter::repeat(0.0).take(self.w.data().len())),
        }
        out.extend_from_slice(&self.bg);
    }

    pub(crate) fn set_params(&mut self, src: &mut core::slice::Iter<'_, f64>) {
        for v in self.w.data_mut() {
            *v = *src.next().expect("param length");
        }
        for v in self.b.iter_mut() {
            *v = *src.next().expect("param length");
        }
    }
}
