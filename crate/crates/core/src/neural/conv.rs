//! Depthwise temporal convolution: each feature channel is convolved with
//! its own kernel along the time axis, valid (non-padded), stride 1.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::linalg::Mat;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    /// One kernel per channel: `channels x kernel_len`.
    pub(crate) k: Mat,
    pub(crate) b: Vec<f64>,
    #[serde(skip)]
    kg: Option<Mat>,
    #[serde(skip)]
    bg: Vec<f64>,
}

pub struct ConvCache {
    xs: Vec<Vec<f64>>,
}

impl ConvLayer {
    pub fn new(channels: usize, kernel_len: usize, rng: &mut Rng) -> Self {
        ConvLayer {
            k: Mat::uniform_init(channels, kernel_len, rng),
            b: (0..channels).map(|_| rng.uniform(-0.05, 0.05)).collect(),
            kg: None,
            bg: vec![0.0; channels],
        }
    }

    pub fn zeros(channels: usize, kernel_len: usize) -> Self {
        ConvLayer {
            k: Mat::zeros(channels, kernel_len),
            b: vec![0.0; channels],
            kg: None,
            bg: vec![0.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.k.rows()
    }

    pub fn kernel_len(&self) -> usize {
        self.k.cols()
    }

    /// Sets one channel's kernel; panics if lengths differ. Test helper.
    pub fn set_kernel(&mut self, channel: usize, kernel: &[f64]) {
        assert_eq!(kernel.len(), self.kernel_len());
        for (j, v) in kernel.iter().enumerate() {
            let cur = self.k.get(channel, j);
            self.k.add_at(channel, j, v - cur);
        }
    }

    /// Valid convolution: input `T x D`, output `(T - K + 1) x D`.
    pub fn forward(&self, xs: &[Vec<f64>]) -> (Vec<Vec<f64>>, ConvCache) {
        let k_len = self.kernel_len();
        let d = self.channels();
        debug_assert!(xs.len() >= k_len);
        let out_len = xs.len() - k_len + 1;
        let mut ys = vec![vec![0.0; d]; out_len];
        for (t, y) in ys.iter_mut().enumerate() {
            for (ch, out) in y.iter_mut().enumerate() {
                let mut acc = self.b[ch];
                for j in 0..k_len {
                    acc += self.k.get(ch, j) * xs[t + j][ch];
                }
                *out = acc;
            }
        }
        (ys, ConvCache { xs: xs.to_vec() })
    }

    pub(crate) fn backward(&mut self, cache: &ConvCache, dys: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k_len = self.kernel_len();
        let d = self.channels();
        let t_in = cache.xs.len();
        let kg = self
            .kg
            .get_or_insert_with(|| Mat::zeros(self.k.rows(), self.k.cols()));
        let mut dxs = vec![vec![0.0; d]; t_in];
        for (t, dy) in dys.iter().enumerate() {
            for ch in 0..d {
                let g = dy[ch];
                self.bg[ch] += g;
                for j in 0..k_len {
                    kg.add_at(ch, j, g * cache.xs[t + j][ch]);
                    dxs[t + j][ch] += g * self.k.get(ch, j);
                }
            }
        }
        dxs
    }

    pub(crate) fn zero_grads(&mut self) {
        if let Some(g) = &mut self.kg {
            g.fill_zero();
        }
        self.bg.fill(0.0);
    }

    pub(crate) fn sgd_step(&mut self, scale: f64) {
        if let Some(g) = &self.kg {
            self.k.axpy(scale, g);
        }
        for (b, g) in self.b.iter_mut().zip(&self.bg) {
            *b -= scale * g;
        }
    }

    pub(crate) fn param_count(&self) -> usize {
        self.k.data().len() + self.b.len()
    }

    pub(crate) fn params_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.k.data());
        out.extend_from_slice(&self.b);
    }

    pub(crate) fn grads_into(&self, out: &mut Vec<f64>) {
        match &self.kg {
            Some(g) => out.extend_from_slice(g.data()),
            None => out.extend(core::iter::repeat(0.0).take(self.k.data().len())),
        }
        out.extend_from_slice(&self.bg);
    }

    pub(crate) fn set_params(&mut self, src: &mut core::slice::Iter<'_, f64>) {
        for v in self.k.data_mut() {
            *v = *src.next().expect("param length");
        }
        for v in self.b.iter_mut() {
            *v = *src.next().expect("param length");
        }
    }
}
