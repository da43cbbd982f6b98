//! Recurrent cells: LSTM (input/forget/output gates with a tanh candidate)
//! and GRU (update/reset gates, `h = (1-z) h_prev + z h~`).
//!
//! Each layer owns its gradient buffers; `forward_seq` records the per-step
//! cache that `backward_seq` consumes while running backprop-through-time.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::linalg::{sigmoid, tanh, Mat};
use super::NeuralError;
use crate::rng::Rng;

fn check_len(name: &'static str, got: usize, want: usize) -> Result<(), NeuralError> {
    if got != want {
        return Err(NeuralError::ShapeMismatch { name, got, want });
    }
    Ok(())
}

// ---------------------------------------------------------------- LSTM

/// LSTM layer. Gate order in the stacked weights is `[i, f, g, o]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub(crate) wx: Mat, // 4H x D
    pub(crate) wh: Mat, // 4H x H
    pub(crate) b: Vec<f64>, // 4H
    #[serde(skip)]
    wx_g: Option<Mat>,
    #[serde(skip)]
    wh_g: Option<Mat>,
    #[serde(skip)]
    b_g: Vec<f64>,
}

pub(crate) struct LstmStep {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

pub(crate) struct LstmCache {
    steps: Vec<LstmStep>,
}

impl LstmLayer {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        LstmLayer {
            wx: Mat::uniform_init(4 * hidden, input, rng),
            wh: Mat::uniform_init(4 * hidden, hidden, rng),
            b: (0..4 * hidden).map(|_| rng.uniform(-0.05, 0.05)).collect(),
            wx_g: None,
            wh_g: None,
            b_g: vec![0.0; 4 * hidden],
        }
    }

    /// All-zero parameters; used to pin down the cell equations in tests.
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmLayer {
            wx: Mat::zeros(4 * hidden, input),
            wh: Mat::zeros(4 * hidden, hidden),
            b: vec![0.0; 4 * hidden],
            wx_g: None,
            wh_g: None,
            b_g: vec![0.0; 4 * hidden],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.wx.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.wh.cols()
    }

    /// One cell step: returns the new hidden and cell state.
    pub fn step(
        &self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), NeuralError> {
        check_len("x", x.len(), self.input_dim())?;
        check_len("h_prev", h_prev.len(), self.hidden_dim())?;
        check_len("c_prev", c_prev.len(), self.hidden_dim())?;
        let (h, c, _) = self.step_cached(x, h_prev, c_prev);
        Ok((h, c))
    }

    fn step_cached(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>, LstmStep) {
        let hdim = self.hidden_dim();
        let mut z = self.wx.matvec(x);
        self.wh.matvec_add(h_prev, &mut z);
        for (v, b) in z.iter_mut().zip(&self.b) {
            *v += b;
        }
        let mut i = vec![0.0; hdim];
        let mut f = vec![0.0; hdim];
        let mut g = vec![0.0; hdim];
        let mut o = vec![0.0; hdim];
        for n in 0..hdim {
            i[n] = sigmoid(z[n]);
            f[n] = sigmoid(z[hdim + n]);
            g[n] = tanh(z[2 * hdim + n]);
            o[n] = sigmoid(z[3 * hdim + n]);
        }
        let mut c = vec![0.0; hdim];
        let mut tanh_c = vec![0.0; hdim];
        let mut h = vec![0.0; hdim];
        for n in 0..hdim {
            c[n] = f[n] * c_prev[n] + i[n] * g[n];
            tanh_c[n] = tanh(c[n]);
            h[n] = o[n] * tanh_c[n];
        }
        let cache = LstmStep {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            tanh_c,
        };
        (h, c, cache)
    }

    pub(crate) fn forward_seq(&self, xs: &[Vec<f64>]) -> (Vec<Vec<f64>>, LstmCache) {
        let hdim = self.hidden_dim();
        let mut h = vec![0.0; hdim];
        let mut c = vec![0.0; hdim];
        let mut hs = Vec::with_capacity(xs.len());
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let (nh, nc, step) = self.step_cached(x, &h, &c);
            h = nh;
            c = nc;
            hs.push(h.clone());
            steps.push(step);
        }
        (hs, LstmCache { steps })
    }

    /// Backprop-through-time; `dhs` carries the loss gradient on each
    /// timestep's hidden output (zeros where the output is unused).
    pub(crate) fn backward_seq(&mut self, cache: &LstmCache, dhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let hdim = self.hidden_dim();
        let t_len = cache.steps.len();
        let mut dxs = vec![Vec::new(); t_len];
        let mut dh_next = vec![0.0; hdim];
        let mut dc_next = vec![0.0; hdim];
        let wx_g = self
            .wx_g
            .get_or_insert_with(|| Mat::zeros(self.wx.rows(), self.wx.cols()));
        let wh_g = self
            .wh_g
            .get_or_insert_with(|| Mat::zeros(self.wh.rows(), self.wh.cols()));
        for t in (0..t_len).rev() {
            let st = &cache.steps[t];
            let mut dz = vec![0.0; 4 * hdim];
            let mut dc_prev = vec![0.0; hdim];
            for n in 0..hdim {
                let dh = dhs[t][n] + dh_next[n];
                let do_ = dh * st.tanh_c[n];
                let dct = dh * st.o[n] * (1.0 - st.tanh_c[n] * st.tanh_c[n]) + dc_next[n];
                let di = dct * st.g[n];
                let df = dct * st.c_prev[n];
                let dg = dct * st.i[n];
                dc_prev[n] = dct * st.f[n];
                dz[n] = di * st.i[n] * (1.0 - st.i[n]);
                dz[hdim + n] = df * st.f[n] * (1.0 - st.f[n]);
                dz[2 * hdim + n] = dg * (1.0 - st.g[n] * st.g[n]);
                dz[3 * hdim + n] = do_ * st.o[n] * (1.0 - st.o[n]);
            }
            wx_g.add_outer(&dz, &st.x);
            wh_g.add_outer(&dz, &st.h_prev);
            for (g, d) in self.b_g.iter_mut().zip(&dz) {
                *g += d;
            }
            dxs[t] = self.wx.matvec_t(&dz);
            dh_next = self.wh.matvec_t(&dz);
            dc_next = dc_prev;
        }
        dxs
    }

    pub(crate) fn zero_grads(&mut self) {
        if let Some(m) = &mut self.wx_g {
            m.fill_zero();
        }
        if let Some(m) = &mut self.wh_g {
            m.fill_zero();
        }
        self.b_g.fill(0.0);
    }

    pub(crate) fn sgd_step(&mut self, scale: f64) {
        if let Some(g) = &self.wx_g {
            self.wx.axpy(scale, g);
        }
        if let Some(g) = &self.wh_g {
            self.wh.axpy(scale, g);
        }
        for (b, g) in self.b.iter_mut().zip(&self.b_g) {
            *b -= scale * g;
        }
    }

    pub(crate) fn param_count(&self) -> usize {
        self.wx.data().len() + self.wh.data().len() + self.b.len()
    }

    pub(crate) fn params_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.wx.data());
        out.extend_from_slice(self.wh.data());
        out.extend_from_slice(&self.b);
    }

    pub(crate) fn grads_into(&self, out: &mut Vec<f64>) {
        match &self.wx_g {
            Some(g) => out.extend_from_slice(g.data()),
            None => out.extend(core::iter::repeat(0.0).take(self.wx.data().len())),
        }
        match &self.wh_g {
            Some(g) => out.extend_from_slice(g.data()),
            None => out.extend(core::iter::repeat(0.0).take(self.wh.data().len())),
        }
        out.extend_from_slice(&self.b_g);
    }

    pub(crate) fn set_params(&mut self, src: &mut core::slice::Iter<'_, f64>) {
        for v in self.wx.data_mut() {
            *v = *src.next().expect("param length");
        }
        for v in self.wh.data_mut() {
            *v = *src.next().expect("param length");
        }
        for v in self.b.iter_mut() {
            *v = *src.next().expect("param length");
        }
    }
}

// ---------------------------------------------------------------- GRU

/// GRU layer. The update gate `z` interpolates between the previous hidden
/// state and the candidate: `h = (1 - z) h_prev + z h~`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruLayer {
    pub(crate) wxz: Mat,
    pub(crate) wxr: Mat,
    pub(crate) wxn: Mat, // H x D each
    pub(crate) whz: Mat,
    pub(crate) whr: Mat,
    pub(crate) whn: Mat, // H x H each; whn applies to r (*) h_prev
    pub(crate) bz: Vec<f64>,
    pub(crate) br: Vec<f64>,
    pub(crate) bn: Vec<f64>,
    #[serde(skip)]
    grads: Option<GruGrads>,
}

#[derive(Debug, Clone, PartialEq)]
struct GruGrads {
    wxz: Mat,
    wxr: Mat,
    wxn: Mat,
    whz: Mat,
    whr: Mat,
    whn: Mat,
    bz: Vec<f64>,
    br: Vec<f64>,
    bn: Vec<f64>,
}

pub(crate) struct GruStep {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    rh: Vec<f64>,
}

pub(crate) struct GruCache {
    steps: Vec<GruStep>,
}

impl GruLayer {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        GruLayer {
            wxz: Mat::uniform_init(hidden, input, rng),
            wxr: Mat::uniform_init(hidden, input, rng),
            wxn: Mat::uniform_init(hidden, input, rng),
            whz: Mat::uniform_init(hidden, hidden, rng),
            whr: Mat::uniform_init(hidden, hidden, rng),
            whn: Mat::uniform_init(hidden, hidden, rng),
            bz: (0..hidden).map(|_| rng.uniform(-0.05, 0.05)).collect(),
            br: (0..hidden).map(|_| rng.uniform(-0.05, 0.05)).collect(),
            bn: (0..hidden).map(|_| rng.uniform(-0.05, 0.05)).collect(),
            grads: None,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruLayer {
            wxz: Mat::zeros(hidden, input),
            wxr: Mat::zeros(hidden, input),
            wxn: Mat::zeros(hidden, input),
            whz: Mat::zeros(hidden, hidden),
            whr: Mat::zeros(hidden, hidden),
            whn: Mat::zeros(hidden, hidden),
            bz: vec![0.0; hidden],
            br: vec![0.0; hidden],
            bn: vec![0.0; hidden],
            grads: None,
        }
    }

    /// Sets the update-gate bias; a large negative value saturates `z` to 0
    /// and turns the cell into a memory passthrough.
    pub fn set_update_bias(&mut self, value: f64) {
        self.bz.fill(value);
    }

    pub fn input_dim(&self) -> usize {
        self.wxz.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.whz.cols()
    }

    /// One cell step: returns the new hidden state.
    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>, NeuralError> {
        check_len("x", x.len(), self.input_dim())?;
        check_len("h_prev", h_prev.len(), self.hidden_dim())?;
        let (h, _) = self.step_cached(x, h_prev);
        Ok(h)
    }

    fn step_cached(&self, x: &[f64], h_prev: &[f64]) -> (Vec<f64>, GruStep) {
        let hdim = self.hidden_dim();
        let mut zpre = self.wxz.matvec(x);
        self.whz.matvec_add(h_prev, &mut zpre);
        let mut rpre = self.wxr.matvec(x);
        self.whr.matvec_add(h_prev, &mut rpre);
        let mut z = vec![0.0; hdim];
        let mut r = vec![0.0; hdim];
        for i in 0..hdim {
            z[i] = sigmoid(zpre[i] + self.bz[i]);
            r[i] = sigmoid(rpre[i] + self.br[i]);
        }
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
        let mut npre = self.wxn.matvec(x);
        self.whn.matvec_add(&rh, &mut npre);
        let mut n = vec![0.0; hdim];
        let mut h = vec![0.0; hdim];
        for i in 0..hdim {
            n[i] = tanh(npre[i] + self.bn[i]);
            h[i] = (1.0 - z[i]) * h_prev[i] + z[i] * n[i];
        }
        let cache = GruStep {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            z,
            r,
            n,
            rh,
        };
        (h, cache)
    }

    pub(crate) fn forward_seq(&self, xs: &[Vec<f64>]) -> (Vec<Vec<f64>>, GruCache) {
        let hdim = self.hidden_dim();
        let mut h = vec![0.0; hdim];
        let mut hs = Vec::with_capacity(xs.len());
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let (nh, step) = self.step_cached(x, &h);
            h = nh;
            hs.push(h.clone());
            steps.push(step);
        }
        (hs, GruCache { steps })
    }

    pub(crate) fn backward_seq(&mut self, cache: &GruCache, dhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let hdim = self.hidden_dim();
        let t_len = cache.steps.len();
        let mut dxs = vec![Vec::new(); t_len];
        let mut dh_next = vec![0.0; hdim];
        if self.grads.is_none() {
            let (d, h) = (self.input_dim(), hdim);
            self.grads = Some(GruGrads {
                wxz: Mat::zeros(h, d),
                wxr: Mat::zeros(h, d),
                wxn: Mat::zeros(h, d),
                whz: Mat::zeros(h, h),
                whr: Mat::zeros(h, h),
                whn: Mat::zeros(h, h),
                bz: vec![0.0; h],
                br: vec![0.0; h],
                bn: vec![0.0; h],
            });
        }
        for t in (0..t_len).rev() {
            let st = &cache.steps[t];
            let mut dz_pre = vec![0.0; hdim];
            let mut dn_pre = vec![0.0; hdim];
            let mut dh_prev = vec![0.0; hdim];
            for i in 0..hdim {
                let dh = dhs[t][i] + dh_next[i];
                let dz = dh * (st.n[i] - st.h_prev[i]);
                let dn = dh * st.z[i];
                dh_prev[i] = dh * (1.0 - st.z[i]);
                dz_pre[i] = dz * st.z[i] * (1.0 - st.z[i]);
                dn_pre[i] = dn * (1.0 - st.n[i] * st.n[i]);
            }
            // Through the candidate: d(rh) = whn^T dn_pre.
            let drh = self.whn.matvec_t(&dn_pre);
            let mut dr_pre = vec![0.0; hdim];
            for i in 0..hdim {
                let dr = drh[i] * st.h_prev[i];
                dr_pre[i] = dr * st.r[i] * (1.0 - st.r[i]);
                dh_prev[i] += drh[i] * st.r[i];
            }
            let g = self.grads.as_mut().expect("grads allocated");
            g.wxz.add_outer(&dz_pre, &st.x);
            g.wxr.add_outer(&dr_pre, &st.x);
            g.wxn.add_outer(&dn_pre, &st.x);
            g.whz.add_outer(&dz_pre, &st.h_prev);
            g.whr.add_outer(&dr_pre, &st.h_prev);
            g.whn.add_outer(&dn_pre, &st.rh);
            for i in 0..hdim {
                g.bz[i] += dz_pre[i];
                g.br[i] += dr_pre[i];
                g.bn[i] += dn_pre[i];
            }
            let mut dx = self.wxz.matvec_t(&dz_pre);
            for (a, b) in dx.iter_mut().zip(self.wxr.matvec_t(&dr_pre)) {
                *a += b;
            }
            for (a, b) in dx.iter_mut().zip(self.wxn.matvec_t(&dn_pre)) {
                *a += b;
            }
            let mut dh_p = dh_prev;
            for (a, b) in dh_p.iter_mut().zip(self.whz.matvec_t(&dz_pre)) {
                *a += b;
            }
            for (a, b) in dh_p.iter_mut().zip(self.whr.matvec_t(&dr_pre)) {
                *a += b;
            }
            dxs[t] = dx;
            dh_next = dh_p;
        }
        dxs
    }

    pub(crate) fn zero_grads(&mut self) {
        if let Some(g) = &mut self.grads {
            g.wxz.fill_zero();
            g.wxr.fill_zero();
            g.wxn.fill_zero();
            g.whz.fill_zero();
            g.whr.fill_zero();
            g.whn.fill_zero();
            g.bz.fill(0.0);
            g.br.fill(0.0);
            g.bn.fill(0.0);
        }
    }

    pub(crate) fn sgd_step(&mut self, scale: f64) {
        if let Some(g) = &self.grads {
            self.wxz.axpy(scale, &g.wxz);
            self.wxr.axpy(scale, &g.wxr);
            self.wxn.axpy(scale, &g.wxn);
            self.whz.axpy(scale, &g.whz);
            self.whr.axpy(scale, &g.whr);
            self.whn.axpy(scale, &g.whn);
            for (b, gg) in self.bz.iter_mut().zip(&g.bz) {
                *b -= scale * gg;
            }
            for (b, gg) in self.br.iter_mut().zip(&g.br) {
                *b -= scale * gg;
            }
            for (b, gg) in self.bn.iter_mut().zip(&g.bn) {
                *b -= scale * gg;
            }
        }
    }

    pub(crate) fn param_count(&self) -> usize {
        self.wxz.data().len() * 3 + self.whz.data().len() * 3 + self.bz.len() * 3
    }

    pub(crate) fn params_into(&self, out: &mut Vec<f64>) {
        for m in [&self.wxz, &self.wxr, &self.wxn, &self.whz, &self.whr, &self.whn] {
            out.extend_from_slice(m.data());
        }
        for b in [&self.bz, &self.br, &self.bn] {
            out.extend_from_slice(b);
        }
    }

    pub(crate) fn grads_into(&self, out: &mut Vec<f64>) {
        match &self.grads {
            Some(g) => {
                for m in [&g.wxz, &g.wxr, &g.wxn, &g.whz, &g.whr, &g.whn] {
                    out.extend_from_slice(m.data());
                }
                for b in [&g.bz, &g.br, &g.bn] {
                    out.extend_from_slice(b);
                }
            }
            None => out.extend(core::iter::repeat(0.0).take(self.param_count())),
        }
    }

    pub(crate) fn set_params(&mut self, src: &mut core::slice::Iter<'_, f64>) {
        for m in [
            &mut self.wxz,
            &mut self.wxr,
            &mut self.wxn,
            &mut self.whz,
            &mut self.whr,
            &mut self.whn,
        ] {
            for v in m.data_mut() {
                *v = *src.next().expect("param length");
            }
        }
        for b in [&mut self.bz, &mut self.br, &mut self.bn] {
            for v in b.iter_mut() {
                *v = *src.next().expect("param length");
            }
        }
    }
}
