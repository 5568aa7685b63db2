use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::GruVadConfig;
use crate::error::{Error, Result};

/// One GRU layer. Input weights are `hidden × input` and recurrent weights
/// `hidden × hidden`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GruLayer {
    pub input: usize,
    pub hidden: usize,
    pub w_z: Vec<f64>,
    pub w_r: Vec<f64>,
    pub w_h: Vec<f64>,
    pub u_z: Vec<f64>,
    pub u_r: Vec<f64>,
    pub u_h: Vec<f64>,
    pub b_z: Vec<f64>,
    pub b_r: Vec<f64>,
    pub b_h: Vec<f64>,
}

impl GruLayer {
    fn zeros(input: usize, hidden: usize) -> Self {
        let w = vec![0.0; hidden * input];
        let u = vec![0.0; hidden * hidden];
        let b = vec![0.0; hidden];
        Self {
            input,
            hidden,
            w_z: w.clone(),
            w_r: w.clone(),
            w_h: w,
            u_z: u.clone(),
            u_r: u.clone(),
            u_h: u,
            b_z: b.clone(),
            b_r: b.clone(),
            b_h: b,
        }
    }
}

/// All trainable weights of the VAD.
#[derive(Debug, Clone, PartialEq)]
pub struct GruVadParams {
    pub layers: Vec<GruLayer>,
    /// Head weights, `hidden → 1`.
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl GruVadParams {
    pub fn zeros(input_dim: usize, layers: usize, hidden: usize) -> Self {
        Self {
            layers: (0..layers)
                .map(|l| GruLayer::zeros(if l == 0 { input_dim } else { hidden }, hidden))
                .collect(),
            w_out: vec![0.0; hidden],
            b_out: 0.0,
        }
    }

    /// Uniform(−1/√hidden, 1/√hidden) weights, zero biases.
    pub fn init(config: &GruVadConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros(config.input_dim, config.layers, config.hidden);
        let bound = 1.0 / (config.hidden as f64).sqrt();
        let mut fill = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x = rng.random_range(-bound..bound));
        for layer in &mut p.layers {
            for w in [
                &mut layer.w_z,
                &mut layer.w_r,
                &mut layer.w_h,
                &mut layer.u_z,
                &mut layer.u_r,
                &mut layer.u_h,
            ] {
                fill(w);
            }
        }
        fill(&mut p.w_out);
        p
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].hidden
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.n_layers(), self.hidden())
    }

    /// Every parameter tensor in a fixed order (layer by layer, then head).
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(self.layers.len() * 9 + 2);
        for l in &self.layers {
            out.extend([
                &l.w_z[..], &l.w_r[..], &l.w_h[..], &l.u_z[..], &l.u_r[..], &l.u_h[..], &l.b_z[..], &l.b_r[..], &l.b_h[..],
            ]);
        }
        out.push(&self.w_out);
        out.push(std::slice::from_ref(&self.b_out));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(self.layers.len() * 9 + 2);
        for l in &mut self.layers {
            out.extend([
                &mut l.w_z[..],
                &mut l.w_r[..],
                &mut l.w_h[..],
                &mut l.u_z[..],
                &mut l.u_r[..],
                &mut l.u_h[..],
                &mut l.b_z[..],
                &mut l.b_r[..],
                &mut l.b_h[..],
            ]);
        }
        out.push(&mut self.w_out);
        out.push(std::slice::from_mut(&mut self.b_out));
        out
    }

    pub fn n_values(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &GruVadParams, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += scale * y);
        }
    }

    /// Rounds every value to float32 precision (the checkpoint precision).
    pub fn quantize_f32(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }

    pub(crate) fn check_input(&self, dims: usize) -> Result<()> {
        if dims != self.input_dim() {
            return Err(Error::Shape(format!(
                "features have {dims} dims, model expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }
}
