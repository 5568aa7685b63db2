use super::{GruLayer, GruVadParams, LossKind};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Hidden state of every layer.
pub type HiddenState = Vec<Vec<f64>>;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out += W x` for row-major `W` of shape `out.len() × x.len()`.
#[inline]
fn matvec_acc(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += Wᵀ v` for row-major `W` of shape `v.len() × out.len()`.
#[inline]
fn matvec_t_acc(w: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (vi, row) in v.iter().zip(w.chunks_exact(cols)) {
        if *vi != 0.0 {
            out.iter_mut().zip(row).for_each(|(o, a)| *o += vi * a);
        }
    }
}

/// `g += a bᵀ`.
#[inline]
fn outer_acc(g: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    for (ai, row) in a.iter().zip(g.chunks_exact_mut(cols)) {
        if *ai != 0.0 {
            row.iter_mut().zip(b).for_each(|(gij, bj)| *gij += ai * bj);
        }
    }
}

/// Activations kept for backpropagation through one layer.
struct LayerTrace {
    /// `h_{t-1}` for each frame, then the final state: `frames + 1` rows.
    h: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    c: Vec<f64>,
}

/// Runs one layer over `frames` rows of `xs`. Returns the output sequence
/// and, when `trace` is set, the activations.
fn layer_forward(layer: &GruLayer, xs: &[f64], frames: usize, h0: &[f64], trace: bool) -> (Vec<f64>, Option<LayerTrace>) {
    let (n_in, n_h) = (layer.input, layer.hidden);
    let mut out = vec![0.0; frames * n_h];
    let mut tr = trace.then(|| LayerTrace {
        h: Vec::with_capacity((frames + 1) * n_h),
        z: Vec::with_capacity(frames * n_h),
        r: Vec::with_capacity(frames * n_h),
        c: Vec::with_capacity(frames * n_h),
    });
    let mut h = h0.to_vec();
    let (mut z, mut r, mut c, mut rh) = (vec![0.0; n_h], vec![0.0; n_h], vec![0.0; n_h], vec![0.0; n_h]);
    for t in 0..frames {
        let x = &xs[t * n_in..(t + 1) * n_in];
        z.copy_from_slice(&layer.b_z);
        r.copy_from_slice(&layer.b_r);
        c.copy_from_slice(&layer.b_h);
        matvec_acc(&layer.w_z, x, &mut z);
        matvec_acc(&layer.u_z, &h, &mut z);
        matvec_acc(&layer.w_r, x, &mut r);
        matvec_acc(&layer.u_r, &h, &mut r);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));
        r.iter_mut().for_each(|v| *v = sigmoid(*v));
        rh.iter_mut().zip(r.iter().zip(&h)).for_each(|(o, (a, b))| *o = a * b);
        matvec_acc(&layer.w_h, x, &mut c);
        matvec_acc(&layer.u_h, &rh, &mut c);
        c.iter_mut().for_each(|v| *v = v.tanh());
        if let Some(tr) = tr.as_mut() {
            tr.h.extend_from_slice(&h);
            tr.z.extend_from_slice(&z);
            tr.r.extend_from_slice(&r);
            tr.c.extend_from_slice(&c);
        }
        for i in 0..n_h {
            h[i] = (1.0 - z[i]) * c[i] + z[i] * h[i];
        }
        out[t * n_h..(t + 1) * n_h].copy_from_slice(&h);
    }
    if let Some(tr) = tr.as_mut() {
        tr.h.extend_from_slice(&h);
    }
    (out, tr)
}

fn resolve_h0(params: &GruVadParams, h0: Option<&HiddenState>) -> Result<HiddenState> {
    match h0 {
        None => Ok(vec![vec![0.0; params.hidden()]; params.n_layers()]),
        Some(h) if h.len() == params.n_layers() && h.iter().all(|l| l.len() == params.hidden()) => Ok(h.clone()),
        Some(_) => Err(Error::Shape("initial hidden state does not match the model".into())),
    }
}

fn head(params: &GruVadParams, top: &[f64]) -> Vec<f64> {
    top.chunks_exact(params.hidden())
        .map(|h| (params.b_out + h.iter().zip(&params.w_out).map(|(a, b)| a * b).sum::<f64>()).tanh())
        .collect()
}

/// Scores raw row-major inputs (`frames × input_dim`).
pub fn forward_rows(
    params: &GruVadParams,
    inputs: &[f64],
    frames: usize,
    h0: Option<&HiddenState>,
) -> Result<(Vec<f64>, HiddenState)> {
    if inputs.len() != frames * params.input_dim() {
        return Err(Error::Shape(format!(
            "{} input values for {frames} frames of {} dims",
            inputs.len(),
            params.input_dim()
        )));
    }
    let h0 = resolve_h0(params, h0)?;
    let mut seq = std::borrow::Cow::Borrowed(inputs);
    let mut finals = Vec::with_capacity(params.n_layers());
    for (layer, h) in params.layers.iter().zip(&h0) {
        let (out, _) = layer_forward(layer, &seq, frames, h, false);
        finals.push(if frames == 0 { h.clone() } else { out[(frames - 1) * layer.hidden..].to_vec() });
        seq = std::borrow::Cow::Owned(out);
    }
    Ok((head(params, &seq), finals))
}

/// One score in `(-1, +1)` per frame, and the final hidden state. `h0`
/// defaults to zeros.
pub fn forward(params: &GruVadParams, features: &FeatureMatrix, h0: Option<&HiddenState>) -> Result<(Vec<f64>, HiddenState)> {
    params.check_input(features.dims())?;
    forward_rows(params, features.values(), features.frames(), h0)
}

fn check_lengths(scores: &[f64], labels: &[f64]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput("loss over zero frames"));
    }
    Ok(())
}

const BCE_CLAMP: f64 = 1e-7;

fn loss_kind(scores: &[f64], labels: &[f64], kind: LossKind) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n = scores.len() as f64;
    Ok(match kind {
        LossKind::Mse => scores.iter().zip(labels).map(|(s, y)| (s - y).powi(2)).sum::<f64>() / n,
        LossKind::Bce => {
            scores
                .iter()
                .zip(labels)
                .map(|(s, y)| {
                    let p = ((s + 1.0) / 2.0).clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                    let t = (y + 1.0) / 2.0;
                    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
                })
                .sum::<f64>()
                / n
        }
    })
}

/// Mean squared error against ±1 targets.
pub fn loss(scores: &[f64], labels: &[f64]) -> Result<f64> {
    loss_kind(scores, labels, LossKind::Mse)
}

/// d(loss)/d(score) per frame.
pub fn loss_gradient(scores: &[f64], labels: &[f64], kind: LossKind) -> Result<Vec<f64>> {
    check_lengths(scores, labels)?;
    let n = scores.len() as f64;
    Ok(scores
        .iter()
        .zip(labels)
        .map(|(s, y)| match kind {
            LossKind::Mse => 2.0 * (s - y) / n,
            LossKind::Bce => {
                let raw = (s + 1.0) / 2.0;
                if raw <= BCE_CLAMP || raw >= 1.0 - BCE_CLAMP {
                    return 0.0;
                }
                let t = (y + 1.0) / 2.0;
                // dL/dp · dp/ds with p = (s + 1) / 2
                (-(t / raw) + (1.0 - t) / (1.0 - raw)) / (2.0 * n)
            }
        })
        .collect())
}

/// Output of [`backward`].
#[derive(Debug, Clone)]
pub struct Backward {
    pub grads: GruVadParams,
    pub loss: f64,
    pub scores: Vec<f64>,
    pub h_final: HiddenState,
}

/// Exact gradient of the loss over one chunk with respect to every parameter.
/// The initial state is treated as a constant.
pub fn backward(
    params: &GruVadParams,
    features: &FeatureMatrix,
    labels: &[f64],
    h0: Option<&HiddenState>,
    kind: LossKind,
) -> Result<Backward> {
    params.check_input(features.dims())?;
    let frames = features.frames();
    if labels.len() != frames {
        return Err(Error::Shape(format!("{frames} frames vs {} labels", labels.len())));
    }
    let h0 = resolve_h0(params, h0)?;
    let n_h = params.hidden();

    // forward with traces
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(params.n_layers() + 1);
    inputs.push(features.values().to_vec());
    let mut traces = Vec::with_capacity(params.n_layers());
    for (layer, h) in params.layers.iter().zip(&h0) {
        let (out, tr) = layer_forward(layer, inputs.last().unwrap(), frames, h, true);
        traces.push(tr.unwrap());
        inputs.push(out);
    }
    let top = inputs.last().unwrap();
    let scores = head(params, top);
    let loss = loss_kind(&scores, labels, kind)?;
    let dscore = loss_gradient(&scores, labels, kind)?;

    let mut grads = params.zeros_like();
    // head
    let mut d_out = vec![0.0; frames * n_h];
    for t in 0..frames {
        let da = dscore[t] * (1.0 - scores[t] * scores[t]);
        grads.b_out += da;
        let h = &top[t * n_h..(t + 1) * n_h];
        grads.w_out.iter_mut().zip(h).for_each(|(g, x)| *g += da * x);
        d_out[t * n_h..(t + 1) * n_h]
            .iter_mut()
            .zip(&params.w_out)
            .for_each(|(d, w)| *d = da * w);
    }

    // layers, top to bottom
    for l in (0..params.n_layers()).rev() {
        let layer = &params.layers[l];
        let g = &mut grads.layers[l];
        let tr = &traces[l];
        let xs = &inputs[l];
        let n_in = layer.input;
        let need_dx = l > 0;
        let mut d_in = if need_dx { vec![0.0; frames * n_in] } else { Vec::new() };
        let mut carry = vec![0.0; n_h];
        let (mut dh, mut da_z, mut da_r, mut da_c, mut d_rh, mut rh) = (
            vec![0.0; n_h],
            vec![0.0; n_h],
            vec![0.0; n_h],
            vec![0.0; n_h],
            vec![0.0; n_h],
            vec![0.0; n_h],
        );
        for t in (0..frames).rev() {
            let x = &xs[t * n_in..(t + 1) * n_in];
            let h_prev = &tr.h[t * n_h..(t + 1) * n_h];
            let z = &tr.z[t * n_h..(t + 1) * n_h];
            let r = &tr.r[t * n_h..(t + 1) * n_h];
            let c = &tr.c[t * n_h..(t + 1) * n_h];
            for i in 0..n_h {
                dh[i] = d_out[t * n_h + i] + carry[i];
                da_c[i] = dh[i] * (1.0 - z[i]) * (1.0 - c[i] * c[i]);
                da_z[i] = dh[i] * (h_prev[i] - c[i]) * z[i] * (1.0 - z[i]);
                carry[i] = dh[i] * z[i];
                rh[i] = r[i] * h_prev[i];
            }
            // candidate
            outer_acc(&mut g.w_h, &da_c, x);
            outer_acc(&mut g.u_h, &da_c, &rh);
            g.b_h.iter_mut().zip(&da_c).for_each(|(b, d)| *b += d);
            d_rh.fill(0.0);
            matvec_t_acc(&layer.u_h, &da_c, &mut d_rh);
            for i in 0..n_h {
                da_r[i] = d_rh[i] * h_prev[i] * r[i] * (1.0 - r[i]);
                carry[i] += d_rh[i] * r[i];
            }
            // reset and update gates
            outer_acc(&mut g.w_r, &da_r, x);
            outer_acc(&mut g.u_r, &da_r, h_prev);
            g.b_r.iter_mut().zip(&da_r).for_each(|(b, d)| *b += d);
            outer_acc(&mut g.w_z, &da_z, x);
            outer_acc(&mut g.u_z, &da_z, h_prev);
            g.b_z.iter_mut().zip(&da_z).for_each(|(b, d)| *b += d);
            matvec_t_acc(&layer.u_r, &da_r, &mut carry);
            matvec_t_acc(&layer.u_z, &da_z, &mut carry);
            if need_dx {
                let dx = &mut d_in[t * n_in..(t + 1) * n_in];
                matvec_t_acc(&layer.w_z, &da_z, dx);
                matvec_t_acc(&layer.w_r, &da_r, dx);
                matvec_t_acc(&layer.w_h, &da_c, dx);
            }
        }
        d_out = d_in;
    }

    let h_final = traces
        .iter()
        .map(|tr| tr.h[frames * n_h..].to_vec())
        .collect();
    Ok(Backward {
        grads,
        loss,
        scores,
        h_final,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSource;
    use crate::gru::GruVadConfig;
    use crate::seed::rng_for;
    use rand::Rng;

    fn random_instance(seed: u64, input: usize, layers: usize, hidden: usize, frames: usize) -> (GruVadParams, FeatureMatrix) {
        let mut rng = rng_for(seed, &[]);
        let cfg = GruVadConfig {
            input_dim: input,
            layers,
            hidden,
            ..GruVadConfig::default()
        };
        let mut p = GruVadParams::init(&cfg, &mut rng);
        // non-zero biases so every path is exercised
        for t in p.tensors_mut() {
            t.iter_mut().for_each(|v| *v += rng.random_range(-0.3..0.3));
        }
        let x: Vec<f64> = (0..frames * input).map(|_| rng.random_range(-2.0..2.0)).collect();
        (p, FeatureMatrix::new(x, frames, input, 0.01, FeatureSource::Mfb).unwrap())
    }

    /// Straight-line scalar reference for one layer, written independently of
    /// the vectorized path.
    fn reference_scores(p: &GruVadParams, f: &FeatureMatrix) -> Vec<f64> {
        let nh = p.hidden();
        let mut hs: Vec<Vec<f64>> = vec![vec![0.0; nh]; p.n_layers()];
        let mut out = Vec::new();
        for t in 0..f.frames() {
            let mut x: Vec<f64> = f.row(t).to_vec();
            for (l, layer) in p.layers.iter().enumerate() {
                let h = hs[l].clone();
                let mut hn = vec![0.0; nh];
                let mut r_all = vec![0.0; nh];
                for i in 0..nh {
                    let mut a = layer.b_r[i];
                    for j in 0..x.len() {
                        a += layer.w_r[i * x.len() + j] * x[j];
                    }
                    for j in 0..nh {
                        a += layer.u_r[i * nh + j] * h[j];
                    }
                    r_all[i] = 1.0 / (1.0 + (-a).exp());
                }
                for i in 0..nh {
                    let mut az = layer.b_z[i];
                    let mut ac = layer.b_h[i];
                    for j in 0..x.len() {
                        az += layer.w_z[i * x.len() + j] * x[j];
                        ac += layer.w_h[i * x.len() + j] * x[j];
                    }
                    for j in 0..nh {
                        az += layer.u_z[i * nh + j] * h[j];
                        ac += layer.u_h[i * nh + j] * (r_all[j] * h[j]);
                    }
                    let z = 1.0 / (1.0 + (-az).exp());
                    hn[i] = (1.0 - z) * ac.tanh() + z * h[i];
                }
                hs[l] = hn.clone();
                x = hn;
            }
            let mut a = p.b_out;
            for i in 0..nh {
                a += p.w_out[i] * x[i];
            }
            out.push(a.tanh());
        }
        out
    }

    #[test]
    fn zero_params_give_zero_scores() {
        let p = GruVadParams::zeros(3, 1, 4);
        let f = FeatureMatrix::new(vec![1.0; 15], 5, 3, 0.01, FeatureSource::Mfb).unwrap();
        let (s, h) = forward(&p, &f, None).unwrap();
        assert_eq!(s, vec![0.0; 5]);
        assert_eq!(h, vec![vec![0.0; 4]]);
    }

    #[test]
    fn empty_input_keeps_state() {
        let (p, _) = random_instance(1, 3, 2, 4, 1);
        let f = FeatureMatrix::new(vec![], 0, 3, 0.01, FeatureSource::Mfb).unwrap();
        let h0 = vec![vec![0.1, -0.2, 0.3, 0.0], vec![0.5; 4]];
        let (s, h) = forward(&p, &f, Some(&h0)).unwrap();
        assert!(s.is_empty());
        assert_eq!(h, h0);
    }

    #[test]
    fn matches_scalar_reference() {
        for seed in 0..5 {
            let (p, f) = random_instance(seed, 4, 1 + seed as usize % 2, 5, 12);
            let (s, _) = forward(&p, &f, None).unwrap();
            for (a, b) in s.iter().zip(reference_scores(&p, &f)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dim_mismatch() {
        let p = GruVadParams::zeros(3, 1, 4);
        let f = FeatureMatrix::new(vec![0.0; 8], 2, 4, 0.01, FeatureSource::Mfb).unwrap();
        assert!(matches!(forward(&p, &f, None), Err(Error::Shape(_))));
    }

    #[test]
    fn chunked_forward_equals_whole() {
        let (p, f) = random_instance(9, 3, 2, 4, 20);
        let (whole, hw) = forward(&p, &f, None).unwrap();
        let (a, ha) = forward(&p, &f.slice_frames(0, 7), None).unwrap();
        let (b, hb) = forward(&p, &f.slice_frames(7, 20), Some(&ha)).unwrap();
        assert_eq!([a, b].concat(), whole);
        assert_eq!(hb, hw);
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss(&[1.0, -1.0], &[1.0, -1.0]).unwrap(), 0.0);
        assert_eq!(loss(&[0.0; 3], &[1.0; 3]).unwrap(), 1.0);
        assert_eq!(loss(&[0.5, -0.5], &[1.0, 1.0]).unwrap(), 1.25);
        assert!(matches!(loss(&[0.0], &[1.0, 1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn single_frame_head_bias_gradient() {
        let (p, f) = random_instance(3, 3, 1, 4, 1);
        let b = backward(&p, &f, &[1.0], None, LossKind::Mse).unwrap();
        let s = b.scores[0];
        assert!((b.grads.b_out - 2.0 * (s - 1.0) * (1.0 - s * s)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_at_own_scores() {
        let (p, f) = random_instance(4, 3, 2, 4, 6);
        let (s, _) = forward(&p, &f, None).unwrap();
        let b = backward(&p, &f, &s, None, LossKind::Mse).unwrap();
        assert_eq!(b.loss, 0.0);
        assert!(b.grads.tensors().iter().all(|t| t.iter().all(|&g| g == 0.0)));
    }

    fn finite_difference_check(seed: u64, kind: LossKind) {
        let mut rng = rng_for(seed, &[77]);
        let input = rng.random_range(1..=5);
        let hidden = rng.random_range(1..=8);
        let layers = rng.random_range(1..=2);
        let frames = rng.random_range(1..=10);
        let (p, f) = random_instance(seed, input, layers, hidden, frames);
        let labels: Vec<f64> = (0..frames).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let h0: HiddenState = (0..layers)
            .map(|_| (0..hidden).map(|_| rng.random_range(-0.5..0.5)).collect())
            .collect();
        let b = backward(&p, &f, &labels, Some(&h0), kind).unwrap();
        let eval = |q: &GruVadParams| {
            let (s, _) = forward(q, &f, Some(&h0)).unwrap();
            loss_kind(&s, &labels, kind).unwrap()
        };
        let step = 1e-5;
        let analytic: Vec<f64> = b.grads.tensors().concat();
        let mut k = 0;
        let n_tensors = p.tensors().len();
        for ti in 0..n_tensors {
            for j in 0..p.tensors()[ti].len() {
                let mut plus = p.clone();
                plus.tensors_mut()[ti][j] += step;
                let mut minus = p.clone();
                minus.tensors_mut()[ti][j] -= step;
                let numeric = (eval(&plus) - eval(&minus)) / (2.0 * step);
                let a = analytic[k];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                assert!(rel < 1e-4, "seed {seed} tensor {ti}[{j}]: analytic {a} numeric {numeric}");
                k += 1;
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..100 {
            finite_difference_check(seed, LossKind::Mse);
        }
    }

    #[test]
    fn bce_gradients_match_finite_differences() {
        for seed in 100..105 {
            finite_difference_check(seed, LossKind::Bce);
        }
    }

    #[test]
    fn hidden_states_stay_in_unit_box() {
        let (p, f) = random_instance(8, 3, 2, 6, 200);
        let h0 = vec![vec![0.99; 6], vec![-0.99; 6]];
        let b = backward(&p, &f, &vec![1.0; 200], Some(&h0), LossKind::Mse).unwrap();
        assert!(b.scores.iter().all(|s| s.abs() < 1.0));
        assert!(b.h_final.iter().flatten().all(|h| h.abs() < 1.0));
    }
}
