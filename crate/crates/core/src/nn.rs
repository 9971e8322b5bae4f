//! Small CNN layer stack with hand-written reverse-mode gradients.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real array in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::invalid(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("tensor entry {v} is not finite")));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn chw(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::invalid(format!(
                "expected a C×H×W tensor, got shape {:?}",
                self.shape
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// 3×3 convolution, stride 1, zero padding 1.
pub fn conv2d_forward(x: &Tensor, weights: &Tensor, bias: &[f64]) -> Result<Tensor> {
    let (c_in, h, w) = x.chw()?;
    let (k_out, c_w) = match weights.shape[..] {
        [k, c, 3, 3] => (k, c),
        _ => {
            return Err(Error::invalid(format!(
                "conv weights must be K×C×3×3, got {:?}",
                weights.shape
            )))
        }
    };
    if c_w != c_in || bias.len() != k_out {
        return Err(Error::invalid(format!(
            "conv shape mismatch: input channels {c_in}, weight channels {c_w}, bias {} for {k_out} filters",
            bias.len()
        )));
    }
    let mut out = vec![0.0; k_out * h * w];
    for k in 0..k_out {
        let plane = &mut out[k * h * w..(k + 1) * h * w];
        plane.fill(bias[k]);
        for c in 0..c_in {
            let xin = &x.data[c * h * w..(c + 1) * h * w];
            let wk = &weights.data[(k * c_in + c) * 9..(k * c_in + c + 1) * 9];
            for i in 0..h {
                for j in 0..w {
                    let mut acc = 0.0;
                    for m in 0..3 {
                        let r = i + m;
                        if r == 0 || r > h {
                            continue;
                        }
                        for n in 0..3 {
                            let s = j + n;
                            if s == 0 || s > w {
                                continue;
                            }
                            acc += xin[(r - 1) * w + (s - 1)] * wk[m * 3 + n];
                        }
                    }
                    plane[i * w + j] += acc;
                }
            }
        }
    }
    Ok(Tensor {
        shape: vec![k_out, h, w],
        data: out,
    })
}

/// Returns (dW, db, dx).
pub fn conv2d_backward(
    x: &Tensor,
    weights: &Tensor,
    upstream: &Tensor,
) -> Result<(Tensor, Vec<f64>, Tensor)> {
    let (c_in, h, w) = x.chw()?;
    let k_out = weights.shape[0];
    if upstream.shape != [k_out, h, w] {
        return Err(Error::invalid("conv upstream gradient shape mismatch"));
    }
    let mut dw = vec![0.0; weights.len()];
    let mut db = vec![0.0; k_out];
    let mut dx = vec![0.0; x.len()];
    for (k, dbk) in db.iter_mut().enumerate() {
        let g = &upstream.data[k * h * w..(k + 1) * h * w];
        *dbk = g.iter().sum();
        for c in 0..c_in {
            let base = (k * c_in + c) * 9;
            let xin = &x.data[c * h * w..(c + 1) * h * w];
            for i in 0..h {
                for j in 0..w {
                    let gij = g[i * w + j];
                    if gij == 0.0 {
                        continue;
                    }
                    for m in 0..3 {
                        let r = i + m;
                        if r == 0 || r > h {
                            continue;
                        }
                        for n in 0..3 {
                            let s = j + n;
                            if s == 0 || s > w {
                                continue;
                            }
                            let xi = c * h * w + (r - 1) * w + (s - 1);
                            dw[base + m * 3 + n] += gij * xin[(r - 1) * w + (s - 1)];
                            dx[xi] += gij * weights.data[base + m * 3 + n];
                        }
                    }
                }
            }
        }
    }
    Ok((
        Tensor {
            shape: weights.shape.clone(),
            data: dw,
        },
        db,
        Tensor {
            shape: x.shape.clone(),
            data: dx,
        },
    ))
}

pub fn relu(x: &Tensor) -> Tensor {
    Tensor {
        shape: x.shape.clone(),
        data: x.data.iter().map(|&v| v.max(0.0)).collect(),
    }
}

pub fn relu_backward(x: &Tensor, upstream: &Tensor) -> Tensor {
    Tensor {
        shape: x.shape.clone(),
        data: x
            .data
            .iter()
            .zip(&upstream.data)
            .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
            .collect(),
    }
}

/// 2×2 max pooling with stride 2. Ties go to the first element in row-major
/// order. Also returns the flat input index of each maximum.
pub fn maxpool2x2(x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (c, h, w) = x.chw()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::invalid(format!(
            "max pooling needs even spatial dims, got {h}×{w}"
        )));
    }
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * ho * wo);
    let mut argmax = Vec::with_capacity(c * ho * wo);
    for ch in 0..c {
        for i in 0..ho {
            for j in 0..wo {
                let mut best = ch * h * w + 2 * i * w + 2 * j;
                for (m, n) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = ch * h * w + (2 * i + m) * w + 2 * j + n;
                    if x.data[idx] > x.data[best] {
                        best = idx;
                    }
                }
                out.push(x.data[best]);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor {
            shape: vec![c, ho, wo],
            data: out,
        },
        argmax,
    ))
}

pub fn maxpool_backward(input_shape: &[usize], argmax: &[usize], upstream: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(input_shape.to_vec());
    for (&idx, &g) in argmax.iter().zip(&upstream.data) {
        dx.data[idx] += g;
    }
    dx
}

/// Inverted dropout. Returns the output and the per-entry scale (0 or
/// 1/(1−p)) used for the backward pass.
pub fn dropout<R: Rng + ?Sized>(
    x: &Tensor,
    p: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Tensor, Vec<f64>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("dropout probability {p} not in [0, 1)")));
    }
    if mode == Mode::Eval || p == 0.0 {
        return Ok((x.clone(), vec![1.0; x.len()]));
    }
    let keep = 1.0 - p;
    let scale: Vec<f64> = (0..x.len())
        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect();
    let data = x.data.iter().zip(&scale).map(|(v, s)| v * s).collect();
    Ok((
        Tensor {
            shape: x.shape.clone(),
            data,
        },
        scale,
    ))
}

pub fn dropout_backward(scale: &[f64], upstream: &Tensor) -> Tensor {
    Tensor {
        shape: upstream.shape.clone(),
        data: upstream.data.iter().zip(scale).map(|(g, s)| g * s).collect(),
    }
}

/// `W x + b` with `W` stored out×in.
pub fn linear_forward(x: &[f64], weights: &Tensor, bias: &[f64]) -> Result<Vec<f64>> {
    let (out_dim, in_dim) = match weights.shape[..] {
        [o, i] => (o, i),
        _ => return Err(Error::invalid("linear weights must be a matrix")),
    };
    if x.len() != in_dim || bias.len() != out_dim {
        return Err(Error::invalid(format!(
            "linear layer {in_dim}→{out_dim} got input {} and bias {}",
            x.len(),
            bias.len()
        )));
    }
    Ok((0..out_dim)
        .map(|r| {
            bias[r]
                + weights.data[r * in_dim..(r + 1) * in_dim]
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * v)
                    .sum::<f64>()
        })
        .collect())
}

/// Returns (dW, db, dx).
pub fn linear_backward(x: &[f64], weights: &Tensor, upstream: &[f64]) -> (Tensor, Vec<f64>, Vec<f64>) {
    let (out_dim, in_dim) = (weights.shape[0], weights.shape[1]);
    let mut dw = vec![0.0; out_dim * in_dim];
    let mut dx = vec![0.0; in_dim];
    for r in 0..out_dim {
        let g = upstream[r];
        for c in 0..in_dim {
            dw[r * in_dim + c] = g * x[c];
            dx[c] += g * weights.data[r * in_dim + c];
        }
    }
    (
        Tensor {
            shape: weights.shape.clone(),
            data: dw,
        },
        upstream.to_vec(),
        dx,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub weight: Tensor,
    pub bias: Vec<f64>,
    pub use_bias: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Vec<f64>,
    pub use_bias: bool,
}

fn uniform_init<R: Rng + ?Sized>(rng: &mut R, n: usize, fan_in: usize) -> Vec<f64> {
    let bound = (1.0 / fan_in as f64).sqrt();
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

impl Conv2d {
    pub fn init<R: Rng + ?Sized>(rng: &mut R, in_ch: usize, out_ch: usize, use_bias: bool) -> Self {
        let fan_in = in_ch * 9;
        let weight = Tensor {
            shape: vec![out_ch, in_ch, 3, 3],
            data: uniform_init(rng, out_ch * in_ch * 9, fan_in),
        };
        let bias = if use_bias {
            uniform_init(rng, out_ch, fan_in)
        } else {
            vec![0.0; out_ch]
        };
        Conv2d {
            weight,
            bias,
            use_bias,
        }
    }
}

impl Linear {
    pub fn init<R: Rng + ?Sized>(rng: &mut R, in_dim: usize, out_dim: usize, use_bias: bool) -> Self {
        let weight = Tensor {
            shape: vec![out_dim, in_dim],
            data: uniform_init(rng, out_dim * in_dim, in_dim),
        };
        let bias = if use_bias {
            uniform_init(rng, out_dim, in_dim)
        } else {
            vec![0.0; out_dim]
        };
        Linear {
            weight,
            bias,
            use_bias,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Conv(Conv2d),
    Relu,
    MaxPool,
    Dropout { p: f64 },
    Flatten,
    Linear(Linear),
}

impl Layer {
    fn param_len(&self) -> usize {
        match self {
            Layer::Conv(c) => c.weight.len() + if c.use_bias { c.bias.len() } else { 0 },
            Layer::Linear(l) => l.weight.len() + if l.use_bias { l.bias.len() } else { 0 },
            _ => 0,
        }
    }
}

/// Per-layer forward context kept for the backward pass.
#[derive(Clone, Debug)]
pub enum LayerCache {
    Conv { input: Tensor },
    Relu { input: Tensor },
    Pool { input_shape: Vec<usize>, argmax: Vec<usize> },
    Dropout { scale: Vec<f64> },
    Flatten { input_shape: Vec<usize> },
    Linear { input: Vec<f64> },
}

/// Forward context of a whole stack.
#[derive(Clone, Debug, Default)]
pub struct StackCache {
    layers: Vec<LayerCache>,
}

/// Shape after a named stage of the stack.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeRow {
    pub layer: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    layers: Vec<Layer>,
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>) -> Self {
        LayerStack { layers }
    }

    /// Three Conv→ReLU→Pool→Dropout blocks (16, 32, 64 channels), flatten,
    /// then Linear(64 → n_out).
    pub fn feature_extractor<R: Rng + ?Sized>(
        rng: &mut R,
        n_out: usize,
        dropout_p: f64,
        use_bias: bool,
    ) -> Self {
        let mut layers = Vec::new();
        let mut in_ch = 1;
        for out_ch in [16, 32, 64] {
            layers.push(Layer::Conv(Conv2d::init(rng, in_ch, out_ch, use_bias)));
            layers.push(Layer::Relu);
            layers.push(Layer::MaxPool);
            layers.push(Layer::Dropout { p: dropout_p });
            in_ch = out_ch;
        }
        layers.push(Layer::Flatten);
        layers.push(Layer::Linear(Linear::init(rng, 64, n_out, use_bias)));
        LayerStack { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &Tensor,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Tensor, StackCache)> {
        let mut x = input.clone();
        let mut cache = StackCache::default();
        for layer in &self.layers {
            let (next, entry) = match layer {
                Layer::Conv(c) => (
                    conv2d_forward(&x, &c.weight, &c.bias)?,
                    LayerCache::Conv { input: x },
                ),
                Layer::Relu => (relu(&x), LayerCache::Relu { input: x }),
                Layer::MaxPool => {
                    let (y, argmax) = maxpool2x2(&x)?;
                    (
                        y,
                        LayerCache::Pool {
                            input_shape: x.shape,
                            argmax,
                        },
                    )
                }
                Layer::Dropout { p } => {
                    let (y, scale) = dropout(&x, *p, mode, rng)?;
                    (y, LayerCache::Dropout { scale })
                }
                Layer::Flatten => {
                    let n = x.len();
                    let shape = x.shape.clone();
                    (
                        Tensor {
                            shape: vec![n],
                            data: x.data,
                        },
                        LayerCache::Flatten { input_shape: shape },
                    )
                }
                Layer::Linear(l) => {
                    if x.shape.len() != 1 {
                        return Err(Error::invalid("linear layer expects a flat vector"));
                    }
                    let y = linear_forward(&x.data, &l.weight, &l.bias)?;
                    (
                        Tensor {
                            shape: vec![y.len()],
                            data: y,
                        },
                        LayerCache::Linear { input: x.data },
                    )
                }
            };
            cache.layers.push(entry);
            x = next;
        }
        Ok((x, cache))
    }

    /// Eval-mode forward without keeping a cache.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        // eval mode never draws from the generator
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        Ok(self.forward(input, Mode::Eval, &mut rng)?.0)
    }

    /// Returns the flat parameter gradient (same layout as
    /// [`LayerStack::params`]) and the gradient with respect to the input.
    pub fn backward(&self, cache: &StackCache, upstream: &Tensor) -> Result<(Vec<f64>, Tensor)> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::State(
                "backward called without a matching forward cache".into(),
            ));
        }
        let mut per_layer: Vec<Vec<f64>> = vec![Vec::new(); self.layers.len()];
        let mut g = upstream.clone();
        for (idx, (layer, entry)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            g = match (layer, entry) {
                (Layer::Conv(c), LayerCache::Conv { input }) => {
                    let (dw, db, dx) = conv2d_backward(input, &c.weight, &g)?;
                    let mut p = dw.data;
                    if c.use_bias {
                        p.extend(db);
                    }
                    per_layer[idx] = p;
                    dx
                }
                (Layer::Relu, LayerCache::Relu { input }) => relu_backward(input, &g),
                (Layer::MaxPool, LayerCache::Pool { input_shape, argmax }) => {
                    maxpool_backward(input_shape, argmax, &g)
                }
                (Layer::Dropout { .. }, LayerCache::Dropout { scale }) => {
                    dropout_backward(scale, &g)
                }
                (Layer::Flatten, LayerCache::Flatten { input_shape }) => Tensor {
                    shape: input_shape.clone(),
                    data: g.data,
                },
                (Layer::Linear(l), LayerCache::Linear { input }) => {
                    let (dw, db, dx) = linear_backward(input, &l.weight, &g.data);
                    let mut p = dw.data;
                    if l.use_bias {
                        p.extend(db);
                    }
                    per_layer[idx] = p;
                    Tensor {
                        shape: vec![dx.len()],
                        data: dx,
                    }
                }
                _ => return Err(Error::State("forward cache does not match layer".into())),
            };
        }
        Ok((per_layer.concat(), g))
    }

    pub fn param_len(&self) -> usize {
        self.layers.iter().map(Layer::param_len).sum()
    }

    /// Flat parameter vector: per layer in order, weights then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_len());
        for layer in &self.layers {
            match layer {
                Layer::Conv(Conv2d {
                    weight,
                    bias,
                    use_bias,
                })
                | Layer::Linear(Linear {
                    weight,
                    bias,
                    use_bias,
                }) => {
                    out.extend_from_slice(&weight.data);
                    if *use_bias {
                        out.extend_from_slice(bias);
                    }
                }
                _ => {}
            }
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_len() {
            return Err(Error::invalid(format!(
                "stack has {} parameters, got {}",
                self.param_len(),
                flat.len()
            )));
        }
        let mut off = 0;
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(Conv2d {
                    weight,
                    bias,
                    use_bias,
                })
                | Layer::Linear(Linear {
                    weight,
                    bias,
                    use_bias,
                }) => {
                    let n = weight.data.len();
                    weight.data.copy_from_slice(&flat[off..off + n]);
                    off += n;
                    if *use_bias {
                        let m = bias.len();
                        bias.copy_from_slice(&flat[off..off + m]);
                        off += m;
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Named parameter tensors (`conv1.weight`, `conv1.bias`, …, `linear.weight`).
    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        let mut conv_idx = 0;
        for layer in &self.layers {
            let (name, weight, bias, use_bias) = match layer {
                Layer::Conv(c) => {
                    conv_idx += 1;
                    (format!("conv{conv_idx}"), &c.weight, &c.bias, c.use_bias)
                }
                Layer::Linear(l) => ("linear".to_string(), &l.weight, &l.bias, l.use_bias),
                _ => continue,
            };
            out.push((format!("{name}.weight"), weight.clone()));
            if use_bias {
                out.push((
                    format!("{name}.bias"),
                    Tensor {
                        shape: vec![bias.len()],
                        data: bias.clone(),
                    },
                ));
            }
        }
        out
    }

    /// Input shape plus the output shape of every convolution, pooling,
    /// flatten and linear stage.
    pub fn shape_chain(&self, input_shape: &[usize]) -> Result<Vec<ShapeRow>> {
        let mut rows = vec![ShapeRow {
            layer: "Input".into(),
            shape: input_shape.to_vec(),
        }];
        let mut x = Tensor::zeros(input_shape.to_vec());
        let (mut n_conv, mut n_pool) = (0, 0);
        for layer in &self.layers {
            let single = LayerStack {
                layers: vec![layer.clone()],
            };
            x = single.infer(&x)?;
            let name = match layer {
                Layer::Conv(_) => {
                    n_conv += 1;
                    format!("Conv{n_conv}")
                }
                Layer::MaxPool => {
                    n_pool += 1;
                    format!("Pool{n_pool}")
                }
                Layer::Flatten => "Flatten".into(),
                Layer::Linear(_) => "Linear".into(),
                Layer::Relu | Layer::Dropout { .. } => continue,
            };
            rows.push(ShapeRow {
                layer: name,
                shape: x.shape.clone(),
            });
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], data: Vec<f64>) -> Tensor {
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        t(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn conv_counts_in_bounds_taps() {
        let x = t(&[1, 3, 3], vec![1.0; 9]);
        let w = t(&[1, 1, 3, 3], vec![1.0; 9]);
        let y = conv2d_forward(&x, &w, &[0.0]).unwrap();
        assert_eq!(y.data()[4], 9.0);
        assert_eq!(y.data()[0], 4.0);
        assert_eq!(y.data()[1], 6.0);
    }

    #[test]
    fn conv_zero_input_gives_bias() {
        let x = Tensor::zeros(vec![2, 4, 4]);
        let w = t(&[3, 2, 3, 3], vec![0.5; 54]);
        let y = conv2d_forward(&x, &w, &[1.0, -2.0, 0.25]).unwrap();
        assert_eq!(y.shape(), &[3, 4, 4]);
        for k in 0..3 {
            assert!(y.data()[k * 16..(k + 1) * 16]
                .iter()
                .all(|&v| v == [1.0, -2.0, 0.25][k]));
        }
        assert!(conv2d_forward(&x, &w, &[1.0]).is_err());
        assert!(conv2d_forward(&Tensor::zeros(vec![3, 4, 4]), &w, &[0.0; 3]).is_err());
    }

    #[test]
    fn conv_matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&mut rng, &[2, 8, 8]);
        let w = random(&mut rng, &[3, 2, 3, 3]);
        let b = vec![0.1, -0.2, 0.3];
        let y = conv2d_forward(&x, &w, &b).unwrap();
        for k in 0..3 {
            for i in 0..8i64 {
                for j in 0..8i64 {
                    let mut want = b[k];
                    for c in 0..2 {
                        for m in 0..3i64 {
                            for n in 0..3i64 {
                                let (r, s) = (i + m - 1, j + n - 1);
                                if (0..8).contains(&r) && (0..8).contains(&s) {
                                    want += x.data()[c * 64 + (r * 8 + s) as usize]
                                        * w.data()[(k * 2 + c) * 9 + (m * 3 + n) as usize];
                                }
                            }
                        }
                    }
                    let got = y.data()[k * 64 + (i * 8 + j) as usize];
                    assert!((got - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn relu_cases() {
        let y = relu(&t(&[3], vec![-1.0, 0.0, 2.0]));
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
        assert!(relu(&t(&[2], vec![-3.0, -0.1])).data().iter().all(|&v| v == 0.0));
        let x = t(&[4], vec![-1.0, 3.0, 0.5, -2.0]);
        assert_eq!(relu(&relu(&x)), relu(&x));
        let g = t(&[4], vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(relu_backward(&x, &g).data(), &[0.0, 2.0, 3.0, 0.0]);
    }

    #[test]
    fn pool_cases() {
        let (y, _) = maxpool2x2(&t(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(y.data(), &[4.0]);
        let (y, arg) = maxpool2x2(&t(&[2, 4, 4], vec![0.7; 32])).unwrap();
        assert_eq!(y.shape(), &[2, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 0.7));
        // ties resolve to the block's first element
        assert_eq!(arg[0], 0);
        assert_eq!(arg[1], 2);
        let (y, _) = maxpool2x2(&Tensor::zeros(vec![16, 8, 8])).unwrap();
        assert_eq!(y.shape(), &[16, 4, 4]);
        assert!(maxpool2x2(&Tensor::zeros(vec![1, 3, 4])).is_err());
    }

    #[test]
    fn pool_backward_scatters_once_per_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(&mut rng, &[2, 4, 4]);
        let (y, arg) = maxpool2x2(&x).unwrap();
        let g = t(y.shape(), vec![1.0; y.len()]);
        let dx = maxpool_backward(x.shape(), &arg, &g);
        for c in 0..2 {
            for bi in 0..2 {
                for bj in 0..2 {
                    let nz = [(0, 0), (0, 1), (1, 0), (1, 1)]
                        .iter()
                        .filter(|(m, n)| dx.data()[c * 16 + (2 * bi + m) * 4 + 2 * bj + n] != 0.0)
                        .count();
                    assert_eq!(nz, 1);
                }
            }
        }
    }

    #[test]
    fn dropout_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = t(&[4], vec![1.0, -2.0, 3.0, 4.0]);
        assert_eq!(dropout(&x, 0.5, Mode::Eval, &mut rng).unwrap().0, x);
        assert_eq!(dropout(&x, 0.0, Mode::Train, &mut rng).unwrap().0, x);
        assert!(dropout(&x, 1.0, Mode::Train, &mut rng).is_err());
        let big = t(&[1_000_000], vec![1.0; 1_000_000]);
        let (y, _) = dropout(&big, 0.5, Mode::Train, &mut rng).unwrap();
        let mean = y.data().iter().sum::<f64>() / y.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn linear_cases() {
        let eye = t(&[3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let x = [0.3, -1.0, 2.5];
        assert_eq!(linear_forward(&x, &eye, &[0.0; 3]).unwrap(), x.to_vec());
        let b = [1.0, 2.0, 3.0];
        assert_eq!(linear_forward(&[0.0; 3], &eye, &b).unwrap(), b.to_vec());
        assert!(linear_forward(&[0.0; 2], &eye, &b).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = random(&mut rng, &[4, 6]);
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = linear_forward(&x, &w, &b).unwrap();
        for r in 0..4 {
            let mut want = b[r];
            for c in 0..6 {
                want += w.data()[r * 6 + c] * x[c];
            }
            assert!((y[r] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn tensor_validation() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::new(vec![1], vec![f64::NAN]).is_err());
    }

    #[test]
    fn backward_without_cache_is_state_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let stack = LayerStack::feature_extractor(&mut rng, 3, 0.5, true);
        let err = stack
            .backward(&StackCache::default(), &Tensor::zeros(vec![3]))
            .unwrap_err();
        assert!(matches!(err, Error::State(_)));
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut stack = LayerStack::feature_extractor(&mut rng, 3, 0.5, true);
        let p = stack.params();
        assert_eq!(p.len(), stack.param_len());
        let q: Vec<f64> = p.iter().map(|v| v * 2.0).collect();
        stack.set_params(&q).unwrap();
        assert_eq!(stack.params(), q);
        let names: Vec<String> = stack.named_tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names[0], "conv1.weight");
        assert_eq!(names.last().unwrap(), "linear.bias");
        let no_bias = LayerStack::feature_extractor(&mut rng, 3, 0.5, false);
        assert_eq!(
            no_bias.param_len(),
            16 * 9 + 32 * 16 * 9 + 64 * 32 * 9 + 3 * 64
        );
    }
}
