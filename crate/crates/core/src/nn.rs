//! Small dense networks with manual backpropagation and Adam.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
        }
    }

    /// Multiply `grad` (w.r.t. the activation output `a`) by `da/dz`.
    fn backprop(self, a: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => Zip::from(grad).and(a).for_each(|g, &a| {
                if a <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Tanh => Zip::from(grad).and(a).for_each(|g, &a| *g *= 1.0 - a * a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `inputs x outputs`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub act: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Per-layer activations from a forward pass; `outputs[0]` is the input.
pub struct Cache {
    pub outputs: Vec<Array2<f64>>,
}

impl Cache {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().expect("cache holds the input")
    }
}

#[derive(Debug, Clone)]
pub struct Grads {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Grads {
            w: net.layers.iter().map(|l| Array2::zeros(l.w.raw_dim())).collect(),
            b: net.layers.iter().map(|l| Array1::zeros(l.b.raw_dim())).collect(),
        }
    }
}

impl Mlp {
    /// `sizes = [input, hidden.., output]`; hidden layers use `hidden`, the
    /// last layer `output`. Uniform He/Glorot-style initialisation.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Self {
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let act = if k + 2 == sizes.len() { output } else { hidden };
                let limit = if act == Activation::Relu {
                    (6.0 / fan_in.max(1) as f64).sqrt()
                } else {
                    (6.0 / (fan_in + fan_out).max(1) as f64).sqrt()
                };
                Dense {
                    w: Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-limit..limit)),
                    b: Array1::zeros(fan_out),
                    act,
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn input_width(&self) -> usize {
        self.layers.first().map_or(0, |l| l.w.nrows())
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.ncols())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut h = x.to_owned();
        for l in &self.layers {
            let mut z = h.dot(&l.w) + &l.b;
            l.act.apply(&mut z);
            h = z;
        }
        h
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Cache {
        let mut outputs = vec![x.to_owned()];
        for l in &self.layers {
            let mut z = outputs.last().unwrap().dot(&l.w) + &l.b;
            l.act.apply(&mut z);
            outputs.push(z);
        }
        Cache { outputs }
    }

    /// Gradients of a scalar loss given `grad_out = dL/d(output)`. Returns the
    /// parameter gradients and `dL/d(input)`.
    pub fn backward(&self, cache: &Cache, grad_out: &Array2<f64>) -> (Grads, Array2<f64>) {
        let mut grads = Grads::zeros_like(self);
        let mut g = grad_out.clone();
        for (k, l) in self.layers.iter().enumerate().rev() {
            l.act.backprop(&cache.outputs[k + 1], &mut g);
            grads.w[k] = cache.outputs[k].t().dot(&g);
            grads.b[k] = g.sum_axis(Axis(0));
            g = g.dot(&l.w.t());
        }
        (grads, g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.9,
            eps: 1e-8,
        }
    }
}

pub struct Adam {
    pub config: AdamConfig,
    t: i32,
    m: Grads,
    v: Grads,
}

impl Adam {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        Adam {
            config,
            t: 0,
            m: Grads::zeros_like(net),
            v: Grads::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, g: &Grads) {
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        for (k, layer) in net.layers.iter_mut().enumerate() {
            update(&mut layer.w, &mut self.m.w[k], &mut self.v.w[k], &g.w[k], c, bc1, bc2);
            update(&mut layer.b, &mut self.m.b[k], &mut self.v.b[k], &g.b[k], c, bc1, bc2);
        }
    }
}

fn update<D: ndarray::Dimension>(
    p: &mut ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    g: &ndarray::Array<f64, D>,
    c: AdamConfig,
    bc1: f64,
    bc2: f64,
) {
    Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
        *m = c.beta1 * *m + (1.0 - c.beta1) * g;
        *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
        *p -= c.lr * (*m / bc1) / ((*v / bc2).sqrt() + c.eps);
    });
}

/// Numerically stable `log(sigmoid(x))`.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn loss(net: &Mlp, x: &Array2<f64>, t: &Array2<f64>) -> f64 {
        let y = net.forward(x.view());
        0.5 * (&y - t).mapv(|v| v * v).sum()
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for act in [Activation::Tanh, Activation::Relu] {
            let net = Mlp::new(&[3, 5, 4, 2], act, Activation::Tanh, &mut rng);
            let x = Array2::from_shape_fn((6, 3), |_| rng.gen_range(-1.0..1.0));
            let t = Array2::from_shape_fn((6, 2), |_| rng.gen_range(-1.0..1.0));
            let cache = net.forward_cached(x.view());
            let (g, gx) = net.backward(&cache, &(cache.output() - &t));
            let h = 1e-6;
            for k in 0..net.layers.len() {
                for idx in [(0, 0), (1, 1), (2, 1)] {
                    let mut p = net.clone();
                    p.layers[k].w[idx] += h;
                    let mut m = net.clone();
                    m.layers[k].w[idx] -= h;
                    let fd = (loss(&p, &x, &t) - loss(&m, &x, &t)) / (2.0 * h);
                    assert!((fd - g.w[k][idx]).abs() < 1e-6, "layer {k} {idx:?}: {fd} vs {}", g.w[k][idx]);
                }
                let mut p = net.clone();
                p.layers[k].b[1] += h;
                let mut m = net.clone();
                m.layers[k].b[1] -= h;
                let fd = (loss(&p, &x, &t) - loss(&m, &x, &t)) / (2.0 * h);
                assert!((fd - g.b[k][1]).abs() < 1e-6);
            }
            let mut xp = x.clone();
            xp[[2, 1]] += h;
            let mut xm = x.clone();
            xm[[2, 1]] -= h;
            let fd = (loss(&net, &xp, &t) - loss(&net, &xm, &t)) / (2.0 * h);
            assert!((fd - gx[[2, 1]]).abs() < 1e-6);
        }
    }

    #[test]
    fn adam_fits_a_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = Mlp::new(&[1, 8, 1], Activation::Tanh, Activation::Identity, &mut rng);
        let mut opt = Adam::new(&net, AdamConfig { lr: 1e-2, ..Default::default() });
        let x = Array2::from_shape_fn((32, 1), |(i, _)| i as f64 / 31.0);
        let t = x.mapv(|v| 2.0 * v - 0.5);
        let before = loss(&net, &x, &t);
        for _ in 0..2000 {
            let cache = net.forward_cached(x.view());
            let (g, _) = net.backward(&cache, &(cache.output() - &t));
            opt.step(&mut net, &g);
        }
        let after = loss(&net, &x, &t);
        assert!(after < before * 0.01, "{before} -> {after}");
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) - 0.5f64.ln()).abs() < 1e-15);
        assert!(log_sigmoid(-800.0).is_finite());
        assert!((log_sigmoid(800.0)).abs() < 1e-300);
        assert!((sigmoid(2.0) - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
    }
}
