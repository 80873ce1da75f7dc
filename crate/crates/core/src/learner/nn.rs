//! Small fully connected networks with manual backpropagation and Adam.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    pub(crate) fn to_code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Tanh => 1,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `outputs x inputs`.
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Dense {
    fn zeros_like(&self) -> Self {
        Self {
            w: DMatrix::zeros(self.w.nrows(), self.w.ncols()),
            b: DVector::zeros(self.b.len()),
        }
    }
}

/// ReLU hidden layers, configurable output activation. Inputs are columns:
/// a batch is an `inputs x batch` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub output: Activation,
}

/// Per-layer values kept from a forward pass.
pub struct Trace {
    inputs: Vec<DMatrix<f64>>,
    pre: Vec<DMatrix<f64>>,
    out: DMatrix<f64>,
}

impl Trace {
    /// Output layer values before the output activation.
    pub fn pre_output(&self) -> &DMatrix<f64> {
        self.pre.last().expect("at least one layer")
    }

    pub fn output(&self) -> &DMatrix<f64> {
        &self.out
    }
}

/// Same shapes as the network's parameters.
pub type Grads = Vec<Dense>;

impl Mlp {
    /// Hidden layers get He-uniform weights; the last layer is drawn from
    /// `±final_scale` so initial outputs sit near zero.
    pub fn new(sizes: &[usize], output: Activation, final_scale: f64, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (n_in, n_out) = (w[0], w[1]);
                let bound = if i == last {
                    final_scale
                } else {
                    (6.0 / n_in as f64).sqrt()
                };
                let mut draw = |_, _| rng.random_range(-bound..=bound);
                Dense {
                    w: DMatrix::from_fn(n_out, n_in, &mut draw),
                    b: if i == last {
                        DVector::from_fn(n_out, |_, _| rng.random_range(-bound..=bound))
                    } else {
                        DVector::zeros(n_out)
                    },
                }
            })
            .collect();
        Self { layers, output }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().unwrap().w.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.forward_trace(x).out
    }

    pub fn forward_trace(&self, x: &DMatrix<f64>) -> Trace {
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = &l.w * &h;
            for mut col in z.column_iter_mut() {
                col += &l.b;
            }
            inputs.push(h);
            h = if i + 1 < n {
                z.map(|v| v.max(0.0))
            } else {
                match self.output {
                    Activation::Identity => z.clone(),
                    Activation::Tanh => z.map(f64::tanh),
                }
            };
            pre.push(z);
        }
        Trace { inputs, pre, out: h }
    }

    /// Given d(loss)/d(output), returns d(loss)/d(params) and d(loss)/d(input).
    pub fn backward(&self, trace: &Trace, d_out: &DMatrix<f64>) -> (Grads, DMatrix<f64>) {
        let delta = match self.output {
            Activation::Identity => d_out.clone(),
            Activation::Tanh => d_out.component_mul(&trace.out.map(|y| 1.0 - y * y)),
        };
        self.backward_pre(trace, delta)
    }

    /// Same as [`Mlp::backward`] but starting from d(loss)/d(output
    /// pre-activation).
    pub fn backward_pre(&self, trace: &Trace, mut delta: DMatrix<f64>) -> (Grads, DMatrix<f64>) {
        let n = self.layers.len();
        let mut grads: Grads = self.layers.iter().map(Dense::zeros_like).collect();
        for i in (0..n).rev() {
            grads[i].w = &delta * trace.inputs[i].transpose();
            grads[i].b = delta.column_sum();
            let d_in = self.layers[i].w.transpose() * &delta;
            if i == 0 {
                return (grads, d_in);
            }
            let mask = trace.pre[i - 1].map(|z| if z > 0.0 { 1.0 } else { 0.0 });
            delta = d_in.component_mul(&mask);
        }
        unreachable!()
    }

    /// `self = (1 - tau) * self + tau * other`.
    pub fn soft_update(&mut self, other: &Mlp, tau: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w = &a.w * (1.0 - tau) + &b.w * tau;
            a.b = &a.b * (1.0 - tau) + &b.b * tau;
        }
    }

    /// Parameters flattened layer by layer (weights row-major, then bias).
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            for r in 0..l.w.nrows() {
                out.extend(l.w.row(r).iter());
            }
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count());
        let mut k = 0;
        for l in &mut self.layers {
            for r in 0..l.w.nrows() {
                for c in 0..l.w.ncols() {
                    l.w[(r, c)] = p[k];
                    k += 1;
                }
            }
            for v in l.b.iter_mut() {
                *v = p[k];
                k += 1;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }
}

pub fn flatten(grads: &Grads) -> Vec<f64> {
    let mut out = Vec::new();
    for l in grads {
        for r in 0..l.w.nrows() {
            out.extend(l.w.row(r).iter());
        }
        out.extend(l.b.iter());
    }
    out
}

/// Adam with the usual bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Grads,
    pub v: Grads,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: net.layers.iter().map(Dense::zeros_like).collect(),
            v: net.layers.iter().map(Dense::zeros_like).collect(),
        }
    }

    /// One descent step along `grads`.
    pub fn apply(&mut self, net: &mut Mlp, grads: &Grads) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let (lr, eps) = (self.lr, self.eps);
        for ((layer, g), (m, v)) in net.layers.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let upd = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            };
            for (((p, g), m), v) in layer.w.iter_mut().zip(g.w.iter()).zip(m.w.iter_mut()).zip(v.w.iter_mut()) {
                upd(p, *g, m, v);
            }
            for (((p, g), m), v) in layer.b.iter_mut().zip(g.b.iter()).zip(m.b.iter_mut()).zip(v.b.iter_mut()) {
                upd(p, *g, m, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(sizes: &[usize], act: Activation, seed: u64) -> Mlp {
        Mlp::new(sizes, act, 0.5, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Loss = sum of squared outputs / 2, so d(loss)/d(out) = out.
    fn loss(n: &Mlp, x: &DMatrix<f64>) -> f64 {
        n.forward(x).iter().map(|v| 0.5 * v * v).sum()
    }

    #[test]
    fn shapes_and_param_round_trip() {
        let mut n = net(&[5, 7, 3], Activation::Tanh, 1);
        assert_eq!(n.param_count(), 5 * 7 + 7 + 7 * 3 + 3);
        let x = DMatrix::from_fn(5, 4, |r, c| (r as f64 - c as f64) * 0.1);
        assert_eq!(n.forward(&x).shape(), (3, 4));
        let p = n.params();
        let mut m = n.clone();
        m.set_params(&p);
        assert_eq!(m, n);
        n.set_params(&vec![0.0; p.len()]);
        assert!(n.forward(&x).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        for act in [Activation::Identity, Activation::Tanh] {
            let n = net(&[4, 6, 5, 2], act, 3);
            let x = DMatrix::from_fn(4, 3, |r, c| ((r * 3 + c) as f64 * 0.37).sin());
            let tr = n.forward_trace(&x);
            let (g, dx) = n.backward(&tr, tr.output());
            let analytic = flatten(&g);
            let p = n.params();
            let h = 1e-6;
            for k in 0..p.len() {
                let mut q = p.clone();
                q[k] += h;
                let mut up = n.clone();
                up.set_params(&q);
                q[k] -= 2.0 * h;
                let mut dn = n.clone();
                dn.set_params(&q);
                let fd = (loss(&up, &x) - loss(&dn, &x)) / (2.0 * h);
                assert!((fd - analytic[k]).abs() < 1e-6 * (1.0 + fd.abs()), "{act:?} param {k}: {fd} vs {}", analytic[k]);
            }
            for r in 0..4 {
                for c in 0..3 {
                    let mut xp = x.clone();
                    xp[(r, c)] += h;
                    let mut xm = x.clone();
                    xm[(r, c)] -= h;
                    let fd = (loss(&n, &xp) - loss(&n, &xm)) / (2.0 * h);
                    assert!((fd - dx[(r, c)]).abs() < 1e-6 * (1.0 + fd.abs()));
                }
            }
        }
    }

    #[test]
    fn soft_update_interpolates() {
        let mut a = net(&[2, 3, 1], Activation::Identity, 1);
        let b = net(&[2, 3, 1], Activation::Identity, 2);
        let (pa, pb) = (a.params(), b.params());
        a.soft_update(&b, 0.25);
        for ((x, y), z) in pa.iter().zip(&pb).zip(a.params()) {
            assert!((0.75 * x + 0.25 * y - z).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_fits_a_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut n = Mlp::new(&[1, 16, 1], Activation::Identity, 0.1, &mut rng);
        let mut opt = Adam::new(&n, 1e-2);
        let x = DMatrix::from_fn(1, 32, |_, c| c as f64 / 16.0 - 1.0);
        let y = x.map(|v| 0.5 * v - 0.2);
        for _ in 0..2000 {
            let tr = n.forward_trace(&x);
            let d = (tr.output() - &y) * (2.0 / 32.0);
            let (g, _) = n.backward(&tr, &d);
            opt.apply(&mut n, &g);
        }
        let err = (n.forward(&x) - y).abs().max();
        assert!(err < 0.02, "{err}");
    }
}
