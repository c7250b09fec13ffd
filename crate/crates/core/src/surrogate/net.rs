//! Minimal dense networks with manual backprop.
//!
//! Parameters live in one flat `Vec<f64>` per network so the optimizer can
//! treat them uniformly. Hidden layers use tanh (smooth everywhere, so
//! finite-difference Hessian probes behave); outputs are linear. Dropout is
//! applied as explicit masks passed by the caller, which keeps sampling
//! seedable and forward passes pure.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Shape of a fully connected stack: `dims[0]` inputs through `dims.last()`
/// outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpShape {
    pub dims: Vec<usize>,
}

impl MlpShape {
    pub fn new(dims: Vec<usize>) -> Self {
        assert!(dims.len() >= 2, "need input and output dims");
        MlpShape { dims }
    }

    pub fn layer_count(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn param_count(&self) -> usize {
        (0..self.layer_count())
            .map(|l| self.dims[l] * self.dims[l + 1] + self.dims[l + 1])
            .sum()
    }

    fn layer_offset(&self, layer: usize) -> usize {
        (0..layer)
            .map(|l| self.dims[l] * self.dims[l + 1] + self.dims[l + 1])
            .sum()
    }

    /// Number of hidden activations (mask slots) per forward pass.
    pub fn hidden_count(&self) -> usize {
        self.dims[1..self.dims.len() - 1].iter().sum()
    }

    pub fn init_params<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = vec![0.0; self.param_count()];
        for l in 0..self.layer_count() {
            let fan_in = self.dims[l] as f64;
            let scale = (1.0 / fan_in).sqrt();
            let off = self.layer_offset(l);
            let w_len = self.dims[l] * self.dims[l + 1];
            for p in params.iter_mut().skip(off).take(w_len) {
                *p = rng.gen_range(-scale..scale);
            }
            // biases stay zero
        }
        params
    }
}

/// Forward activations cached for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    /// Layer inputs (post-activation, post-mask of the previous layer);
    /// `acts[0]` is the network input.
    pub acts: Vec<Vec<f64>>,
    /// Pre-activation values per layer.
    pub pre: Vec<Vec<f64>>,
}

/// Forward pass. `masks`, when given, holds one multiplicative mask per
/// hidden layer (already scaled by 1/(1-p)).
pub fn forward(shape: &MlpShape, params: &[f64], x: &[f64], masks: Option<&[Vec<f64>]>) -> (Vec<f64>, Cache) {
    debug_assert_eq!(x.len(), shape.dims[0]);
    let mut acts = vec![x.to_vec()];
    let mut pre = Vec::with_capacity(shape.layer_count());
    let mut cur = x.to_vec();
    for l in 0..shape.layer_count() {
        let (n_in, n_out) = (shape.dims[l], shape.dims[l + 1]);
        let off = shape.layer_offset(l);
        let w = &params[off..off + n_in * n_out];
        let b = &params[off + n_in * n_out..off + n_in * n_out + n_out];
        let mut z = vec![0.0; n_out];
        for o in 0..n_out {
            let mut acc = b[o];
            let row = &w[o * n_in..(o + 1) * n_in];
            for (i, &xi) in cur.iter().enumerate() {
                acc += row[i] * xi;
            }
            z[o] = acc;
        }
        pre.push(z.clone());
        let last = l + 1 == shape.layer_count();
        let mut a = if last {
            z
        } else {
            z.iter().map(|&v| v.tanh()).collect()
        };
        if !last {
            if let Some(ms) = masks {
                for (v, m) in a.iter_mut().zip(&ms[l]) {
                    *v *= m;
                }
            }
        }
        acts.push(a.clone());
        cur = a;
    }
    (cur, Cache { acts, pre })
}

/// Backward pass from an output cotangent. Accumulates parameter gradients
/// into `dparams` (same layout as `params`) and returns the input gradient.
pub fn backward(
    shape: &MlpShape,
    params: &[f64],
    cache: &Cache,
    dout: &[f64],
    masks: Option<&[Vec<f64>]>,
    dparams: Option<&mut [f64]>,
) -> Vec<f64> {
    let mut dp = dparams;
    let mut delta = dout.to_vec();
    for l in (0..shape.layer_count()).rev() {
        let (n_in, n_out) = (shape.dims[l], shape.dims[l + 1]);
        let off = shape.layer_offset(l);
        let w = &params[off..off + n_in * n_out];
        let a_in = &cache.acts[l];
        // parameter gradients
        if let Some(dpv) = dp.as_deref_mut() {
            for o in 0..n_out {
                for i in 0..n_in {
                    dpv[off + o * n_in + i] += delta[o] * a_in[i];
                }
                dpv[off + n_in * n_out + o] += delta[o];
            }
        }
        // input gradient of this layer
        let mut dx = vec![0.0; n_in];
        for o in 0..n_out {
            let row = &w[o * n_in..(o + 1) * n_in];
            for i in 0..n_in {
                dx[i] += row[i] * delta[o];
            }
        }
        if l > 0 {
            // go through the previous layer's mask and tanh
            if let Some(ms) = masks {
                for (v, m) in dx.iter_mut().zip(&ms[l - 1]) {
                    *v *= m;
                }
            }
            let z_prev = &cache.pre[l - 1];
            for (v, &z) in dx.iter_mut().zip(z_prev) {
                let t = z.tanh();
                *v *= 1.0 - t * t;
            }
        }
        delta = dx;
    }
    delta
}

/// Two trunk networks (one per input half) merged into a joint head.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchNet {
    pub left_dim: usize,
    pub right_dim: usize,
    pub left: MlpShape,
    pub right: MlpShape,
    pub head: MlpShape,
    pub params: Vec<f64>,
}

/// Cached activations for a branch-net forward pass.
pub struct BranchCache {
    left: Cache,
    right: Cache,
    head: Cache,
}

/// Dropout masks per sub-network (hidden layers only).
#[derive(Debug, Clone)]
pub struct BranchMasks {
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
    pub head: Vec<Vec<f64>>,
}

impl BranchNet {
    /// Trunks of `trunk_width` x2 per side; head of `head_width` x2 into
    /// `out_dim` linear outputs.
    pub fn new<R: Rng>(
        left_dim: usize,
        right_dim: usize,
        trunk_width: usize,
        head_width: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Self {
        let left = MlpShape::new(vec![left_dim, trunk_width, trunk_width]);
        let right = MlpShape::new(vec![right_dim, trunk_width, trunk_width]);
        let head = MlpShape::new(vec![2 * trunk_width, head_width, head_width, out_dim]);
        let mut params = Vec::new();
        params.extend(left.init_params(rng));
        params.extend(right.init_params(rng));
        params.extend(head.init_params(rng));
        BranchNet {
            left_dim,
            right_dim,
            left,
            right,
            head,
            params,
        }
    }

    pub fn param_count(&self) -> usize {
        self.left.param_count() + self.right.param_count() + self.head.param_count()
    }

    pub fn input_dim(&self) -> usize {
        self.left_dim + self.right_dim
    }

    fn segments(&self) -> (usize, usize) {
        (self.left.param_count(), self.right.param_count())
    }

    /// Fresh dropout masks (scaled inverted dropout). `p = 0` gives all-ones.
    pub fn make_masks<R: Rng>(&self, p: f64, rng: &mut R) -> BranchMasks {
        // Trunk tanh layers are all hidden; the head has two hidden layers.
        let gen = |shape: &MlpShape, rng: &mut R| -> Vec<Vec<f64>> {
            (1..shape.dims.len() - 1)
                .map(|i| {
                    (0..shape.dims[i])
                        .map(|_| {
                            if p > 0.0 && rng.gen::<f64>() < p {
                                0.0
                            } else if p > 0.0 {
                                1.0 / (1.0 - p)
                            } else {
                                1.0
                            }
                        })
                        .collect()
                })
                .collect()
        };
        BranchMasks {
            left: gen(&self.left, rng),
            right: gen(&self.right, rng),
            head: gen(&self.head, rng),
        }
    }

    pub fn forward(&self, x: &[f64], masks: Option<&BranchMasks>) -> (Vec<f64>, BranchCache) {
        debug_assert_eq!(x.len(), self.input_dim());
        let (ln, rn) = self.segments();
        let (xl, xr) = x.split_at(self.left_dim);
        let (l_out, l_cache) = forward(
            &self.left,
            &self.params[..ln],
            xl,
            masks.map(|m| m.left.as_slice()),
        );
        let (r_out, r_cache) = forward(
            &self.right,
            &self.params[ln..ln + rn],
            xr,
            masks.map(|m| m.right.as_slice()),
        );
        let mut joint = l_out;
        joint.extend(r_out);
        let (out, h_cache) = forward(
            &self.head,
            &self.params[ln + rn..],
            &joint,
            masks.map(|m| m.head.as_slice()),
        );
        (
            out,
            BranchCache {
                left: l_cache,
                right: r_cache,
                head: h_cache,
            },
        )
    }

    /// Backprop; returns the input gradient, optionally accumulating
    /// parameter gradients.
    pub fn backward(
        &self,
        cache: &BranchCache,
        dout: &[f64],
        masks: Option<&BranchMasks>,
        mut dparams: Option<&mut [f64]>,
    ) -> Vec<f64> {
        let (ln, rn) = self.segments();
        let d_joint = backward(
            &self.head,
            &self.params[ln + rn..],
            &cache.head,
            dout,
            masks.map(|m| m.head.as_slice()),
            dparams.as_deref_mut().map(|d| &mut d[ln + rn..]),
        );
        let w = self.left.dims[self.left.dims.len() - 1];
        let (d_left_out, d_right_out) = d_joint.split_at(w);
        let dl = backward(
            &self.left,
            &self.params[..ln],
            &cache.left,
            d_left_out,
            masks.map(|m| m.left.as_slice()),
            dparams.as_deref_mut().map(|d| &mut d[..ln]),
        );
        let dr = backward(
            &self.right,
            &self.params[ln..ln + rn],
            &cache.right,
            d_right_out,
            masks.map(|m| m.right.as_slice()),
            dparams.as_deref_mut().map(|d| &mut d[ln..ln + rn]),
        );
        let mut dx = dl;
        dx.extend(dr);
        dx
    }
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, n: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let mh = self.m[i] / b1t;
            let vh = self.v[i] / b2t;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fd_input_grad(net: &BranchNet, x: &[f64], out_idx: usize) -> Vec<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                let (op, _) = net.forward(&xp, None);
                let (om, _) = net.forward(&xm, None);
                (op[out_idx] - om[out_idx]) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = BranchNet::new(5, 3, 8, 8, 2, &mut rng);
        let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for out_idx in 0..2 {
            let (_, cache) = net.forward(&x, None);
            let mut dout = vec![0.0; 2];
            dout[out_idx] = 1.0;
            let analytic = net.backward(&cache, &dout, None, None);
            let fd = fd_input_grad(&net, &x, out_idx);
            for (a, f) in analytic.iter().zip(&fd) {
                assert!((a - f).abs() < 1e-6, "analytic {a} vs fd {f}");
            }
        }
    }

    #[test]
    fn param_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = BranchNet::new(3, 2, 4, 4, 1, &mut rng);
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, cache) = net.forward(&x, None);
        let mut dparams = vec![0.0; net.param_count()];
        net.backward(&cache, &[1.0], None, Some(&mut dparams));
        let h = 1e-6;
        for idx in (0..net.param_count()).step_by(17) {
            let orig = net.params[idx];
            net.params[idx] = orig + h;
            let (op, _) = net.forward(&x, None);
            net.params[idx] = orig - h;
            let (om, _) = net.forward(&x, None);
            net.params[idx] = orig;
            let fd = (op[0] - om[0]) / (2.0 * h);
            assert!(
                (dparams[idx] - fd).abs() < 1e-6,
                "param {idx}: analytic {} vs fd {fd}",
                dparams[idx]
            );
        }
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut params = vec![5.0, -3.0];
        let mut opt = Adam::new(0.1, 2);
        for _ in 0..500 {
            let grads: Vec<f64> = params.iter().map(|&p| 2.0 * p).collect();
            opt.step(&mut params, &grads);
        }
        assert!(params.iter().all(|p| p.abs() < 1e-3));
    }

    #[test]
    fn zero_dropout_masks_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = BranchNet::new(4, 4, 6, 6, 1, &mut rng);
        let masks = net.make_masks(0.0, &mut rng);
        let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (a, _) = net.forward(&x, None);
        let (b, _) = net.forward(&x, Some(&masks));
        assert_eq!(a, b);
    }
}
