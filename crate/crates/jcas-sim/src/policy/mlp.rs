//! Minimal dense networks with hand-written backprop.
//!
//! Parameter vectors are flattened in one canonical order everywhere
//! (optimizer state, checkpoints, gradient buffers): trunk layers in order
//! (weights row-major, then bias), mean head, value head, log-std. The
//! centralized critic, when present, appends its trunk and head the same way.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// Row-major: w[out][in].
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl Linear {
    /// Xavier-uniform init, optionally scaled down (small policy heads keep
    /// early actions near zero).
    pub fn xavier(in_dim: usize, out_dim: usize, scale: f64, rng: &mut ChaCha8Rng) -> Linear {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w = (0..out_dim)
            .map(|_| (0..in_dim).map(|_| rng.random_range(-bound..bound) * scale).collect())
            .collect();
        Linear { w, b: vec![0.0; out_dim] }
    }

    pub fn in_dim(&self) -> usize {
        self.w.first().map_or(0, |r| r.len())
    }

    pub fn out_dim(&self) -> usize {
        self.b.len()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.w
            .iter()
            .zip(&self.b)
            .map(|(row, b)| row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.out_dim() * self.in_dim() + self.out_dim()
    }

    fn flatten_into(&self, out: &mut Vec<f64>) {
        for row in &self.w {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&self.b);
    }

    fn load_from(&mut self, flat: &[f64], cursor: &mut usize) {
        for row in &mut self.w {
            let n = row.len();
            row.copy_from_slice(&flat[*cursor..*cursor + n]);
            *cursor += n;
        }
        let n = self.b.len();
        self.b.copy_from_slice(&flat[*cursor..*cursor + n]);
        *cursor += n;
    }

    /// Accumulates dL/dW and dL/db for upstream gradient `dy` at input `x`
    /// into `grads[*cursor..]`, returning dL/dx.
    fn backward(
        &self,
        x: &[f64],
        dy: &[f64],
        grads: &mut [f64],
        cursor: &mut usize,
    ) -> Vec<f64> {
        let in_dim = self.in_dim();
        for (o, &d) in dy.iter().enumerate() {
            let row = &mut grads[*cursor + o * in_dim..*cursor + (o + 1) * in_dim];
            for (g, &xi) in row.iter_mut().zip(x) {
                *g += d * xi;
            }
        }
        *cursor += self.out_dim() * in_dim;
        for (o, &d) in dy.iter().enumerate() {
            grads[*cursor + o] += d;
        }
        *cursor += self.out_dim();
        let mut dx = vec![0.0; in_dim];
        for (row, &d) in self.w.iter().zip(dy) {
            for (dxi, &wi) in dx.iter_mut().zip(row) {
                *dxi += d * wi;
            }
        }
        dx
    }
}

fn tanh_vec(v: &mut [f64]) {
    for x in v {
        *x = x.tanh();
    }
}

/// Shared-trunk actor-critic: tanh trunk, linear mean and value heads, and a
/// state-independent log-std vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub trunk: Vec<Linear>,
    pub mean_head: Linear,
    pub value_head: Linear,
    pub log_std: Vec<f64>,
}

pub struct ActorCache {
    /// activations[0] is the input; each later entry is a post-tanh trunk
    /// layer output.
    pub activations: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub value: f64,
}

impl ActorCritic {
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        log_std_init: f64,
        rng: &mut ChaCha8Rng,
    ) -> ActorCritic {
        assert!(!hidden.is_empty(), "at least one hidden layer");
        let mut trunk = Vec::new();
        let mut prev = obs_dim;
        for &h in hidden {
            trunk.push(Linear::xavier(prev, h, 1.0, rng));
            prev = h;
        }
        ActorCritic {
            trunk,
            mean_head: Linear::xavier(prev, act_dim, 0.01, rng),
            value_head: Linear::xavier(prev, 1, 1.0, rng),
            log_std: vec![log_std_init; act_dim],
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.trunk[0].in_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.mean_head.out_dim()
    }

    pub fn clamped_log_std(&self) -> Vec<f64> {
        self.log_std.iter().map(|s| s.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect()
    }

    pub fn forward(&self, obs: &[f64]) -> ActorCache {
        let mut activations = Vec::with_capacity(self.trunk.len() + 1);
        activations.push(obs.to_vec());
        for layer in &self.trunk {
            let mut z = layer.forward(activations.last().unwrap());
            tanh_vec(&mut z);
            activations.push(z);
        }
        let h = activations.last().unwrap();
        let mean = self.mean_head.forward(h);
        let value = self.value_head.forward(h)[0];
        ActorCache { activations, mean, value }
    }

    /// Accumulates gradients for upstream `d_mean`, `d_value`, and
    /// `d_log_std` into `grads` (same flattening order as `flatten`).
    pub fn backward(
        &self,
        cache: &ActorCache,
        d_mean: &[f64],
        d_value: f64,
        d_log_std: &[f64],
        grads: &mut [f64],
    ) {
        // Trunk gradients are written while walking backwards, but the flat
        // layout is forward; precompute each tensor's offset.
        let mut offsets = Vec::with_capacity(self.trunk.len() + 2);
        let mut at = 0usize;
        for layer in &self.trunk {
            offsets.push(at);
            at += layer.n_params();
        }
        let mean_off = at;
        at += self.mean_head.n_params();
        let value_off = at;
        at += self.value_head.n_params();
        let log_std_off = at;

        let h = cache.activations.last().unwrap();
        let mut cur = mean_off;
        let d_h_mean = self.mean_head.backward(h, d_mean, grads, &mut cur);
        let mut cur = value_off;
        let d_h_value = self.value_head.backward(h, &[d_value], grads, &mut cur);
        for (g, d) in grads[log_std_off..log_std_off + self.log_std.len()]
            .iter_mut()
            .zip(d_log_std)
        {
            // Clamp acts as identity inside the band and blocks outside.
            *g += d;
        }

        let mut d_act: Vec<f64> =
            d_h_mean.iter().zip(&d_h_value).map(|(a, b)| a + b).collect();
        for (l, layer) in self.trunk.iter().enumerate().rev() {
            let a = &cache.activations[l + 1];
            // d pre-activation through tanh.
            let dz: Vec<f64> = d_act.iter().zip(a).map(|(d, a)| d * (1.0 - a * a)).collect();
            let mut cur = offsets[l];
            d_act = layer.backward(&cache.activations[l], &dz, grads, &mut cur);
        }
    }

    pub fn n_params(&self) -> usize {
        self.trunk.iter().map(Linear::n_params).sum::<usize>()
            + self.mean_head.n_params()
            + self.value_head.n_params()
            + self.log_std.len()
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for layer in &self.trunk {
            layer.flatten_into(out);
        }
        self.mean_head.flatten_into(out);
        self.value_head.flatten_into(out);
        out.extend_from_slice(&self.log_std);
    }

    pub fn load_from(&mut self, flat: &[f64], cursor: &mut usize) {
        for layer in &mut self.trunk {
            layer.load_from(flat, cursor);
        }
        self.mean_head.load_from(flat, cursor);
        self.value_head.load_from(flat, cursor);
        let n = self.log_std.len();
        self.log_std.copy_from_slice(&flat[*cursor..*cursor + n]);
        *cursor += n;
    }
}

/// Standalone value network for the centralized-critic option: tanh trunk,
/// scalar linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet {
    pub trunk: Vec<Linear>,
    pub head: Linear,
}

pub struct ValueCache {
    pub activations: Vec<Vec<f64>>,
    pub value: f64,
}

impl ValueNet {
    pub fn new(in_dim: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> ValueNet {
        assert!(!hidden.is_empty(), "at least one hidden layer");
        let mut trunk = Vec::new();
        let mut prev = in_dim;
        for &h in hidden {
            trunk.push(Linear::xavier(prev, h, 1.0, rng));
            prev = h;
        }
        ValueNet { trunk, head: Linear::xavier(prev, 1, 1.0, rng) }
    }

    pub fn forward(&self, x: &[f64]) -> ValueCache {
        let mut activations = Vec::with_capacity(self.trunk.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.trunk {
            let mut z = layer.forward(activations.last().unwrap());
            tanh_vec(&mut z);
            activations.push(z);
        }
        let value = self.head.forward(activations.last().unwrap())[0];
        ValueCache { activations, value }
    }

    /// Gradients land in `grads[base..]`, where `base` is this net's offset
    /// in the combined flat vector.
    pub fn backward(&self, cache: &ValueCache, d_value: f64, grads: &mut [f64], base: usize) {
        let mut offsets = Vec::with_capacity(self.trunk.len() + 1);
        let mut at = base;
        for layer in &self.trunk {
            offsets.push(at);
            at += layer.n_params();
        }
        let head_off = at;
        let mut cur = head_off;
        let mut d_act =
            self.head.backward(cache.activations.last().unwrap(), &[d_value], grads, &mut cur);
        for (l, layer) in self.trunk.iter().enumerate().rev() {
            let a = &cache.activations[l + 1];
            let dz: Vec<f64> = d_act.iter().zip(a).map(|(d, a)| d * (1.0 - a * a)).collect();
            let mut cur = offsets[l];
            d_act = layer.backward(&cache.activations[l], &dz, grads, &mut cur);
        }
    }

    pub fn n_params(&self) -> usize {
        self.trunk.iter().map(Linear::n_params).sum::<usize>() + self.head.n_params()
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for layer in &self.trunk {
            layer.flatten_into(out);
        }
        self.head.flatten_into(out);
    }

    pub fn load_from(&mut self, flat: &[f64], cursor: &mut usize) {
        for layer in &mut self.trunk {
            layer.load_from(flat, cursor);
        }
        self.head.load_from(flat, cursor);
    }
}

/// Numerical diagnostic: compares analytic gradients of a fixed smooth probe
/// loss against central finite differences on `n_probe` parameters per tensor
/// (all parameters when 0). Returns the worst relative error observed.
///
/// Probe loss: sum_k sin(mean_k) + 0.3 * value^2 + sum_k cos(log_std_k), at a
/// deterministic pseudo-observation.
pub fn gradient_check(net: &ActorCritic, n_probe: usize, rng: &mut ChaCha8Rng) -> f64 {
    let obs: Vec<f64> =
        (0..net.obs_dim()).map(|i| (i as f64 * 0.37).sin() * 0.8).collect();

    let loss = |net: &ActorCritic| -> f64 {
        let c = net.forward(&obs);
        c.mean.iter().map(|m| m.sin()).sum::<f64>()
            + 0.3 * c.value * c.value
            + net.log_std.iter().map(|s| s.cos()).sum::<f64>()
    };

    let cache = net.forward(&obs);
    let d_mean: Vec<f64> = cache.mean.iter().map(|m| m.cos()).collect();
    let d_value = 0.6 * cache.value;
    let d_log_std: Vec<f64> = net.log_std.iter().map(|s| -s.sin()).collect();
    let mut analytic = vec![0.0; net.n_params()];
    net.backward(&cache, &d_mean, d_value, &d_log_std, &mut analytic);

    let mut flat = Vec::with_capacity(net.n_params());
    net.flatten_into(&mut flat);
    let n = flat.len();
    let probe_indices: Vec<usize> = if n_probe == 0 || n_probe >= n {
        (0..n).collect()
    } else {
        (0..n_probe).map(|_| rng.random_range(0..n)).collect()
    };

    let eps = 1e-5;
    let mut worst = 0.0f64;
    let mut scratch = net.clone();
    for &i in &probe_indices {
        let saved = flat[i];
        flat[i] = saved + eps;
        scratch.load_from(&flat, &mut 0);
        let up = loss(&scratch);
        flat[i] = saved - eps;
        scratch.load_from(&flat, &mut 0);
        let down = loss(&scratch);
        flat[i] = saved;
        let numeric = (up - down) / (2.0 * eps);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    scratch.load_from(&flat, &mut 0);
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn forward_shapes_and_determinism() {
        let mut rng = stream_rng(1, 0);
        let net = ActorCritic::new(31, 2, &[64, 64, 64], -0.5, &mut rng);
        let obs = vec![0.1; 31];
        let a = net.forward(&obs);
        let b = net.forward(&obs);
        assert_eq!(a.mean.len(), 2);
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.value, b.value);
        assert_eq!(net.log_std, vec![-0.5, -0.5]);
    }

    #[test]
    fn param_count_matches_architecture() {
        let mut rng = stream_rng(2, 0);
        let net = ActorCritic::new(31, 2, &[64, 32], -0.5, &mut rng);
        let expect = (31 * 64 + 64) + (64 * 32 + 32) + (32 * 2 + 2) + (32 + 1) + 2;
        assert_eq!(net.n_params(), expect);
        let mut flat = Vec::new();
        net.flatten_into(&mut flat);
        assert_eq!(flat.len(), expect);
    }

    #[test]
    fn flatten_load_round_trip() {
        let mut rng = stream_rng(3, 0);
        let net = ActorCritic::new(9, 2, &[8, 7], -0.5, &mut rng);
        let mut flat = Vec::new();
        net.flatten_into(&mut flat);
        let mut other = ActorCritic::new(9, 2, &[8, 7], -0.5, &mut rng);
        other.load_from(&flat, &mut 0);
        assert_eq!(net, other);
    }

    #[test]
    fn small_head_scale_keeps_initial_means_tiny() {
        let mut rng = stream_rng(4, 0);
        let net = ActorCritic::new(31, 2, &[64, 64], -0.5, &mut rng);
        let obs: Vec<f64> = (0..31).map(|i| (i as f64 * 0.11).cos()).collect();
        let c = net.forward(&obs);
        assert!(c.mean.iter().all(|m| m.abs() < 0.05), "means {:?}", c.mean);
        // The value head is NOT scaled down.
        let max_w = net
            .value_head
            .w
            .iter()
            .flatten()
            .fold(0.0f64, |m, &w| m.max(w.abs()));
        assert!(max_w > 0.05);
    }

    #[test]
    fn full_gradient_check_small_net() {
        let mut rng = stream_rng(5, 0);
        let net = ActorCritic::new(6, 2, &[5, 4], -0.5, &mut rng);
        let worst = gradient_check(&net, 0, &mut rng);
        assert!(worst < 1e-6, "worst relative error {worst}");
    }

    #[test]
    fn sampled_gradient_check_wide_net() {
        let mut rng = stream_rng(6, 0);
        let net = ActorCritic::new(31, 2, &[128, 64], -0.5, &mut rng);
        let worst = gradient_check(&net, 200, &mut rng);
        assert!(worst < 1e-6, "worst relative error {worst}");
    }

    #[test]
    fn value_net_gradients_match_finite_differences() {
        let mut rng = stream_rng(7, 0);
        let net = ValueNet::new(10, &[8, 6], &mut rng);
        let x: Vec<f64> = (0..10).map(|i| ((i as f64) * 0.21).sin()).collect();
        // Loss = 0.5 * v^2.
        let cache = net.forward(&x);
        let mut analytic = vec![0.0; net.n_params()];
        net.backward(&cache, cache.value, &mut analytic, 0);
        let mut flat = Vec::new();
        net.flatten_into(&mut flat);
        let eps = 1e-5;
        let mut scratch = net.clone();
        for i in 0..flat.len() {
            let saved = flat[i];
            flat[i] = saved + eps;
            scratch.load_from(&flat, &mut 0);
            let up = 0.5 * scratch.forward(&x).value.powi(2);
            flat[i] = saved - eps;
            scratch.load_from(&flat, &mut 0);
            let down = 0.5 * scratch.forward(&x).value.powi(2);
            flat[i] = saved;
            let numeric = (up - down) / (2.0 * eps);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
            assert!(
                (analytic[i] - numeric).abs() / denom < 1e-6,
                "param {i}: analytic {} numeric {numeric}",
                analytic[i]
            );
        }
    }

    #[test]
    fn clamped_log_std_respects_the_band() {
        let mut rng = stream_rng(8, 0);
        let mut net = ActorCritic::new(4, 2, &[4], -0.5, &mut rng);
        net.log_std = vec![-9.0, 5.0];
        assert_eq!(net.clamped_log_std(), vec![LOG_STD_MIN, LOG_STD_MAX]);
    }
}
