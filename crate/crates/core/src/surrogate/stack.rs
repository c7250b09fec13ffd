//! The three-network surrogate: a mean/variance head for performance and
//! aleatoric spread, a dropout teacher sampled for epistemic spread, and a
//! student that regresses the teacher's spread so it stays differentiable.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surrogate::net::{Adam, BranchNet};

/// Variance floor keeping the heteroscedastic loss finite.
pub const SIGMA2_FLOOR: f64 = 1e-6;

/// A CNN/accelerator pair embedding plus its observed performance in [0,1].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corpus {
    pub points: Vec<(Vec<f64>, f64)>,
}

impl Corpus {
    pub fn new() -> Self {
        Corpus { points: Vec::new() }
    }

    pub fn push(&mut self, x: Vec<f64>, o: f64) {
        self.points.push((x, o.clamp(0.0, 1.0)));
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for Corpus {
    fn default() -> Self {
        Self::new()
    }
}

/// Architecture and training knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub cnn_dim: usize,
    pub accel_dim: usize,
    pub trunk_width: usize,
    pub head_width: usize,
    /// Teacher dropout probability (head hidden layers).
    pub dropout: f64,
    /// Monte-Carlo samples for the epistemic spread.
    pub mc_samples: usize,
    pub epochs: usize,
    pub lr: f64,
    /// When false the mean/variance head trains with plain squared error
    /// and the predicted spread is ignored (ablation mode).
    pub heteroscedastic: bool,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            cnn_dim: 16,
            accel_dim: 13,
            trunk_width: 64,
            head_width: 64,
            dropout: 0.1,
            mc_samples: 10,
            epochs: 200,
            lr: 1e-2,
            heteroscedastic: true,
        }
    }
}

/// Final losses of one fit call, in dependency order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub npn_loss: f64,
    pub teacher_loss: f64,
    pub student_loss: f64,
    /// Per-epoch mean loss of the mean/variance head.
    pub npn_loss_curve: Vec<f64>,
}

/// The fitted stack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurrogateStack {
    pub config: SurrogateConfig,
    pub seed: u64,
    /// Mean/variance network: outputs (mu, s) with sigma^2 = softplus(s) + floor.
    pub npn: BranchNet,
    /// Teacher with MC dropout.
    pub teacher: BranchNet,
    /// Student predicting the teacher's sampled spread.
    pub student: BranchNet,
    fit_count: u64,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        (1.0 + x.exp()).ln()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl SurrogateStack {
    pub fn new(config: SurrogateConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d_cnn = config.cnn_dim;
        let d_acc = config.accel_dim;
        let npn = BranchNet::new(d_cnn, d_acc, config.trunk_width, config.head_width, 2, &mut rng);
        let teacher =
            BranchNet::new(d_cnn, d_acc, config.trunk_width, config.head_width, 1, &mut rng);
        let student =
            BranchNet::new(d_cnn, d_acc, config.trunk_width, config.head_width, 1, &mut rng);
        SurrogateStack {
            config,
            seed,
            npn,
            teacher,
            student,
            fit_count: 0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.config.cnn_dim + self.config.accel_dim
    }

    /// Deterministic forward: predicted mean and aleatoric sigma (> 0).
    pub fn npn_forward(&self, x: &[f64]) -> (f64, f64) {
        let (out, _) = self.npn.forward(x, None);
        let mu = out[0];
        let sigma2 = softplus(out[1]) + SIGMA2_FLOOR;
        (mu, sigma2.sqrt())
    }

    /// Epistemic spread: sampled teacher std over `n` dropout passes, plus
    /// the student's differentiable estimate. Seeded by the stack seed and
    /// the fit counter so repeated calls agree.
    pub fn epistemic(&self, x: &[f64], n: usize) -> Result<(f64, f64)> {
        if n < 2 {
            return Err(Error::Parameter(
                "epistemic sampling needs at least 2 passes".into(),
            ));
        }
        let xi = self.sample_teacher_std(x, n, self.seed ^ 0x5eed);
        let (out, _) = self.student.forward(x, None);
        Ok((xi, out[0]))
    }

    fn sample_teacher_std(&self, x: &[f64], n: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let masks = self.teacher.make_masks(self.config.dropout, &mut rng);
                self.teacher.forward(x, Some(&masks)).0[0]
            })
            .collect();
        crate::stats::std_pop(&samples)
    }

    /// Teacher's deterministic (mask-free) prediction.
    pub fn teacher_forward(&self, x: &[f64]) -> f64 {
        self.teacher.forward(x, None).0[0]
    }

    /// Upper confidence bound acquisition: mu + k1 sigma + k2 xi_hat.
    pub fn ucb(&self, x: &[f64], k1: f64, k2: f64) -> f64 {
        let (mu, sigma) = self.npn_forward(x);
        let xi_hat = self.student.forward(x, None).0[0];
        if self.config.heteroscedastic {
            mu + k1 * sigma + k2 * xi_hat
        } else {
            mu + k2 * xi_hat
        }
    }

    /// Analytic input gradient of the UCB.
    pub fn ucb_grad(&self, x: &[f64], k1: f64, k2: f64) -> Vec<f64> {
        let (npn_out, npn_cache) = self.npn.forward(x, None);
        let mut dout = vec![1.0, 0.0];
        if self.config.heteroscedastic {
            // sigma = sqrt(softplus(s) + floor): dsigma/ds = sigmoid(s) / (2 sigma)
            let sigma2 = softplus(npn_out[1]) + SIGMA2_FLOOR;
            let sigma = sigma2.sqrt();
            dout[1] = k1 * sigmoid(npn_out[1]) / (2.0 * sigma);
        }
        let mut grad = self.npn.backward(&npn_cache, &dout, None, None);
        let (_, st_cache) = self.student.forward(x, None);
        let gs = self.student.backward(&st_cache, &[k2], None, None);
        for (g, s) in grad.iter_mut().zip(&gs) {
            *g += s;
        }
        grad
    }

    /// Gradients of mu, sigma, and xi_hat separately (used by tests).
    pub fn component_grads(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (npn_out, cache) = self.npn.forward(x, None);
        let d_mu = self.npn.backward(&cache, &[1.0, 0.0], None, None);
        let sigma2 = softplus(npn_out[1]) + SIGMA2_FLOOR;
        let ds = sigmoid(npn_out[1]) / (2.0 * sigma2.sqrt());
        let (_, cache2) = self.npn.forward(x, None);
        let d_sigma = self.npn.backward(&cache2, &[0.0, ds], None, None);
        let (_, st_cache) = self.student.forward(x, None);
        let d_xi = self.student.backward(&st_cache, &[1.0], None, None);
        (d_mu, d_sigma, d_xi)
    }

    /// Fit all three networks on the corpus: the mean/variance head with the
    /// heteroscedastic loss, the teacher with squared error (dropout active),
    /// then the student against freshly sampled teacher spreads.
    pub fn fit(&mut self, corpus: &Corpus) -> Result<FitReport> {
        if corpus.is_empty() {
            return Err(Error::Parameter("cannot fit on an empty corpus".into()));
        }
        self.fit_count += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(self.fit_count));
        let n = corpus.len() as f64;

        // --- mean/variance head ---
        let mut opt = Adam::new(self.config.lr, self.npn.param_count());
        let mut npn_loss = 0.0;
        for _ in 0..self.config.epochs {
            let mut dparams = vec![0.0; self.npn.param_count()];
            let mut loss = 0.0;
            for (x, o) in &corpus.points {
                let (out, cache) = self.npn.forward(x, None);
                let mu = out[0];
                let err = mu - o;
                let (l, dmu, ds) = if self.config.heteroscedastic {
                    let sp = softplus(out[1]);
                    let sigma2 = sp + SIGMA2_FLOOR;
                    let l = err * err / (2.0 * sigma2) + 0.5 * sigma2.ln();
                    let dl_dsigma2 = -err * err / (2.0 * sigma2 * sigma2) + 0.5 / sigma2;
                    (l, err / sigma2, dl_dsigma2 * sigmoid(out[1]))
                } else {
                    (err * err, 2.0 * err, 0.0)
                };
                loss += l;
                self.npn
                    .backward(&cache, &[dmu / n, ds / n], None, Some(&mut dparams));
            }
            npn_loss = loss / n;
            opt.step(&mut self.npn.params, &dparams);
        }

        // --- teacher ---
        let mut opt = Adam::new(self.config.lr, self.teacher.param_count());
        for _ in 0..self.config.epochs {
            let mut dparams = vec![0.0; self.teacher.param_count()];
            for (x, o) in &corpus.points {
                let masks = self.teacher.make_masks(self.config.dropout, &mut rng);
                let (out, cache) = self.teacher.forward(x, Some(&masks));
                let err = out[0] - o;
                self.teacher
                    .backward(&cache, &[2.0 * err / n], Some(&masks), Some(&mut dparams));
            }
            opt.step(&mut self.teacher.params, &dparams);
        }
        // recorded loss: deterministic (mask-free) squared error
        let teacher_loss = corpus
            .points
            .iter()
            .map(|(x, o)| {
                let p = self.teacher_forward(x);
                (p - o) * (p - o)
            })
            .sum::<f64>()
            / n;

        // --- student (after the teacher) ---
        let targets: Vec<f64> = corpus
            .points
            .iter()
            .enumerate()
            .map(|(i, (x, _))| {
                self.sample_teacher_std(
                    x,
                    self.config.mc_samples.max(2),
                    self.seed ^ 0x5eed ^ (i as u64).wrapping_mul(0x9e37_79b9),
                )
            })
            .collect();
        let mut opt = Adam::new(self.config.lr, self.student.param_count());
        let mut student_loss = 0.0;
        for _ in 0..self.config.epochs {
            let mut dparams = vec![0.0; self.student.param_count()];
            let mut loss = 0.0;
            for ((x, _), xi) in corpus.points.iter().zip(&targets) {
                let (out, cache) = self.student.forward(x, None);
                let err = out[0] - xi;
                loss += err * err;
                self.student
                    .backward(&cache, &[2.0 * err / n], None, Some(&mut dparams));
            }
            student_loss = loss / n;
            opt.step(&mut self.student.params, &dparams);
        }

        Ok(FitReport {
            npn_loss,
            teacher_loss,
            student_loss,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small_config() -> SurrogateConfig {
        SurrogateConfig {
            cnn_dim: 4,
            accel_dim: 3,
            trunk_width: 16,
            head_width: 16,
            ..SurrogateConfig::default()
        }
    }

    fn random_x(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn sigma_positive_everywhere() {
        let stack = SurrogateStack::new(small_config(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = random_x(&mut rng, 7);
            let (_, sigma) = stack.npn_forward(&x);
            assert!(sigma > 0.0);
        }
    }

    #[test]
    fn constant_target_learned() {
        let mut stack = SurrogateStack::new(small_config(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut corpus = Corpus::new();
        for _ in 0..20 {
            corpus.push(random_x(&mut rng, 7), 0.5);
        }
        stack.fit(&corpus).unwrap();
        for (x, _) in &corpus.points {
            let (mu, _) = stack.npn_forward(x);
            assert!((mu - 0.5).abs() < 1e-2, "mu = {mu}");
        }
    }

    #[test]
    fn inconsistent_targets_raise_sigma() {
        let mut stack = SurrogateStack::new(small_config(), 5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noisy_x = random_x(&mut rng, 7);
        let clean_x = random_x(&mut rng, 7);
        let mut corpus = Corpus::new();
        for _ in 0..6 {
            corpus.push(noisy_x.clone(), 0.4);
            corpus.push(noisy_x.clone(), 0.6);
            corpus.push(clean_x.clone(), 0.5);
            corpus.push(clean_x.clone(), 0.5);
        }
        stack.fit(&corpus).unwrap();
        let (_, sigma_noisy) = stack.npn_forward(&noisy_x);
        let (_, sigma_clean) = stack.npn_forward(&clean_x);
        assert!(
            sigma_noisy >= sigma_clean,
            "noisy {sigma_noisy} vs clean {sigma_clean}"
        );
    }

    #[test]
    fn single_point_teacher_interpolates() {
        let mut stack = SurrogateStack::new(small_config(), 6);
        let mut corpus = Corpus::new();
        corpus.push(vec![0.1, -0.2, 0.3, 0.0, 0.5, 0.5, 0.5], 0.7);
        let report = stack.fit(&corpus).unwrap();
        assert!(report.teacher_loss < 1e-4, "loss {}", report.teacher_loss);
    }

    #[test]
    fn linear_target_learned_by_teacher() {
        let mut stack = SurrogateStack::new(small_config(), 7);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<f64> = (0..7).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let mut corpus = Corpus::new();
        for _ in 0..50 {
            let x = random_x(&mut rng, 7);
            let o: f64 = 0.5 + x.iter().zip(&a).map(|(xi, ai)| xi * ai).sum::<f64>() * 0.3;
            corpus.push(x, o.clamp(0.0, 1.0));
        }
        let report = stack.fit(&corpus).unwrap();
        assert!(report.teacher_loss < 1e-3, "mse {}", report.teacher_loss);
    }

    #[test]
    fn zero_dropout_gives_zero_epistemic() {
        let mut cfg = small_config();
        cfg.dropout = 0.0;
        let stack = SurrogateStack::new(cfg, 8);
        let x = vec![0.0; 7];
        let (xi, _) = stack.epistemic(&x, 8).unwrap();
        assert_eq!(xi, 0.0);
    }

    #[test]
    fn epistemic_deterministic_and_needs_two_samples() {
        let stack = SurrogateStack::new(small_config(), 9);
        let x = vec![0.2; 7];
        let (a, _) = stack.epistemic(&x, 10).unwrap();
        let (b, _) = stack.epistemic(&x, 10).unwrap();
        assert_eq!(a, b);
        assert!(stack.epistemic(&x, 1).is_err());
    }

    #[test]
    fn higher_dropout_more_spread() {
        let mut lo_cfg = small_config();
        lo_cfg.dropout = 0.1;
        let mut hi_cfg = small_config();
        hi_cfg.dropout = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut lo_mean = 0.0;
        let mut hi_mean = 0.0;
        // average over seeds and probe points
        for seed in 0..20 {
            let lo = SurrogateStack::new(lo_cfg.clone(), seed);
            let hi = SurrogateStack::new(hi_cfg.clone(), seed);
            let x = random_x(&mut rng, 7);
            lo_mean += lo.epistemic(&x, 16).unwrap().0;
            hi_mean += hi.epistemic(&x, 16).unwrap().0;
        }
        assert!(hi_mean > lo_mean, "hi {hi_mean} vs lo {lo_mean}");
    }

    #[test]
    fn ucb_arithmetic() {
        // mu=0.8 sigma=0.1 xi=0.2 with k1=k2=0.5 -> 0.95
        let ucb = 0.8 + 0.5 * 0.1 + 0.5 * 0.2;
        assert!((ucb - 0.95).abs() < 1e-15);
        // k1 = k2 = 0 -> mu (checked via the stack)
        let stack = SurrogateStack::new(small_config(), 11);
        let x = vec![0.3; 7];
        let (mu, _) = stack.npn_forward(&x);
        assert!((stack.ucb(&x, 0.0, 0.0) - mu).abs() < 1e-12);
        assert!(stack.ucb(&x, 0.5, 0.5) >= mu);
    }

    #[test]
    fn ucb_gradient_matches_finite_differences() {
        let stack = SurrogateStack::new(small_config(), 12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = 1e-5;
        for _ in 0..20 {
            let x = random_x(&mut rng, 7);
            let analytic = stack.ucb_grad(&x, 0.5, 0.5);
            let mut fd = vec![0.0; x.len()];
            for i in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                fd[i] = (stack.ucb(&xp, 0.5, 0.5) - stack.ucb(&xm, 0.5, 0.5)) / (2.0 * h);
            }
            let na: f64 = analytic.iter().map(|v| v * v).sum::<f64>().sqrt();
            let diff: f64 = analytic
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(diff / na.max(1e-12) < 1e-4, "rel err {}", diff / na);
        }
    }

    #[test]
    fn fit_is_deterministic_under_seed() {
        let mut corpus = Corpus::new();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..10 {
            corpus.push(random_x(&mut rng, 7), rng.gen_range(0.0..1.0));
        }
        let mut cfg = small_config();
        cfg.epochs = 50;
        let mut s1 = SurrogateStack::new(cfg.clone(), 42);
        let mut s2 = SurrogateStack::new(cfg, 42);
        let r1 = s1.fit(&corpus).unwrap();
        let r2 = s2.fit(&corpus).unwrap();
        assert_eq!(r1.npn_loss, r2.npn_loss);
        assert_eq!(r1.teacher_loss, r2.teacher_loss);
        let x = vec![0.1; 7];
        assert_eq!(s1.ucb(&x, 0.5, 0.5), s2.ucb(&x, 0.5, 0.5));
    }
}
