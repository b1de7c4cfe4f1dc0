//! Losses, clamped SGD, and the training loop.
//!
//! Training happens entirely in the Hartley domain. A sample pairs the
//! spectrum of a bicubic-upscaled low-resolution plane (the network input
//! `F`) with the spectrum of the original plane (the target `I`). The
//! network predicts a residual `P`, the reconstruction is `I* = P + F`, and
//! the loss compares `I*` against `I` spectrum-to-spectrum.
//!
//! Gradients are clamped elementwise to `[-theta, theta]` before the update,
//! which bounds any single step by `gamma * theta` per entry and keeps early
//! iterations stable despite the multiplicative architecture.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{FrequencyMap, Grid};
use crate::network::{backward, forward, NetworkArch, NetworkParams, ParamGradients};

/// Which penalty compares the reconstructed spectrum to the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    /// Sum of absolute spectral errors.
    L1,
    /// Sum of squared spectral errors.
    L2,
    /// Squared errors weighted by `exp(beta * omega)`, where `omega` grows
    /// with distance from the lowest frequencies; emphasizes detail bands.
    ExpL2,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::L1 => "l1",
            LossKind::L2 => "l2",
            LossKind::ExpL2 => "exp-l2",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<LossKind> {
        match s {
            "l1" => Ok(LossKind::L1),
            "l2" => Ok(LossKind::L2),
            "exp-l2" => Ok(LossKind::ExpL2),
            other => Err(Error::invalid(format!(
                "unknown loss kind '{other}' (expected l1, l2, or exp-l2)"
            ))),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hyperparameters for [`train`] and [`sgd_step`].
#[derive(Clone, Debug)]
pub struct TrainingConfig {
    pub loss: LossKind,
    /// Frequency-emphasis strength for [`LossKind::ExpL2`]; ignored otherwise.
    pub beta: f64,
    /// Elementwise gradient clamp bound.
    pub theta: f64,
    /// Learning rate.
    pub gamma: f64,
    pub batch_size: usize,
    pub max_iters: usize,
    /// Seeds both parameter initialization and batch sampling.
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> TrainingConfig {
        TrainingConfig {
            loss: LossKind::L2,
            beta: 0.01,
            theta: 1.0e3,
            gamma: 1.0e-5,
            batch_size: 1,
            max_iters: 1000,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0) {
            return Err(Error::invalid(format!("theta must be positive, got {}", self.theta)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid(format!(
                "gamma must be finite and non-negative, got {}",
                self.gamma
            )));
        }
        if !self.beta.is_finite() {
            return Err(Error::invalid(format!("beta must be finite, got {}", self.beta)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        Ok(())
    }
}

/// One training pair of same-shaped spectra.
#[derive(Clone, Debug)]
pub struct TrainingSample {
    /// Network input: spectrum of the bicubic-upscaled low-resolution plane.
    pub input: FrequencyMap,
    /// Target: spectrum of the ground-truth plane.
    pub target: FrequencyMap,
}

/// Frequency-emphasis map for [`LossKind::ExpL2`]:
/// `exp(beta * omega(l, k))` with `omega(l, k) = min(l, rows - l) + min(k, cols - k)`.
///
/// `omega` is the wrap-around distance from the DC bins, so the map is 1 at
/// DC and largest near the half-band frequencies in the plane center.
pub fn emphasis_weights(rows: usize, cols: usize, beta: f64) -> Grid {
    Grid::from_fn(rows, cols, |l, k| {
        let omega = l.min(rows - l) + k.min(cols - k);
        (beta * omega as f64).exp()
    })
}

/// Loss value and its gradient with respect to the reconstruction.
///
/// For targets `I` and reconstructions `I*` this returns
/// - `L1`: `sum |I - I*|` with subgradient `sign(I* - I)` (zero at ties),
/// - `L2`: `sum (I - I*)^2` with gradient `2 (I* - I)`,
/// - `ExpL2`: `sum w .* (I - I*)^2` with gradient `2 w .* (I* - I)` where
///   `w` is [`emphasis_weights`].
pub fn loss_and_grad(
    reconstruction: &FrequencyMap,
    target: &FrequencyMap,
    cfg: &TrainingConfig,
) -> Result<(f64, FrequencyMap)> {
    reconstruction.check_nonempty("loss_and_grad")?;
    reconstruction.check_same_dims(target, "loss_and_grad")?;
    let (rows, cols) = reconstruction.dims();
    let mut grad = Grid::new(rows, cols);
    let g = grad.as_mut_slice();
    let mut loss = 0.0;
    match cfg.loss {
        LossKind::L1 => {
            for (i, (&r, &t)) in reconstruction.as_slice().iter().zip(target.as_slice()).enumerate()
            {
                let d = r - t;
                loss += d.abs();
                g[i] = if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                };
            }
        }
        LossKind::L2 => {
            for (i, (&r, &t)) in reconstruction.as_slice().iter().zip(target.as_slice()).enumerate()
            {
                let d = r - t;
                loss += d * d;
                g[i] = 2.0 * d;
            }
        }
        LossKind::ExpL2 => {
            let w = emphasis_weights(rows, cols, cfg.beta);
            for (i, ((&r, &t), &wv)) in reconstruction
                .as_slice()
                .iter()
                .zip(target.as_slice())
                .zip(w.as_slice())
                .enumerate()
            {
                let d = r - t;
                loss += wv * d * d;
                g[i] = 2.0 * wv * d;
            }
        }
    }
    Ok((loss, grad))
}

/// Residual composition `I* = P + F`.
pub fn residual_compose(prediction: &FrequencyMap, input: &FrequencyMap) -> Result<FrequencyMap> {
    prediction.check_same_dims(input, "residual_compose")?;
    prediction.add(input)
}

/// Loss and parameter gradients for one sample at the current parameters.
pub fn evaluate_sample(
    params: &NetworkParams,
    sample: &TrainingSample,
    cfg: &TrainingConfig,
) -> Result<(f64, ParamGradients)> {
    sample.input.check_same_dims(&sample.target, "evaluate_sample")?;
    let trace = forward(&sample.input, params)?;
    let reconstruction = residual_compose(&trace.prediction, &sample.input)?;
    let (loss, d_reconstruction) = loss_and_grad(&reconstruction, &sample.target, cfg)?;
    // I* = P + F, so dLoss/dP equals dLoss/dI*.
    let (grads, _d_input) = backward(&trace, params, &d_reconstruction)?;
    Ok((loss, grads))
}

/// One SGD update: `p <- p - gamma * clamp(g, -theta, theta)` elementwise.
///
/// Rejects non-finite gradients (and any non-finite parameter they would
/// produce) with a divergence error carrying `iteration` for diagnostics.
pub fn sgd_step(
    params: &mut NetworkParams,
    grads: &ParamGradients,
    cfg: &TrainingConfig,
    iteration: usize,
) -> Result<()> {
    cfg.validate()?;
    if grads.weights.len() != params.weights.len()
        || grads.layer_mix.len() != params.layer_mix.len()
    {
        return Err(Error::mismatch("sgd_step: gradient layout"));
    }
    if !grads.is_finite() {
        return Err(Error::Divergence {
            iteration,
            reason: "non-finite gradient entry".into(),
        });
    }

    let step = |p: &mut Grid, g: &Grid| {
        for (pv, &gv) in p.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *pv -= cfg.gamma * gv.clamp(-cfg.theta, cfg.theta);
        }
    };
    for (p, g) in params.weights.iter_mut().zip(&grads.weights) {
        step(p, g);
    }
    for (p, g) in params.biases.iter_mut().zip(&grads.biases) {
        step(p, g);
    }
    for (p, g) in params.kernels.iter_mut().zip(&grads.kernels) {
        step(p, g);
    }
    for (p, &g) in params.layer_mix.iter_mut().zip(&grads.layer_mix) {
        *p -= cfg.gamma * g.clamp(-cfg.theta, cfg.theta);
    }
    step(&mut params.final_weight, &grads.final_weight);

    if !params.is_finite() {
        return Err(Error::Divergence {
            iteration,
            reason: "parameter update produced a non-finite value".into(),
        });
    }
    Ok(())
}

/// Snapshot passed to the training callback once per iteration, after the
/// batch loss is measured and *before* the update is applied, so `loss` is
/// exactly the loss of `params`.
pub struct TrainEvent<'a> {
    pub iteration: usize,
    /// Mean batch loss at the current parameters.
    pub loss: f64,
    /// Wall-clock milliseconds since training started.
    pub elapsed_ms: f64,
    pub params: &'a NetworkParams,
}

/// Runs mini-batch SGD from a fresh seeded initialization.
///
/// Batches are drawn uniformly with replacement; per-sample gradients are
/// averaged in index order, so the result is fully deterministic in
/// `cfg.seed` regardless of thread count. The callback may abort training by
/// returning an error, which is passed through unchanged.
pub fn train(
    dataset: &[TrainingSample],
    arch: &NetworkArch,
    cfg: &TrainingConfig,
    on_iteration: impl FnMut(&TrainEvent<'_>) -> Result<()>,
) -> Result<NetworkParams> {
    arch.validate()?;
    cfg.validate()?;
    train_from(NetworkParams::init(arch, cfg.seed)?, dataset, cfg, on_iteration)
}

/// [`train`] starting from explicit initial parameters instead of a seeded
/// initialization — for resuming from a checkpoint or training a
/// deliberately constructed network. The seed still drives batch sampling.
pub fn train_from(
    initial: NetworkParams,
    dataset: &[TrainingSample],
    cfg: &TrainingConfig,
    mut on_iteration: impl FnMut(&TrainEvent<'_>) -> Result<()>,
) -> Result<NetworkParams> {
    initial.validate()?;
    cfg.validate()?;
    let arch = initial.arch.clone();
    if dataset.is_empty() {
        return Err(Error::invalid("train: dataset is empty"));
    }
    for (i, sample) in dataset.iter().enumerate() {
        if sample.input.dims() != (arch.height, arch.width)
            || sample.target.dims() != (arch.height, arch.width)
        {
            return Err(Error::mismatch(format!(
                "train: sample {i} is {}x{}, network expects {}x{}",
                sample.input.rows(),
                sample.input.cols(),
                arch.height,
                arch.width
            )));
        }
        if !sample.input.is_finite() || !sample.target.is_finite() {
            return Err(Error::invalid(format!("train: sample {i} contains non-finite values")));
        }
    }

    let mut params = initial;
    // Decorrelate batch sampling from the initialization stream.
    let mut batch_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);
    let start = Instant::now();

    for iteration in 0..cfg.max_iters {
        let indices: Vec<usize> = (0..cfg.batch_size)
            .map(|_| batch_rng.random_range(0..dataset.len()))
            .collect();

        let results: Vec<(f64, ParamGradients)> = indices
            .par_iter()
            .map(|&idx| evaluate_sample(&params, &dataset[idx], cfg))
            .collect::<Result<_>>()?;

        let mut loss_sum = 0.0;
        let mut grads = ParamGradients::zeros_like(&params);
        for (loss, g) in &results {
            loss_sum += loss;
            grads.add_assign(g)?;
        }
        let mean_loss = loss_sum / cfg.batch_size as f64;
        grads.scale(1.0 / cfg.batch_size as f64);

        if !mean_loss.is_finite() {
            return Err(Error::Divergence {
                iteration,
                reason: format!("batch loss is {mean_loss}"),
            });
        }

        on_iteration(&TrainEvent {
            iteration,
            loss: mean_loss,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            params: &params,
        })?;

        sgd_step(&mut params, &grads, cfg, iteration)?;
    }

    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hartley::dht2;
    use rand::Rng;
    use rand::SeedableRng;

    fn seeded_grid(rows: usize, cols: usize, seed: u64) -> Grid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Grid::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn cfg_with(loss: LossKind) -> TrainingConfig {
        TrainingConfig { loss, ..TrainingConfig::default() }
    }

    #[test]
    fn l2_loss_matches_manual_sum() {
        let target = Grid::from_vec(1, 3, vec![1.0, 0.0, -2.0]).unwrap();
        let recon = Grid::from_vec(1, 3, vec![1.5, 0.0, -1.0]).unwrap();
        let (loss, grad) = loss_and_grad(&recon, &target, &cfg_with(LossKind::L2)).unwrap();
        assert!((loss - (0.25 + 0.0 + 1.0)).abs() < 1e-15);
        assert_eq!(grad.as_slice(), &[1.0, 0.0, 2.0]);
    }

    #[test]
    fn l1_loss_and_subgradient() {
        let target = Grid::from_vec(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let recon = Grid::from_vec(1, 3, vec![0.0, 2.0, 4.5]).unwrap();
        let (loss, grad) = loss_and_grad(&recon, &target, &cfg_with(LossKind::L1)).unwrap();
        assert!((loss - 2.5).abs() < 1e-15);
        assert_eq!(grad.as_slice(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn emphasis_is_one_at_dc_and_peaks_mid_band() {
        let w = emphasis_weights(8, 8, 0.01);
        assert_eq!(w[(0, 0)], 1.0);
        let peak = (0.01f64 * 8.0).exp();
        assert!((w[(4, 4)] - peak).abs() < 1e-12);
        // Wrap-around symmetry.
        assert_eq!(w[(1, 3)], w[(7, 5)]);
    }

    #[test]
    fn exp_l2_reduces_to_l2_at_zero_beta() {
        let target = seeded_grid(6, 5, 1);
        let recon = seeded_grid(6, 5, 2);
        let l2 = loss_and_grad(&recon, &target, &cfg_with(LossKind::L2)).unwrap();
        let mut cfg = cfg_with(LossKind::ExpL2);
        cfg.beta = 0.0;
        let exp = loss_and_grad(&recon, &target, &cfg).unwrap();
        assert!((l2.0 - exp.0).abs() < 1e-12);
        assert!(l2.1.max_abs_diff(&exp.1).unwrap() < 1e-12);
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let rows = 5;
        let cols = 6;
        let target = seeded_grid(rows, cols, 3);
        // Keep |recon - target| well away from zero so the L1 subgradient is
        // stable under the probe size.
        let offset = seeded_grid(rows, cols, 4)
            .map(|v| if v >= 0.0 { v * 0.9 + 0.1 } else { v * 0.9 - 0.1 });
        let recon = target.add(&offset).unwrap();
        let eps = 1e-6;
        for kind in [LossKind::L1, LossKind::L2, LossKind::ExpL2] {
            let cfg = cfg_with(kind);
            let (_, grad) = loss_and_grad(&recon, &target, &cfg).unwrap();
            for r in 0..rows {
                for c in 0..cols {
                    let mut plus = recon.clone();
                    plus[(r, c)] += eps;
                    let mut minus = recon.clone();
                    minus[(r, c)] -= eps;
                    let lp = loss_and_grad(&plus, &target, &cfg).unwrap().0;
                    let lm = loss_and_grad(&minus, &target, &cfg).unwrap().0;
                    let fd = (lp - lm) / (2.0 * eps);
                    let g = grad[(r, c)];
                    let rel = (fd - g).abs() / g.abs().max(1e-8);
                    assert!(rel < 1e-4, "{kind:?} at ({r},{c}): fd={fd} grad={g}");
                }
            }
        }
    }

    #[test]
    fn l2_spectral_loss_equals_spatial_sse() {
        let a = seeded_grid(12, 10, 5);
        let b = seeded_grid(12, 10, 6);
        let (loss, _) =
            loss_and_grad(&dht2(&a).unwrap(), &dht2(&b).unwrap(), &cfg_with(LossKind::L2))
                .unwrap();
        let spatial = a.sub(&b).unwrap().sum_sq();
        assert!((loss - spatial).abs() / spatial < 1e-9);
    }

    fn tiny_arch() -> NetworkArch {
        NetworkArch {
            layers: 2,
            kernels_per_layer: 2,
            half_width: 1,
            height: 8,
            width: 8,
            tie_symmetric_weights: false,
        }
    }

    #[test]
    fn sgd_step_is_identity_for_zero_gradients_or_zero_rate() {
        let arch = tiny_arch();
        let reference = NetworkParams::init(&arch, 1).unwrap();
        let zeros = ParamGradients::zeros_like(&reference);
        let cfg = TrainingConfig::default();

        let mut params = reference.clone();
        sgd_step(&mut params, &zeros, &cfg, 0).unwrap();
        assert_eq!(params, reference);

        let mut ones = ParamGradients::zeros_like(&reference);
        for g in &mut ones.weights {
            *g = Grid::filled(8, 8, 1.0);
        }
        let mut cfg0 = cfg.clone();
        cfg0.gamma = 0.0;
        let mut params = reference.clone();
        sgd_step(&mut params, &ones, &cfg0, 0).unwrap();
        assert_eq!(params, reference);
    }

    #[test]
    fn sgd_step_clamps_to_gamma_theta() {
        let arch = tiny_arch();
        let reference = NetworkParams::init(&arch, 2).unwrap();
        let mut grads = ParamGradients::zeros_like(&reference);
        grads.weights[0] = Grid::filled(8, 8, 5.0e7); // far beyond theta
        grads.layer_mix[1] = -5.0e7;
        let cfg = TrainingConfig::default();

        let mut params = reference.clone();
        sgd_step(&mut params, &grads, &cfg, 0).unwrap();
        let bound = cfg.gamma * cfg.theta;
        let moved = params.weights[0].sub(&reference.weights[0]).unwrap();
        assert!((moved.max_abs() - bound).abs() < 1e-12);
        assert!((params.layer_mix[1] - reference.layer_mix[1] - bound).abs() < 1e-12);
    }

    #[test]
    fn sgd_step_rejects_non_finite_gradients() {
        let arch = tiny_arch();
        let mut params = NetworkParams::init(&arch, 3).unwrap();
        let snapshot = params.clone();
        let mut grads = ParamGradients::zeros_like(&params);
        grads.biases[1][(0, 0)] = f64::NAN;
        let err = sgd_step(&mut params, &grads, &TrainingConfig::default(), 7).unwrap_err();
        assert!(matches!(err, Error::Divergence { iteration: 7, .. }));
        // The update must not have been partially applied.
        assert_eq!(params, snapshot);
    }

    #[test]
    fn config_validation() {
        let ok = TrainingConfig::default();
        assert!(ok.validate().is_ok());
        assert!(TrainingConfig { theta: 0.0, ..ok.clone() }.validate().is_err());
        assert!(TrainingConfig { gamma: -1.0, ..ok.clone() }.validate().is_err());
        assert!(TrainingConfig { gamma: f64::NAN, ..ok.clone() }.validate().is_err());
        assert!(TrainingConfig { batch_size: 0, ..ok.clone() }.validate().is_err());
        // gamma = 0 is degenerate but legal: the update is a no-op.
        assert!(TrainingConfig { gamma: 0.0, ..ok }.validate().is_ok());
    }

    #[test]
    fn train_rejects_bad_datasets() {
        let arch = tiny_arch();
        let cfg = TrainingConfig { max_iters: 1, ..TrainingConfig::default() };
        assert!(train(&[], &arch, &cfg, |_| Ok(())).is_err());
        let wrong = TrainingSample { input: Grid::new(4, 4), target: Grid::new(4, 4) };
        assert!(train(&[wrong], &arch, &cfg, |_| Ok(())).is_err());
    }

    #[test]
    fn zero_gamma_training_returns_the_initialization() {
        let arch = tiny_arch();
        let sample = TrainingSample {
            input: seeded_grid(8, 8, 7),
            target: seeded_grid(8, 8, 8),
        };
        let cfg = TrainingConfig {
            gamma: 0.0,
            max_iters: 5,
            ..TrainingConfig::default()
        };
        let trained = train(&[sample], &arch, &cfg, |_| Ok(())).unwrap();
        assert_eq!(trained, NetworkParams::init(&arch, cfg.seed).unwrap());
    }

    #[test]
    fn training_is_deterministic_in_the_seed() {
        let arch = tiny_arch();
        let dataset: Vec<TrainingSample> = (0..3)
            .map(|i| TrainingSample {
                input: seeded_grid(8, 8, 20 + i),
                target: seeded_grid(8, 8, 30 + i),
            })
            .collect();
        let cfg = TrainingConfig { max_iters: 25, batch_size: 2, seed: 5, ..Default::default() };
        let a = train(&dataset, &arch, &cfg, |_| Ok(())).unwrap();
        let b = train(&dataset, &arch, &cfg, |_| Ok(())).unwrap();
        assert_eq!(a, b);
        let other = TrainingConfig { seed: 6, ..cfg };
        let c = train(&dataset, &arch, &other, |_| Ok(())).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn callback_sees_pre_step_loss_and_can_abort() {
        let arch = tiny_arch();
        let sample = TrainingSample {
            input: seeded_grid(8, 8, 40),
            target: seeded_grid(8, 8, 41),
        };
        let cfg = TrainingConfig { max_iters: 10, ..TrainingConfig::default() };
        let mut iters = Vec::new();
        let err = train(&[sample], &arch, &cfg, |ev| {
            iters.push(ev.iteration);
            assert!(ev.loss.is_finite());
            if ev.iteration == 3 {
                Err(Error::invalid("stop requested"))
            } else {
                Ok(())
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
        assert_eq!(iters, vec![0, 1, 2, 3]);
    }

    #[test]
    fn absurd_learning_rate_reports_divergence() {
        let arch = tiny_arch();
        let sample = TrainingSample {
            input: seeded_grid(8, 8, 50).scaled(100.0),
            target: seeded_grid(8, 8, 51),
        };
        let cfg = TrainingConfig {
            gamma: 1.0e18,
            theta: 1.0e30,
            max_iters: 200,
            ..TrainingConfig::default()
        };
        match train(&[sample], &arch, &cfg, |_| Ok(())) {
            Err(Error::Divergence { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
