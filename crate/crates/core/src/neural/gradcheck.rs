//! Central finite-difference verification of [`Mlp2::backward`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bce, sample_gaussian, Activation, Mlp2, Mode};
use crate::error::Result;
use crate::linalg::DenseMatrix;

/// Finite-difference step.
pub const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely: the relative error
/// denominator is `max(|analytic|, |numeric|, ABS_FLOOR)`.
pub const ABS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub n_checked: usize,
    /// Coordinates skipped because a perturbation flipped a ReLU.
    pub n_skipped: usize,
}

impl GradCheckReport {
    fn merge(self, other: Self) -> Self {
        Self {
            max_rel_error: self.max_rel_error.max(other.max_rel_error),
            n_checked: self.n_checked + other.n_checked,
            n_skipped: self.n_skipped + other.n_skipped,
        }
    }
}

/// Scalar test loss: BCE for sigmoid outputs, a fixed random linear
/// functional otherwise.
struct Objective {
    target: DenseMatrix,
    sigmoid: bool,
}

impl Objective {
    fn value_and_grad(&self, out: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
        if self.sigmoid {
            bce(out, &self.target)
        } else {
            let v = out
                .values()
                .iter()
                .zip(self.target.values())
                .map(|(o, c)| o * c)
                .sum();
            Ok((v, self.target.clone()))
        }
    }
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(ABS_FLOOR)
}

fn relu_pattern(net: &Mlp2, input: &DenseMatrix) -> Result<Vec<bool>> {
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    let (_, cache) = net.forward(input, Mode::Train, &mut unused)?;
    let cache = cache.expect("train mode returns a cache");
    Ok(cache.layers[..2]
        .iter()
        .flat_map(|c| c.pre_activation().values().iter().map(|&v| v > 0.0))
        .collect())
}

fn eval_loss(net: &Mlp2, input: &DenseMatrix, obj: &Objective) -> Result<f64> {
    Ok(obj.value_and_grad(&net.predict(input)?)?.0)
}

/// Compares analytic gradients of every parameter and input entry against
/// central differences. `net` must have dropout disabled.
pub fn check_network(net: &Mlp2, input: &DenseMatrix, target: &DenseMatrix) -> Result<GradCheckReport> {
    let obj = Objective {
        target: target.clone(),
        sigmoid: net.out_layer.activation == Activation::Sigmoid,
    };
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    let (out, cache) = net.forward(input, Mode::Train, &mut unused)?;
    let (_, grad_out) = obj.value_and_grad(&out)?;
    let (grads, grad_in) = net.backward(&cache.expect("train mode"), &grad_out)?;
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        n_checked: 0,
        n_skipped: 0,
    };
    let mut probe = net.clone();
    for (t, grad) in analytic.iter().enumerate() {
        for (i, &a) in grad.iter().enumerate() {
            let orig = probe.params()[t][i];
            probe.params_mut()[t][i] = orig + STEP;
            let plus = eval_loss(&probe, input, &obj)?;
            let plus_pattern = relu_pattern(&probe, input)?;
            probe.params_mut()[t][i] = orig - STEP;
            let minus = eval_loss(&probe, input, &obj)?;
            let minus_pattern = relu_pattern(&probe, input)?;
            probe.params_mut()[t][i] = orig;
            if plus_pattern != minus_pattern {
                report.n_skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * STEP);
            report.max_rel_error = report.max_rel_error.max(rel_error(a, numeric));
            report.n_checked += 1;
        }
    }

    let mut x = input.clone();
    for i in 0..x.values().len() {
        let orig = x.values()[i];
        x.values_mut()[i] = orig + STEP;
        let plus = eval_loss(net, &x, &obj)?;
        let plus_pattern = relu_pattern(net, &x)?;
        x.values_mut()[i] = orig - STEP;
        let minus = eval_loss(net, &x, &obj)?;
        let minus_pattern = relu_pattern(net, &x)?;
        x.values_mut()[i] = orig;
        if plus_pattern != minus_pattern {
            report.n_skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * STEP);
        report.max_rel_error = report.max_rel_error.max(rel_error(grad_in.values()[i], numeric));
        report.n_checked += 1;
    }
    Ok(report)
}

/// One random configuration: widths in `1..=10`, batch in `1..=6`, sigmoid
/// or linear output, dropout off.
pub fn check_random_config(seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [
        rng.random_range(1..=10),
        rng.random_range(1..=10),
        rng.random_range(1..=10),
        rng.random_range(1..=10),
    ];
    let batch = rng.random_range(1..=6);
    let out_act = if rng.random_bool(0.5) {
        Activation::Sigmoid
    } else {
        Activation::Linear
    };
    let mut net = Mlp2::new(dims, out_act, 0.0, &mut rng);
    // non-zero biases so the check also exercises them away from init
    for t in [1, 3, 5] {
        for b in net.params_mut()[t].iter_mut() {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    let input = sample_gaussian(batch, dims[0], &mut rng);
    let target = match out_act {
        Activation::Sigmoid => {
            let v = (0..batch * dims[3])
                .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
                .collect();
            DenseMatrix::from_vec(batch, dims[3], v)?
        }
        _ => sample_gaussian(batch, dims[3], &mut rng),
    };
    check_network(&net, &input, &target)
}

/// Runs `n_configs` random configurations derived from `seed`.
pub fn check_suite(seed: u64, n_configs: usize) -> Result<GradCheckReport> {
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        n_checked: 0,
        n_skipped: 0,
    };
    for c in 0..n_configs as u64 {
        report = report.merge(check_random_config(seed.wrapping_mul(1_000_003).wrapping_add(c))?);
    }
    Ok(report)
}
