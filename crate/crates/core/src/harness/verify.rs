//! Randomized invariant suites, runnable from the CLI.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::sampling::{random_pair, random_positive, random_stack, random_weights};
use crate::dynamics::{
    conservation_report, effective_flow_rhs, integrate_flow, FlowConfig, FlowMode, Integrator,
};
use crate::linalg::norm2;
use crate::network::{balanced_init, effective_weights, layer_gradients, LayerStack};
use crate::objective::{
    homogeneity_residual, orthogonality_residual, rayleigh_gradient, rayleigh_loss, EffectiveWeights,
};
use crate::oracle::{eigen_residual, fd_gradient, generalized_eig_min};
use crate::rng::Stream;
use crate::scatter::ScatterPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Objective,
    Network,
    Dynamics,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub scope: String,
    pub name: String,
    pub tolerance: f64,
    /// Largest residual observed (compared with `<=` against the tolerance).
    pub worst: f64,
    pub samples: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<4} {:<10} {:<44} {:>10} {:>12} {:>8}", "", "scope", "invariant", "tolerance", "worst", "samples")?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<4} {:<10} {:<44} {:>10.1e} {:>12.3e} {:>8}",
                if c.passed { "ok" } else { "FAIL" },
                c.scope,
                c.name,
                c.tolerance,
                c.worst,
                c.samples
            )?;
        }
        Ok(())
    }
}

struct Check {
    scope: &'static str,
    name: &'static str,
    tolerance: f64,
    worst: f64,
    samples: usize,
    failed: bool,
}

impl Check {
    fn new(scope: &'static str, name: &'static str, tolerance: f64) -> Self {
        Self {
            scope,
            name,
            tolerance,
            worst: 0.0,
            samples: 0,
            failed: false,
        }
    }

    fn record(&mut self, residual: f64) {
        self.samples += 1;
        if residual.is_nan() || residual > self.tolerance {
            self.failed = true;
        }
        if residual.is_nan() || residual > self.worst {
            self.worst = residual;
        }
    }

    /// Marks a sample whose computation itself errored.
    fn record_error(&mut self) {
        self.record(f64::NAN);
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            scope: self.scope.into(),
            name: self.name.into(),
            tolerance: self.tolerance,
            worst: self.worst,
            samples: self.samples,
            passed: !self.failed && self.samples > 0,
        }
    }
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&diff) / norm2(b).max(f64::MIN_POSITIVE)
}

/// Runs the randomized invariant checks for `scope`. Each check draws
/// `trials` instances from a stream seeded with `seed`.
pub fn verify_suite(scope: Scope, trials: usize, seed: u64) -> VerificationReport {
    let trials = trials.max(1);
    let mut checks = Vec::new();
    if matches!(scope, Scope::Objective | Scope::All) {
        checks.extend(objective_checks(trials, seed));
    }
    if matches!(scope, Scope::Network | Scope::All) {
        checks.extend(network_checks(trials, seed.wrapping_add(1)));
    }
    if matches!(scope, Scope::Dynamics | Scope::All) {
        checks.extend(dynamics_checks(trials, seed.wrapping_add(2)));
    }
    VerificationReport { checks }
}

fn objective_checks(trials: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = Stream::new(seed);
    let mut ortho = Check::new("objective", "orthogonality |w.grad|/(|w||grad|)", 1e-10);
    let mut homog = Check::new("objective", "homogeneity |L(aw)-L(w)|/L(w)", 1e-12);
    let mut grad = Check::new("objective", "gradient vs central differences", 1e-6);
    let mut bound = Check::new("objective", "loss >= lambda_min (violation)", 1e-10);
    let mut eig = Check::new("objective", "generalized eigen residual", 1e-8);
    for trial in 0..trials {
        // Dense checks only run on the small half, which includes trial 0.
        let d = if trial % 2 == 0 { rng.range(2, 8) } else { rng.range(9, 16) };
        let pair = random_pair(&mut rng, d);
        let w = random_weights(&mut rng, d);
        match orthogonality_residual(&w, &pair) {
            Ok(r) => ortho.record(r),
            Err(_) => ortho.record_error(),
        }
        for alpha in [1e-3, 0.5, 2.0, 1e3] {
            match homogeneity_residual(&w, &pair, alpha) {
                Ok(r) => homog.record(r),
                Err(_) => homog.record_error(),
            }
        }
        if d <= 8 {
            match gradient_error(&w, &pair) {
                Some(r) => grad.record(r),
                None => grad.record_error(),
            }
            match generalized_eig_min(&pair) {
                Ok(e) => {
                    eig.record(eigen_residual(&pair, &e));
                    match rayleigh_loss(&w, &pair) {
                        Ok(l) => bound.record((e.lambda_min - l).max(0.0)),
                        Err(_) => bound.record_error(),
                    }
                }
                Err(_) => {
                    eig.record_error();
                    bound.record_error();
                }
            }
        }
    }
    [ortho, homog, grad, bound, eig].into_iter().map(Check::finish).collect()
}

fn gradient_error(w: &EffectiveWeights, pair: &ScatterPair) -> Option<f64> {
    let analytic = rayleigh_gradient(w, pair).ok()?;
    let f = |x: &[f64]| rayleigh_loss(&EffectiveWeights(x.to_vec()), pair).unwrap_or(f64::NAN);
    let numeric = fd_gradient(f, w.as_slice(), 1e-6).ok()?;
    Some(rel_diff(&numeric, &analytic))
}

fn network_checks(trials: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = Stream::new(seed);
    let mut round = Check::new("network", "effective_weights(balanced_init(w0)) = w0", 1e-14);
    let mut fd = Check::new("network", "layer gradients vs central differences", 1e-6);
    let mut chain = Check::new("network", "assembled dw/dt vs effective flow rhs", 1e-10);
    for _ in 0..trials {
        let d = rng.range(2, 8);
        let depth = rng.range(1, 6);
        let pair = random_pair(&mut rng, d);

        let w0 = random_positive(&mut rng, d, 0.2, 3.0);
        match balanced_init(&w0, depth) {
            Ok(s) => {
                let w = effective_weights(&s);
                let worst = w.as_slice().iter().zip(&w0).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
                round.record(worst);
                match assembled_rate(&s, &pair) {
                    Some(r) => chain.record(r),
                    None => chain.record_error(),
                }
            }
            Err(_) => {
                round.record_error();
                chain.record_error();
            }
        }

        let stack = random_stack(&mut rng, depth, d, 0.5, 1.5);
        match layer_fd_error(&stack, &pair) {
            Some(r) => fd.record(r),
            None => fd.record_error(),
        }
    }
    [round, fd, chain].into_iter().map(Check::finish).collect()
}

/// `dw_i/dt = Σ_k (∂w_i/∂u_k)(du_k/dt)` assembled from layer gradients,
/// compared with the closed-form effective right-hand side.
fn assembled_rate(stack: &LayerStack, pair: &ScatterPair) -> Option<f64> {
    let w = effective_weights(stack);
    let g = rayleigh_gradient(&w, pair).ok()?;
    let lg = layer_gradients(stack, &g).ok()?;
    let mut rate = vec![0.0; stack.dim()];
    for (k, row) in lg.iter().enumerate() {
        for i in 0..stack.dim() {
            rate[i] += (w.as_slice()[i] / stack.get(k, i)) * -row[i];
        }
    }
    let rhs = effective_flow_rhs(&w, pair, stack.depth()).ok()?;
    Some(rel_diff(&rate, &rhs))
}

fn layer_fd_error(stack: &LayerStack, pair: &ScatterPair) -> Option<f64> {
    let w = effective_weights(stack);
    let g = rayleigh_gradient(&w, pair).ok()?;
    let analytic: Vec<f64> = layer_gradients(stack, &g).ok()?.concat();
    let (depth, dim) = (stack.depth(), stack.dim());
    let f = |u: &[f64]| {
        let w: Vec<f64> = (0..dim).map(|i| (0..depth).map(|k| u[k * dim + i]).product()).collect();
        rayleigh_loss(&EffectiveWeights(w), pair).unwrap_or(f64::NAN)
    };
    let numeric = fd_gradient(f, stack.as_flat(), 1e-6).ok()?;
    Some(rel_diff(&numeric, &analytic))
}

fn dynamics_checks(trials: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = Stream::new(seed);
    let mut agree = Check::new("dynamics", "per-layer vs effective flow w(t)", 1e-8);
    let mut drift = Check::new("dynamics", "quasi-norm drift (rk4)", 1e-8);
    let mut balance = Check::new("dynamics", "balance residual along flow", 1e-8);
    let mut mono = Check::new("dynamics", "loss increase between snapshots", 1e-12);
    let mut bound = Check::new("dynamics", "loss >= lambda_min (violation)", 1e-10);
    for _ in 0..trials {
        let d = if rng.unit() < 0.5 { 2 } else { 5 };
        let depth = [1, 2, 5][rng.range(0, 2)];
        let pair = random_pair(&mut rng, d);
        let w0: EffectiveWeights = random_positive(&mut rng, d, 0.5, 1.5).into();
        let cfg = |mode| FlowConfig::flow(depth, 1e-3, 10.0, Integrator::Rk4, mode).with_record_every(100);
        let (eff, lay) = match (
            integrate_flow(&w0, &pair, &cfg(FlowMode::Effective)),
            integrate_flow(&w0, &pair, &cfg(FlowMode::PerLayer)),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            _ => {
                for c in [&mut agree, &mut drift, &mut balance, &mut mono, &mut bound] {
                    c.record_error();
                }
                continue;
            }
        };
        let worst = eff
            .snapshots
            .iter()
            .zip(&lay.snapshots)
            .map(|(a, b)| rel_diff(b.w.as_slice(), a.w.as_slice()))
            .fold(0.0, f64::max);
        agree.record(worst);
        for tr in [&eff, &lay] {
            match conservation_report(&tr.snapshots, depth) {
                Ok(r) => drift.record(r.max_relative_drift),
                Err(_) => drift.record_error(),
            }
        }
        balance.record(lay.snapshots.iter().map(|s| s.balance_residual).fold(0.0, f64::max));
        let rise = eff
            .snapshots
            .windows(2)
            .map(|p| p[1].loss - p[0].loss)
            .fold(0.0, f64::max);
        mono.record(rise);
        match generalized_eig_min(&pair) {
            Ok(e) => {
                let v = eff
                    .snapshots
                    .iter()
                    .map(|s| e.lambda_min - s.loss)
                    .fold(0.0, f64::max);
                bound.record(v);
            }
            Err(_) => bound.record_error(),
        }
    }
    [agree, drift, balance, mono, bound].into_iter().map(Check::finish).collect()
}
