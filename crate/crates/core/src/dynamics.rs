//! Gradient flow and discrete gradient descent on diagonal networks, with the
//! conserved quantities tracked along each trajectory.
//!
//! Two continuous-time formulations are supported. The per-layer system
//! integrates all `L·d` layer weights under `du/dt = −∂L/∂u`; the effective
//! system integrates the `d` end-to-end weights under
//! `dw_i/dt = −L · w_i^(2−2/L) · ∂L/∂w_i`, which is what the per-layer system
//! reduces to from a balanced start. Along either, `Σ_i w_i^(2/L)` is constant
//! because the loss gradient is orthogonal to `w`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::network::{
    balanced_init, layer_gradients_into, max_balance_residual, products_into, requires_positive,
    LayerStack,
};
use crate::objective::{loss_and_gradient_into, EffectiveWeights};
use crate::scatter::ScatterPair;

/// Relative loss increase between consecutive snapshots that marks a
/// discrete run as unstable.
pub const INSTABILITY_RATIO: f64 = 1.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    ExplicitEuler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowMode {
    PerLayer,
    Effective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub depth: usize,
    /// Time step `dt` for flows, learning rate `η` for descent.
    pub step: f64,
    /// Number of steps (epochs).
    pub total: usize,
    pub integrator: Integrator,
    pub mode: FlowMode,
    pub record_every: usize,
}

impl FlowConfig {
    /// Flow over `[0, horizon]` with `round(horizon / dt)` steps.
    pub fn flow(depth: usize, dt: f64, horizon: f64, integrator: Integrator, mode: FlowMode) -> Self {
        Self {
            depth,
            step: dt,
            total: (horizon / dt).round() as usize,
            integrator,
            mode,
            record_every: 1,
        }
    }

    pub fn gradient_descent(depth: usize, eta: f64, epochs: usize) -> Self {
        Self {
            depth,
            step: eta,
            total: epochs,
            integrator: Integrator::ExplicitEuler,
            mode: FlowMode::PerLayer,
            record_every: 100,
        }
    }

    pub fn with_record_every(mut self, stride: usize) -> Self {
        self.record_every = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::ZeroDepth);
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidConfig(format!("step must be positive, got {}", self.step)));
        }
        if self.total == 0 {
            return Err(Error::InvalidConfig("total must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be at least 1".into()));
        }
        Ok(())
    }

    fn is_recorded(&self, n: usize) -> bool {
        n.is_multiple_of(self.record_every) || n == self.total
    }
}

/// Diagnostics of the effective weights at one recorded time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySnapshot {
    /// Continuous time for flows, epoch index for descent.
    pub t: f64,
    pub w: EffectiveWeights,
    pub loss: f64,
    pub quasi_norm: f64,
    pub balance_residual: f64,
    pub grad_norm: f64,
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    PositivityBreach { t: f64, index: usize, value: f64 },
    NonFinite { t: f64 },
}

impl Termination {
    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<TrajectorySnapshot>,
    /// Layer weights at each snapshot; empty for effective-mode flows.
    pub layer_states: Vec<LayerStack>,
    pub termination: Termination,
    /// First snapshot time whose loss exceeds the previous one by more than
    /// [`INSTABILITY_RATIO`]. Only tracked for descent runs.
    pub first_unstable: Option<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySnapshot {
        self.snapshots.last().expect("trajectories hold at least one snapshot")
    }
}

/// `Σ_i |w_i|^(2/L)`.
pub fn quasi_norm(w: &EffectiveWeights, depth: usize) -> f64 {
    quasi_norm_slice(w.as_slice(), depth)
}

fn quasi_norm_slice(w: &[f64], depth: usize) -> f64 {
    match depth {
        1 => w.iter().map(|x| x * x).sum(),
        2 => w.iter().map(|x| x.abs()).sum(),
        _ => {
            let p = 2.0 / depth as f64;
            w.iter().map(|x| x.abs().powf(p)).sum()
        }
    }
}

/// `w^(2 − 2/L)` for positive `w`, exact for `L ∈ {1, 2}`.
#[inline]
fn flow_gain(w: f64, depth: usize) -> f64 {
    match depth {
        1 => 1.0,
        2 => w,
        _ => w.powf(2.0 - 2.0 / depth as f64),
    }
}

/// Right-hand side of the effective flow: `−L · w_i^(2−2/L) · (∇L)_i`.
///
/// For `L ≥ 2` the weights must be strictly positive; at `L = 1` the gain is
/// identically one and any sign is accepted.
pub fn effective_flow_rhs(w: &EffectiveWeights, pair: &ScatterPair, depth: usize) -> Result<Vec<f64>> {
    if depth == 0 {
        return Err(Error::ZeroDepth);
    }
    if w.len() != pair.dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.dim(),
            got: w.len(),
        });
    }
    let mut ws = Workspace::new(w.len(), 1);
    let mut out = vec![0.0; w.len()];
    EffectiveSystem { pair, depth }.eval(w.as_slice(), &mut out, &mut ws, 0.0)?;
    Ok(out)
}

/// Scratch buffers shared by the right-hand sides.
struct Workspace {
    grad: Vec<f64>,
    scratch: Vec<f64>,
    w: Vec<f64>,
    layer_grad: Vec<f64>,
}

impl Workspace {
    fn new(dim: usize, depth: usize) -> Self {
        Self {
            grad: vec![0.0; dim],
            scratch: vec![0.0; 2 * dim],
            w: vec![0.0; dim],
            layer_grad: vec![0.0; dim * depth],
        }
    }
}

/// Rejects non-finite states, and non-positive ones for `L ≥ 2`.
fn check_state(y: &[f64], t: f64, depth: usize) -> Result<()> {
    let positive = requires_positive(depth);
    for (index, &value) in y.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { t });
        }
        if positive && value <= 0.0 {
            return Err(Error::PositivityBreach { t, index, value });
        }
    }
    Ok(())
}

trait System {
    fn eval(&self, y: &[f64], out: &mut [f64], ws: &mut Workspace, t: f64) -> Result<()>;
}

struct EffectiveSystem<'a> {
    pair: &'a ScatterPair,
    depth: usize,
}

impl System for EffectiveSystem<'_> {
    fn eval(&self, w: &[f64], out: &mut [f64], ws: &mut Workspace, t: f64) -> Result<()> {
        check_state(w, t, self.depth)?;
        loss_and_gradient_into(w, self.pair, &mut ws.grad, &mut ws.scratch)?;
        let l = self.depth as f64;
        for i in 0..w.len() {
            out[i] = -l * flow_gain(w[i], self.depth) * ws.grad[i];
        }
        Ok(())
    }
}

struct LayerSystem<'a> {
    pair: &'a ScatterPair,
    depth: usize,
    dim: usize,
}

impl System for LayerSystem<'_> {
    fn eval(&self, u: &[f64], out: &mut [f64], ws: &mut Workspace, t: f64) -> Result<()> {
        check_state(u, t, self.depth)?;
        products_into(self.depth, self.dim, u, &mut ws.w);
        loss_and_gradient_into(&ws.w, self.pair, &mut ws.grad, &mut ws.scratch)?;
        layer_gradients_into(self.depth, self.dim, u, &ws.w, &ws.grad, out);
        for x in out.iter_mut() {
            *x = -*x;
        }
        Ok(())
    }
}

/// Stage buffers for the fixed-step schemes.
struct Stages {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

fn advance<S: System>(
    sys: &S,
    integrator: Integrator,
    y: &mut [f64],
    t: f64,
    dt: f64,
    st: &mut Stages,
    ws: &mut Workspace,
) -> Result<()> {
    match integrator {
        Integrator::ExplicitEuler => {
            sys.eval(y, &mut st.k1, ws, t)?;
            for (yi, k) in y.iter_mut().zip(&st.k1) {
                *yi += dt * k;
            }
        }
        Integrator::Rk4 => {
            let n = y.len();
            sys.eval(y, &mut st.k1, ws, t)?;
            for i in 0..n {
                st.tmp[i] = y[i] + 0.5 * dt * st.k1[i];
            }
            sys.eval(&st.tmp, &mut st.k2, ws, t + 0.5 * dt)?;
            for i in 0..n {
                st.tmp[i] = y[i] + 0.5 * dt * st.k2[i];
            }
            sys.eval(&st.tmp, &mut st.k3, ws, t + 0.5 * dt)?;
            for i in 0..n {
                st.tmp[i] = y[i] + dt * st.k3[i];
            }
            sys.eval(&st.tmp, &mut st.k4, ws, t + dt)?;
            for i in 0..n {
                y[i] += dt / 6.0 * (st.k1[i] + 2.0 * st.k2[i] + 2.0 * st.k3[i] + st.k4[i]);
            }
        }
    }
    Ok(())
}

fn snapshot(
    t: f64,
    w: &[f64],
    pair: &ScatterPair,
    depth: usize,
    balance: f64,
    ws: &mut Workspace,
) -> Result<TrajectorySnapshot> {
    let q = loss_and_gradient_into(w, pair, &mut ws.grad, &mut ws.scratch)?;
    let snap = TrajectorySnapshot {
        t,
        w: EffectiveWeights(w.to_vec()),
        loss: q.loss,
        quasi_norm: quasi_norm_slice(w, depth),
        balance_residual: balance,
        grad_norm: norm2(&ws.grad),
    };
    if !(snap.loss.is_finite() && snap.quasi_norm.is_finite() && snap.grad_norm.is_finite()) {
        return Err(Error::NonFinite { t });
    }
    Ok(snap)
}

fn layer_snapshot(
    t: f64,
    u: &[f64],
    pair: &ScatterPair,
    depth: usize,
    ws: &mut Workspace,
) -> Result<TrajectorySnapshot> {
    let dim = pair.dim();
    let mut w = vec![0.0; dim];
    products_into(depth, dim, u, &mut w);
    let balance = max_balance_residual(depth, dim, u);
    snapshot(t, &w, pair, depth, balance, ws)
}

/// Integrates the gradient flow from `w0`.
///
/// In [`FlowMode::PerLayer`] the stack starts balanced at `w0` and all `L·d`
/// layer weights are integrated; in [`FlowMode::Effective`] the reduced
/// `d`-dimensional system is integrated directly. A coordinate reaching zero
/// or a non-finite state aborts the run with an error.
pub fn integrate_flow(w0: &EffectiveWeights, pair: &ScatterPair, config: &FlowConfig) -> Result<Trajectory> {
    config.validate()?;
    if w0.len() != pair.dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.dim(),
            got: w0.len(),
        });
    }
    match config.mode {
        FlowMode::PerLayer => {
            let stack = balanced_init(w0.as_slice(), config.depth)?;
            integrate_stack(&stack, pair, config)
        }
        FlowMode::Effective => integrate_effective(w0, pair, config),
    }
}

fn integrate_effective(w0: &EffectiveWeights, pair: &ScatterPair, config: &FlowConfig) -> Result<Trajectory> {
    check_state(w0.as_slice(), 0.0, config.depth)?;
    let dim = pair.dim();
    let sys = EffectiveSystem {
        pair,
        depth: config.depth,
    };
    let mut ws = Workspace::new(dim, 1);
    let mut st = Stages::new(dim);
    let mut y = w0.as_slice().to_vec();
    let dt = config.step;
    let mut snapshots = vec![snapshot(0.0, &y, pair, config.depth, 0.0, &mut ws)?];
    for n in 1..=config.total {
        let t = (n - 1) as f64 * dt;
        advance(&sys, config.integrator, &mut y, t, dt, &mut st, &mut ws)?;
        let t = n as f64 * dt;
        check_state(&y, t, config.depth)?;
        if config.is_recorded(n) {
            snapshots.push(snapshot(t, &y, pair, config.depth, 0.0, &mut ws)?);
        }
    }
    Ok(Trajectory {
        snapshots,
        layer_states: Vec::new(),
        termination: Termination::Completed,
        first_unstable: None,
    })
}

/// Integrates the per-layer flow from an arbitrary (possibly unbalanced)
/// stack. `config.mode` is ignored.
pub fn integrate_stack(stack0: &LayerStack, pair: &ScatterPair, config: &FlowConfig) -> Result<Trajectory> {
    config.validate()?;
    check_stack(stack0, pair, config)?;
    let (depth, dim) = (stack0.depth(), stack0.dim());
    let sys = LayerSystem { pair, depth, dim };
    let mut ws = Workspace::new(dim, depth);
    let mut st = Stages::new(depth * dim);
    let mut u = stack0.as_flat().to_vec();
    let dt = config.step;
    let mut snapshots = vec![layer_snapshot(0.0, &u, pair, depth, &mut ws)?];
    let mut layer_states = vec![stack0.clone()];
    for n in 1..=config.total {
        let t = (n - 1) as f64 * dt;
        advance(&sys, config.integrator, &mut u, t, dt, &mut st, &mut ws)?;
        let t = n as f64 * dt;
        check_state(&u, t, depth)?;
        if config.is_recorded(n) {
            snapshots.push(layer_snapshot(t, &u, pair, depth, &mut ws)?);
            layer_states.push(LayerStack::from_flat(depth, dim, u.clone())?);
        }
    }
    Ok(Trajectory {
        snapshots,
        layer_states,
        termination: Termination::Completed,
        first_unstable: None,
    })
}

fn check_stack(stack: &LayerStack, pair: &ScatterPair, config: &FlowConfig) -> Result<()> {
    if stack.dim() != pair.dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.dim(),
            got: stack.dim(),
        });
    }
    if stack.depth() != config.depth {
        return Err(Error::InvalidConfig(format!(
            "stack depth {} does not match configured depth {}",
            stack.depth(),
            config.depth
        )));
    }
    Ok(())
}

/// Full-batch gradient descent on the layer weights: every layer is updated
/// simultaneously from one loss evaluation per epoch.
///
/// Positivity breaches and non-finite states end the run early; the
/// trajectory recorded so far (plus the last valid epoch) is returned with the
/// reason in [`Trajectory::termination`].
pub fn gd_run(stack0: &LayerStack, pair: &ScatterPair, config: &FlowConfig) -> Result<Trajectory> {
    config.validate()?;
    if config.mode != FlowMode::PerLayer {
        return Err(Error::InvalidConfig(
            "gradient descent acts on layer weights; mode must be per-layer".into(),
        ));
    }
    check_stack(stack0, pair, config)?;
    let (depth, dim) = (stack0.depth(), stack0.dim());
    let eta = config.step;
    let mut ws = Workspace::new(dim, depth);
    let mut u = stack0.as_flat().to_vec();
    let mut next = u.clone();

    let mut snapshots = vec![layer_snapshot(0.0, &u, pair, depth, &mut ws)?];
    let mut layer_states = vec![stack0.clone()];
    let mut first_unstable = None;
    let mut termination = Termination::Completed;
    let mut last_recorded = 0;

    for n in 1..=config.total {
        products_into(depth, dim, &u, &mut ws.w);
        loss_and_gradient_into(&ws.w, pair, &mut ws.grad, &mut ws.scratch)?;
        layer_gradients_into(depth, dim, &u, &ws.w, &ws.grad, &mut ws.layer_grad);
        for ((nx, &x), g) in next.iter_mut().zip(&u).zip(&ws.layer_grad) {
            *nx = x - eta * g;
        }
        let t = n as f64;
        if let Err(e) = check_state(&next, t, depth) {
            termination = match e {
                Error::PositivityBreach { t, index, value } => {
                    Termination::PositivityBreach { t, index, value }
                }
                _ => Termination::NonFinite { t },
            };
            break;
        }
        std::mem::swap(&mut u, &mut next);
        if config.is_recorded(n) {
            match layer_snapshot(t, &u, pair, depth, &mut ws) {
                Ok(s) => {
                    let prev = snapshots.last().expect("seeded with epoch 0").loss;
                    if first_unstable.is_none() && s.loss > INSTABILITY_RATIO * prev {
                        first_unstable = Some(t);
                    }
                    snapshots.push(s);
                    layer_states.push(LayerStack::from_flat(depth, dim, u.clone())?);
                    last_recorded = n;
                }
                Err(_) => {
                    termination = Termination::NonFinite { t };
                    break;
                }
            }
        }
    }

    // Keep the last valid state when the run stopped between strides.
    if !termination.is_completed() {
        let last_valid = match &termination {
            Termination::PositivityBreach { t, .. } | Termination::NonFinite { t } => *t as usize - 1,
            Termination::Completed => unreachable!(),
        };
        if last_valid > last_recorded {
            if let Ok(s) = layer_snapshot(last_valid as f64, &u, pair, depth, &mut ws) {
                snapshots.push(s);
                layer_states.push(LayerStack::from_flat(depth, dim, u.clone())?);
            }
        }
    }

    Ok(Trajectory {
        snapshots,
        layer_states,
        termination,
        first_unstable,
    })
}

/// Drift of the conserved sum `Σ|w_i|^(2/L)` along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub initial: f64,
    pub max_relative_drift: f64,
    pub argmax_time: f64,
}

pub fn conservation_report(snapshots: &[TrajectorySnapshot], depth: usize) -> Result<ConservationReport> {
    let first = snapshots.first().ok_or(Error::EmptyTrajectory)?;
    let initial = quasi_norm(&first.w, depth);
    let mut report = ConservationReport {
        initial,
        max_relative_drift: 0.0,
        argmax_time: first.t,
    };
    for s in snapshots {
        let drift = (quasi_norm(&s.w, depth) - initial).abs() / initial;
        if drift > report.max_relative_drift {
            report.max_relative_drift = drift;
            report.argmax_time = s.t;
        }
    }
    Ok(report)
}
