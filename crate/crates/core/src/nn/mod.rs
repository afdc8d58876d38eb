//! Self-contained feed-forward networks: rectifier trunks, a masked-softmax
//! policy head and a tanh value head, hand-derived gradients for the three
//! policy losses plus mean-squared value error, and Adam.
//!
//! No autodiff: the topology is fixed, so each loss's logit gradient is
//! written out directly and pushed through the layers. Forward evaluation on
//! frozen parameters is safe to share; updates need exclusive access.

mod checkpoint;

pub use checkpoint::{load_params, save_params};

use crate::semgame::Player;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("mask has no legal action")]
    AllMasked,
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint format version {found} is not supported")]
    VersionMismatch { found: u32 },
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

const LOG_FLOOR: f64 = 1e-12;

// ---------------------------------------------------------------------------
// layers

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Vec<f64>, // row-major, out_dim x in_dim
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    fn zeros(in_dim: usize, out_dim: usize) -> Linear {
        Linear {
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    /// Fan-in/fan-out scaled uniform init; biases stay zero.
    fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Linear {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut layer = Linear::zeros(in_dim, out_dim);
        for w in layer.w.iter_mut() {
            *w = rng.gen_range(-bound..=bound);
        }
        layer
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut out = self.b.clone();
        for (o, out_v) in out.iter_mut().enumerate() {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = 0.0;
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            *out_v += acc;
        }
        out
    }

    /// Accumulate parameter gradients for this layer and return dL/d(input).
    fn backward(&self, x: &[f64], grad_out: &[f64], grads: &mut Linear) -> Vec<f64> {
        let mut grad_in = vec![0.0; self.in_dim];
        for (o, &g) in grad_out.iter().enumerate() {
            grads.b[o] += g;
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut grads.w[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] += g * x[i];
                grad_in[i] += g * row[i];
            }
        }
        grad_in
    }

    fn visit(&self, f: &mut impl FnMut(f64)) {
        self.w.iter().for_each(|&v| f(v));
        self.b.iter().for_each(|&v| f(v));
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(&mut f64)) {
        self.w.iter_mut().for_each(&mut *f);
        self.b.iter_mut().for_each(&mut *f);
    }
}

fn relu(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// A dense stack with rectifiers between layers and a raw final output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Per-layer inputs recorded by a forward pass, for backprop.
struct Trace {
    inputs: Vec<Vec<f64>>, // input to each layer (post-relu of the previous)
    raw_out: Vec<f64>,
}

impl Mlp {
    fn init(dims: &[usize], rng: &mut ChaCha8Rng) -> Mlp {
        let layers = dims
            .windows(2)
            .map(|w| Linear::init(w[0], w[1], rng))
            .collect();
        Mlp { layers }
    }

    fn zeros_like(&self) -> Mlp {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Linear::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }

    fn forward_trace(&self, x: &[f64]) -> Trace {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            inputs.push(cur.clone());
            let mut out = layer.forward(&cur);
            if i + 1 < self.layers.len() {
                relu(&mut out);
            }
            cur = out;
        }
        Trace {
            inputs,
            raw_out: cur,
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).raw_out
    }

    /// Backprop dL/d(raw output) through the stack, accumulating into
    /// `grads` (same shape as self).
    fn backward(&self, trace: &Trace, grad_out: &[f64], grads: &mut Mlp) {
        let mut grad = grad_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            if i + 1 < self.layers.len() {
                // Gradient passes the rectifier only where it was active;
                // the layer input recorded for layer i+1 is that output.
                let post = &trace.inputs[i + 1];
                for (g, &p) in grad.iter_mut().zip(post) {
                    if p <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            grad = self.layers[i].backward(&trace.inputs[i], &grad, &mut grads.layers[i]);
        }
    }

    fn visit(&self, f: &mut impl FnMut(f64)) {
        for l in &self.layers {
            l.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(&mut f64)) {
        for l in &mut self.layers {
            l.visit_mut(f);
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.len() + l.b.len())
            .sum::<usize>()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].in_dim];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        dims
    }
}

// ---------------------------------------------------------------------------
// policy/value nets

/// How policy and value share parameters: one trunk with two heads, or two
/// fully independent stacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvWiring {
    SharedHeads,
    SeparatePv,
}

/// Whether both players share one network set or each player owns one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlayerWiring {
    Shared,
    PerPlayer,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PvNet {
    Shared {
        trunk: Mlp,
        policy_head: Linear,
        value_head: Linear,
    },
    Separate {
        policy: Mlp,
        value: Mlp,
    },
}

impl PvNet {
    fn init(cfg: &NetConfig, trunk: &[usize], rng: &mut ChaCha8Rng) -> PvNet {
        let mut trunk_dims = vec![cfg.input_dim];
        trunk_dims.extend_from_slice(trunk);
        match cfg.pv_wiring {
            PvWiring::SharedHeads => {
                let trunk = Mlp::init(&trunk_dims, rng);
                let last = *trunk_dims.last().unwrap();
                PvNet::Shared {
                    trunk,
                    policy_head: Linear::init(last, cfg.action_dim, rng),
                    value_head: Linear::init(last, 1, rng),
                }
            }
            PvWiring::SeparatePv => {
                let mut policy_dims = trunk_dims.clone();
                policy_dims.push(cfg.action_dim);
                let mut value_dims = trunk_dims;
                value_dims.push(1);
                PvNet::Separate {
                    policy: Mlp::init(&policy_dims, rng),
                    value: Mlp::init(&value_dims, rng),
                }
            }
        }
    }

    pub fn zeros_like(&self) -> PvNet {
        match self {
            PvNet::Shared {
                trunk,
                policy_head,
                value_head,
            } => PvNet::Shared {
                trunk: trunk.zeros_like(),
                policy_head: Linear::zeros(policy_head.in_dim, policy_head.out_dim),
                value_head: Linear::zeros(value_head.in_dim, value_head.out_dim),
            },
            PvNet::Separate { policy, value } => PvNet::Separate {
                policy: policy.zeros_like(),
                value: value.zeros_like(),
            },
        }
    }

    pub fn visit(&self, f: &mut impl FnMut(f64)) {
        match self {
            PvNet::Shared {
                trunk,
                policy_head,
                value_head,
            } => {
                trunk.visit(f);
                policy_head.visit(f);
                value_head.visit(f);
            }
            PvNet::Separate { policy, value } => {
                policy.visit(f);
                value.visit(f);
            }
        }
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut f64)) {
        match self {
            PvNet::Shared {
                trunk,
                policy_head,
                value_head,
            } => {
                trunk.visit_mut(f);
                policy_head.visit_mut(f);
                value_head.visit_mut(f);
            }
            PvNet::Separate { policy, value } => {
                policy.visit_mut(f);
                value.visit_mut(f);
            }
        }
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    fn policy_logits(&self, x: &[f64]) -> Vec<f64> {
        match self {
            PvNet::Shared {
                trunk, policy_head, ..
            } => {
                let mut t = trunk.forward(x);
                relu(&mut t);
                policy_head.forward(&t)
            }
            PvNet::Separate { policy, .. } => policy.forward(x),
        }
    }

    fn value_raw(&self, x: &[f64]) -> f64 {
        match self {
            PvNet::Shared {
                trunk, value_head, ..
            } => {
                let mut t = trunk.forward(x);
                relu(&mut t);
                value_head.forward(&t)[0]
            }
            PvNet::Separate { value, .. } => value.forward(x)[0],
        }
    }

    /// Masked policy distribution over the action indices allowed by `mask`.
    pub fn forward_policy(&self, x: &[f64], mask: &[bool]) -> Result<Vec<f64>, NnError> {
        let logits = self.policy_logits(x);
        masked_softmax(&logits, mask)
    }

    /// Value estimate in the open interval (-1, 1).
    pub fn forward_value(&self, x: &[f64]) -> f64 {
        self.value_raw(x).tanh()
    }

    /// Backprop a logit-space gradient, accumulating into `grads`.
    fn backward_policy(&self, x: &[f64], dlogits: &[f64], grads: &mut PvNet) {
        match (self, grads) {
            (
                PvNet::Shared {
                    trunk, policy_head, ..
                },
                PvNet::Shared {
                    trunk: gtrunk,
                    policy_head: ghead,
                    ..
                },
            ) => {
                let trace = trunk.forward_trace(x);
                let mut t = trace.raw_out.clone();
                relu(&mut t);
                let mut grad_t = policy_head.backward(&t, dlogits, ghead);
                for (g, &raw) in grad_t.iter_mut().zip(&trace.raw_out) {
                    if raw <= 0.0 {
                        *g = 0.0;
                    }
                }
                trunk.backward(&trace, &grad_t, gtrunk);
            }
            (PvNet::Separate { policy, .. }, PvNet::Separate { policy: gpol, .. }) => {
                let trace = policy.forward_trace(x);
                policy.backward(&trace, dlogits, gpol);
            }
            _ => unreachable!("grads mirror the net"),
        }
    }

    /// Backprop dL/d(pre-tanh value), accumulating into `grads`.
    fn backward_value(&self, x: &[f64], draw: f64, grads: &mut PvNet) {
        match (self, grads) {
            (
                PvNet::Shared {
                    trunk, value_head, ..
                },
                PvNet::Shared {
                    trunk: gtrunk,
                    value_head: ghead,
                    ..
                },
            ) => {
                let trace = trunk.forward_trace(x);
                let mut t = trace.raw_out.clone();
                relu(&mut t);
                let mut grad_t = value_head.backward(&t, &[draw], ghead);
                for (g, &raw) in grad_t.iter_mut().zip(&trace.raw_out) {
                    if raw <= 0.0 {
                        *g = 0.0;
                    }
                }
                trunk.backward(&trace, &grad_t, gtrunk);
            }
            (PvNet::Separate { value, .. }, PvNet::Separate { value: gval, .. }) => {
                let trace = value.forward_trace(x);
                value.backward(&trace, &[draw], gval);
            }
            _ => unreachable!("grads mirror the net"),
        }
    }
}

pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>, NnError> {
    if logits.len() != mask.len() {
        return Err(NnError::ShapeMismatch {
            expected: logits.len(),
            got: mask.len(),
        });
    }
    let mut max = f64::NEG_INFINITY;
    for (l, &ok) in logits.iter().zip(mask) {
        if ok && *l > max {
            max = *l;
        }
    }
    if max == f64::NEG_INFINITY {
        return Err(NnError::AllMasked);
    }
    let mut out = vec![0.0; logits.len()];
    let mut sum = 0.0;
    for (i, (&l, &ok)) in logits.iter().zip(mask).enumerate() {
        if ok {
            let e = (l - max).exp();
            out[i] = e;
            sum += e;
        }
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// losses

/// Policy learning objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyLoss {
    /// Cross-entropy toward the empirical policy.
    Cem,
    /// Clipped importance-ratio surrogate, negated into a loss.
    PpoClip { epsilon: f64 },
    /// Importance-ratio surrogate with a KL penalty toward the behavior
    /// policy, negated into a loss.
    PpoKl { beta: f64 },
}

/// One training example. `target_pi` is a distribution over legal slots;
/// `advantage` is only read by the PPO losses and `z` only by the value
/// loss.
#[derive(Debug, Clone)]
pub struct TrainRow {
    pub x: Vec<f64>,
    pub mask: Vec<bool>,
    pub target_pi: Vec<f64>,
    pub player: Player,
    pub action: usize,
    /// Behavior-policy probability of `action` at sampling time.
    pub behavior_prob: f64,
    pub z: f64,
    pub advantage: f64,
}

/// Mean cross-entropy `-sum_a target(a) ln pi(a)` over rows.
pub fn loss_cem(pi_theta: &[Vec<f64>], pi_hat: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (p, t) in pi_theta.iter().zip(pi_hat) {
        for (pa, ta) in p.iter().zip(t) {
            if *ta > 0.0 {
                total -= ta * pa.max(LOG_FLOOR).ln();
            }
        }
    }
    total / pi_theta.len().max(1) as f64
}

/// Mean squared error between value estimates and outcomes.
pub fn loss_value(v: &[f64], z: &[f64]) -> f64 {
    let mut total = 0.0;
    for (a, b) in v.iter().zip(z) {
        total += (a - b) * (a - b);
    }
    total / v.len().max(1) as f64
}

/// Mean negated PPO objective over rows. `pi_hat[i][actions[i]]` must be
/// positive (the empirical policy has full support on legal actions).
pub fn loss_ppo(
    pi_theta: &[Vec<f64>],
    pi_hat: &[Vec<f64>],
    actions: &[usize],
    advantages: &[f64],
    variant: PolicyLoss,
) -> f64 {
    let mut total = 0.0;
    for i in 0..pi_theta.len() {
        let a = actions[i];
        let adv = advantages[i];
        let ratio = pi_theta[i][a] / pi_hat[i][a];
        let objective = match variant {
            PolicyLoss::PpoClip { epsilon } => {
                let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
                (ratio * adv).min(clipped * adv)
            }
            PolicyLoss::PpoKl { beta } => {
                let mut kl = 0.0;
                for (t, p) in pi_hat[i].iter().zip(&pi_theta[i]) {
                    if *t > 0.0 {
                        kl += t * (t.max(LOG_FLOOR).ln() - p.max(LOG_FLOOR).ln());
                    }
                }
                ratio * adv - beta * kl
            }
            PolicyLoss::Cem => unreachable!("use loss_cem"),
        };
        total -= objective;
    }
    total / pi_theta.len().max(1) as f64
}

/// What follows the transition used in an advantage estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdvantageNext {
    /// The move ended the game with this reward.
    Terminal { reward: f64 },
    /// The game continues; value estimate of the successor state.
    Estimate { v_next: f64 },
}

/// Advantage of a transition given the current value estimates. The sign of
/// the successor term flips when the next decision belongs to the other
/// player, because value estimates are always from the mover's own
/// perspective.
pub fn advantage(v_state: f64, next: AdvantageNext, same_player: bool) -> f64 {
    match (next, same_player) {
        (AdvantageNext::Terminal { reward }, false) => -v_state - reward,
        (AdvantageNext::Estimate { v_next }, false) => -v_next - v_state,
        (AdvantageNext::Terminal { reward }, true) => -v_state + reward,
        (AdvantageNext::Estimate { v_next }, true) => v_next - v_state,
    }
}

/// dL/dlogits for one row under the chosen policy loss. `pi` is the current
/// masked policy for the row.
fn policy_dlogits(pi: &[f64], row: &TrainRow, kind: PolicyLoss) -> Vec<f64> {
    let mut d = vec![0.0; pi.len()];
    match kind {
        PolicyLoss::Cem => {
            for (i, dv) in d.iter_mut().enumerate() {
                if row.mask[i] {
                    *dv = pi[i] - row.target_pi[i];
                }
            }
        }
        PolicyLoss::PpoClip { epsilon } => {
            let a = row.action;
            let ratio = pi[a] / row.behavior_prob;
            let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
            let unclipped_min = ratio * row.advantage <= clipped * row.advantage;
            if unclipped_min {
                // d(-r*adv)/dlogit_b = -(adv/behavior) * pi_a (delta_ab - pi_b)
                let scale = -row.advantage / row.behavior_prob;
                for (b, dv) in d.iter_mut().enumerate() {
                    if row.mask[b] {
                        let delta = if b == a { 1.0 } else { 0.0 };
                        *dv = scale * pi[a] * (delta - pi[b]);
                    }
                }
            }
            // Clipped branch is constant in theta: zero gradient.
        }
        PolicyLoss::PpoKl { beta } => {
            let a = row.action;
            let scale = -row.advantage / row.behavior_prob;
            for (b, dv) in d.iter_mut().enumerate() {
                if row.mask[b] {
                    let delta = if b == a { 1.0 } else { 0.0 };
                    // ratio term plus beta * dKL/dlogit = beta (pi_b - t_b)
                    *dv = scale * pi[a] * (delta - pi[b]) + beta * (pi[b] - row.target_pi[b]);
                }
            }
        }
    }
    d
}

/// Loss value of one row without gradients, matching `policy_dlogits`.
fn policy_row_loss(pi: &[f64], row: &TrainRow, kind: PolicyLoss) -> f64 {
    match kind {
        PolicyLoss::Cem => {
            let mut l = 0.0;
            for (pa, ta) in pi.iter().zip(&row.target_pi) {
                if *ta > 0.0 {
                    l -= ta * pa.max(LOG_FLOOR).ln();
                }
            }
            l
        }
        PolicyLoss::PpoClip { epsilon } => {
            let ratio = pi[row.action] / row.behavior_prob;
            let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
            -(ratio * row.advantage).min(clipped * row.advantage)
        }
        PolicyLoss::PpoKl { beta } => {
            let ratio = pi[row.action] / row.behavior_prob;
            let mut kl = 0.0;
            for (t, p) in row.target_pi.iter().zip(pi) {
                if *t > 0.0 {
                    kl += t * (t.max(LOG_FLOOR).ln() - p.max(LOG_FLOOR).ln());
                }
            }
            -(ratio * row.advantage - beta * kl)
        }
    }
}

/// Mean policy loss over `rows` with its parameter gradient.
pub fn policy_batch_loss_and_grads(
    net: &PvNet,
    rows: &[&TrainRow],
    kind: PolicyLoss,
) -> Result<(f64, PvNet), NnError> {
    let mut grads = net.zeros_like();
    let mut total = 0.0;
    let scale = 1.0 / rows.len().max(1) as f64;
    for row in rows {
        let logits = net.policy_logits(&row.x);
        let pi = masked_softmax(&logits, &row.mask)?;
        total += policy_row_loss(&pi, row, kind);
        let mut dlogits = policy_dlogits(&pi, row, kind);
        for d in dlogits.iter_mut() {
            *d *= scale;
        }
        net.backward_policy(&row.x, &dlogits, &mut grads);
    }
    Ok((total * scale, grads))
}

/// Mean squared value error over `rows` with its parameter gradient.
pub fn value_batch_loss_and_grads(net: &PvNet, rows: &[&TrainRow]) -> (f64, PvNet) {
    let mut grads = net.zeros_like();
    let mut total = 0.0;
    let scale = 1.0 / rows.len().max(1) as f64;
    for row in rows {
        let raw = net.value_raw(&row.x);
        let v = raw.tanh();
        total += (v - row.z) * (v - row.z);
        let draw = 2.0 * (v - row.z) * (1.0 - v * v) * scale;
        net.backward_value(&row.x, draw, &mut grads);
    }
    (total * scale, grads)
}

// ---------------------------------------------------------------------------
// optimizer

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn for_net(net: &PvNet) -> AdamState {
        let n = net.param_count();
        AdamState {
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One Adam update of `net` from `grads` (same shape). Standard moments with
/// bias correction; the step counter increments even for zero gradients.
pub fn adam_step(net: &mut PvNet, grads: &PvNet, state: &mut AdamState, lr: f64) {
    let mut flat = Vec::with_capacity(state.m.len());
    grads.visit(&mut |g| flat.push(g));
    assert_eq!(flat.len(), state.m.len(), "gradient shape mismatch");
    state.t += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    let mut i = 0;
    net.visit_mut(&mut |p| {
        let g = flat[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        i += 1;
    });
}

// ---------------------------------------------------------------------------
// network sets

/// Construction-time description of a network set.
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub input_dim: usize,
    pub action_dim: usize,
    /// Trunk widths for the shared set (and the first player when split).
    pub trunk: Vec<usize>,
    /// Trunk widths for the second player when split.
    pub opponent_trunk: Vec<usize>,
    pub pv_wiring: PvWiring,
    pub player_wiring: PlayerWiring,
    pub seed: u64,
}

impl NetConfig {
    pub fn desk_scale(input_dim: usize, action_dim: usize) -> NetConfig {
        NetConfig {
            input_dim,
            action_dim,
            trunk: vec![128, 128],
            opponent_trunk: vec![128, 128],
            pv_wiring: PvWiring::SeparatePv,
            player_wiring: PlayerWiring::Shared,
            seed: 0,
        }
    }

    /// The reference large-scale shapes.
    pub fn reference_scale(input_dim: usize, action_dim: usize) -> NetConfig {
        NetConfig {
            input_dim,
            action_dim,
            trunk: vec![1024, 1024, 1024, 512],
            opponent_trunk: vec![256, 256, 256, 128],
            pv_wiring: PvWiring::SeparatePv,
            player_wiring: PlayerWiring::Shared,
            seed: 0,
        }
    }
}

/// Policy/value parameters in one of the four wiring configurations, plus
/// per-network Adam state.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSet {
    pub config: NetConfig,
    nets: Vec<PvNet>,
    adam: Vec<AdamState>,
}

impl NetworkSet {
    /// Deterministic initialization from `config.seed`.
    pub fn init(config: NetConfig) -> NetworkSet {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut nets = vec![PvNet::init(&config, &config.trunk, &mut rng)];
        if config.player_wiring == PlayerWiring::PerPlayer {
            nets.push(PvNet::init(&config, &config.opponent_trunk, &mut rng));
        }
        let adam = nets.iter().map(AdamState::for_net).collect();
        NetworkSet { config, nets, adam }
    }

    pub fn net_index(&self, player: Player) -> usize {
        match self.config.player_wiring {
            PlayerWiring::Shared => 0,
            PlayerWiring::PerPlayer => player.index(),
        }
    }

    pub fn net_for(&self, player: Player) -> &PvNet {
        &self.nets[self.net_index(player)]
    }

    pub fn nets(&self) -> &[PvNet] {
        &self.nets
    }

    pub(crate) fn nets_mut(&mut self) -> &mut Vec<PvNet> {
        &mut self.nets
    }

    pub fn policy(&self, player: Player, x: &[f64], mask: &[bool]) -> Result<Vec<f64>, NnError> {
        self.net_for(player).forward_policy(x, mask)
    }

    pub fn value(&self, player: Player, x: &[f64]) -> f64 {
        self.net_for(player).forward_value(x)
    }

    /// One gradient step on a mini-batch: rows are routed to their acting
    /// player's networks, each receiving the mean gradient over its own
    /// rows. Returns mean policy and value losses weighted by row counts.
    pub fn train_batch(
        &mut self,
        rows: &[TrainRow],
        kind: PolicyLoss,
        lr: f64,
    ) -> Result<(f64, f64), NnError> {
        let mut policy_loss = 0.0;
        let mut value_loss = 0.0;
        let net_count = self.nets.len();
        for idx in 0..net_count {
            let routed: Vec<&TrainRow> = rows
                .iter()
                .filter(|r| self.net_index(r.player) == idx)
                .collect();
            if routed.is_empty() {
                continue;
            }
            let weight = routed.len() as f64 / rows.len() as f64;
            let net = &self.nets[idx];
            let (pl, pgrads) = policy_batch_loss_and_grads(net, &routed, kind)?;
            let (vl, vgrads) = value_batch_loss_and_grads(net, &routed);
            policy_loss += pl * weight;
            value_loss += vl * weight;
            // Joint step: with shared heads both losses land in one trunk;
            // with separate stacks the gradients occupy disjoint blocks, so
            // one Adam step is equivalent to two independent ones.
            let mut combined = pgrads;
            let mut flat = Vec::with_capacity(net.param_count());
            vgrads.visit(&mut |g| flat.push(g));
            let mut i = 0;
            combined.visit_mut(&mut |g| {
                *g += flat[i];
                i += 1;
            });
            adam_step(&mut self.nets[idx], &combined, &mut self.adam[idx], lr);
        }
        Ok((policy_loss, value_loss))
    }
}
