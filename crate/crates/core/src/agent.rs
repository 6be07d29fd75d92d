//! DQN training and greedy evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::{write_frame_normalized, Action, Catch, Observation, VariantConfig};
use crate::nn::{
    self, GradientBuffer, NetworkParams, NnError, OptimizerState, RmsPropConfig, TrainableMask,
    ACTIONS, FRAMES, FRAME_LEN, OBS_LEN,
};
use crate::transfer::{Checkpoint, CheckpointError, InitSpec, Metadata};

/// Named sub-streams of a run's master seed.
///
/// A stream is selected with ChaCha's 64-bit stream id, so every consumer
/// gets an independent sequence from the same key.
pub mod streams {
    pub const ENV: u64 = 1;
    pub const EXPLORATION: u64 = 2;
    pub const REPLAY: u64 = 3;
    pub const EVAL: u64 = 4;
    pub const INIT: u64 = 5;
    pub const HEAD: u64 = 6;
}

/// Seed for a derived quantity, e.g. network init, of run `seed`.
pub fn derived_seed(seed: u64, stream: u64) -> u64 {
    stream_rng(seed, stream).gen()
}

/// Independent generator for `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One interaction step.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: Observation,
    pub a: usize,
    pub r: f32,
    pub s_next: Observation,
    pub done: bool,
}

const SLOT_FRAMES: usize = FRAMES + 1;
const SLOT_LEN: usize = SLOT_FRAMES * FRAME_LEN;

/// Fixed-capacity ring of transitions, sampled uniformly.
///
/// Consecutive observations share three frames, so each slot stores the
/// four frames of `s` followed by the newest frame of `s_next`.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    frames: Vec<u8>,
    actions: Vec<u8>,
    rewards: Vec<f32>,
    dones: Vec<bool>,
    cursor: usize,
    len: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            frames: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            dones: Vec::new(),
            cursor: 0,
            len: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Stores a transition, overwriting the oldest once full.
    ///
    /// # Panics
    ///
    /// If `s_next` is not `s` shifted by one frame.
    pub fn push(&mut self, t: &Transition) {
        assert!(
            t.s_next.frames()[..FRAMES - 1] == t.s.frames()[1..],
            "s_next must extend s by exactly one frame"
        );
        let frames = t
            .s
            .frames()
            .iter()
            .chain(std::iter::once(t.s_next.newest()))
            .flat_map(|f| f.pixels.iter().copied());
        if self.len < self.capacity {
            self.frames.extend(frames);
            self.actions.push(t.a as u8);
            self.rewards.push(t.r);
            self.dones.push(t.done);
            self.len += 1;
        } else {
            let slot = &mut self.frames[self.cursor * SLOT_LEN..(self.cursor + 1) * SLOT_LEN];
            for (dst, src) in slot.iter_mut().zip(frames) {
                *dst = src;
            }
            self.actions[self.cursor] = t.a as u8;
            self.rewards[self.cursor] = t.r;
            self.dones[self.cursor] = t.done;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Reconstructs the transition held in `slot`.
    pub fn get(&self, slot: usize) -> Transition {
        assert!(slot < self.len, "slot {slot} is not filled");
        let data = &self.frames[slot * SLOT_LEN..(slot + 1) * SLOT_LEN];
        let frame = |i: usize| {
            let mut f = crate::env::Frame::blank();
            f.pixels.copy_from_slice(&data[i * FRAME_LEN..(i + 1) * FRAME_LEN]);
            f
        };
        Transition {
            s: Observation::from_frames(std::array::from_fn(frame)),
            a: usize::from(self.actions[slot]),
            r: self.rewards[slot],
            s_next: Observation::from_frames(std::array::from_fn(|i| frame(i + 1))),
            done: self.dones[slot],
        }
    }

    /// Uniform sample of `batch` slot indices (with replacement).
    pub fn sample_indices(&self, batch: usize, rng: &mut impl Rng) -> Vec<usize> {
        assert!(!self.is_empty(), "sampling from an empty buffer");
        (0..batch).map(|_| rng.gen_range(0..self.len)).collect()
    }

    /// Normalised `s` and `s_next` tensors for the given slots.
    pub fn gather(&self, slots: &[usize]) -> Batch {
        let mut batch = Batch {
            s: vec![0.0; slots.len() * OBS_LEN],
            s_next: vec![0.0; slots.len() * OBS_LEN],
            actions: Vec::with_capacity(slots.len()),
            rewards: Vec::with_capacity(slots.len()),
            dones: Vec::with_capacity(slots.len()),
        };
        for (i, &slot) in slots.iter().enumerate() {
            let data = &self.frames[slot * SLOT_LEN..(slot + 1) * SLOT_LEN];
            write_frame_normalized(
                &data[..FRAMES * FRAME_LEN],
                &mut batch.s[i * OBS_LEN..(i + 1) * OBS_LEN],
            );
            write_frame_normalized(
                &data[FRAME_LEN..],
                &mut batch.s_next[i * OBS_LEN..(i + 1) * OBS_LEN],
            );
            batch.actions.push(usize::from(self.actions[slot]));
            batch.rewards.push(self.rewards[slot]);
            batch.dones.push(self.dones[slot]);
        }
        batch
    }
}

/// A sampled minibatch in network layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub s: Vec<f32>,
    pub s_next: Vec<f32>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f32>,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn from_transitions(transitions: &[Transition]) -> Self {
        let mut s = Vec::with_capacity(transitions.len() * OBS_LEN);
        let mut s_next = Vec::with_capacity(transitions.len() * OBS_LEN);
        for t in transitions {
            s.extend(t.s.to_normalized());
            s_next.extend(t.s_next.to_normalized());
        }
        Batch {
            s,
            s_next,
            actions: transitions.iter().map(|t| t.a).collect(),
            rewards: transitions.iter().map(|t| t.r).collect(),
            dones: transitions.iter().map(|t| t.done).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid training config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub gamma: f32,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_anneal_steps: u64,
    pub learn_start: usize,
    pub batch_size: usize,
    pub target_sync_every: u64,
    pub episodes_per_epoch: u32,
    pub eval_episodes: u32,
    pub num_epochs: u32,
    pub seed: u64,
    pub replay_capacity: usize,
    pub optimizer: RmsPropConfig,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f32>,
}

/// Optimizer used by [`TrainConfig::default`]. With `eps = 0.01` inside the
/// square root the update is dominated by `eps` for gradients of the size
/// this network sees, and training stalls; a small `eps` restores the
/// per-parameter scaling.
pub const DEFAULT_OPTIMIZER: RmsPropConfig = RmsPropConfig {
    lr: 0.001,
    rho: 0.95,
    eps: 1e-6,
};

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            eps_start: 1.0,
            eps_end: 0.1,
            eps_anneal_steps: 10_000,
            learn_start: 5_000,
            batch_size: 32,
            target_sync_every: 1_000,
            episodes_per_epoch: 200,
            eval_episodes: 200,
            num_epochs: 30,
            seed: 0,
            replay_capacity: 400_000,
            optimizer: DEFAULT_OPTIMIZER,
            grad_clip: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0 <= self.eps_end && self.eps_end <= self.eps_start && self.eps_start <= 1.0) {
            return bad("need 0 <= eps_end <= eps_start <= 1");
        }
        if self.eps_anneal_steps == 0
            || self.learn_start == 0
            || self.batch_size == 0
            || self.target_sync_every == 0
            || self.episodes_per_epoch == 0
            || self.eval_episodes == 0
            || self.replay_capacity == 0
        {
            return bad("all counts must be positive");
        }
        if self.learn_start > self.replay_capacity {
            return bad("learn_start exceeds replay capacity");
        }
        if !(self.optimizer.lr > 0.0 && self.optimizer.eps > 0.0)
            || !(0.0..1.0).contains(&self.optimizer.rho)
        {
            return bad("optimizer needs lr > 0, eps > 0, rho in [0, 1)");
        }
        if let Some(c) = self.grad_clip {
            if c.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                return bad("grad_clip must be positive");
            }
        }
        Ok(())
    }
}

/// Linear annealing from `eps_start` to `eps_end`, constant afterwards.
pub fn epsilon_at(t: u64, config: &TrainConfig) -> f64 {
    if t >= config.eps_anneal_steps {
        return config.eps_end;
    }
    let frac = t as f64 / config.eps_anneal_steps as f64;
    config.eps_start + frac * (config.eps_end - config.eps_start)
}

/// Epsilon-greedy over a precomputed Q-vector.
pub fn epsilon_greedy(q: &[f32], eps: f64, rng: &mut impl Rng) -> usize {
    if eps > 0.0 && rng.gen::<f64>() < eps {
        rng.gen_range(0..q.len())
    } else {
        nn::argmax(q)
    }
}

/// Epsilon-greedy action for one observation.
pub fn select_action(
    params: &NetworkParams,
    obs: &Observation,
    eps: f64,
    rng: &mut impl Rng,
) -> usize {
    if eps >= 1.0 {
        return rng.gen_range(0..ACTIONS);
    }
    if eps > 0.0 && rng.gen::<f64>() < eps {
        return rng.gen_range(0..ACTIONS);
    }
    nn::argmax(&nn::forward(params, &obs.to_normalized()))
}

/// `y = r` on terminal transitions, `r + gamma * max_a' Q(s', a'; target)` otherwise.
pub fn td_targets(batch: &Batch, target_params: &NetworkParams, gamma: f32) -> Vec<f32> {
    assert!(!batch.is_empty(), "empty batch");
    let needs_bootstrap = gamma != 0.0 && batch.dones.iter().any(|d| !d);
    let q_next = if needs_bootstrap {
        nn::forward(target_params, &batch.s_next)
    } else {
        Vec::new()
    };
    batch
        .rewards
        .iter()
        .zip(&batch.dones)
        .enumerate()
        .map(|(i, (&r, &done))| {
            if done || !needs_bootstrap {
                r
            } else {
                let row = &q_next[i * ACTIONS..(i + 1) * ACTIONS];
                r + gamma * row.iter().copied().fold(f32::NEG_INFINITY, f32::max)
            }
        })
        .collect()
}

/// One point of a learning curve, recorded after each epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRecord {
    pub epoch: u32,
    pub env_steps: u64,
    pub episodes: u64,
    pub eval_catch_rate: f64,
    pub eval_mean_return: f64,
    /// Mean training loss over the epoch's gradient steps; NaN if there were none.
    pub mean_loss: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LearningCurve {
    pub records: Vec<CurveRecord>,
}

impl LearningCurve {
    pub fn push(&mut self, record: CurveRecord) {
        if let Some(last) = self.records.last() {
            assert!(record.epoch > last.epoch, "epochs must increase");
        }
        assert!((0.0..=1.0).contains(&record.eval_catch_rate));
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn epochs(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.epoch).collect()
    }

    pub fn catch_rates(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.eval_catch_rate).collect()
    }

    pub fn mean_returns(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.eval_mean_return).collect()
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("initialisation failed: {0}")]
    Init(#[from] CheckpointError),
    #[error("non-finite loss {loss} at epoch {epoch}, env step {step}")]
    NonFiniteLoss { epoch: u32, step: u64, loss: f32 },
}

pub struct TrainOutcome {
    pub curve: LearningCurve,
    pub checkpoint: Checkpoint,
}

/// Progress counters handed to training observers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainCounters {
    pub env_steps: u64,
    pub episodes: u64,
    pub grad_steps: u64,
}

impl TrainCounters {
    /// Gradient steps taken by the time `env_steps` transitions were stored:
    /// one per step from the step that brings the buffer to `learn_start`.
    pub fn grad_steps_after(env_steps: u64, config: &TrainConfig) -> u64 {
        env_steps.saturating_sub(config.learn_start as u64 - 1)
    }
}

/// [`train_with_observer`] without an observer.
pub fn train(
    variant: &VariantConfig,
    config: &TrainConfig,
    init: &InitSpec,
) -> Result<TrainOutcome, TrainError> {
    train_with_observer(variant, config, init, |_, _| {})
}

/// Runs `num_epochs` epochs of DQN. `observer` sees every curve record as
/// it is produced.
pub fn train_with_observer(
    variant: &VariantConfig,
    config: &TrainConfig,
    init: &InitSpec,
    mut observer: impl FnMut(&CurveRecord, &TrainCounters),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let (mut params, mask) = init.materialize()?;
    let mut trainer = Trainer::new(variant, config, &params, mask);
    let mut curve = LearningCurve::default();
    let eval_seed = stream_rng(config.seed, streams::EVAL).gen::<u64>();

    for epoch in 1..=config.num_epochs {
        let mut loss_sum = 0.0f64;
        let mut loss_count = 0u64;
        for _ in 0..config.episodes_per_epoch {
            trainer.run_episode(&mut params, epoch, &mut loss_sum, &mut loss_count)?;
        }
        let eval = evaluate(&params, variant, config.eval_episodes, eval_seed);
        let record = CurveRecord {
            epoch,
            env_steps: trainer.counters.env_steps,
            episodes: trainer.counters.episodes,
            eval_catch_rate: eval.catch_rate,
            eval_mean_return: eval.mean_return,
            mean_loss: if loss_count > 0 {
                loss_sum / loss_count as f64
            } else {
                f64::NAN
            },
            epsilon: epsilon_at(trainer.counters.env_steps, config),
        };
        observer(&record, &trainer.counters);
        curve.push(record);
    }

    let mut metadata = Metadata::new()
        .with(Metadata::SOURCE_VARIANT, variant.variant_id)
        .with(Metadata::SEED, config.seed)
        .with(Metadata::ENV_STEPS, trainer.counters.env_steps)
        .with(Metadata::REGIME, init.regime().as_str());
    if let Some(src) = init.source_variant() {
        metadata.set("transferred_from", src);
    }
    Ok(TrainOutcome {
        curve,
        checkpoint: Checkpoint::new(&params, metadata),
    })
}

struct Trainer<'a> {
    variant: &'a VariantConfig,
    config: &'a TrainConfig,
    mask: TrainableMask,
    target: NetworkParams,
    optimizer: OptimizerState,
    replay: ReplayBuffer,
    env_rng: ChaCha8Rng,
    explore_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    counters: TrainCounters,
    obs_buf: Vec<f32>,
}

impl<'a> Trainer<'a> {
    fn new(
        variant: &'a VariantConfig,
        config: &'a TrainConfig,
        params: &NetworkParams,
        mask: TrainableMask,
    ) -> Self {
        Trainer {
            variant,
            config,
            mask,
            target: params.clone(),
            optimizer: OptimizerState::new(config.optimizer),
            replay: ReplayBuffer::new(config.replay_capacity),
            env_rng: stream_rng(config.seed, streams::ENV),
            explore_rng: stream_rng(config.seed, streams::EXPLORATION),
            replay_rng: stream_rng(config.seed, streams::REPLAY),
            counters: TrainCounters {
                env_steps: 0,
                episodes: 0,
                grad_steps: 0,
            },
            obs_buf: vec![0.0; OBS_LEN],
        }
    }

    fn act(&mut self, params: &NetworkParams, obs: &Observation) -> usize {
        let eps = epsilon_at(self.counters.env_steps, self.config);
        if eps > 0.0 && self.explore_rng.gen::<f64>() < eps {
            return self.explore_rng.gen_range(0..ACTIONS);
        }
        obs.write_normalized(&mut self.obs_buf);
        nn::argmax(&nn::forward(params, &self.obs_buf))
    }

    fn run_episode(
        &mut self,
        params: &mut NetworkParams,
        epoch: u32,
        loss_sum: &mut f64,
        loss_count: &mut u64,
    ) -> Result<(), TrainError> {
        let mut game = Catch::new(*self.variant, self.env_rng.gen());
        while !game.is_terminal() {
            let s = game.observation().clone();
            let a = self.act(params, &s);
            let step = game.step(Action::from_index(a));
            self.counters.env_steps += 1;
            self.replay.push(&Transition {
                s,
                a,
                r: step.reward,
                s_next: game.observation().clone(),
                done: step.terminal,
            });
            if self.replay.len() >= self.config.learn_start {
                let loss = self.gradient_step(params).map_err(|e| match e {
                    NnError::NonFiniteLoss { loss } => TrainError::NonFiniteLoss {
                        epoch,
                        step: self.counters.env_steps,
                        loss,
                    },
                    other => panic!("unexpected network error: {other}"),
                })?;
                *loss_sum += f64::from(loss);
                *loss_count += 1;
            }
        }
        self.counters.episodes += 1;
        Ok(())
    }

    fn gradient_step(&mut self, params: &mut NetworkParams) -> Result<f32, NnError> {
        let slots = self
            .replay
            .sample_indices(self.config.batch_size, &mut self.replay_rng);
        let batch = self.replay.gather(&slots);
        let targets = td_targets(&batch, &self.target, self.config.gamma);
        let (loss, mut grads): (f32, GradientBuffer) =
            nn::backward_masked(params, &batch.s, &batch.actions, &targets, &self.mask)?;
        if let Some(clip) = self.config.grad_clip {
            grads.clip_norm(clip);
        }
        nn::rmsprop_step(params, &grads, &mut self.optimizer, &self.mask);
        self.counters.grad_steps += 1;
        if self.counters.grad_steps % self.config.target_sync_every == 0 {
            self.target.clone_from(params);
        }
        Ok(loss)
    }
}

/// Greedy evaluation summary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalResult {
    /// Balls caught over balls dropped.
    pub catch_rate: f64,
    /// Mean episode return.
    pub mean_return: f64,
    pub balls: u64,
    pub caught: u64,
}

/// Seed of evaluation episode `index` under `seed`.
pub fn eval_episode_seed(seed: u64, index: u32) -> u64 {
    let mut rng = stream_rng(seed, u64::from(index));
    rng.gen()
}

/// Runs `n_episodes` games in lockstep; `policy` picks an action for every
/// game still running.
pub fn evaluate_with(
    variant: &VariantConfig,
    n_episodes: u32,
    seed: u64,
    mut policy: impl FnMut(&[&Catch]) -> Vec<Action>,
) -> EvalResult {
    assert!(n_episodes >= 1, "need at least one episode");
    let mut games: Vec<Catch> = (0..n_episodes)
        .map(|i| Catch::new(*variant, eval_episode_seed(seed, i)))
        .collect();
    let mut total_return = 0.0f64;
    let (mut balls, mut caught) = (0u64, 0u64);
    loop {
        let live: Vec<usize> = (0..games.len()).filter(|&i| !games[i].is_terminal()).collect();
        if live.is_empty() {
            break;
        }
        let views: Vec<&Catch> = live.iter().map(|&i| &games[i]).collect();
        let actions = policy(&views);
        assert_eq!(actions.len(), live.len(), "one action per live game");
        for (&i, a) in live.iter().zip(actions) {
            let step = games[i].step(a);
            total_return += f64::from(step.reward);
            if let Some(c) = step.resolved {
                balls += 1;
                caught += u64::from(c);
            }
        }
    }
    EvalResult {
        catch_rate: caught as f64 / balls as f64,
        mean_return: total_return / f64::from(n_episodes),
        balls,
        caught,
    }
}

/// Fully greedy evaluation of a network.
pub fn evaluate(
    params: &NetworkParams,
    variant: &VariantConfig,
    n_episodes: u32,
    seed: u64,
) -> EvalResult {
    let mut input = Vec::new();
    evaluate_with(variant, n_episodes, seed, |games| {
        input.resize(games.len() * OBS_LEN, 0.0);
        for (g, dst) in games.iter().zip(input.chunks_exact_mut(OBS_LEN)) {
            g.observation().write_normalized(dst);
        }
        nn::forward(params, &input)
            .chunks_exact(ACTIONS)
            .map(|q| Action::from_index(nn::argmax(q)))
            .collect()
    })
}

/// Evaluation of the closed-form oracle policy.
pub fn evaluate_oracle(variant: &VariantConfig, n_episodes: u32, seed: u64) -> EvalResult {
    evaluate_with(variant, n_episodes, seed, |games| {
        games
            .iter()
            .map(|g| crate::env::oracle_policy(g.state(), g.variant()))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Frame, VariantId};

    fn obs_with(value: u8) -> Observation {
        let mut f = Frame::blank();
        f.pixels[0] = value;
        Observation::filled(&f)
    }

    fn transition(tag: u8) -> Transition {
        let s = obs_with(tag);
        let mut next = Frame::blank();
        next.pixels[1] = tag;
        let s_next = s.pushed(next);
        Transition {
            s,
            a: usize::from(tag % 3),
            r: f32::from(tag % 2),
            s_next,
            done: tag % 2 == 1,
        }
    }

    #[test]
    fn epsilon_schedule() {
        let c = TrainConfig {
            eps_anneal_steps: 50_000,
            ..TrainConfig::default()
        };
        assert_eq!(epsilon_at(0, &c), 1.0);
        assert!((epsilon_at(25_000, &c) - 0.55).abs() < 1e-12);
        assert_eq!(epsilon_at(50_000, &c), 0.1);
        assert_eq!(epsilon_at(1_000_000, &c), 0.1);
    }

    #[test]
    fn greedy_and_tie_break() {
        let mut rng = stream_rng(0, 0);
        assert_eq!(epsilon_greedy(&[0.1, 0.9, 0.2], 0.0, &mut rng), 1);
        assert_eq!(epsilon_greedy(&[0.5, 0.5, 0.1], 0.0, &mut rng), 0);
    }

    #[test]
    fn uniform_exploration_frequencies() {
        let mut rng = stream_rng(1, 0);
        let params = NetworkParams::zeros();
        let obs = obs_with(0);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[select_action(&params, &obs, 1.0, &mut rng)] += 1;
        }
        // chi-square with 2 dof, 99.9% quantile 13.8
        let expected = n as f64 / 3.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 13.8, "{counts:?} chi2={chi2}");
    }

    #[test]
    fn td_target_arithmetic() {
        let t = transition(1);
        assert!(t.done);
        let batch = Batch::from_transitions(&[t]);
        assert_eq!(td_targets(&batch, &NetworkParams::zeros(), 0.99), vec![1.0]);

        // non-terminal with target max Q = 0.8 via the head bias
        let mut params = NetworkParams::zeros();
        params.get_mut(nn::TensorId::HeadBias).copy_from_slice(&[0.1, 0.8, -0.3]);
        let t = transition(2);
        assert!(!t.done && t.r == 0.0);
        let batch = Batch::from_transitions(&[t.clone()]);
        let y = td_targets(&batch, &params, 0.99);
        assert!((y[0] - 0.792).abs() < 1e-6);
        assert_eq!(td_targets(&batch, &params, 0.0), vec![0.0]);
    }

    #[test]
    fn replay_ring_overwrites_oldest() {
        let mut buf = ReplayBuffer::new(4);
        for tag in 0..6u8 {
            buf.push(&transition(tag));
        }
        assert_eq!(buf.len(), 4);
        let held: Vec<Transition> = (0..4).map(|i| buf.get(i)).collect();
        for tag in 0..2u8 {
            assert!(!held.contains(&transition(tag)));
        }
        for tag in 2..6u8 {
            assert!(held.contains(&transition(tag)));
        }
        let mut rng = stream_rng(0, 0);
        assert!(buf.sample_indices(100, &mut rng).iter().all(|&i| i < 4));
    }

    #[test]
    fn gather_matches_transitions() {
        let mut buf = ReplayBuffer::new(8);
        let ts: Vec<Transition> = (0..5u8).map(transition).collect();
        ts.iter().for_each(|t| buf.push(t));
        let got = buf.gather(&[3, 0]);
        let want = Batch::from_transitions(&[ts[3].clone(), ts[0].clone()]);
        assert_eq!(got, want);
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let cfg = TrainConfig {
            num_epochs: 0,
            ..TrainConfig::default()
        };
        let out = train(&VariantId::V0.config(), &cfg, &InitSpec::Scratch { seed: 3 }).unwrap();
        assert!(out.curve.is_empty());
        assert!(out.checkpoint.params().unwrap().bits_eq(&nn::init_params(3)));
    }

    #[test]
    fn oracle_evaluation_is_perfect() {
        for id in VariantId::ALL {
            let r = evaluate_oracle(&id.config(), 20, 5);
            assert_eq!(r.catch_rate, 1.0, "{id}");
            assert_eq!(r.mean_return, 1.0, "{id}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            eps_end: 0.5,
            eps_start: 0.2,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
