//! Deep Q-learning with experience replay and a periodically synced target
//! network.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{Adam, Mlp};
use super::policy::argmax;
use super::reward::{step_reward, RewardParams};
use super::{AgentError, PolicySet, QPolicy, Strategy};
use crate::features::ViewStream;

#[derive(Debug, Clone, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Decisions per episode before it is cut off.
    pub max_steps: usize,
    pub learning_rate: f32,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of episodes over which epsilon decays linearly.
    pub eps_decay_fraction: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Gradient updates between target-network syncs.
    pub target_sync: usize,
    pub hidden: [usize; 2],
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 600,
            max_steps: 150,
            learning_rate: 5e-4,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_fraction: 0.8,
            replay_capacity: 10_000,
            batch_size: 32,
            target_sync: 250,
            hidden: [128, 64],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn epsilon(&self, episode: usize) -> f64 {
        let horizon = (self.episodes as f64 * self.eps_decay_fraction).max(1.0);
        let frac = (episode as f64 / horizon).min(1.0);
        self.eps_start + (self.eps_end - self.eps_start) * frac
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |field, reason: &str| {
            Err(AgentError::InvalidParam { field, reason: reason.to_string() })
        };
        for (field, eps) in [("eps_start", self.eps_start), ("eps_end", self.eps_end)] {
            if !(0.0..=1.0).contains(&eps) {
                return bad(field, "must lie in [0, 1]");
            }
        }
        if !(0.0..=1.0).contains(&self.eps_decay_fraction) {
            return bad("eps_decay_fraction", "must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate", "must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if self.replay_capacity < self.batch_size {
            return bad("replay_capacity", "must hold at least one batch");
        }
        if self.target_sync == 0 {
            return bad("target_sync", "must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden", "layer widths must be positive");
        }
        Ok(())
    }
}

/// One transition. `action` is the output index; `next_state` is `None` for
/// terminal transitions.
#[derive(Debug, Clone, Copy)]
pub struct Experience<'a> {
    pub state: &'a [f32],
    pub action: usize,
    pub reward: f32,
    pub next_state: Option<&'a [f32]>,
}

/// Online/target network pair fitted towards `r + gamma * max_a' Q_target(s', a')`.
#[derive(Debug, Clone)]
pub struct DqnLearner {
    online: Mlp,
    target: Mlp,
    adam: Adam,
    gamma: f32,
    target_sync: usize,
    updates: usize,
}

impl DqnLearner {
    pub fn new(net: Mlp, learning_rate: f32, gamma: f32, target_sync: usize) -> Self {
        let adam = Adam::new(&net, learning_rate);
        Self { target: net.clone(), online: net, adam, gamma, target_sync: target_sync.max(1), updates: 0 }
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn into_net(self) -> Mlp {
        self.online
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// One gradient step on the batch; returns the pre-update loss.
    pub fn learn(&mut self, batch: &[Experience<'_>]) -> f32 {
        if batch.is_empty() {
            return 0.0;
        }
        let dim = self.online.input_dim();
        let mut states = Array2::<f32>::zeros((batch.len(), dim));
        for (mut row, e) in states.rows_mut().into_iter().zip(batch) {
            row.assign(&ndarray::ArrayView1::from(e.state));
        }

        let bootstrap: Vec<usize> =
            (0..batch.len()).filter(|&i| batch[i].next_state.is_some()).collect();
        let mut next_values = vec![0.0f32; batch.len()];
        if !bootstrap.is_empty() && self.gamma > 0.0 {
            let mut next = Array2::<f32>::zeros((bootstrap.len(), dim));
            for (mut row, &i) in next.rows_mut().into_iter().zip(&bootstrap) {
                row.assign(&ndarray::ArrayView1::from(batch[i].next_state.unwrap()));
            }
            let q = self.target.forward_batch(next.view());
            for (row, &i) in q.rows().into_iter().zip(&bootstrap) {
                next_values[i] = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            }
        }

        let actions: Vec<usize> = batch.iter().map(|e| e.action).collect();
        let targets: Vec<f32> = batch
            .iter()
            .zip(&next_values)
            .map(|(e, v)| e.reward + self.gamma * v)
            .collect();
        let (loss, grads) = self.online.mse_gradients(states.view(), &actions, &targets);
        self.adam.apply(&mut self.online, grads);
        self.updates += 1;
        if self.updates.is_multiple_of(self.target_sync) {
            self.target = self.online.clone();
        }
        loss
    }
}

#[derive(Debug, Clone, Copy)]
struct Transition {
    stream: u32,
    frame: u32,
    action: u16,
    reward: f32,
    next: u32,
}

/// Fixed-capacity ring buffer of transitions, stored as frame indices.
struct Replay {
    items: Vec<Transition>,
    capacity: usize,
    write: usize,
}

impl Replay {
    fn new(capacity: usize) -> Self {
        Self { items: Vec::with_capacity(capacity), capacity, write: 0 }
    }

    fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.write] = t;
        }
        self.write = (self.write + 1) % self.capacity;
    }

    fn len(&self) -> usize {
        self.items.len()
    }
}

/// Trains a pace-specific skip policy on `streams`.
///
/// Each episode starts at a random frame of a random stream and follows an
/// epsilon-greedy policy for at most `max_steps` decisions. Deterministic for
/// a fixed `cfg.seed`.
pub fn train(
    streams: &[ViewStream],
    strategy: Strategy,
    params: &RewardParams,
    cfg: &TrainConfig,
) -> Result<QPolicy, AgentError> {
    params.validate()?;
    cfg.validate()?;
    let first = streams
        .iter()
        .find(|s| !s.is_empty())
        .ok_or(AgentError::NoStreams)?;
    let dim = first.feature(0).len();
    for s in streams {
        if let Some(f) = s.frames.iter().find(|f| f.feature.len() != dim) {
            return Err(AgentError::DimensionMismatch { expected: dim, got: f.feature.len() });
        }
    }
    let labels: Vec<Vec<bool>> = streams.iter().map(|s| s.labels()).collect();
    for (s, l) in streams.iter().zip(&labels) {
        let important = l.iter().filter(|&&b| b).count();
        if important == 0 || important == l.len() {
            log::warn!(
                "training stream {} is degenerate ({important} of {} frames important)",
                s.view_id,
                l.len()
            );
        }
    }

    let actions = strategy.action_space();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let net = Mlp::new(&[dim, cfg.hidden[0], cfg.hidden[1], actions], &mut rng);
    let mut learner = DqnLearner::new(net, cfg.learning_rate, params.gamma as f32, cfg.target_sync);
    let mut replay = Replay::new(cfg.replay_capacity);
    let mut batch_idx = vec![0usize; cfg.batch_size];

    for episode in 0..cfg.episodes {
        let eps = cfg.epsilon(episode);
        let si = rng.random_range(0..streams.len());
        let stream = &streams[si];
        if stream.len() < 2 {
            continue;
        }
        let mut k = rng.random_range(0..stream.len() - 1);
        for _ in 0..cfg.max_steps {
            let action = if rng.random::<f64>() < eps {
                rng.random_range(1..=actions)
            } else {
                argmax(&learner.online().forward(stream.feature(k))) + 1
            };
            let Some(reward) = step_reward(&labels[si], k, action, strategy, params)? else {
                break;
            };
            let next = k + action + 1;
            replay.push(Transition {
                stream: si as u32,
                frame: k as u32,
                action: action as u16,
                reward: reward as f32,
                next: next as u32,
            });
            if replay.len() >= cfg.batch_size {
                for slot in batch_idx.iter_mut() {
                    *slot = rng.random_range(0..replay.len());
                }
                let batch: Vec<Experience<'_>> = batch_idx
                    .iter()
                    .map(|&i| {
                        let t = replay.items[i];
                        let s = &streams[t.stream as usize];
                        Experience {
                            state: s.feature(t.frame as usize),
                            action: t.action as usize - 1,
                            reward: t.reward,
                            next_state: Some(s.feature(t.next as usize)),
                        }
                    })
                    .collect();
                learner.learn(&batch);
            }
            k = next;
        }
    }
    QPolicy::new(strategy, learner.into_net())
}

/// Trains all three paces on the same streams with the default rewards.
pub fn train_policy_set(streams: &[ViewStream], cfg: &TrainConfig) -> Result<PolicySet, AgentError> {
    let one = |s: Strategy| train(streams, s, &RewardParams::for_strategy(s), cfg);
    PolicySet::new(one(Strategy::Slow)?, one(Strategy::Normal)?, one(Strategy::Fast)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FrameRecord;

    #[test]
    fn epsilon_schedule_is_linear_then_flat() {
        let cfg = TrainConfig { episodes: 100, ..TrainConfig::default() };
        assert_eq!(cfg.epsilon(0), 1.0);
        assert!((cfg.epsilon(40) - (1.0 - 0.95 * 0.5)).abs() < 1e-12);
        assert!((cfg.epsilon(80) - 0.05).abs() < 1e-12);
        assert!((cfg.epsilon(99) - 0.05).abs() < 1e-12);
        for e in 0..100 {
            assert!((0.0..=1.0).contains(&cfg.epsilon(e)));
        }
    }

    #[test]
    fn gamma_zero_converges_to_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[4, 16, 16, 5], &mut rng);
        let mut learner = DqnLearner::new(net, 1e-2, 0.0, 10);
        let state = [0.5f32, -1.0, 0.25, 2.0];
        let next = [1.0f32; 4];
        let e = Experience { state: &state, action: 2, reward: 0.75, next_state: Some(&next) };
        for _ in 0..2000 {
            learner.learn(&[e]);
        }
        let q = learner.online().forward(&state)[2];
        assert!((q - 0.75).powi(2) < 1e-3, "q = {q}");
    }

    #[test]
    fn rejects_empty_stream_set() {
        let p = RewardParams::for_strategy(Strategy::Normal);
        assert!(matches!(
            train(&[], Strategy::Normal, &p, &TrainConfig::default()),
            Err(AgentError::NoStreams)
        ));
    }

    #[test]
    fn degenerate_stream_still_trains() {
        let frames = (0..60).map(|t| FrameRecord { feature: vec![t as f32 / 60.0], important: false }).collect();
        let s = ViewStream::new(0, frames);
        let cfg = TrainConfig { episodes: 3, max_steps: 10, hidden: [4, 4], batch_size: 4, ..TrainConfig::default() };
        let policy = train(&[s], Strategy::Slow, &RewardParams::for_strategy(Strategy::Slow), &cfg).unwrap();
        assert_eq!(policy.net().output_dim(), 15);
    }
}
