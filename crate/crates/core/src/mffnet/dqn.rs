//! Learned controller: a Q-network over the concatenated mean features of
//! the agents' buffers, with one output per joint strategy assignment.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MffError, PeriodBuffers};
use crate::features::SceneDataset;
use crate::ffagent::{
    read_checkpoint, write_checkpoint, AgentCursor, AgentError, Checkpoint, CheckpointKind,
    DqnLearner, Experience, Mlp, PolicyBank, Strategy, TrainConfig,
};

/// Largest view count with an enumerable joint action space (3^6 = 729).
pub const MAX_DQN_VIEWS: usize = 6;

fn action_count(n: usize) -> usize {
    3usize.pow(n as u32)
}

/// Joint action index: base-3 digits of strategy codes, agent 0 least
/// significant.
pub fn encode_action(strategies: &[Strategy]) -> usize {
    strategies.iter().rev().fold(0, |acc, s| acc * 3 + s.code() as usize)
}

pub fn decode_action(index: usize, num_views: usize) -> Result<Vec<Strategy>, MffError> {
    if num_views > MAX_DQN_VIEWS {
        return Err(MffError::TooManyViews(num_views, MAX_DQN_VIEWS));
    }
    if index >= action_count(num_views) {
        return Err(MffError::Config(format!("action {index} out of range for {num_views} views")));
    }
    let mut rest = index;
    Ok((0..num_views)
        .map(|_| {
            let s = Strategy::from_code((rest % 3) as u8).unwrap();
            rest /= 3;
            s
        })
        .collect())
}

/// Per-view mean feature, concatenated; empty buffers contribute zeros.
pub fn dqn_state(buffers: &PeriodBuffers, dim: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; buffers.num_views() * dim];
    for (n, b) in buffers.buffers().iter().enumerate() {
        if b.is_empty() {
            continue;
        }
        let seg = &mut out[n * dim..(n + 1) * dim];
        let mut acc = vec![0.0f64; dim];
        for f in b {
            for (a, &x) in acc.iter_mut().zip(&f.feature) {
                *a += x as f64;
            }
        }
        for (o, a) in seg.iter_mut().zip(acc) {
            *o = (a / b.len() as f64) as f32;
        }
    }
    out
}

/// Replaces every set position by a peak-1 Gaussian bump of width
/// `window`; overlapping bumps combine by maximum.
pub fn gaussian_smooth(y: &[bool], sigma: f64, window: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; y.len()];
    for (i, _) in y.iter().enumerate().filter(|(_, &b)| b) {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(y.len().saturating_sub(1));
        for (t, o) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let d = t as f64 - i as f64;
            *o = o.max((-d * d / (2.0 * sigma * sigma)).exp());
        }
    }
    out
}

/// Controller reward for one period: smoothed agreement of each agent's
/// selections with its own labels, plus `alpha_red` times the smoothed
/// global truth mass over the number of selected frames (0 when nothing
/// was selected).
pub fn dqn_reward(
    selected: &[Vec<bool>],
    truth: &[Vec<bool>],
    global: &[bool],
    alpha_red: f64,
    sigma: f64,
    window: usize,
) -> Result<f64, MffError> {
    if selected.len() != truth.len() {
        return Err(MffError::LengthMismatch(format!("{} selections for {} label vectors", selected.len(), truth.len())));
    }
    let t = global.len();
    if let Some(v) = selected.iter().chain(truth).find(|v| v.len() != t) {
        return Err(MffError::LengthMismatch(format!("vector of length {} against period length {t}", v.len())));
    }
    let mut first = 0.0;
    for (s, y) in selected.iter().zip(truth) {
        let gs = gaussian_smooth(s, sigma, window);
        let gy = gaussian_smooth(y, sigma, window);
        first += gs.iter().zip(&gy).map(|(a, b)| a * b).sum::<f64>();
    }
    let picked: usize = selected.iter().map(|s| s.iter().filter(|&&b| b).count()).sum();
    let second = if picked == 0 || alpha_red == 0.0 {
        0.0
    } else {
        alpha_red * gaussian_smooth(global, sigma, window).iter().sum::<f64>() / picked as f64
    };
    Ok(first + second)
}

/// Q-network choosing a joint strategy assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct DqnControllerPolicy {
    net: Mlp,
    num_views: usize,
}

impl DqnControllerPolicy {
    pub fn new(net: Mlp) -> Result<Self, MffError> {
        let out = net.output_dim();
        let num_views = (1..=MAX_DQN_VIEWS)
            .find(|&n| action_count(n) == out)
            .ok_or_else(|| MffError::Config(format!("output width {out} is not 3^N for N <= {MAX_DQN_VIEWS}")))?;
        if !net.input_dim().is_multiple_of(num_views) {
            return Err(MffError::Config(format!(
                "input width {} is not a multiple of {num_views} views",
                net.input_dim()
            )));
        }
        Ok(Self { net, num_views })
    }

    pub fn num_views(&self) -> usize {
        self.num_views
    }

    pub fn feature_dim(&self) -> usize {
        self.net.input_dim() / self.num_views
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn check(&self, num_views: usize, dim: usize) -> Result<(), MffError> {
        if num_views != self.num_views || dim != self.feature_dim() {
            return Err(MffError::Config(format!(
                "controller expects {} views of dimension {}, got {num_views} of {dim}",
                self.num_views,
                self.feature_dim()
            )));
        }
        Ok(())
    }

    pub fn q_values(&self, state: &[f32]) -> Vec<f32> {
        self.net.forward(state)
    }

    /// Greedy joint assignment; ties go to the smallest action index.
    pub fn act(&self, state: &[f32]) -> Vec<Strategy> {
        let q = self.q_values(state);
        let mut best = 0;
        for (i, &v) in q.iter().enumerate() {
            if v > q[best] {
                best = i;
            }
        }
        decode_action(best, self.num_views).expect("output width checked at construction")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MffError> {
        let ckpt = Checkpoint { kind: CheckpointKind::Controller, net: self.net.clone() };
        Ok(write_checkpoint(path, &ckpt)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MffError> {
        let ckpt = read_checkpoint(path)?;
        if ckpt.kind != CheckpointKind::Controller {
            return Err(AgentError::BadCheckpoint(format!("expected a controller checkpoint, found {:?}", ckpt.kind)).into());
        }
        Self::new(ckpt.net)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerTrainConfig {
    pub train: TrainConfig,
    /// Weight of the redundancy term of the reward.
    pub alpha_red: f64,
    pub gamma: f64,
    pub period: usize,
    pub g_sigma: f64,
    pub g_window: usize,
}

impl Default for ControllerTrainConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig { episodes: 200, max_steps: 50, ..TrainConfig::default() },
            alpha_red: 0.0,
            gamma: 0.8,
            period: 100,
            g_sigma: 1.0,
            g_window: 4,
        }
    }
}

struct Stored {
    state: Vec<f32>,
    action: usize,
    reward: f32,
    next: Option<Vec<f32>>,
}

/// Runs one period for all agents from their cursors and returns the
/// selections.
fn step_period(
    dataset: &SceneDataset,
    policies: &dyn PolicyBank,
    cursors: &mut [AgentCursor],
    strategies: &[Strategy],
    end: usize,
) -> Vec<Vec<usize>> {
    cursors
        .iter_mut()
        .zip(strategies)
        .enumerate()
        .map(|(n, (c, &s))| c.advance(policies.policy(s), dataset.view(n), end))
        .collect()
}

fn indicator(frames: &[usize], start: usize, end: usize) -> Vec<bool> {
    let mut v = vec![false; end - start];
    for &f in frames {
        v[f - start] = true;
    }
    v
}

/// Trains the joint-strategy controller. Each episode starts at a random
/// period, primes the state with one all-Normal period, then lets the
/// epsilon-greedy controller pick the strategies for up to `max_steps`
/// periods. Deterministic for a fixed seed.
pub fn train_dqn_controller(
    dataset: &SceneDataset,
    policies: &dyn PolicyBank,
    cfg: &ControllerTrainConfig,
) -> Result<DqnControllerPolicy, MffError> {
    let n = dataset.num_views();
    if n > MAX_DQN_VIEWS {
        return Err(MffError::TooManyViews(n, MAX_DQN_VIEWS));
    }
    if n == 0 || dataset.is_empty() {
        return Err(MffError::Config("empty dataset".into()));
    }
    if cfg.period == 0 {
        return Err(MffError::Config("period must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.gamma) {
        return Err(MffError::Config(format!("gamma {} outside [0, 1]", cfg.gamma)));
    }
    cfg.train.validate()?;
    policies.check_dim(dataset.dim())?;

    let tc = &cfg.train;
    let dim = dataset.dim();
    let actions = action_count(n);
    let periods = dataset.len().div_ceil(cfg.period);
    if periods < 2 {
        return Err(MffError::Config("need at least two periods to train".into()));
    }
    let bounds = |p: usize| (p * cfg.period, ((p + 1) * cfg.period).min(dataset.len()));
    let labels: Vec<Vec<bool>> = dataset.views().iter().map(|v| v.labels()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let net = Mlp::new(&[n * dim, tc.hidden[0], tc.hidden[1], actions], &mut rng);
    let mut learner = DqnLearner::new(net, tc.learning_rate, cfg.gamma as f32, tc.target_sync);
    let mut replay: Vec<Stored> = Vec::with_capacity(tc.replay_capacity.min(4096));
    let mut write = 0usize;

    for episode in 0..tc.episodes {
        let eps = tc.epsilon(episode);
        let mut p = rng.random_range(0..periods - 1);
        let (start, end) = bounds(p);
        let mut cursors = vec![AgentCursor::at(start); n];
        let sel = step_period(dataset, policies, &mut cursors, &vec![Strategy::Normal; n], end);
        let mut state = dqn_state(&PeriodBuffers::from_selections(dataset, &sel, start, end)?, dim);

        for _ in 0..tc.max_steps {
            p += 1;
            if p >= periods {
                break;
            }
            let action = if rng.random::<f64>() < eps {
                rng.random_range(0..actions)
            } else {
                let q = learner.online().forward(&state);
                let mut best = 0;
                for (i, &v) in q.iter().enumerate() {
                    if v > q[best] {
                        best = i;
                    }
                }
                best
            };
            let strategies = decode_action(action, n)?;
            let (start, end) = bounds(p);
            let sel = step_period(dataset, policies, &mut cursors, &strategies, end);
            let picked: Vec<Vec<bool>> = sel.iter().map(|s| indicator(s, start, end)).collect();
            let truth: Vec<Vec<bool>> = labels.iter().map(|l| l[start..end].to_vec()).collect();
            let reward = dqn_reward(
                &picked,
                &truth,
                &dataset.global_truth()[start..end],
                cfg.alpha_red,
                cfg.g_sigma,
                cfg.g_window,
            )?;
            let next = dqn_state(&PeriodBuffers::from_selections(dataset, &sel, start, end)?, dim);
            let terminal = p + 1 >= periods;
            let item = Stored {
                state: std::mem::replace(&mut state, next.clone()),
                action,
                reward: reward as f32,
                next: (!terminal).then_some(next),
            };
            if replay.len() < tc.replay_capacity {
                replay.push(item);
            } else {
                replay[write] = item;
            }
            write = (write + 1) % tc.replay_capacity;

            if replay.len() >= tc.batch_size {
                let batch: Vec<Experience<'_>> = (0..tc.batch_size)
                    .map(|_| {
                        let s = &replay[rng.random_range(0..replay.len())];
                        Experience {
                            state: &s.state,
                            action: s.action,
                            reward: s.reward,
                            next_state: s.next.as_deref(),
                        }
                    })
                    .collect();
                learner.learn(&batch);
            }
        }
    }
    DqnControllerPolicy::new(learner.into_net())
}
