//! Per-step rewards: the skip penalty over the skipped interval, the hit
//! reward at the landing frame, and the pace-specific shaping multipliers.

use super::{AgentError, Strategy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    /// Weight of the reward for skipping unimportant frames, in [0, 1].
    pub beta: f64,
    /// Half-width (frames) of the hit window around the landing frame.
    pub hit_window: usize,
    /// Width (frames) of the Gaussian that spreads each label over the window.
    pub hit_sigma: f64,
    /// Discount factor, in [0, 1].
    pub gamma: f64,
    /// Largest skippable frame count; equals the strategy's action-space size.
    pub t_skip: usize,
}

impl RewardParams {
    pub fn for_strategy(strategy: Strategy) -> Self {
        Self { beta: 0.8, hit_window: 4, hit_sigma: 1.0, gamma: 0.8, t_skip: strategy.action_space() }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |field, reason: &str| {
            Err(AgentError::InvalidParam { field, reason: reason.to_string() })
        };
        if !(0.0..=1.0).contains(&self.beta) {
            return bad("beta", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1]");
        }
        if self.hit_window < 1 {
            return bad("hit_window", "must be at least 1");
        }
        if !(self.hit_sigma > 0.0) {
            return bad("hit_sigma", "must be positive");
        }
        if self.t_skip < 1 {
            return bad("t_skip", "must be at least 1");
        }
        Ok(())
    }
}

/// `SP = #important / T - beta * #unimportant / T` over the skipped interval.
pub fn skip_penalty(interval: &[bool], beta: f64, t_skip: usize) -> Result<f64, AgentError> {
    if interval.is_empty() {
        return Err(AgentError::EmptyInterval);
    }
    if interval.len() > t_skip {
        return Err(AgentError::IntervalTooLong { len: interval.len(), t_skip });
    }
    let important = interval.iter().filter(|&&l| l).count() as f64;
    let unimportant = interval.len() as f64 - important;
    let t = t_skip as f64;
    Ok(important / t - beta * unimportant / t)
}

/// Sum of peak-1 Gaussians centred on the important frames within `window`
/// of the landing index `z`. The window is clipped at the stream edges.
pub fn hit_reward(z: usize, labels: &[bool], window: usize, sigma: f64) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let lo = z.saturating_sub(window);
    let hi = (z + window).min(labels.len() - 1);
    let denom = 2.0 * sigma * sigma;
    (lo..=hi)
        .filter(|&i| labels[i])
        .map(|i| {
            let d = i as f64 - z as f64;
            (-d * d / denom).exp()
        })
        .sum()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Applies the pace-specific multiplier to the base reward `-SP + HR`.
pub fn immediate_reward(
    strategy: Strategy,
    skip_pen: f64,
    hit_rew: f64,
    action: usize,
) -> Result<f64, AgentError> {
    let max = strategy.action_space();
    if action < 1 || action > max {
        return Err(AgentError::ActionOutOfRange { action, max });
    }
    let base = -skip_pen + hit_rew;
    let s = sigmoid(action as f64);
    Ok(match strategy {
        Strategy::Normal => base,
        Strategy::Slow => base * (1.0 - s / 2.0),
        Strategy::Fast => base * (1.0 + s / 2.0),
    })
}

/// Reward for skipping `action` frames from processed frame `k`. Returns
/// `None` when the landing index falls off the end of the stream: the episode
/// terminates and the truncated interval earns nothing.
pub fn step_reward(
    labels: &[bool],
    k: usize,
    action: usize,
    strategy: Strategy,
    params: &RewardParams,
) -> Result<Option<f64>, AgentError> {
    let max = strategy.action_space();
    if action < 1 || action > max {
        return Err(AgentError::ActionOutOfRange { action, max });
    }
    let next = k + action + 1;
    if next >= labels.len() {
        return Ok(None);
    }
    let sp = skip_penalty(&labels[k + 1..=k + action], params.beta, params.t_skip)?;
    let hr = hit_reward(next, labels, params.hit_window, params.hit_sigma);
    immediate_reward(strategy, sp, hr, action).map(Some)
}
