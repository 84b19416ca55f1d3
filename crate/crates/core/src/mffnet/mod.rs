//! Centralized coordination: a controller receives every agent's selected
//! frames each period, picks the main views, assigns the next strategies and
//! builds a compact summary.

mod dqn;

pub use dqn::{
    decode_action, dqn_reward, dqn_state, encode_action, gaussian_smooth, train_dqn_controller,
    ControllerTrainConfig, DqnControllerPolicy, MAX_DQN_VIEWS,
};

use thiserror::Error;

use crate::features::SceneDataset;
use crate::ffagent::{AgentCursor, AgentError, PolicyBank, Strategy};
use crate::netsim::{Channel, Endpoint, IndexedFrame, Message, NetError, Payload, CONTROLLER_ID};
use crate::run::{PeriodRecord, RunReport};
use crate::simkernel::{BestMatchTable, SimError, SimParams};

/// Largest view count for exhaustive main-view search.
pub const MAX_VIEWS: usize = 20;

#[derive(Debug, Error)]
pub enum MffError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid buffers: {0}")]
    Buffers(String),
    #[error("every buffer is empty")]
    AllEmpty,
    #[error("{0} views exceed the supported maximum of {1}")]
    TooManyViews(usize, usize),
    #[error("vector length mismatch: {0}")]
    LengthMismatch(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BufferedFrame {
    pub index: usize,
    pub feature: Vec<f32>,
}

/// Frames each agent delivered for one period, `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodBuffers {
    start: usize,
    end: usize,
    buffers: Vec<Vec<BufferedFrame>>,
}

impl PeriodBuffers {
    pub fn new(start: usize, end: usize, buffers: Vec<Vec<BufferedFrame>>) -> Result<Self, MffError> {
        if start > end {
            return Err(MffError::Buffers(format!("start {start} after end {end}")));
        }
        let mut dim = None;
        for (n, b) in buffers.iter().enumerate() {
            if !b.windows(2).all(|w| w[0].index < w[1].index) {
                return Err(MffError::Buffers(format!("buffer {n} indices not strictly increasing")));
            }
            if let Some(f) = b.iter().find(|f| f.index < start || f.index >= end) {
                return Err(MffError::Buffers(format!("buffer {n} frame {} outside [{start}, {end})", f.index)));
            }
            for f in b {
                match dim {
                    None => dim = Some(f.feature.len()),
                    Some(d) if d != f.feature.len() => {
                        return Err(MffError::Buffers("feature dimensions differ".into()))
                    }
                    _ => {}
                }
            }
        }
        Ok(Self { start, end, buffers })
    }

    /// Buffers holding the given frames of each view.
    pub fn from_selections(
        dataset: &SceneDataset,
        selections: &[Vec<usize>],
        start: usize,
        end: usize,
    ) -> Result<Self, MffError> {
        let buffers = selections
            .iter()
            .enumerate()
            .map(|(n, sel)| {
                sel.iter()
                    .map(|&f| BufferedFrame { index: f, feature: dataset.view(n).feature(f).to_vec() })
                    .collect()
            })
            .collect();
        Self::new(start, end, buffers)
    }

    pub fn num_views(&self) -> usize {
        self.buffers.len()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn buffer(&self, n: usize) -> &[BufferedFrame] {
        &self.buffers[n]
    }

    pub fn buffers(&self) -> &[Vec<BufferedFrame>] {
        &self.buffers
    }

    pub fn is_all_empty(&self) -> bool {
        self.buffers.iter().all(Vec::is_empty)
    }

    pub fn features(&self, n: usize) -> Vec<&[f32]> {
        self.buffers[n].iter().map(|f| f.feature.as_slice()).collect()
    }

    fn table(&self, alpha: f64) -> Result<BestMatchTable, SimError> {
        let groups: Vec<Vec<&[f32]>> = (0..self.num_views()).map(|n| self.features(n)).collect();
        BestMatchTable::build(&groups, alpha)
    }
}

/// Chosen main-view set with its objective as an exact fraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MainViews {
    pub mask: u64,
    /// Matched frames outside the set.
    pub matched: usize,
    /// Frames inside the set.
    pub kept: usize,
}

impl MainViews {
    pub fn views(&self) -> Vec<usize> {
        (0..64).filter(|&j| self.mask >> j & 1 == 1).collect()
    }

    pub fn contains(&self, n: usize) -> bool {
        self.mask >> n & 1 == 1
    }

    pub fn score(&self) -> f64 {
        self.matched as f64 / self.kept as f64
    }
}

/// Exhaustive search over every non-empty proper subset of views for the
/// one whose frames match the most outside frames per frame kept. Ties go to
/// fewer views, then the smaller bitmask. Subsets holding no frames are
/// skipped.
pub fn select_main_views(buffers: &PeriodBuffers, sim: &SimParams) -> Result<MainViews, MffError> {
    let n = buffers.num_views();
    if n < 2 {
        return Err(MffError::Config(format!("need at least 2 views, got {n}")));
    }
    if n > MAX_VIEWS {
        return Err(MffError::TooManyViews(n, MAX_VIEWS));
    }
    if buffers.is_all_empty() {
        return Err(MffError::AllEmpty);
    }
    let table = buffers.table(sim.alpha)?;
    select_from_table(&table, buffers, sim.rho)
}

fn select_from_table(table: &BestMatchTable, buffers: &PeriodBuffers, rho: f64) -> Result<MainViews, MffError> {
    let n = buffers.num_views();
    let full = (1u64 << n) - 1;
    let mut best: Option<MainViews> = None;
    for mask in 1..full {
        let kept: usize = (0..n).filter(|&j| mask >> j & 1 == 1).map(|j| buffers.buffer(j).len()).sum();
        if kept == 0 {
            continue;
        }
        let matched: usize = (0..n)
            .filter(|&i| mask >> i & 1 == 0)
            .map(|i| table.match_count_union(i, mask, rho))
            .sum();
        let cand = MainViews { mask, matched, kept };
        let better = match &best {
            None => true,
            Some(b) => {
                let lhs = cand.matched as u128 * b.kept as u128;
                let rhs = b.matched as u128 * cand.kept as u128;
                lhs > rhs || (lhs == rhs && mask.count_ones() < b.mask.count_ones())
            }
        };
        if better {
            best = Some(cand);
        }
    }
    best.ok_or(MffError::AllEmpty)
}

/// Fraction of view `n`'s frames matched by the main views; `None` for an
/// empty buffer.
pub fn matching_percentage(
    n: usize,
    main: &MainViews,
    buffers: &PeriodBuffers,
    sim: &SimParams,
) -> Result<Option<f64>, MffError> {
    let b = buffers.buffer(n);
    if b.is_empty() {
        return Ok(None);
    }
    let reference: Vec<&[f32]> = main.views().into_iter().flat_map(|j| buffers.features(j)).collect();
    if reference.is_empty() {
        return Ok(Some(0.0));
    }
    let m = crate::simkernel::match_count(&buffers.features(n), &reference, sim)?;
    Ok(Some(m as f64 / b.len() as f64))
}

/// Main views run Slow; others run Fast when more than `tau` of their frames
/// are matched by the main views and Normal otherwise (including empty
/// buffers and the boundary `mp == tau`).
pub fn assign_strategies(
    main: &MainViews,
    buffers: &PeriodBuffers,
    sim: &SimParams,
    tau: f64,
) -> Result<Vec<Strategy>, MffError> {
    (0..buffers.num_views())
        .map(|n| {
            if main.contains(n) {
                return Ok(Strategy::Slow);
            }
            Ok(match matching_percentage(n, main, buffers, sim)? {
                Some(mp) if mp > tau => Strategy::Fast,
                _ => Strategy::Normal,
            })
        })
        .collect()
}

/// Summary frames for one period: every main-view frame, plus each other
/// frame unless a main-view frame within `dedup_window` frames matches it,
/// each widened by `neighbor_window` frames on both sides and clipped to
/// `[0, length)`. Sorted and deduplicated.
pub fn generate_summary(
    main: &MainViews,
    buffers: &PeriodBuffers,
    sim: &SimParams,
    dedup_window: usize,
    neighbor_window: usize,
    length: usize,
) -> Result<Vec<usize>, MffError> {
    let main_frames: Vec<&BufferedFrame> =
        main.views().into_iter().flat_map(|j| buffers.buffer(j).iter()).collect();
    let mut kept: Vec<usize> = main_frames.iter().map(|f| f.index).collect();
    for n in (0..buffers.num_views()).filter(|&n| !main.contains(n)) {
        for f in buffers.buffer(n) {
            let mut duplicate = false;
            for m in &main_frames {
                if m.index.abs_diff(f.index) <= dedup_window
                    && crate::simkernel::frame_sim(&f.feature, &m.feature, sim.alpha)? > sim.rho
                {
                    duplicate = true;
                    break;
                }
            }
            if !duplicate {
                kept.push(f.index);
            }
        }
    }
    let mut out: Vec<usize> = kept
        .into_iter()
        .flat_map(|k| k.saturating_sub(neighbor_window)..(k + neighbor_window + 1).min(length))
        .collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub sim: SimParams,
    pub tau: f64,
    pub period: usize,
    pub dedup_window: usize,
    pub neighbor_window: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self { sim: SimParams::default(), tau: 0.4, period: 100, dedup_window: 50, neighbor_window: 4 }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), MffError> {
        self.sim.validate()?;
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(MffError::Config(format!("tau {} outside (0, 1)", self.tau)));
        }
        if self.period == 0 {
            return Err(MffError::Config("period must be positive".into()));
        }
        Ok(())
    }
}

/// Runs the centralized pipeline over the whole dataset. With `dqn` set,
/// strategies come from the learned controller; main views and the summary
/// are computed the same way in both modes.
pub fn run_mffnet(
    dataset: &SceneDataset,
    policies: &dyn PolicyBank,
    cfg: &ControllerConfig,
    dqn: Option<&DqnControllerPolicy>,
    channel: &mut Channel,
) -> Result<RunReport, MffError> {
    cfg.validate()?;
    let n = dataset.num_views();
    let len = dataset.len();
    if n < 2 {
        return Err(MffError::Config(format!("need at least 2 views, got {n}")));
    }
    if n > MAX_VIEWS {
        return Err(MffError::TooManyViews(n, MAX_VIEWS));
    }
    if channel.num_agents() != n {
        return Err(MffError::Config(format!("channel has {} agents for {n} views", channel.num_agents())));
    }
    policies.check_dim(dataset.dim())?;
    if let Some(d) = dqn {
        d.check(n, dataset.dim())?;
    }
    let method = if dqn.is_some() { "mffnet-dqn" } else { "mffnet" };
    let mut report = RunReport::new(method, n, len, cfg.period);
    let mut strategies = vec![Strategy::Normal; n];
    let mut cursors = vec![AgentCursor::default(); n];
    let mut summary = Vec::new();
    let mut delivered = Vec::new();

    for p in 0..len.div_ceil(cfg.period) {
        let (start, end) = (p * cfg.period, ((p + 1) * cfg.period).min(len));
        let period = p as u32;
        let selected: Vec<Vec<usize>> = (0..n)
            .map(|a| cursors[a].advance(policies.policy(strategies[a]), dataset.view(a), end))
            .collect();

        for (a, sel) in selected.iter().enumerate() {
            let frames = sel
                .iter()
                .map(|&f| IndexedFrame { index: f as u32, feature: dataset.view(a).feature(f).to_vec() })
                .collect();
            let msg = Message { sender: a as u16, period, payload: Payload::FrameBatch(frames) };
            channel.send(Endpoint::Agent(a as u16), Endpoint::Controller, msg)?;
        }

        // Controller side: a lost batch leaves that view's buffer empty.
        let mut raw: Vec<Vec<BufferedFrame>> = vec![Vec::new(); n];
        for msg in channel.receive(Endpoint::Controller)? {
            if let Payload::FrameBatch(frames) = msg.payload {
                raw[msg.sender as usize] = frames
                    .into_iter()
                    .map(|f| BufferedFrame { index: f.index as usize, feature: f.feature })
                    .collect();
            }
        }
        let buffers = PeriodBuffers::new(start, end, raw)?;
        delivered.extend(buffers.buffers().iter().flatten().map(|f| f.index));

        let mut main_views = None;
        let mut next = strategies.clone();
        if !buffers.is_all_empty() {
            let table = buffers.table(cfg.sim.alpha)?;
            let main = select_from_table(&table, &buffers, cfg.sim.rho)?;
            next = match dqn {
                Some(d) => d.act(&dqn_state(&buffers, dataset.dim())),
                None => assign_strategies(&main, &buffers, &cfg.sim, cfg.tau)?,
            };
            summary.extend(generate_summary(&main, &buffers, &cfg.sim, cfg.dedup_window, cfg.neighbor_window, len)?);
            main_views = Some(main.views());
        }

        for a in 0..n {
            let msg = Message { sender: CONTROLLER_ID, period, payload: Payload::StrategyOrder(next.clone()) };
            channel.send(Endpoint::Controller, Endpoint::Agent(a as u16), msg)?;
        }
        let used = strategies.clone();
        for (a, current) in strategies.iter_mut().enumerate() {
            // A lost order leaves the agent on its previous strategy.
            for msg in channel.receive(Endpoint::Agent(a as u16))? {
                if let Payload::StrategyOrder(order) = msg.payload {
                    if let Some(&s) = order.get(a) {
                        *current = s;
                    }
                }
            }
        }
        channel.end_period();

        report.periods.push(PeriodRecord {
            index: p,
            start,
            end,
            strategies: used,
            processed: selected.iter().map(Vec::len).collect(),
            scores: None,
            main_views,
        });
        for (a, s) in selected.into_iter().enumerate() {
            report.selections[a].extend(s);
        }
    }
    summary.sort_unstable();
    summary.dedup();
    delivered.sort_unstable();
    delivered.dedup();
    report.summary = Some(summary);
    report.delivered = Some(delivered);
    report.comm = channel.report().clone();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(index: usize, x: f32) -> BufferedFrame {
        BufferedFrame { index, feature: vec![x, 0.0] }
    }

    fn sim(rho: f64) -> SimParams {
        SimParams::new(0.05, rho).unwrap()
    }

    #[test]
    fn buffers_validated() {
        assert!(PeriodBuffers::new(0, 10, vec![vec![frame(3, 0.0), frame(3, 1.0)]]).is_err());
        assert!(PeriodBuffers::new(0, 10, vec![vec![frame(10, 0.0)]]).is_err());
        assert!(PeriodBuffers::new(
            0,
            10,
            vec![vec![frame(1, 0.0)], vec![BufferedFrame { index: 2, feature: vec![1.0] }]]
        )
        .is_err());
        assert!(PeriodBuffers::new(5, 10, vec![vec![frame(5, 0.0), frame(9, 1.0)], vec![]]).is_ok());
    }

    /// Objective of `mask` by direct pairwise scanning.
    fn brute_score(b: &PeriodBuffers, mask: u64, rho: f64) -> (usize, usize) {
        let n = b.num_views();
        let inside: Vec<&BufferedFrame> =
            (0..n).filter(|j| mask >> j & 1 == 1).flat_map(|j| b.buffer(j).iter()).collect();
        let matched = (0..n)
            .filter(|i| mask >> i & 1 == 0)
            .flat_map(|i| b.buffer(i).iter())
            .filter(|x| {
                inside.iter().any(|y| crate::simkernel::frame_sim(&x.feature, &y.feature, 0.05).unwrap() > rho)
            })
            .count();
        (matched, inside.len())
    }

    #[test]
    fn subset_copies_match_brute_force() {
        // Views 1 and 2 hold subsets of view 0's frames.
        let v0: Vec<_> = (0..6).map(|k| frame(k, k as f32 * 100.0)).collect();
        let v1 = vec![frame(0, 0.0), frame(2, 200.0)];
        let v2 = vec![frame(1, 100.0), frame(3, 300.0), frame(5, 500.0)];
        let b = PeriodBuffers::new(0, 10, vec![v0, v1, v2]).unwrap();
        assert_eq!(brute_score(&b, 0b001, 0.9), (2 + 3, 6));
        let m = select_main_views(&b, &sim(0.9)).unwrap();
        let best = (1..7u64)
            .map(|mask| brute_score(&b, mask, 0.9))
            .map(|(m, k)| m as f64 / k as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(m.score(), best);
        assert_eq!(brute_score(&b, m.mask, 0.9), (m.matched, m.kept));
        // Several subsets score 1; the single smallest-mask view wins.
        assert_eq!(m.views(), vec![1]);
    }

    #[test]
    fn orthogonal_views_tie_to_smallest_mask() {
        let b = PeriodBuffers::new(
            0,
            10,
            vec![vec![frame(0, 0.0)], vec![frame(0, 1000.0)], vec![frame(0, 2000.0)]],
        )
        .unwrap();
        let m = select_main_views(&b, &sim(0.5)).unwrap();
        assert_eq!(m.mask, 0b001);
        assert_eq!(m.score(), 0.0);
    }

    #[test]
    fn fewer_covering_frames_win() {
        let b1 = vec![frame(0, 0.0), frame(1, 0.5), frame(2, 1.0)];
        let b2 = vec![frame(0, 0.2), frame(4, 0.8)];
        let b = PeriodBuffers::new(0, 10, vec![b1, b2]).unwrap();
        let m = select_main_views(&b, &sim(0.9)).unwrap();
        assert_eq!(m.views(), vec![1]);
        // {2} scores 3/2, {1} scores 2/3.
        assert_eq!((m.matched, m.kept), (3, 2));
    }

    #[test]
    fn empty_buffers_are_handled() {
        let all_empty = PeriodBuffers::new(0, 10, vec![vec![], vec![]]).unwrap();
        assert!(matches!(select_main_views(&all_empty, &sim(0.5)), Err(MffError::AllEmpty)));
        let one = PeriodBuffers::new(0, 10, vec![vec![], vec![frame(1, 0.0)], vec![]]).unwrap();
        let m = select_main_views(&one, &sim(0.5)).unwrap();
        assert_eq!(m.views(), vec![1]);
        let s = assign_strategies(&m, &one, &sim(0.5), 0.4).unwrap();
        assert_eq!(s, vec![Strategy::Normal, Strategy::Slow, Strategy::Normal]);
    }

    #[test]
    fn strategy_thresholds() {
        // View 1 has half its frames matched by main view 0, view 2 one fifth.
        let v0 = vec![frame(0, 0.0), frame(1, 100.0)];
        let v1 = vec![frame(0, 0.0), frame(1, 1000.0)];
        let v2: Vec<_> = (0..5).map(|k| frame(k, if k == 0 { 100.0 } else { 3000.0 + 200.0 * k as f32 })).collect();
        let b = PeriodBuffers::new(0, 10, vec![v0, v1, v2]).unwrap();
        let main = MainViews { mask: 0b001, matched: 0, kept: 2 };
        assert_eq!(matching_percentage(1, &main, &b, &sim(0.9)).unwrap(), Some(0.5));
        assert_eq!(matching_percentage(2, &main, &b, &sim(0.9)).unwrap(), Some(0.2));
        let s = assign_strategies(&main, &b, &sim(0.9), 0.4).unwrap();
        assert_eq!(s, vec![Strategy::Slow, Strategy::Fast, Strategy::Normal]);
        // The boundary goes to Normal.
        assert_eq!(assign_strategies(&main, &b, &sim(0.9), 0.5).unwrap()[1], Strategy::Normal);
    }

    #[test]
    fn summary_drops_close_matches_only() {
        let main = MainViews { mask: 0b01, matched: 0, kept: 2 };
        let v0 = vec![frame(10, 0.0), frame(400, 50.0)];
        // Frame 12 duplicates 10; frame 100 resembles 400 but is 300 frames away.
        let v1 = vec![frame(12, 0.1), frame(100, 50.0), frame(200, 900.0)];
        let b = PeriodBuffers::new(0, 500, vec![v0, v1]).unwrap();
        let f = generate_summary(&main, &b, &sim(0.9), 50, 0, 500).unwrap();
        assert_eq!(f, vec![10, 100, 200, 400]);
        let w = generate_summary(&main, &b, &sim(0.9), 50, 2, 402).unwrap();
        assert_eq!(w, vec![8, 9, 10, 11, 12, 98, 99, 100, 101, 102, 198, 199, 200, 201, 202, 398, 399, 400, 401]);
    }

    #[test]
    fn identical_views_summarize_to_main_view() {
        let v: Vec<_> = (0..5).map(|k| frame(k * 20, k as f32 * 300.0)).collect();
        let b = PeriodBuffers::new(0, 100, vec![v.clone(), v.clone(), v]).unwrap();
        let m = select_main_views(&b, &sim(0.9)).unwrap();
        assert_eq!(m.views().len(), 1);
        let f = generate_summary(&m, &b, &sim(0.9), 100, 0, 100).unwrap();
        assert_eq!(f, vec![0, 20, 40, 60, 80]);
        let s = assign_strategies(&m, &b, &sim(0.9), 0.4).unwrap();
        assert_eq!(s.iter().filter(|&&x| x == Strategy::Slow).count(), 1);
        assert_eq!(s.iter().filter(|&&x| x == Strategy::Fast).count(), 2);
    }

    #[test]
    fn config_validation() {
        assert!(ControllerConfig::default().validate().is_ok());
        assert!(ControllerConfig { tau: 1.0, ..ControllerConfig::default() }.validate().is_err());
        assert!(ControllerConfig { period: 0, ..ControllerConfig::default() }.validate().is_err());
    }
}
