//! Distributed coordination: each agent scores how well its neighbours'
//! selections are covered, scores are spread by max-consensus, and the
//! ranking decides the next period's strategies.

use std::collections::VecDeque;

use thiserror::Error;

use crate::features::SceneDataset;
use crate::ffagent::{AgentCursor, AgentError, PolicyBank, Strategy};
use crate::netsim::{Channel, Endpoint, IndexedFrame, Message, NetError, Payload};
use crate::run::{PeriodRecord, RunReport};
use crate::simkernel::{agent_sim, SimError, SimParams};

#[derive(Debug, Error)]
pub enum DmvfError {
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// Connected undirected communication graph.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    adj: Vec<Vec<usize>>,
    diameter: usize,
}

impl CommGraph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, DmvfError> {
        if n < 2 {
            return Err(DmvfError::Graph(format!("need at least 2 nodes, got {n}")));
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(DmvfError::Graph(format!("edge ({u}, {v}) outside 0..{n}")));
            }
            if u == v {
                return Err(DmvfError::Graph(format!("self-loop at {u}")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        let mut diameter = 0;
        for s in 0..n {
            let dist = bfs(&adj, s);
            if let Some(unreached) = dist.iter().position(|d| d.is_none()) {
                return Err(DmvfError::Graph(format!("disconnected: node {unreached} unreachable from {s}")));
            }
            diameter = diameter.max(dist.iter().flatten().copied().max().unwrap_or(0));
        }
        Ok(Self { adj, diameter })
    }

    pub fn complete(n: usize) -> Result<Self, DmvfError> {
        let edges: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        Self::from_edges(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self, DmvfError> {
        let edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn ring(n: usize) -> Result<Self, DmvfError> {
        let mut edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
        if n > 2 {
            edges.push((n - 1, 0));
        }
        Self::from_edges(n, &edges)
    }

    /// Parses lines `u v` (0-based); blank lines and `#` comments are
    /// skipped. The node count is `max id + 1` unless `n` is given.
    pub fn parse_edgelist(text: &str, n: Option<usize>) -> Result<Self, DmvfError> {
        let mut edges = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let ids: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse())
                .collect::<Result<_, _>>()
                .map_err(|_| DmvfError::Graph(format!("line {}: expected two node ids", ln + 1)))?;
            if ids.len() != 2 {
                return Err(DmvfError::Graph(format!("line {}: expected two node ids", ln + 1)));
            }
            edges.push((ids[0], ids[1]));
        }
        let inferred = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        Self::from_edges(n.unwrap_or(inferred), &edges)
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    /// |V_i|: neighbours plus the node itself.
    pub fn neighborhood_size(&self, i: usize) -> usize {
        self.adj[i].len() + 1
    }

    pub fn diameter(&self) -> usize {
        self.diameter
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, a) in self.adj.iter().enumerate() {
            out.extend(a.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }
}

fn bfs(adj: &[Vec<usize>], s: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[s] = Some(0);
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap();
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Initial scores `x_ij` for every member `j` of a neighbourhood: the mean
/// similarity of `j`'s selection to each other member's selection.
/// `members` lists (agent id, selection); selections must be non-empty.
/// A neighbourhood with a single member scores 0.
pub fn initial_scores<F: AsRef<[f32]>>(
    members: &[(usize, &[F])],
    alpha: f64,
) -> Result<Vec<(usize, f64)>, SimError> {
    if members.len() < 2 {
        return Ok(members.iter().map(|&(j, _)| (j, 0.0)).collect());
    }
    let denom = (members.len() - 1) as f64;
    members
        .iter()
        .map(|&(j, vj)| {
            let mut total = 0.0;
            for &(k, vk) in members {
                if k != j {
                    total += agent_sim(vj, vk, alpha)?;
                }
            }
            Ok((j, total / denom))
        })
        .collect()
}

/// Weighted mean of the scores other agents gave this one; each entry is
/// `(score, n_j)` and carries weight `1/n_j`. No evaluations give 0.
pub fn update_own_score(evaluations: &[(f64, f64)]) -> f64 {
    // Scaling every weight by the smallest n_j leaves the mean unchanged and
    // keeps the single-evaluator and equal-weight cases exact.
    let n_min = evaluations.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    let (num, den) = evaluations
        .iter()
        .map(|&(x, n)| (x, if n == n_min { 1.0 } else { n_min / n }))
        .fold((0.0, 0.0), |(num, den), (x, w)| (num + w * x, den + w));
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// One synchronous round: every agent takes the element-wise max of its
/// vector and its neighbours' vectors from the previous round.
pub fn max_merge(graph: &CommGraph, vectors: &[Vec<f32>]) -> Vec<Vec<f32>> {
    (0..vectors.len())
        .map(|i| {
            let mut v = vectors[i].clone();
            for &j in graph.neighbors(i) {
                for (a, &b) in v.iter_mut().zip(&vectors[j]) {
                    *a = a.max(b);
                }
            }
            v
        })
        .collect()
}

/// Runs `diameter` rounds of [`max_merge`].
pub fn maximal_consensus(graph: &CommGraph, vectors: Vec<Vec<f32>>) -> Result<Vec<Vec<f32>>, DmvfError> {
    if vectors.len() != graph.num_nodes() {
        return Err(DmvfError::Config(format!(
            "{} vectors for {} nodes",
            vectors.len(),
            graph.num_nodes()
        )));
    }
    let mut v = vectors;
    for _ in 0..graph.diameter() {
        v = max_merge(graph, &v);
    }
    Ok(v)
}

/// Number of agents running each strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
pub struct Portions {
    pub slow: usize,
    pub normal: usize,
    pub fast: usize,
}

impl Portions {
    /// Even split; any remainder goes to Normal.
    pub fn even(n: usize) -> Self {
        let third = n / 3;
        Self { slow: third, normal: n - 2 * third, fast: third }
    }

    pub fn total(&self) -> usize {
        self.slow + self.normal + self.fast
    }

    pub fn count(&self, s: Strategy) -> usize {
        match s {
            Strategy::Slow => self.slow,
            Strategy::Normal => self.normal,
            Strategy::Fast => self.fast,
        }
    }
}

/// Ranks agents by score (descending, ties to the lower id) and hands out
/// Slow, then Normal, then Fast according to `portions`.
pub fn select_strategies(scores: &[f32], portions: &Portions) -> Result<Vec<Strategy>, DmvfError> {
    if portions.total() != scores.len() {
        return Err(DmvfError::Config(format!(
            "portions sum to {} for {} agents",
            portions.total(),
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut out = vec![Strategy::Normal; scores.len()];
    for (rank, &agent) in order.iter().enumerate() {
        out[agent] = if rank < portions.slow {
            Strategy::Slow
        } else if rank < portions.slow + portions.normal {
            Strategy::Normal
        } else {
            Strategy::Fast
        };
    }
    Ok(out)
}

/// Weighting of evaluator scores in [`update_own_score`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreWeight {
    /// `n_j = |V_j|`.
    #[default]
    NeighborhoodSize,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmvfConfig {
    pub period: usize,
    /// Defaults to [`Portions::even`].
    pub portions: Option<Portions>,
    pub sim: SimParams,
    pub weight: ScoreWeight,
}

impl Default for DmvfConfig {
    fn default() -> Self {
        Self { period: 100, portions: None, sim: SimParams::default(), weight: ScoreWeight::default() }
    }
}

/// Runs the distributed pipeline over the whole dataset. Agent `n` uses
/// view `n` and graph node `n`.
pub fn run_dmvf(
    dataset: &SceneDataset,
    graph: &CommGraph,
    policies: &dyn PolicyBank,
    cfg: &DmvfConfig,
    channel: &mut Channel,
) -> Result<RunReport, DmvfError> {
    let n = dataset.num_views();
    let len = dataset.len();
    cfg.sim.validate()?;
    if cfg.period == 0 {
        return Err(DmvfError::Config("period must be positive".into()));
    }
    if graph.num_nodes() != n {
        return Err(DmvfError::Config(format!("graph has {} nodes for {n} views", graph.num_nodes())));
    }
    if channel.num_agents() != n {
        return Err(DmvfError::Config(format!("channel has {} agents for {n} views", channel.num_agents())));
    }
    policies.check_dim(dataset.dim())?;
    let portions = cfg.portions.unwrap_or_else(|| Portions::even(n));
    let mut strategies = select_strategies(&vec![0.0; n], &portions)?;
    let mut cursors = vec![AgentCursor::default(); n];
    let mut report = RunReport::new("dmvf", n, len, cfg.period);
    let weight = |j: usize| match cfg.weight {
        ScoreWeight::NeighborhoodSize => graph.neighborhood_size(j) as f64,
        ScoreWeight::Uniform => 1.0,
    };

    let num_periods = len.div_ceil(cfg.period);
    for p in 0..num_periods {
        let (start, end) = (p * cfg.period, ((p + 1) * cfg.period).min(len));
        let period = p as u32;

        // Fast-forward this period's raw frames.
        let selected: Vec<Vec<usize>> = (0..n)
            .map(|a| cursors[a].advance(policies.policy(strategies[a]), dataset.view(a), end))
            .collect();

        // Exchange selected frames with neighbours.
        for a in 0..n {
            let frames: Vec<IndexedFrame> = selected[a]
                .iter()
                .map(|&f| IndexedFrame { index: f as u32, feature: dataset.view(a).feature(f).to_vec() })
                .collect();
            for &b in graph.neighbors(a) {
                let msg = Message { sender: a as u16, period, payload: Payload::FrameBatch(frames.clone()) };
                channel.send(Endpoint::Agent(a as u16), Endpoint::Agent(b as u16), msg)?;
            }
        }

        let mut inbox: Vec<Vec<Message>> = Vec::with_capacity(n);
        for i in 0..n {
            inbox.push(channel.receive(Endpoint::Agent(i as u16))?);
        }

        // Score the neighbourhood and tell each evaluated neighbour its score.
        let mut own_eval = vec![None; n];
        for (i, received) in inbox.into_iter().enumerate() {
            let own: Vec<Vec<f32>> = selected[i].iter().map(|&f| dataset.view(i).feature(f).to_vec()).collect();
            let mut held: Vec<(usize, Vec<Vec<f32>>)> = Vec::new();
            if !own.is_empty() {
                held.push((i, own));
            }
            for msg in received {
                if let Payload::FrameBatch(frames) = msg.payload {
                    if !frames.is_empty() {
                        held.push((msg.sender as usize, frames.into_iter().map(|f| f.feature).collect()));
                    }
                }
            }
            if held.first().map(|h| h.0) != Some(i) {
                // Nothing of its own to compare against.
                continue;
            }
            let members: Vec<(usize, &[Vec<f32>])> = held.iter().map(|(j, v)| (*j, v.as_slice())).collect();
            let scores = initial_scores(&members, cfg.sim.alpha)?;
            for (j, x) in scores {
                if j == i {
                    own_eval[i] = Some(x);
                } else {
                    let mut row = vec![0.0f32; n];
                    row[j] = x as f32;
                    let msg = Message { sender: i as u16, period, payload: Payload::ScoreVector(row) };
                    channel.send(Endpoint::Agent(i as u16), Endpoint::Agent(j as u16), msg)?;
                }
            }
        }

        // Own score from the evaluations received.
        let mut vectors = vec![vec![0.0f32; n]; n];
        for i in 0..n {
            let mut evals: Vec<(f64, f64)> = Vec::new();
            if let Some(x) = own_eval[i] {
                evals.push((x, weight(i)));
            }
            for msg in channel.receive(Endpoint::Agent(i as u16))? {
                if let Payload::ScoreVector(row) = msg.payload {
                    if let Some(&x) = row.get(i) {
                        evals.push((x as f64, weight(msg.sender as usize)));
                    }
                }
            }
            if !selected[i].is_empty() {
                vectors[i][i] = update_own_score(&evals) as f32;
            }
        }

        // Max-consensus over the graph, one message per edge direction per round.
        for _ in 0..graph.diameter() {
            for a in 0..n {
                for &b in graph.neighbors(a) {
                    let msg = Message { sender: a as u16, period, payload: Payload::ScoreVector(vectors[a].clone()) };
                    channel.send(Endpoint::Agent(a as u16), Endpoint::Agent(b as u16), msg)?;
                }
            }
            for a in 0..n {
                for msg in channel.receive(Endpoint::Agent(a as u16))? {
                    if let Payload::ScoreVector(v) = msg.payload {
                        for (x, y) in vectors[a].iter_mut().zip(v) {
                            *x = x.max(y);
                        }
                    }
                }
            }
        }
        channel.end_period();

        report.periods.push(PeriodRecord {
            index: p,
            start,
            end,
            strategies: strategies.clone(),
            processed: selected.iter().map(Vec::len).collect(),
            scores: Some(vectors[0].clone()),
            main_views: None,
        });
        for (a, s) in selected.into_iter().enumerate() {
            report.selections[a].extend(s);
        }

        // Every agent ranks with its own copy of the vector.
        strategies = (0..n)
            .map(|a| select_strategies(&vectors[a], &portions).map(|s| s[a]))
            .collect::<Result<_, _>>()?;
        if vectors.iter().any(|v| v != &vectors[0]) {
            log::warn!("period {p}: agents disagree after consensus");
        }
    }
    report.comm = channel.report().clone();
    Ok(report)
}
