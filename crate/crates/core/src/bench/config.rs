//! Bench configuration (TOML).
//!
//! ```toml
//! seeds = [1, 2, 3, 4, 5]
//! methods = ["uniform", "random", "ffnet", "dmvf", "mffnet"]
//! loss = [0.0, 0.05, 0.1]        # applied to dmvf / mffnet cells
//! desync = [-100, -20, 0, 20, 100]
//! desync_view = 0
//! identical_views = false
//! eval_window = 4
//! baseline_rate = 0.04
//! period = 100
//! alpha = 0.05
//! rho = 0.6
//! tau = 0.4
//! dedup_window = 50
//! neighbor_window = 4
//! graph = "complete"             # complete | path | ring | edge-list file
//! score_weight = "neighborhood_size"
//! lossy_kinds = ["frame_batch"]
//! transport = "codec"            # direct | codec | socket
//! rho_sweep = [0.5, 0.6, 0.7, 0.8, 0.85]
//!
//! [data]
//! path = "scene.ffwd"            # or a [data.synthetic] table (seed = run seed)
//!
//! [policies]
//! dir = "policies"               # or a [policies.training] table
//!
//! [controller]                   # only for mffnet-dqn
//! path = "controller.ffwq"       # or a [controller.training] table
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::BenchError;
use crate::dmvf::{CommGraph, DmvfConfig, Portions, ScoreWeight};
use crate::features::SynthConfig;
use crate::ffagent::TrainConfig;
use crate::mffnet::{ControllerConfig, ControllerTrainConfig};
use crate::netsim::{ChannelConfig, TransportKind};
use crate::simkernel::SimParams;

pub const METHODS: [&str; 9] = [
    "uniform",
    "random",
    "ffnet",
    "ffnet-slow",
    "ffnet-normal",
    "ffnet-fast",
    "dmvf",
    "mffnet",
    "mffnet-dqn",
];

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    pub path: Option<PathBuf>,
    pub synthetic: Option<SynthConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySource {
    pub dir: Option<PathBuf>,
    pub training: Option<TrainConfig>,
    /// Training scene seed = run seed + offset (synthetic data only).
    #[serde(default = "default_scene_offset")]
    pub scene_seed_offset: u64,
}

fn default_scene_offset() -> u64 {
    1000
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSource {
    pub path: Option<PathBuf>,
    pub training: Option<ControllerTrainConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub seeds: Vec<u64>,
    pub methods: Vec<String>,
    pub loss: Vec<f64>,
    pub desync: Vec<i64>,
    pub desync_view: usize,
    pub identical_views: bool,
    pub eval_window: usize,
    pub baseline_rate: f64,
    pub period: usize,
    pub alpha: f64,
    pub rho: f64,
    pub tau: f64,
    pub dedup_window: usize,
    pub neighbor_window: usize,
    pub graph: String,
    pub portions: Option<Portions>,
    pub score_weight: ScoreWeight,
    pub lossy_kinds: Vec<String>,
    pub transport: TransportKind,
    pub rho_sweep: Vec<f64>,
    pub data: DataSource,
    pub policies: PolicySource,
    pub controller: Option<ControllerSource>,
    /// Directory relative paths resolve against; set by [`BenchConfig::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PolicySource {
    fn default() -> Self {
        Self { dir: None, training: Some(TrainConfig::default()), scene_seed_offset: default_scene_offset() }
    }
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3, 4, 5],
            methods: vec!["uniform".into(), "random".into(), "ffnet".into(), "dmvf".into(), "mffnet".into()],
            loss: vec![0.0],
            desync: vec![0],
            desync_view: 0,
            identical_views: false,
            eval_window: 4,
            baseline_rate: 0.04,
            period: 100,
            alpha: 0.05,
            rho: 0.6,
            tau: 0.4,
            dedup_window: 50,
            neighbor_window: 4,
            graph: "complete".into(),
            portions: None,
            score_weight: ScoreWeight::default(),
            lossy_kinds: ChannelConfig::default().lossy_kinds,
            transport: TransportKind::default(),
            rho_sweep: Vec::new(),
            data: DataSource { path: None, synthetic: Some(SynthConfig::default()) },
            policies: PolicySource::default(),
            controller: None,
            base_dir: PathBuf::from("."),
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, BenchError> {
        let mut cfg: BenchConfig = toml::from_str(text)?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| BenchError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.seeds.is_empty() {
            return bad("`seeds` is empty".into());
        }
        if self.methods.is_empty() {
            return bad("`methods` is empty".into());
        }
        if let Some(m) = self.methods.iter().find(|m| !METHODS.contains(&m.as_str())) {
            return Err(BenchError::UnknownMethod(m.clone()));
        }
        if self.loss.is_empty() || self.desync.is_empty() {
            return bad("`loss` and `desync` need at least one value".into());
        }
        if let Some(p) = self.loss.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("loss {p} outside [0, 1]"));
        }
        if !(self.baseline_rate > 0.0 && self.baseline_rate <= 1.0) {
            return bad(format!("baseline_rate {} outside (0, 1]", self.baseline_rate));
        }
        SimParams::new(self.alpha, self.rho).map_err(|e| BenchError::Config(e.to_string()))?;
        for &r in &self.rho_sweep {
            SimParams::new(self.alpha, r).map_err(|e| BenchError::Config(format!("rho_sweep: {e}")))?;
        }
        self.controller_config().validate()?;
        self.channel_config(0.0, 0).validate()?;
        match (&self.data.path, &self.data.synthetic) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return bad("[data] needs exactly one of `path` or `synthetic`".into()),
        }
        if let Some(s) = &self.data.synthetic {
            s.validate()?;
            if self.desync_view >= s.num_views {
                return bad(format!("desync_view {} out of range", self.desync_view));
            }
        }
        match (&self.policies.dir, &self.policies.training) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return bad("[policies] needs exactly one of `dir` or `training`".into()),
        }
        if let Some(t) = &self.policies.training {
            t.validate()?;
        }
        if self.methods.iter().any(|m| m == "mffnet-dqn") {
            match &self.controller {
                Some(ControllerSource { path: Some(_), training: None })
                | Some(ControllerSource { path: None, training: Some(_) }) => {}
                _ => return bad("mffnet-dqn needs a [controller] with exactly one of `path` or `training`".into()),
            }
        }
        if self.graph.is_empty() {
            return bad("`graph` is empty".into());
        }
        Ok(())
    }

    pub fn sim(&self) -> SimParams {
        SimParams { alpha: self.alpha, rho: self.rho }
    }

    pub fn controller_config(&self) -> ControllerConfig {
        ControllerConfig {
            sim: self.sim(),
            tau: self.tau,
            period: self.period,
            dedup_window: self.dedup_window,
            neighbor_window: self.neighbor_window,
        }
    }

    pub fn dmvf_config(&self) -> DmvfConfig {
        DmvfConfig { period: self.period, portions: self.portions, sim: self.sim(), weight: self.score_weight }
    }

    pub fn channel_config(&self, loss: f64, seed: u64) -> ChannelConfig {
        ChannelConfig { loss, seed, lossy_kinds: self.lossy_kinds.clone() }
    }

    pub fn graph(&self, n: usize) -> Result<CommGraph, BenchError> {
        Ok(match self.graph.as_str() {
            "complete" => CommGraph::complete(n)?,
            "path" => CommGraph::path(n)?,
            "ring" => CommGraph::ring(n)?,
            file => {
                let path = self.resolve(Path::new(file));
                let text = std::fs::read_to_string(&path).map_err(|source| BenchError::Io { path, source })?;
                CommGraph::parse_edgelist(&text, Some(n))?
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        BenchConfig::default().validate().unwrap();
        let cfg = BenchConfig::from_toml("", ".").unwrap();
        assert_eq!(cfg.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(cfg.rho, 0.6);
    }

    #[test]
    fn parses_full_config() {
        let text = r#"
            seeds = [3]
            methods = ["mffnet", "dmvf"]
            loss = [0.0, 0.1]
            desync = [-20, 0]
            rho = 0.7
            graph = "ring"
            transport = "socket"
            portions = { slow = 1, normal = 1, fast = 1 }

            [data.synthetic]
            num_views = 3
            length = 400
            dim = 8
            num_events = 4
            event_len_min = 10
            event_len_max = 20
            overlap = 0.5
            noise_std = 0.1
            seed = 0

            [policies]
            scene_seed_offset = 7

            [policies.training]
            episodes = 5
        "#;
        let cfg = BenchConfig::from_toml(text, "/tmp").unwrap();
        assert_eq!(cfg.transport, TransportKind::Socket);
        assert_eq!(cfg.policies.training.as_ref().unwrap().episodes, 5);
        assert_eq!(cfg.policies.scene_seed_offset, 7);
        assert_eq!(cfg.graph(3).unwrap().diameter(), 1);
        assert_eq!(cfg.graph(5).unwrap().diameter(), 2);
    }

    #[test]
    fn named_errors() {
        assert!(matches!(
            BenchConfig::from_toml("methods = [\"magic\"]", "."),
            Err(BenchError::UnknownMethod(m)) if m == "magic"
        ));
        assert!(matches!(BenchConfig::from_toml("bogus = 1", "."), Err(BenchError::Toml(_))));
        assert!(matches!(BenchConfig::from_toml("loss = [1.5]", "."), Err(BenchError::Config(_))));
        assert!(matches!(
            BenchConfig::from_toml("methods = [\"mffnet-dqn\"]", "."),
            Err(BenchError::Config(_))
        ));
        let both = "[policies]\ndir = \"p\"\n[policies.training]\nepisodes = 1\n";
        assert!(matches!(BenchConfig::from_toml(both, "."), Err(BenchError::Config(_))));
    }

    #[test]
    fn shipped_config_is_valid() {
        let cfg = BenchConfig::from_toml(include_str!("../../../../configs/bench.toml"), ".").unwrap();
        assert_eq!(cfg.methods.len(), 8);
        assert!(cfg.controller.is_some());
    }
}
