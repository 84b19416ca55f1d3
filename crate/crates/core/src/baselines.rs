//! Reference skippers: uniform stride and seeded Bernoulli sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::SceneDataset;
use crate::run::{PeriodRecord, RunReport};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("target rate {0} outside (0, 1]")]
    InvalidRate(f64),
    #[error("empty stream")]
    EmptyStream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Random,
    Uniform,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Random => "random",
            BaselineKind::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub rate: f64,
    pub seed: u64,
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(BaselineError::InvalidRate(self.rate));
        }
        Ok(())
    }
}

/// Uniform: every `ceil(1/r)`-th frame from 0. Random: each frame with
/// probability `r`, falling back to frame 0 if nothing was drawn.
pub fn baseline_select(len: usize, cfg: &BaselineConfig) -> Result<Vec<usize>, BaselineError> {
    cfg.validate()?;
    if len == 0 {
        return Err(BaselineError::EmptyStream);
    }
    Ok(match cfg.kind {
        BaselineKind::Uniform => {
            // The epsilon keeps exact reciprocals like 1/0.25 from rounding up.
            let stride = ((1.0 / cfg.rate) - 1e-9).ceil().max(1.0) as usize;
            (0..len).step_by(stride).collect()
        }
        BaselineKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut picked: Vec<usize> = (0..len).filter(|_| rng.random_bool(cfg.rate)).collect();
            if picked.is_empty() {
                picked.push(0);
            }
            picked
        }
    })
}

/// Runs the baseline independently on every view. View `n` of a random
/// baseline draws from stream `n` of the seeded generator.
pub fn run_baseline(dataset: &SceneDataset, cfg: &BaselineConfig) -> Result<RunReport, BaselineError> {
    let n = dataset.num_views();
    let len = dataset.len();
    let mut report = RunReport::new(cfg.kind.name(), n, len, len);
    for v in 0..n {
        let view_cfg = BaselineConfig { seed: cfg.seed.wrapping_add(v as u64), ..*cfg };
        report.selections[v] = baseline_select(len, &view_cfg)?;
    }
    report.periods.push(PeriodRecord {
        index: 0,
        start: 0,
        end: len,
        strategies: Vec::new(),
        processed: report.selections.iter().map(Vec::len).collect(),
        scores: None,
        main_views: None,
    });
    Ok(report)
}
