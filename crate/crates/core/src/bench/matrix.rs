//! The seeded experiment matrix: seeds x desync x methods x loss.
//!
//! Output layout:
//!
//! ```text
//! <out>/summary.csv
//! <out>/sweep.csv                  (when rho_sweep is set)
//! <out>/cells/<method>_s<seed>_l<loss>_d<desync>.report
//! <out>/policies/s<seed>/*.ffwq    (when policies are trained)
//! ```
//!
//! Everything is a pure function of the config, so two runs produce
//! byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{metrics, run_ffnet, sweep_rho, BenchConfig, BenchError, Metrics};
use crate::baselines::{run_baseline, BaselineConfig, BaselineKind};
use crate::dmvf::run_dmvf;
use crate::features::{generate_scene, read_dataset, SceneDataset, SynthConfig};
use crate::ffagent::{train_policy_set, PolicySet, Strategy};
use crate::mffnet::{run_mffnet, train_dqn_controller, DqnControllerPolicy};
use crate::netsim::Channel;
use crate::run::RunReport;

pub const SUMMARY_HEADER: &str =
    "method,seed,loss,desync,coverage,summary_coverage,processing_rate,p2p_bytes,central_bytes";

/// One line of `summary.csv`. `summary_coverage` is NaN for methods without
/// a summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRow {
    pub method: String,
    pub seed: u64,
    pub loss: f64,
    pub desync: i64,
    pub coverage: f64,
    pub summary_coverage: f64,
    pub processing_rate: f64,
    pub p2p_bytes: u64,
    pub central_bytes: u64,
}

impl CellRow {
    fn new(method: &str, seed: u64, loss: f64, desync: i64, m: &Metrics) -> Self {
        Self {
            method: method.to_string(),
            seed,
            loss,
            desync,
            coverage: m.coverage,
            summary_coverage: m.summary_coverage.unwrap_or(f64::NAN),
            processing_rate: m.processing_rate,
            p2p_bytes: m.p2p_bytes,
            central_bytes: m.central_bytes,
        }
    }

    fn csv(&self) -> String {
        format!(
            "{},{},{:.4},{},{:.6},{:.6},{:.6},{},{}",
            self.method,
            self.seed,
            self.loss,
            self.desync,
            self.coverage,
            self.summary_coverage,
            self.processing_rate,
            self.p2p_bytes,
            self.central_bytes
        )
    }

    fn parse(line: &str) -> Result<Self, String> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(format!("expected 9 fields, found {}", f.len()));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|e| format!("field {i}: {e}"));
        let int = |i: usize| f[i].parse::<u64>().map_err(|e| format!("field {i}: {e}"));
        Ok(Self {
            method: f[0].to_string(),
            seed: int(1)?,
            loss: num(2)?,
            desync: f[3].parse().map_err(|e| format!("field 3: {e}"))?,
            coverage: num(4)?,
            summary_coverage: num(5)?,
            processing_rate: num(6)?,
            p2p_bytes: int(7)?,
            central_bytes: int(8)?,
        })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, text: &str) -> Result<(), BenchError> {
    fs::write(path, text).map_err(io_err(path))
}

/// The evaluation scene for `seed`.
pub(crate) fn eval_dataset(cfg: &BenchConfig, seed: u64) -> Result<SceneDataset, BenchError> {
    let ds = match (&cfg.data.path, &cfg.data.synthetic) {
        (Some(p), _) => read_dataset(cfg.resolve(p))?,
        (None, Some(s)) => generate_scene(&SynthConfig { seed, ..s.clone() })?,
        (None, None) => return Err(BenchError::Config("[data] is empty".into())),
    };
    if cfg.identical_views {
        Ok(ds.with_identical_views(0)?)
    } else {
        Ok(ds)
    }
}

/// The scene policies and the controller are trained on. With recorded
/// data there is only one scene, so training uses it.
fn training_dataset(cfg: &BenchConfig, seed: u64, eval: &SceneDataset) -> Result<SceneDataset, BenchError> {
    match &cfg.data.synthetic {
        Some(s) if cfg.data.path.is_none() => {
            let tr = SynthConfig { seed: seed.wrapping_add(cfg.policies.scene_seed_offset), ..s.clone() };
            Ok(generate_scene(&tr)?)
        }
        _ => {
            log::warn!("training on the evaluation data (no synthetic scene configured)");
            Ok(eval.clone())
        }
    }
}

fn load_or_train_policies(
    cfg: &BenchConfig,
    seed: u64,
    train_scene: &SceneDataset,
    out: &Path,
) -> Result<PolicySet, BenchError> {
    if let Some(dir) = &cfg.policies.dir {
        let dir = cfg.resolve(dir);
        // Per-seed subdirectories win over a shared set.
        let per_seed = dir.join(format!("s{seed}"));
        let dir = if per_seed.is_dir() { per_seed } else { dir };
        for s in Strategy::ALL {
            let f = dir.join(PolicySet::file_name(s));
            if !f.is_file() {
                return Err(BenchError::MissingCheckpoint(f));
            }
        }
        return Ok(PolicySet::load_dir(&dir)?);
    }
    let tc = cfg
        .policies
        .training
        .as_ref()
        .ok_or_else(|| BenchError::Config("[policies] needs `dir` or `training`".into()))?;
    let tc = crate::ffagent::TrainConfig { seed: tc.seed.wrapping_add(seed), ..tc.clone() };
    log::info!("seed {seed}: training policies ({} episodes per pace)", tc.episodes);
    let set = train_policy_set(train_scene.views(), &tc)?;
    set.save_dir(out.join("policies").join(format!("s{seed}")))?;
    Ok(set)
}

fn load_or_train_controller(
    cfg: &BenchConfig,
    seed: u64,
    train_scene: &SceneDataset,
    policies: &PolicySet,
) -> Result<Option<DqnControllerPolicy>, BenchError> {
    if !cfg.methods.iter().any(|m| m == "mffnet-dqn") {
        return Ok(None);
    }
    let src = cfg
        .controller
        .as_ref()
        .ok_or_else(|| BenchError::Config("mffnet-dqn needs a [controller] table".into()))?;
    if let Some(p) = &src.path {
        let p = cfg.resolve(p);
        if !p.is_file() {
            return Err(BenchError::MissingCheckpoint(p));
        }
        return Ok(Some(DqnControllerPolicy::load(&p)?));
    }
    let mut tc = src.training.clone().unwrap_or_default();
    tc.train.seed = tc.train.seed.wrapping_add(seed);
    log::info!("seed {seed}: training controller ({} episodes)", tc.train.episodes);
    Ok(Some(train_dqn_controller(train_scene, policies, &tc)?))
}

fn is_networked(method: &str) -> bool {
    matches!(method, "dmvf" | "mffnet" | "mffnet-dqn")
}

fn run_cell(
    cfg: &BenchConfig,
    method: &str,
    seed: u64,
    loss: f64,
    dataset: &SceneDataset,
    policies: &PolicySet,
    controller: Option<&DqnControllerPolicy>,
) -> Result<RunReport, BenchError> {
    let channel = || -> Result<Channel, BenchError> {
        Ok(Channel::with_transport(
            dataset.num_views(),
            &cfg.channel_config(loss, seed),
            cfg.transport.open()?,
        )?)
    };
    let baseline = |kind| BaselineConfig { kind, rate: cfg.baseline_rate, seed };
    Ok(match method {
        "uniform" => run_baseline(dataset, &baseline(BaselineKind::Uniform))?,
        "random" => run_baseline(dataset, &baseline(BaselineKind::Random))?,
        "ffnet" | "ffnet-normal" => run_ffnet(dataset, policies, Strategy::Normal, cfg.period)?,
        "ffnet-slow" => run_ffnet(dataset, policies, Strategy::Slow, cfg.period)?,
        "ffnet-fast" => run_ffnet(dataset, policies, Strategy::Fast, cfg.period)?,
        "dmvf" => {
            let graph = cfg.graph(dataset.num_views())?;
            run_dmvf(dataset, &graph, policies, &cfg.dmvf_config(), &mut channel()?)?
        }
        "mffnet" => run_mffnet(dataset, policies, &cfg.controller_config(), None, &mut channel()?)?,
        "mffnet-dqn" => {
            let dqn = controller.ok_or_else(|| BenchError::Config("no controller loaded".into()))?;
            run_mffnet(dataset, policies, &cfg.controller_config(), Some(dqn), &mut channel()?)?
        }
        other => return Err(BenchError::UnknownMethod(other.to_string())),
    })
}

/// Runs every cell and writes the output tree under `out`. Returns the rows
/// of `summary.csv` in file order.
pub fn run_matrix(cfg: &BenchConfig, out: &Path) -> Result<Vec<CellRow>, BenchError> {
    cfg.validate()?;
    let cells = out.join("cells");
    fs::create_dir_all(&cells).map_err(io_err(&cells))?;
    let mut rows = Vec::new();
    let mut sweep = String::from("seed,rho,coverage,summary_coverage,processing_rate\n");

    for &seed in &cfg.seeds {
        let base = eval_dataset(cfg, seed)?;
        let train_scene = training_dataset(cfg, seed, &base)?;
        let policies = load_or_train_policies(cfg, seed, &train_scene, out)?;
        let controller = load_or_train_controller(cfg, seed, &train_scene, &policies)?;

        if !cfg.rho_sweep.is_empty() {
            for r in sweep_rho(&base, &policies, &cfg.controller_config(), &cfg.rho_sweep, cfg.eval_window)? {
                writeln!(
                    sweep,
                    "{seed},{:.6},{:.6},{:.6},{:.6}",
                    r.rho, r.coverage, r.summary_coverage, r.processing_rate
                )
                .unwrap();
            }
        }

        for &desync in &cfg.desync {
            let dataset = base.apply_desync(cfg.desync_view, desync)?;
            for method in &cfg.methods {
                let losses = if is_networked(method) { &cfg.loss[..] } else { &cfg.loss[..1] };
                for &loss in losses {
                    log::info!("cell {method} seed={seed} loss={loss} desync={desync}");
                    let report =
                        run_cell(cfg, method, seed, loss, &dataset, &policies, controller.as_ref())?;
                    let m = metrics(&report, dataset.global_truth(), cfg.eval_window);
                    let row = CellRow::new(method, seed, loss, desync, &m);
                    let mut extra = vec![
                        ("seed".to_string(), seed.to_string()),
                        ("loss".to_string(), format!("{loss:.4}")),
                        ("desync".to_string(), desync.to_string()),
                        ("coverage".to_string(), format!("{:.6}", m.coverage)),
                        ("processing_rate".to_string(), format!("{:.6}", m.processing_rate)),
                    ];
                    if let Some(sc) = m.summary_coverage {
                        extra.push(("summary_coverage".to_string(), format!("{sc:.6}")));
                    }
                    let name = format!("{method}_s{seed}_l{loss:.4}_d{desync}.report");
                    write_file(&cells.join(name), &report.to_text(&extra))?;
                    rows.push(row);
                }
            }
        }
    }

    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for r in &rows {
        summary.push_str(&r.csv());
        summary.push('\n');
    }
    write_file(&out.join("summary.csv"), &summary)?;
    if !cfg.rho_sweep.is_empty() {
        write_file(&out.join("sweep.csv"), &sweep)?;
    }
    Ok(rows)
}

pub fn read_summary(path: &Path) -> Result<Vec<CellRow>, BenchError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    if lines.next() != Some(SUMMARY_HEADER) {
        return Err(BenchError::Config(format!("{}: unexpected header", path.display())));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            CellRow::parse(l).map_err(|e| BenchError::Config(format!("{}:{}: {e}", path.display(), i + 2)))
        })
        .collect()
}

#[derive(Default)]
struct Acc {
    n: usize,
    coverage: f64,
    summary: f64,
    rate: f64,
    p2p: f64,
    central: f64,
}

/// Averages rows over seeds, grouped by (method, loss, desync), as an
/// aligned plain-text table. Groups keep their first-appearance order.
pub fn format_table(rows: &[CellRow]) -> String {
    let mut order: Vec<(String, String, i64)> = Vec::new();
    let mut acc: BTreeMap<(String, String, i64), Acc> = BTreeMap::new();
    for r in rows {
        let key = (r.method.clone(), format!("{:.4}", r.loss), r.desync);
        if !acc.contains_key(&key) {
            order.push(key.clone());
        }
        let a = acc.entry(key).or_default();
        a.n += 1;
        a.coverage += r.coverage;
        a.summary += r.summary_coverage;
        a.rate += r.processing_rate;
        a.p2p += r.p2p_bytes as f64;
        a.central += r.central_bytes as f64;
    }
    let mut out = format!(
        "{:<12} {:>7} {:>7} {:>6} {:>9} {:>9} {:>9} {:>12} {:>12}\n",
        "method", "loss", "desync", "seeds", "coverage", "summary", "rate(%)", "p2p_bytes", "central_bytes"
    );
    for key in order {
        let a = &acc[&key];
        let n = a.n as f64;
        let summary = if (a.summary / n).is_nan() { "-".to_string() } else { format!("{:.4}", a.summary / n) };
        writeln!(
            out,
            "{:<12} {:>7} {:>7} {:>6} {:>9.4} {:>9} {:>9.3} {:>12.0} {:>12.0}",
            key.0,
            key.1,
            key.2,
            a.n,
            a.coverage / n,
            summary,
            100.0 * a.rate / n,
            a.p2p / n,
            a.central / n
        )
        .unwrap();
    }
    out
}

/// Reads `<dir>/summary.csv` and formats it.
pub fn report(dir: &Path) -> Result<String, BenchError> {
    let path: PathBuf = dir.join("summary.csv");
    Ok(format_table(&read_summary(&path)?))
}
