//! End-to-end runs of every method with fixed skips, checked structurally.

use ffward_core::baselines::{run_baseline, BaselineConfig, BaselineKind};
use ffward_core::bench::{metrics, run_ffnet};
use ffward_core::dmvf::{run_dmvf, CommGraph, DmvfConfig, Portions, ScoreWeight};
use ffward_core::features::{generate_scene, SceneDataset, SynthConfig};
use ffward_core::ffagent::{ConstantBank, Strategy};
use ffward_core::mffnet::{run_mffnet, ControllerConfig};
use ffward_core::netsim::{Channel, ChannelConfig, TransportKind};
use ffward_core::run::RunReport;

fn scene(views: usize) -> SceneDataset {
    generate_scene(&SynthConfig { num_views: views, length: 2000, dim: 16, num_events: 10, ..SynthConfig::standard(21) })
        .unwrap()
}

fn bank() -> ConstantBank {
    ConstantBank::new(2, 4, 8)
}

fn round_trips(r: &RunReport) {
    let text = r.to_text(&[("note".into(), "x".into())]);
    let (back, extra) = RunReport::from_text(&text).unwrap();
    assert_eq!(&back, r);
    assert_eq!(extra["note"], "x");
}

#[test]
fn dmvf_on_ring_of_six() {
    let ds = scene(6);
    let graph = CommGraph::ring(6).unwrap();
    for weight in [ScoreWeight::NeighborhoodSize, ScoreWeight::Uniform] {
        let cfg = DmvfConfig { weight, ..DmvfConfig::default() };
        let mut ch = Channel::new(6, &ChannelConfig::lossless()).unwrap();
        let r = run_dmvf(&ds, &graph, &bank(), &cfg, &mut ch).unwrap();
        assert!(r.is_consistent());
        assert_eq!(r.periods.len(), 20);
        let portions = Portions::even(6);
        for p in &r.periods {
            for s in Strategy::ALL {
                assert_eq!(p.strategies.iter().filter(|x| **x == s).count(), portions.count(s));
            }
            assert_eq!(p.scores.as_ref().unwrap().len(), 6);
        }
        assert_eq!(r.comm.central.attempted_msgs, 0);
        assert_eq!(r.comm.p2p.attempted_bytes, r.comm.p2p.histogram_bytes());
        round_trips(&r);
    }
}

#[test]
fn mffnet_report_shape() {
    let ds = scene(3);
    let mut ch = Channel::new(3, &ChannelConfig::lossless()).unwrap();
    let r = run_mffnet(&ds, &bank(), &ControllerConfig::default(), None, &mut ch).unwrap();
    assert!(r.is_consistent());
    assert_eq!(r.periods[0].strategies, vec![Strategy::Normal; 3]);
    assert_eq!(r.comm.p2p.attempted_msgs, 0);
    let delivered = r.delivered.as_ref().unwrap();
    assert_eq!(delivered, &r.selected_union());
    assert!(r.summary.as_ref().unwrap().iter().all(|&f| f < ds.len()));
    // Main views picked from one period's buffers run Slow in the next.
    for w in r.periods.windows(2) {
        for &m in w[0].main_views.as_deref().unwrap_or(&[]) {
            assert_eq!(w[1].strategies[m], Strategy::Slow);
        }
    }
    let m = metrics(&r, ds.global_truth(), 4);
    assert!(m.summary_coverage.is_some());
    assert!(m.central_bytes > 0 && m.p2p_bytes == 0);
    round_trips(&r);
}

#[test]
fn transports_agree_at_zero_loss() {
    let ds = scene(3);
    let graph = CommGraph::path(3).unwrap();
    let texts: Vec<(String, String)> = [TransportKind::Direct, TransportKind::Codec, TransportKind::Socket]
        .into_iter()
        .map(|k| {
            let mut a = Channel::with_transport(3, &ChannelConfig::lossless(), k.open().unwrap()).unwrap();
            let mut b = Channel::with_transport(3, &ChannelConfig::lossless(), k.open().unwrap()).unwrap();
            (
                run_dmvf(&ds, &graph, &bank(), &DmvfConfig::default(), &mut a).unwrap().to_text(&[]),
                run_mffnet(&ds, &bank(), &ControllerConfig::default(), None, &mut b).unwrap().to_text(&[]),
            )
        })
        .collect();
    assert!(texts.iter().all(|t| t == &texts[0]));
}

#[test]
fn single_agent_methods() {
    let ds = scene(3);
    let ff = run_ffnet(&ds, &bank(), Strategy::Fast, 100).unwrap();
    assert!(ff.is_consistent());
    // Skip 8 from frame 0: one frame in nine.
    assert_eq!(ff.total_processed(), 3 * 2000usize.div_ceil(9));
    let uni = run_baseline(&ds, &BaselineConfig { kind: BaselineKind::Uniform, rate: 0.04, seed: 0 }).unwrap();
    assert!((uni.processing_rate() - 0.04).abs() < 1e-12);
    let rnd = run_baseline(&ds, &BaselineConfig { kind: BaselineKind::Random, rate: 0.04, seed: 3 }).unwrap();
    assert!((rnd.processing_rate() - 0.04).abs() < 0.02);
    round_trips(&uni);
}

#[test]
fn desynced_runs_complete() {
    let ds = scene(3);
    for off in [-100, -20, 20, 100] {
        let shifted = ds.apply_desync(1, off).unwrap();
        let mut ch = Channel::new(3, &ChannelConfig::lossless()).unwrap();
        assert!(run_mffnet(&shifted, &bank(), &ControllerConfig::default(), None, &mut ch).unwrap().is_consistent());
        let mut ch = Channel::new(3, &ChannelConfig::lossless()).unwrap();
        let r = run_dmvf(&shifted, &CommGraph::complete(3).unwrap(), &bank(), &DmvfConfig::default(), &mut ch).unwrap();
        assert!(r.is_consistent());
    }
}
