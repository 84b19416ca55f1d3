//! Frame/stream data model, the binary dataset format, and a synthetic
//! multi-view scene generator with controllable cross-view overlap.
//!
//! Dataset file layout (little-endian):
//!
//! ```text
//! "FFWD" | version u16 (=1) | N u16 | L u32 | D u32
//! N x { view_id u16 | L x label u8 | L*D x f32 (frame-major) }
//! L x global_truth u8
//! ```

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

pub const DATASET_MAGIC: [u8; 4] = *b"FFWD";
pub const DATASET_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 2 + 4 + 4;

/// Fixed seed for the importance signature. It is shared by every generated
/// scene so that a policy trained on one scene transfers to another.
const SIGNATURE_SEED: u64 = 0x5EED_516E;
const SIGNATURE_AMPLITUDE: f32 = 1.5;
const EVENT_STD: f32 = 0.75;
const VIEW_OFFSET_STD: f32 = 0.3;
/// Mean reversion rate of the shared background process (per frame).
const BACKGROUND_THETA: f64 = 1.0 / 200.0;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {found:?}, expected \"FFWD\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported dataset version {0}")]
    VersionMismatch(u16),
    #[error("file truncated at byte offset {offset} ({needed} more bytes needed)")]
    Truncated { offset: usize, needed: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid label byte {value} at offset {offset}")]
    InvalidLabel { offset: usize, value: u8 },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("desync offset {offset} out of range for stream of length {len}")]
    DesyncOutOfRange { offset: i64, len: usize },
    #[error("unknown view {0}")]
    UnknownView(usize),
}

/// One frame: its feature vector and binary importance label.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub feature: Vec<f32>,
    pub important: bool,
}

/// The frames captured by one camera view.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewStream {
    pub view_id: u16,
    pub frames: Vec<FrameRecord>,
    /// Accumulated desync applied with [`SceneDataset::apply_desync`]. Not persisted.
    pub desync_offset: i64,
}

impl ViewStream {
    pub fn new(view_id: u16, frames: Vec<FrameRecord>) -> Self {
        Self { view_id, frames, desync_offset: 0 }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn feature(&self, index: usize) -> &[f32] {
        &self.frames[index].feature
    }

    pub fn labels(&self) -> Vec<bool> {
        self.frames.iter().map(|f| f.important).collect()
    }
}

/// N aligned view streams plus the wall-clock global ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneDataset {
    views: Vec<ViewStream>,
    dim: usize,
    global_truth: Vec<bool>,
}

impl SceneDataset {
    /// Builds a dataset and derives the global truth as the element-wise OR of
    /// the per-view labels.
    pub fn new(views: Vec<ViewStream>, dim: usize) -> Result<Self, FeatureError> {
        validate_views(&views, dim)?;
        let len = views[0].len();
        let global_truth = (0..len)
            .map(|t| views.iter().any(|v| v.frames[t].important))
            .collect();
        Ok(Self { views, dim, global_truth })
    }

    /// Builds a dataset with an externally supplied global truth vector.
    pub fn with_truth(
        views: Vec<ViewStream>,
        dim: usize,
        global_truth: Vec<bool>,
    ) -> Result<Self, FeatureError> {
        validate_views(&views, dim)?;
        if global_truth.len() != views[0].len() {
            return Err(FeatureError::InvalidDataset(format!(
                "global truth has {} entries, streams have {}",
                global_truth.len(),
                views[0].len()
            )));
        }
        Ok(Self { views, dim, global_truth })
    }

    pub fn views(&self) -> &[ViewStream] {
        &self.views
    }

    pub fn view(&self, n: usize) -> &ViewStream {
        &self.views[n]
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    /// Stream length L (shared by all views).
    pub fn len(&self) -> usize {
        self.global_truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global_truth.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn global_truth(&self) -> &[bool] {
        &self.global_truth
    }

    pub fn important_count(&self) -> usize {
        self.global_truth.iter().filter(|&&b| b).count()
    }

    /// Shifts one view by `offset` frames relative to its time tags: the frame
    /// tagged `t` afterwards holds the content originally at `t - offset`.
    /// Edge frames are repeated. The global truth is left untouched.
    pub fn apply_desync(&self, view: usize, offset: i64) -> Result<Self, FeatureError> {
        let len = self.len();
        if view >= self.num_views() {
            return Err(FeatureError::UnknownView(view));
        }
        if offset.unsigned_abs() as usize >= len {
            return Err(FeatureError::DesyncOutOfRange { offset, len });
        }
        let mut out = self.clone();
        if offset == 0 {
            return Ok(out);
        }
        let src = &self.views[view];
        let last = len as i64 - 1;
        let target = &mut out.views[view];
        target.frames = (0..len as i64)
            .map(|t| src.frames[(t - offset).clamp(0, last) as usize].clone())
            .collect();
        target.desync_offset += offset;
        Ok(out)
    }

    /// Replaces every view with a copy of `source` (the extreme-redundancy case).
    pub fn with_identical_views(&self, source: usize) -> Result<Self, FeatureError> {
        let src = self.views.get(source).ok_or(FeatureError::UnknownView(source))?;
        let views = (0..self.num_views())
            .map(|n| ViewStream {
                view_id: n as u16,
                frames: src.frames.clone(),
                desync_offset: src.desync_offset,
            })
            .collect();
        Self::new(views, self.dim)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let len = self.len();
        let mut out = Vec::with_capacity(
            HEADER_LEN + self.num_views() * (2 + len + len * self.dim * 4) + len,
        );
        out.extend_from_slice(&DATASET_MAGIC);
        out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.num_views() as u16).to_le_bytes());
        out.extend_from_slice(&(len as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for view in &self.views {
            out.extend_from_slice(&view.view_id.to_le_bytes());
            out.extend(view.frames.iter().map(|f| f.important as u8));
            for frame in &view.frames {
                for x in &frame.feature {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out.extend(self.global_truth.iter().map(|&b| b as u8));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FeatureError> {
        let mut r = ByteReader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
        if magic != DATASET_MAGIC {
            return Err(FeatureError::BadMagic { found: magic });
        }
        let version = r.u16()?;
        if version != DATASET_VERSION {
            return Err(FeatureError::VersionMismatch(version));
        }
        let n = r.u16()? as usize;
        let len = r.u32()? as usize;
        let dim = r.u32()? as usize;
        if n == 0 || len == 0 || dim == 0 {
            return Err(FeatureError::DimensionMismatch(format!(
                "header declares N={n}, L={len}, D={dim}; all must be positive"
            )));
        }
        let expected = HEADER_LEN + n * (2 + len + len * dim * 4) + len;
        if bytes.len() > expected {
            return Err(FeatureError::DimensionMismatch(format!(
                "header implies {expected} bytes, file has {}",
                bytes.len()
            )));
        }

        let mut views = Vec::with_capacity(n);
        for _ in 0..n {
            let view_id = r.u16()?;
            let label_start = r.pos;
            let labels = r.take(len)?;
            let mut important = Vec::with_capacity(len);
            for (i, &b) in labels.iter().enumerate() {
                important.push(parse_label(b, label_start + i)?);
            }
            let mut frames = Vec::with_capacity(len);
            for imp in important {
                let raw = r.take(dim * 4)?;
                let feature = raw
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                frames.push(FrameRecord { feature, important: imp });
            }
            views.push(ViewStream::new(view_id, frames));
        }
        let truth_start = r.pos;
        let truth = r
            .take(len)?
            .iter()
            .enumerate()
            .map(|(i, &b)| parse_label(b, truth_start + i))
            .collect::<Result<Vec<_>, _>>()?;
        Self::with_truth(views, dim, truth)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

pub fn write_dataset(ds: &SceneDataset, path: impl AsRef<Path>) -> Result<(), FeatureError> {
    ds.write(path)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<SceneDataset, FeatureError> {
    SceneDataset::read(path)
}

fn parse_label(b: u8, offset: usize) -> Result<bool, FeatureError> {
    match b {
        0 => Ok(false),
        1 => Ok(true),
        value => Err(FeatureError::InvalidLabel { offset, value }),
    }
}

fn validate_views(views: &[ViewStream], dim: usize) -> Result<(), FeatureError> {
    let first = views
        .first()
        .ok_or_else(|| FeatureError::InvalidDataset("no views".into()))?;
    if first.is_empty() {
        return Err(FeatureError::InvalidDataset("empty view stream".into()));
    }
    if views.len() > u16::MAX as usize {
        return Err(FeatureError::InvalidDataset("too many views".into()));
    }
    let mut ids: Vec<u16> = views.iter().map(|v| v.view_id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(FeatureError::InvalidDataset("duplicate view id".into()));
    }
    for v in views {
        if v.len() != first.len() {
            return Err(FeatureError::InvalidDataset(format!(
                "view {} has {} frames, view {} has {}",
                v.view_id,
                v.len(),
                first.view_id,
                first.len()
            )));
        }
        for (t, f) in v.frames.iter().enumerate() {
            if f.feature.len() != dim {
                return Err(FeatureError::DimensionMismatch(format!(
                    "view {} frame {t} has {} components, expected {dim}",
                    v.view_id,
                    f.feature.len()
                )));
            }
            if f.feature.iter().any(|x| !x.is_finite()) {
                return Err(FeatureError::InvalidDataset(format!(
                    "view {} frame {t} has a non-finite component",
                    v.view_id
                )));
            }
        }
    }
    Ok(())
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FeatureError> {
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(FeatureError::Truncated { offset: self.pos, needed: n - available });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, FeatureError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, FeatureError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Parameters of the synthetic scene generator.
///
/// Every view observes a shared, slowly drifting background plus a fixed
/// per-view offset. Events are rectangular important segments; each view
/// independently sees an event with probability `overlap`, and all views that
/// see it share the event's base feature.
#[derive(Debug, Clone, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub num_views: usize,
    pub length: usize,
    pub dim: usize,
    pub num_events: usize,
    pub event_len_min: usize,
    pub event_len_max: usize,
    pub overlap: f64,
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_views: 3,
            length: 10_000,
            dim: 64,
            num_events: 40,
            event_len_min: 20,
            event_len_max: 40,
            overlap: 0.7,
            noise_std: 0.3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// The standard benchmark scene (3 views, 10,000 frames, 64-d) for `seed`.
    pub fn standard(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |field, reason: &str| {
            Err(FeatureError::InvalidConfig { field, reason: reason.to_string() })
        };
        if self.num_views < 2 {
            return bad("num_views", "must be at least 2");
        }
        if self.num_views > u16::MAX as usize {
            return bad("num_views", "exceeds u16 range");
        }
        if self.length < 200 {
            return bad("length", "must be at least 200");
        }
        if self.dim == 0 {
            return bad("dim", "must be positive");
        }
        if self.event_len_min == 0 {
            return bad("event_len_min", "must be positive");
        }
        if self.event_len_max < self.event_len_min {
            return bad("event_len_max", "must be >= event_len_min");
        }
        if self.num_events > 0 && self.length / self.num_events < self.event_len_max {
            return bad("num_events", "events of maximal length do not fit without overlap");
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return bad("overlap", "must lie in [0, 1]");
        }
        if !self.noise_std.is_finite() || self.noise_std < 0.0 {
            return bad("noise_std", "must be finite and non-negative");
        }
        Ok(())
    }
}

/// The fixed direction that marks important content in generated scenes.
pub fn importance_signature(dim: usize) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(SIGNATURE_SEED);
    (0..dim)
        .map(|_| if rng.random::<bool>() { SIGNATURE_AMPLITUDE } else { -SIGNATURE_AMPLITUDE })
        .collect()
}

struct Event {
    start: usize,
    len: usize,
    base: Vec<f32>,
    seen_by: Vec<bool>,
}

pub fn generate_scene(cfg: &SynthConfig) -> Result<SceneDataset, FeatureError> {
    cfg.validate()?;
    let (n, len, dim) = (cfg.num_views, cfg.length, cfg.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    noise_rng.set_stream(1);
    let std_normal = Normal::new(0.0f64, 1.0).unwrap();

    let signature = importance_signature(dim);
    let offsets: Vec<Vec<f32>> = (0..n)
        .map(|_| (0..dim).map(|_| sample(&std_normal, &mut rng) * VIEW_OFFSET_STD).collect())
        .collect();

    // Ornstein-Uhlenbeck background with unit stationary variance.
    let keep = 1.0 - BACKGROUND_THETA;
    let step = (1.0 - keep * keep).sqrt();
    let mut background = Vec::with_capacity(len);
    let mut state: Vec<f64> = (0..dim).map(|_| std_normal.sample(&mut rng)).collect();
    for _ in 0..len {
        background.push(state.iter().map(|&x| x as f32).collect::<Vec<f32>>());
        for x in state.iter_mut() {
            *x = *x * keep + step * std_normal.sample(&mut rng);
        }
    }

    let mut events = Vec::with_capacity(cfg.num_events);
    if cfg.num_events > 0 {
        let slot = len / cfg.num_events;
        for e in 0..cfg.num_events {
            let ev_len = rng.random_range(cfg.event_len_min..=cfg.event_len_max);
            let start = e * slot + rng.random_range(0..=slot - ev_len);
            let base: Vec<f32> = signature
                .iter()
                .map(|&s| s + sample(&std_normal, &mut rng) * EVENT_STD)
                .collect();
            let mut seen_by: Vec<bool> = (0..n).map(|_| rng.random_bool(cfg.overlap)).collect();
            if !seen_by.iter().any(|&b| b) {
                seen_by[rng.random_range(0..n)] = true;
            }
            events.push(Event { start, len: ev_len, base, seen_by });
        }
    }

    let mut views = Vec::with_capacity(n);
    for v in 0..n {
        let mut frames: Vec<FrameRecord> = (0..len)
            .map(|t| FrameRecord {
                feature: background[t].iter().zip(&offsets[v]).map(|(b, o)| b + o).collect(),
                important: false,
            })
            .collect();
        for ev in events.iter().filter(|ev| ev.seen_by[v]) {
            for frame in &mut frames[ev.start..ev.start + ev.len] {
                frame.important = true;
                for (x, b) in frame.feature.iter_mut().zip(&ev.base) {
                    *x += b;
                }
            }
        }
        if cfg.noise_std > 0.0 {
            let noise = cfg.noise_std as f32;
            for frame in &mut frames {
                for x in frame.feature.iter_mut() {
                    *x += sample(&std_normal, &mut noise_rng) * noise;
                }
            }
        }
        views.push(ViewStream::new(v as u16, frames));
    }
    SceneDataset::new(views, dim)
}

fn sample(dist: &Normal<f64>, rng: &mut ChaCha8Rng) -> f32 {
    dist.sample(rng) as f32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            num_views: 3,
            length: 400,
            dim: 8,
            num_events: 4,
            event_len_min: 10,
            event_len_max: 20,
            overlap: 0.6,
            noise_std: 0.3,
            seed,
        }
    }

    #[test]
    fn full_overlap_gives_identical_labels() {
        let ds = generate_scene(&SynthConfig { overlap: 1.0, ..small(3) }).unwrap();
        let first = ds.view(0).labels();
        assert!(first.iter().any(|&b| b));
        for v in ds.views() {
            assert_eq!(v.labels(), first);
        }
    }

    #[test]
    fn noiseless_views_differ_by_a_constant_offset() {
        let ds = generate_scene(&SynthConfig { overlap: 1.0, noise_std: 0.0, ..small(9) }).unwrap();
        let (a, b) = (ds.view(0), ds.view(2));
        let offset: Vec<f32> = a.feature(0).iter().zip(b.feature(0)).map(|(x, y)| x - y).collect();
        for t in 0..ds.len() {
            for (d, (x, y)) in a.feature(t).iter().zip(b.feature(t)).enumerate() {
                assert!((x - y - offset[d]).abs() < 1e-4, "t={t} d={d}");
            }
        }
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let a = generate_scene(&small(42)).unwrap().to_bytes();
        let b = generate_scene(&small(42)).unwrap().to_bytes();
        let c = generate_scene(&small(43)).unwrap().to_bytes();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn global_truth_is_elementwise_or() {
        let ds = generate_scene(&small(5)).unwrap();
        for t in 0..ds.len() {
            let any = ds.views().iter().any(|v| v.frames[t].important);
            assert_eq!(ds.global_truth()[t], any);
        }
    }

    #[test]
    fn invalid_config_names_the_field() {
        let err = generate_scene(&SynthConfig { num_views: 1, ..small(0) }).unwrap_err();
        assert!(matches!(err, FeatureError::InvalidConfig { field: "num_views", .. }));
        let err = generate_scene(&SynthConfig { length: 100, ..small(0) }).unwrap_err();
        assert!(matches!(err, FeatureError::InvalidConfig { field: "length", .. }));
        let err = generate_scene(&SynthConfig { overlap: 1.5, ..small(0) }).unwrap_err();
        assert!(matches!(err, FeatureError::InvalidConfig { field: "overlap", .. }));
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let mut bytes = generate_scene(&small(1)).unwrap().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(SceneDataset::from_bytes(&bytes), Err(FeatureError::BadMagic { .. })));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let mut bytes = generate_scene(&small(1)).unwrap().to_bytes();
        bytes[4] = 2;
        assert!(matches!(SceneDataset::from_bytes(&bytes), Err(FeatureError::VersionMismatch(2))));
    }

    #[test]
    fn truncation_reports_byte_offset() {
        let ds = generate_scene(&small(1)).unwrap();
        let bytes = ds.to_bytes();
        // Cut in the middle of view 0, frame 3: header, view id, labels, 3 full frames, 5 bytes.
        let frame_start = HEADER_LEN + 2 + ds.len() + 3 * ds.dim() * 4;
        let cut = frame_start + 5;
        match SceneDataset::from_bytes(&bytes[..cut]) {
            Err(FeatureError::Truncated { offset, needed }) => {
                assert_eq!(offset, frame_start);
                assert_eq!(needed, ds.dim() * 4 - 5);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn trailing_bytes_are_a_dimension_mismatch() {
        let mut bytes = generate_scene(&small(1)).unwrap().to_bytes();
        bytes.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(
            SceneDataset::from_bytes(&bytes),
            Err(FeatureError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn bad_label_byte_is_rejected() {
        let mut bytes = generate_scene(&small(1)).unwrap().to_bytes();
        bytes[HEADER_LEN + 2] = 7;
        assert!(matches!(
            SceneDataset::from_bytes(&bytes),
            Err(FeatureError::InvalidLabel { offset, value: 7 }) if offset == HEADER_LEN + 2
        ));
    }

    #[test]
    fn file_round_trip() {
        let ds = generate_scene(&small(11)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.ffwd");
        write_dataset(&ds, &path).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), ds);
    }

    #[test]
    fn desync_zero_is_identity() {
        let ds = generate_scene(&small(2)).unwrap();
        assert_eq!(ds.apply_desync(1, 0).unwrap(), ds);
    }

    #[test]
    fn desync_forward_then_back_restores_interior() {
        let ds = generate_scene(&small(2)).unwrap();
        let back = ds.apply_desync(1, 20).unwrap().apply_desync(1, -20).unwrap();
        for t in 0..ds.len() - 20 {
            assert_eq!(back.view(1).frames[t], ds.view(1).frames[t], "t={t}");
        }
        assert_eq!(back.global_truth(), ds.global_truth());
        assert_eq!(back.view(1).desync_offset, 0);
    }

    #[test]
    fn positive_desync_repeats_first_frame() {
        let ds = generate_scene(&SynthConfig { length: 1000, num_events: 10, ..small(4) }).unwrap();
        let shifted = ds.apply_desync(0, 100).unwrap();
        for t in 0..=100 {
            assert_eq!(shifted.view(0).frames[t], ds.view(0).frames[0]);
        }
        assert_eq!(shifted.view(0).frames[101], ds.view(0).frames[1]);
        assert_eq!(shifted.view(0).frames[999], ds.view(0).frames[899]);
        assert_eq!(shifted.view(1), ds.view(1));
        assert_eq!(shifted.global_truth(), ds.global_truth());
    }

    #[test]
    fn desync_out_of_range() {
        let ds = generate_scene(&small(2)).unwrap();
        assert!(matches!(
            ds.apply_desync(0, ds.len() as i64),
            Err(FeatureError::DesyncOutOfRange { .. })
        ));
    }

    #[test]
    fn identical_views_copy_the_source() {
        let ds = generate_scene(&small(8)).unwrap().with_identical_views(0).unwrap();
        for v in ds.views() {
            assert_eq!(v.frames, ds.view(0).frames);
        }
    }
}
