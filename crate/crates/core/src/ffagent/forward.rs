use crate::features::ViewStream;

use super::{AgentError, Strategy};

/// Anything that decides how many frames to skip after looking at one frame.
pub trait SkipPolicy {
    /// Expected feature length, if the policy cares.
    fn input_dim(&self) -> Option<usize> {
        None
    }

    /// Number of frames to skip (at least 1).
    fn choose(&self, feature: &[f32]) -> usize;
}

impl<P: SkipPolicy + ?Sized> SkipPolicy for &P {
    fn input_dim(&self) -> Option<usize> {
        (**self).input_dim()
    }

    fn choose(&self, feature: &[f32]) -> usize {
        (**self).choose(feature)
    }
}

/// Always skips the same number of frames.
#[derive(Debug, Clone, Copy)]
pub struct ConstantSkip(pub usize);

impl SkipPolicy for ConstantSkip {
    fn choose(&self, _feature: &[f32]) -> usize {
        self.0
    }
}

/// One skip policy per strategy.
pub trait PolicyBank {
    fn policy(&self, strategy: Strategy) -> &dyn SkipPolicy;

    /// Checks every policy against the feature dimension `dim`.
    fn check_dim(&self, dim: usize) -> Result<(), AgentError> {
        for s in Strategy::ALL {
            if let Some(expected) = self.policy(s).input_dim() {
                if expected != dim {
                    return Err(AgentError::DimensionMismatch { expected, got: dim });
                }
            }
        }
        Ok(())
    }
}

/// Fixed skips per strategy, indexed by strategy code.
#[derive(Debug, Clone, Copy)]
pub struct ConstantBank(pub [ConstantSkip; 3]);

impl ConstantBank {
    pub fn new(slow: usize, normal: usize, fast: usize) -> Self {
        Self([ConstantSkip(slow), ConstantSkip(normal), ConstantSkip(fast)])
    }
}

impl PolicyBank for ConstantBank {
    fn policy(&self, strategy: Strategy) -> &dyn SkipPolicy {
        &self.0[strategy.code() as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionResult {
    pub selected: Vec<usize>,
    /// Forward passes made; equal to `selected.len()`.
    pub processed: usize,
}

/// The next frame an agent will process. Persists across adaptation periods so
/// a skip that crosses a period boundary lands in the next period.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AgentCursor {
    pub next: usize,
}

impl AgentCursor {
    pub fn at(next: usize) -> Self {
        Self { next }
    }

    /// Processes frames until the cursor reaches `end` (or the stream ends) and
    /// returns the processed indices. Frames in between are never touched.
    pub fn advance<P: SkipPolicy + ?Sized>(
        &mut self,
        policy: &P,
        stream: &ViewStream,
        end: usize,
    ) -> Vec<usize> {
        let end = end.min(stream.len());
        let mut selected = Vec::new();
        while self.next < end {
            let k = self.next;
            selected.push(k);
            let skip = policy.choose(stream.feature(k)).max(1);
            self.next = k + skip + 1;
        }
        selected
    }
}

/// Greedy fast-forwarding of a whole stream from `start`.
pub fn fast_forward<P: SkipPolicy + ?Sized>(
    policy: &P,
    stream: &ViewStream,
    start: usize,
) -> Result<SelectionResult, AgentError> {
    if let (Some(expected), Some(frame)) = (policy.input_dim(), stream.frames.first()) {
        if frame.feature.len() != expected {
            return Err(AgentError::DimensionMismatch { expected, got: frame.feature.len() });
        }
    }
    let selected = AgentCursor::at(start).advance(policy, stream, stream.len());
    Ok(SelectionResult { processed: selected.len(), selected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FrameRecord;

    fn stream(len: usize) -> ViewStream {
        ViewStream::new(
            0,
            (0..len).map(|t| FrameRecord { feature: vec![t as f32], important: false }).collect(),
        )
    }

    #[test]
    fn skip_one_takes_every_other_frame() {
        let r = fast_forward(&ConstantSkip(1), &stream(10), 0).unwrap();
        assert_eq!(r.selected, vec![0, 2, 4, 6, 8]);
        assert_eq!(r.processed, 5);
    }

    #[test]
    fn max_normal_skip_on_1000_frames() {
        let r = fast_forward(&ConstantSkip(25), &stream(1000), 0).unwrap();
        assert_eq!(r.processed, 39);
        assert_eq!(r.processed, 1000usize.div_ceil(26));
        assert!((r.processed as f64 / 1000.0 - 0.039).abs() < 1e-12);
    }

    #[test]
    fn start_at_last_frame() {
        let r = fast_forward(&ConstantSkip(3), &stream(50), 49).unwrap();
        assert_eq!(r.selected, vec![49]);
        assert_eq!(r.processed, 1);
    }

    #[test]
    fn cursor_carries_across_periods() {
        let s = stream(30);
        let mut cursor = AgentCursor::default();
        let a = cursor.advance(&ConstantSkip(7), &s, 10);
        assert_eq!(a, vec![0, 8]);
        assert_eq!(cursor.next, 16);
        let b = cursor.advance(&ConstantSkip(7), &s, 20);
        assert_eq!(b, vec![16]);
        let c = cursor.advance(&ConstantSkip(7), &s, 30);
        assert_eq!(c, vec![24]);
    }
}
