//! Frame and agent similarity, and thresholded match counting.

use thiserror::Error;

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_RHO: f64 = 0.525;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("feature dimensions differ ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("empty frame set: {0}")]
    EmptySet(&'static str),
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, serde::Serialize)]
pub struct SimParams {
    pub alpha: f64,
    pub rho: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA, rho: DEFAULT_RHO }
    }
}

impl SimParams {
    pub fn new(alpha: f64, rho: f64) -> Result<Self, SimError> {
        let p = Self { alpha, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(SimError::InvalidParam { field: "alpha", reason: format!("{} is not > 0", self.alpha) });
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(SimError::InvalidParam { field: "rho", reason: format!("{} is outside (0, 1)", self.rho) });
        }
        Ok(())
    }
}

fn distance(x: &[f32], y: &[f32]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `exp(-alpha * ||x - y||_2)`.
pub fn frame_sim(x: &[f32], y: &[f32], alpha: f64) -> Result<f64, SimError> {
    if x.len() != y.len() {
        return Err(SimError::DimensionMismatch { left: x.len(), right: y.len() });
    }
    Ok((-alpha * distance(x, y)).exp())
}

/// Highest similarity between `x` and any member of `set`.
pub fn best_match<F: AsRef<[f32]>>(x: &[f32], set: &[F], alpha: f64) -> Result<f64, SimError> {
    if set.is_empty() {
        return Err(SimError::EmptySet("reference set"));
    }
    let mut best = 0.0f64;
    for y in set {
        best = best.max(frame_sim(x, y.as_ref(), alpha)?);
    }
    Ok(best)
}

/// Similarity of set `frames_j` to set `frames_i`: the mean over `frames_j`
/// of each frame's best match in `frames_i`. Not symmetric.
pub fn agent_sim<A: AsRef<[f32]>, B: AsRef<[f32]>>(
    frames_j: &[A],
    frames_i: &[B],
    alpha: f64,
) -> Result<f64, SimError> {
    if frames_j.is_empty() {
        return Err(SimError::EmptySet("frames_j"));
    }
    if frames_i.is_empty() {
        return Err(SimError::EmptySet("frames_i"));
    }
    let mut total = 0.0;
    for s in frames_j {
        total += best_match(s.as_ref(), frames_i, alpha)?;
    }
    Ok(total / frames_j.len() as f64)
}

/// Number of frames in `u` whose best match in `v` is strictly above `rho`.
pub fn match_count<A: AsRef<[f32]>, B: AsRef<[f32]>>(
    u: &[A],
    v: &[B],
    params: &SimParams,
) -> Result<usize, SimError> {
    if v.is_empty() {
        if u.is_empty() {
            return Ok(0);
        }
        return Err(SimError::EmptySet("match reference set"));
    }
    let mut count = 0;
    for x in u {
        if best_match(x.as_ref(), v, params.alpha)? > params.rho {
            count += 1;
        }
    }
    Ok(count)
}

/// Cached best-match similarities between frame groups: entry
/// `[i][k][j]` is the best similarity of frame `k` of group `i` within group
/// `j` (0 when group `j` is empty). Match counts against any union of groups
/// then reduce to a max over the cached columns.
#[derive(Debug, Clone)]
pub struct BestMatchTable {
    best: Vec<Vec<Vec<f64>>>,
}

impl BestMatchTable {
    pub fn build<F: AsRef<[f32]>>(groups: &[Vec<F>], alpha: f64) -> Result<Self, SimError> {
        let n = groups.len();
        let mut best: Vec<Vec<Vec<f64>>> = groups
            .iter()
            .map(|g| vec![vec![0.0; n]; g.len()])
            .collect();
        for i in 0..n {
            for (k, x) in groups[i].iter().enumerate() {
                for j in 0..n {
                    if i == j {
                        best[i][k][j] = 1.0;
                        continue;
                    }
                    if groups[j].is_empty() {
                        continue;
                    }
                    best[i][k][j] = best_match(x.as_ref(), &groups[j], alpha)?;
                }
            }
        }
        Ok(Self { best })
    }

    pub fn num_groups(&self) -> usize {
        self.best.len()
    }

    pub fn group_len(&self, i: usize) -> usize {
        self.best[i].len()
    }

    /// Best similarity of frame `k` of group `i` against group `j`.
    pub fn get(&self, i: usize, k: usize, j: usize) -> f64 {
        self.best[i][k][j]
    }

    /// Match count of group `i` against the union of the groups whose bits
    /// are set in `mask`.
    pub fn match_count_union(&self, i: usize, mask: u64, rho: f64) -> usize {
        self.best[i]
            .iter()
            .filter(|row| {
                row.iter()
                    .enumerate()
                    .filter(|&(j, _)| mask >> j & 1 == 1)
                    .any(|(_, &s)| s > rho)
            })
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(rho: f64) -> SimParams {
        SimParams::new(DEFAULT_ALPHA, rho).unwrap()
    }

    #[test]
    fn identical_frames_have_unit_similarity() {
        let x = [0.3f32, -1.2, 4.0];
        assert_eq!(frame_sim(&x, &x, 0.05).unwrap(), 1.0);
    }

    #[test]
    fn distance_twenty_gives_inverse_e() {
        let x = [0.0f32; 4];
        let y = [20.0f32, 0.0, 0.0, 0.0];
        let s = frame_sim(&x, &y, 0.05).unwrap();
        assert!((s - (-1.0f64).exp()).abs() < 1e-12);
        assert!((s - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        assert_eq!(
            frame_sim(&[0.0], &[0.0, 1.0], 0.05),
            Err(SimError::DimensionMismatch { left: 1, right: 2 })
        );
    }

    #[test]
    fn params_validated() {
        assert!(SimParams::new(0.0, 0.5).is_err());
        assert!(SimParams::new(0.05, 1.0).is_err());
        assert!(SimParams::new(0.05, 0.0).is_err());
        assert!(SimParams::new(0.05, 0.5).is_ok());
    }

    /// A point at distance `d` from the origin along the first axis.
    fn at(d: f64) -> Vec<f32> {
        vec![d as f32, 0.0]
    }

    fn dist_for(sim: f64) -> f64 {
        -sim.ln() / DEFAULT_ALPHA
    }

    #[test]
    fn agent_sim_examples() {
        let origin = vec![at(0.0)];
        let single = vec![at(dist_for(0.4))];
        assert!((agent_sim(&single, &origin, 0.05).unwrap() - 0.4).abs() < 1e-6);

        let two = vec![at(dist_for(0.9)), at(-dist_for(0.5))];
        assert!((agent_sim(&two, &origin, 0.05).unwrap() - 0.7).abs() < 1e-6);

        let sup = vec![at(1.0), at(2.0), at(3.0)];
        let sub = vec![at(3.0), at(1.0)];
        assert_eq!(agent_sim(&sub, &sup, 0.05).unwrap(), 1.0);

        let empty: Vec<Vec<f32>> = vec![];
        assert!(agent_sim(&empty, &origin, 0.05).is_err());
        assert!(agent_sim(&origin, &empty, 0.05).is_err());
    }

    #[test]
    fn match_count_examples() {
        let u = vec![at(0.0), at(1.0), at(2.0)];
        assert_eq!(match_count(&u, &u, &p(0.99)).unwrap(), 3);

        let far = vec![vec![0.0f32, 500.0]];
        assert_eq!(match_count(&u, &far, &p(0.9)).unwrap(), 0);

        // Three of five frames have a near duplicate in v.
        let u: Vec<Vec<f32>> = (0..5).map(|k| vec![k as f32 * 100.0, 0.0]).collect();
        let v = vec![vec![0.5f32, 0.0], vec![200.0, 0.5], vec![399.5, 0.0]];
        let scan = u
            .iter()
            .filter(|x| v.iter().any(|y| frame_sim(x, y, 0.05).unwrap() > 0.9))
            .count();
        assert_eq!(scan, 3);
        assert_eq!(match_count(&u, &v, &p(0.9)).unwrap(), 3);
    }

    #[test]
    fn match_threshold_is_strict() {
        let rho = (-0.05f64 * 10.0).exp();
        let u = vec![at(0.0)];
        let v = vec![at(10.0)];
        let s = frame_sim(&u[0], &v[0], 0.05).unwrap();
        let params = SimParams { alpha: 0.05, rho: s };
        assert_eq!(match_count(&u, &v, &params).unwrap(), 0);
        assert!((s - rho).abs() < 1e-12);
    }

    #[test]
    fn empty_reference_set() {
        let u = vec![at(0.0)];
        let empty: Vec<Vec<f32>> = vec![];
        assert!(match_count(&u, &empty, &p(0.5)).is_err());
        assert_eq!(match_count(&empty, &empty, &p(0.5)).unwrap(), 0);
    }

    fn vecs(dim: usize, max: usize) -> impl Strategy<Value = Vec<Vec<f32>>> {
        prop::collection::vec(prop::collection::vec(-30.0f32..30.0, dim), 1..max)
    }

    proptest! {
        #[test]
        fn sim_symmetric_and_bounded(x in prop::collection::vec(-50.0f32..50.0, 6),
                                     y in prop::collection::vec(-50.0f32..50.0, 6)) {
            let a = frame_sim(&x, &y, 0.05).unwrap();
            let b = frame_sim(&y, &x, 0.05).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a > 0.0 && a <= 1.0);
        }

        #[test]
        fn sim_strictly_decreasing_in_distance(d1 in 0.0f64..200.0, gap in 0.01f64..50.0) {
            let o = at(0.0);
            prop_assert!(frame_sim(&o, &at(d1), 0.05).unwrap() > frame_sim(&o, &at(d1 + gap), 0.05).unwrap());
        }

        #[test]
        fn match_count_monotone_in_reference(u in vecs(4, 8), v in vecs(4, 8), extra in vecs(4, 4),
                                              rho in 0.05f64..0.95) {
            let params = p(rho);
            let base = match_count(&u, &v, &params).unwrap();
            let mut bigger = v.clone();
            bigger.extend(extra);
            let more = match_count(&u, &bigger, &params).unwrap();
            prop_assert!(more >= base);
            prop_assert!(base <= u.len());
        }

        #[test]
        fn subset_agent_sim_is_one(v in vecs(5, 10), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..6)) {
            let sub: Vec<Vec<f32>> = picks.iter().map(|i| v[i.index(v.len())].clone()).collect();
            prop_assert_eq!(agent_sim(&sub, &v, 0.05).unwrap(), 1.0);
        }

        #[test]
        fn table_agrees_with_direct_count(groups in prop::collection::vec(vecs(3, 5), 2..5),
                                          mask_seed in any::<u64>(), rho in 0.1f64..0.9) {
            let n = groups.len();
            let table = BestMatchTable::build(&groups, 0.05).unwrap();
            let mask = (mask_seed % ((1u64 << n) - 1)) + 1;
            let union: Vec<Vec<f32>> = (0..n).filter(|j| mask >> j & 1 == 1)
                .flat_map(|j| groups[j].clone()).collect();
            for i in 0..n {
                let direct = match_count(&groups[i], &union, &p(rho)).unwrap();
                prop_assert_eq!(table.match_count_union(i, mask, rho), direct);
            }
        }
    }
}
