//! Adaptive dyadic partition of a state's support and the squeezing ladder
//! that sizes a probed region.
//!
//! An interval passes the weight condition when its diagonal probability
//! mass `int rho(y, y) dy` is at most `epsilon`. The circuit tests it through
//! the branch click probability, which equals half that mass, against
//! `epsilon / 2`.

use std::f64::consts::LN_2;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{sample_index, QuadratureSpec, RandomStream};
use crate::protocol::{branch_probability, chernoff_condition_shots, Branch, CircuitSettings};
use crate::states::{diagonal_weight, DensityKernel};

/// Closed interval stored by its endpoints, so that neighbouring cells share
/// endpoints bit for bit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "IntervalRepr", try_from = "IntervalRepr")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

#[derive(Serialize, Deserialize)]
struct IntervalRepr {
    center: f64,
    width: f64,
}

impl From<Interval> for IntervalRepr {
    fn from(i: Interval) -> Self {
        Self {
            center: i.center(),
            width: i.width(),
        }
    }
}

impl TryFrom<IntervalRepr> for Interval {
    type Error = Error;

    fn try_from(r: IntervalRepr) -> Result<Self> {
        Interval::from_center_width(r.center, r.width)
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(invalid(format!("interval [{lo}, {hi}] must be finite with positive width")));
        }
        Ok(Self { lo, hi })
    }

    pub fn from_center_width(center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite() && center.is_finite()) {
            return Err(invalid(format!("interval width must be positive, got {width}")));
        }
        Self::new(center - 0.5 * width, center + 0.5 * width)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// The interval scaled by `2^doublings` about its center.
    pub fn dilated(&self, doublings: u32) -> Result<Self> {
        let factor = 2f64.powi(doublings as i32);
        Self::from_center_width(self.center(), self.width() * factor)
    }

    /// Sub-interval `index` of `2^depth` equal pieces. Endpoints are exact
    /// binary fractions of the width added to `lo`, so a given point is
    /// computed identically from every depth.
    pub fn dyadic_piece(&self, depth: u32, index: u64) -> Result<Self> {
        let pieces = 1u64
            .checked_shl(depth)
            .filter(|_| depth < 63)
            .ok_or_else(|| invalid(format!("dyadic depth {depth} too large")))?;
        if index >= pieces {
            return Err(invalid(format!("piece {index} out of {pieces}")));
        }
        let edge = |k: u64| {
            if k == pieces {
                self.hi
            } else {
                let (num, den) = reduce(k, pieces);
                self.lo + self.width() * (num as f64 / den as f64)
            }
        };
        Self::new(edge(index), edge(index + 1))
    }
}

// k / 2^d in lowest terms, so every depth yields the same float for a point
fn reduce(mut num: u64, mut den: u64) -> (u64, u64) {
    if num == 0 {
        return (0, 1);
    }
    while num.is_multiple_of(2) {
        num /= 2;
        den /= 2;
    }
    (num, den)
}

/// Rectangle `row x col` in the `(x, x')` plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub row: Interval,
    pub col: Interval,
}

impl Region {
    pub fn new(row: Interval, col: Interval) -> Self {
        Self { row, col }
    }
}

/// Statistical settings for sampled-mode runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    /// Target uncertainty of each element estimate.
    pub shots_epsilon: f64,
    /// Failure probability of the Chernoff bounds.
    pub fail_prob: f64,
    /// Multiplier applied to the Chernoff shot count of element estimates.
    pub shot_scale: f64,
}

impl SamplingPlan {
    pub fn new(shots_epsilon: f64, fail_prob: f64) -> Self {
        Self {
            shots_epsilon,
            fail_prob,
            shot_scale: 1.0,
        }
    }
}

/// Exact mode evaluates every expectation by quadrature; sampled mode draws
/// shots from the exact outcome distributions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Sampled(SamplingPlan),
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Sampled(_) => "sampled",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementConfig {
    pub epsilon_weight: f64,
    pub tail_mass: f64,
    pub max_depth: u32,
    pub mode: Mode,
    /// Shots per weight-condition test in sampled mode.
    pub condition_shots: u64,
    /// Starting interval of the support search.
    pub seed_interval: Interval,
    pub quadrature: QuadratureSpec,
}

pub const DEFAULT_TAIL_MASS: f64 = 1e-6;
pub const DEFAULT_MAX_DEPTH: u32 = 40;
pub const DEFAULT_SEED_HALF_WIDTH: f64 = 1.5;

impl RefinementConfig {
    pub fn new(epsilon_weight: f64) -> Result<Self> {
        let cfg = Self {
            epsilon_weight,
            tail_mass: DEFAULT_TAIL_MASS,
            max_depth: DEFAULT_MAX_DEPTH,
            mode: Mode::Exact,
            condition_shots: chernoff_condition_shots(0.01, 0.05)?,
            seed_interval: Interval::new(-DEFAULT_SEED_HALF_WIDTH, DEFAULT_SEED_HALF_WIDTH)?,
            quadrature: QuadratureSpec::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_weight > 0.0 && self.epsilon_weight <= 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1], got {}", self.epsilon_weight)));
        }
        check_tail_mass(self.tail_mass)?;
        if self.max_depth < 1 || self.max_depth > 60 {
            return Err(invalid(format!("max_depth must lie in 1..=60, got {}", self.max_depth)));
        }
        if let Mode::Sampled(plan) = self.mode {
            if self.condition_shots == 0 {
                return Err(invalid("condition_shots must be positive in sampled mode"));
            }
            if !(plan.shot_scale > 0.0 && plan.shot_scale.is_finite()) {
                return Err(invalid("shot_scale must be positive"));
            }
            // validates epsilon and p
            chernoff_condition_shots(plan.shots_epsilon, plan.fail_prob)?;
        }
        self.quadrature.validate()
    }
}

fn check_tail_mass(tail_mass: f64) -> Result<()> {
    if !(tail_mass > 0.0 && tail_mass < 0.1) {
        return Err(invalid(format!("tail_mass must lie in (0, 0.1), got {tail_mass}")));
    }
    Ok(())
}

const MAX_DOUBLINGS: u32 = 60;

/// Smallest `2^k` dilation of `seed` about its center holding at least
/// `1 - tail_mass` of the probability.
pub fn find_support_interval<K: DensityKernel + ?Sized>(
    state: &K,
    tail_mass: f64,
    seed: Interval,
    spec: &QuadratureSpec,
) -> Result<Interval> {
    check_tail_mass(tail_mass)?;
    let target = 1.0 - tail_mass;
    for k in 0..=MAX_DOUBLINGS {
        let candidate = seed.dilated(k)?;
        if diagonal_weight(state, candidate.lo(), candidate.hi(), spec)? >= target {
            return Ok(candidate);
        }
    }
    Err(Error::Unnormalizable {
        target,
        doublings: MAX_DOUBLINGS,
    })
}

/// Outcome of one weight-condition test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionTest {
    /// Exact click probability of the tested branch, half the interval weight.
    pub probability: f64,
    /// What the test compared to the threshold: the exact probability, or
    /// the empirical click frequency in sampled mode.
    pub measured: f64,
    pub threshold: f64,
    pub passed: bool,
    pub shots: u64,
}

impl ConditionTest {
    /// Distance below the threshold; negative when the test failed.
    pub fn margin(&self) -> f64 {
        self.threshold - self.measured
    }
}

fn run_condition(probability: f64, epsilon: f64, config: &RefinementConfig, stream: &mut RandomStream) -> Result<ConditionTest> {
    let threshold = 0.5 * epsilon;
    let (measured, shots) = match config.mode {
        Mode::Exact => (probability, 0),
        Mode::Sampled(_) => {
            let p = probability.clamp(0.0, 1.0);
            let probs = [p, 1.0 - p];
            let mut clicks = 0u64;
            for _ in 0..config.condition_shots {
                if sample_index(&probs, stream)? == 0 {
                    clicks += 1;
                }
            }
            (clicks as f64 / config.condition_shots as f64, config.condition_shots)
        }
    };
    Ok(ConditionTest {
        probability,
        measured,
        threshold,
        passed: measured <= threshold,
        shots,
    })
}

/// Weight-condition test for one interval, as run by the circuit with the
/// squeezing chosen so the probed width equals the interval width.
pub fn test_interval<K: DensityKernel + ?Sized>(
    state: &K,
    interval: &Interval,
    epsilon: f64,
    config: &RefinementConfig,
    stream: &mut RandomStream,
) -> Result<ConditionTest> {
    let weight = diagonal_weight(state, interval.lo(), interval.hi(), &config.quadrature)?;
    run_condition(0.5 * weight, epsilon, config, stream)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionCell {
    pub interval: Interval,
    pub depth: u32,
    /// Exact weight in exact mode, twice the measured click frequency in
    /// sampled mode.
    pub weight: f64,
    /// Still violates the weight condition at `max_depth`.
    pub flagged: bool,
}

/// Ordered dyadic tiling of a support interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    initial: Interval,
    epsilon: f64,
    cells: Vec<PartitionCell>,
}

impl Partition {
    /// Assembles a partition from cells, checking that they tile `initial`
    /// dyadically.
    pub fn from_cells(initial: Interval, epsilon: f64, cells: Vec<PartitionCell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(invalid("partition has no cells"));
        }
        if cells[0].interval.lo() != initial.lo() || cells[cells.len() - 1].interval.hi() != initial.hi() {
            return Err(invalid("cells do not span the initial interval"));
        }
        for pair in cells.windows(2) {
            if pair[0].interval.hi() != pair[1].interval.lo() {
                return Err(invalid(format!(
                    "cells do not tile: gap between {} and {}",
                    pair[0].interval.hi(),
                    pair[1].interval.lo()
                )));
            }
        }
        for c in &cells {
            let ratio = initial.width() / c.interval.width();
            if (ratio - 2f64.powi(c.depth as i32)).abs() > 1e-9 * ratio {
                return Err(invalid(format!("cell width {} is not dyadic", c.interval.width())));
            }
        }
        Ok(Self { initial, epsilon, cells })
    }

    pub fn initial(&self) -> Interval {
        self.initial
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[PartitionCell] {
        &self.cells
    }

    pub fn interval(&self, i: usize) -> Interval {
        self.cells[i].interval
    }

    pub fn intervals(&self) -> impl Iterator<Item = Interval> + '_ {
        self.cells.iter().map(|c| c.interval)
    }

    /// The `len() + 1` cell endpoints, strictly increasing.
    pub fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.cells.iter().map(|c| c.interval.lo()).collect();
        e.push(self.initial.hi());
        e
    }

    /// Indices of cells that still violate the weight condition.
    pub fn flagged(&self) -> Vec<usize> {
        self.cells.iter().enumerate().filter(|(_, c)| c.flagged).map(|(i, _)| i).collect()
    }

    /// Cell owning `x`: cells are closed on the left and open on the right,
    /// except the last which is closed.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !self.initial.contains(x) {
            return None;
        }
        if x == self.initial.hi() {
            return Some(self.cells.len() - 1);
        }
        // first cell whose hi exceeds x
        Some(self.cells.partition_point(|c| c.interval.hi() <= x))
    }

    /// Whether every cell of `self` lies inside some cell of `coarser`.
    pub fn is_nested_in(&self, coarser: &Partition) -> bool {
        self.cells.iter().all(|c| {
            coarser
                .locate(c.interval.center())
                .is_some_and(|k| coarser.cells[k].interval.contains_interval(&c.interval))
        })
    }
}

/// Bisects the support until every interval's weight is at most
/// `config.epsilon_weight` or `max_depth` is reached.
///
/// Intervals still too heavy at `max_depth` are kept, flagged and logged;
/// see [`Partition::flagged`]. `stream` drives the condition tests in
/// sampled mode and is left untouched in exact mode.
pub fn refine_partition<K: DensityKernel + ?Sized>(
    state: &K,
    config: &RefinementConfig,
    stream: &mut RandomStream,
) -> Result<Partition> {
    config.validate()?;
    let support = find_support_interval(state, config.tail_mass, config.seed_interval, &config.quadrature)?;
    let mut cells = Vec::new();
    bisect(state, config, &support, 0, 0, stream, &mut cells)?;
    let partition = Partition::from_cells(support, config.epsilon_weight, cells)?;
    let flagged = partition.flagged();
    if !flagged.is_empty() {
        warn!(
            "{} interval(s) exceed weight {} at max depth {}",
            flagged.len(),
            config.epsilon_weight,
            config.max_depth
        );
    }
    Ok(partition)
}

fn bisect<K: DensityKernel + ?Sized>(
    state: &K,
    config: &RefinementConfig,
    support: &Interval,
    depth: u32,
    index: u64,
    stream: &mut RandomStream,
    out: &mut Vec<PartitionCell>,
) -> Result<()> {
    let interval = support.dyadic_piece(depth, index)?;
    let test = test_interval(state, &interval, config.epsilon_weight, config, stream)?;
    if test.passed || depth >= config.max_depth {
        out.push(PartitionCell {
            interval,
            depth,
            weight: 2.0 * test.measured,
            flagged: !test.passed,
        });
        return Ok(());
    }
    bisect(state, config, support, depth + 1, 2 * index, stream, out)?;
    bisect(state, config, support, depth + 1, 2 * index + 1, stream, out)
}

/// Squeezing `r = ln(delta / width)` that makes the probed width
/// `e^{-r} delta` equal `width`. Negative for widths above `delta`.
pub fn squeezing_for_width(width: f64, delta: f64) -> Result<f64> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(invalid(format!("width must be positive, got {width}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    Ok((delta / width).ln())
}

/// One rung of the halving ladder for one branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderStep {
    pub branch: Branch,
    pub halvings: u32,
    pub r: f64,
    pub test: ConditionTest,
}

/// Squeezing parameters chosen for one element and how they were reached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSelection {
    pub r: f64,
    pub rp: f64,
    pub region: Region,
    pub ladder: Vec<LadderStep>,
    pub condition_shots_used: u64,
}

/// Starts from `r = r' = 0` and halves each side of the probed region
/// independently until its click probability is at most `epsilon / 2`.
pub fn select_region<K: DensityKernel + ?Sized>(
    state: &K,
    x: f64,
    xp: f64,
    delta: f64,
    epsilon: f64,
    config: &RefinementConfig,
    stream: &mut RandomStream,
) -> Result<RegionSelection> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    CircuitSettings::new(x, xp, 0.0, 0.0, delta)?;
    let mut ladder = Vec::new();
    let mut chosen = [0.0; 2];
    for (slot, branch) in [Branch::Control0, Branch::Control1].into_iter().enumerate() {
        let mut found = None;
        for k in 0..=config.max_depth {
            let r = f64::from(k) * LN_2;
            let settings = match branch {
                Branch::Control0 => CircuitSettings::new(x, xp, r, 0.0, delta)?,
                Branch::Control1 => CircuitSettings::new(x, xp, 0.0, r, delta)?,
            };
            let p = branch_probability(state, &settings, branch, &config.quadrature)?;
            let test = run_condition(p, epsilon, config, stream)?;
            ladder.push(LadderStep {
                branch,
                halvings: k,
                r,
                test,
            });
            if test.passed {
                found = Some(r);
                break;
            }
        }
        chosen[slot] = found.ok_or_else(|| Error::MaxDepth {
            max_depth: config.max_depth,
            what: format!("{branch:?} branch at {} never satisfied the weight condition", if slot == 0 { x } else { xp }),
        })?;
    }
    let settings = CircuitSettings::new(x, xp, chosen[0], chosen[1], delta)?;
    Ok(RegionSelection {
        r: chosen[0],
        rp: chosen[1],
        region: settings.region()?,
        condition_shots_used: ladder.iter().map(|s| s.test.shots).sum(),
        ladder,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::PureState;

    fn exact(eps: f64) -> RefinementConfig {
        RefinementConfig::new(eps).unwrap()
    }

    fn stream() -> RandomStream {
        RandomStream::new(0, 0)
    }

    #[test]
    fn support_search() {
        let g = PureState::ground();
        let spec = QuadratureSpec::default();
        let seed = Interval::new(-1.0, 1.0).unwrap();
        // erf(1) and erf(2) fall short of 1 - 1e-6, erf(4) does not
        assert!(libm::erf(2.0) < 1.0 - 1e-6 && libm::erf(4.0) >= 1.0 - 1e-6);
        let s = find_support_interval(&g, 1e-6, seed, &spec).unwrap();
        assert_eq!((s.lo(), s.hi()), (-4.0, 4.0));

        let wide = Interval::new(-6.0, 6.0).unwrap();
        assert_eq!(find_support_interval(&g, 1e-6, wide, &spec).unwrap(), wide);

        let n10 = PureState::oscillator(10).unwrap();
        let s = find_support_interval(&n10, 1e-6, seed, &spec).unwrap();
        assert!(s.contains(21f64.sqrt()) && s.contains(-(21f64.sqrt())));

        assert!(find_support_interval(&g, 0.5, seed, &spec).is_err());
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn squeezing_values() {
        assert_eq!(squeezing_for_width(0.1, 0.1).unwrap(), 0.0);
        assert!((squeezing_for_width(0.05, 0.1).unwrap() - 0.693147).abs() < 1e-6);
        assert!((squeezing_for_width(0.2, 0.1).unwrap() + LN_2).abs() < 1e-15);
        assert!(squeezing_for_width(0.0, 0.1).is_err());
        for w in [0.01, 0.3, 2.0] {
            let r = squeezing_for_width(w, 0.1).unwrap();
            assert!(((-r).exp() * 0.1 - w).abs() < 1e-15 * w.max(1.0));
        }
    }

    #[test]
    fn dyadic_pieces_share_edges() {
        let base = Interval::new(-6.0, 6.0).unwrap();
        let a = base.dyadic_piece(3, 2).unwrap();
        let b = base.dyadic_piece(5, 12).unwrap();
        assert_eq!(a.hi(), b.lo());
        assert_eq!(base.dyadic_piece(4, 15).unwrap().hi(), 6.0);
        assert!(base.dyadic_piece(2, 4).is_err());
    }

    #[test]
    fn trivial_partition() {
        let g = PureState::ground();
        let p = refine_partition(&g, &exact(1.0), &mut stream()).unwrap();
        assert_eq!(p.len(), 1);
        assert!(p.flagged().is_empty());
    }

    #[test]
    fn ground_state_partition() {
        let g = PureState::ground();
        let mut cfg = exact(0.01);
        cfg.seed_interval = Interval::new(-4.0, 4.0).unwrap();
        let p = refine_partition(&g, &cfg, &mut stream()).unwrap();
        assert_eq!((p.initial().lo(), p.initial().hi()), (-4.0, 4.0));
        assert!(p.len() >= 100);
        for c in p.cells() {
            assert!(!c.flagged && c.weight <= 0.01 + 1e-9);
        }
    }

    #[test]
    fn tiling_and_conservation() {
        for state in [PureState::ground(), PureState::oscillator(5).unwrap(), PureState::squeezed(0.0, 0.5, 0.1).unwrap()] {
            let cfg = exact(0.01);
            let p = refine_partition(&state, &cfg, &mut stream()).unwrap();
            let edges = p.edges();
            assert_eq!(edges[0], p.initial().lo());
            assert_eq!(*edges.last().unwrap(), p.initial().hi());
            assert!(edges.windows(2).all(|w| w[0] < w[1]));
            for (k, c) in p.cells().iter().enumerate() {
                assert_eq!(c.interval.lo(), edges[k]);
                assert_eq!(c.interval.hi(), edges[k + 1]);
                let ratio = p.initial().width() / c.interval.width();
                assert_eq!(ratio, 2f64.powi(c.depth as i32));
            }
            let total: f64 = p.cells().iter().map(|c| c.weight).sum();
            let support = diagonal_weight(&state, p.initial().lo(), p.initial().hi(), &cfg.quadrature).unwrap();
            assert!((total - support).abs() <= 1e-8);
        }
    }

    #[test]
    fn finer_epsilon_nests() {
        let state = PureState::oscillator(2).unwrap();
        let fine = refine_partition(&state, &exact(0.01), &mut stream()).unwrap();
        let coarse = refine_partition(&state, &exact(0.05), &mut stream()).unwrap();
        assert!(coarse.len() < fine.len());
        assert!(fine.is_nested_in(&coarse));
        assert!(!coarse.is_nested_in(&fine));
    }

    #[test]
    fn max_depth_flags() {
        let g = PureState::ground();
        let mut cfg = exact(0.001);
        cfg.max_depth = 3;
        let p = refine_partition(&g, &cfg, &mut stream()).unwrap();
        assert!(!p.flagged().is_empty());
        assert!(p.len() <= 8);
    }

    #[test]
    fn locate_tie_breaks() {
        let g = PureState::ground();
        let p = refine_partition(&g, &exact(0.05), &mut stream()).unwrap();
        let edges = p.edges();
        assert_eq!(p.locate(edges[0]), Some(0));
        assert_eq!(p.locate(edges[1]), Some(1));
        assert_eq!(p.locate(0.5 * (edges[0] + edges[1])), Some(0));
        assert_eq!(p.locate(*edges.last().unwrap()), Some(p.len() - 1));
        assert_eq!(p.locate(edges[0] - 1e-9), None);
        assert_eq!(p.locate(f64::NAN), None);
    }

    #[test]
    fn region_ladder() {
        let g = PureState::ground();
        let cfg = exact(0.1);
        let sel = select_region(&g, 0.0, 0.0, 0.1, 0.1, &cfg, &mut stream()).unwrap();
        assert_eq!((sel.r, sel.rp), (0.0, 0.0));
        assert!((sel.ladder[0].test.probability - libm::erf(0.05) / 2.0).abs() < 1e-14);

        let sel = select_region(&g, 0.0, 0.0, 0.1, 0.05, &cfg, &mut stream()).unwrap();
        assert_eq!((sel.r, sel.rp), (LN_2, LN_2));
        let last = sel.ladder.iter().rev().find(|s| s.branch == Branch::Control0).unwrap();
        assert!((last.test.probability - libm::erf(0.025) / 2.0).abs() < 1e-14);
        assert!((sel.region.row.width() - 0.05).abs() < 1e-15);

        let tail = select_region(&g, 9.0, 0.0, 0.1, 0.05, &cfg, &mut stream()).unwrap();
        assert_eq!(tail.r, 0.0);
        assert!(tail.rp > 0.0);
    }

    #[test]
    fn region_ladder_is_monotone() {
        let s = PureState::squeezed(0.0, 0.5, 0.1).unwrap();
        let cfg = exact(0.1);
        let epsilons = [0.005, 0.01, 0.02, 0.05, 0.1, 0.3, 0.9];
        for (x, xp) in [(0.0, 0.0), (0.05, -0.1), (0.2, 0.01)] {
            let mut prev = (f64::INFINITY, f64::INFINITY);
            for eps in epsilons {
                let sel = select_region(&s, x, xp, 0.1, eps, &cfg, &mut stream()).unwrap();
                assert!(sel.r <= prev.0 && sel.rp <= prev.1);
                prev = (sel.r, sel.rp);
            }
        }
    }

    #[test]
    fn region_max_depth_error() {
        let s = PureState::squeezed(0.0, 0.0, 1e-3).unwrap();
        let mut cfg = exact(0.1);
        cfg.max_depth = 2;
        let err = select_region(&s, 0.0, 0.0, 1.0, 0.01, &cfg, &mut stream()).unwrap_err();
        assert!(matches!(err, Error::MaxDepth { .. }));
        assert!(err.to_string().contains("Control0"));
    }

    #[test]
    fn sampled_ladder() {
        let g = PureState::ground();
        let cfg = exact(0.1).with_mode(Mode::Sampled(SamplingPlan::new(0.1, 0.05)));
        let a = select_region(&g, 0.0, 0.0, 0.1, 0.05, &cfg, &mut RandomStream::new(5, 0)).unwrap();
        let b = select_region(&g, 0.0, 0.0, 0.1, 0.05, &cfg, &mut RandomStream::new(5, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.condition_shots_used, cfg.condition_shots * a.ladder.len() as u64);
        // far from the 0.025 threshold on both rungs, so sampling agrees with exact
        assert_eq!((a.r, a.rp), (LN_2, LN_2));
        for step in &a.ladder {
            assert!((step.test.margin() - (step.test.threshold - step.test.measured)).abs() < 1e-15);
        }
    }

    #[test]
    fn config_validation() {
        assert!(RefinementConfig::new(0.0).is_err());
        assert!(RefinementConfig::new(1.5).is_err());
        let mut c = exact(0.1);
        c.tail_mass = 0.2;
        assert!(c.validate().is_err());
        let c = exact(0.1).with_mode(Mode::Sampled(SamplingPlan::new(0.1, 1.5)));
        assert!(c.validate().is_err());
    }

    #[test]
    fn interval_json() {
        let i = Interval::new(-0.75, 0.25).unwrap();
        let j = serde_json::to_string(&i).unwrap();
        assert_eq!(j, r#"{"center":-0.25,"width":1.0}"#);
        assert_eq!(serde_json::from_str::<Interval>(&j).unwrap(), i);
        assert!(serde_json::from_str::<Interval>(r#"{"center":0,"width":-1}"#).is_err());
    }
}
