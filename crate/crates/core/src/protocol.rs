//! Exact expectations of the controlled-translation / controlled-squeezing
//! circuit, the three-outcome shot distributions they induce, shot sampling,
//! and Chernoff shot planning.
//!
//! The system passes through `T^dag(x') S^dag(r')` when the ancilla is `|1>`
//! and `T^dag(x) S^dag(r)` when it is `|0>`, then hits a position window of
//! width `delta` around the origin. With `u = e^{-r} y + x` and
//! `v = e^{-r'} y + x'`:
//!
//! * `<Pi_delta (x) sigma_x> + i <Pi_delta (x) sigma_y> = e^{-(r+r')/2} int rho(u, v) dy`
//! * `<Pi_delta (x) |0><0|> = (1/2) e^{-r} int rho(u, u) dy`
//!
//! with `y` over `[-delta/2, delta/2]`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh::{Interval, Region};
use crate::numerics::{integrate_line, sample_index, QuadratureSpec, RandomStream};
use crate::states::DensityKernel;

/// One configuration of the circuit: anticontrolled translation `x` and
/// squeezing `r`, controlled translation `xp` and squeezing `rp`, detector
/// window `delta`.
///
/// Negative squeezing parameters are allowed; they widen the probed region
/// beyond `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSettings {
    pub x: f64,
    pub xp: f64,
    pub r: f64,
    pub rp: f64,
    pub delta: f64,
}

impl CircuitSettings {
    pub fn new(x: f64, xp: f64, r: f64, rp: f64, delta: f64) -> Result<Self> {
        let s = Self { x, xp, r, rp, delta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid(format!("delta must be positive, got {}", self.delta)));
        }
        if ![self.x, self.xp, self.r, self.rp].iter().all(|v| v.is_finite()) {
            return Err(invalid("circuit settings must be finite"));
        }
        Ok(())
    }

    /// Settings with the two branches exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            x: self.xp,
            xp: self.x,
            r: self.rp,
            rp: self.r,
            delta: self.delta,
        }
    }

    /// Side lengths `e^{-r} delta` and `e^{-r'} delta` of the probed region.
    pub fn widths(&self) -> (f64, f64) {
        ((-self.r).exp() * self.delta, (-self.rp).exp() * self.delta)
    }

    /// The rectangle `R_{x x'}` whose diagonal the circuit averages over.
    pub fn region(&self) -> Result<Region> {
        let (wx, wxp) = self.widths();
        Ok(Region {
            row: Interval::from_center_width(self.x, wx)?,
            col: Interval::from_center_width(self.xp, wxp)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "sigma_x")]
    X,
    #[serde(rename = "sigma_y")]
    Y,
}

/// Ancilla branch: `Control0` carries `(x, r)`, `Control1` carries `(x', r')`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Control0,
    Control1,
}

/// Probabilities of the three shot outcomes: no click, click with ancilla
/// `+1`, click with ancilla `-1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub axis: Axis,
    pub p_noclick: f64,
    pub p_plus: f64,
    pub p_minus: f64,
}

impl OutcomeDistribution {
    /// Ordered as `[plus, minus, noclick]`, the order used for sampling.
    pub fn as_array(&self) -> [f64; 3] {
        [self.p_plus, self.p_minus, self.p_noclick]
    }

    /// Exact mean of the shot value (`+1`, `-1`, `0`).
    pub fn mean(&self) -> f64 {
        self.p_plus - self.p_minus
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotTally {
    pub axis: Axis,
    pub n_plus: u64,
    pub n_minus: u64,
    pub n_noclick: u64,
}

impl ShotTally {
    pub fn total(&self) -> u64 {
        self.n_plus + self.n_minus + self.n_noclick
    }

    /// Unconditioned sample mean `(n+ - n-) / M`.
    pub fn mean(&self) -> Result<f64> {
        let m = self.total();
        if m == 0 {
            return Err(invalid("tally has no shots"));
        }
        Ok((self.n_plus as f64 - self.n_minus as f64) / m as f64)
    }
}

/// Shot count for a target uncertainty at a failure probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernoffPlan {
    pub epsilon: f64,
    pub fail_prob: f64,
    pub shots: u64,
}

impl ChernoffPlan {
    pub fn condition(epsilon: f64, fail_prob: f64) -> Result<Self> {
        Ok(Self {
            epsilon,
            fail_prob,
            shots: chernoff_condition_shots(epsilon, fail_prob)?,
        })
    }

    pub fn estimate(epsilon: f64, fail_prob: f64, delta: f64, r: f64, rp: f64) -> Result<Self> {
        Ok(Self {
            epsilon,
            fail_prob,
            shots: chernoff_estimate_shots(epsilon, fail_prob, delta, r, rp)?,
        })
    }
}

fn diagonal_integrand<'a, K: DensityKernel + ?Sized>(kernel: &'a K, center: f64, r: f64) -> impl Fn(f64) -> C64 + 'a {
    let scale = (-r).exp();
    move |y| C64::new(kernel.diagonal(scale * y + center), 0.0)
}

fn raw_integral<K: DensityKernel + ?Sized>(kernel: &K, s: &CircuitSettings, spec: &QuadratureSpec) -> Result<C64> {
    s.validate()?;
    let (a, b) = ((-s.r).exp(), (-s.rp).exp());
    let half = 0.5 * s.delta;
    integrate_line(|y| kernel.density(a * y + s.x, b * y + s.xp), -half, half, spec)
}

/// `c = e^{-(r+r')/2} int rho(e^{-r} y + x, e^{-r'} y + x') dy`; `Re c` and
/// `Im c` are the `sigma_x` and `sigma_y` expectations.
pub fn coherence_integral<K: DensityKernel + ?Sized>(kernel: &K, s: &CircuitSettings, spec: &QuadratureSpec) -> Result<C64> {
    Ok(raw_integral(kernel, s, spec)? * (-0.5 * (s.r + s.rp)).exp())
}

/// Probability of a click with the ancilla found in `branch`.
pub fn branch_probability<K: DensityKernel + ?Sized>(
    kernel: &K,
    s: &CircuitSettings,
    branch: Branch,
    spec: &QuadratureSpec,
) -> Result<f64> {
    s.validate()?;
    let (center, r) = match branch {
        Branch::Control0 => (s.x, s.r),
        Branch::Control1 => (s.xp, s.rp),
    };
    let half = 0.5 * s.delta;
    let w = integrate_line(diagonal_integrand(kernel, center, r), -half, half, spec)?;
    Ok(0.5 * (-r).exp() * w.re)
}

const NEGATIVE_TOLERANCE: f64 = 1e-9;

fn checked(label: &'static str, value: f64) -> Result<f64> {
    if value < -NEGATIVE_TOLERANCE {
        return Err(Error::NegativeProbability { label, value });
    }
    Ok(value.max(0.0))
}

/// Three-outcome distribution of a `sigma_x` or `sigma_y` run.
pub fn outcome_distribution<K: DensityKernel + ?Sized>(
    kernel: &K,
    s: &CircuitSettings,
    axis: Axis,
    spec: &QuadratureSpec,
) -> Result<OutcomeDistribution> {
    let p0 = branch_probability(kernel, s, Branch::Control0, spec)?;
    let p1 = branch_probability(kernel, s, Branch::Control1, spec)?;
    let c = coherence_integral(kernel, s, spec)?;
    distribution_from_parts(p0, p1, c, axis)
}

fn distribution_from_parts(p0: f64, p1: f64, c: C64, axis: Axis) -> Result<OutcomeDistribution> {
    let a = match axis {
        Axis::X => c.re,
        Axis::Y => c.im,
    };
    let click = p0 + p1;
    Ok(OutcomeDistribution {
        axis,
        p_noclick: checked("no-click", 1.0 - click)?,
        p_plus: checked("click, +1", 0.5 * click + 0.5 * a)?,
        p_minus: checked("click, -1", 0.5 * click - 0.5 * a)?,
    })
}

/// Tallies `m` independent shots drawn from `dist`.
pub fn sample_shots(dist: &OutcomeDistribution, m: u64, stream: &mut RandomStream) -> Result<ShotTally> {
    if m == 0 {
        return Err(invalid("at least one shot is required"));
    }
    let probs = dist.as_array();
    let mut counts = [0u64; 3];
    for _ in 0..m {
        counts[sample_index(&probs, stream)?] += 1;
    }
    Ok(ShotTally {
        axis: dist.axis,
        n_plus: counts[0],
        n_minus: counts[1],
        n_noclick: counts[2],
    })
}

fn scale_to_estimate(s: &CircuitSettings) -> f64 {
    (0.5 * (s.r + s.rp)).exp() / s.delta
}

/// Inverts the measured `sigma_x` / `sigma_y` means into
/// `rho_est = e^{(r+r')/2} / delta * (mean_x + i mean_y)`.
pub fn estimate_from_tallies(tally_x: &ShotTally, tally_y: &ShotTally, s: &CircuitSettings) -> Result<C64> {
    s.validate()?;
    if tally_x.axis != Axis::X || tally_y.axis != Axis::Y {
        return Err(invalid("expected a sigma_x tally and a sigma_y tally"));
    }
    Ok(C64::new(tally_x.mean()?, tally_y.mean()?) * scale_to_estimate(s))
}

/// The same inversion applied to exact outcome probabilities.
pub fn estimate_from_distributions(
    dist_x: &OutcomeDistribution,
    dist_y: &OutcomeDistribution,
    s: &CircuitSettings,
) -> Result<C64> {
    s.validate()?;
    if dist_x.axis != Axis::X || dist_y.axis != Axis::Y {
        return Err(invalid("expected a sigma_x distribution and a sigma_y distribution"));
    }
    Ok(C64::new(dist_x.mean(), dist_y.mean()) * scale_to_estimate(s))
}

/// Noise-free estimate `(1/delta) int rho(e^{-r} y + x, e^{-r'} y + x') dy`.
pub fn exact_estimate<K: DensityKernel + ?Sized>(kernel: &K, s: &CircuitSettings, spec: &QuadratureSpec) -> Result<C64> {
    Ok(raw_integral(kernel, s, spec)? / s.delta)
}

fn check_epsilon_p(epsilon: f64, p: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("failure probability must lie in (0, 1), got {p}")));
    }
    Ok(())
}

// The bounds are minima, so they round up; a 1e-12 relative slack keeps
// exactly-integral bounds from being bumped by round-off.
fn ceil_bound(bound: f64) -> Result<u64> {
    if !bound.is_finite() || bound > u64::MAX as f64 {
        return Err(invalid(format!("shot bound {bound} is not representable")));
    }
    Ok(((bound * (1.0 - 1e-12)).ceil() as u64).max(1))
}

/// Shots per weight-condition test: `ceil(ln(2/p) / (2 eps^2))`.
pub fn chernoff_condition_shots(epsilon: f64, p: f64) -> Result<u64> {
    check_epsilon_p(epsilon, p)?;
    ceil_bound((2.0 / p).ln() / (2.0 * epsilon * epsilon))
}

/// Shots per axis for an element estimate:
/// `ceil(2 ln(2/p) / (eps^2 delta^2 e^{-(r+r')}))`.
pub fn chernoff_estimate_shots(epsilon: f64, p: f64, delta: f64, r: f64, rp: f64) -> Result<u64> {
    check_epsilon_p(epsilon, p)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    ceil_bound(2.0 * (2.0 / p).ln() / (epsilon * epsilon * delta * delta * (-(r + rp)).exp()))
}
