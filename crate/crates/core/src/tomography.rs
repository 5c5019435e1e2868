//! Protocol drivers: single-element estimation, full piecewise-constant
//! reconstruction, point evaluation and fidelity.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh::{refine_partition, select_region, squeezing_for_width, Mode, Partition, RefinementConfig, Region, RegionSelection};
use crate::numerics::{integrate_rect, QuadratureSpec, RandomStream};
use crate::protocol::{
    estimate_from_tallies, exact_estimate, outcome_distribution, sample_shots, Axis, ChernoffPlan,
    CircuitSettings,
};
use crate::states::DensityKernel;

/// Estimate of one density-matrix element with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementEstimate {
    pub x: f64,
    pub xp: f64,
    pub value: C64,
    pub r: f64,
    pub rp: f64,
    pub delta: f64,
    /// Shots over both axes; 0 in exact mode.
    pub shots_used: u64,
    pub epsilon_weight: f64,
    pub mode: Mode,
    /// Per-axis Chernoff plan in sampled mode.
    pub plan: Option<ChernoffPlan>,
    pub selection: RegionSelection,
}

/// Measures one cell at fixed settings: quadrature in exact mode, two
/// independent shot tallies (sigma_x, sigma_y) in sampled mode.
fn measure<K: DensityKernel + ?Sized>(
    state: &K,
    settings: &CircuitSettings,
    mode: &Mode,
    spec: &QuadratureSpec,
    stream: &mut RandomStream,
) -> Result<(C64, u64, Option<ChernoffPlan>)> {
    match mode {
        Mode::Exact => Ok((exact_estimate(state, settings, spec)?, 0, None)),
        Mode::Sampled(plan) => {
            let chernoff = ChernoffPlan::estimate(plan.shots_epsilon, plan.fail_prob, settings.delta, settings.r, settings.rp)?;
            let m = ((chernoff.shots as f64) * plan.shot_scale).ceil().max(1.0) as u64;
            let dx = outcome_distribution(state, settings, Axis::X, spec)?;
            let dy = outcome_distribution(state, settings, Axis::Y, spec)?;
            let tx = sample_shots(&dx, m, stream)?;
            let ty = sample_shots(&dy, m, stream)?;
            let plan = ChernoffPlan { shots: m, ..chernoff };
            Ok((estimate_from_tallies(&tx, &ty, settings)?, 2 * m, Some(plan)))
        }
    }
}

/// Selective estimate of `rho(x, x')`: sizes the region with the halving
/// ladder, then measures.
pub fn estimate_element<K: DensityKernel + ?Sized>(
    state: &K,
    x: f64,
    xp: f64,
    delta: f64,
    epsilon: f64,
    config: &RefinementConfig,
    stream: &mut RandomStream,
) -> Result<ElementEstimate> {
    let selection = select_region(state, x, xp, delta, epsilon, config, stream)?;
    let settings = CircuitSettings::new(x, xp, selection.r, selection.rp, delta)?;
    let (value, shots_used, plan) = measure(state, &settings, &config.mode, &config.quadrature, stream)?;
    Ok(ElementEstimate {
        x,
        xp,
        value,
        r: selection.r,
        rp: selection.rp,
        delta,
        shots_used,
        epsilon_weight: epsilon,
        mode: config.mode,
        plan,
        selection,
    })
}

/// Settings for a full reconstruction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconstructionConfig {
    pub refinement: RefinementConfig,
    pub delta: f64,
    /// Seed of the per-cell substreams in sampled mode.
    pub seed: u64,
}

impl ReconstructionConfig {
    pub fn new(refinement: RefinementConfig, delta: f64) -> Self {
        Self {
            refinement,
            delta,
            seed: 0,
        }
    }
}

/// Stream index reserved for the partition's condition tests; cells use
/// their linear index.
pub const PARTITION_STREAM: u64 = u64::MAX;

/// Piecewise-constant estimate of `rho(x, x')` over the cells
/// `R_ij = I_i x I_j` of a partition.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructedState {
    pub(crate) partition: Partition,
    pub(crate) delta: f64,
    pub(crate) mode: Mode,
    pub(crate) state: Option<String>,
    /// Row-major, `cells[i * n + j]` for row interval `i`, column interval `j`.
    pub(crate) cells: Vec<C64>,
    pub(crate) shots: Vec<u64>,
}

impl ReconstructedState {
    pub fn from_parts(
        partition: Partition,
        delta: f64,
        mode: Mode,
        state: Option<String>,
        cells: Vec<C64>,
        shots: Vec<u64>,
    ) -> Result<Self> {
        let n = partition.len();
        if cells.len() != n * n || shots.len() != n * n {
            return Err(invalid(format!(
                "expected {} cells for a {n}-interval partition, got {} values and {} shot counts",
                n * n,
                cells.len(),
                shots.len()
            )));
        }
        if delta.is_nan() || delta <= 0.0 {
            return Err(invalid("delta must be positive"));
        }
        Ok(Self {
            partition,
            delta,
            mode,
            state,
            cells,
            shots,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn state(&self) -> Option<&str> {
        self.state.as_deref()
    }

    /// Number of intervals per axis.
    pub fn size(&self) -> usize {
        self.partition.len()
    }

    pub fn cell(&self, i: usize, j: usize) -> C64 {
        self.cells[i * self.size() + j]
    }

    pub fn cell_shots(&self, i: usize, j: usize) -> u64 {
        self.shots[i * self.size() + j]
    }

    pub fn cells(&self) -> &[C64] {
        &self.cells
    }

    pub fn total_shots(&self) -> u64 {
        self.shots.iter().sum()
    }

    pub fn region(&self, i: usize, j: usize) -> Region {
        Region::new(self.partition.interval(i), self.partition.interval(j))
    }

    /// Largest Hermiticity defect `|c_ij - conj(c_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.size();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.cell(i, j) - self.cell(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn evaluate(&self, x: f64, xp: f64) -> C64 {
        evaluate(self, x, xp)
    }
}

/// Full reconstruction: partition the support once, then estimate every
/// cell at the interval centers with squeezings matching the cell widths.
///
/// Fails if the partition left any interval above the weight threshold.
pub fn reconstruct<K: DensityKernel + ?Sized>(state: &K, config: &ReconstructionConfig) -> Result<ReconstructedState> {
    let refinement = &config.refinement;
    let mut partition_stream = RandomStream::new(config.seed, PARTITION_STREAM);
    let partition = refine_partition(state, refinement, &mut partition_stream)?;
    let flagged = partition.flagged();
    if let Some(&first) = flagged.first() {
        let iv = partition.interval(first);
        return Err(Error::MaxDepth {
            max_depth: refinement.max_depth,
            what: format!("{} interval(s) still above the weight threshold, first [{}, {}]", flagged.len(), iv.lo(), iv.hi()),
        });
    }

    let n = partition.len();
    let squeezings = partition
        .intervals()
        .map(|iv| squeezing_for_width(iv.width(), config.delta))
        .collect::<Result<Vec<_>>>()?;

    let measured = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            let settings = CircuitSettings::new(
                partition.interval(i).center(),
                partition.interval(j).center(),
                squeezings[i],
                squeezings[j],
                config.delta,
            )?;
            let mut stream = RandomStream::new(config.seed, idx as u64);
            let (value, shots, _) = measure(state, &settings, &refinement.mode, &refinement.quadrature, &mut stream)?;
            Ok((value, shots))
        })
        .collect::<Result<Vec<_>>>()?;
    let (cells, shots) = measured.into_iter().unzip();

    let described = state.describe();
    ReconstructedState::from_parts(partition, config.delta, refinement.mode, Some(described), cells, shots)
}

/// Value of the reconstruction at `(x, x')`; zero outside the support square.
pub fn evaluate(recon: &ReconstructedState, x: f64, xp: f64) -> C64 {
    match (recon.partition.locate(x), recon.partition.locate(xp)) {
        (Some(i), Some(j)) => recon.cell(i, j),
        _ => C64::new(0.0, 0.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellContribution {
    pub i: usize,
    pub j: usize,
    pub value: C64,
    /// `int int_{R_ij} rho(x', x) dx' dx`.
    pub overlap: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    /// Imaginary part of the overlap sum, discarded from `fidelity`.
    pub imaginary_residue: f64,
    pub state: String,
    pub epsilon_weight: f64,
    pub delta: f64,
    pub contributions: Vec<CellContribution>,
}

/// `F = <psi| rho_est |psi> = sum_ij rho_est(x_i, x_j) int int_{R_ij} rho(x', x) dx' dx`.
pub fn fidelity<K: DensityKernel + ?Sized>(recon: &ReconstructedState, state: &K, spec: &QuadratureSpec) -> Result<FidelityReport> {
    let n = recon.size();
    let contributions = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            let overlap = integrate_rect(|x, xp| state.density(xp, x), &recon.region(i, j), spec)?;
            Ok(CellContribution {
                i,
                j,
                value: recon.cells[idx],
                overlap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total: C64 = contributions.iter().map(|c| c.value * c.overlap).sum();
    Ok(FidelityReport {
        fidelity: total.re,
        imaginary_residue: total.im,
        state: state.describe(),
        epsilon_weight: recon.partition.epsilon(),
        delta: recon.delta,
        contributions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Interval, SamplingPlan};
    use crate::states::PureState;

    fn config(eps: f64) -> ReconstructionConfig {
        ReconstructionConfig::new(RefinementConfig::new(eps).unwrap(), 0.1)
    }

    #[test]
    fn element_examples() {
        let g = PureState::ground();
        let cfg = RefinementConfig::new(0.1).unwrap();
        let e = estimate_element(&g, 0.0, 0.0, 0.1, 0.1, &cfg, &mut RandomStream::new(0, 0)).unwrap();
        assert!((e.value.re - libm::erf(0.05) / 0.1).abs() < 1e-13);
        assert_eq!((e.r, e.rp, e.shots_used), (0.0, 0.0, 0));
        assert!(e.plan.is_none());

        let n1 = PureState::oscillator(1).unwrap();
        for delta in [0.1, 0.05, 0.01] {
            let e = estimate_element(&n1, 0.0, 0.0, delta, 0.1, &cfg, &mut RandomStream::new(0, 0)).unwrap();
            assert!(e.value.norm() <= 0.04);
        }

        let s = PureState::squeezed(0.0, 0.5, 0.4).unwrap();
        let a = estimate_element(&s, 0.3, -0.1, 0.1, 0.05, &cfg, &mut RandomStream::new(0, 0)).unwrap();
        let b = estimate_element(&s, -0.1, 0.3, 0.1, 0.05, &cfg, &mut RandomStream::new(0, 0)).unwrap();
        assert!((a.value - b.value.conj()).norm() < 1e-12);
        assert!(a.value.im.abs() > 1e-3);
    }

    #[test]
    fn sampled_element() {
        let g = PureState::ground();
        let cfg = RefinementConfig::new(0.1)
            .unwrap()
            .with_mode(Mode::Sampled(SamplingPlan::new(0.1, 0.05)));
        let e = estimate_element(&g, 0.0, 0.0, 0.1, 0.1, &cfg, &mut RandomStream::new(1, 0)).unwrap();
        assert_eq!(e.plan.unwrap().shots, 73778);
        assert_eq!(e.shots_used, 2 * 73778);
        assert!((e.value.re - libm::erf(0.05) / 0.1).abs() < 0.1);
        let again = estimate_element(&g, 0.0, 0.0, 0.1, 0.1, &cfg, &mut RandomStream::new(1, 0)).unwrap();
        assert_eq!(e, again);
    }

    #[test]
    fn single_cell_reconstruction() {
        let g = PureState::ground();
        let r = reconstruct(&g, &config(1.0)).unwrap();
        assert_eq!(r.size(), 1);
        let iv = r.partition().interval(0);
        // average of rho along the diagonal of the single cell
        let want = crate::states::diagonal_weight(&g, iv.lo(), iv.hi(), &QuadratureSpec::default()).unwrap() / iv.width();
        assert!((r.cell(0, 0).re - want).abs() < 1e-12);
        assert_eq!(r.total_shots(), 0);
    }

    #[test]
    fn hermitian_cells_and_real_diagonal() {
        let s = PureState::squeezed(0.0, 0.5, 0.4).unwrap();
        let r = reconstruct(&s, &config(0.05)).unwrap();
        assert!(r.hermiticity_defect() < 1e-12);
        for i in 0..r.size() {
            let d = r.cell(i, i);
            assert!(d.im.abs() < 1e-9 && d.re >= -1e-9);
        }
    }

    #[test]
    fn evaluation_rules() {
        let g = PureState::ground();
        let r = reconstruct(&g, &config(0.1)).unwrap();
        let p = r.partition();
        let (a, b) = (p.interval(2), p.interval(5));
        assert_eq!(evaluate(&r, a.center(), b.center()), r.cell(2, 5));
        // boundary belongs to the cell on its right
        assert_eq!(evaluate(&r, a.hi(), b.center()), r.cell(3, 5));
        assert_eq!(evaluate(&r, p.initial().hi(), p.initial().hi()), r.cell(r.size() - 1, r.size() - 1));
        assert_eq!(evaluate(&r, p.initial().lo() - 0.1, 0.0), C64::new(0.0, 0.0));
        assert_eq!(evaluate(&r, 0.0, 1e3), C64::new(0.0, 0.0));
    }

    /// Piecewise-constant wavefunction on [-1, 1] with complex values per
    /// half; constant on every partition cell.
    struct StepState {
        left: C64,
        right: C64,
    }

    impl StepState {
        fn psi(&self, x: f64) -> C64 {
            if !(-1.0..=1.0).contains(&x) {
                C64::new(0.0, 0.0)
            } else if x < 0.0 {
                self.left
            } else {
                self.right
            }
        }
    }

    impl DensityKernel for StepState {
        fn density(&self, x: f64, xp: f64) -> C64 {
            self.psi(x) * self.psi(xp).conj()
        }
    }

    #[test]
    fn exact_fixed_point_has_unit_fidelity() {
        let (a2, b2): (f64, f64) = (0.35, 0.65);
        let state = StepState {
            left: C64::from_polar(a2.sqrt(), 0.4),
            right: C64::from_polar(b2.sqrt(), -1.1),
        };
        let mut refinement = RefinementConfig::new(0.7).unwrap();
        refinement.seed_interval = Interval::new(-1.0, 1.0).unwrap();
        let r = reconstruct(&state, &ReconstructionConfig::new(refinement, 0.1)).unwrap();
        assert_eq!(r.size(), 2);
        let f = fidelity(&r, &state, &QuadratureSpec::default()).unwrap();
        assert!((f.fidelity - 1.0).abs() < 1e-12, "{}", f.fidelity);
        assert!(f.imaginary_residue.abs() < 1e-12);
    }

    #[test]
    fn fidelity_report_fields() {
        let g = PureState::ground();
        let r = reconstruct(&g, &config(0.1)).unwrap();
        let f = fidelity(&r, &g, &QuadratureSpec::default()).unwrap();
        assert_eq!(f.contributions.len(), r.size() * r.size());
        assert_eq!(f.state, "oscillator:0");
        assert_eq!((f.epsilon_weight, f.delta), (0.1, 0.1));
        assert!(f.fidelity > 0.9 && f.fidelity <= 1.02);
        assert!(f.imaginary_residue.abs() < 1e-6);
    }

    #[test]
    fn exact_mode_is_deterministic() {
        let s = PureState::oscillator(3).unwrap();
        let a = reconstruct(&s, &config(0.05)).unwrap();
        let b = reconstruct(&s, &config(0.05)).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.cells().iter().zip(b.cells()) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }

    #[test]
    fn flagged_partition_is_refused() {
        let g = PureState::ground();
        let mut cfg = config(0.001);
        cfg.refinement.max_depth = 2;
        assert!(matches!(reconstruct(&g, &cfg).unwrap_err(), Error::MaxDepth { .. }));
    }

    #[test]
    fn from_parts_checks_dimensions() {
        let g = PureState::ground();
        let r = reconstruct(&g, &config(0.1)).unwrap();
        let bad = ReconstructedState::from_parts(r.partition().clone(), 0.1, Mode::Exact, None, vec![C64::new(0.0, 0.0)], vec![0]);
        assert!(bad.is_err());
    }
}
