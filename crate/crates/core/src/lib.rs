//! Desk-scale simulator for selective quantum state tomography of
//! one-dimensional continuous-variable systems.
//!
//! A density-matrix element `rho(x, x')` is estimated with an ancilla qubit,
//! controlled / anticontrolled translations and squeezings, and a finite
//! position window of width `delta` around the origin. The squeezings shrink
//! the probed region until the diagonal probability mass of each side stays
//! below a weight `epsilon`. Repeating the estimate over an adaptive dyadic
//! mesh gives a piecewise-constant reconstruction of the whole kernel, scored
//! by its fidelity with the true state.
//!
//! Module map:
//!
//! * [`numerics`]: Hermite polynomials, adaptive Gauss-Legendre quadrature,
//!   reproducible random streams.
//! * [`states`]: oscillator and squeezed-coherent wavefunctions and their
//!   density kernels.
//! * [`protocol`]: exact circuit expectations, outcome distributions, shot
//!   sampling, Chernoff shot counts.
//! * [`mesh`]: support search, weight-driven bisection, squeezing selection.
//! * [`tomography`]: element estimation, full reconstruction, fidelity.
//! * [`io`]: JSON / CSV file formats.
//! * [`cli`]: the `cvtomo` command-line front end.

pub mod cli;
pub mod error;
pub mod io;
pub mod mesh;
pub mod numerics;
pub mod protocol;
pub mod states;
pub mod tomography;

pub use num_complex::Complex64 as C64;

pub use error::{Error, Result};
pub use mesh::{
    find_support_interval, refine_partition, select_region, squeezing_for_width, Interval, Mode,
    Partition, RefinementConfig, Region, RegionSelection, SamplingPlan,
};
pub use numerics::{
    hermite_eval, integrate_line, integrate_rect, sample_index, QuadratureSpec, RandomStream,
};
pub use protocol::{
    branch_probability, chernoff_condition_shots, chernoff_estimate_shots, coherence_integral,
    estimate_from_tallies, exact_estimate, outcome_distribution, sample_shots, Axis, Branch,
    ChernoffPlan, CircuitSettings, OutcomeDistribution, ShotTally,
};
pub use states::{
    density, diagonal_weight, osc_wavefunction, squeezed_wavefunction, DensityKernel,
    OscillatorState, PureState, SqueezedCoherentState,
};
pub use tomography::{
    estimate_element, evaluate, fidelity, reconstruct, ElementEstimate, FidelityReport,
    ReconstructedState,
};
