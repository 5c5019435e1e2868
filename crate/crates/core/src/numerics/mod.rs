//! Special functions, quadrature and the random-number contract shared by
//! every other module.

mod hermite;
mod quadrature;
mod random;

pub use hermite::hermite_eval;
pub use quadrature::{integrate_line, integrate_line_with, integrate_rect, QuadratureSpec};
pub use random::{sample_index, RandomStream};
