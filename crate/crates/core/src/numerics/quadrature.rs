use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::LazyLock;

use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::mesh::Region;

const ORDER: usize = 16;

/// Nodes and weights of the 16-point Gauss-Legendre rule on `[-1, 1]`.
static GAUSS_LEGENDRE: LazyLock<[(f64, f64); ORDER]> = LazyLock::new(|| gauss_legendre_rule(ORDER));

fn gauss_legendre_rule<const N: usize>(n: usize) -> [(f64, f64); N] {
    let mut rule = [(0.0, 0.0); N];
    for (i, slot) in rule.iter_mut().enumerate() {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
    }
    rule
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Evaluation policy for the adaptive integrators.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadratureSpec {
    pub relative_tolerance: f64,
    /// Maximum bisection depth of any panel.
    pub max_subdivisions: u32,
}

impl QuadratureSpec {
    pub fn new(relative_tolerance: f64, max_subdivisions: u32) -> Result<Self> {
        let spec = Self {
            relative_tolerance,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.relative_tolerance > 0.0 && self.relative_tolerance.is_finite()) {
            return Err(invalid(format!(
                "relative_tolerance must be positive, got {}",
                self.relative_tolerance
            )));
        }
        if self.max_subdivisions < 1 {
            return Err(invalid("max_subdivisions must be at least 1"));
        }
        Ok(())
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            relative_tolerance: 1e-10,
            max_subdivisions: 24,
        }
    }
}

fn gauss_panel<F, E>(f: &mut F, lo: f64, hi: f64) -> std::result::Result<(C64, f64), E>
where
    F: FnMut(f64) -> std::result::Result<C64, E>,
{
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut sum = C64::new(0.0, 0.0);
    let mut abs = 0.0;
    for &(node, weight) in GAUSS_LEGENDRE.iter() {
        let v = f(mid + half * node)?;
        sum += v * weight;
        abs += v.norm() * weight;
    }
    Ok((sum * half, abs * half))
}

struct Panel {
    lo: f64,
    hi: f64,
    depth: u32,
    halves: [C64; 2],
    estimate: C64,
    abs: f64,
    error: f64,
}

impl Panel {
    fn build<F, E>(f: &mut F, lo: f64, hi: f64, depth: u32, coarse: C64) -> std::result::Result<Self, E>
    where
        F: FnMut(f64) -> std::result::Result<C64, E>,
    {
        let mid = 0.5 * (lo + hi);
        let (left, left_abs) = gauss_panel(f, lo, mid)?;
        let (right, right_abs) = gauss_panel(f, mid, hi)?;
        let estimate = left + right;
        Ok(Self {
            lo,
            hi,
            depth,
            halves: [left, right],
            estimate,
            abs: left_abs + right_abs,
            error: (coarse - estimate).norm(),
        })
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    // largest error first; ties broken by position so the order is total
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

/// Adaptive composite Gauss-Legendre integral of a fallible integrand.
///
/// Panels are compared against their two bisected halves; the panel with
/// the largest discrepancy is split until the summed discrepancy is below
/// `relative_tolerance * max(|I|, integral of |f|)`.
pub fn integrate_line_with<F, E>(mut f: F, a: f64, b: f64, spec: &QuadratureSpec) -> std::result::Result<C64, E>
where
    F: FnMut(f64) -> std::result::Result<C64, E>,
    E: From<Error>,
{
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(invalid(format!("integration bounds must be finite, got [{a}, {b}]")).into());
    }
    if a > b {
        return Err(invalid(format!("integration bounds reversed: [{a}, {b}]")).into());
    }
    if a == b {
        return Ok(C64::new(0.0, 0.0));
    }

    let (coarse, _) = gauss_panel(&mut f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Panel::build(&mut f, a, b, 0, coarse)?);

    loop {
        let (mut total, mut abs, mut error) = (C64::new(0.0, 0.0), 0.0, 0.0);
        for p in heap.iter() {
            total += p.estimate;
            abs += p.abs;
            error += p.error;
        }
        let scale = total.norm().max(abs);
        let tolerance = spec.relative_tolerance * scale;
        if error <= tolerance || error <= 64.0 * f64::EPSILON * scale {
            // sum in position order so the result does not depend on heap layout
            let mut panels = heap.into_vec();
            panels.sort_by(|x, y| x.lo.total_cmp(&y.lo));
            return Ok(panels.iter().map(|p| p.estimate).sum());
        }

        let worst = heap.pop().expect("heap never empty");
        if worst.depth >= spec.max_subdivisions {
            return Err(Error::NonConvergence {
                lo: worst.lo,
                hi: worst.hi,
                error,
                tolerance,
                depth: worst.depth,
            }
            .into());
        }
        let mid = 0.5 * (worst.lo + worst.hi);
        heap.push(Panel::build(&mut f, worst.lo, mid, worst.depth + 1, worst.halves[0])?);
        heap.push(Panel::build(&mut f, mid, worst.hi, worst.depth + 1, worst.halves[1])?);
    }
}

/// Adaptive Gauss-Legendre integral of `f` over `[a, b]`.
pub fn integrate_line<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<C64>
where
    F: Fn(f64) -> C64,
{
    integrate_line_with(|y| Ok::<_, Error>(f(y)), a, b, spec)
}

/// Tensor-product integral over a rectangle: `f(x, x')` with `x` along the
/// region's row interval and `x'` along its column interval.
pub fn integrate_rect<F>(f: F, rect: &Region, spec: &QuadratureSpec) -> Result<C64>
where
    F: Fn(f64, f64) -> C64,
{
    let (row, col) = (rect.row, rect.col);
    if !(row.width() > 0.0 && col.width() > 0.0) {
        return Err(invalid("integration rectangle must have positive widths"));
    }
    integrate_line_with(
        |x| integrate_line(|xp| f(x, xp), col.lo(), col.hi(), spec),
        row.lo(),
        row.hi(),
        spec,
    )
}
