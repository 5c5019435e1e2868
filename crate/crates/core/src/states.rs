//! Analytic pure states and the density kernels they induce.
//!
//! Units are dimensionless throughout (`hbar = m = omega = 1`).

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{hermite_eval, integrate_line, QuadratureSpec};

/// Position-representation density kernel `rho(x, x')`.
///
/// Implementations must be Hermitian, `rho(x, x') = conj(rho(x', x))`, with a
/// real nonnegative diagonal. Everything downstream (protocol, mesh,
/// reconstruction, fidelity) is written against this trait.
pub trait DensityKernel: Send + Sync {
    fn density(&self, x: f64, xp: f64) -> C64;

    /// `rho(y, y)`, the position probability density.
    fn diagonal(&self, y: f64) -> f64 {
        self.density(y, y).re
    }

    fn describe(&self) -> String {
        "custom kernel".to_string()
    }
}

/// Largest oscillator level accepted; log-gamma normalization stays exact
/// to double precision well past this.
pub const MAX_OSCILLATOR_LEVEL: u32 = 30;

const NORMALIZATION_TOLERANCE: f64 = 1e-8;

fn ln_oscillator_normalization(n: u32) -> f64 {
    let n_f = f64::from(n);
    -0.5 * (n_f * std::f64::consts::LN_2 + libm::lgamma(n_f + 1.0) + 0.5 * std::f64::consts::PI.ln())
}

/// `C_n exp(-x^2/2) H_n(x)` with `C_n = (2^n n! sqrt(pi))^(-1/2)`.
pub fn osc_wavefunction(n: u32, x: f64) -> C64 {
    C64::new((ln_oscillator_normalization(n) - 0.5 * x * x).exp() * hermite_eval(n, x), 0.0)
}

/// Harmonic-oscillator energy eigenstate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscillatorState {
    n: u32,
    ln_normalization: f64,
}

impl OscillatorState {
    pub fn new(n: u32) -> Result<Self> {
        if n > MAX_OSCILLATOR_LEVEL {
            return Err(invalid(format!(
                "oscillator level {n} exceeds the supported maximum {MAX_OSCILLATOR_LEVEL}"
            )));
        }
        let state = Self {
            n,
            ln_normalization: ln_oscillator_normalization(n),
        };
        let half = (2.0 * f64::from(n) + 1.0).sqrt() + 12.0;
        check_normalized(&state, -half, half)?;
        Ok(state)
    }

    pub fn level(&self) -> u32 {
        self.n
    }

    pub fn normalization(&self) -> f64 {
        self.ln_normalization.exp()
    }

    pub fn wavefunction(&self, x: f64) -> C64 {
        C64::new((self.ln_normalization - 0.5 * x * x).exp() * hermite_eval(self.n, x), 0.0)
    }
}

/// `C_sq exp(-(x - <x>)^2 / (2 sigma^2) + i <p> x)` with
/// `C_sq = (pi sigma^2)^(-1/4)`.
pub fn squeezed_wavefunction(s: &SqueezedCoherentState, x: f64) -> C64 {
    s.wavefunction(x)
}

/// Squeezed coherent Gaussian wavepacket.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezedCoherentState {
    mean_x: f64,
    mean_p: f64,
    sigma: f64,
    normalization: f64,
}

impl SqueezedCoherentState {
    pub fn new(mean_x: f64, mean_p: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("sigma must be positive and finite, got {sigma}")));
        }
        if !(mean_x.is_finite() && mean_p.is_finite()) {
            return Err(invalid("mean position and momentum must be finite"));
        }
        let state = Self {
            mean_x,
            mean_p,
            sigma,
            normalization: (std::f64::consts::PI * sigma * sigma).powf(-0.25),
        };
        check_normalized(&state, mean_x - 12.0 * sigma, mean_x + 12.0 * sigma)?;
        Ok(state)
    }

    pub fn mean_x(&self) -> f64 {
        self.mean_x
    }

    pub fn mean_p(&self) -> f64 {
        self.mean_p
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn wavefunction(&self, x: f64) -> C64 {
        let d = x - self.mean_x;
        let envelope = self.normalization * (-d * d / (2.0 * self.sigma * self.sigma)).exp();
        C64::from_polar(envelope, self.mean_p * x)
    }
}

impl DensityKernel for OscillatorState {
    fn density(&self, x: f64, xp: f64) -> C64 {
        self.wavefunction(x) * self.wavefunction(xp).conj()
    }
}

impl DensityKernel for SqueezedCoherentState {
    fn density(&self, x: f64, xp: f64) -> C64 {
        self.wavefunction(x) * self.wavefunction(xp).conj()
    }
}

fn check_normalized<K: DensityKernel>(state: &K, lo: f64, hi: f64) -> Result<()> {
    let weight = diagonal_weight(state, lo, hi, &QuadratureSpec::default())?;
    if (weight - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::NotNormalized { weight, lo, hi });
    }
    Ok(())
}

/// One of the shipped analytic pure states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateDescriptor", into = "StateDescriptor")]
pub enum PureState {
    Oscillator(OscillatorState),
    Squeezed(SqueezedCoherentState),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum StateDescriptor {
    Oscillator { n: u32 },
    Squeezed { mean_x: f64, mean_p: f64, sigma: f64 },
}

impl TryFrom<StateDescriptor> for PureState {
    type Error = Error;

    fn try_from(d: StateDescriptor) -> Result<Self> {
        match d {
            StateDescriptor::Oscillator { n } => PureState::oscillator(n),
            StateDescriptor::Squeezed { mean_x, mean_p, sigma } => PureState::squeezed(mean_x, mean_p, sigma),
        }
    }
}

impl From<PureState> for StateDescriptor {
    fn from(s: PureState) -> Self {
        match s {
            PureState::Oscillator(o) => StateDescriptor::Oscillator { n: o.n },
            PureState::Squeezed(q) => StateDescriptor::Squeezed {
                mean_x: q.mean_x,
                mean_p: q.mean_p,
                sigma: q.sigma,
            },
        }
    }
}

impl PureState {
    pub fn oscillator(n: u32) -> Result<Self> {
        OscillatorState::new(n).map(Self::Oscillator)
    }

    pub fn squeezed(mean_x: f64, mean_p: f64, sigma: f64) -> Result<Self> {
        SqueezedCoherentState::new(mean_x, mean_p, sigma).map(Self::Squeezed)
    }

    pub fn ground() -> Self {
        Self::oscillator(0).expect("ground state is normalized")
    }

    pub fn wavefunction(&self, x: f64) -> C64 {
        match self {
            Self::Oscillator(o) => o.wavefunction(x),
            Self::Squeezed(s) => s.wavefunction(x),
        }
    }
}

impl DensityKernel for PureState {
    fn density(&self, x: f64, xp: f64) -> C64 {
        self.wavefunction(x) * self.wavefunction(xp).conj()
    }

    fn describe(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PureState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Oscillator(o) => write!(f, "oscillator:{}", o.n),
            Self::Squeezed(s) => write!(f, "squeezed:{},{},{}", s.mean_x, s.mean_p, s.sigma),
        }
    }
}

fn parse_f64(what: &'static str, s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        what,
        reason: format!("{s:?}: {e}"),
    })
}

fn parse_level(s: &str) -> Result<u32> {
    s.trim().parse::<u32>().map_err(|e| Error::Parse {
        what: "oscillator level",
        reason: format!("{s:?}: {e}"),
    })
}

impl FromStr for PureState {
    type Err = Error;

    /// Accepts `oscillator:<n>`, `squeezed:<mean_x>,<mean_p>,<sigma>`, or the
    /// key-value form `kind=oscillator n=3` /
    /// `kind=squeezed mean_x=0 mean_p=0.5 sigma=0.1`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.contains('=') {
            return parse_key_value(s);
        }
        let (kind, args) = s.split_once(':').ok_or_else(|| Error::Parse {
            what: "state descriptor",
            reason: format!("{s:?}: expected oscillator:<n> or squeezed:<mean_x>,<mean_p>,<sigma>"),
        })?;
        match kind.trim() {
            "oscillator" | "osc" => PureState::oscillator(parse_level(args)?),
            "squeezed" | "sq" => {
                let parts: Vec<&str> = args.split(',').collect();
                if parts.len() != 3 {
                    return Err(Error::Parse {
                        what: "squeezed state",
                        reason: format!("{args:?}: expected three comma-separated numbers"),
                    });
                }
                PureState::squeezed(
                    parse_f64("mean_x", parts[0])?,
                    parse_f64("mean_p", parts[1])?,
                    parse_f64("sigma", parts[2])?,
                )
            }
            other => Err(Error::Parse {
                what: "state kind",
                reason: format!("unknown kind {other:?}"),
            }),
        }
    }
}

fn parse_key_value(s: &str) -> Result<PureState> {
    let mut kind = None;
    let (mut n, mut mean_x, mut mean_p, mut sigma) = (None, None, None, None);
    for token in s.split_whitespace() {
        let (k, v) = token.split_once('=').ok_or_else(|| Error::Parse {
            what: "state descriptor",
            reason: format!("token {token:?} is not key=value"),
        })?;
        match k {
            "kind" => kind = Some(v.to_string()),
            "n" => n = Some(parse_level(v)?),
            "mean_x" => mean_x = Some(parse_f64("mean_x", v)?),
            "mean_p" => mean_p = Some(parse_f64("mean_p", v)?),
            "sigma" => sigma = Some(parse_f64("sigma", v)?),
            _ => {
                return Err(Error::Parse {
                    what: "state descriptor",
                    reason: format!("unknown key {k:?}"),
                })
            }
        }
    }
    let missing = |key: &str| Error::Parse {
        what: "state descriptor",
        reason: format!("missing {key}"),
    };
    match kind.as_deref() {
        Some("oscillator") => PureState::oscillator(n.ok_or_else(|| missing("n"))?),
        Some("squeezed") => PureState::squeezed(
            mean_x.unwrap_or(0.0),
            mean_p.unwrap_or(0.0),
            sigma.ok_or_else(|| missing("sigma"))?,
        ),
        Some(other) => Err(Error::Parse {
            what: "state kind",
            reason: format!("unknown kind {other:?}"),
        }),
        None => Err(missing("kind")),
    }
}

/// `rho(x, x') = psi(x) conj(psi(x'))`.
pub fn density<K: DensityKernel + ?Sized>(state: &K, x: f64, xp: f64) -> C64 {
    state.density(x, xp)
}

/// Probability mass `int_a^b rho(y, y) dy` of the interval `[a, b]`.
pub fn diagonal_weight<K: DensityKernel + ?Sized>(state: &K, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    if a > b {
        return Err(invalid(format!("interval bounds reversed: [{a}, {b}]")));
    }
    let w = integrate_line(|y| C64::new(state.diagonal(y), 0.0), a, b, spec)?;
    Ok(w.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn test_states() -> Vec<PureState> {
        let mut v: Vec<PureState> = (0..=10).map(|n| PureState::oscillator(n).unwrap()).collect();
        for (mx, mp, s) in [(0.0, 0.5, 0.1), (0.0, 0.5, 0.4), (0.0, 0.5, 0.9), (0.7, -1.2, 1.3)] {
            v.push(PureState::squeezed(mx, mp, s).unwrap());
        }
        v
    }

    #[test]
    fn oscillator_values() {
        assert!((osc_wavefunction(0, 0.0).re - PI.powf(-0.25)).abs() < 1e-15);
        assert!((PI.powf(-0.25) - 0.75113).abs() < 1e-5);
        assert_eq!(osc_wavefunction(1, 0.0).re, 0.0);
        let c3 = (48.0 * PI.sqrt()).powf(-0.5);
        let want = c3 * (-0.5f64).exp() * -4.0;
        assert!((osc_wavefunction(3, 1.0).re - want).abs() < 1e-14);
    }

    #[test]
    fn squeezed_values() {
        let g = SqueezedCoherentState::new(0.0, 0.0, 1.0).unwrap();
        assert!((g.wavefunction(0.0).re - PI.powf(-0.25)).abs() < 1e-15);
        let s = SqueezedCoherentState::new(0.0, 0.5, 0.1).unwrap();
        let v = s.wavefunction(0.0);
        assert!((v.re - (PI * 0.01).powf(-0.25)).abs() < 1e-13);
        assert!((v.re - 2.3747).abs() < 1e-3);
        let real = SqueezedCoherentState::new(0.3, 0.0, 0.6).unwrap();
        for i in -30..30 {
            assert_eq!(real.wavefunction(f64::from(i) * 0.1).im, 0.0);
        }
    }

    #[test]
    fn density_values() {
        let g = PureState::ground();
        assert!((density(&g, 0.0, 0.0).re - 1.0 / PI.sqrt()).abs() < 1e-15);

        // independent evaluation of psi(x) conj(psi(x')) for the squeezed state
        let s = PureState::squeezed(0.0, 0.5, 0.1).unwrap();
        let (x, xp) = (0.05, -0.05);
        let c2 = 1.0 / (PI * 0.01).sqrt();
        let modulus = c2 * (-(x * x + xp * xp) / (2.0 * 0.01f64)).exp();
        let phase = 0.5 * (x - xp);
        let want = C64::new(modulus * phase.cos(), modulus * phase.sin());
        let got = density(&s, x, xp);
        assert!((got - want).norm() < 1e-12);
        assert!((modulus - 5.6419 * (-0.25f64).exp()).abs() < 1e-3);
        assert!((got.arg() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn weights() {
        let g = PureState::ground();
        assert!((diagonal_weight(&g, -8.0, 8.0, &spec()).unwrap() - 1.0).abs() < 1e-8);
        let w = diagonal_weight(&g, -0.05, 0.05, &spec()).unwrap();
        assert!((w - libm::erf(0.05)).abs() < 1e-14);
        assert!((w - 0.056372).abs() < 1e-6);
        assert_eq!(diagonal_weight(&g, 0.3, 0.3, &spec()).unwrap(), 0.0);
        assert!(diagonal_weight(&g, 1.0, 0.0, &spec()).is_err());
    }

    #[test]
    fn hermitian_exactly() {
        for s in test_states() {
            for i in 0..20 {
                for j in 0..20 {
                    let x = -3.0 + 0.31 * f64::from(i);
                    let xp = -2.7 + 0.29 * f64::from(j);
                    let a = density(&s, x, xp);
                    let b = density(&s, xp, x).conj();
                    // compares as values so that 0.0 and -0.0 agree
                    assert_eq!(a.re, b.re);
                    assert_eq!(a.im, b.im);
                }
            }
        }
    }

    #[test]
    fn cauchy_schwarz_grid() {
        for s in test_states() {
            for i in 0..50 {
                for j in 0..50 {
                    let x = -5.0 + 0.2 * f64::from(i);
                    let xp = -5.0 + 0.2 * f64::from(j);
                    let lhs = density(&s, x, xp).norm_sqr();
                    let rhs = density(&s, x, x).re * density(&s, xp, xp).re;
                    assert!(lhs <= rhs + 1e-12, "{s}: {lhs} > {rhs}");
                }
            }
        }
    }

    #[test]
    fn normalization_and_diagonal() {
        for s in test_states() {
            let (lo, hi) = match s {
                PureState::Oscillator(o) => {
                    let h = (2.0 * f64::from(o.level()) + 1.0).sqrt() + 10.0;
                    (-h, h)
                }
                PureState::Squeezed(q) => (q.mean_x() - 12.0 * q.sigma(), q.mean_x() + 12.0 * q.sigma()),
            };
            let w = diagonal_weight(&s, lo, hi, &spec()).unwrap();
            assert!((1.0 - 1e-6..=1.0 + 1e-8).contains(&w), "{s}: {w}");
            for i in -40..40 {
                let d = density(&s, f64::from(i) * 0.13, f64::from(i) * 0.13);
                assert_eq!(d.im, 0.0);
                assert!(d.re >= 0.0);
            }
        }
    }

    #[test]
    fn unit_squeezed_is_ground_state() {
        let s = SqueezedCoherentState::new(0.0, 0.0, 1.0).unwrap();
        for i in -100..=100 {
            let x = f64::from(i) * 0.05;
            assert!((s.wavefunction(x) - osc_wavefunction(0, x)).norm() < 1e-12);
        }
    }

    #[test]
    fn high_levels_normalized() {
        for n in [20, 25, 30] {
            assert!(OscillatorState::new(n).is_ok());
        }
        assert!(OscillatorState::new(31).is_err());
    }

    #[test]
    fn parse_descriptors() {
        assert_eq!("oscillator:3".parse::<PureState>().unwrap(), PureState::oscillator(3).unwrap());
        assert_eq!(
            "squeezed:0,0.5,0.1".parse::<PureState>().unwrap(),
            PureState::squeezed(0.0, 0.5, 0.1).unwrap()
        );
        assert_eq!("kind=oscillator n=3".parse::<PureState>().unwrap(), PureState::oscillator(3).unwrap());
        assert_eq!(
            "kind=squeezed mean_x=0 mean_p=0.5 sigma=0.1".parse::<PureState>().unwrap(),
            PureState::squeezed(0.0, 0.5, 0.1).unwrap()
        );
        for bad in ["", "oscillator", "oscillator:-1", "squeezed:0,1", "squeezed:0,0.5,0", "kind=ghost", "box:1"] {
            assert!(bad.parse::<PureState>().is_err(), "{bad:?} parsed");
        }
        let s = PureState::squeezed(0.25, -0.5, 0.4).unwrap();
        assert_eq!(s.to_string().parse::<PureState>().unwrap(), s);
    }

    #[test]
    fn json_descriptor() {
        let s = PureState::squeezed(0.0, 0.5, 0.1).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"kind":"squeezed","mean_x":0.0,"mean_p":0.5,"sigma":0.1}"#);
        assert_eq!(serde_json::from_str::<PureState>(&j).unwrap(), s);
        assert!(serde_json::from_str::<PureState>(r#"{"kind":"squeezed","mean_x":0,"mean_p":0,"sigma":-1}"#).is_err());
    }
}
