//! Classical environments coupled to the quantum subsystem.
//!
//! The shipped [`BathModel`] is a heat bath whose state is its energy `H_e`
//! and whose thermodynamics is an entropy curve `S_e(H_e)`. The
//! [`Environment`] trait exposes the classical Poisson and standard
//! dissipative brackets as hooks (both vanish for a heat bath) together with
//! the coupling bracket `⟬A_e, B_e⟭^Q = (dA_e/dH_e) ζ T_e (dB_e/dH_e)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::operator::HermitianOperator;

/// Classical state of a heat bath: its energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathState {
    pub energy: f64,
}

impl BathState {
    pub fn new(energy: f64) -> Self {
        Self { energy }
    }
}

/// Classical half of a joint observable, as a function of the bath state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvObservable {
    Zero,
    Energy,
    Entropy,
}

pub trait Environment: fmt::Debug + Send + Sync {
    fn entropy(&self, state: &BathState) -> Result<f64>;

    /// `1/T_e = dS_e/dH_e`.
    fn temperature(&self, state: &BathState) -> Result<f64>;

    fn value(&self, obs: EnvObservable, state: &BathState) -> Result<f64> {
        match obs {
            EnvObservable::Zero => Ok(0.0),
            EnvObservable::Energy => Ok(state.energy),
            EnvObservable::Entropy => self.entropy(state),
        }
    }

    /// `dA_e/dH_e`.
    fn derivative(&self, obs: EnvObservable, state: &BathState) -> Result<f64> {
        match obs {
            EnvObservable::Zero => Ok(0.0),
            EnvObservable::Energy => Ok(1.0),
            EnvObservable::Entropy => Ok(1.0 / self.temperature(state)?),
        }
    }

    /// Classical Poisson bracket `⟦A_e, B_e⟧_x`.
    fn poisson_bracket(&self, _a: EnvObservable, _b: EnvObservable, _state: &BathState) -> f64 {
        0.0
    }

    /// Standard classical dissipative bracket `⟬A_e, B_e⟭_x`.
    fn dissipative_bracket(
        &self,
        _a: EnvObservable,
        _b: EnvObservable,
        _state: &BathState,
    ) -> f64 {
        0.0
    }

    /// Coupling dissipative bracket of one channel with friction `zeta`.
    fn coupling_bracket(
        &self,
        zeta: f64,
        a: EnvObservable,
        b: EnvObservable,
        state: &BathState,
    ) -> Result<f64> {
        let t = self.temperature(state)?;
        Ok(self.derivative(a, state)? * zeta * t * self.derivative(b, state)?)
    }
}

/// Thermodynamic relation `S_e(H_e)` of a heat bath.
#[derive(Debug, Clone, PartialEq)]
pub enum EntropyCurve {
    /// `S_e = H_e/T₀`: infinite heat capacity, fixed temperature.
    ConstantTemperature { temperature: f64 },
    /// `S_e = C ln H_e`, so `T_e = H_e/C`.
    Logarithmic { heat_capacity: f64 },
    /// Monotone cubic interpolation through tabulated `(H_e, S_e)` points.
    Tabulated(TabulatedCurve),
}

impl EntropyCurve {
    pub fn constant_temperature(temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::invalid(
                "temperature",
                format!("must be positive, got {temperature}"),
            ));
        }
        Ok(Self::ConstantTemperature { temperature })
    }

    pub fn logarithmic(heat_capacity: f64) -> Result<Self> {
        if !(heat_capacity > 0.0 && heat_capacity.is_finite()) {
            return Err(Error::invalid(
                "heat_capacity",
                format!("must be positive, got {heat_capacity}"),
            ));
        }
        Ok(Self::Logarithmic { heat_capacity })
    }

    /// Closed energy interval on which the curve is defined (open ends are
    /// reported as infinite or as the excluded boundary).
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Self::ConstantTemperature { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Self::Logarithmic { .. } => (0.0, f64::INFINITY),
            Self::Tabulated(t) => (t.energies[0], *t.energies.last().unwrap()),
        }
    }

    fn check_domain(&self, energy: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        let inside = match self {
            Self::Logarithmic { .. } => energy > 0.0 && energy.is_finite(),
            _ => energy >= lo && energy <= hi && energy.is_finite(),
        };
        if inside {
            Ok(())
        } else {
            Err(Error::OutOfDomain { energy, lo, hi })
        }
    }

    pub fn entropy(&self, energy: f64) -> Result<f64> {
        self.check_domain(energy)?;
        Ok(match self {
            Self::ConstantTemperature { temperature } => energy / temperature,
            Self::Logarithmic { heat_capacity } => heat_capacity * energy.ln(),
            Self::Tabulated(t) => t.eval(energy).0,
        })
    }

    /// `dS_e/dH_e`.
    pub fn slope(&self, energy: f64) -> Result<f64> {
        self.check_domain(energy)?;
        Ok(match self {
            Self::ConstantTemperature { temperature } => 1.0 / temperature,
            Self::Logarithmic { heat_capacity } => heat_capacity / energy,
            Self::Tabulated(t) => t.eval(energy).1,
        })
    }
}

/// Piecewise cubic Hermite interpolant with Fritsch–Carlson slopes; strictly
/// increasing data gives a monotone curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCurve {
    energies: Vec<f64>,
    entropies: Vec<f64>,
    slopes: Vec<f64>,
}

impl TabulatedCurve {
    pub fn from_points(energies: Vec<f64>, entropies: Vec<f64>) -> Result<Self> {
        if energies.len() != entropies.len() {
            return Err(Error::Table("column lengths differ".into()));
        }
        if energies.len() < 2 {
            return Err(Error::Table("at least two points required".into()));
        }
        if energies.iter().chain(&entropies).any(|x| !x.is_finite()) {
            return Err(Error::Table("non-finite value".into()));
        }
        for (k, w) in energies.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::Table(format!(
                    "energies not strictly increasing at row {}",
                    k + 2
                )));
            }
        }
        for (k, w) in entropies.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::Table(format!(
                    "entropies not strictly increasing at row {}",
                    k + 2
                )));
            }
        }
        let slopes = pchip_slopes(&energies, &entropies);
        Ok(Self {
            energies,
            entropies,
            slopes,
        })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn entropies(&self) -> &[f64] {
        &self.entropies
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.energies.len();
        let k = self.energies.partition_point(|&e| e <= x).clamp(1, n - 1) - 1;
        let (x0, x1) = (self.energies[k], self.energies[k + 1]);
        let (y0, y1) = (self.entropies[k], self.entropies[k + 1]);
        let (d0, d1) = (self.slopes[k], self.slopes[k + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1;
        let deriv = ((6.0 * t2 - 6.0 * t) * y0 + (-6.0 * t2 + 6.0 * t) * y1) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (3.0 * t2 - 2.0 * t) * d1;
        (value, deriv)
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

impl FromStr for TabulatedCurve {
    type Err = Error;

    /// Two numeric columns `H_e S_e` separated by whitespace or a comma.
    /// Blank lines and lines starting with `#` are skipped.
    fn from_str(text: &str) -> Result<Self> {
        let mut energies = Vec::new();
        let mut entropies = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if fields.len() != 2 {
                return Err(Error::Table(format!(
                    "line {}: expected 2 columns, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Table(format!("line {}: {e}", lineno + 1)))
            };
            energies.push(parse(fields[0])?);
            entropies.push(parse(fields[1])?);
        }
        Self::from_points(energies, entropies)
    }
}

/// Heat bath characterized by its entropy curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BathModel {
    curve: EntropyCurve,
}

impl BathModel {
    pub fn new(curve: EntropyCurve) -> Self {
        Self { curve }
    }

    pub fn constant_temperature(temperature: f64) -> Result<Self> {
        Ok(Self::new(EntropyCurve::constant_temperature(temperature)?))
    }

    pub fn curve(&self) -> &EntropyCurve {
        &self.curve
    }
}

impl Environment for BathModel {
    fn entropy(&self, state: &BathState) -> Result<f64> {
        self.curve.entropy(state.energy)
    }

    fn temperature(&self, state: &BathState) -> Result<f64> {
        let slope = self.curve.slope(state.energy)?;
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(Error::NonPositiveSlope {
                energy: state.energy,
                slope,
            });
        }
        Ok(1.0 / slope)
    }
}

/// Bath temperature `T_e = 1/(dS_e/dH_e)` at the given state.
pub fn temperature<E: Environment + ?Sized>(model: &E, state: &BathState) -> Result<f64> {
    model.temperature(state)
}

/// One dissipative coupling: observable `Q` and friction coefficient `ζ ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingChannel {
    q: HermitianOperator,
    zeta: f64,
    label: String,
}

impl CouplingChannel {
    pub fn new(q: HermitianOperator, zeta: f64) -> Result<Self> {
        if !(zeta >= 0.0 && zeta.is_finite()) {
            return Err(Error::invalid(
                "zeta",
                format!("friction must be finite and non-negative (PSD bracket), got {zeta}"),
            ));
        }
        Ok(Self {
            q,
            zeta,
            label: String::from("Q"),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn q(&self) -> &HermitianOperator {
        &self.q
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// `ℰ^Q_{H_e,H_e}`, `ℰ^Q_{H_e,S_e}`, `ℰ^Q_{S_e,S_e}` at a bath state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketCoefficients {
    pub e_hh: f64,
    pub e_hs: f64,
    pub e_ss: f64,
}

impl BracketCoefficients {
    /// Eigenvalues of `[[E_HH, E_HS], [E_HS, E_SS]]`, ascending.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.e_hh + self.e_ss);
        let half_diff = 0.5 * (self.e_hh - self.e_ss);
        let r = half_diff.hypot(self.e_hs);
        (mean - r, mean + r)
    }
}

pub fn bracket_coefficients<E: Environment + ?Sized>(
    channel: &CouplingChannel,
    env: &E,
    state: &BathState,
) -> Result<BracketCoefficients> {
    use EnvObservable::{Energy, Entropy};
    let z = channel.zeta();
    Ok(BracketCoefficients {
        e_hh: env.coupling_bracket(z, Energy, Energy, state)?,
        e_hs: env.coupling_bracket(z, Energy, Entropy, state)?,
        e_ss: env.coupling_bracket(z, Entropy, Entropy, state)?,
    })
}
