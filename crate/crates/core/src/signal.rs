//! Closed-form Ramsey signals and their analytic parameter gradients.
//!
//! Every model is a function of `ω·t` and `γ·t` only, so times and rates are
//! dimensionless reciprocal pairs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Real};

/// Which Pauli expectation the closing pulse maps onto the readout axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quadrature {
    X,
    Y,
}

impl fmt::Display for Quadrature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quadrature::X => f.write_str("X"),
            Quadrature::Y => f.write_str("Y"),
        }
    }
}

impl FromStr for Quadrature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "X" | "x" => Ok(Quadrature::X),
            "Y" | "y" => Ok(Quadrature::Y),
            other => Err(Error::domain(format!("unknown quadrature `{other}`"))),
        }
    }
}

/// Model parameters, declared in canonical order (ω, γ, A, B, φ).
///
/// The derived `Ord` is the canonical order used for Fisher-matrix indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Param {
    #[serde(rename = "omega")]
    Omega,
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "A")]
    Amplitude,
    #[serde(rename = "B")]
    Offset,
    #[serde(rename = "phi")]
    Phase,
}

impl Param {
    pub const ALL: [Param; 5] = [
        Param::Omega,
        Param::Gamma,
        Param::Amplitude,
        Param::Offset,
        Param::Phase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Omega => "omega",
            Param::Gamma => "gamma",
            Param::Amplitude => "A",
            Param::Offset => "B",
            Param::Phase => "phi",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "omega" | "w" | "ω" => Ok(Param::Omega),
            "gamma" | "g" | "γ" => Ok(Param::Gamma),
            "A" | "a" | "amplitude" => Ok(Param::Amplitude),
            "B" | "b" | "offset" => Ok(Param::Offset),
            "phi" | "phase" | "φ" => Ok(Param::Phase),
            other => Err(Error::domain(format!("unknown parameter `{other}`"))),
        }
    }
}

/// Detuning and dephasing rate of a single qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitParams<T> {
    pub omega: T,
    pub gamma: T,
}

impl<T: Real> QubitParams<T> {
    pub fn new(omega: T, gamma: T) -> Result<Self> {
        let p = QubitParams { omega, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega.is_finite() || !self.gamma.is_finite() {
            return Err(Error::domain("qubit parameters must be finite"));
        }
        if self.gamma < T::zero() {
            return Err(Error::domain(format!(
                "dephasing rate must be non-negative, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Model family tag, used where only the functional form matters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    TwoParam,
    FiveParam,
    PureDecay,
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "two-param" | "two_param" | "TwoParam" => Ok(ModelFamily::TwoParam),
            "five-param" | "five_param" | "FiveParam" | "nv" => Ok(ModelFamily::FiveParam),
            "pure-decay" | "pure_decay" | "PureDecay" | "nmr" => Ok(ModelFamily::PureDecay),
            other => Err(Error::domain(format!("unknown model family `{other}`"))),
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelFamily::TwoParam => "two-param",
            ModelFamily::FiveParam => "five-param",
            ModelFamily::PureDecay => "pure-decay",
        })
    }
}

/// Ramsey signal model with its current parameter values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum RamseyModel<T> {
    /// `cos(ωt)e^{-γt}` / `sin(ωt)e^{-γt}`.
    TwoParam { qubit: QubitParams<T> },
    /// `A·cos(ωt+φ)e^{-γt} + B` and its sine partner.
    FiveParam {
        amplitude: T,
        offset: T,
        phase: T,
        qubit: QubitParams<T>,
    },
    /// `A·e^{-γt}`, independent of the quadrature.
    PureDecay { amplitude: T, gamma: T },
}

impl<T: Real> RamseyModel<T> {
    pub fn two_param(omega: T, gamma: T) -> Self {
        RamseyModel::TwoParam {
            qubit: QubitParams { omega, gamma },
        }
    }

    pub fn five_param(amplitude: T, offset: T, phase: T, omega: T, gamma: T) -> Self {
        RamseyModel::FiveParam {
            amplitude,
            offset,
            phase,
            qubit: QubitParams { omega, gamma },
        }
    }

    pub fn pure_decay(amplitude: T, gamma: T) -> Self {
        RamseyModel::PureDecay { amplitude, gamma }
    }

    pub fn family(&self) -> ModelFamily {
        match self {
            RamseyModel::TwoParam { .. } => ModelFamily::TwoParam,
            RamseyModel::FiveParam { .. } => ModelFamily::FiveParam,
            RamseyModel::PureDecay { .. } => ModelFamily::PureDecay,
        }
    }

    fn family_name(&self) -> &'static str {
        match self {
            RamseyModel::TwoParam { .. } => "two-param",
            RamseyModel::FiveParam { .. } => "five-param",
            RamseyModel::PureDecay { .. } => "pure-decay",
        }
    }

    /// Parameters of this model in canonical order.
    pub fn params(&self) -> &'static [Param] {
        match self {
            RamseyModel::TwoParam { .. } => &[Param::Omega, Param::Gamma],
            RamseyModel::FiveParam { .. } => &Param::ALL,
            RamseyModel::PureDecay { .. } => &[Param::Gamma, Param::Amplitude],
        }
    }

    pub fn has_param(&self, p: Param) -> bool {
        self.params().contains(&p)
    }

    pub fn get(&self, p: Param) -> Result<T> {
        let v = match (self, p) {
            (RamseyModel::TwoParam { qubit } | RamseyModel::FiveParam { qubit, .. }, Param::Omega) => qubit.omega,
            (RamseyModel::TwoParam { qubit } | RamseyModel::FiveParam { qubit, .. }, Param::Gamma) => qubit.gamma,
            (RamseyModel::FiveParam { amplitude, .. }, Param::Amplitude) => *amplitude,
            (RamseyModel::FiveParam { offset, .. }, Param::Offset) => *offset,
            (RamseyModel::FiveParam { phase, .. }, Param::Phase) => *phase,
            (RamseyModel::PureDecay { gamma, .. }, Param::Gamma) => *gamma,
            (RamseyModel::PureDecay { amplitude, .. }, Param::Amplitude) => *amplitude,
            _ => return Err(self.unknown(p)),
        };
        Ok(v)
    }

    pub fn set(&mut self, p: Param, value: T) -> Result<()> {
        let unknown = self.unknown(p);
        let slot = match (self, p) {
            (RamseyModel::TwoParam { qubit } | RamseyModel::FiveParam { qubit, .. }, Param::Omega) => &mut qubit.omega,
            (RamseyModel::TwoParam { qubit } | RamseyModel::FiveParam { qubit, .. }, Param::Gamma) => &mut qubit.gamma,
            (RamseyModel::FiveParam { amplitude, .. }, Param::Amplitude) => amplitude,
            (RamseyModel::FiveParam { offset, .. }, Param::Offset) => offset,
            (RamseyModel::FiveParam { phase, .. }, Param::Phase) => phase,
            (RamseyModel::PureDecay { gamma, .. }, Param::Gamma) => gamma,
            (RamseyModel::PureDecay { amplitude, .. }, Param::Amplitude) => amplitude,
            _ => return Err(unknown),
        };
        *slot = value;
        Ok(())
    }

    pub fn with(mut self, p: Param, value: T) -> Result<Self> {
        self.set(p, value)?;
        Ok(self)
    }

    pub fn gamma(&self) -> T {
        match self {
            RamseyModel::TwoParam { qubit } | RamseyModel::FiveParam { qubit, .. } => qubit.gamma,
            RamseyModel::PureDecay { gamma, .. } => *gamma,
        }
    }

    /// Checks finiteness and `γ ≥ 0`.
    pub fn validate(&self) -> Result<()> {
        for &p in self.params() {
            let v = self.get(p)?;
            if !v.is_finite() {
                return Err(Error::domain(format!("parameter {p} is not finite")));
            }
        }
        if self.gamma() < T::zero() {
            return Err(Error::domain("dephasing rate must be non-negative"));
        }
        Ok(())
    }

    fn unknown(&self, param: Param) -> Error {
        Error::UnknownParam {
            param,
            model: self.family_name(),
        }
    }

    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .params()
            .iter()
            .map(|&p| format!("{}={}", p, self.get(p).map(to_f64).unwrap_or(f64::NAN)))
            .collect();
        format!("{}({})", self.family_name(), parts.join(", "))
    }
}

fn check_time<T: Real>(t: T) -> Result<()> {
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(Error::domain(format!("time must be finite and non-negative, got {t}")));
    }
    Ok(())
}

/// Expected measurement outcome of `model` on quadrature `q` after free evolution `t`.
pub fn expectation<T: Real>(model: &RamseyModel<T>, q: Quadrature, t: T) -> Result<T> {
    check_time(t)?;
    Ok(expectation_unchecked(model, q, t))
}

#[inline]
pub(crate) fn expectation_unchecked<T: Real>(model: &RamseyModel<T>, q: Quadrature, t: T) -> T {
    match *model {
        RamseyModel::TwoParam { qubit } => {
            let env = (-qubit.gamma * t).exp();
            match q {
                Quadrature::X => (qubit.omega * t).cos() * env,
                Quadrature::Y => (qubit.omega * t).sin() * env,
            }
        }
        RamseyModel::FiveParam {
            amplitude,
            offset,
            phase,
            qubit,
        } => {
            let env = (-qubit.gamma * t).exp();
            let arg = qubit.omega * t + phase;
            let osc = match q {
                Quadrature::X => arg.cos(),
                Quadrature::Y => arg.sin(),
            };
            amplitude * osc * env + offset
        }
        RamseyModel::PureDecay { amplitude, gamma } => amplitude * (-gamma * t).exp(),
    }
}

/// Analytic partial derivatives of [`expectation`] with respect to `free`, in the order given.
pub fn expectation_gradient<T: Real>(model: &RamseyModel<T>, q: Quadrature, t: T, free: &[Param]) -> Result<Vec<T>> {
    check_time(t)?;
    let mut out = Vec::with_capacity(free.len());
    for &p in free {
        if !model.has_param(p) {
            return Err(model.unknown(p));
        }
        out.push(partial(model, q, t, p));
    }
    Ok(out)
}

/// Single partial derivative; `p` must belong to the model.
#[inline]
pub(crate) fn partial<T: Real>(model: &RamseyModel<T>, q: Quadrature, t: T, p: Param) -> T {
    match *model {
        RamseyModel::TwoParam { qubit } => {
            let env = (-qubit.gamma * t).exp();
            let (s, c) = (qubit.omega * t).sin_cos();
            match (q, p) {
                (Quadrature::X, Param::Omega) => -t * s * env,
                (Quadrature::X, Param::Gamma) => -t * c * env,
                (Quadrature::Y, Param::Omega) => t * c * env,
                (Quadrature::Y, Param::Gamma) => -t * s * env,
                _ => T::zero(),
            }
        }
        RamseyModel::FiveParam {
            amplitude,
            phase,
            qubit,
            ..
        } => {
            let env = (-qubit.gamma * t).exp();
            let (s, c) = (qubit.omega * t + phase).sin_cos();
            // Y is the X form with cos -> sin, so d/darg differs by a sign swap.
            let (val, dval) = match q {
                Quadrature::X => (c, -s),
                Quadrature::Y => (s, c),
            };
            match p {
                Param::Omega => amplitude * t * dval * env,
                Param::Gamma => -t * amplitude * val * env,
                Param::Amplitude => val * env,
                Param::Offset => T::one(),
                Param::Phase => amplitude * dval * env,
            }
        }
        RamseyModel::PureDecay { amplitude, gamma } => {
            let env = (-gamma * t).exp();
            match p {
                Param::Gamma => -t * amplitude * env,
                Param::Amplitude => env,
                _ => T::zero(),
            }
        }
    }
}
