//! Precision profiles: measurement variance as a function of true concentration.
//!
//! Five parametric families are supported:
//!
//! | family             | parameters  | variance `g(mu)`   |
//! |--------------------|-------------|--------------------|
//! | `ConstantVariance` | `variance`  | `variance`         |
//! | `ConstantCV`       | `kappa`     | `(kappa mu)^2`     |
//! | `RockeLorenzato`   | `sigma, kappa` | `sigma^2 + (kappa mu)^2` |
//! | `LinearSD`         | `sigma, kappa` | `(sigma + kappa mu)^2`   |
//! | `Power`            | `a, b, p`   | `a + b mu^p`       |
//!
//! Profiles are immutable. Zero parameters are accepted at construction so
//! that noise-free designs can be simulated; fitting routines reject any
//! profile that evaluates to a non-positive variance where it is needed.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    ConstantVariance,
    #[serde(rename = "ConstantCV")]
    ConstantCv,
    RockeLorenzato,
    #[serde(rename = "LinearSD")]
    LinearSd,
    Power,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::ConstantVariance => "ConstantVariance",
            Family::ConstantCv => "ConstantCV",
            Family::RockeLorenzato => "RockeLorenzato",
            Family::LinearSd => "LinearSD",
            Family::Power => "Power",
        }
    }

    fn parse(s: &str) -> Option<Family> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "constantvariance" | "constvar" => Some(Family::ConstantVariance),
            "constantcv" | "ccv" => Some(Family::ConstantCv),
            "rockelorenzato" | "rl" => Some(Family::RockeLorenzato),
            "linearsd" => Some(Family::LinearSd),
            "power" => Some(Family::Power),
            _ => None,
        }
    }

    fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::ConstantVariance => &["variance"],
            Family::ConstantCv => &["kappa"],
            Family::RockeLorenzato | Family::LinearSd => &["sigma", "kappa"],
            Family::Power => &["a", "b", "p"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    ConstantVariance { variance: f64 },
    ConstantCv { kappa: f64 },
    RockeLorenzato { sigma: f64, kappa: f64 },
    LinearSd { sigma: f64, kappa: f64 },
    Power { a: f64, b: f64, p: f64 },
}

/// A variance-versus-concentration model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileSpec", into = "ProfileSpec")]
pub struct PrecisionProfile(Kind);

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidProfile(format!(
            "parameter {name} must be finite and non-negative, got {v}"
        )));
    }
    Ok(())
}

impl PrecisionProfile {
    pub fn constant_variance(variance: f64) -> Result<Self> {
        check_nonneg("variance", variance)?;
        Ok(Self(Kind::ConstantVariance { variance }))
    }

    pub fn constant_cv(kappa: f64) -> Result<Self> {
        check_nonneg("kappa", kappa)?;
        Ok(Self(Kind::ConstantCv { kappa }))
    }

    /// `g(mu) = sigma^2 + (kappa mu)^2`, with `sigma` in concentration units.
    pub fn rocke_lorenzato(sigma: f64, kappa: f64) -> Result<Self> {
        check_nonneg("sigma", sigma)?;
        check_nonneg("kappa", kappa)?;
        Ok(Self(Kind::RockeLorenzato { sigma, kappa }))
    }

    /// `g(mu) = (sigma + kappa mu)^2`.
    pub fn linear_sd(sigma: f64, kappa: f64) -> Result<Self> {
        check_nonneg("sigma", sigma)?;
        check_nonneg("kappa", kappa)?;
        Ok(Self(Kind::LinearSd { sigma, kappa }))
    }

    /// `g(mu) = a + b mu^p`, `p > 0`.
    pub fn power(a: f64, b: f64, p: f64) -> Result<Self> {
        check_nonneg("a", a)?;
        check_nonneg("b", b)?;
        if !p.is_finite() || p <= 0.0 {
            return Err(Error::InvalidProfile(format!(
                "power exponent must be finite and positive, got {p}"
            )));
        }
        Ok(Self(Kind::Power { a, b, p }))
    }

    /// Builds a profile from a family and its parameters in canonical order
    /// (see the module table).
    pub fn from_params(family: Family, params: &[f64]) -> Result<Self> {
        let want = family.param_names().len();
        if params.len() != want {
            return Err(Error::InvalidProfile(format!(
                "{} takes {want} parameters, got {}",
                family.name(),
                params.len()
            )));
        }
        match family {
            Family::ConstantVariance => Self::constant_variance(params[0]),
            Family::ConstantCv => Self::constant_cv(params[0]),
            Family::RockeLorenzato => Self::rocke_lorenzato(params[0], params[1]),
            Family::LinearSd => Self::linear_sd(params[0], params[1]),
            Family::Power => Self::power(params[0], params[1], params[2]),
        }
    }

    pub fn family(&self) -> Family {
        match self.0 {
            Kind::ConstantVariance { .. } => Family::ConstantVariance,
            Kind::ConstantCv { .. } => Family::ConstantCv,
            Kind::RockeLorenzato { .. } => Family::RockeLorenzato,
            Kind::LinearSd { .. } => Family::LinearSd,
            Kind::Power { .. } => Family::Power,
        }
    }

    /// Parameters in canonical order.
    pub fn params(&self) -> Vec<f64> {
        match self.0 {
            Kind::ConstantVariance { variance } => vec![variance],
            Kind::ConstantCv { kappa } => vec![kappa],
            Kind::RockeLorenzato { sigma, kappa } | Kind::LinearSd { sigma, kappa } => {
                vec![sigma, kappa]
            }
            Kind::Power { a, b, p } => vec![a, b, p],
        }
    }

    /// Variance at concentration `mu`.
    pub fn evaluate(&self, mu: f64) -> Result<f64> {
        if !mu.is_finite() {
            return Err(Error::domain(format!("concentration must be finite, got {mu}")));
        }
        if mu < 0.0 && matches!(self.0, Kind::Power { .. }) {
            return Err(Error::domain(format!(
                "power profile is undefined at negative concentration {mu}"
            )));
        }
        Ok(self.at(mu))
    }

    /// Unchecked evaluation for inner loops. The power family uses `|mu|`.
    #[inline]
    pub fn at(&self, mu: f64) -> f64 {
        match self.0 {
            Kind::ConstantVariance { variance } => variance,
            Kind::ConstantCv { kappa } => (kappa * mu).powi(2),
            Kind::RockeLorenzato { sigma, kappa } => sigma * sigma + (kappa * mu).powi(2),
            Kind::LinearSd { sigma, kappa } => (sigma + kappa * mu).powi(2),
            Kind::Power { a, b, p } => a + b * mu.abs().powf(p),
        }
    }

    /// Returns a profile whose variance is `lambda` times this one's.
    pub fn scale(&self, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::domain(format!(
                "scale factor must be finite and positive, got {lambda}"
            )));
        }
        let root = lambda.sqrt();
        Ok(Self(match self.0 {
            Kind::ConstantVariance { variance } => Kind::ConstantVariance {
                variance: variance * lambda,
            },
            Kind::ConstantCv { kappa } => Kind::ConstantCv { kappa: kappa * root },
            Kind::RockeLorenzato { sigma, kappa } => Kind::RockeLorenzato {
                sigma: sigma * root,
                kappa: kappa * root,
            },
            Kind::LinearSd { sigma, kappa } => Kind::LinearSd {
                sigma: sigma * root,
                kappa: kappa * root,
            },
            Kind::Power { a, b, p } => Kind::Power {
                a: a * lambda,
                b: b * lambda,
                p,
            },
        }))
    }

    /// True when every variance parameter is zero, i.e. the profile describes
    /// noise-free measurement.
    pub fn is_noise_free(&self) -> bool {
        match self.0 {
            Kind::ConstantVariance { variance } => variance == 0.0,
            Kind::ConstantCv { kappa } => kappa == 0.0,
            Kind::RockeLorenzato { sigma, kappa } | Kind::LinearSd { sigma, kappa } => {
                sigma == 0.0 && kappa == 0.0
            }
            Kind::Power { a, b, .. } => a == 0.0 && b == 0.0,
        }
    }
}

impl fmt::Display for PrecisionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.family().name())?;
        for (i, (name, v)) in self
            .family()
            .param_names()
            .iter()
            .zip(self.params())
            .enumerate()
        {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name}={v}")?;
        }
        write!(f, ")")
    }
}

/// JSON form: `{"family": "RockeLorenzato", "params": {"sigma": 5, "kappa": 0.1}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub family: String,
    pub params: BTreeMap<String, f64>,
}

impl TryFrom<ProfileSpec> for PrecisionProfile {
    type Error = Error;

    fn try_from(spec: ProfileSpec) -> Result<Self> {
        let family = Family::parse(&spec.family)
            .ok_or_else(|| Error::InvalidProfile(format!("unknown family {:?}", spec.family)))?;
        let names = family.param_names();
        if let Some(extra) = spec.params.keys().find(|k| !names.contains(&k.as_str())) {
            return Err(Error::InvalidProfile(format!(
                "{} has no parameter {extra:?}",
                family.name()
            )));
        }
        let values = names
            .iter()
            .map(|name| {
                spec.params.get(*name).copied().ok_or_else(|| {
                    Error::InvalidProfile(format!("{} is missing {name:?}", family.name()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PrecisionProfile::from_params(family, &values)
    }
}

impl From<PrecisionProfile> for ProfileSpec {
    fn from(p: PrecisionProfile) -> Self {
        let family = p.family();
        ProfileSpec {
            family: family.name().to_string(),
            params: family
                .param_names()
                .iter()
                .map(|s| s.to_string())
                .zip(p.params())
                .collect(),
        }
    }
}
