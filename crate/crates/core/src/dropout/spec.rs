use serde::{Deserialize, Serialize};

use super::schedule::ScheduleKind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    None,
    Standard,
    Gaussian,
    Variational,
    Concrete,
    #[serde(alias = "csigmoid")]
    CurriculumSigmoid,
    #[serde(alias = "clinear")]
    CurriculumLinear,
    #[serde(alias = "cexp")]
    CurriculumExp,
}

/// Which activation a mask multiplies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Site {
    /// Embedding output.
    Input,
    /// Recurrent state entering each layer's gate products.
    Hidden,
    /// Top hidden state entering the decoder.
    Output,
    All,
}

impl Site {
    pub fn covers(self, other: Site) -> bool {
        self == Site::All || self == other
    }
}

/// Where the dropout rate of a variant comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateSource {
    Fixed(f64),
    Learned,
    Scheduled(ScheduleKind),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DropoutSpec {
    pub variant: Variant,
    pub site: Site,
    /// Rate of the static variants.
    pub p_d: f64,
    /// Final rate of the curriculum schedules.
    pub p_max: f64,
    /// Concrete relaxation temperature.
    pub tau: f64,
    /// Concrete log floor.
    pub eps: f64,
    /// Weight of the concrete rate regularizer.
    pub lambda: f64,
    /// Starting rate of the learned (concrete) variant.
    pub init_rate: f64,
}

impl Default for DropoutSpec {
    fn default() -> Self {
        DropoutSpec {
            variant: Variant::None,
            site: Site::All,
            p_d: 0.2,
            p_max: 0.3,
            tau: 0.1,
            eps: 1e-6,
            lambda: 0.1,
            init_rate: 0.95,
        }
    }
}

impl DropoutSpec {
    pub fn new(variant: Variant, site: Site) -> Self {
        DropoutSpec {
            variant,
            site,
            ..Default::default()
        }
    }

    pub fn with_rate(mut self, p_d: f64) -> Self {
        self.p_d = p_d;
        self
    }

    pub fn with_p_max(mut self, p_max: f64) -> Self {
        self.p_max = p_max;
        self
    }

    pub fn is_active(&self) -> bool {
        self.variant != Variant::None
    }

    /// Masks held for a whole sequence chunk rather than redrawn per timestep.
    pub fn time_fixed(&self) -> bool {
        !matches!(
            self.variant,
            Variant::None | Variant::Standard | Variant::Gaussian
        )
    }

    pub fn rate_source(&self) -> RateSource {
        match self.variant {
            Variant::None => RateSource::Fixed(0.0),
            Variant::Standard | Variant::Gaussian | Variant::Variational => {
                RateSource::Fixed(self.p_d)
            }
            Variant::Concrete => RateSource::Learned,
            Variant::CurriculumSigmoid => RateSource::Scheduled(ScheduleKind::Sigmoid),
            Variant::CurriculumLinear => RateSource::Scheduled(ScheduleKind::Linear),
            Variant::CurriculumExp => RateSource::Scheduled(ScheduleKind::Exponential),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, v: f64, range: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(
                    format!("dropout.{key}"),
                    format!("{key} = {v} is outside {range}"),
                ))
            }
        };
        check((0.0..1.0).contains(&self.p_d), "p_d", self.p_d, "[0, 1)")?;
        check(self.p_max > 0.0 && self.p_max < 1.0, "p_max", self.p_max, "(0, 1)")?;
        check(self.tau > 0.0, "tau", self.tau, "(0, inf)")?;
        check(self.eps > 0.0 && self.eps < 0.01, "eps", self.eps, "(0, 0.01)")?;
        check(self.lambda >= 0.0, "lambda", self.lambda, "[0, inf)")?;
        check(
            self.init_rate > 0.0 && self.init_rate < 1.0,
            "init_rate",
            self.init_rate,
            "(0, 1)",
        )
    }
}
