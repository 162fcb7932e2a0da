//! Run configuration: every knob that affects an artifact, loaded from a flat
//! `key = value` file and overridden by explicit settings.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::configdata::{MeasuredData, Mode, SamplerParams};
use crate::cp1::SignConvention;
use crate::error::{Error, Result};
use crate::h3measure::{Family, PowerFamily, VisualFamily};

/// Which boundary family drives the measures.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum FamilySpec {
    #[default]
    Visual,
    /// Visual density raised to the power `s` and renormalized.
    Power(f64),
}

impl FamilySpec {
    pub fn family(&self) -> Result<Family> {
        Ok(match self {
            Self::Visual => Family::Visual(VisualFamily),
            Self::Power(s) => Family::Power(PowerFamily::new(*s)?),
        })
    }
}

impl std::fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Visual => write!(f, "visual"),
            Self::Power(s) => write!(f, "power:{s}"),
        }
    }
}

impl FromStr for FamilySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "visual" {
            return Ok(Self::Visual);
        }
        s.strip_prefix("power:")
            .and_then(|v| v.parse().ok())
            .map(Self::Power)
            .ok_or_else(|| Error::InvalidConfig(format!("family must be `visual` or `power:<s>`, got {s:?}")))
    }
}

impl Serialize for FamilySpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FamilySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Mode,
    pub convention: SignConvention,
    pub family: FamilySpec,
    pub seed: u64,
    /// Ball radius for grow and pleat.
    pub depth: usize,
    pub root_burn_in: usize,
    pub root_thin: usize,
    pub quad_thin: usize,
    pub kernel_burn_in: usize,
    pub kernel_thin: usize,
    /// Pseudo-marginal sample count for the sym-mode root target.
    pub k_pseudo: usize,
    pub reject_budget: usize,
    /// Barycenter window radius normalizing `μ³`.
    pub window: f64,
    /// Sample size per population in statistical checks.
    pub samples: usize,
    /// Block size of the energy tests.
    pub block: usize,
    pub permutations: usize,
    /// Significance level of the statistical checks.
    pub alpha: f64,
    /// Tolerance of the algebraic identities.
    pub tol_identity: f64,
    /// Tolerance of agreement with independent oracles.
    pub tol_oracle: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = SamplerParams::default();
        Self {
            mode: Mode::Raw,
            convention: SignConvention::Negative,
            family: FamilySpec::Visual,
            seed: 0,
            depth: 4,
            root_burn_in: p.root_burn_in,
            root_thin: p.root_thin,
            quad_thin: p.quad_thin,
            kernel_burn_in: p.kernel_burn_in,
            kernel_thin: p.kernel_thin,
            k_pseudo: p.k_pseudo,
            reject_budget: p.reject_budget,
            window: p.window,
            samples: 10_000,
            block: 500,
            permutations: 199,
            alpha: 0.01,
            tol_identity: 1e-12,
            tol_oracle: 1e-9,
        }
    }
}

impl RunConfig {
    /// Applies `key = value` lines; `#` starts a comment.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut obj = serde_json::to_value(&*self)?;
        let map = obj.as_object_mut().expect("struct serializes to an object");
        let slot = map
            .get_mut(key)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown key {key:?}")))?;
        *slot = match slot {
            serde_json::Value::String(_) => serde_json::Value::String(value.to_string()),
            _ => serde_json::from_str(value)
                .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {value:?}")))?,
        };
        *self = serde_json::from_value(obj).map_err(|e| Error::InvalidConfig(format!("{key}: {e}")))?;
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.merge_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.root_thin == 0 || self.quad_thin == 0 || self.kernel_thin == 0 {
            return bad("thinning intervals must be positive");
        }
        if self.k_pseudo == 0 || self.reject_budget == 0 {
            return bad("k_pseudo and reject_budget must be positive");
        }
        if !(self.window > 0.0 && self.window.is_finite()) {
            return bad("window must be a positive radius");
        }
        if self.block < 2 || self.samples < self.block {
            return bad("need samples ≥ block ≥ 2");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(self.tol_identity > 0.0 && self.tol_oracle > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.depth > 16 {
            return bad("depth above 16 is not supported");
        }
        self.family.family()?;
        Ok(())
    }

    pub fn sampler_params(&self) -> SamplerParams {
        SamplerParams {
            root_burn_in: self.root_burn_in,
            root_thin: self.root_thin,
            quad_thin: self.quad_thin,
            kernel_burn_in: self.kernel_burn_in,
            kernel_thin: self.kernel_thin,
            k_pseudo: self.k_pseudo,
            reject_budget: self.reject_budget,
            window: self.window,
        }
    }

    pub fn measured_data(&self) -> Result<MeasuredData> {
        Ok(MeasuredData::new(
            self.family.family()?,
            self.convention,
            self.mode,
            self.sampler_params(),
        ))
    }

    /// The configuration as `key = value` lines, readable by [`Self::from_text`].
    pub fn to_text(&self) -> String {
        let obj = serde_json::to_value(self).expect("serializable");
        obj.as_object()
            .expect("object")
            .iter()
            .map(|(k, v)| match v {
                serde_json::Value::String(s) => format!("{k} = {s}\n"),
                other => format!("{k} = {other}\n"),
            })
            .collect()
    }
}
