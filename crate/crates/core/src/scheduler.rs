//! Matching score to stage boundaries.
//!
//! Steps `[0, K1)` adopt the cached trajectory, `[K1, K2)` recompute only
//! divergent regions and `[K2, N)` run in full.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Full reuse, selective region reuse with amplification, full compute.
    Chorus,
    /// Full reuse only, then full compute.
    Nirvana,
    /// No reuse.
    Baseline,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Chorus => "chorus",
            Mode::Nirvana => "nirvana",
            Mode::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chorus" => Ok(Mode::Chorus),
            "nirvana" => Ok(Mode::Nirvana),
            "baseline" => Ok(Mode::Baseline),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub k1: usize,
    pub k2: usize,
    pub steps: usize,
    pub m: f64,
    pub mode: Mode,
}

impl StagePlan {
    pub fn reused_steps(&self) -> usize {
        self.k1
    }

    pub fn selective_steps(&self) -> usize {
        self.k2 - self.k1
    }

    pub fn full_steps(&self) -> usize {
        self.steps - self.k2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerParams {
    pub tau: f64,
    pub k1_frac: f64,
    pub k2_frac: f64,
    pub stage3_min: usize,
}

impl Default for SchedulerParams {
    fn default() -> Self {
        Self {
            tau: 0.75,
            k1_frac: 0.25,
            k2_frac: 0.75,
            stage3_min: 1,
        }
    }
}

impl SchedulerParams {
    /// Threshold used with the fifty-step profile.
    pub fn vanilla() -> Self {
        Self {
            tau: 0.65,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.k1_frac && self.k1_frac <= self.k2_frac && self.k2_frac <= 1.0) {
            return Err(Error::Config("scheduler: need 0 <= k1_frac <= k2_frac <= 1".into()));
        }
        if self.tau.is_nan() {
            return Err(Error::Config("scheduler: tau is NaN".into()));
        }
        Ok(())
    }
}

/// Normalized match strength `(m - tau) / (1 - tau)` clamped to `[0, 1]`.
pub fn match_strength(m: f64, tau: f64) -> f64 {
    if !(m >= tau) {
        return 0.0;
    }
    if tau >= 1.0 {
        return 1.0;
    }
    ((m - tau) / (1.0 - tau)).clamp(0.0, 1.0)
}

/// Monotone piecewise-linear boundary mapping.
pub fn plan_stages(m: f64, steps: usize, params: &SchedulerParams, mode: Mode) -> StagePlan {
    let miss = StagePlan {
        k1: 0,
        k2: 0,
        steps,
        m,
        mode,
    };
    if mode == Mode::Baseline || !(m >= params.tau) {
        return miss;
    }
    let s = match_strength(m, params.tau);
    let n = steps as f64;
    let cap = steps.saturating_sub(params.stage3_min);
    let k1 = ((s * params.k1_frac * n).round() as usize).min(cap);
    let span = (s * (params.k2_frac - params.k1_frac) * n).round() as usize;
    let k2 = match mode {
        Mode::Nirvana => k1,
        _ => (k1 + span).min(cap),
    };
    StagePlan {
        k1,
        k2,
        steps,
        m,
        mode,
    }
}
