//! Token-guided attention amplification.
//!
//! Two factors feed cross-attention: `gamma_k` multiplies the keys of
//! differential tokens, `gamma_o` multiplies the whole cross-attention
//! output. Both decay bilinearly in denoising progress and match strength
//! and never drop below 1.

use serde::{Deserialize, Serialize};

use crate::model::Amplification;
use crate::scheduler::{match_strength, StagePlan};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TgaaParams {
    /// Maximum excess key amplification.
    pub a_k: f64,
    /// Maximum excess output amplification.
    pub a_o: f64,
    pub enabled_key: bool,
    pub enabled_output: bool,
}

impl Default for TgaaParams {
    fn default() -> Self {
        Self {
            a_k: 2.0,
            a_o: 1.0,
            enabled_key: true,
            enabled_output: true,
        }
    }
}

impl TgaaParams {
    pub fn disabled() -> Self {
        Self {
            enabled_key: false,
            enabled_output: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a_k >= 0.0 && self.a_o >= 0.0) || !self.a_k.is_finite() || !self.a_o.is_finite() {
            return Err(Error::Config("tgaa: a_k and a_o must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StageProgress {
    pub t: usize,
    pub plan: StagePlan,
    pub m: f64,
    pub tau: f64,
}

impl StageProgress {
    /// Progress through the selective window, in `[0, 1]`.
    pub fn progress(&self) -> f64 {
        let span = self.plan.k2.saturating_sub(self.plan.k1).max(1) as f64;
        ((self.t as f64 - self.plan.k1 as f64) / span).clamp(0.0, 1.0)
    }
}

fn decayed(amplitude: f64, progress: &StageProgress) -> f64 {
    let u = progress.progress();
    let s = match_strength(progress.m, progress.tau);
    (1.0 + amplitude * (1.0 - u) * (1.0 - s)).max(1.0)
}

pub fn gamma_k(progress: &StageProgress, params: &TgaaParams) -> f64 {
    if !params.enabled_key || params.a_k == 0.0 {
        return 1.0;
    }
    decayed(params.a_k, progress)
}

pub fn gamma_o(progress: &StageProgress, params: &TgaaParams) -> f64 {
    if !params.enabled_output || params.a_o == 0.0 {
        return 1.0;
    }
    decayed(params.a_o, progress)
}

/// Per-step factors for `t` in `[K1, N)`; neutral everywhere else.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorTable {
    pub start: usize,
    pub factors: Vec<Amplification>,
}

impl FactorTable {
    pub fn neutral() -> Self {
        Self {
            start: 0,
            factors: Vec::new(),
        }
    }

    pub fn at(&self, t: usize) -> Amplification {
        t.checked_sub(self.start)
            .and_then(|i| self.factors.get(i).copied())
            .unwrap_or(Amplification::NEUTRAL)
    }

    pub fn is_neutral(&self) -> bool {
        self.factors.iter().all(|f| *f == Amplification::NEUTRAL)
    }
}

/// Precomputes the factor table. Steps at or past `K2`, and every step of a
/// request below threshold, are neutral.
pub fn schedule(plan: &StagePlan, m: f64, tau: f64, params: &TgaaParams) -> FactorTable {
    let hit = m >= tau;
    let factors = (plan.k1..plan.steps)
        .map(|t| {
            if !hit || t >= plan.k2 {
                return Amplification::NEUTRAL;
            }
            let progress = StageProgress {
                t,
                plan: *plan,
                m,
                tau,
            };
            Amplification {
                key: gamma_k(&progress, params),
                output: gamma_o(&progress, params),
            }
        })
        .collect();
    FactorTable {
        start: plan.k1,
        factors,
    }
}
