//! Exact multiply-accumulate counts for the toy denoiser.

use crate::model::ModelConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MacKind {
    SelfAttn,
    CrossAttn,
    Ffn,
    Step,
}

/// Self-attention MACs split into the linear projection term and the
/// quadratic logit/value-mixing term.
pub fn self_attn_terms(n: u64, d: u64) -> (u64, u64) {
    (4 * n * d * d, 2 * n * n * d)
}

/// MACs of one sublayer (or a whole step) over `n` active tokens with a
/// `prompt_len`-token prompt. Zero active tokens cost nothing.
pub fn mac_count(kind: MacKind, n: usize, prompt_len: usize, cfg: &ModelConfig) -> u64 {
    if n == 0 {
        return 0;
    }
    let n = n as u64;
    let lp = prompt_len as u64;
    let d = cfg.channels as u64;
    match kind {
        MacKind::SelfAttn => {
            let (proj, mix) = self_attn_terms(n, d);
            proj + mix
        }
        MacKind::CrossAttn => 2 * n * d * d + 2 * lp * d * d + 2 * n * lp * d,
        MacKind::Ffn => 2 * n * d * (cfg.ffn_mult as u64 * d),
        MacKind::Step => {
            let n = n as usize;
            cfg.blocks as u64
                * (mac_count(MacKind::SelfAttn, n, prompt_len, cfg)
                    + mac_count(MacKind::CrossAttn, n, prompt_len, cfg)
                    + mac_count(MacKind::Ffn, n, prompt_len, cfg))
        }
    }
}

/// Sum of per-step MACs for the given active-token counts.
pub fn full_run_macs(active: &[usize], prompt_len: usize, cfg: &ModelConfig) -> u64 {
    active
        .iter()
        .map(|&n| mac_count(MacKind::Step, n, prompt_len, cfg))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_step() {
        let cfg = ModelConfig {
            channels: 8,
            heads: 2,
            ffn_mult: 4,
            blocks: 1,
            ..ModelConfig::default()
        };
        assert_eq!(mac_count(MacKind::SelfAttn, 4, 2, &cfg), 1280);
        assert_eq!(mac_count(MacKind::CrossAttn, 4, 2, &cfg), 896);
        assert_eq!(mac_count(MacKind::Ffn, 4, 2, &cfg), 2048);
        assert_eq!(mac_count(MacKind::Step, 4, 2, &cfg), 4224);
    }

    #[test]
    fn zero_tokens_cost_nothing() {
        let cfg = ModelConfig::default();
        for k in [MacKind::SelfAttn, MacKind::CrossAttn, MacKind::Ffn, MacKind::Step] {
            assert_eq!(mac_count(k, 0, 7, &cfg), 0);
        }
        assert_eq!(full_run_macs(&[0, 0], 4, &cfg), 0);
    }

    #[test]
    fn quadratic_term_quarters_at_half_length() {
        let l = 1024u64;
        assert_eq!(4 * self_attn_terms(l / 2, 32).1, self_attn_terms(l, 32).1);
    }

    #[test]
    fn quadratic_law_in_the_limit() {
        let cfg = ModelConfig::default();
        let n = 1 << 20;
        let r = mac_count(MacKind::SelfAttn, 3 * n, 4, &cfg) as f64 / mac_count(MacKind::SelfAttn, n, 4, &cfg) as f64;
        assert!((r - 9.0).abs() < 1e-3);
    }

    #[test]
    fn full_run_sums_steps() {
        let cfg = ModelConfig::default();
        let step = mac_count(MacKind::Step, 1024, 4, &cfg);
        assert_eq!(full_run_macs(&[1024; 4], 4, &cfg), 4 * step);
    }
}
