//! Covering and stability checks for threshold-mode pruning.

use vistoken::io::synth::{perturb_rows, planted_clusters};
use vistoken::math::l2_normalize_rows;
use vistoken::partition::residual_prune_threshold;
use vistoken::theory::{check_cover, check_stability, lemma_violations};

fn main() -> vistoken::Result<()> {
    let (features, _) = planted_clusters(8, 200, 24, 6, 0.95)?;
    let features = l2_normalize_rows(&features);
    let candidates: Vec<usize> = (0..features.rows()).collect();

    for tau in [0.8, 0.9, 0.95] {
        let out = residual_prune_threshold(&candidates, &features, tau)?;
        let pruned: Vec<usize> = out.removal_log.iter().map(|r| r.removed).collect();
        let cover = check_cover(&out.diverse, &pruned, &features, 1.0 - tau, Some(&out.removal_log))?;
        println!(
            "tau {tau}: retained {:>3}, cover radius {:.4} (delta {:.4}), chain depth {}, lemma violations {}, chain-bound violations {}",
            cover.retained,
            cover.cover_radius,
            1.0 - tau,
            cover.max_chain_depth,
            lemma_violations(&out.removal_log, &features, tau)?,
            cover.violations
        );

        let perturbed = perturb_rows(&features, 0.05, 99)?;
        let s = check_stability(&out.diverse, &features, &perturbed, cover.cover_radius)?;
        println!(
            "         perturbed radius {:.4} <= {:.4} + {:.4}: {}",
            s.cover_radius_perturbed, s.delta, s.epsilon_metric, s.passed
        );
    }
    Ok(())
}
