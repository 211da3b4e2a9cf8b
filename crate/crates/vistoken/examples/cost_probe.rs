//! Similarity-evaluation counts against the series prediction.

use vistoken::theory::{probe_cost, CostMode};

fn main() -> vistoken::Result<()> {
    let sizes = [128, 256, 512, 1024];
    for mode in [CostMode::Geometric { alpha: 0.5 }, CostMode::Budget { step_k: 8 }] {
        let probe = probe_cost(&sizes, mode, 16, 1)?;
        println!("{mode:?}");
        for r in &probe.reports {
            println!(
                "  n={:>5} evals={:>10} passes={:>4} predicted={:>12.1} ratio={:.4}",
                r.n, r.sim_evals, r.iterations, r.predicted, r.ratio
            );
        }
        if let Some(slope) = probe.growth_exponent {
            println!("  fitted growth exponent {slope:.3}");
        }
    }
    Ok(())
}
