//! Budget, geometric and threshold residual pruning on planted clusters.

use vistoken::io::synth::planted_clusters;
use vistoken::math::l2_normalize_rows;
use vistoken::partition::{residual_prune, residual_prune_geometric, residual_prune_threshold};

fn main() -> vistoken::Result<()> {
    let (features, labels) = planted_clusters(5, 256, 32, 12, 0.95)?;
    let features = l2_normalize_rows(&features);
    let candidates: Vec<usize> = (0..features.rows()).collect();
    let clusters_hit = |kept: &[usize]| {
        let mut seen: Vec<usize> = kept.iter().map(|&i| labels[i]).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    };

    let budget = residual_prune(&candidates, &features, 32, 8)?;
    println!(
        "budget (k=8):      kept {:>3}, clusters covered {:>2}/12, {} passes, {} evals",
        budget.diverse.len(),
        clusters_hit(&budget.diverse),
        budget.iterations,
        budget.sim_evals
    );

    let geo = residual_prune_geometric(&candidates, &features, 32, 0.5)?;
    println!(
        "geometric (a=0.5): kept {:>3}, clusters covered {:>2}/12, {} passes, {} evals",
        geo.diverse.len(),
        clusters_hit(&geo.diverse),
        geo.iterations,
        geo.sim_evals
    );

    let thr = residual_prune_threshold(&candidates, &features, 0.9)?;
    println!(
        "threshold (0.9):   kept {:>3}, clusters covered {:>2}/12, {} passes, {} removals logged",
        thr.diverse.len(),
        clusters_hit(&thr.diverse),
        thr.iterations,
        thr.removal_log.len()
    );
    if let Some(r) = thr.removal_log.first() {
        println!("first removal: token {} next to {} (cos {:.4})", r.removed, r.anchor, r.similarity);
    }
    Ok(())
}
