//! Centroid distance, entropy and box IoU for query-guided and attention-only selection.

use vistoken::io::synth::{synth_fixture, FixtureSpec};
use vistoken::metrics::{attention_distance, score_entropy, token_box_iou};
use vistoken::{select_tokens, SelectionConfig};

fn main() -> vistoken::Result<()> {
    let cfg = SelectionConfig::with_keep(64);
    println!("{:>4} {:>18} {:>18} {:>18}", "seed", "distance q/a", "entropy q/a", "iou q/a");
    for seed in 0..8 {
        let fx = synth_fixture(&FixtureSpec { seed, query_cluster: seed as usize % 9, ..Default::default() })?;
        let bx = fx.query_box();
        let q = select_tokens(&fx.visual, &fx.attention, Some(&fx.text), &fx.projector, &cfg)?;
        let a = select_tokens(&fx.visual, &fx.attention, None, &fx.projector, &cfg)?;
        println!(
            "{seed:>4} {:>8.3} / {:<7.3} {:>8.3} / {:<7.3} {:>8.3} / {:<7.3}",
            attention_distance(&q.fused_scores, &fx.grid, &bx)?,
            attention_distance(&a.fused_scores, &fx.grid, &bx)?,
            score_entropy(&q.fused_scores)?,
            score_entropy(&a.fused_scores)?,
            token_box_iou(&q.kept(), &fx.grid, &bx)?,
            token_box_iou(&a.kept(), &fx.grid, &bx)?,
        );
    }
    Ok(())
}
