//! Select 128 of 576 tokens on a synthetic fixture, with and without a query.

use vistoken::io::synth::{synth_fixture, FixtureSpec};
use vistoken::metrics::token_box_iou;
use vistoken::{select_tokens, SelectionConfig};

fn main() -> vistoken::Result<()> {
    let fx = synth_fixture(&FixtureSpec { seed: 42, ..Default::default() })?;
    let cfg = SelectionConfig::with_keep(128);

    let with_query = select_tokens(&fx.visual, &fx.attention, Some(&fx.text), &fx.projector, &cfg)?;
    let attention_only = select_tokens(&fx.visual, &fx.attention, None, &fx.projector, &cfg)?;

    let bx = fx.query_box();
    for (label, r) in [("query-guided", &with_query), ("attention-only", &attention_only)] {
        println!(
            "{label:>15}: kept {} ({} important + {} diverse), prune {:.1}%, box IoU {:.3}, {} similarity evals",
            r.kept().len(),
            r.important.len(),
            r.diverse.len(),
            100.0 * r.prune_ratio(),
            token_box_iou(&r.kept(), &fx.grid, &bx)?,
            r.sim_eval_count,
        );
    }
    println!("first important tokens: {:?}", &with_query.important[..8]);
    Ok(())
}
