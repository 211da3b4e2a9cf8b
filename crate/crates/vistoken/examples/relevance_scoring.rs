//! Step through the scoring pipeline on a small hand-made example.

use vistoken::math::{similarity_matrix, Epsilon, FeatureMatrix, ScoreVector};
use vistoken::relevance::{
    aggregate_similarity, fuse, gate_text, intrinsic_saliency, project_visual, sharpen_traced, FusionParams,
    Projector, SharpenParams,
};

fn main() -> vistoken::Result<()> {
    let eps = Epsilon::DEFAULT;
    // six visual tokens in 3-d; the query points along the first axis
    let visual = FeatureMatrix::from_rows(&[
        [1.0, 0.1, 0.0],
        [0.9, 0.0, 0.2],
        [0.0, 1.0, 0.0],
        [0.1, 0.9, 0.1],
        [0.0, 0.0, 1.0],
        [0.2, 0.2, 0.9],
    ])?;
    let attention = ScoreVector::raw(vec![0.05, 0.04, 0.9, 0.7, 0.1, 0.08])?;
    let text = FeatureMatrix::from_rows(&[[2.0, 0.0, 0.0], [1.2, 0.3, 0.0]])?;
    let proj = Projector::identity(3);

    let intrinsic = intrinsic_saliency(&attention, eps)?;
    let gated = gate_text(&text, eps)?;
    println!("text gates: {:?}", gated.gates);

    let s_cross = similarity_matrix(&project_visual(&visual, &proj)?, &gated.tokens)?;
    let s_text = aggregate_similarity(&s_cross, 0.05)?;
    let trace = sharpen_traced(&s_text, &SharpenParams::default(), eps)?;
    let fused = fuse(&intrinsic, &trace.extrinsic, &FusionParams::default())?;

    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "token", "intrinsic", "s_text", "extrinsic", "fused");
    for i in 0..visual.rows() {
        println!(
            "{i:>5} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            intrinsic.get(i),
            s_text.get(i),
            trace.extrinsic.get(i),
            fused.get(i)
        );
    }
    println!("top-p threshold after sharpening: {:.4}", trace.threshold);
    Ok(())
}
