//! Write a fixture to tensor files, read it back and store a result document.

use vistoken::io::report::{read_result, write_result};
use vistoken::io::synth::{synth_fixture, write_fixture, FixtureSpec};
use vistoken::io::tensor::{encode_vector, read_tensor};
use vistoken::{select_tokens, Projector, ScoreVector, SelectionConfig};

fn main() -> vistoken::Result<()> {
    let dir = std::env::temp_dir().join("vistoken-tensor-example");
    let spec = FixtureSpec { seed: 3, n_tokens: 256, ..Default::default() };
    let fx = synth_fixture(&spec)?;
    write_fixture(&fx, &spec, &dir)?;

    let visual = read_tensor(dir.join("visual.fvlm"))?.into_matrix()?;
    let attention = read_tensor(dir.join("attention.fvlm"))?.into_vector()?;
    let text = read_tensor(dir.join("text.fvlm"))?.into_matrix()?;
    assert_eq!(visual, fx.visual);
    println!("read {}x{} visual, {} attention, {} text rows", visual.rows(), visual.cols(), attention.len(), text.rows());

    let header = encode_vector(&ScoreVector::raw(vec![1.0, 2.0])?);
    println!("vector file header: {:02x?}", &header[..20]);

    let cfg = SelectionConfig::with_keep(64);
    let result = select_tokens(&visual, &attention, Some(&text), &Projector::identity(visual.cols()), &cfg)?;
    let out = dir.join("result.json");
    write_result(&result, &cfg, spec.seed, &out)?;
    let doc = read_result(&out)?;
    println!("{} kept, prune ratio {}, written to {}", doc.kept_indices.len(), doc.stats.prune_ratio, out.display());
    Ok(())
}
