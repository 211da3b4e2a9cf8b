//! Command-line front end.
//!
//! [`run`] parses arguments, executes one subcommand and returns the process
//! exit code: 0 on success, 1 on a usage error, 2 on a data error or a failed
//! verification.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::report::{self, sig9, ResultDocument};
use crate::io::synth::{self, synth_fixture, FixtureSpec};
use crate::io::tensor::read_tensor;
use crate::math::{l2_normalize_rows, Epsilon, ScoreVector};
use crate::metrics::{attention_distance, score_entropy, token_box_iou, GroundTruthBox, TokenGrid};
use crate::partition::{residual_prune_threshold, select_tokens, PruneMode, SelectionConfig};
use crate::relevance::{FusionParams, Projector, SharpenParams};
use crate::theory::{self, CostMode};

#[derive(Parser, Debug)]
#[command(name = "vistoken", version, about = "Query-guided visual token selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Select tokens from tensor files and write a result document.
    Select(SelectArgs),
    /// Write a synthetic fixture directory.
    Synth(SynthArgs),
    /// Check covering, stability or cost claims on planted-cluster data.
    Verify(VerifyArgs),
    /// Score a result document against a ground-truth box.
    Metrics(MetricsArgs),
    /// Sweep the 128/64/32 budgets over a set of fixtures.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
struct SelectionFlags {
    #[arg(long, default_value_t = 128)]
    keep: usize,
    #[arg(long, default_value_t = 0.5)]
    split: f64,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    #[arg(long, default_value_t = 0.05)]
    tau_agg: f64,
    #[arg(long, default_value_t = 0.01)]
    tau_sharp: f64,
    #[arg(long, default_value_t = 2.5)]
    gamma: f64,
    #[arg(long, default_value_t = 0.005)]
    top_p: f64,
    #[arg(long, default_value_t = 0.1)]
    attenuation: f64,
    #[arg(long, default_value_t = 8)]
    step_k: usize,
    #[arg(long, default_value = "budget")]
    mode: PruneMode,
    #[arg(long, default_value_t = 0.9)]
    tau_threshold: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
}

impl SelectionFlags {
    fn config(&self) -> Result<SelectionConfig> {
        let cfg = SelectionConfig {
            t_keep: self.keep,
            split_ratio: self.split,
            step_k: self.step_k,
            mode: self.mode,
            tau_threshold: self.tau_threshold,
            alpha: self.alpha,
            sharpen: SharpenParams {
                tau_agg: self.tau_agg,
                tau_sharp: self.tau_sharp,
                gamma: self.gamma,
                top_p: self.top_p,
                attenuation: self.attenuation,
            },
            fusion: FusionParams { eta: self.eta, eps: Epsilon::default() },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct SelectArgs {
    /// Visual features, N×D_v.
    #[arg(long)]
    visual: PathBuf,
    /// Encoder attention mass, length N.
    #[arg(long)]
    attention: PathBuf,
    /// Text embeddings, M×D_llm. Omit for attention-only selection.
    #[arg(long)]
    text: Option<PathBuf>,
    /// Projector weight, D_llm×D_v. Defaults to the identity.
    #[arg(long)]
    projector: Option<PathBuf>,
    /// Projector bias, length D_llm.
    #[arg(long, requires = "projector")]
    bias: Option<PathBuf>,
    #[command(flatten)]
    selection: SelectionFlags,
    /// Recorded in the config echo.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FixtureFlags {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 576)]
    tokens: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 9)]
    clusters: usize,
    /// Minimum cosine between a member and its cluster center.
    #[arg(long, default_value_t = 0.95)]
    floor: f64,
    #[arg(long, default_value_t = 0)]
    query_cluster: usize,
}

impl FixtureFlags {
    fn spec(&self) -> FixtureSpec {
        FixtureSpec {
            seed: self.seed,
            n_tokens: self.tokens,
            dim: self.dim,
            n_clusters: self.clusters,
            intra_cosine_floor: self.floor,
            query_cluster: self.query_cluster,
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    fixture: FixtureFlags,
    /// Directory for the tensors and fixture.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum VerifyMode {
    Cover,
    Stability,
    Cost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CostPruneMode {
    Budget,
    Geometric,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    mode: VerifyMode,
    /// Similarity threshold for the cover and stability checks.
    #[arg(long, default_value_t = 0.9)]
    tau: f64,
    /// Norm of the random offset added to every row in the stability check.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// Pruning rule for the cost probe.
    #[arg(long, value_enum, default_value = "geometric")]
    prune_mode: CostPruneMode,
    #[arg(long, value_delimiter = ',', default_values_t = [128usize, 256, 512, 1024])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    t_div: usize,
    #[arg(long, default_value_t = 8)]
    step_k: usize,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Planted-cluster data for cover and stability.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    tokens: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 8)]
    clusters: usize,
    #[arg(long, default_value_t = 0.95)]
    floor: f64,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    /// Result document written by `select`.
    #[arg(long)]
    result: PathBuf,
    /// Token grid as HxW; inferred from the token count when omitted.
    #[arg(long)]
    grid: Option<TokenGrid>,
    /// Ground-truth box as r0,c0,r1,c1.
    #[arg(long = "box", conflicts_with = "fixture")]
    bbox: Option<GroundTruthBox>,
    /// fixture.json whose query box and grid are used.
    #[arg(long)]
    fixture: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    fixture: FixtureFlags,
    /// Number of fixtures, seeded consecutively from --seed.
    #[arg(long, default_value_t = 20)]
    fixtures: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [128usize, 64, 32])]
    budgets: Vec<usize>,
}

/// Runs the command line in `args` (program name first).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Select(a) => cmd_select(a, out),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Metrics(a) => cmd_metrics(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Parameter(_) => 1,
                _ => 2,
            }
        }
    }
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_select(a: SelectArgs, out: &mut dyn Write) -> Result<bool> {
    let cfg = a.selection.config()?;
    let visual = read_tensor(&a.visual)?.into_matrix()?;
    let attention = read_tensor(&a.attention)?.into_vector()?;
    let text = a.text.as_deref().map(|p| read_tensor(p)?.into_matrix()).transpose()?;
    let projector = match &a.projector {
        Some(p) => {
            let bias = a.bias.as_deref().map(|b| read_tensor(b)?.into_vector()).transpose()?;
            Projector::new(read_tensor(p)?.into_matrix()?, bias.map(ScoreVector::into_vec))?
        }
        None => Projector::identity(visual.cols()),
    };
    let result = select_tokens(&visual, &attention, text.as_ref(), &projector, &cfg)?;
    match &a.out {
        Some(path) => {
            report::write_result(&result, &cfg, a.seed, path)?;
            writeln!(out, "kept {} of {} tokens -> {}", result.kept().len(), visual.rows(), path.display())?;
        }
        None => out.write_all(ResultDocument::new(&result, &cfg, a.seed).to_json()?.as_bytes())?,
    }
    Ok(true)
}

fn cmd_synth(a: SynthArgs, out: &mut dyn Write) -> Result<bool> {
    let spec = a.fixture.spec();
    let fx = synth_fixture(&spec)?;
    synth::write_fixture(&fx, &spec, &a.out)?;
    writeln!(
        out,
        "wrote {} tokens ({}x{} grid, {} clusters, query {}, distractor {}) to {}",
        spec.n_tokens,
        fx.grid.height,
        fx.grid.width,
        spec.n_clusters,
        fx.query_cluster,
        fx.distractor_cluster,
        a.out.display()
    )?;
    Ok(true)
}

#[derive(Serialize)]
struct CoverOutput {
    tau: f64,
    lemma_violations: usize,
    depth_one_bound_holds: bool,
    report: theory::CoverReport,
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write) -> Result<bool> {
    if a.mode == VerifyMode::Cost {
        let mode = match a.prune_mode {
            CostPruneMode::Budget => CostMode::Budget { step_k: a.step_k },
            CostPruneMode::Geometric => CostMode::Geometric { alpha: a.alpha },
        };
        let probe = theory::probe_cost(&a.sizes, mode, a.t_div, a.seed)?;
        print_json(out, &probe)?;
        return Ok(true);
    }

    let (features, _) = synth::planted_clusters(a.seed, a.tokens, a.dim, a.clusters, a.floor)?;
    let features = l2_normalize_rows(&features);
    let candidates: Vec<usize> = (0..features.rows()).collect();
    let pruned_out = residual_prune_threshold(&candidates, &features, a.tau)?;
    let retained = pruned_out.diverse;
    let pruned: Vec<usize> = pruned_out.removal_log.iter().map(|r| r.removed).collect();
    let delta = 1.0 - a.tau;

    match a.mode {
        VerifyMode::Cover => {
            let report = theory::check_cover(&retained, &pruned, &features, delta, Some(&pruned_out.removal_log))?;
            let violations = theory::lemma_violations(&pruned_out.removal_log, &features, a.tau)?;
            let ok = violations == 0 && report.violations == 0;
            print_json(
                out,
                &CoverOutput {
                    tau: a.tau,
                    lemma_violations: violations,
                    depth_one_bound_holds: report.depth_one_bound_holds(),
                    report,
                },
            )?;
            Ok(ok)
        }
        VerifyMode::Stability => {
            let perturbed = synth::perturb_rows(&features, a.noise, a.seed.wrapping_add(1))?;
            let cover = theory::check_cover(&retained, &pruned, &features, delta, None)?;
            let report = theory::check_stability(&retained, &features, &perturbed, delta.max(cover.cover_radius))?;
            let ok = report.passed;
            print_json(out, &report)?;
            Ok(ok)
        }
        VerifyMode::Cost => unreachable!("handled above"),
    }
}

#[derive(Serialize)]
struct MetricsOutput {
    attention_distance: f64,
    entropy: f64,
    iou: f64,
}

fn cmd_metrics(a: MetricsArgs, out: &mut dyn Write) -> Result<bool> {
    let doc = report::read_result(&a.result)?;
    let scores = doc.scores()?;
    let (grid, bx) = match (&a.fixture, a.bbox) {
        (Some(path), _) => {
            let meta = synth::read_fixture_meta(path)?;
            (a.grid.unwrap_or(meta.grid), meta.query_box)
        }
        (None, Some(bx)) => (a.grid.map_or_else(|| TokenGrid::for_tokens(scores.len()), Ok)?, bx),
        (None, None) => return Err(Error::Parameter("metrics needs --box or --fixture".into())),
    };
    let m = MetricsOutput {
        attention_distance: sig9(attention_distance(&scores, &grid, &bx)?),
        entropy: sig9(score_entropy(&scores)?),
        iou: sig9(token_box_iou(&doc.kept_indices, &grid, &bx)?),
    };
    print_json(out, &m)?;
    Ok(true)
}

fn cmd_bench(a: BenchArgs, out: &mut dyn Write) -> Result<bool> {
    if a.fixtures == 0 {
        return Err(Error::Parameter("--fixtures must be positive".into()));
    }
    let base = a.fixture.spec();
    let fixtures = (0..a.fixtures)
        .map(|i| synth_fixture(&FixtureSpec { seed: base.seed.wrapping_add(i), ..base }))
        .collect::<Result<Vec<_>>>()?;
    writeln!(
        out,
        "{:>6} {:>8} {:>8} {:>9} {:>9} {:>10} {:>6}",
        "keep", "prune%", "iou", "entropy", "distance", "sim_evals", "iters"
    )?;
    for &keep in &a.budgets {
        let cfg = SelectionConfig::with_keep(keep);
        cfg.validate()?;
        let (mut iou, mut entropy, mut distance, mut evals, mut iters, mut ratio) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for fx in &fixtures {
            let r = select_tokens(&fx.visual, &fx.attention, Some(&fx.text), &fx.projector, &cfg)?;
            let bx = fx.query_box();
            iou += token_box_iou(&r.kept(), &fx.grid, &bx)?;
            entropy += score_entropy(&r.fused_scores)?;
            distance += attention_distance(&r.fused_scores, &fx.grid, &bx)?;
            evals += r.sim_eval_count as f64;
            iters += r.iterations as f64;
            ratio += r.prune_ratio();
        }
        let k = fixtures.len() as f64;
        writeln!(
            out,
            "{:>6} {:>8.1} {:>8.4} {:>9.4} {:>9.3} {:>10.0} {:>6.1}",
            keep,
            100.0 * ratio / k,
            iou / k,
            entropy / k,
            distance / k,
            evals / k,
            iters / k
        )?;
    }
    Ok(true)
}

/// Binary entry point helper: runs with the process arguments and standard streams.
pub fn main_with_env() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
