//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::{oracle_residual_prune, random_unit_rows};
use vistoken::io::report::ResultDocument;
use vistoken::io::rng::FixtureRng;
use vistoken::io::synth::{perturb_rows, planted_clusters, synth_fixture, FixtureSpec};
use vistoken::math::{l2_normalize_rows, similarity_matrix, softmax, Epsilon, FeatureMatrix, ScoreVector};
use vistoken::metrics::{score_entropy, token_box_iou};
use vistoken::partition::{
    argsort_desc, prune_ratio, residual_prune, residual_prune_threshold, select_tokens, SelectionConfig,
};
use vistoken::relevance::{
    aggregate_similarity, fuse, fuse_raw, gate_text, intrinsic_saliency, project_visual, sharpen, FusionParams,
    SharpenParams,
};
use vistoken::theory::{self, check_cover, check_stability, lemma_violations, CostMode};

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn budget_arithmetic() -> Outcome {
    let expect = [(576, 128, 77.8), (576, 64, 88.9), (576, 32, 94.4), (2048, 455, 77.8), (2048, 227, 88.9), (2048, 114, 94.4)];
    let mut parts = Vec::new();
    for (n, keep, pct) in expect {
        let got = 100.0 * prune_ratio(n, keep);
        ensure((got - pct).abs() <= 0.05, || format!("N={n} keep={keep}: {got:.3}% vs {pct}%"))?;
        parts.push(format!("{n}/{keep}={got:.2}%"));
    }
    let fx = synth_fixture(&FixtureSpec { seed: 1, ..Default::default() }).map_err(e)?;
    for keep in [128, 64, 32] {
        let r = select_tokens(&fx.visual, &fx.attention, Some(&fx.text), &fx.projector, &SelectionConfig::with_keep(keep))
            .map_err(e)?;
        ensure(r.kept().len() == keep, || format!("selected {} for keep {keep}", r.kept().len()))?;
        let ratio = ResultDocument::new(&r, &SelectionConfig::with_keep(keep), 1).stats.prune_ratio;
        ensure((ratio - prune_ratio(576, keep)).abs() < 1e-8, || format!("document ratio {ratio}"))?;
    }
    Ok(parts.join(" "))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = FixtureRng::new(2024);
    let mut total_removed = 0;
    for i in 0..500u64 {
        let n = rng.below(65);
        let dim = 1 + rng.below(8);
        let t_div = rng.below(n + 1);
        let step_k = 1 + rng.below(12);
        let dup = [0.0, 0.25, 0.6][i as usize % 3];
        let f = random_unit_rows(rng.next_u64(), n, dim, dup);
        let candidates: Vec<usize> = (0..n).map(|j| 7 * j + 3).collect();
        let fast = residual_prune(&candidates, &f, t_div, step_k).map_err(e)?;
        let slow = oracle_residual_prune(&candidates, &f, t_div, step_k).map_err(e)?;
        ensure(fast.diverse == slow, || format!("instance {i} (n={n}, t_div={t_div}, k={step_k}) differs"))?;
        total_removed += n - slow.len();
    }
    Ok(format!("500/500 instances identical, {total_removed} removals compared"))
}

struct ThresholdRun {
    tau: f64,
    features: FeatureMatrix,
    out: vistoken::partition::ThresholdOutcome,
}

fn threshold_runs() -> Result<Vec<ThresholdRun>, String> {
    let taus = [0.8, 0.9, 0.95];
    let mut runs = Vec::new();
    for i in 0..200u64 {
        let tau = taus[i as usize % 3];
        let n = 64 + (i as usize * 37) % 193;
        let k = 1 + (i as usize) % 12;
        let floor = [0.85, 0.9, 0.95, 0.98][(i / 3) as usize % 4];
        let (f, _) = planted_clusters(100 + i, n, 24, k, floor).map_err(e)?;
        let f = l2_normalize_rows(&f);
        let c: Vec<usize> = (0..n).collect();
        let out = residual_prune_threshold(&c, &f, tau).map_err(e)?;
        runs.push(ThresholdRun { tau, features: f, out });
    }
    Ok(runs)
}

fn local_coverage() -> Outcome {
    let runs = threshold_runs()?;
    let mut entries = 0;
    for (i, r) in runs.iter().enumerate() {
        let bad = lemma_violations(&r.out.removal_log, &r.features, r.tau).map_err(e)?;
        ensure(bad == 0, || format!("run {i} at tau {}: {bad} violations", r.tau))?;
        entries += r.out.removal_log.len();
    }
    Ok(format!("200 runs, {entries} removal-log entries, 0 violations"))
}

fn delta_net() -> Outcome {
    let mut depth_one = 0;
    let mut deeper = 0;
    let mut worst_deep: f64 = 0.0;
    let mut check = |r: &ThresholdRun| -> Result<(), String> {
        let pruned: Vec<usize> = r.out.removal_log.iter().map(|x| x.removed).collect();
        let delta = 1.0 - r.tau;
        let rep = check_cover(&r.out.diverse, &pruned, &r.features, delta, Some(&r.out.removal_log)).map_err(e)?;
        if rep.max_chain_depth <= 1 {
            depth_one += 1;
            ensure(rep.cover_radius <= delta + 1e-9, || {
                format!("depth-1 run with radius {} > {delta}", rep.cover_radius)
            })?;
        } else {
            deeper += 1;
            worst_deep = worst_deep.max(rep.cover_radius / delta);
        }
        Ok(())
    };
    for r in &threshold_runs()? {
        check(r)?;
    }
    // two-member clusters: an anchor never loses its only partner, so chains stay at depth one
    for i in 0..60u64 {
        let n = 16 + 2 * (i as usize % 40);
        let tau = [0.8, 0.9, 0.95][i as usize % 3];
        let (f, _) = planted_clusters(900 + i, n, 48, n / 2, 0.97).map_err(e)?;
        let f = l2_normalize_rows(&f);
        let c: Vec<usize> = (0..n).collect();
        let out = residual_prune_threshold(&c, &f, tau).map_err(e)?;
        check(&ThresholdRun { tau, features: f, out })?;
    }
    ensure(depth_one > 0, || "no depth-1 runs generated".into())?;
    Ok(format!(
        "{depth_one} depth-1 runs within 1-tau; {deeper} deeper runs reported, worst radius/delta {worst_deep:.2}"
    ))
}

fn stability() -> Outcome {
    let mut worst_slack = f64::INFINITY;
    for i in 0..100u64 {
        let n = 40 + (i as usize * 13) % 200;
        let tau = [0.8, 0.9, 0.95][i as usize % 3];
        let (f, _) = planted_clusters(300 + i, n, 16, 1 + i as usize % 10, 0.93).map_err(e)?;
        let f = l2_normalize_rows(&f);
        let c: Vec<usize> = (0..n).collect();
        let out = residual_prune_threshold(&c, &f, tau).map_err(e)?;
        let pruned: Vec<usize> = out.removal_log.iter().map(|x| x.removed).collect();
        let delta = check_cover(&out.diverse, &pruned, &f, 1.0 - tau, None).map_err(e)?.cover_radius;
        let noise = 0.01 + 0.2 * (i as f64 / 100.0);
        let p = perturb_rows(&f, noise, 7_000 + i).map_err(e)?;
        let rep = check_stability(&out.diverse, &f, &p, delta).map_err(e)?;
        ensure(rep.cover_radius_perturbed <= delta + rep.epsilon_metric + 1e-9, || {
            format!("fixture {i}: {} > {} + {}", rep.cover_radius_perturbed, delta, rep.epsilon_metric)
        })?;
        worst_slack = worst_slack.min(rep.bound - rep.cover_radius_perturbed);
    }
    Ok(format!("100/100 within delta+eps, smallest slack {worst_slack:.3e}"))
}

fn fusion_identities() -> Outcome {
    let mut rng = FixtureRng::new(77);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = 2 + rng.below(200);
        let a: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let (iv, ev) = (ScoreVector::unit_interval(a.clone()).map_err(e)?, ScoreVector::unit_interval(b.clone()).map_err(e)?);
        let eta = rng.uniform();
        let raw = fuse_raw(&iv, &ev, &FusionParams { eta, ..Default::default() }).map_err(e)?;
        for j in 0..n {
            let expect = (a[j] + 1e-6).powf(1.0 - eta) * (b[j] + 1e-6).powf(eta);
            worst = worst.max((raw[j] - expect).abs());
        }
        let f0 = fuse(&iv, &ev, &FusionParams { eta: 0.0, ..Default::default() }).map_err(e)?;
        let f1 = fuse(&iv, &ev, &FusionParams { eta: 1.0, ..Default::default() }).map_err(e)?;
        ensure(argsort_desc(f0.as_slice()) == argsort_desc(&a), || "eta=0 ranking differs from intrinsic".into())?;
        ensure(argsort_desc(f1.as_slice()) == argsort_desc(&b), || "eta=1 ranking differs from extrinsic".into())?;
    }
    ensure(worst <= 1e-9, || format!("geometric-mean error {worst:e}"))?;
    Ok(format!("1000 vectors, max identity error {worst:.1e}, rankings equal at eta 0 and 1"))
}

fn sharpening_entropy() -> Outcome {
    let eps = Epsilon::DEFAULT;
    let mut checked = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    for i in 0..200u64 {
        let spec = FixtureSpec {
            seed: 500 + i,
            n_tokens: [144, 256, 576][i as usize % 3],
            dim: 16 + (i as usize % 4) * 16,
            n_clusters: 1 + (i as usize % 9),
            intra_cosine_floor: [0.8, 0.9, 0.95][i as usize % 3],
            query_cluster: 0,
        };
        let fx = synth_fixture(&spec).map_err(e)?;
        let projected = project_visual(&fx.visual, &fx.projector).map_err(e)?;
        let gated = gate_text(&fx.text, eps).map_err(e)?;
        let s_text = aggregate_similarity(&similarity_matrix(&projected, &gated.tokens).map_err(e)?, 0.05).map_err(e)?;
        if s_text.as_slice().iter().all(|&x| x == s_text.get(0)) {
            continue;
        }
        let ln_n = (s_text.len() as f64).ln();
        let sharp = score_entropy(&sharpen(&s_text, &SharpenParams::default()).map_err(e)?).map_err(e)? / ln_n;
        let flat = score_entropy(&softmax(&s_text, 1.0).map_err(e)?).map_err(e)? / ln_n;
        ensure(sharp <= flat, || format!("fixture {i}: {sharp:.4} > {flat:.4}"))?;
        worst_gap = worst_gap.max(sharp - flat);
        checked += 1;
    }
    ensure(checked > 0, || "all fixtures constant".into())?;
    Ok(format!("{checked} fixtures, largest normalized entropy gap {worst_gap:.3}"))
}

fn no_query_degradation() -> Outcome {
    for i in 0..50u64 {
        let fx = synth_fixture(&FixtureSpec { seed: 40 + i, ..Default::default() }).map_err(e)?;
        let cfg = SelectionConfig::with_keep([128, 64, 32, 33][i as usize % 4]);
        let (t_imp, _) = cfg.budgets();
        let intrinsic = intrinsic_saliency(&fx.attention, Epsilon::DEFAULT).map_err(e)?;
        let mut top = argsort_desc(intrinsic.as_slice());
        top.truncate(t_imp);
        let zero_text = FeatureMatrix::new(2, fx.visual.cols(), vec![0.0; 2 * fx.visual.cols()]).map_err(e)?;
        for text in [None, Some(&zero_text)] {
            let r = select_tokens(&fx.visual, &fx.attention, text, &fx.projector, &cfg).map_err(e)?;
            ensure(r.no_query, || "no_query flag not set".into())?;
            ensure(r.important == top, || format!("fixture {i}: important set differs from intrinsic top-{t_imp}"))?;
        }
    }
    Ok("50 fixtures, absent and all-zero text, important = intrinsic top-T_imp".into())
}

fn cost_model() -> Outcome {
    let mode = CostMode::Geometric { alpha: 0.5 };
    let a = theory::probe_cost(&[512], mode, 16, 3).map_err(e)?;
    let b = theory::probe_cost(&[512], mode, 16, 3).map_err(e)?;
    let r = &a.reports[0];
    ensure((r.ratio - 1.0).abs() <= 0.10, || format!("ratio {}", r.ratio))?;
    ensure(a == b, || "counters differ across runs".into())?;
    Ok(format!("sim_evals {} vs predicted {:.1} (ratio {:.4}), repeat identical", r.sim_evals, r.predicted, r.ratio))
}

fn fused_beats_intrinsic() -> Outcome {
    let cfg = SelectionConfig::with_keep(64);
    let trials = 200;
    let (mut wins, mut iou_f, mut iou_i, mut h_f, mut h_i) = (0, 0.0, 0.0, 0.0, 0.0);
    for seed in 0..trials as u64 {
        let fx = synth_fixture(&FixtureSpec { seed: 10_000 + seed, query_cluster: seed as usize % 9, ..Default::default() })
            .map_err(e)?;
        let bx = fx.query_box();
        let fused = select_tokens(&fx.visual, &fx.attention, Some(&fx.text), &fx.projector, &cfg).map_err(e)?;
        let intr = select_tokens(&fx.visual, &fx.attention, None, &fx.projector, &cfg).map_err(e)?;
        let (a, b) = (token_box_iou(&fused.kept(), &fx.grid, &bx).map_err(e)?, token_box_iou(&intr.kept(), &fx.grid, &bx).map_err(e)?);
        let (ha, hb) = (score_entropy(&fused.fused_scores).map_err(e)?, score_entropy(&intr.fused_scores).map_err(e)?);
        if a >= b && ha <= hb {
            wins += 1;
        }
        iou_f += a;
        iou_i += b;
        h_f += ha;
        h_i += hb;
    }
    let k = trials as f64;
    let detail = format!(
        "{wins}/{trials} trials; mean IoU {:.3} vs {:.3}, entropy {:.3} vs {:.3} nats",
        iou_f / k,
        iou_i / k,
        h_f / k,
        h_i / k
    );
    ensure(wins * 10 >= trials * 9, || detail.clone())?;
    Ok(detail)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(e)?;
    let spec = FixtureSpec { seed: 31, ..Default::default() };
    let mut files = Vec::new();
    for run in 0..2 {
        let fx = synth_fixture(&spec).map_err(e)?;
        let cfg = SelectionConfig::with_keep(128);
        let r = select_tokens(&fx.visual, &fx.attention, Some(&fx.text), &fx.projector, &cfg).map_err(e)?;
        let path = dir.path().join(format!("run{run}.json"));
        vistoken::io::report::write_result(&r, &cfg, spec.seed, &path).map_err(e)?;
        files.push(std::fs::read(&path).map_err(e)?);
    }
    ensure(files[0] == files[1], || "result files differ".into())?;
    Ok(format!("two runs, {} identical bytes", files[0].len()))
}

fn main() {
    let criteria = [
        Criterion { name: "budget arithmetic", limit: Some(Duration::from_secs(1)), run: budget_arithmetic },
        Criterion { name: "oracle equivalence", limit: Some(Duration::from_secs(10)), run: oracle_equivalence },
        Criterion { name: "local coverage lemma", limit: None, run: local_coverage },
        Criterion { name: "delta-net depth-1", limit: None, run: delta_net },
        Criterion { name: "stability", limit: None, run: stability },
        Criterion { name: "fusion identities", limit: None, run: fusion_identities },
        Criterion { name: "sharpening entropy", limit: None, run: sharpening_entropy },
        Criterion { name: "no-query degradation", limit: None, run: no_query_degradation },
        Criterion { name: "cost model", limit: None, run: cost_model },
        Criterion { name: "fused vs intrinsic selection", limit: None, run: fused_beats_intrinsic },
        Criterion { name: "determinism", limit: None, run: determinism },
    ];
    let start = Instant::now();
    let mut failed = 0;
    for c in &criteria {
        let t = Instant::now();
        let mut outcome = (c.run)();
        let took = t.elapsed();
        if let (Ok(_), Some(limit)) = (&outcome, c.limit) {
            if took > limit {
                outcome = Err(format!("took {took:.2?}, limit {limit:?}"));
            }
        }
        match outcome {
            Ok(detail) => println!("PASS {:<30} {detail} [{took:.2?}]", c.name),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:<30} {detail} [{took:.2?}]", c.name);
            }
        }
    }
    let total = start.elapsed();
    println!("{} of {} criteria passed in {total:.2?}", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
