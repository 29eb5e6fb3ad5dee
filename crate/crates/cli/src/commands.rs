use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde_json::json;

use iseel::bank::{build_bank, load_bank, save_bank, BankConfig, SceneBank};
use iseel::corpus::{load_corpus, CorpusItem};
use iseel::elm::ElmConfig;
use iseel::features::{FeatureSource, DEFAULT_SCALES};
use iseel::fixation::{read_fixations_csv, FixationSet};
use iseel::io::{encode_pgm, image_id, list_images, load_image, load_map, save_map, write_atomic};
use iseel::metrics::{evaluate, EvalItem, EvalOptions, Metric, MetricReport};
use iseel::predictor::{
    eval_prior, fit_prior, load_prior, predict_saliency, save_prior, similarity_transfer_experiment, tune,
    EnsembleConfig, PreparedQuery, SearchSpace, SpatialPrior, TransferOptions,
};
use iseel::synth::{generate, write_corpus, SynthConfig};
use iseel::Grid;

use crate::{
    BuildBankArgs, Cli, Command, EnsembleArgs, EvaluateArgs, FeatureArgs, FitPriorArgs, GenSyntheticArgs,
    PredictArgs, SimilarityArgs, TuneArgs,
};

/// A flag combination that parsed but makes no sense.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::BuildBank(a) => build_bank_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::FitPrior(a) => fit_prior_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Tune(a) => tune_cmd(a),
        Command::SimilarityExperiment(a) => similarity_cmd(a),
        Command::GenSynthetic(a) => gen_synthetic_cmd(a),
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} {} does not exist or is not a file", path.display());
    }
    Ok(())
}

fn require_dir(path: &Path, what: &str) -> Result<()> {
    if !path.is_dir() {
        bail!("{what} {} does not exist or is not a directory", path.display());
    }
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
        }
        _ => Ok(()),
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    ensure_parent(path)?;
    Ok(write_atomic(path, bytes)?)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_output(path, text.as_bytes())
}

fn feature_source(args: &FeatureArgs, bank: Option<&SceneBank>) -> Result<FeatureSource> {
    if let Some(dir) = &args.features {
        if args.scales.is_some() {
            return Err(usage("--scales applies to built-in features only, not with --features"));
        }
        require_dir(dir, "feature directory")?;
        return Ok(FeatureSource::Ingest { dir: dir.clone() });
    }
    let from_bank = bank.and_then(|b| b.fingerprint()).and_then(|f| f.scales);
    let scales = args.scales.or(from_bank).unwrap_or(DEFAULT_SCALES);
    if scales == 0 {
        return Err(usage("--scales must be at least 1"));
    }
    Ok(FeatureSource::Standin { scales })
}

fn corpus(images: &Path, fixations: &Path) -> Result<Vec<CorpusItem>> {
    require_dir(images, "image directory")?;
    require_file(fixations, "fixation file")?;
    let items = load_corpus(images, fixations)?;
    if items.is_empty() {
        bail!("no images found in {}", images.display());
    }
    Ok(items)
}

fn build_bank_cmd(a: BuildBankArgs) -> Result<()> {
    if a.hidden == 0 {
        return Err(usage("--hidden must be at least 1"));
    }
    let items = corpus(&a.images, &a.fixations)?;
    let cfg = BankConfig {
        features: feature_source(&a.feature, None)?,
        elm: ElmConfig {
            hidden: a.hidden,
            seed: a.seed,
            ..Default::default()
        },
        sigma_gt: a.sigma_gt,
        ..Default::default()
    };
    let (bank, summary) = build_bank(&items, &cfg)?;
    ensure_parent(&a.out)?;
    save_bank(&bank, &a.out)?;

    let n = summary.residuals.len().max(1) as f64;
    let unit_rms = summary.residuals.iter().map(|r| r.unit_rms).sum::<f64>() / n;
    let constant_rms = summary.residuals.iter().map(|r| r.constant_rms).sum::<f64>() / n;
    println!("wrote {}", a.out.display());
    println!("entries: {}", summary.entries);
    println!("skipped (no fixations): {}", summary.skipped.len());
    println!("descriptor dim: {}", summary.descriptor_dim);
    println!("feature dim: {}", summary.feature_dim);
    println!("hidden nodes: {}", a.hidden);
    println!("mean training rms: {unit_rms:.4} (constant predictor {constant_rms:.4})");
    Ok(())
}

fn ensemble_config(e: &EnsembleArgs, have_prior: bool) -> Result<EnsembleConfig> {
    let cfg = EnsembleConfig {
        n: e.n,
        alpha: e.alpha,
        sigma_smooth: e.sigma,
        use_prior: !e.no_prior,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if cfg.use_prior && !have_prior {
        warn!("no --prior given; predicting without a spatial prior");
    }
    Ok(cfg)
}

fn load_prior_arg(path: Option<&Path>) -> Result<Option<SpatialPrior>> {
    path.map(|p| {
        require_file(p, "prior file")?;
        Ok(load_prior(p)?)
    })
    .transpose()
}

fn predict_cmd(a: PredictArgs) -> Result<()> {
    let cfg = ensemble_config(&a.ensemble, a.prior.is_some())?;
    require_file(&a.bank, "bank file")?;
    let inputs = if a.images.is_dir() {
        list_images(&a.images)?
    } else {
        require_file(&a.images, "image")?;
        vec![a.images.clone()]
    };
    if inputs.is_empty() {
        bail!("no images found in {}", a.images.display());
    }
    let prior = load_prior_arg(a.prior.as_deref())?;
    let bank = load_bank(&a.bank)?;
    let source = feature_source(&a.feature, Some(&bank))?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let bank_id = a.bank.display().to_string();

    let results: Vec<(PathBuf, Result<PathBuf>)> = inputs
        .par_iter()
        .map(|path| {
            let run = || -> Result<PathBuf> {
                let id = image_id(path);
                let image = load_image(path)?;
                let query = PreparedQuery::from_image(&source, &id, &image)?;
                let map = predict_saliency(&bank, &query, prior.as_ref(), &cfg)?.with_bank_id(&bank_id);
                let target = a.out.join(format!("{id}.iseelmap"));
                save_map(map.grid(), &target)?;
                if a.pgm {
                    write_atomic(&a.out.join(format!("{id}.pgm")), &encode_pgm(map.grid()))?;
                }
                info!("{id}: retrieved {:?}", map.provenance().retrieved);
                Ok(target)
            };
            (path.clone(), run())
        })
        .collect();

    let total = results.len();
    let mut first_error = None;
    let mut failed = 0;
    for (path, r) in results {
        match r {
            Ok(target) => println!("{}", target.display()),
            Err(e) => {
                eprintln!("{}: {e:#}", path.display());
                failed += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        Some(e) => Err(e.context(format!("{failed} of {total} images failed"))),
        None => Ok(()),
    }
}

fn fit_prior_cmd(a: FitPriorArgs) -> Result<()> {
    let items = corpus(&a.images, &a.fixations)?;
    let sets: Vec<FixationSet> = items.into_iter().map(|it| it.fixations).collect();
    let prior = fit_prior(&sets)?;
    ensure_parent(&a.out)?;
    save_prior(&prior, &a.out)?;
    println!("wrote {} ({} kernels)", a.out.display(), prior.kernels().len());
    Ok(())
}

fn map_files(dir: &Path) -> Result<Vec<PathBuf>> {
    require_dir(dir, "map directory")?;
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "iseelmap") {
            out.push(path);
        }
    }
    out.sort();
    if out.is_empty() {
        bail!("no .iseelmap files in {}", dir.display());
    }
    Ok(out)
}

fn print_means(label: &str, report: &MetricReport) {
    let cells: Vec<String> = report
        .metrics
        .iter()
        .map(|m| format!("{m}={:.4}", report.mean(*m).unwrap_or(f64::NAN)))
        .collect();
    println!("{label:<8} {}", cells.join(" "));
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    if a.splits == 0 {
        return Err(usage("--splits must be at least 1"));
    }
    require_file(&a.fixations, "fixation file")?;
    let paths = map_files(&a.maps)?;
    let prior = load_prior_arg(a.prior.as_deref())?;
    let sizes = match &a.images {
        Some(dir) => {
            require_dir(dir, "image directory")?;
            Some(
                list_images(dir)?
                    .into_iter()
                    .map(|p| Ok((image_id(&p), load_image(&p)?)))
                    .collect::<Result<std::collections::BTreeMap<_, _>>>()?,
            )
        }
        None => None,
    };
    let mut table = read_fixations_csv(&a.fixations)?;
    let mut items = Vec::with_capacity(paths.len());
    for path in &paths {
        let id = image_id(path);
        let map = load_map(path)?;
        let (w, h) = match &sizes {
            Some(s) => {
                let img = s
                    .get(&id)
                    .with_context(|| format!("no source image for map {}", path.display()))?;
                (img.width(), img.height())
            }
            None => map.shape(),
        };
        let points = table.remove(&id).unwrap_or_default();
        let fixations = FixationSet::new(id.clone(), w, h, points)?;
        items.push(EvalItem { id, map, fixations });
    }
    for id in table.keys() {
        warn!("fixations for {id:?} have no matching map");
    }

    let opts = EvalOptions {
        splits: a.splits,
        seed: a.seed,
        sigma_gt: a.sigma_gt,
        ..Default::default()
    };
    let report = evaluate(&items, &a.metrics, &opts)?;
    write_output(&a.out, &report.to_csv()?)?;
    print_means("model", &report);

    let mut summary = json!({ "model": report });
    if let Some(prior) = &prior {
        // correlation is undefined against a constant map
        let uniform_metrics: Vec<Metric> = a.metrics.iter().copied().filter(|m| *m != Metric::Cc).collect();
        let rebase = |f: &dyn Fn(&EvalItem) -> Result<Grid>| -> Result<Vec<EvalItem>> {
            items
                .iter()
                .map(|it| {
                    Ok(EvalItem {
                        id: it.id.clone(),
                        map: f(it)?,
                        fixations: it.fixations.clone(),
                    })
                })
                .collect()
        };
        let uniform_items = rebase(&|it| {
            let (w, h) = it.map.shape();
            Ok(Grid::filled(w, h, 1.0))
        })?;
        let prior_items = rebase(&|it| {
            let (w, h) = it.map.shape();
            Ok(eval_prior(prior, w, h)?.into_grid())
        })?;
        let prior_report = evaluate(&prior_items, &a.metrics, &opts)?;
        print_means("prior", &prior_report);
        summary["prior"] = serde_json::to_value(&prior_report)?;
        if !uniform_metrics.is_empty() {
            let uniform_report = evaluate(&uniform_items, &uniform_metrics, &opts)?;
            print_means("uniform", &uniform_report);
            summary["uniform"] = serde_json::to_value(&uniform_report)?;
        }
    }
    write_json(&a.out.with_extension("json"), &summary)?;
    Ok(())
}

fn tune_cmd(a: TuneArgs) -> Result<()> {
    require_file(&a.bank, "bank file")?;
    let prior = load_prior_arg(a.prior.as_deref())?;
    let use_prior = !a.no_prior;
    if use_prior && prior.is_none() {
        warn!("no --prior given; tuning without a spatial prior");
    }
    let space = SearchSpace {
        n: a.n,
        alpha: a.alpha,
        sigma_smooth: a.sigma,
    };
    for cfg in space.configs(use_prior) {
        cfg.validate().map_err(|e| usage(e.to_string()))?;
    }
    let validation = corpus(&a.images, &a.fixations)?;
    let bank = load_bank(&a.bank)?;
    let source = feature_source(&a.feature, Some(&bank))?;
    let result = tune(
        &bank,
        &validation,
        &source,
        prior.as_ref(),
        &space,
        use_prior && prior.is_some(),
        a.sigma_gt,
    )?;
    write_json(&a.out, &result)?;
    println!(
        "best: n={} alpha={} sigma={} (mean KL {:.5} over {} images)",
        result.best.n, result.best.alpha, result.best.sigma_smooth, result.best_kl, result.validation_images
    );
    Ok(())
}

fn similarity_cmd(a: SimilarityArgs) -> Result<()> {
    if a.splits == 0 {
        return Err(usage("--splits must be at least 1"));
    }
    let items = corpus(&a.images, &a.fixations)?;
    let source = feature_source(&a.feature, None)?;
    let opts = TransferOptions {
        splits: a.splits,
        seed: a.seed,
        sigma_gt: a.sigma_gt,
    };
    let report = similarity_transfer_experiment(&items, &source, &opts)?;
    write_json(&a.out, &report)?;
    for (label, s) in [
        ("similar", report.similar),
        ("dissimilar", report.dissimilar),
        ("self", report.self_prediction),
    ] {
        println!("{label:<10} sauc={:.4} cc={:.4} nss={:.4}", s.sauc, s.cc, s.nss);
    }
    Ok(())
}

fn gen_synthetic_cmd(a: GenSyntheticArgs) -> Result<()> {
    let cfg = SynthConfig {
        train: a.count,
        test: a.test_count,
        width: a.width,
        height: a.height,
        families: a.families,
        fixations_per_image: a.fixations_per_image,
        seed: a.seed,
    };
    let corpus = generate(&cfg).map_err(|e| usage(e.to_string()))?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_corpus(&corpus, &a.out)?;
    println!(
        "wrote {} training and {} test images to {}",
        corpus.train.len(),
        corpus.test.len(),
        a.out.display()
    );
    Ok(())
}
