use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use binn_core::data::{mean_entity_labels, read_shard, synth_generate, write_shard, SynthConfig};
use binn_core::metrics::write_reports;
use binn_core::train::{
    evaluate as evaluate_model, fit_normalizer, normalizer_checkpoint, normalizer_from_checkpoint,
    predict_dataset, top_k, Dataset, FeatureSet, TrainConfig, Trainer,
};
use binn_core::{Checkpoint, Error as CoreError, KeyValues, LabelHierarchy};

use crate::{CliError, CliResult, EvalArgs, PredictArgs, RunArgs, SynthArgs, TrainArgs};

fn io_error(path: &Path, source: io::Error) -> CliError {
    CliError::Core(CoreError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn required_path(kv: &KeyValues, key: &str) -> CliResult<PathBuf> {
    kv.get(key)
        .map(PathBuf::from)
        .ok_or_else(|| CliError::Usage(format!("missing --{key} (or `{key} = ...` in the config file)")))
}

fn check_input(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(io_error(path, io::Error::new(io::ErrorKind::NotFound, "no such file")))
    }
}

fn check_output(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(io_error(
            dir,
            io::Error::new(io::ErrorKind::NotFound, "output directory does not exist"),
        )),
        _ => Ok(()),
    }
}

pub fn synth(args: &SynthArgs) -> CliResult<()> {
    let mut kv = match &args.config {
        Some(p) => KeyValues::load(p)?,
        None => KeyValues::new(),
    };
    if let Some(seed) = args.seed {
        kv.set("seed", seed);
    }
    let config = SynthConfig::from_key_values(&kv)?;
    std::fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let ds = synth_generate(&config)?;
    let vocab = args.out.join("vocab.txt");
    let train = args.out.join("train.hlvs");
    let val = args.out.join("val.hlvs");
    ds.hierarchy.save_vocabulary(&vocab)?;
    write_shard(&train, &ds.train)?;
    write_shard(&val, &ds.val)?;

    let vertical_mean = ds.train.iter().map(|r| r.labels[0].len()).sum::<usize>() as f64
        / ds.train.len() as f64;
    println!("verticals = {}", config.verticals);
    println!("entities = {}", config.entities);
    println!("train_videos = {}", ds.train.len());
    println!("val_videos = {}", ds.val.len());
    println!("entity_labels_per_video = {:.4}", mean_entity_labels(&ds.train));
    println!("vertical_labels_per_video = {vertical_mean:.4}");
    println!("configured_mean = {:.4}", config.mean_entities);
    println!("wrote {}, {}, {}", vocab.display(), train.display(), val.display());
    Ok(())
}

pub fn fit_norm(args: &RunArgs) -> CliResult<()> {
    let kv = args.key_values()?;
    let config = TrainConfig::from_key_values(&kv)?;
    let train = required_path(&kv, "train")?;
    let out = required_path(&kv, "out")?;
    check_input(&train)?;
    check_output(&out)?;

    let records = read_shard(&train)?;
    let stats = fit_normalizer(&records, &config)?;
    normalizer_checkpoint(&stats, config.features)?.save(&out)?;
    println!(
        "fitted {} normalizer on {} videos (dim {}, l2 {}) -> {}",
        stats.kind().as_str(),
        records.len(),
        stats.dim(),
        stats.l2_after,
        out.display()
    );
    Ok(())
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let kv = args.run.key_values()?;
    let vocab = required_path(&kv, "vocab")?;
    let train = required_path(&kv, "train")?;
    let out = required_path(&kv, "out")?;
    let val = kv.get("val").map(PathBuf::from);
    for p in [Some(&vocab), Some(&train), val.as_ref(), args.normalizer.as_ref(), args.resume.as_ref()]
        .into_iter()
        .flatten()
    {
        check_input(p)?;
    }
    check_output(&out)?;

    let hierarchy = LabelHierarchy::load_vocabulary(&vocab)?;
    let records = read_shard(&train)?;

    let mut trainer = match &args.resume {
        Some(path) => {
            let mut t = Trainer::from_checkpoint(&Checkpoint::load(path)?, Some(&hierarchy))?;
            if let Some(iters) = kv.parse_opt("iters")? {
                t.config.iters = iters;
            }
            t
        }
        None => {
            let config = TrainConfig::from_key_values(&kv)?;
            let normalizer = match &args.normalizer {
                Some(path) => {
                    let ck = Checkpoint::load(path)?;
                    let features: FeatureSet = ck.config.parse_or("features", config.features)?;
                    if features != config.features {
                        return Err(CliError::Usage(format!(
                            "normalizer was fitted on {} features, run uses {}",
                            features.as_str(),
                            config.features.as_str()
                        )));
                    }
                    normalizer_from_checkpoint(&ck, ck.config.require("input_dim")?)?
                }
                None => fit_normalizer(&records, &config)?,
            };
            Trainer::new(config, hierarchy, normalizer)?
        }
    };
    let config = trainer.config.clone();
    let data = Dataset::from_records(&records, &trainer.hierarchy, config.features, &trainer.normalizer)?;
    println!(
        "model = {}, features = {}, norm = {}, l2 = {}, lr = {}, iters = {}, batch_size = {}, seed = {}",
        config.model.as_str(),
        config.features.as_str(),
        config.norm.as_str(),
        config.l2,
        config.optimizer.base_lr,
        config.iters,
        config.batch_size,
        config.seed
    );
    println!(
        "train_videos = {}, input_dim = {}, layers = {:?}",
        data.len(),
        trainer.normalizer.dim(),
        trainer.hierarchy.layer_sizes()
    );
    trainer.train(&data, |r| println!("step {} loss {:.6}", r.step, r.loss))?;
    trainer.to_checkpoint()?.save(&out)?;
    println!("saved checkpoint at step {} -> {}", trainer.step(), out.display());

    if let Some(val) = val {
        let records = read_shard(&val)?;
        let data = Dataset::from_records(&records, &trainer.hierarchy, config.features, &trainer.normalizer)?;
        let reports = evaluate_model(
            &trainer.model,
            &trainer.hierarchy,
            &data,
            binn_core::metrics::DEFAULT_GAP_TOP_K,
        )?;
        for r in &reports {
            print!("{}", r.to_key_values());
        }
    }
    Ok(())
}

/// Loads a checkpoint and the dataset it should score.
fn load_for_scoring(
    checkpoint: &Path,
    shard: &Path,
    vocab: Option<&PathBuf>,
) -> CliResult<(Trainer, Dataset)> {
    check_input(checkpoint)?;
    check_input(shard)?;
    if let Some(v) = vocab {
        check_input(v)?;
    }
    let expected = vocab.map(LabelHierarchy::load_vocabulary).transpose()?;
    let trainer = Trainer::from_checkpoint(&Checkpoint::load(checkpoint)?, expected.as_ref())?;
    let records = read_shard(shard)?;
    let data = Dataset::from_records(
        &records,
        &trainer.hierarchy,
        trainer.config.features,
        &trainer.normalizer,
    )?;
    Ok((trainer, data))
}

pub fn evaluate(args: &EvalArgs) -> CliResult<()> {
    if args.top_k == 0 {
        return Err(CliError::Usage("--top-k must be at least 1".into()));
    }
    if let Some(out) = &args.out {
        check_output(out)?;
    }
    let (trainer, data) = load_for_scoring(&args.checkpoint, &args.shard, args.vocab.as_ref())?;
    let reports = evaluate_model(&trainer.model, &trainer.hierarchy, &data, args.top_k)?;
    for r in &reports {
        print!("{}", r.to_key_values());
    }
    if let Some(out) = &args.out {
        let text = PathBuf::from(format!("{}.txt", out.display()));
        let json = PathBuf::from(format!("{}.json", out.display()));
        write_reports(&reports, &text, &json)?;
        println!("wrote {}, {}", text.display(), json.display());
    }
    Ok(())
}

pub fn predict(args: &PredictArgs) -> CliResult<()> {
    if args.top_k == 0 {
        return Err(CliError::Usage("--top-k must be at least 1".into()));
    }
    if let Some(out) = &args.out {
        check_output(out)?;
    }
    let (trainer, data) = load_for_scoring(&args.checkpoint, &args.shard, args.vocab.as_ref())?;
    let probs = predict_dataset(&trainer.model, &trainer.hierarchy, &data)?;

    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(File::create(p).map_err(|e| io_error(p, e))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = BufWriter::new(sink);
    let out_path = args.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    let write_err = |e| io_error(&out_path, e);
    for (v, id) in data.ids.iter().enumerate() {
        for (t, p) in probs.iter().enumerate() {
            let Some(p) = p else { continue };
            let layer = trainer.hierarchy.layer(t);
            write!(w, "{id}\t{}", layer.name()).map_err(write_err)?;
            for (label, prob) in top_k(p.row(v), args.top_k) {
                let name = layer.labels().get(label).ok_or(CoreError::LabelOutOfRange {
                    layer: t,
                    index: label,
                    len: layer.len(),
                })?;
                write!(w, "\t{name}:{prob:.6}").map_err(write_err)?;
            }
            writeln!(w).map_err(write_err)?;
        }
    }
    w.flush().map_err(write_err)?;
    Ok(())
}
