use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use ser_core::audio::{parse_manifest, Corpus, Emotion};
use ser_core::eval::{
    ablate_features, context_sweep, evaluate, gen_synth_corpus, split_corpus, write_ablation_csv,
    write_sweep_csv, AblationMode, DescriptorGroup,
};
use ser_core::features::extract_corpus;
use ser_core::models::{train_baseline, train_hierarchical, train_joint_emotion, Dataset, Model};
use ser_core::pool::FeatureTable;

use crate::config::RunConfig;
use crate::{CliError, Command, Input, Kind, ModeArg, Part};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: Command, cfg: RunConfig) -> Result<()> {
    match command {
        Command::Extract { manifest, out } => extract(&manifest, &out, &cfg),
        Command::Train {
            input,
            kind,
            ell,
            part,
            out,
        } => train(&input, kind, ell.unwrap_or(cfg.ell), part, &out, &cfg),
        Command::Predict {
            input,
            model,
            part,
            out,
        } => predict(&input, &model, part, &out, &cfg),
        Command::Eval {
            manifest,
            predictions,
            out,
        } => eval(&manifest, &predictions, &out),
        Command::Sweep { input, ells, out } => sweep(&input, ells.unwrap_or_else(|| cfg.ells.clone()), &out, &cfg),
        Command::Ablate {
            input,
            exclude,
            mode,
            ell,
            out,
        } => ablate(&input, &exclude, mode, ell.unwrap_or(cfg.ablation_ell), &out, &cfg),
        Command::Synth {
            out,
            n_dialogs,
            noise_sigma,
            no_branch_divergence,
        } => synth(&out, n_dialogs, noise_sigma, no_branch_divergence, cfg),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn extract(manifest: &Path, out: &Path, cfg: &RunConfig) -> Result<()> {
    let corpus = parse_manifest(manifest)?;
    let table = extract_corpus(&corpus, &cfg.features)?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_file(out, &buf)?;
    println!("d={} k={}", table.dim(), table.k);
    println!("wrote {} rows to {}", table.features.len(), out.display());
    Ok(())
}

fn load_features(input: &Input, corpus: &Corpus, cfg: &RunConfig) -> Result<FeatureTable> {
    match &input.features {
        Some(path) => {
            let file = File::open(path).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?;
            Ok(FeatureTable::read_csv(BufReader::new(file))?)
        }
        None => Ok(extract_corpus(corpus, &cfg.features)?),
    }
}

fn select_part(corpus: Corpus, part: Part, cfg: &RunConfig) -> Result<Corpus> {
    if part == Part::All {
        return Ok(corpus);
    }
    let (train, test) = split_corpus(&corpus, &cfg.split.to_spec(&corpus))?;
    Ok(if part == Part::Train { train } else { test })
}

fn train(input: &Input, kind: Kind, ell: usize, part: Part, out: &Path, cfg: &RunConfig) -> Result<()> {
    if ell == 0 {
        return Err(CliError::Usage("--ell must be at least 1".into()));
    }
    let corpus = parse_manifest(&input.manifest)?;
    let table = load_features(input, &corpus, cfg)?;
    let corpus = select_part(corpus, part, cfg)?;
    let data = Dataset::from_corpus(&corpus, &table)?;
    let model = match kind {
        Kind::Baseline => Model::Baseline(train_baseline(&data, &cfg.train)?),
        Kind::Hierarchical => Model::Hierarchical(train_hierarchical(&data, &cfg.train, ell)?),
        Kind::Joint => Model::Joint(train_joint_emotion(&data, &cfg.train)?),
    };
    write_file(out, &model.to_bytes())?;

    let preds = model.predict_dataset(&data)?;
    let n = data.len().max(1) as f64;
    let emotion_hits = preds.iter().zip(&data.emotion).filter(|(p, e)| p.emotion == **e).count();
    println!("trained {} model on {} utterances (d={})", model.kind(), data.len(), model.dim());
    println!("training emotion accuracy: {:.3}", emotion_hits as f64 / n);
    if let Model::Joint(m) = &model {
        let tuple_hits = preds
            .iter()
            .zip(data.emotion.iter().zip(&data.spontaneity))
            .filter(|(p, (e, s))| p.emotion == **e && p.spontaneity == Some(**s))
            .count();
        println!("tuple training accuracy: {:.3}", tuple_hits as f64 / n);
        println!("final loss {:.6} after {} epochs", m.joint.final_loss, m.joint.epochs);
    }
    Ok(())
}

fn predict(input: &Input, model_path: &Path, part: Part, out: &Path, cfg: &RunConfig) -> Result<()> {
    let model = Model::load(model_path)?;
    let corpus = parse_manifest(&input.manifest)?;
    let table = load_features(input, &corpus, cfg)?;
    let corpus = select_part(corpus, part, cfg)?;
    let data = Dataset::from_corpus(&corpus, &table)?;
    let preds = model.predict_dataset(&data)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let cerr = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(["utterance_id", "emotion", "spontaneity"]).map_err(cerr)?;
    for (id, p) in data.ids.iter().zip(&preds) {
        let s = p.spontaneity.map(|s| s.index().to_string()).unwrap_or_default();
        w.write_record([id.as_str(), &p.emotion.index().to_string(), &s]).map_err(cerr)?;
    }
    let buf = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(out, &buf)?;
    println!("wrote {} predictions to {}", preds.len(), out.display());
    Ok(())
}

fn eval(manifest: &Path, predictions: &Path, out: &Path) -> Result<()> {
    let corpus = parse_manifest(manifest)?;
    let by_id: HashMap<&str, usize> = corpus
        .utterances()
        .iter()
        .enumerate()
        .map(|(i, u)| (u.utterance_id.as_str(), i))
        .collect();
    let mut rdr = csv::Reader::from_path(predictions)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", predictions.display())))?;
    let mut predicted = Vec::new();
    let mut truth = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let bad = |msg: String| CliError::Runtime(format!("{} row {}: {msg}", predictions.display(), row + 2));
        let record = record.map_err(|e| bad(e.to_string()))?;
        let id = record.get(0).unwrap_or_default();
        let &i = by_id.get(id).ok_or_else(|| bad(format!("utterance {id:?} is not in the manifest")))?;
        let emotion = record
            .get(1)
            .and_then(|v| v.trim().parse::<usize>().ok())
            .and_then(Emotion::from_index)
            .ok_or_else(|| bad("emotion must be 0..3".into()))?;
        predicted.push(emotion);
        truth.push(corpus.utterances()[i].clone());
    }
    let report = evaluate(&predicted, &truth)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    write_file(out, &buf)?;
    println!("overall accuracy {:.6} on {} utterances", report.overall_accuracy, report.n_test);
    Ok(())
}

fn split_datasets(input: &Input, cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    let corpus = parse_manifest(&input.manifest)?;
    let table = load_features(input, &corpus, cfg)?;
    let (train, test) = split_corpus(&corpus, &cfg.split.to_spec(&corpus))?;
    Ok((Dataset::from_corpus(&train, &table)?, Dataset::from_corpus(&test, &table)?))
}

fn sweep(input: &Input, ells: Vec<usize>, out: &Path, cfg: &RunConfig) -> Result<()> {
    if ells.is_empty() || ells.contains(&0) {
        return Err(CliError::Usage("--ells needs positive context lengths".into()));
    }
    let (train, test) = split_datasets(input, cfg)?;
    let rows = context_sweep(&train, &test, &ells, &cfg.train)?;
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf)?;
    write_file(out, &buf)?;
    for r in &rows {
        println!("ell={} accuracy={:.6}", r.ell, r.accuracy);
    }
    Ok(())
}

fn parse_set(spec: &str) -> Result<Vec<DescriptorGroup>> {
    if spec.trim() == "none" {
        return Ok(Vec::new());
    }
    spec.split(',')
        .map(|name| name.parse().map_err(|e: ser_core::Error| CliError::Usage(e.to_string())))
        .collect()
}

fn ablate(input: &Input, exclude: &[String], mode: ModeArg, ell: usize, out: &Path, cfg: &RunConfig) -> Result<()> {
    if ell == 0 {
        return Err(CliError::Usage("--ell must be at least 1".into()));
    }
    let mut sets = vec![Vec::new()];
    if exclude.is_empty() {
        sets.extend(DescriptorGroup::ALL.iter().map(|&g| vec![g]));
    } else {
        for spec in exclude {
            let set = parse_set(spec)?;
            if !set.is_empty() {
                sets.push(set);
            }
        }
    }
    let modes = match mode {
        ModeArg::DropBaseAndDelta => vec![AblationMode::DropBaseAndDelta],
        ModeArg::DropBaseKeepDelta => vec![AblationMode::DropBaseKeepDelta],
        ModeArg::Both => vec![AblationMode::DropBaseAndDelta, AblationMode::DropBaseKeepDelta],
    };
    let (train, test) = split_datasets(input, cfg)?;
    let names = cfg.features.lld.descriptor_names();
    let rows = ablate_features(&train, &test, &names, &sets, &modes, ell, &cfg.train)?;
    let mut buf = Vec::new();
    write_ablation_csv(&rows, &mut buf)?;
    write_file(out, &buf)?;
    for r in &rows {
        println!("{} {} dim={} accuracy={:.6}", r.excluded_label(), r.mode.name(), r.dim, r.accuracy);
    }
    Ok(())
}

fn synth(out: &Path, n_dialogs: Option<usize>, noise_sigma: Option<f64>, no_divergence: bool, cfg: RunConfig) -> Result<()> {
    let mut spec = cfg.synth;
    if let Some(n) = n_dialogs {
        spec.n_dialogs = n;
    }
    if let Some(s) = noise_sigma {
        spec.noise_sigma = s;
    }
    if no_divergence {
        spec.branch_divergence = false;
    }
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let corpus = gen_synth_corpus(&spec, out)?;
    println!(
        "wrote {} utterances in {} dialogs to {}",
        corpus.corpus.len(),
        corpus.corpus.n_dialogs(),
        corpus.manifest_path.display()
    );
    Ok(())
}
