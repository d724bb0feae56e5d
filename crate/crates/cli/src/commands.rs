use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context as _};
use clap::{Args, ValueEnum};
use serde_json::{json, Value};
use turnqual::aggregate::{aggregate_corpus, write_dialog_scores};
use turnqual::dialog::{parse_dialogs, split_dialogs, write_dialogs, DatasetManifest, Dialog, LabelScale};
use turnqual::encoder::{AdapterRegistry, EncoderSpec, HASH_BAG_ID};
use turnqual::eval::{build_report, evaluate_dimensions, ingest_external_scores, render_report, ReportFormat};
use turnqual::metrics::{krippendorff_alpha, majority_vote, Level, MetricsError};
use turnqual::model::{load_model, save_model, train as fit, training_examples, Mode, ModelConfig};
use turnqual::scores::ScoreTable;
use turnqual::weak::{
    label_corpus, ExternalProvider, LabelMode, LabelRecord, LexiconProvider, SentimentProvider, StopDetector,
};

use crate::config::{create, file_digest, finish, pick, required_path, FileConfig, Provenance};
use crate::exit::{Failure, ResultExt};
use crate::{Common, DataArgs};

pub const DEFAULT_DIMENSION: usize = 256;

pub struct Context {
    pub common: Common,
    pub file: FileConfig,
}

impl Context {
    fn seed(&self) -> u64 {
        pick(self.common.seed, self.file.seed, 0)
    }

    fn output(&self) -> Result<PathBuf, Failure> {
        self.common
            .output
            .clone()
            .ok_or_else(|| Failure::usage(anyhow!("missing --output")))
    }

    fn registry(&self) -> AdapterRegistry {
        match self.file.pretrained() {
            Some(p) => AdapterRegistry::with_pretrained(p),
            None => AdapterRegistry::default(),
        }
    }

    fn encoder_settings(&self) -> Value {
        match &self.file.encoder.pretrained {
            Some(p) => json!({ "model_name": p.model_name, "command": p.command, "args": p.args }),
            None => Value::Null,
        }
    }
}

struct Corpus {
    dialogs: Vec<Dialog>,
    manifest: Option<DatasetManifest>,
    name: String,
    settings: Value,
}

fn load_corpus(ctx: &Context, data: &DataArgs, allow_split: bool) -> Result<Corpus, Failure> {
    let f = &ctx.file;
    let path = required_path(&data.dialogs, f.path(&f.data.dialogs), "dialogs")?;
    let manifest_path = data.manifest.clone().or(f.path(&f.data.manifest));
    let manifest = match &manifest_path {
        Some(p) => Some(DatasetManifest::load(p)?),
        None => None,
    };
    let scale = manifest
        .as_ref()
        .map(|m| m.label_scale)
        .or(f.data.label_scale)
        .unwrap_or(LabelScale::Ordinal012);
    let mut effective = manifest.clone().unwrap_or_default();
    effective.label_scale = scale;
    let mut dialogs = parse_dialogs(&path, &effective)?;

    let split = if allow_split {
        data.split.clone().or(f.data.split.clone())
    } else {
        None
    };
    if let Some(split) = &split {
        let m = manifest
            .as_ref()
            .ok_or_else(|| Failure::usage(anyhow!("--split `{split}` needs a manifest")))?;
        dialogs = split_dialogs(&dialogs, m)?
            .remove(split)
            .ok_or_else(|| Failure::usage(anyhow!("manifest has no split `{split}`")))?;
    }
    let name = match &manifest {
        Some(m) if !m.name.is_empty() => m.name.clone(),
        _ => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let settings = json!({
        "dialogs": file_digest(&path)?,
        "manifest": match &manifest_path { Some(p) => file_digest(p)?, None => Value::Null },
        "label_scale": scale.name(),
        "split": split,
    });
    Ok(Corpus {
        dialogs,
        manifest,
        name,
        settings,
    })
}

fn parse_choice<T: std::str::FromStr<Err = String>>(value: &str) -> Result<T, Failure> {
    value.parse().map_err(|e: String| Failure::usage(anyhow!(e)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelFormat {
    Jsonl,
    Tsv,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[command(flatten)]
    data: DataArgs,
    /// sentiment_only, sentiment_plus_stop or annotation.
    #[arg(long)]
    mode: Option<String>,
    /// lexicon or external.
    #[arg(long)]
    provider: Option<String>,
    /// Word-valence TSV replacing the built-in lexicon.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Program for the external provider (one utterance per line in, one
    /// valence per line out).
    #[arg(long)]
    provider_cmd: Option<String>,
    #[arg(long = "provider-arg", allow_hyphen_values = true)]
    provider_args: Vec<String>,
    /// One stop phrase per line, replacing the defaults.
    #[arg(long)]
    stop_phrases: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LabelFormat::Jsonl)]
    format: LabelFormat,
}

pub fn label(ctx: &Context, a: LabelArgs) -> Result<(), Failure> {
    let f = &ctx.file;
    let corpus = load_corpus(ctx, &a.data, true)?;
    let output = ctx.output()?;
    let mode: LabelMode = parse_choice(&pick(a.mode, f.label.mode.clone(), "sentiment_plus_stop".into()))?;
    let provider_id = pick(a.provider, f.label.provider.clone(), "lexicon".into());

    let lexicon = a.lexicon.or(f.path(&f.label.lexicon));
    let stop_path = a.stop_phrases.or(f.path(&f.label.stop_phrases));
    let detector = match &stop_path {
        Some(p) => StopDetector::from_file(p)?,
        None => StopDetector::default(),
    };
    let (provider, provider_settings): (Box<dyn SentimentProvider>, Value) = match provider_id.as_str() {
        "lexicon" => match &lexicon {
            Some(p) => (
                Box::new(LexiconProvider::from_file(p)?),
                json!({ "lexicon": file_digest(p)? }),
            ),
            None => (Box::new(LexiconProvider::default()), json!({ "lexicon": "builtin" })),
        },
        "external" => {
            let cmd = a
                .provider_cmd
                .or(f.label.command.clone())
                .ok_or_else(|| Failure::usage(anyhow!("external provider needs --provider-cmd")))?;
            let args = if a.provider_args.is_empty() {
                f.label.args.clone()
            } else {
                a.provider_args
            };
            let settings = json!({ "command": cmd, "args": args });
            (Box::new(ExternalProvider::spawn(&cmd, &args)?), settings)
        }
        other => {
            return Err(Failure::usage(anyhow!(
                "unknown provider `{other}` (expected lexicon or external)"
            )))
        }
    };

    let prov = Provenance::new(
        "label",
        ctx.seed(),
        json!({
            "data": corpus.settings,
            "mode": mode.name(),
            "provider": provider_id,
            "provider_settings": provider_settings,
            "stop_phrases": match &stop_path { Some(p) => file_digest(p)?, None => json!("builtin") },
            "format": format!("{:?}", a.format).to_lowercase(),
        }),
    );
    let labels = label_corpus(&corpus.dialogs, mode, provider.as_ref(), &detector)?;
    let summary = format!(
        "labels={} skipped={} mode={}",
        labels.records.len(),
        labels.skipped,
        mode.name()
    );

    let mut w = create(&output)?;
    let written: std::io::Result<()> = (|| match a.format {
        LabelFormat::Jsonl => {
            let mut pre = prov.json();
            pre["labels"] = json!(labels.records.len());
            pre["skipped"] = json!(labels.skipped);
            pre["mode"] = json!(mode.name());
            writeln!(w, "{}", json!({ "preamble": pre }))?;
            for r in &labels.records {
                writeln!(w, "{}", serde_json::to_string(r)?)?;
            }
            Ok(())
        }
        LabelFormat::Tsv => {
            ScoreTable::from_labels(&labels.records).write_tsv(&mut w, &[prov.header(), summary.clone()])
        }
    })();
    written.runtime()?;
    finish(w, &output)?;
    eprintln!(
        "labels emitted: {}, turns skipped: {}",
        labels.records.len(),
        labels.skipped
    );
    if labels.records.is_empty() {
        return Err(Failure::data(anyhow!(
            "no labels emitted; does the corpus carry `{}` labels?",
            mode.name()
        )));
    }
    Ok(())
}

/// Reads a label JSONL file, skipping its preamble line.
pub fn read_labels(path: &Path) -> Result<Vec<LabelRecord>, Failure> {
    let file = File::open(path)
        .with_context(|| format!("cannot read labels {}", path.display()))
        .usage()?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line
            .with_context(|| format!("cannot read labels {}", path.display()))
            .usage()?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: malformed label record", path.display(), n + 1))
            .data()?;
        if value.get("preamble").is_some() {
            continue;
        }
        out.push(
            serde_json::from_value(value)
                .with_context(|| format!("{}:{}: malformed label record", path.display(), n + 1))
                .data()?,
        );
    }
    Ok(out)
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Label JSONL produced by `label`.
    #[arg(long)]
    labels: PathBuf,
    /// classification or regression (default: classification for 0/1
    /// annotation labels, regression otherwise).
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    adapter: Option<String>,
    #[arg(long)]
    dimension: Option<usize>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// dev_pearson, dev_spearman or dev_loss.
    #[arg(long)]
    selection_metric: Option<String>,
    #[arg(long)]
    train_split: Option<String>,
    #[arg(long)]
    dev_split: Option<String>,
    /// Per-epoch log (default: <output>.log.tsv).
    #[arg(long)]
    log: Option<PathBuf>,
}

pub fn train(ctx: &Context, a: TrainArgs) -> Result<(), Failure> {
    let f = &ctx.file;
    let t = &f.train;
    if a.data.split.is_some() {
        return Err(Failure::usage(anyhow!(
            "train takes --train-split/--dev-split, not --split"
        )));
    }
    let corpus = load_corpus(ctx, &a.data, false)?;
    let output = ctx.output()?;
    if !a.labels.exists() {
        return Err(Failure::usage(anyhow!(
            "labels path {} does not exist",
            a.labels.display()
        )));
    }
    let labels = read_labels(&a.labels)?;

    let manifest = corpus
        .manifest
        .as_ref()
        .ok_or_else(|| Failure::usage(anyhow!("train needs a manifest with a dev split")))?;
    let dev_name = pick(a.dev_split, t.dev_split.clone(), "dev".into());
    let train_name = pick(a.train_split, t.train_split.clone(), "train".into());
    let mut splits = split_dialogs(&corpus.dialogs, manifest)?;
    let dev = splits
        .remove(&dev_name)
        .ok_or_else(|| Failure::usage(anyhow!("manifest has no split `{dev_name}`")))?;
    let train_dialogs = match splits.remove(&train_name) {
        Some(d) => d,
        None => {
            let dev_ids: BTreeSet<&str> = dev.iter().map(|d| d.dialog_id.as_str()).collect();
            corpus
                .dialogs
                .iter()
                .filter(|d| !dev_ids.contains(d.dialog_id.as_str()))
                .cloned()
                .collect()
        }
    };
    let train_ids: BTreeSet<&str> = train_dialogs.iter().map(|d| d.dialog_id.as_str()).collect();
    let labels: Vec<LabelRecord> = labels
        .into_iter()
        .filter(|r| train_ids.contains(r.dialog_id.as_str()))
        .collect();

    let mode = match a.mode.or(t.mode.clone()) {
        Some(m) => parse_choice::<Mode>(&m)?,
        None if !labels.is_empty()
            && labels
                .iter()
                .all(|r| r.label.mode == LabelMode::Annotation && (r.label.q == 0.0 || r.label.q == 1.0)) =>
        {
            Mode::Classification
        }
        None => Mode::Regression,
    };
    let encoder_spec = EncoderSpec {
        adapter_id: pick(a.adapter, f.encoder.adapter.clone(), HASH_BAG_ID.into()),
        dimension: pick(a.dimension, f.encoder.dimension, DEFAULT_DIMENSION),
        max_tokens: pick(
            a.max_tokens,
            f.encoder.max_tokens,
            turnqual::encoder::DEFAULT_MAX_TOKENS,
        ),
        trainable: false,
    };
    let mut config = ModelConfig::new(mode, encoder_spec);
    config.batch_size = pick(a.batch_size, t.batch_size, config.batch_size);
    config.learning_rate = pick(a.learning_rate, t.learning_rate, config.learning_rate);
    config.epochs = pick(a.epochs, t.epochs, config.epochs);
    if let Some(m) = a.selection_metric.or(t.selection_metric.clone()) {
        config.selection_metric = parse_choice(&m)?;
    }
    config.seed = ctx.seed();
    config.validate()?;

    let prov = Provenance::new(
        "train",
        config.seed,
        json!({
            "data": corpus.settings,
            "labels": file_digest(&a.labels)?,
            "train_split": train_name,
            "dev_split": dev_name,
            "model": serde_json::to_value(&config).runtime()?,
            "pretrained": ctx.encoder_settings(),
        }),
    );
    let encoder = ctx.registry().build(&config.encoder)?;
    let examples = training_examples(&train_dialogs, &labels, config.encoder.max_tokens)?;
    log::info!(
        "training {} head on {} examples, {} dev dialogs",
        mode.name(),
        examples.len(),
        dev.len()
    );
    let mut outcome = fit(&examples, &dev, &config, encoder.as_ref())?;
    let meta = &mut outcome.model.metadata;
    meta.insert("tool_version".into(), turnqual::VERSION.into());
    meta.insert("config_sha256".into(), prov.config_hash.clone());
    meta.insert("seed".into(), prov.seed.to_string());
    save_model(&outcome.model, &output)?;

    let log_path = a.log.unwrap_or_else(|| {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".log.tsv");
        output.with_file_name(name)
    });
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| x.to_string());
    let selection = serde_json::to_value(config.selection_metric).runtime()?;
    let selection = selection.as_str().unwrap_or_default();
    let mut w = create(&log_path)?;
    let written: std::io::Result<()> = (|| {
        writeln!(w, "# {}", prov.header())?;
        writeln!(
            w,
            "# selected_epoch={} selection={} dev_metric={}",
            outcome.model.best_epoch,
            selection,
            fmt(outcome.model.dev_score)
        )?;
        writeln!(w, "epoch\ttrain_loss\tdev_metric")?;
        for e in &outcome.log {
            writeln!(w, "{}\t{}\t{}", e.epoch, e.train_loss, fmt(e.dev_metric))?;
        }
        Ok(())
    })();
    written.runtime()?;
    finish(w, &log_path)?;
    eprintln!(
        "selected epoch {} of {} (dev metric {})",
        outcome.model.best_epoch,
        config.epochs,
        fmt(outcome.model.dev_score)
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Checkpoint written by `train`.
    #[arg(long)]
    model: PathBuf,
}

pub fn score(ctx: &Context, a: ScoreArgs) -> Result<(), Failure> {
    let corpus = load_corpus(ctx, &a.data, true)?;
    let output = ctx.output()?;
    if !a.model.exists() {
        return Err(Failure::usage(anyhow!(
            "model path {} does not exist",
            a.model.display()
        )));
    }
    let model = load_model(&a.model)?;
    let prov = Provenance::new(
        "score",
        ctx.seed(),
        json!({
            "data": corpus.settings,
            "model": file_digest(&a.model)?,
            "pretrained": ctx.encoder_settings(),
        }),
    );
    let encoder = ctx.registry().build(&model.config.encoder)?;
    let scored = model.predict_corpus(encoder.as_ref(), &corpus.dialogs)?;
    let mut w = create(&output)?;
    scored.table.write_tsv(&mut w, &[prov.header()]).runtime()?;
    finish(w, &output)?;
    for (id, why) in &scored.failures {
        log::warn!("dialog `{id}` not scored: {why}");
    }
    if !scored.failures.is_empty() {
        return Err(Failure::data(anyhow!(
            "{} of {} dialogs could not be scored",
            scored.failures.len(),
            corpus.dialogs.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Turn-score TSV (dialog_id, turn_index, score).
    #[arg(long)]
    scores: PathBuf,
}

pub fn aggregate(ctx: &Context, a: AggregateArgs) -> Result<(), Failure> {
    let output = ctx.output()?;
    if !a.scores.exists() {
        return Err(Failure::usage(anyhow!(
            "scores path {} does not exist",
            a.scores.display()
        )));
    }
    let table = ingest_external_scores(&a.scores)?;
    let prov = Provenance::new(
        "aggregate",
        ctx.seed(),
        json!({ "scores": file_digest(&a.scores)?, "aggregator": "mean" }),
    );
    let dialog_scores = aggregate_corpus(&table)?;
    let mut w = create(&output)?;
    write_dialog_scores(&mut w, &dialog_scores, &[prov.header()]).runtime()?;
    finish(w, &output)
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Turn-score table, as PATH or NAME=PATH; repeat to compare systems.
    #[arg(long = "scores", required = true)]
    scores: Vec<String>,
    #[arg(long, default_value = "tsv")]
    format: String,
    /// Report correlations against every numeric field of this dialog-level
    /// group (e.g. `dstc9`) instead of the standard report.
    #[arg(long)]
    dimensions: Option<String>,
}

fn named_table(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => {
            let p = PathBuf::from(spec);
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            (name, p)
        }
    }
}

pub fn evaluate(ctx: &Context, a: EvaluateArgs) -> Result<(), Failure> {
    let corpus = load_corpus(ctx, &a.data, true)?;
    let format: ReportFormat = parse_choice(&a.format)?;
    let mut tables = Vec::new();
    let mut digests = Vec::new();
    for spec in &a.scores {
        let (name, path) = named_table(spec);
        if !path.exists() {
            return Err(Failure::usage(anyhow!("scores path {} does not exist", path.display())));
        }
        digests.push(json!({ "name": name, "scores": file_digest(&path)? }));
        tables.push((name, ingest_external_scores(&path)?));
    }
    let prov = Provenance::new(
        "evaluate",
        ctx.seed(),
        json!({ "data": corpus.settings, "tables": digests, "format": a.format, "dimensions": a.dimensions }),
    );

    let body = match &a.dimensions {
        None => {
            let reports = tables
                .iter()
                .map(|(name, table)| build_report(&corpus.name, name, table, &corpus.dialogs))
                .collect::<Result<Vec<_>, _>>()?;
            for r in &reports {
                log::info!("{}: coverage {:?}", r.model_id, r.coverage);
            }
            render_report(&reports, format)
        }
        Some(group) => {
            let mut rows = Vec::new();
            for (name, table) in &tables {
                let dialog_scores = aggregate_corpus(table)?;
                for (dim, result) in evaluate_dimensions(&dialog_scores, &corpus.dialogs, group) {
                    match result {
                        Ok(c) => rows.push([
                            name.clone(),
                            corpus.name.clone(),
                            dim,
                            format!("{:.4}", c.pearson),
                            format!("{:.4}", c.spearman),
                            c.n.to_string(),
                        ]),
                        Err(e) => {
                            log::warn!("{name}: dimension `{dim}`: {e}");
                            rows.push([
                                name.clone(),
                                corpus.name.clone(),
                                dim,
                                "-".into(),
                                "-".into(),
                                "-".into(),
                            ]);
                        }
                    }
                }
            }
            if rows.is_empty() {
                return Err(Failure::data(anyhow!("no dialog carries numeric `{group}` fields")));
            }
            render_rows(
                &["model", "dataset", "dimension", "pearson", "spearman", "n"],
                &rows,
                format,
            )
        }
    };
    let text = match format {
        ReportFormat::Tsv => format!("# {}\n{body}", prov.header()),
        ReportFormat::Markdown => format!("<!-- {} -->\n{body}", prov.header()),
    };
    emit(ctx.common.output.as_deref(), &text)
}

fn render_rows(header: &[&str], rows: &[[String; 6]], format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Tsv => {
            let _ = writeln!(out, "{}", header.join("\t"));
            for r in rows {
                let _ = writeln!(out, "{}", r.join("\t"));
            }
        }
        ReportFormat::Markdown => {
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
            for r in rows {
                let _ = writeln!(out, "| {} |", r.join(" | "));
            }
        }
    }
    out
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes()).runtime()?;
            finish(w, p)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Also write the corpus with `quality_3p` set to the resolved labels.
    #[arg(long)]
    resolved_dialogs: Option<PathBuf>,
}

pub fn agreement(ctx: &Context, a: AgreementArgs) -> Result<(), Failure> {
    let corpus = load_corpus(ctx, &a.data, true)?;
    let prov = Provenance::new("agreement", ctx.seed(), json!({ "data": corpus.settings }));

    let mut items = Vec::new();
    for d in &corpus.dialogs {
        for t in &d.turns {
            if let Some(raters) = t.rater_labels.as_ref().filter(|r| !r.is_empty()) {
                items.push((d.dialog_id.as_str(), t.index, raters.as_slice(), t.adjudicator_label));
            }
        }
    }
    if items.is_empty() {
        return Err(Failure::data(anyhow!("no turn carries rater labels")));
    }
    let ratings: Vec<Vec<Option<f64>>> = items
        .iter()
        .map(|(_, _, r, _)| r.iter().map(|&x| Some(x as f64)).collect())
        .collect();
    let nominal = krippendorff_alpha(&ratings, Level::Nominal)?;
    let ordinal = krippendorff_alpha(&ratings, Level::Ordinal)?;

    let mut resolved: BTreeMap<(&str, u32), i64> = BTreeMap::new();
    let mut text = String::new();
    let _ = writeln!(text, "# {}", prov.header());
    let _ = writeln!(
        text,
        "# alpha_nominal={:.4} alpha_ordinal={:.4} items={} raters={}",
        nominal.alpha, ordinal.alpha, nominal.n_items, nominal.n_raters
    );
    let _ = writeln!(text, "dialog_id\tturn_index\tlabel\tresolution");
    let mut adjudicated = 0;
    for &(id, index, raters, adjudicator) in &items {
        let label = majority_vote(raters, adjudicator).map_err(|e| match e {
            MetricsError::UnresolvedTie { labels, .. } => MetricsError::UnresolvedTie {
                labels,
                item: Some(format!("{id} turn {index}")),
            },
            other => other,
        })?;
        let how = if majority_vote(raters, None).is_ok() {
            "majority"
        } else {
            adjudicated += 1;
            "adjudicator"
        };
        resolved.insert((id, index), label);
        let _ = writeln!(text, "{id}\t{index}\t{label}\t{how}");
    }
    println!("alpha (nominal): {:.4}", nominal.alpha);
    println!("alpha (ordinal): {:.4}", ordinal.alpha);
    println!(
        "items: {}, raters: {}, ties resolved by adjudicator: {adjudicated}",
        nominal.n_items, nominal.n_raters
    );
    if let Some(out) = &ctx.common.output {
        emit(Some(out), &text)?;
    }

    if let Some(path) = &a.resolved_dialogs {
        let mut dialogs = corpus.dialogs.clone();
        for d in &mut dialogs {
            for t in &mut d.turns {
                if let Some(&label) = resolved.get(&(d.dialog_id.as_str(), t.index)) {
                    t.turn_quality_3p = Some(label);
                }
            }
        }
        let mut w = create(path)?;
        write_dialogs(&mut w, &dialogs).runtime()?;
        finish(w, path)?;
    }
    Ok(())
}
