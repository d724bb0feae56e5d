//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if anything failed.
//!
//! Checks that need the public ConTurE / DSTC9 data read local copies:
//!   TURNQUAL_CONTURE        ConTurE converted to the turnqual JSONL schema
//!                           (`quality_3p`, `raters`, `adjudicator` per turn).
//!   TURNQUAL_DSTC9_RATINGS  JSONL, one object per dialog: `dialog_id` plus
//!                           one numeric field per rating dimension.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use turnqual::aggregate::aggregate_corpus;
use turnqual::dialog::{dataset_stats, parse_dialogs, DatasetManifest, Dialog, LabelScale, Source, Turn};
use turnqual::encoder::{serialize_context, Encoder, EncoderSpec, HashBagEncoder};
use turnqual::eval::evaluate_dimensions;
use turnqual::metrics::{krippendorff_alpha, pearson, spearman, Level};
use turnqual::model::{
    batch_loss_and_grad, load_model, save_model, train, training_examples, LinearHead, Mode, ModelConfig, QualityModel,
};
use turnqual::scores::{ScoreRow, ScoreTable};
use turnqual::synth::{keyword_corpus, planted_quality_corpus};
use turnqual::weak::{
    build_annotation_labels, build_weak_labels, label_corpus, LabelMode, LabelRecord, LexiconProvider, StopDetector,
    TableProvider,
};

type Criterion = (&'static str, &'static str, fn() -> Outcome);

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

// ---- independent oracles ---------------------------------------------------

/// Textbook single-pass formula, no centering.
fn oracle_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    let den = ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt();
    if den <= 1e-12 {
        return None;
    }
    Some((n * sxy - sx * sy) / den)
}

/// Rank = 1 + number strictly below + half the number of other equal values.
fn oracle_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

/// Alpha from its pairwise definition: every ordered pair of values inside a
/// unit for D_o, every ordered pair across the pooled values for D_e.
fn oracle_alpha(units: &[Vec<f64>], level: Level) -> f64 {
    let units: Vec<&Vec<f64>> = units.iter().filter(|u| u.len() >= 2).collect();
    let pooled: Vec<f64> = units.iter().flat_map(|u| u.iter().copied()).collect();
    let n = pooled.len() as f64;
    let values: BTreeSet<i64> = pooled.iter().map(|&v| v as i64).collect();
    let count = |v: i64| pooled.iter().filter(|&&w| w as i64 == v).count() as f64;
    let delta = |a: f64, b: f64| -> f64 {
        match level {
            Level::Nominal => f64::from(u8::from(a != b)),
            Level::Interval => (a - b).powi(2),
            Level::Ordinal => {
                let (lo, hi) = if a <= b {
                    (a as i64, b as i64)
                } else {
                    (b as i64, a as i64)
                };
                if lo == hi {
                    return 0.0;
                }
                let span: f64 = values.iter().filter(|&&g| g >= lo && g <= hi).map(|&g| count(g)).sum();
                (span - (count(lo) + count(hi)) / 2.0).powi(2)
            }
        }
    };
    let mut d_o = 0.0;
    for u in &units {
        let m = u.len() as f64;
        for i in 0..u.len() {
            for j in 0..u.len() {
                if i != j {
                    d_o += delta(u[i], u[j]) / (m - 1.0);
                }
            }
        }
    }
    d_o /= n;
    let mut d_e = 0.0;
    for i in 0..pooled.len() {
        for j in 0..pooled.len() {
            if i != j {
                d_e += delta(pooled[i], pooled[j]);
            }
        }
    }
    d_e /= n * (n - 1.0);
    1.0 - d_o / d_e
}

// ---- criteria ----------------------------------------------------------------

fn ac1_correlation_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut compared, mut ties) = (0.0f64, 0, 0);
    for k in 0..1000 {
        let n = rng.random_range(2..=50);
        let tie_heavy = k % 2 == 0;
        let draw = |rng: &mut ChaCha8Rng| -> f64 {
            if tie_heavy {
                f64::from(rng.random_range(0..4u8))
            } else {
                rng.random_range(-10.0..10.0)
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        ties += usize::from(tie_heavy);
        for (got, want) in [
            (pearson(&x, &y).ok(), oracle_pearson(&x, &y)),
            (
                spearman(&x, &y).ok(),
                oracle_pearson(&oracle_ranks(&x), &oracle_ranks(&y)),
            ),
        ] {
            match (got, want) {
                (Some(g), Some(w)) => {
                    worst = worst.max((g - w).abs());
                    compared += 1;
                }
                (None, None) => {}
                (g, w) => return Outcome::Fail(format!("vector {k}: defined-ness differs ({g:?} vs {w:?})")),
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-9 && secs < 10.0,
        format!("1000 vector pairs ({ties} tie-heavy), {compared} correlations, max |diff| {worst:.2e}, {secs:.2}s"),
    )
}

fn ac2_alpha() -> Outcome {
    let some = |rows: &[&[Option<f64>]]| rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>();
    let base = some(&[
        &[Some(0.0), Some(0.0)],
        &[Some(1.0), Some(1.0)],
        &[Some(0.0), Some(1.0)],
        &[Some(2.0), Some(2.0)],
    ]);
    let missing = some(&[
        &[Some(0.0), Some(0.0), None],
        &[Some(1.0), Some(1.0), Some(1.0)],
        &[Some(0.0), None, Some(1.0)],
        &[Some(2.0), None, None],
    ]);
    let three = some(&[
        &[Some(2.0), Some(2.0), Some(1.0)],
        &[Some(0.0), Some(0.0), Some(0.0)],
        &[Some(2.0), Some(1.0), Some(2.0)],
        &[Some(0.0), Some(1.0), Some(2.0)],
        &[Some(1.0), Some(1.0), Some(2.0)],
        &[Some(2.0), Some(2.0), Some(2.0)],
    ]);
    // Hand-computed: D_o/D_e worked out on paper from the coincidence matrices.
    let hand = [
        ("2x4 nominal", &base, Level::Nominal, Some(2.0 / 3.0)),
        (
            "2x4 ordinal",
            &base,
            Level::Ordinal,
            Some(1.0 - (18.0 / 8.0) / (600.0 / 56.0)),
        ),
        ("2x4 interval", &base, Level::Interval, Some(32.0 / 39.0)),
        ("missing nominal", &missing, Level::Nominal, Some(0.5)),
        ("3x6 nominal", &three, Level::Nominal, None),
        ("3x6 ordinal", &three, Level::Ordinal, None),
    ];
    let mut worst = 0.0f64;
    for (name, rows, level, expected) in hand {
        let got = match krippendorff_alpha(rows, level) {
            Ok(r) => r.alpha,
            Err(e) => return Outcome::Fail(format!("{name}: {e}")),
        };
        let units: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().flatten().copied().collect()).collect();
        let oracle = oracle_alpha(&units, level);
        worst = worst.max((got - oracle).abs());
        if let Some(e) = expected {
            worst = worst.max((got - e).abs());
        }
    }
    let perfect = some(&[
        &[Some(1.0), Some(1.0)],
        &[Some(0.0), Some(0.0), None],
        &[Some(2.0), Some(2.0)],
    ]);
    let perfect_ok = [Level::Nominal, Level::Ordinal, Level::Interval]
        .iter()
        .all(|&l| krippendorff_alpha(&perfect, l).map(|r| r.alpha) == Ok(1.0));
    let base_line = format!("6 fixtures max |diff| {worst:.1e}, perfect agreement = 1.0: {perfect_ok}");
    if !(worst <= 1e-9 && perfect_ok) {
        return Outcome::Fail(base_line);
    }

    let Some(dialogs) = conture() else {
        return Outcome::Pass(format!(
            "{base_line}; ConTurE 0.31 sub-check SKIPPED (TURNQUAL_CONTURE not set)"
        ));
    };
    let ratings: Vec<Vec<Option<f64>>> = dialogs
        .iter()
        .flat_map(|d| &d.turns)
        .filter_map(|t| t.rater_labels.as_ref())
        .map(|r| r.iter().map(|&v| Some(v as f64)).collect())
        .collect();
    if ratings.is_empty() {
        return Outcome::Pass(format!(
            "{base_line}; ConTurE 0.31 sub-check SKIPPED (no per-rater labels in export)"
        ));
    }
    let nominal = krippendorff_alpha(&ratings, Level::Nominal)
        .map(|r| r.alpha)
        .unwrap_or(f64::NAN);
    let ordinal = krippendorff_alpha(&ratings, Level::Ordinal)
        .map(|r| r.alpha)
        .unwrap_or(f64::NAN);
    check(
        (nominal - 0.31).abs() <= 0.02 || (ordinal - 0.31).abs() <= 0.02,
        format!("{base_line}; ConTurE alpha nominal {nominal:.4}, ordinal {ordinal:.4} (target 0.31 +/- 0.02)"),
    )
}

fn ac3_label_construction() -> Outcome {
    let turns = |pairs: &[(&str, &str)]| -> Vec<Turn> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, (u, s))| Turn::new(i as u32 + 1, *u, *s))
            .collect()
    };
    let corpus = vec![
        Dialog::new(
            "fig1",
            Source::Spoken,
            turns(&[
                ("play some music", "here is a song by a band you might like"),
                ("i hate this song it is awful", "sorry about that how about jazz"),
                ("okay that works", "great enjoy the jazz"),
            ]),
        ),
        Dialog::new(
            "stopped",
            Source::Spoken,
            turns(&[("tell me a fact", "cars cars cars"), ("stop", "goodbye")]),
        ),
        Dialog::new(
            "written",
            Source::Written,
            turns(&[
                ("hello", "hi how are you"),
                ("great thanks", "glad to hear it"),
                ("bye", "bye"),
            ]),
        ),
    ];
    let provider = TableProvider::new([
        ("i hate this song it is awful", -1.97),
        ("okay that works", 0.4),
        ("stop", 0.0),
        ("great thanks", 2.2),
        ("bye", 0.1),
    ]);
    let detector = StopDetector::default();
    let mut emitted = 0;
    let mut anchor = None;
    let mut exact = true;
    let mut final_skipped = true;
    for d in &corpus {
        let set = match build_weak_labels(d, LabelMode::SentimentPlusStop, &provider, &detector) {
            Ok(s) => s,
            Err(e) => return Outcome::Fail(e.to_string()),
        };
        let only = build_weak_labels(d, LabelMode::SentimentOnly, &provider, &detector).unwrap();
        for ((i, l), (_, o)) in set.labels.iter().zip(&only.labels) {
            let (s, e) = (l.s.unwrap(), l.e.unwrap());
            exact &= l.q == s + f64::from(e) && o.q == s;
            if d.dialog_id == "fig1" && *i == 1 {
                anchor = Some((s, e, l.q, o.q));
            }
        }
        final_skipped &= set.labels.iter().all(|(i, _)| *i != d.turns.last().unwrap().index);
        emitted += set.labels.len();
    }
    let expected: usize = corpus.iter().map(|d| d.turns.len() - 1).sum();
    let Some((s, e, q, q_only)) = anchor else {
        return Outcome::Fail("anchor turn not labeled".into());
    };
    check(
        exact && final_skipped && emitted == expected && s == -1.97 && e == 1 && q == -0.97 && q_only == -1.97,
        format!(
            "{emitted} labels (expected {expected}), q = s + e exact: {exact}, final turns skipped: {final_skipped}, \
             anchor s={s} e={e} q={q} (sentiment_only q={q_only})"
        ),
    )
}

fn conture() -> Option<Vec<Dialog>> {
    let path = std::env::var_os("TURNQUAL_CONTURE")?;
    let manifest = DatasetManifest::new("conture", LabelScale::Ordinal012);
    match parse_dialogs(&path, &manifest) {
        Ok(d) => Some(d),
        Err(e) => {
            eprintln!("cannot read TURNQUAL_CONTURE: {e}");
            None
        }
    }
}

fn ac4_conture_stats() -> Outcome {
    let Some(dialogs) = conture() else {
        return Outcome::Skip("ConTurE export not available offline (set TURNQUAL_CONTURE)".into());
    };
    let stats = match dataset_stats(&dialogs) {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let pct = |l: i64| stats.label_percent.get(&l).copied().unwrap_or(0.0);
    let (p0, p1, p2) = (pct(0), pct(1), pct(2));
    check(
        stats.n_dialogs == 119
            && (stats.mean_turns - 8.95).abs() <= 0.01
            && (p0 - 30.7).abs() <= 0.5
            && (p1 - 22.2).abs() <= 0.5
            && (p2 - 47.0).abs() <= 0.5,
        format!(
            "{} dialogs, mean turns {:.3}, labels {p0:.1}% / {p1:.1}% / {p2:.1}%",
            stats.n_dialogs, stats.mean_turns
        ),
    )
}

fn ac5_dialog_level() -> Outcome {
    let (Some(mut dialogs), Some(ratings)) = (conture(), std::env::var_os("TURNQUAL_DSTC9_RATINGS")) else {
        return Outcome::Skip(
            "ConTurE and DSTC9 ratings not both available (set TURNQUAL_CONTURE, TURNQUAL_DSTC9_RATINGS)".into(),
        );
    };
    let text = match std::fs::read_to_string(&ratings) {
        Ok(t) => t,
        Err(e) => return Outcome::Fail(format!("cannot read DSTC9 ratings: {e}")),
    };
    let mut by_id: BTreeMap<String, Value> = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let Ok(Value::Object(mut obj)) = serde_json::from_str::<Value>(line) else {
            return Outcome::Fail("malformed DSTC9 ratings line".into());
        };
        if let Some(Value::String(id)) = obj.remove("dialog_id") {
            by_id.insert(id, Value::Object(obj));
        }
    }
    for d in &mut dialogs {
        if let Some(v) = by_id.get(&d.dialog_id) {
            d.extras.insert("dstc9".into(), v.clone());
        }
    }
    let rows: Vec<ScoreRow> = dialogs
        .iter()
        .flat_map(|d| {
            d.turns.iter().filter_map(move |t| {
                t.turn_quality_3p.map(|q| ScoreRow {
                    dialog_id: d.dialog_id.clone(),
                    turn_index: t.index,
                    score: q as f64,
                })
            })
        })
        .collect();
    let scores = match aggregate_corpus(&ScoreTable::new(rows)) {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let dims = evaluate_dimensions(&scores, &dialogs, "dstc9");
    let overall = dims
        .iter()
        .find(|(k, _)| k.contains("overall"))
        .and_then(|(_, r)| r.as_ref().ok().copied());
    let listing: Vec<String> = dims
        .iter()
        .map(|(k, r)| match r {
            Ok(c) => format!("{k} {:.2}/{:.2}", c.pearson, c.spearman),
            Err(_) => format!("{k} -"),
        })
        .collect();
    let Some(c) = overall else {
        return Outcome::Fail(format!("no overall dimension joined; found: {}", listing.join(", ")));
    };
    check(
        dims.len() == 11 && (c.pearson - 0.45).abs() <= 0.02 && (c.spearman - 0.48).abs() <= 0.02,
        format!("{} dialogs joined; {}", c.n, listing.join(", ")),
    )
}

fn annotation_records(dialogs: &[Dialog]) -> Vec<LabelRecord> {
    dialogs
        .iter()
        .flat_map(|d| {
            build_annotation_labels(d)
                .labels
                .into_iter()
                .map(move |(i, label)| LabelRecord {
                    dialog_id: d.dialog_id.clone(),
                    turn_index: i,
                    label,
                })
        })
        .collect()
}

fn ac6_synthetic_training() -> Outcome {
    let start = Instant::now();

    // (a) separable keyword corpus, classification.
    let train_d = keyword_corpus(300, 1, 61);
    let dev_d = keyword_corpus(60, 1, 62);
    let mut config = ModelConfig::new(Mode::Classification, EncoderSpec::hash_bag(256));
    config.learning_rate = 0.05;
    config.seed = 6;
    let enc = HashBagEncoder::new(config.encoder.clone()).unwrap();
    let examples = training_examples(&train_d, &annotation_records(&train_d), 512).unwrap();
    let out = match train(&examples, &dev_d, &config, &enc) {
        Ok(o) => o,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let correct = examples
        .iter()
        .filter(|e| (out.model.predict_text(&enc, &e.text).unwrap() >= 0.5) == (e.label == 1.0))
        .count();
    let acc = correct as f64 / examples.len() as f64;
    let max_dev = out
        .log
        .iter()
        .filter_map(|e| e.dev_metric)
        .fold(f64::NEG_INFINITY, f64::max);
    let first_max = out.log.iter().find(|e| e.dev_metric == Some(max_dev)).map(|e| e.epoch);
    let a_ok = acc >= 0.95 && out.model.dev_score == Some(max_dev) && first_max == Some(out.model.best_epoch);

    // (b) planted quality drives next-user sentiment; regression on weak labels.
    let corpus = planted_quality_corpus(600, 8, 62);
    let (train_b, rest) = corpus.split_at(400);
    let (dev_b, test_b) = rest.split_at(100);
    let labels = label_corpus(
        train_b,
        LabelMode::SentimentPlusStop,
        &LexiconProvider::default(),
        &StopDetector::default(),
    )
    .unwrap();
    let mut config = ModelConfig::new(Mode::Regression, EncoderSpec::hash_bag(256));
    config.learning_rate = 0.01;
    config.seed = 7;
    let enc = HashBagEncoder::new(config.encoder.clone()).unwrap();
    let examples = training_examples(train_b, &labels.records, 512).unwrap();
    let model = match train(&examples, dev_b, &config, &enc) {
        Ok(o) => o.model,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let (mut pred, mut planted) = (Vec::new(), Vec::new());
    for d in test_b {
        for t in &d.turns {
            if let Some(q) = t.turn_quality_3p {
                pred.push(model.predict_turn(&enc, d, t.index).unwrap());
                planted.push(q as f64);
            }
        }
    }
    let r = pearson(&pred, &planted).unwrap_or(f64::NAN);
    let r_oracle = oracle_pearson(&pred, &planted).unwrap_or(f64::NAN);
    let secs = start.elapsed().as_secs_f64();
    check(
        a_ok && r >= 0.6 && (r - r_oracle).abs() <= 1e-9 && secs < 120.0,
        format!(
            "(a) train acc {acc:.3}, selected epoch {} dev pearson {:.4} = max over epochs {max_dev:.4}; \
             (b) test pearson vs planted quality {r:.4} (oracle {r_oracle:.4}, {} turns); {secs:.1}s",
            out.model.best_epoch,
            out.model.dev_score.unwrap_or(f64::NAN),
            pred.len()
        ),
    )
}

fn ac7_gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let dim = 64;
    let enc = HashBagEncoder::new(EncoderSpec::hash_bag(dim)).unwrap();
    let dialogs = planted_quality_corpus(10, 3, 78);
    let xs: Vec<Vec<f64>> = dialogs
        .iter()
        .map(|d| {
            enc.encode(&serialize_context(d, 1, 512).unwrap().text)
                .unwrap()
                .into_inner()
        })
        .collect();
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let mut worst = 0.0f64;
    for mode in [Mode::Regression, Mode::Classification] {
        let ys: Vec<f64> = match mode {
            Mode::Regression => (0..10).map(|_| rng.random_range(-3.0..4.0)).collect(),
            Mode::Classification => (0..10).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect(),
        };
        let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: f64 = rng.random_range(-1.0..1.0);
        let (_, grad, grad_b) = batch_loss_and_grad(mode, &w, b, &refs, &ys);
        let loss = |w: &[f64], b: f64| batch_loss_and_grad(mode, w, b, &refs, &ys).0;
        let h = 1e-5;
        let rel = |fd: f64, an: f64| {
            let scale = fd.abs().max(an.abs());
            if scale < 1e-8 {
                0.0
            } else {
                (fd - an).abs() / scale
            }
        };
        for k in 0..=dim {
            let (fd, an) = if k == dim {
                ((loss(&w, b + h) - loss(&w, b - h)) / (2.0 * h), grad_b)
            } else {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[k] += h;
                wm[k] -= h;
                ((loss(&wp, b) - loss(&wm, b)) / (2.0 * h), grad[k])
            };
            worst = worst.max(rel(fd, an));
        }
    }
    check(
        worst < 1e-4,
        format!(
            "10 examples, both heads, {} parameters each, max relative error {worst:.2e}",
            dim + 1
        ),
    )
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_turnqual"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let cfg = fixtures().join("config.toml");
    let cfg = cfg.to_str().unwrap();
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let common = ["--config", cfg, "--seed", "13", "--jobs", "1"];
    let step = |extra: &[&str]| -> Result<(), String> {
        let mut args: Vec<&str> = Vec::new();
        args.extend_from_slice(&extra[..1]);
        args.extend_from_slice(&common);
        args.extend_from_slice(&extra[1..]);
        run_cli(&args)
    };
    step(&["label", "-o", &p("labels.jsonl")])?;
    step(&["train", "--labels", &p("labels.jsonl"), "-o", &p("model.tqck")])?;
    step(&["score", "--model", &p("model.tqck"), "-o", &p("scores.tsv")])?;
    step(&["aggregate", "--scores", &p("scores.tsv"), "-o", &p("dialog_scores.tsv")])?;
    step(&[
        "evaluate",
        "--scores",
        &format!("model={}", p("scores.tsv")),
        "-o",
        &p("report.tsv"),
    ])?;
    let mut files = Vec::new();
    for name in [
        "labels.jsonl",
        "model.tqck",
        "model.tqck.log.tsv",
        "scores.tsv",
        "dialog_scores.tsv",
        "report.tsv",
    ] {
        files.push((
            name.to_string(),
            std::fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"))?,
        ));
    }
    Ok(files)
}

fn ac8_determinism() -> Outcome {
    let start = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (first, second) = match (pipeline(a.path()), pipeline(b.path())) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => return Outcome::Fail(e),
    };
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let secs = start.elapsed().as_secs_f64();

    // Checkpoint round-trip: reload, rewrite, and rescore against the CLI output.
    let ckpt = a.path().join("model.tqck");
    let model = load_model(&ckpt).unwrap();
    let again = a.path().join("again.tqck");
    save_model(&model, &again).unwrap();
    let same_bytes = std::fs::read(&ckpt).unwrap() == std::fs::read(&again).unwrap();
    let reloaded = load_model(&again).unwrap();
    let enc = HashBagEncoder::new(reloaded.config.encoder.clone()).unwrap();
    let manifest = DatasetManifest::load(fixtures().join("manifest.json")).unwrap();
    let dialogs = parse_dialogs(fixtures().join("dialogs.jsonl"), &manifest).unwrap();
    let table = ScoreTable::read_tsv(std::io::BufReader::new(
        std::fs::File::open(a.path().join("scores.tsv")).unwrap(),
    ))
    .unwrap();
    let exact = table.rows.iter().all(|r| {
        let d = dialogs.iter().find(|d| d.dialog_id == r.dialog_id).unwrap();
        reloaded.predict_turn(&enc, d, r.turn_index).unwrap().to_bits() == r.score.to_bits()
    });
    check(
        differing.is_empty() && same_bytes && exact && secs < 10.0,
        format!(
            "{} artifacts compared across two runs, differing: {differing:?}; checkpoint rewrite identical: {same_bytes}; \
             {} reloaded predictions bit-identical: {exact}; {secs:.2}s for both runs",
            first.len(),
            table.len()
        ),
    )
}

fn random_dialog(rng: &mut ChaCha8Rng, id: usize) -> Dialog {
    const WORDS: &[&str] = &[
        "alpha", "bravo", "charlie", "delta", "echo", "fox", "golf", "hotel", "india", "juliet",
    ];
    let utt = |rng: &mut ChaCha8Rng| -> String {
        let n = rng.random_range(1..8);
        (0..n)
            .map(|_| WORDS[rng.random_range(0..WORDS.len())])
            .collect::<Vec<_>>()
            .join(" ")
    };
    let n = rng.random_range(1..10);
    let turns = (1..=n).map(|i| Turn::new(i, utt(rng), utt(rng))).collect();
    Dialog::new(format!("r{id}"), Source::Spoken, turns)
}

fn ac9_no_future_leakage() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let dim = 64;
    let enc = HashBagEncoder::new(EncoderSpec::hash_bag(dim)).unwrap();
    let mut head = LinearHead::zeros(dim);
    for w in &mut head.weights {
        *w = rng.random_range(-1.0..1.0);
    }
    let model = QualityModel {
        config: ModelConfig::new(Mode::Regression, EncoderSpec::hash_bag(dim)),
        head,
        best_epoch: 1,
        dev_score: None,
        metadata: Default::default(),
    };
    let mut checked = 0;
    for k in 0..20 {
        let d = random_dialog(&mut rng, k);
        for t in &d.turns {
            let i = t.index;
            // Small budgets exercise truncation as well.
            for max_tokens in [512, 12] {
                let before = serialize_context(&d, i, max_tokens).unwrap();
                let mut mutated = d.clone();
                for later in mutated.turns.iter_mut().filter(|t| t.index > i) {
                    later.user_utterance = format!("leak {}", rng.random::<u32>());
                    later.system_response = "leak leak".into();
                }
                let last = mutated.turns.last().unwrap().index;
                mutated.turns.push(Turn::new(last + 1, "leak", "leak"));
                if serialize_context(&mutated, i, max_tokens).unwrap() != before {
                    return Outcome::Fail(format!("dialog {k} turn {i}: context changed"));
                }
            }
            let mut mutated = d.clone();
            for later in mutated.turns.iter_mut().filter(|t| t.index > i) {
                later.system_response = "leak".into();
            }
            let a = model.predict_turn(&enc, &d, i).unwrap();
            let b = model.predict_turn(&enc, &mutated, i).unwrap();
            if a.to_bits() != b.to_bits() {
                return Outcome::Fail(format!("dialog {k} turn {i}: score changed"));
            }
            checked += 1;
        }
    }
    Outcome::Pass(format!(
        "20 random dialogs, {checked} turns, contexts and scores unchanged"
    ))
}

fn main() {
    // `cargo test` passes harness flags; a name filter other than ours means
    // this target was not asked for.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let criteria: [Criterion; 9] = [
        ("AC1", "correlation matches brute-force oracle", ac1_correlation_oracles),
        ("AC2", "Krippendorff's alpha fixtures", ac2_alpha),
        ("AC3", "weak label construction q = s + e", ac3_label_construction),
        ("AC4", "ConTurE ingestion statistics", ac4_conture_stats),
        ("AC5", "ConTurE vs DSTC9 dialog-level correlation", ac5_dialog_level),
        (
            "AC6",
            "synthetic training (separable + planted sentiment)",
            ac6_synthetic_training,
        ),
        ("AC7", "head gradient vs finite differences", ac7_gradient_check),
        ("AC8", "pipeline determinism and checkpoint round-trip", ac8_determinism),
        ("AC9", "no future leakage", ac9_no_future_leakage),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        match f() {
            Outcome::Pass(d) => println!("PASS {id} {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL {id} {name}: {d}");
            }
            Outcome::Skip(d) => println!("SKIP {id} {name}: {d}"),
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
