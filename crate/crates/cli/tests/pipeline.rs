use std::fs;
use std::path::Path;
use std::process::Command;

use sentidyn::cells::Architecture;
use sentidyn::numerics::norm2;
use sentidyn::training::ClassifierModel;
use sentidyn_cli::config::DataSource;
use sentidyn_cli::pipeline::{cmd_analyze, cmd_baseline, cmd_report, cmd_synth, cmd_train, CHECKPOINT_FILE, SUMMARY_FILE};
use sentidyn_cli::tables::{self, RawTable, FIGURE_TABLES};
use sentidyn_cli::{Checkpoint, CliError, PipelineConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_config(arch: &str) -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.seed = 3;
    c.model.architecture = arch.into();
    c.model.hidden_size = 6;
    c.model.embedding_size = 4;
    let s = &mut c.data.synthetic;
    s.positive = 3;
    s.negative = 3;
    s.neutral = 10;
    s.min_len = 5;
    s.max_len = 15;
    s.n_docs = 240;
    c.train.epochs = 2;
    c.train.batch_size = 16;
    c.train.learning_rate = 1e-2;
    c.fixed_points.n_initial = 16;
    c.fixed_points.max_iterations = 3000;
    c.analysis.lexicon_size = 3;
    c.analysis.n_documents = 30;
    c.analysis.n_null = 500;
    c.analysis.k_neighbors = 4;
    c.analysis.max_error_steps = 200;
    c
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap_or("").to_string()
}

fn train_and_analyze(cfg: &PipelineConfig, dir: &Path) -> Result<(), CliError> {
    cmd_train(cfg, dir)?;
    let out = dir.join("analysis");
    let r = cmd_analyze(cfg, &dir.join(CHECKPOINT_FILE), &out);
    match r {
        Ok(_) | Err(CliError::Degenerate(_)) => {}
        Err(e) => return Err(e),
    }
    cmd_report(&out)?;
    Ok(())
}

#[test]
fn sweep_produces_identical_schemas() {
    let root = tempfile::tempdir().unwrap();
    let data_dir = root.path().join("data");
    cmd_synth(&small_config("gru"), &data_dir).unwrap();
    let mut reference: Option<Vec<String>> = None;
    for arch in ["vanilla", "gru", "lstm", "ugrnn"] {
        for files in [false, true] {
            let mut cfg = small_config(arch);
            if files {
                cfg.data.source = DataSource::Files;
                cfg.data.train = Some(data_dir.join("train.tsv"));
                cfg.data.validation = Some(data_dir.join("validation.tsv"));
                cfg.data.test = Some(data_dir.join("test.tsv"));
            }
            let dir = root.path().join(format!("{arch}-{files}"));
            train_and_analyze(&cfg, &dir).unwrap_or_else(|e| panic!("{arch} files={files}: {e}"));
            let a = dir.join("analysis");
            let mut schema: Vec<String> = FIGURE_TABLES
                .iter()
                .map(|s| header(&a.join(tables::file_name(s.name))))
                .collect();
            let summary = fs::read_to_string(a.join(SUMMARY_FILE)).unwrap();
            // table names and acceptance rows, without the numbers
            schema.extend(summary.lines().filter(|l| l.starts_with("| ")).map(|l| l.split(" | ").take(2).collect::<Vec<_>>().join("|")));
            match &reference {
                None => reference = Some(schema),
                Some(r) => assert_eq!(r, &schema, "{arch} files={files}"),
            }
        }
    }
}

#[test]
fn zero_epochs_checkpoints_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config("gru");
    cfg.train.epochs = 0;
    cmd_train(&cfg, dir.path()).unwrap();
    let ck = Checkpoint::load(&dir.path().join(CHECKPOINT_FILE), Some(Architecture::Gru)).unwrap();
    let init = ClassifierModel::init(Architecture::Gru, ck.vocab.len(), 6, 4, &mut ChaCha8Rng::seed_from_u64(cfg.seed));
    assert_eq!(ck.model, Checkpoint::rounded(&init));
    let metrics = RawTable::parse(&fs::read_to_string(dir.path().join("metrics.tsv")).unwrap());
    let kinds: Vec<&str> = metrics.rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(kinds, ["epoch", "test", "bag_of_words"]);
}

#[test]
fn linear_cell_has_a_single_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config("linear");
    cfg.train.epochs = 0;
    // location error scales with sqrt(threshold); tighten it to resolve 1e-4
    cfg.fixed_points.threshold = 1e-14;
    cmd_train(&cfg, dir.path()).unwrap();
    // make the recurrence contracting so that the fixed point is a global attractor
    let p = dir.path().join(CHECKPOINT_FILE);
    let mut ck = Checkpoint::load(&p, None).unwrap();
    let w = &mut ck.model.cell.tensors_mut()[0];
    let n = w.rows();
    for i in 0..n {
        for j in 0..n {
            w[(i, j)] = if i == j { 0.5 } else { 0.05 * ((i + 2 * j) % 3) as f64 - 0.05 };
        }
    }
    ck.save(&p).unwrap();
    let out = dir.path().join("analysis");
    let s = cmd_analyze(&cfg, &p, &out).unwrap();
    assert_eq!(s.n_accepted, 16);

    let fp = RawTable::parse(&fs::read_to_string(out.join("fixed_points.tsv")).unwrap());
    let pcs: Vec<Vec<f64>> = fp
        .rows
        .iter()
        .map(|r| r[6..9].iter().map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    for a in &pcs {
        let d: Vec<f64> = a.iter().zip(&pcs[0]).map(|(x, y)| x - y).collect();
        assert!(norm2(&d) < 1e-4, "{a:?} vs {:?}", pcs[0]);
    }
    let spectra = RawTable::parse(&fs::read_to_string(out.join("eigen_spectra.tsv")).unwrap());
    let mags = spectra.floats("magnitude");
    for (i, m) in mags.iter().enumerate() {
        assert!((m - mags[i % n]).abs() < 1e-9, "spectrum differs between fixed points");
    }
}

#[test]
fn report_flags_tampering_and_missing_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config("gru");
    train_and_analyze(&cfg, dir.path()).unwrap();
    let a = dir.path().join("analysis");
    let clean = cmd_report(&a).unwrap();
    assert!(clean.warnings.is_empty(), "{:?}", clean.warnings);
    let summary = fs::read_to_string(a.join(SUMMARY_FILE)).unwrap();
    for s in FIGURE_TABLES {
        assert!(summary.contains(&format!("| {} |", s.name)), "{} not in summary", s.name);
    }

    let null = a.join("overlap_null.tsv");
    let text = fs::read_to_string(&null).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(3);
    fs::write(&null, lines.join("\n") + "\n").unwrap();
    let tampered = cmd_report(&a).unwrap();
    assert!(tampered.warnings.iter().any(|w| w.starts_with("overlap_null.tsv")), "{:?}", tampered.warnings);

    fs::remove_file(a.join("overlaps.tsv")).unwrap();
    match cmd_report(&a) {
        Err(CliError::Data(m)) => assert!(m.contains("overlaps"), "{m}"),
        other => panic!("expected missing-table error, got {other:?}"),
    }
}

#[test]
fn baseline_writes_lexicon() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config("gru");
    let r = cmd_baseline(&cfg, dir.path()).unwrap();
    let lex = RawTable::parse(&fs::read_to_string(dir.path().join("lexicon.tsv")).unwrap());
    assert_eq!(lex.rows.len(), 9);
    for row in &lex.rows {
        let expect = match &row[0][..3] {
            "pos" => "positive",
            "neg" => "negative",
            _ => "neutral",
        };
        assert_eq!(row[1], expect, "{row:?}");
    }
    assert!(r.test_accuracy > 0.8);
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sentidyn")).args(args).env("RUST_LOG", "error").output().unwrap()
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let bad = d.join("bad.toml");
    fs::write(&bad, "[model]\nhidden = 3\n").unwrap();
    let o = run_cli(&["train", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    let missing = d.join("missing.toml");
    fs::write(&missing, "[data]\nsource = \"files\"\ntrain = \"/nope/a.tsv\"\nvalidation = \"/nope/b.tsv\"\ntest = \"/nope/c.tsv\"\n").unwrap();
    let o = run_cli(&["baseline", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    // threshold 0 admits nothing: degenerate analysis with partial artifacts
    let mut cfg = small_config("gru");
    cfg.fixed_points.threshold = 0.0;
    cfg.fixed_points.max_iterations = 50;
    let cfg_path = d.join("degenerate.toml");
    fs::write(&cfg_path, cfg.to_toml()).unwrap();
    let out = d.join("run");
    let out_s = out.to_str().unwrap();
    let o = run_cli(&["train", "--config", cfg_path.to_str().unwrap(), "--out", out_s]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run_cli(&["analyze", "--config", cfg_path.to_str().unwrap(), "--out", out_s]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    let a = out.join("analysis");
    assert!(a.join("fixed_point_candidates.tsv").exists());
    assert!(a.join("pca_variance.tsv").exists());
    assert!(a.join("manifest.tsv").exists());
    let o = run_cli(&["report", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let o = run_cli(&["analyze", "--out", out_s, "--checkpoint", d.join("none.sdyn").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn analyze_rejects_a_checkpoint_of_another_architecture() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config("gru");
    let mut train_cfg = cfg.clone();
    train_cfg.train.epochs = 0;
    cmd_train(&train_cfg, dir.path()).unwrap();
    let lstm = small_config("lstm");
    let e = cmd_analyze(&lstm, &dir.path().join(CHECKPOINT_FILE), &dir.path().join("a")).unwrap_err();
    assert!(matches!(e, CliError::Checkpoint(_)), "{e}");
    assert_eq!(e.exit_code(), 3);
}
