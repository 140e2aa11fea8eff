//! The subcommands: dataset generation, training, the bag-of-words baseline,
//! the dynamical analysis and the summary report.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use sentidyn::fixedpoints::{find_fixed_points, simulate_autonomous, CandidateStatus};
use sentidyn::linearize::{
    input_projection_summary, linearize_all, linearized_trajectory_accuracy, median, multi_step_errors,
    single_step_errors, InputProjectionSummary, LinearizedSystem,
};
use sentidyn::manifold::{
    dimensionality_comparison, fit_manifold, overlap_report, principal_axis, project_states, quantile, OverlapReport,
};
use sentidyn::numerics::{dot, norm2, PcaFit};
use sentidyn::training::{
    evaluate_accuracy, read_labeled_text, sample_hidden_states, split_by_fraction, synthetic_dataset, synthetic_texts,
    train_bow_baseline, train_classifier, write_labeled_text, BowResult, ClassifierModel, Dataset, Document,
    TrainingLog,
};
use sentidyn::Error as CoreError;

use crate::checkpoint::Checkpoint;
use crate::config::{DataSource, PipelineConfig};
use crate::error::{CliError, Result};
use crate::svg;
use crate::tables::{self, Table, Value, ACCEPTANCE};

pub const CHECKPOINT_FILE: &str = "model.sdyn";
pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const SUMMARY_FILE: &str = "summary.md";
pub const CONFIG_FILE: &str = "config.toml";

/// States plotted in `state_projections` come from this many documents.
const PROJECTED_DOCUMENTS: usize = 20;
/// Normalized speed below which an autonomous trajectory counts as settled.
const VELOCITY_TOLERANCE: f64 = 1e-3;
const SLOW_BAND: (f64, f64) = (0.95, 1.005);

fn data_err(e: CoreError) -> CliError {
    match e {
        CoreError::Io { .. } | CoreError::Parse { .. } | CoreError::InsufficientData(_) | CoreError::InvalidArgument(_) => {
            CliError::Data(e.to_string())
        }
        other => CliError::Core(other),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn load_dataset(cfg: &PipelineConfig) -> Result<Dataset> {
    let ds = match cfg.data.source {
        DataSource::Synthetic => {
            let s = &cfg.data.synthetic;
            synthetic_dataset(&cfg.synthetic_spec(), s.validation_fraction, s.test_fraction).map_err(data_err)?
        }
        DataSource::Files => {
            let read = |p: &Option<PathBuf>| -> Result<_> {
                let p = p.as_ref().ok_or_else(|| CliError::Config("data file path missing".into()))?;
                read_labeled_text(p).map_err(data_err)
            };
            let (train, val, test) = (read(&cfg.data.train)?, read(&cfg.data.validation)?, read(&cfg.data.test)?);
            Dataset::from_texts(&train, &val, &test, cfg.data.max_vocab).map_err(data_err)?
        }
    };
    ds.validate().map_err(data_err)?;
    Ok(ds)
}

/// Writes the synthetic corpus as `train.tsv`, `validation.tsv` and `test.tsv`.
pub fn cmd_synth(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    create_dir(out)?;
    let s = &cfg.data.synthetic;
    let texts = synthetic_texts(&cfg.synthetic_spec()).map_err(data_err)?;
    let (train, val, test) =
        split_by_fraction(&texts, s.validation_fraction, s.test_fraction, cfg.seed ^ 0x5eed).map_err(data_err)?;
    for (name, docs) in [("train", &train), ("validation", &val), ("test", &test)] {
        write_labeled_text(&out.join(format!("{name}.tsv")), docs).map_err(data_err)?;
    }
    info!("wrote {} / {} / {} documents to {}", train.len(), val.len(), test.len(), out.display());
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: TrainingLog,
    pub bow_test_accuracy: f64,
    pub checkpoint: PathBuf,
}

fn metrics_table(log: &TrainingLog, bow: &BowResult) -> String {
    let mut s = String::from("kind\tepoch\ttrain_loss\ttrain_accuracy\tvalidation_accuracy\ttest_accuracy\n");
    for e in &log.epochs {
        s.push_str(&format!(
            "epoch\t{}\t{}\t{}\t{}\tNA\n",
            e.epoch, e.train_loss, e.train_accuracy, e.validation_accuracy
        ));
    }
    let b = log.best();
    s.push_str(&format!(
        "test\t{}\t{}\t{}\t{}\t{}\n",
        b.epoch, b.train_loss, b.train_accuracy, b.validation_accuracy, log.test_accuracy
    ));
    s.push_str(&format!(
        "bag_of_words\tNA\tNA\t{}\t{}\t{}\n",
        bow.train_accuracy, bow.validation_accuracy, bow.test_accuracy
    ));
    s
}

/// Trains the classifier, keeps the best-validation epoch and writes the
/// checkpoint, `metrics.tsv` and a copy of the configuration.
pub fn cmd_train(cfg: &PipelineConfig, out: &Path) -> Result<TrainOutcome> {
    create_dir(out)?;
    let ds = load_dataset(cfg)?;
    let tc = cfg.train_config()?;
    info!("training {} (N = {}) for {} epochs on {} documents", tc.architecture, tc.hidden_size, tc.epochs, ds.train.len());
    let (model, log) = train_classifier(&ds, &tc)?;
    info!("best epoch {} with test accuracy {}", log.best_epoch, log.test_accuracy);
    let bow = train_bow_baseline(&ds, cfg.analysis.bow_l2, cfg.analysis.lexicon_size, cfg.analysis.bow_max_iterations)?;
    let ck = Checkpoint::new(model, ds.vocab.clone())?;
    let path = out.join(CHECKPOINT_FILE);
    ck.save(&path)?;
    write_file(&out.join("metrics.tsv"), metrics_table(&log, &bow))?;
    write_file(&out.join(CONFIG_FILE), cfg.to_toml())?;
    Ok(TrainOutcome {
        log,
        bow_test_accuracy: bow.test_accuracy,
        checkpoint: path,
    })
}

/// Fits the bag-of-words baseline and writes its accuracies and the valence lexicon.
pub fn cmd_baseline(cfg: &PipelineConfig, out: &Path) -> Result<BowResult> {
    create_dir(out)?;
    let ds = load_dataset(cfg)?;
    let bow = train_bow_baseline(&ds, cfg.analysis.bow_l2, cfg.analysis.lexicon_size, cfg.analysis.bow_max_iterations)?;
    write_file(&out.join("lexicon.tsv"), lexicon_table(&ds, &bow))?;
    let acc = format!(
        "split\taccuracy\ntrain\t{}\nvalidation\t{}\ntest\t{}\n",
        bow.train_accuracy, bow.validation_accuracy, bow.test_accuracy
    );
    write_file(&out.join("baseline.tsv"), acc)?;
    if !bow.report.converged {
        warn!("L-BFGS stopped after {} iterations (gradient norm {})", bow.report.iterations, bow.report.gradient_norm);
    }
    Ok(bow)
}

fn lexicon_table(ds: &Dataset, bow: &BowResult) -> String {
    let lx = &bow.lexicon;
    let mut s = String::from("word\tvalence\tcoefficient\n");
    for (name, set) in [("positive", &lx.positive), ("negative", &lx.negative), ("neutral", &lx.neutral)] {
        for &t in set.iter() {
            s.push_str(&format!("{}\t{name}\t{}\n", ds.vocab.token(t), lx.coefficient(t)));
        }
    }
    s
}

/// One pipeline property and whether it held.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub criterion: &'static str,
    pub description: &'static str,
    pub value: Option<f64>,
    pub threshold: &'static str,
    pub pass: bool,
}

impl Check {
    fn new(criterion: &'static str, description: &'static str, value: Option<f64>, threshold: &'static str, pass: impl Fn(f64) -> bool) -> Self {
        Self {
            criterion,
            description,
            value,
            threshold,
            pass: value.is_some_and(|v| !v.is_nan() && pass(v)),
        }
    }
}

/// Headline numbers of an analysis run.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSummary {
    pub n_candidates: usize,
    pub n_accepted: usize,
    pub fixed_point_top_component: Option<f64>,
    pub fixed_point_retained: Option<f64>,
    pub hidden_top3: f64,
    pub untrained_top3: f64,
    pub slow_band_fraction: Option<f64>,
    pub overlap_median: Option<f64>,
    pub null_p99: Option<f64>,
    pub null_max: Option<f64>,
    pub sign_separated_fraction: Option<f64>,
    pub theta_method: String,
    pub theta_concordance: Option<f64>,
    pub single_step_median: Option<f64>,
    pub n_single_steps: usize,
    pub multi_step_median: Option<f64>,
    pub model_accuracy: f64,
    pub linearized_accuracy: Option<f64>,
    pub velocity_fraction: f64,
    pub checks: Vec<Check>,
}

impl AnalysisSummary {
    pub fn check(&self, criterion: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.criterion == criterion)
    }
}

fn top_modes(s: &LinearizedSystem, k: usize) -> Vec<Value> {
    (0..k).map(|i| s.time_constants.get(i).copied().into()).collect()
}

fn pc3(pca: &PcaFit, h: &[f64]) -> Vec<Value> {
    let k = pca.n_components().min(3);
    let mut v: Vec<Value> = pca.transform(h, k).into_iter().map(Value::from).collect();
    v.resize(3, Value::Missing);
    v
}

/// Coordinate along the fixed-point set used when LLE is unavailable:
/// projection on `m`, min-max scaled to `[−1, 1]`.
fn axis_coordinate(points: &[Vec<f64>], m: &[f64]) -> Vec<f64> {
    let p: Vec<f64> = points.iter().map(|h| dot(h, m)).collect();
    let (lo, hi) = p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi > lo {
        p.iter().map(|v| 2.0 * (v - lo) / (hi - lo) - 1.0).collect()
    } else {
        vec![0.0; p.len()]
    }
}

struct Artifacts<'a> {
    dir: &'a Path,
    svg: bool,
    written: Vec<String>,
}

impl Artifacts<'_> {
    fn table(&mut self, t: &Table) -> Result<()> {
        t.write(self.dir)?;
        self.written.push(tables::file_name(t.schema.name));
        if self.svg {
            if let Some(doc) = svg::render(t) {
                let name = format!("{}.svg", t.schema.name);
                write_file(&self.dir.join(&name), doc)?;
                self.written.push(name);
            }
        }
        Ok(())
    }
}

/// Runs the full analysis of a checkpoint and writes one table per figure,
/// the acceptance manifest and the file manifest. The checkpoint is read from
/// disk; the in-memory training result is never used.
pub fn cmd_analyze(cfg: &PipelineConfig, checkpoint: &Path, out: &Path) -> Result<AnalysisSummary> {
    create_dir(out)?;
    let arch = cfg.architecture()?;
    let ck = Checkpoint::load(checkpoint, Some(arch))?;
    let ds = load_dataset(cfg)?;
    if ck.vocab.tokens() != ds.vocab.tokens() {
        return Err(CliError::Data("checkpoint vocabulary does not match the configured dataset".into()));
    }
    let model = ck.model;
    write_file(&out.join(CONFIG_FILE), cfg.to_toml())?;
    let mut art = Artifacts {
        dir: out,
        svg: cfg.analysis.svg,
        written: vec![CONFIG_FILE.to_string()],
    };
    let result = analyze(cfg, &model, &ds, &mut art);
    write_manifest(out, &art.written)?;
    result
}

fn analyze(cfg: &PipelineConfig, model: &ClassifierModel, ds: &Dataset, art: &mut Artifacts) -> Result<AnalysisSummary> {
    let a = &cfg.analysis;
    let docs: &[Document] = &ds.test[..a.n_documents.min(ds.test.len())];

    // hidden-state dimensionality against the untrained initialization
    let untrained = ClassifierModel::init(
        model.architecture(),
        model.vocab_size(),
        model.cell.hidden_size(),
        model.cell.input_size(),
        &mut ChaCha8Rng::seed_from_u64(cfg.seed),
    );
    let dc = dimensionality_comparison(model, &untrained, docs).map_err(data_err)?;
    let (tc, uc) = (dc.trained_curve(), dc.untrained_curve());
    let mut t = Table::new(tables::PCA_VARIANCE);
    for i in 0..tc.len() {
        t.push(vec![
            (i + 1).into(),
            dc.trained.explained_variance_ratio[i].into(),
            tc[i].into(),
            dc.untrained.explained_variance_ratio[i].into(),
            uc[i].into(),
        ]);
    }
    art.table(&t)?;
    let top3 = |c: &[f64]| c.get(2).or(c.last()).copied().unwrap_or(0.0);
    let hidden_pca = &dc.trained;

    let mut t = Table::new(tables::STATE_PROJECTIONS);
    let k = hidden_pca.n_components().min(3);
    for (di, d) in docs.iter().take(PROJECTED_DOCUMENTS).enumerate() {
        let traj = model.trajectory(&d.tokens)?;
        let proj = project_states(hidden_pca, &traj[1..], k, &model.readout, &model.initial_state())?;
        for (step, p) in proj.states.iter().enumerate() {
            let mut row = vec![Value::from("state"), di.into(), step.into(), d.label.into()];
            row.extend(pc3_from(p));
            t.push(row);
        }
        if di == 0 {
            let mut row = vec![Value::from("readout"), Value::Missing, Value::Missing, Value::Missing];
            row.extend(pc3_from(&proj.readout));
            t.push(row);
            let mut row = vec![Value::from("initial"), Value::Missing, Value::Missing, Value::Missing];
            row.extend(pc3_from(&proj.initial));
            t.push(row);
        }
    }
    art.table(&t)?;

    // fixed points
    let fp_cfg = cfg.fixed_point_config();
    let starts = sample_hidden_states(model, docs, cfg.fixed_points.n_initial, cfg.seed).map_err(data_err)?;
    let search = find_fixed_points(&model.cell, &starts, &fp_cfg)?;
    let mut t = Table::new(tables::FIXED_POINT_CANDIDATES);
    for c in &search.candidates {
        let status = match c.status {
            CandidateStatus::Accepted => "accepted",
            CandidateStatus::AboveThreshold => "above_threshold",
            CandidateStatus::NonFinite => "non_finite",
        };
        t.push(vec![c.initial_state_id.into(), c.q_value.into(), c.n_iterations.into(), status.into()]);
    }
    art.table(&t)?;
    info!("{} of {} candidates accepted", search.accepted.len(), search.candidates.len());

    let velocity_ok = starts
        .iter()
        .map(|h| simulate_autonomous(&model.cell, h, a.velocity_steps).map(|v| v.iter().any(|&x| x < VELOCITY_TOLERANCE)))
        .collect::<sentidyn::Result<Vec<bool>>>()?;
    let velocity_fraction = velocity_ok.iter().filter(|&&b| b).count() as f64 / starts.len() as f64;
    let model_accuracy = evaluate_accuracy(model, docs)?;

    let points: Vec<Vec<f64>> = search.accepted.iter().map(|f| f.h_star.clone()).collect();
    let mut summary = AnalysisSummary {
        n_candidates: search.candidates.len(),
        n_accepted: points.len(),
        fixed_point_top_component: None,
        fixed_point_retained: None,
        hidden_top3: top3(&tc),
        untrained_top3: top3(&uc),
        slow_band_fraction: None,
        overlap_median: None,
        null_p99: None,
        null_max: None,
        sign_separated_fraction: None,
        theta_method: "none".into(),
        theta_concordance: None,
        single_step_median: None,
        n_single_steps: 0,
        multi_step_median: None,
        model_accuracy,
        linearized_accuracy: None,
        velocity_fraction,
        checks: Vec::new(),
    };
    if points.is_empty() {
        // keep the directory layout uniform: every figure table exists, empty here
        for schema in tables::FIGURE_TABLES {
            if !art.written.contains(&tables::file_name(schema.name)) {
                art.table(&Table::new(schema))?;
            }
        }
        summary.checks = checks(&summary);
        write_acceptance(art, &summary.checks)?;
        return Err(CliError::Degenerate(format!(
            "none of {} candidates reached q < {}",
            search.candidates.len(),
            fp_cfg.threshold
        )));
    }

    // manifold: m from PCA of the fixed points, θ from LLE when the neighbour graph allows
    let axis = if points.len() >= 2 { Some(principal_axis(&points, &model.readout)?) } else { None };
    let m: Option<Vec<f64>> = axis.as_ref().map(|(_, m)| m.clone());
    summary.fixed_point_top_component = axis.as_ref().map(|(p, _)| p.explained_variance_ratio[0]);
    summary.fixed_point_retained = (points.len() >= 2).then(|| hidden_pca.variance_retained(&points, hidden_pca.n_components().min(3)));
    let theta: Option<Vec<f64>> = match fit_manifold(&points, &model.readout, &cfg.lle_config()) {
        Ok(fit) => {
            summary.theta_method = format!("lle(k={})", fit.config.k_neighbors);
            summary.theta_concordance = Some(fit.concordance(&points));
            Some(fit.theta)
        }
        Err(e @ (CoreError::DisconnectedGraph { .. } | CoreError::InsufficientData(_))) => {
            warn!("no LLE coordinate: {e}");
            summary.theta_method = format!("unavailable: {e}");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let theta_of = |i: usize| theta.as_ref().map(|t| t[i]);

    let mut t = Table::new(tables::FIXED_POINTS);
    for (i, fp) in search.accepted.iter().enumerate() {
        let mut row = vec![
            i.into(),
            fp.initial_state_id.into(),
            fp.q_value.into(),
            fp.n_iterations.into(),
            theta_of(i).into(),
            model.logit_of_state(&fp.h_star).into(),
        ];
        row.extend(pc3(hidden_pca, &fp.h_star));
        t.push(row);
    }
    art.table(&t)?;

    // linearization and spectra
    let systems = linearize_all(&model.cell, &model.readout, &points)?;
    let mut spectra = Table::new(tables::EIGEN_SPECTRA);
    let mut taus = Table::new(tables::TIME_CONSTANTS);
    for s in &systems {
        for (mode, (l, tau)) in s.eigenvalues.iter().zip(&s.time_constants).enumerate() {
            spectra.push(vec![s.fixed_point.into(), mode.into(), l.re.into(), l.im.into(), l.norm().into(), (*tau).into()]);
        }
        let mut row = vec![s.fixed_point.into(), theta_of(s.fixed_point).into()];
        row.extend(top_modes(s, 3));
        row.push(s.is_defective().into());
        taus.push(row);
    }
    art.table(&spectra)?;
    art.table(&taus)?;
    let in_band = systems
        .iter()
        .filter(|s| (SLOW_BAND.0..=SLOW_BAND.1).contains(&s.spectral_radius()))
        .count();
    summary.slow_band_fraction = Some(in_band as f64 / systems.len() as f64);

    // input projections by valence
    let bow = train_bow_baseline(ds, a.bow_l2, a.lexicon_size, a.bow_max_iterations)?;
    let lexicon = &bow.lexicon;
    let summaries: Vec<Option<InputProjectionSummary>> = systems
        .iter()
        .map(|s| if s.is_defective() { Ok(None) } else { input_projection_summary(s, model, lexicon).map(Some) })
        .collect::<sentidyn::Result<_>>()?;
    let mut t = Table::new(tables::INPUT_PROJECTIONS);
    let mut separated = 0usize;
    for (s, sm) in systems.iter().zip(&summaries) {
        let row = match sm {
            Some(p) => {
                separated += usize::from(p.is_sign_separated());
                vec![
                    s.fixed_point.into(),
                    theta_of(s.fixed_point).into(),
                    p.positive_mean.into(),
                    p.negative_mean.into(),
                    p.neutral_mean.into(),
                    p.is_sign_separated().into(),
                    p.leading_complex.into(),
                ]
            }
            None => vec![
                s.fixed_point.into(),
                theta_of(s.fixed_point).into(),
                Value::Missing,
                Value::Missing,
                Value::Missing,
                false.into(),
                s.leading_is_complex().into(),
            ],
        };
        t.push(row);
    }
    art.table(&t)?;
    summary.sign_separated_fraction = Some(separated as f64 / systems.len() as f64);

    // representative fixed point: θ nearest 0 (or the middle of the m-axis)
    let coord: Vec<f64> = match (&theta, &m) {
        (Some(th), _) => th.clone(),
        (None, Some(m)) => axis_coordinate(&points, m),
        (None, None) => vec![0.0; points.len()],
    };
    let rep = (0..systems.len())
        .filter(|&i| !systems[i].is_defective())
        .min_by(|&i, &j| coord[i].abs().total_cmp(&coord[j].abs()).then(i.cmp(&j)));
    let mut t = Table::new(tables::INPUT_EFFECTS);
    if let Some(r) = rep {
        let s = &systems[r];
        for (name, set) in [("positive", &lexicon.positive), ("negative", &lexicon.negative), ("neutral", &lexicon.neutral)] {
            for &w in set.iter() {
                let x = model.embed(w);
                let p = s.input_projection(x)?;
                t.push(vec![
                    s.fixed_point.into(),
                    ds.vocab.token(w).into(),
                    name.into(),
                    lexicon.coefficient(w).into(),
                    p.value.into(),
                    norm2(&s.input_effect(x)?).into(),
                ]);
            }
        }
    }
    art.table(&t)?;

    // overlaps of the slow mode with m
    let mut ot = Table::new(tables::OVERLAPS);
    let mut nt = Table::new(tables::OVERLAP_NULL);
    if let Some(m) = &m {
        let rep: OverlapReport = overlap_report(&systems, m, a.n_null, cfg.seed)?;
        for o in &rep.overlaps {
            ot.push(vec![o.fixed_point.into(), theta_of(o.fixed_point).into(), o.value.into(), o.complex.into()]);
        }
        for (i, v) in rep.null.iter().enumerate() {
            nt.push(vec![i.into(), (*v).into()]);
        }
        if !rep.overlaps.is_empty() {
            summary.overlap_median = Some(rep.median_abs_overlap());
        }
        if !rep.null.is_empty() {
            summary.null_p99 = Some(rep.null_quantile(0.99));
            summary.null_max = Some(rep.null_quantile(1.0));
        }
    }
    art.table(&ot)?;
    art.table(&nt)?;

    // linearization error
    let single = single_step_errors(model, &systems, docs, a.max_error_steps)?;
    let multi = multi_step_errors(model, &systems, docs)?;
    let mut t = Table::new(tables::LINEARIZATION_ERROR);
    for e in &single {
        t.push(vec!["single".into(), e.document.into(), e.step.into(), e.system.into(), e.relative_error.into()]);
    }
    for (d, e) in multi.iter().enumerate() {
        t.push(vec!["document".into(), d.into(), docs[d].tokens.len().into(), Value::Missing, (*e).into()]);
    }
    art.table(&t)?;
    let single_err: Vec<f64> = single.iter().map(|e| e.relative_error).collect();
    summary.n_single_steps = single_err.len();
    summary.single_step_median = (!single_err.is_empty()).then(|| median(&single_err));
    summary.multi_step_median = (!multi.is_empty()).then(|| median(&multi));
    summary.linearized_accuracy = Some(linearized_trajectory_accuracy(model, &systems, docs)?);

    summary.checks = checks(&summary);
    write_acceptance(art, &summary.checks)?;
    Ok(summary)
}

fn pc3_from(p: &[f64]) -> Vec<Value> {
    let mut v: Vec<Value> = p.iter().copied().map(Value::from).collect();
    v.resize(3, Value::Missing);
    v
}

fn checks(s: &AnalysisSummary) -> Vec<Check> {
    let frac = (s.n_candidates > 0).then(|| s.n_accepted as f64 / s.n_candidates as f64);
    let multi_over_single = match (s.multi_step_median, s.single_step_median) {
        (Some(m), Some(si)) => Some(m - si),
        _ => None,
    };
    let lin_gap = s.linearized_accuracy.map(|l| s.model_accuracy - l);
    vec![
        Check::new("4a", "fraction of candidates with q below threshold", frac, ">= 0.5", |v| v >= 0.5),
        Check::new("4b", "variance of fixed points on their top component", s.fixed_point_top_component, ">= 0.7", |v| v >= 0.7),
        Check::new("4b", "fixed-point variance retained by top-3 hidden-state components", s.fixed_point_retained, ">= 0.9", |v| v >= 0.9),
        Check::new("4c", "fraction of fixed points with |lambda_1| in [0.95, 1.005]", s.slow_band_fraction, ">= 0.9", |v| v >= 0.9),
        Check::new("4d", "median |r1 . m|", s.overlap_median, ">= 0.8", |v| v >= 0.8),
        Check::new("4d", "99th percentile of null |u . m|", s.null_p99, "< 0.3", |v| v < 0.3),
        Check::new("4e", "fraction of fixed points with sign-separated input projections", s.sign_separated_fraction, ">= 0.9", |v| v >= 0.9),
        Check::new("5", "median single-step relative error", s.single_step_median, "< 0.2", |v| v < 0.2),
        Check::new("5", "median document error minus median single-step error", multi_over_single, "> 0", |v| v > 0.0),
        Check::new("6", "nonlinear minus linearized accuracy", lin_gap, "> 0", |v| v > 0.0),
        Check::new("7", "fraction of starts settling below 1e-3 normalized velocity", Some(s.velocity_fraction), ">= 0.9", |v| v >= 0.9),
        Check::new("dim", "hidden-state variance on top 3 components", Some(s.hidden_top3), ">= 0.8", |v| v >= 0.8),
        Check::new("dim", "trained minus untrained top-3 variance", Some(s.hidden_top3 - s.untrained_top3), "> 0", |v| v > 0.0),
        Check::new("theta", "theta/m ordering concordance of adjacent pairs", s.theta_concordance, ">= 0.95", |v| v >= 0.95),
    ]
}

fn write_acceptance(art: &mut Artifacts, checks: &[Check]) -> Result<()> {
    let mut t = Table::new(ACCEPTANCE);
    for c in checks {
        t.push(vec![c.criterion.into(), c.description.into(), c.value.into(), c.threshold.into(), c.pass.into()]);
    }
    t.write(art.dir)?;
    art.written.push(tables::file_name(ACCEPTANCE.name));
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Data rows of a written file: lines minus the header for tables, plain
/// lines otherwise.
fn row_count(name: &str, bytes: &[u8]) -> usize {
    let lines = bytes.iter().filter(|&&b| b == b'\n').count();
    if name.ends_with(".tsv") {
        lines.saturating_sub(1)
    } else {
        lines
    }
}

fn write_manifest(dir: &Path, files: &[String]) -> Result<()> {
    let mut names = files.to_vec();
    names.sort();
    names.dedup();
    let mut s = String::from("file\trows\tsha256\n");
    for n in &names {
        let p = dir.join(n);
        let bytes = fs::read(&p).map_err(|e| CliError::io(&p, e))?;
        s.push_str(&format!("{n}\t{}\t{}\n", row_count(n, &bytes), sha256_hex(&bytes)));
    }
    write_file(&dir.join(MANIFEST_FILE), s)
}

/// Findings of `report` about an artifact directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportOutcome {
    pub missing: Vec<String>,
    pub warnings: Vec<String>,
}

/// Verifies an analysis directory against its manifest and the table
/// schemas and writes `summary.md`. Missing figure tables are an error;
/// integrity and schema problems are reported as warnings.
pub fn cmd_report(dir: &Path) -> Result<ReportOutcome> {
    let mut outcome = ReportOutcome::default();
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = match fs::read_to_string(&manifest_path) {
        Ok(text) => Some(tables::RawTable::parse(&text)),
        Err(_) => {
            outcome.warnings.push(format!("{MANIFEST_FILE} is missing; integrity not checked"));
            None
        }
    };
    if let Some(m) = &manifest {
        for row in &m.rows {
            let [name, rows, hash] = row.as_slice() else {
                outcome.warnings.push(format!("malformed manifest line: {}", row.join("\t")));
                continue;
            };
            match fs::read(dir.join(name)) {
                Ok(bytes) => {
                    let n = row_count(name, &bytes);
                    if rows.parse::<usize>().ok() != Some(n) {
                        outcome.warnings.push(format!("{name}: has {n} rows, manifest records {rows}"));
                    }
                    if sha256_hex(&bytes) != *hash {
                        outcome.warnings.push(format!("{name}: checksum differs from manifest"));
                    }
                }
                Err(_) => outcome.warnings.push(format!("{name}: listed in manifest but missing")),
            }
        }
    }
    let mut texts = Vec::new();
    for s in tables::FIGURE_TABLES {
        let p = dir.join(tables::file_name(s.name));
        match fs::read_to_string(&p) {
            Ok(text) => {
                outcome.warnings.extend(tables::validate(&s, &text));
                texts.push((s, Some(tables::RawTable::parse(&text))));
            }
            Err(_) => {
                outcome.missing.push(s.name.to_string());
                texts.push((s, None));
            }
        }
    }
    let acceptance = fs::read_to_string(dir.join(tables::file_name(ACCEPTANCE.name))).ok();
    if let Some(a) = &acceptance {
        outcome.warnings.extend(tables::validate(&ACCEPTANCE, a));
    }
    for w in &outcome.warnings {
        warn!("{w}");
    }
    write_file(&dir.join(SUMMARY_FILE), summary_markdown(&texts, acceptance.as_deref(), &outcome))?;
    if !outcome.missing.is_empty() {
        return Err(CliError::Data(format!("missing tables: {}", outcome.missing.join(", "))));
    }
    Ok(outcome)
}

fn stat_line(raw: &tables::RawTable, column: &str) -> String {
    let v = raw.floats(column);
    let finite: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if finite.is_empty() {
        return format!("`{column}`: no values");
    }
    format!(
        "`{column}`: median {:.4}, 5% {:.4}, 95% {:.4}",
        median(&finite),
        quantile(&finite, 0.05),
        quantile(&finite, 0.95)
    )
}

fn summary_markdown(tables_read: &[(tables::Schema, Option<tables::RawTable>)], acceptance: Option<&str>, outcome: &ReportOutcome) -> String {
    let mut s = String::from("# Analysis summary\n\n");
    s.push_str("| figure | table | rows | key statistic |\n|---|---|---|---|\n");
    for (schema, raw) in tables_read {
        let (rows, stat) = match raw {
            None => ("missing".to_string(), String::new()),
            Some(r) => {
                let key = match schema.name {
                    "pca_variance" => "trained_cumulative",
                    "state_projections" => "pc1",
                    "fixed_points" => "q",
                    "eigen_spectra" => "magnitude",
                    "time_constants" => "tau1",
                    "input_effects" => "projection",
                    "input_projections" => "positive_mean",
                    "overlaps" | "overlap_null" => "overlap",
                    _ => "relative_error",
                };
                (r.rows.len().to_string(), stat_line(r, key))
            }
        };
        s.push_str(&format!("| {} | {} | {} | {} |\n", schema.figure, schema.name, rows, stat));
    }
    s.push_str("\n## Acceptance\n\n");
    match acceptance {
        Some(text) => {
            let raw = tables::RawTable::parse(text);
            s.push_str("| criterion | property | value | threshold | result |\n|---|---|---|---|---|\n");
            for r in &raw.rows {
                if r.len() == 5 {
                    let result = if r[4] == "true" { "PASS" } else { "FAIL" };
                    s.push_str(&format!("| {} | {} | {} | {} | {} |\n", r[0], r[1], r[2], r[3], result));
                }
            }
        }
        None => s.push_str("acceptance.tsv is missing.\n"),
    }
    s.push_str("\n## Integrity\n\n");
    if outcome.missing.is_empty() && outcome.warnings.is_empty() {
        s.push_str("All tables present; checksums, row counts and schemas match.\n");
    }
    for m in &outcome.missing {
        s.push_str(&format!("- missing table: {m}\n"));
    }
    for w in &outcome.warnings {
        s.push_str(&format!("- warning: {w}\n"));
    }
    s
}
