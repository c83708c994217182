//! The `riemann-erp` command line: one binary, one subcommand per stage.
//!
//! Exit codes: 0 success, 2 malformed input, 3 missing class, 4 dimension
//! mismatch, 5 unknown protocol, 6 invalid configuration, 1 anything else.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Arg, ArgMatches, Args, FromArgMatches, Parser, Subcommand};

use crate::classifier::{label_for_score, train_with_report, MdmModel, FLASHES_PER_REPETITION};
use crate::config::{RunConfig, KEYS, SEED_ENV};
use crate::erp_cov::{Label, Trial};
use crate::error::{Error, Result};
use crate::eval::{
    adaptive_replay, auc, batch_blended_model, cross_subject_eval, generate_recording, generate_session,
    learning_curve, robustness_sweep, score_trials, symmetric_grid, CurvePoint, EvaluationReport, SweepKind,
};
use crate::preprocess::{condition, epoch, epoch_length, ContinuousRecording};
use crate::storage::{read_recording, write_recording, EpochArchive, ModelFile};

/// Names accepted by `evaluate --protocol`.
pub const PROTOCOLS: &[&str] = &["auc", "learning-curve", "latency-sweep", "jitter-sweep", "cross-subject"];

#[derive(Debug, Parser)]
#[command(name = "riemann-erp", version, about = "Riemannian minimum-distance classification of event-related potentials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Filter, decimate and epoch a continuous recording into an epoch archive.
    Preprocess {
        /// Continuous recording (one-record epoch archive).
        #[arg(long, value_name = "FILE")]
        recording: PathBuf,
        /// Trigger list, one `<sample index> <label>` per line.
        #[arg(long, value_name = "FILE")]
        triggers: PathBuf,
        /// Output epoch archive.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train a model from a labeled epoch archive.
    Train {
        /// Training epoch archive with both classes.
        #[arg(long, value_name = "FILE")]
        archive: PathBuf,
        /// Output model file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Print one `trial_id score predicted` line per trial.
    Score {
        /// Model file.
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Epoch archive to score.
        #[arg(long, value_name = "FILE")]
        archive: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run an evaluation protocol and write its report as JSON lines.
    Evaluate {
        /// One of: auc, learning-curve, latency-sweep, jitter-sweep, cross-subject.
        #[arg(long, value_name = "NAME")]
        protocol: String,
        /// Epoch archive; repeat for learning-curve (train, test) or cross-subject (one per subject).
        #[arg(long = "archive", value_name = "FILE")]
        archives: Vec<PathBuf>,
        /// Model file (auc and the sweeps).
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// Continuous recording (sweeps).
        #[arg(long, value_name = "FILE")]
        recording: Option<PathBuf>,
        /// Trigger list of the recording (sweeps).
        #[arg(long, value_name = "FILE")]
        triggers: Option<PathBuf>,
        /// Report destination; standard output if omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Replay a session through an adapting model; write the per-block report and the final model.
    AdaptReplay {
        /// Generic model file.
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Session epoch archive in presentation order.
        #[arg(long, value_name = "FILE")]
        archive: PathBuf,
        /// Output file for the final adapted model.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Report destination; standard output if omitted.
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Generate a synthetic session as an epoch archive and/or a continuous recording.
    Synth {
        /// Output epoch archive.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Output continuous recording (requires --triggers).
        #[arg(long, value_name = "FILE", requires = "triggers")]
        recording: Option<PathBuf>,
        /// Output trigger list for --recording.
        #[arg(long, value_name = "FILE", requires = "recording")]
        triggers: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

/// `--config FILE` plus one flag per configuration key.
#[derive(Debug, Clone, Default)]
pub struct ConfigArgs {
    pub file: Option<PathBuf>,
    pub overrides: Vec<(String, String)>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        RunConfig::load(self.file.as_deref(), &self.overrides, std::env::var(SEED_ENV).ok())
    }
}

impl FromArgMatches for ConfigArgs {
    fn from_arg_matches(m: &ArgMatches) -> Result<Self, clap::Error> {
        let mut out = ConfigArgs::default();
        out.update_from_arg_matches(m)?;
        Ok(out)
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> Result<(), clap::Error> {
        if let Some(p) = m.get_one::<PathBuf>("config") {
            self.file = Some(p.clone());
        }
        for k in KEYS {
            if let Some(v) = m.get_one::<String>(k.name) {
                self.overrides.push((k.name.to_string(), v.clone()));
            }
        }
        Ok(())
    }
}

impl Args for ConfigArgs {
    fn augment_args(cmd: clap::Command) -> clap::Command {
        let cmd = cmd.arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .help("Configuration file of `key = value` lines")
                .help_heading("Configuration"),
        );
        KEYS.iter().fold(cmd, |cmd, k| {
            let mut arg = Arg::new(k.name)
                .long(k.flag)
                .value_name("VALUE")
                .help(format!("{} [default: {}]", k.help, k.default))
                .help_heading("Configuration");
            if k.flag != k.name {
                arg = arg.alias(k.name);
            }
            cmd.arg(arg)
        })
    }

    fn augment_args_for_update(cmd: clap::Command) -> clap::Command {
        Self::augment_args(cmd)
    }
}

/// Runs one command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Cmd::Preprocess {
            recording,
            triggers,
            out: dest,
            cfg,
        } => cmd_preprocess(&recording, &triggers, &dest, &cfg.resolve()?, out),
        Cmd::Train { archive, out: dest, cfg } => cmd_train(&archive, &dest, &cfg.resolve()?, out),
        Cmd::Score { model, archive, cfg } => {
            cfg.resolve()?;
            cmd_score(&model, &archive, out)
        }
        Cmd::Evaluate {
            protocol,
            archives,
            model,
            recording,
            triggers,
            out: dest,
            cfg,
        } => {
            if !PROTOCOLS.contains(&protocol.as_str()) {
                return Err(Error::UnknownProtocol {
                    name: protocol,
                    valid: PROTOCOLS.join(", "),
                });
            }
            let inputs = EvalInputs {
                archives: &archives,
                model: model.as_deref(),
                recording: recording.as_deref(),
                triggers: triggers.as_deref(),
            };
            let report = cmd_evaluate(&protocol, &inputs, &cfg.resolve()?)?;
            emit_report(&report, dest.as_deref(), out)
        }
        Cmd::AdaptReplay {
            model,
            archive,
            out: dest,
            report,
            cfg,
        } => {
            let r = cmd_adapt_replay(&model, &archive, &dest, &cfg.resolve()?)?;
            emit_report(&r, report.as_deref(), out)
        }
        Cmd::Synth {
            out: dest,
            recording,
            triggers,
            cfg,
        } => cmd_synth(dest.as_deref(), recording.as_deref().zip(triggers.as_deref()), &cfg.resolve()?, out),
    }
}

fn counts(trials: &[Trial]) -> [usize; 3] {
    let n = |l| trials.iter().filter(|t| t.label == l).count();
    [n(Label::Target), n(Label::NonTarget), n(Label::Unknown)]
}

fn conditioned(recording: &Path, triggers: &Path, cfg: &RunConfig) -> Result<ContinuousRecording> {
    let rec = read_recording(recording, triggers)?;
    cfg.pipeline.filter.validate(rec.sample_rate())?;
    condition(&rec, &cfg.pipeline)
}

pub fn cmd_preprocess(recording: &Path, triggers: &Path, dest: &Path, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let rec = conditioned(recording, triggers, cfg)?;
    let n = epoch_length(cfg.pipeline.window_s, rec.sample_rate())?;
    let epochs = epoch(&rec, cfg.pipeline.window_s)?;
    let [t, nt, u] = counts(&epochs.trials);
    let archive = EpochArchive::new(rec.channels(), n, rec.sample_rate(), epochs.trials)?;
    archive.write(dest)?;
    writeln!(
        out,
        "{} trial(s) of {}x{} at {} Hz",
        archive.len(),
        archive.channels(),
        archive.samples(),
        archive.sample_rate()
    )?;
    writeln!(out, "target {t}, nontarget {nt}, unknown {u}, dropped triggers {}", epochs.skipped)?;
    Ok(())
}

pub fn cmd_train(archive: &Path, dest: &Path, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let archive = EpochArchive::read(archive)?;
    let est = cfg.estimator(archive.channels(), archive.samples());
    let (model, rep) = train_with_report(archive.trials(), &est, &cfg.mean)?;
    let file = ModelFile::new(model, cfg.schedule)
        .with_meta("target_trials", rep.target_trials)
        .with_meta("nontarget_trials", rep.nontarget_trials)
        .with_meta("target_iterations", rep.target_iterations)
        .with_meta("nontarget_iterations", rep.nontarget_iterations)
        .with_meta("trainer", concat!("riemann-erp ", env!("CARGO_PKG_VERSION")));
    file.write(dest)?;
    writeln!(out, "target: {} trial(s), mean converged in {} iteration(s)", rep.target_trials, rep.target_iterations)?;
    writeln!(
        out,
        "nontarget: {} trial(s), mean converged in {} iteration(s)",
        rep.nontarget_trials, rep.nontarget_iterations
    )?;
    writeln!(out, "shrinkage {}", est.shrinkage)?;
    Ok(())
}

fn check_shape(model: &MdmModel, archive: &EpochArchive) -> Result<()> {
    if (model.channels(), model.samples()) != (archive.channels(), archive.samples()) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} trials (model)", model.channels(), model.samples()),
            found: format!("{}x{} trials (archive)", archive.channels(), archive.samples()),
        });
    }
    Ok(())
}

pub fn cmd_score(model: &Path, archive: &Path, out: &mut dyn Write) -> Result<()> {
    let file = ModelFile::read(model)?;
    let archive = EpochArchive::read(archive)?;
    check_shape(&file.model, &archive)?;
    let scores = score_trials(&file.model, archive.trials())?;
    writeln!(out, "trial_id\tscore\tpredicted")?;
    for (t, s) in archive.trials().iter().zip(&scores) {
        writeln!(out, "{}\t{}\t{}", t.trial_id, s, label_for_score(*s))?;
    }
    Ok(())
}

pub struct EvalInputs<'a> {
    pub archives: &'a [PathBuf],
    pub model: Option<&'a Path>,
    pub recording: Option<&'a Path>,
    pub triggers: Option<&'a Path>,
}

fn required<'a>(p: Option<&'a Path>, flag: &str, protocol: &str) -> Result<&'a Path> {
    p.ok_or_else(|| Error::InvalidConfig(format!("protocol {protocol} needs --{flag}")))
}

/// First `round(fraction * reps)` repetitions for training, the rest for testing.
fn split_repetitions(trials: &[Trial], fraction: f64) -> Result<(Vec<Trial>, Vec<Trial>)> {
    let reps = trials.len() / FLASHES_PER_REPETITION;
    if reps < 2 {
        return Err(Error::InvalidConfig(format!(
            "splitting needs at least 2 repetitions of {FLASHES_PER_REPETITION} trials, archive has {}",
            trials.len()
        )));
    }
    let n_train = ((fraction * reps as f64).round() as usize).clamp(1, reps - 1) * FLASHES_PER_REPETITION;
    Ok((trials[..n_train].to_vec(), trials[n_train..].to_vec()))
}

pub fn cmd_evaluate(protocol: &str, inputs: &EvalInputs, cfg: &RunConfig) -> Result<EvaluationReport> {
    let archive_count = |want: &[usize]| -> Result<Vec<EpochArchive>> {
        if !want.contains(&inputs.archives.len()) {
            return Err(Error::InvalidConfig(format!(
                "protocol {protocol} takes {} --archive, got {}",
                want.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" or "),
                inputs.archives.len()
            )));
        }
        inputs.archives.iter().map(EpochArchive::read).collect()
    };
    let report = match protocol {
        "auc" => {
            let model = ModelFile::read(required(inputs.model, "model", protocol)?)?.model;
            let archive = archive_count(&[1])?.pop().expect("one archive");
            check_shape(&model, &archive)?;
            let labels: Vec<Label> = archive.trials().iter().map(|t| t.label).collect();
            let a = auc(&score_trials(&model, archive.trials())?, &labels)?;
            EvaluationReport::new("auc", a, vec![CurvePoint::from_samples(0.0, &[a])]).with_meta("trials", archive.len())
        }
        "learning-curve" => {
            let archives = archive_count(&[1, 2])?;
            let (c, n) = (archives[0].channels(), archives[0].samples());
            let (train, test) = match archives.as_slice() {
                [one] => split_repetitions(one.trials(), cfg.train_fraction)?,
                [a, b] => (a.trials().to_vec(), b.trials().to_vec()),
                _ => unreachable!("archive count checked"),
            };
            learning_curve(&train, &test, &cfg.lc_sizes, &cfg.seeds(cfg.lc_seeds), &cfg.estimator(c, n), &cfg.mean)?
        }
        "latency-sweep" | "jitter-sweep" => {
            let model = ModelFile::read(required(inputs.model, "model", protocol)?)?.model;
            let rec = conditioned(
                required(inputs.recording, "recording", protocol)?,
                required(inputs.triggers, "triggers", protocol)?,
                cfg,
            )?;
            let grid = symmetric_grid(cfg.sweep_max_ms, cfg.sweep_step_ms)?;
            let kind = if protocol == "latency-sweep" {
                SweepKind::Latency(grid)
            } else {
                SweepKind::Jitter {
                    stds_ms: grid.into_iter().filter(|&x| x >= 0.0).collect(),
                    seeds: cfg.seeds(cfg.jitter_seeds),
                }
            };
            robustness_sweep(&model, &rec, cfg.pipeline.window_s, &kind)?
        }
        "cross-subject" => {
            if inputs.archives.len() < 2 {
                return Err(Error::InvalidConfig("protocol cross-subject needs at least 2 --archive".into()));
            }
            let archives: Vec<EpochArchive> = inputs.archives.iter().map(EpochArchive::read).collect::<Result<_>>()?;
            let est = cfg.estimator(archives[0].channels(), archives[0].samples());
            let sessions: Vec<Vec<Trial>> = archives.into_iter().map(EpochArchive::into_trials).collect();
            cross_subject_eval(&sessions, &est, &cfg.mean)?
        }
        other => {
            return Err(Error::UnknownProtocol {
                name: other.to_string(),
                valid: PROTOCOLS.join(", "),
            })
        }
    };
    Ok(report.with_meta("seed", cfg.seed))
}

pub fn cmd_adapt_replay(model: &Path, archive: &Path, dest: &Path, cfg: &RunConfig) -> Result<EvaluationReport> {
    let generic = ModelFile::read(model)?;
    let session = EpochArchive::read(archive)?;
    check_shape(&generic.model, &session)?;
    let schedule = cfg.schedule_or(generic.schedule);
    let outcome = adaptive_replay(&generic.model, session.trials(), schedule, cfg.blocks)?;
    let alpha = outcome.state.alpha();
    let adapted = batch_blended_model(&generic.model, session.trials(), alpha, &cfg.mean)?;
    ModelFile {
        model: adapted,
        schedule: generic.schedule,
        metadata: generic.metadata.clone(),
    }
    .with_meta("adapted_alpha", alpha)
    .with_meta("adapted_trials", outcome.state.trials_seen())
    .write(dest)?;
    Ok(outcome.report.with_meta("schedule", format!("{schedule:?}")))
}

pub fn cmd_synth(archive: Option<&Path>, recording: Option<(&Path, &Path)>, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let sc = cfg.synth_config()?;
    if archive.is_none() && recording.is_none() {
        return Err(Error::InvalidConfig("synth needs --out, or --recording with --triggers".into()));
    }
    if let Some(path) = archive {
        let trials = generate_session(&sc)?;
        let [t, nt, _] = counts(&trials);
        EpochArchive::new(sc.channels, sc.samples()?, sc.sample_rate, trials)?.write(path)?;
        writeln!(out, "archive: target {t}, nontarget {nt}")?;
    }
    if let Some((signal, triggers)) = recording {
        let rec = generate_recording(&sc)?;
        write_recording(&rec, signal, triggers)?;
        writeln!(
            out,
            "recording: {} channel(s), {} samples at {} Hz, {} trigger(s)",
            rec.channels(),
            rec.len(),
            rec.sample_rate(),
            rec.triggers().len()
        )?;
    }
    Ok(())
}

fn emit_report(report: &EvaluationReport, dest: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match dest {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            report.write_records(&mut w)?;
            w.flush()?;
            writeln!(out, "{}: auc {} over {} point(s)", report.protocol, report.auc, report.points.len())?;
        }
        None => report.write_records(out)?,
    }
    Ok(())
}
