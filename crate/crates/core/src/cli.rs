//! Command-line front end. `main` parses [`Cli`] and hands it to [`run`];
//! errors map to exit codes through [`crate::Error::exit_code`].

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::binio::write_file;
use crate::data_model::{LabelDim, N_CLASSES};
use crate::dsp::featfile::{read_feat, write_feat};
use crate::error::{bail, Error, Result};
use crate::ingest::{read_eegb, read_npy_pair, synth_generate, write_eegb, SynthSpec};
use crate::net::gradcheck::{gradient_check, GradCheckConfig};
use crate::par::set_threads;
use crate::pipeline::{make_split, pool_trial_sets, prepare_features};
use crate::runconfig::RunConfig;
use crate::train::{fit, history_csv, load_checkpoint, predict_classes, save_checkpoint, vote_per_trial, Metrics};

#[derive(Debug, Parser)]
#[command(name = "eegemo", version, about = "EEG band-power emotion classifier")]
pub struct Cli {
    /// Cap on worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Clamp out-of-range EEGB ratings to [1, 9] instead of failing.
    #[arg(long, global = true)]
    pub lenient: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// Run configuration file (key = value lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic recording.
    Synth {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert an NPY data/labels pair to EEGB.
    Convert {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 128.0)]
        fs: f32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract normalized band-power sequences from one or more EEGB files.
    Features {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated channel indices.
        #[arg(long)]
        channels: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train one model for one label dimension.
    Train {
        #[arg(long)]
        feat: PathBuf,
        #[arg(long)]
        label_dim: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Keep the last epoch instead of the best one.
        #[arg(long)]
        final_epoch: bool,
        #[arg(long)]
        vote_per_trial: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score a checkpoint on a feature file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        feat: PathBuf,
        #[arg(long)]
        vote_per_trial: bool,
        /// Which samples to score: the config's test split, or all.
        #[arg(long, default_value = "test")]
        split: String,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Finite-difference check of the analytic gradients.
    Gradcheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Print the test accuracy of each label dimension side by side.
    Summary {
        /// Checkpoint files or directories holding them.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

/// `--config` wins; otherwise the `<feat>.cfg` written next to a feature
/// file by `features`, when `feat` is given and that file exists.
fn load_config_for(args: &ConfigArgs, feat: Option<&std::path::Path>) -> Result<RunConfig> {
    let sidecar = feat.map(|f| PathBuf::from(format!("{}.cfg", f.display()))).filter(|p| p.is_file());
    let mut cfg = match args.config.as_ref().or(sidecar.as_ref()) {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            RunConfig::from_ini(&text)?
        }
        None => RunConfig::default(),
    };
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    load_config_for(args, None)
}

fn apply_threads(cli_threads: Option<usize>, cfg: &RunConfig) {
    let n = cli_threads.unwrap_or(cfg.threads);
    if n > 0 {
        set_threads(n);
    }
}

pub fn checkpoint_name(dim: LabelDim) -> String {
    format!("model_{dim}.emoc")
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let w = |out: &mut dyn Write, s: &str| -> Result<()> {
        out.write_all(s.as_bytes()).map_err(|e| Error::io("<stdout>", e))
    };
    match cli.command {
        Command::Synth { spec, out: path } => {
            let spec = match spec {
                Some(p) => SynthSpec::from_ini(&std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?)?,
                None => SynthSpec::default(),
            };
            apply_threads(cli.threads, &RunConfig::default());
            let ts = synth_generate(&spec)?;
            write_eegb(&ts, &path)?;
            w(out, &format!("wrote {} trials x {} channels x {} samples to {}\n", ts.n_trials, ts.n_channels, ts.n_samples, path.display()))
        }
        Command::Convert { data, labels, fs, out: path } => {
            let ts = read_npy_pair(&data, &labels, fs)?;
            write_eegb(&ts, &path)?;
            w(out, &format!("wrote {} trials x {} channels x {} samples to {}\n", ts.n_trials, ts.n_channels, ts.n_samples, path.display()))
        }
        Command::Features { inputs, out: path, channels, mut cfg } => {
            if let Some(c) = channels {
                cfg.overrides.push(format!("channels={c}"));
            }
            let cfg = load_config(&cfg)?;
            apply_threads(cli.threads, &cfg);
            let sets = inputs.iter().map(|p| read_eegb(p, cli.lenient)).collect::<Result<Vec<_>>>()?;
            let ts = pool_trial_sets(sets)?;
            let (ds, split) = prepare_features(&ts, &cfg)?;
            write_feat(&ds, &path)?;
            let cfg_path = PathBuf::from(format!("{}.cfg", path.display()));
            write_file(&cfg_path, cfg.to_ini().as_bytes())?;
            w(
                out,
                &format!(
                    "wrote {} samples (seq {}, dim {}; {} train / {} test) to {}\n",
                    ds.n_samples,
                    ds.seq_len,
                    ds.input_dim,
                    split.train.len(),
                    split.test.len(),
                    path.display()
                ),
            )
        }
        Command::Train { feat, label_dim, out: dir, final_epoch, vote_per_trial: vote, mut cfg } => {
            if let Some(d) = label_dim {
                cfg.overrides.push(format!("label_dim={d}"));
            }
            if final_epoch {
                cfg.overrides.push("final_epoch=true".into());
            }
            if vote {
                cfg.overrides.push("vote_per_trial=true".into());
            }
            let cfg = load_config_for(&cfg, Some(&feat))?;
            apply_threads(cli.threads, &cfg);
            let ds = read_feat(&feat)?.with_label_dim(cfg.train.label_dim);
            let split = make_split(&ds, &cfg)?;
            let model = cfg.model_config(ds.seq_len, ds.input_dim);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            write_file(&dir.join("effective.cfg"), cfg.to_ini().as_bytes())?;
            let mut log = Vec::new();
            let outcome = fit(&ds, &split, &model, &cfg.train, &mut |r| {
                let _ = writeln!(log, "epoch {:>3} {:<5} loss {:.6} accuracy {:.4}", r.epoch, r.split, r.loss, r.accuracy);
            })?;
            w(out, &String::from_utf8_lossy(&log))?;
            let ck_path = dir.join(checkpoint_name(cfg.train.label_dim));
            save_checkpoint(&ck_path, &outcome.checkpoint)?;
            write_file(&dir.join("metrics.csv"), history_csv(&outcome.history).as_bytes())?;
            let title = format!("{} (epoch {}) test", cfg.train.label_dim, outcome.checkpoint.epoch);
            let mut report = outcome.test_metrics.report(&title);
            if cfg.vote_per_trial {
                let (preds, _) = predict_classes(&outcome.checkpoint.params, &ds, &split.test, cfg.train.parallelism)?;
                let m = vote_trials(&ds, &split.test, &preds)?;
                report.push_str(&m.report("per-trial vote"));
            }
            write_file(&dir.join("report.txt"), report.as_bytes())?;
            w(out, &report)?;
            w(out, &format!("checkpoint: {}\n", ck_path.display()))
        }
        Command::Eval { checkpoint, feat, vote_per_trial: vote, split, cfg } => {
            let cfg = load_config_for(&cfg, Some(&feat))?;
            apply_threads(cli.threads, &cfg);
            let ck = load_checkpoint(&checkpoint)?;
            let ds = read_feat(&feat)?.with_label_dim(ck.label_dim);
            let c = &ck.params.config;
            if (c.seq_len, c.input_dim) != (ds.seq_len, ds.input_dim) {
                bail!(
                    Shape,
                    "checkpoint expects ({}, {}) samples, {} holds ({}, {})",
                    c.seq_len,
                    c.input_dim,
                    feat.display(),
                    ds.seq_len,
                    ds.input_dim
                );
            }
            let indices = match split.as_str() {
                "test" => make_split(&ds, &cfg)?.test,
                "all" => (0..ds.n_samples).collect(),
                other => bail!(Config, "--split must be test or all, got {other:?}"),
            };
            let (preds, loss) = predict_classes(&ck.params, &ds, &indices, cfg.train.parallelism)?;
            let targets: Vec<usize> = indices.iter().map(|&i| ds.target(i)).collect();
            let m = Metrics::from_predictions(&targets, &preds, c.n_classes, loss / indices.len() as f64)?;
            w(out, &m.report(&format!("{} {split}", ck.label_dim)))?;
            if vote {
                w(out, &vote_trials(&ds, &indices, &preds)?.report("per-trial vote"))?;
            }
            Ok(())
        }
        Command::Gradcheck { seed } => gradcheck_command(seed, None, out),
        Command::Summary { runs } => summary_command(&runs, out),
    }
}

fn vote_trials(ds: &crate::data_model::FeatureDataset, indices: &[usize], preds: &[usize]) -> Result<Metrics> {
    let trials: Vec<u32> = indices.iter().map(|&i| ds.trial_ids[i]).collect();
    let targets: Vec<usize> = indices.iter().map(|&i| ds.target(i)).collect();
    vote_per_trial(&trials, &targets, preds, N_CLASSES)
}

/// Runs the gradient check and prints the per-block report. A failed check
/// is a numeric error. `corrupt` tampers with the analytic gradient, for
/// negative-control tests.
pub fn gradcheck_command(seed: u64, corrupt: Option<&dyn Fn(&mut [f64])>, out: &mut dyn Write) -> Result<()> {
    let cfg = GradCheckConfig::tiny(seed);
    let report = gradient_check(&cfg, corrupt)?;
    let mut s = format!("gradient check (seed {seed}, step {:e}, threshold {:e})\n", cfg.step, cfg.threshold);
    for b in &report.blocks {
        s.push_str(&format!("  {:<11} {:>5} params  max rel err {:.3e}\n", b.name, b.n_params, b.max_rel_err));
    }
    s.push_str(&format!("max relative error {:.3e}: {}\n", report.max_rel_err, if report.passed() { "PASS" } else { "FAIL" }));
    out.write_all(s.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
    if !report.passed() {
        bail!(Numeric, "gradient check failed: max relative error {:.3e} > {:e}", report.max_rel_err, cfg.threshold);
    }
    Ok(())
}

fn collect_checkpoints(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "emoc"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

/// Table of stored test accuracies, one column per label dimension in
/// valence, arousal, dominance, liking order, plus their mean.
pub fn summary_command(paths: &[PathBuf], out: &mut dyn Write) -> Result<()> {
    let mut acc: [Option<(f64, PathBuf)>; 4] = Default::default();
    for f in collect_checkpoints(paths)? {
        let ck = load_checkpoint(&f)?;
        let slot = &mut acc[ck.label_dim.index()];
        if let Some((_, prev)) = slot {
            bail!(Config, "two checkpoints for {}: {} and {}", ck.label_dim, prev.display(), f.display());
        }
        *slot = Some((ck.test_accuracy, f));
    }
    let mut header = String::new();
    let mut row = String::new();
    let mut found = Vec::new();
    for d in LabelDim::ALL {
        header.push_str(&format!("{:>11}", d.name()));
        match &acc[d.index()] {
            Some((a, _)) => {
                row.push_str(&format!("{:>10.2}%", 100.0 * a));
                found.push(*a);
            }
            None => row.push_str(&format!("{:>11}", "-")),
        }
    }
    if found.is_empty() {
        bail!(InvalidArg, "no checkpoints found");
    }
    let mean = found.iter().sum::<f64>() / found.len() as f64;
    header.push_str(&format!("{:>11}", "mean"));
    row.push_str(&format!("{:>10.2}%", 100.0 * mean));
    out.write_all(format!("{header}\n{row}\n").as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

/// Parses `args` (program name first), runs, and returns the exit code.
/// Errors go to `err` as one line.
pub fn main_with(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 2;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
