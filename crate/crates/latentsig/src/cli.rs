//! Subcommand dispatch. Every `--out` is a directory; each run writes its
//! files there plus `manifest.json`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use latentsig_core::adssm::{AdssmParams, Mode};
use latentsig_core::ddm::{self, DdmParams, FitOptions};
use latentsig_core::trainkit::{self, NoClock, Serial, ShardExecutor, TrainState};

use crate::checkpoint::{self, Checkpoint};
use crate::config::RunConfig;
use crate::data;
use crate::exec::{RayonExecutor, WallClock};
use crate::io::{self, Dataset, RecordMeta, TranslationFile};
use crate::manifest::Manifest;
use crate::plot;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "latentsig", version, about = "PPG-to-ECG translation and drift-diffusion tools")]
pub struct Cli {
    /// Worker threads for training and validation; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: u32,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesise paired ECG/PPG records.
    Synth(SynthArgs),
    /// Chunk, segment and pair records into a dataset.
    Prep(PrepArgs),
    /// Train the translation model.
    Train(TrainArgs),
    /// Translate PPG chunks to ECG with a trained model.
    Translate(TranslateArgs),
    /// Score a translation (or any dataset) against a reference.
    Eval(EvalArgs),
    /// Simulate drift-diffusion trials.
    DdmSim(DdmSimArgs),
    /// Maximum-likelihood drift-diffusion fit.
    DdmFit(DdmFitArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    /// Directory written by `synth`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to the `config.txt` stored by `synth`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corrupt the PPG values with the configured noise.
    #[arg(long)]
    pub noise: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset JSON written by `prep`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Continue from `OUT/checkpoint.json`. Only `epochs` may differ from the original config.
    #[arg(long)]
    pub resume: bool,
    /// Record epoch wall time in the history (breaks byte-identical reruns).
    #[arg(long)]
    pub wall_clock: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Mean,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Mean)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `test` keeps only the records held out by the training split.
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    pub split: SplitArg,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DdmSimArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub tau: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub bias: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DdmFitArgs {
    /// Trials CSV (`rt_s,choice`).
    #[arg(long)]
    pub trials: PathBuf,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub init_alpha: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub init_tau: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub init_delta: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let threads = cli.threads as usize;
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Prep(a) => prep(&a),
        Command::Train(a) => train(&a, threads),
        Command::Translate(a) => translate(&a),
        Command::Eval(a) => eval(&a),
        Command::DdmSim(a) => ddm_sim(&a),
        Command::DdmFit(a) => ddm_fit(&a),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::parse("")?),
    }
}

fn ensure_input(path: &Path) -> Result<()> {
    ensure!(path.exists(), "input {} does not exist", path.display());
    Ok(())
}

fn out_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating output directory {}", path.display()))
}

fn write_output(m: &mut Manifest, path: &Path, bytes: &[u8]) -> Result<()> {
    io::atomic_write(path, bytes)?;
    m.output(path)
}

fn write_json_output<T: serde::Serialize>(m: &mut Manifest, path: &Path, value: &T) -> Result<()> {
    io::write_json(path, value)?;
    m.output(path)
}

fn synth(a: &SynthArgs) -> Result<()> {
    if let Some(c) = &a.config {
        ensure_input(c)?;
    }
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    out_dir(&a.out)?;
    let text = cfg.dump();
    let mut m = Manifest::new("synth", &text, Some(cfg.seed));
    if let Some(c) = &a.config {
        m.input(c)?;
    }
    write_output(&mut m, &a.out.join("config.txt"), text.as_bytes())?;
    for r in 0..cfg.dataset.records {
        let rec = data::synth_record(&cfg, r)?;
        let meta = RecordMeta {
            record: r,
            fs: rec.ecg.fs,
            seed: data::record_seed(cfg.seed, r),
            duration_s: cfg.dataset.duration_s,
            samples: rec.ecg.len(),
            sim: cfg.record_sim(r),
            rr: rec.rr.clone(),
            ecg_file: format!("record_{r:03}_ecg.csv"),
            ppg_file: format!("record_{r:03}_ppg.csv"),
        };
        write_output(&mut m, &a.out.join(&meta.ecg_file), &io::signal_csv(&rec.ecg)?)?;
        write_output(&mut m, &a.out.join(&meta.ppg_file), &io::signal_csv(&rec.ppg)?)?;
        write_json_output(&mut m, &a.out.join(format!("record_{r:03}.json")), &meta)?;
    }
    m.write(&a.out.join("manifest.json"))?;
    println!("wrote {} records to {}", cfg.dataset.records, a.out.display());
    Ok(())
}

fn sidecars(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("record_") && n.ends_with(".json"))
        })
        .collect();
    out.sort();
    ensure!(!out.is_empty(), "no record_*.json files in {}", dir.display());
    Ok(out)
}

fn prep(a: &PrepArgs) -> Result<()> {
    ensure_input(&a.input)?;
    let stored = a.input.join("config.txt");
    let cfg_path = match &a.config {
        Some(c) => {
            ensure_input(c)?;
            Some(c.clone())
        }
        None => stored.exists().then_some(stored),
    };
    let cfg = load_config(cfg_path.as_deref())?;
    out_dir(&a.out)?;
    let text = format!("{}noise = {}\n", cfg.dump(), a.noise);
    let mut m = Manifest::new("prep", &text, Some(cfg.seed));
    if let Some(c) = &cfg_path {
        m.input(c)?;
    }
    let mut sequences = Vec::new();
    let mut fs = cfg.sim.fs;
    for side in sidecars(&a.input)? {
        let meta: RecordMeta = io::read_json(&side)?;
        m.input(&side)?;
        let ecg_path = a.input.join(&meta.ecg_file);
        let ppg_path = a.input.join(&meta.ppg_file);
        let ecg = io::read_signal_csv(&ecg_path, meta.fs)?;
        let ppg = io::read_signal_csv(&ppg_path, meta.fs)?;
        m.input(&ecg_path)?;
        m.input(&ppg_path)?;
        fs = meta.fs;
        let rec = latentsig_core::cardiosynth::SyntheticRecord { rr: meta.rr, ecg, ppg };
        sequences.extend(data::pair(&cfg, &rec, meta.record, a.noise)?);
    }
    ensure!(!sequences.is_empty(), "no chunk produced a paired segment");
    let ds = Dataset {
        fs,
        seg_len: latentsig_core::preprocess::SEG_LEN,
        noisy: a.noise,
        sequences,
    };
    write_json_output(&mut m, &a.out.join("dataset.json"), &ds)?;
    m.write(&a.out.join("manifest.json"))?;
    println!("paired {} chunks into {}", ds.sequences.len(), a.out.join("dataset.json").display());
    Ok(())
}

fn history_csv(state: &TrainState) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "beta", "train_elbo", "val_elbo", "wall_ms"])?;
    for r in state.history.records() {
        w.write_record([
            r.epoch.to_string(),
            format!("{:?}", r.beta),
            format!("{:?}", r.train_elbo),
            r.val_elbo.map(|v| format!("{v:?}")).unwrap_or_default(),
            r.wall_ms.to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

fn train(a: &TrainArgs, threads: usize) -> Result<()> {
    ensure_input(&a.data)?;
    if let Some(c) = &a.config {
        ensure_input(c)?;
    }
    let cfg = load_config(a.config.as_deref())?;
    let ds: Dataset = io::read_json(&a.data)?;
    ensure!(
        ds.seg_len == cfg.model.seg_len,
        "dataset segments have {} samples but the model expects {}",
        ds.seg_len,
        cfg.model.seg_len
    );
    out_dir(&a.out)?;
    let tc = cfg.train_config();
    let split = data::split(&ds, tc.seed);
    let train_set = data::seq_pairs(&ds, &split.train);
    let val_set = data::seq_pairs(&ds, &split.val);
    let ck_path = a.out.join("checkpoint.json");

    let state = if a.resume {
        let ck = checkpoint::load(&ck_path).with_context(|| format!("resuming from {}", ck_path.display()))?;
        let extended = trainkit::TrainConfig {
            epochs: tc.epochs,
            ..ck.train_config.clone()
        };
        ensure!(extended == tc, "checkpoint was trained with a different training config");
        ensure!(ck.state.params.config() == &cfg.model, "checkpoint was trained with a different model config");
        ck.state
    } else {
        TrainState::fresh(AdssmParams::init(&cfg.model, tc.seed)?)
    };

    let exec: Box<dyn ShardExecutor> = if threads == 1 {
        Box::new(Serial)
    } else {
        Box::new(RayonExecutor::new(threads)?)
    };
    let wall = WallClock::new();
    let clock: &dyn trainkit::Clock = if a.wall_clock { &wall } else { &NoClock };
    let every = cfg.checkpoint_every;
    let mut hook = |s: &TrainState| -> Result<(), String> {
        let r = s.history.records().last().expect("hook runs after an epoch");
        eprintln!(
            "epoch {:>5}  beta {:.3}  train {:.3}  val {}",
            r.epoch,
            r.beta,
            r.train_elbo,
            r.val_elbo.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())
        );
        if every > 0 && s.next_epoch % every == 0 {
            let ck = Checkpoint {
                train_config: tc.clone(),
                state: s.clone(),
            };
            checkpoint::save(&ck_path, &ck).map_err(|e| e.to_string())?;
        }
        Ok(())
    };
    let state = trainkit::train(&train_set, &val_set, &tc, state, exec.as_ref(), clock, &mut hook)?;

    let text = cfg.dump();
    let mut m = Manifest::new("train", &text, Some(tc.seed));
    m.input(&a.data)?;
    if let Some(c) = &a.config {
        m.input(c)?;
    }
    write_output(&mut m, &a.out.join("config.txt"), text.as_bytes())?;
    let ck = Checkpoint {
        train_config: tc.clone(),
        state,
    };
    checkpoint::save(&ck_path, &ck)?;
    m.output(&ck_path)?;
    write_json_output(&mut m, &a.out.join("split.json"), &split)?;
    write_output(&mut m, &a.out.join("history.csv"), &history_csv(&ck.state)?)?;
    if !ck.state.history.is_empty() {
        let p = plot::history_plot(&ck.state.history)?;
        write_output(&mut m, &a.out.join("history_plot.csv"), &p.to_csv()?)?;
    }
    m.write(&a.out.join("manifest.json"))?;
    println!("trained {} epochs; checkpoint at {}", ck.state.next_epoch, ck_path.display());
    Ok(())
}

fn translate(a: &TranslateArgs) -> Result<()> {
    ensure_input(&a.model)?;
    ensure_input(&a.input)?;
    let ck = checkpoint::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let ds: Dataset = io::read_json(&a.input)?;
    let idx: Vec<usize> = match a.split {
        SplitArg::All => (0..ds.sequences.len()).collect(),
        SplitArg::Test => data::split(&ds, ck.train_config.seed).test,
    };
    ensure!(!idx.is_empty(), "no chunks selected for translation");
    let mode = match a.mode {
        ModeArg::Mean => Mode::Mean,
        ModeArg::Sample => Mode::Sample,
    };
    out_dir(&a.out)?;
    let sequences = data::translate_sequences(&ck.state.params, &ds, &idx, mode, a.seed)?;
    let file = TranslationFile {
        mode: format!("{:?}", a.mode).to_lowercase(),
        seed: a.seed,
        sequences,
    };
    let opts = format!("mode = {:?}\nseed = {}\nsplit = {:?}\n", a.mode, a.seed, a.split);
    let mut m = Manifest::new("translate", &opts, Some(a.seed));
    m.input(&a.model)?;
    m.input(&a.input)?;
    write_json_output(&mut m, &a.out.join("translation.json"), &file)?;
    m.write(&a.out.join("manifest.json"))?;
    println!("translated {} chunks", file.sequences.len());
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    ensure_input(&a.reference)?;
    ensure_input(&a.hyp)?;
    let reference = io::read_segment_sets(&a.reference)?;
    let hyp = io::read_segment_sets(&a.hyp)?;
    ensure!(!hyp.is_empty(), "{} holds no chunks", a.hyp.display());
    let mut refs = Vec::with_capacity(hyp.len());
    for h in &hyp {
        let Some(r) = reference.iter().find(|r| r.record == h.record && r.offset == h.offset) else {
            bail!("record {} offset {} is missing from the reference", h.record, h.offset);
        };
        ensure!(
            r.segments.len() == h.segments.len(),
            "record {} offset {}: {} reference segments but {} translated",
            h.record,
            h.offset,
            r.segments.len(),
            h.segments.len()
        );
        refs.push(r.segments.clone());
    }
    let hs: Vec<Vec<Vec<f64>>> = hyp.iter().map(|h| h.segments.clone()).collect();
    let report = data::score(&refs, &hs)?;

    out_dir(&a.out)?;
    let mut m = Manifest::new("eval", "", None);
    m.input(&a.reference)?;
    m.input(&a.hyp)?;
    write_json_output(&mut m, &a.out.join("report.json"), &report)?;
    let table = report.to_table();
    write_output(&mut m, &a.out.join("report.txt"), table.as_bytes())?;
    let first = &hyp[0];
    let mean = first.segments.concat();
    let spread = match &first.spread {
        Some(s) => s.concat(),
        None => vec![0.0; mean.len()],
    };
    let overlay = plot::overlay_plot(&refs[0].concat(), &mean, &spread)?;
    write_output(&mut m, &a.out.join("overlay.csv"), &overlay.to_csv()?)?;
    m.write(&a.out.join("manifest.json"))?;
    print!("{table}");
    Ok(())
}

#[derive(serde::Serialize)]
struct SimSummary {
    params: DdmParams,
    n: usize,
    dt: f64,
    seed: u64,
    kept: usize,
    censored: Vec<usize>,
}

fn ddm_sim(a: &DdmSimArgs) -> Result<()> {
    let p = DdmParams {
        alpha: a.alpha,
        tau: a.tau,
        delta: a.delta,
        bias: a.bias,
    };
    let sim = ddm::simulate_ddm(&p, a.n, a.dt, a.seed)?;
    out_dir(&a.out)?;
    let opts = format!("alpha = {:?}\ntau = {:?}\ndelta = {:?}\nbias = {:?}\nn = {}\ndt = {:?}\nseed = {}\n", a.alpha, a.tau, a.delta, a.bias, a.n, a.dt, a.seed);
    let mut m = Manifest::new("ddm-sim", &opts, Some(a.seed));
    write_output(&mut m, &a.out.join("trials.csv"), &io::trials_csv(&sim.trials)?)?;
    let summary = SimSummary {
        params: p,
        n: a.n,
        dt: a.dt,
        seed: a.seed,
        kept: sim.trials.len(),
        censored: sim.censored.iter().map(|c| c.index).collect(),
    };
    write_json_output(&mut m, &a.out.join("simulation.json"), &summary)?;
    m.write(&a.out.join("manifest.json"))?;
    println!("simulated {} trials ({} censored)", sim.trials.len(), sim.censored.len());
    Ok(())
}

fn ddm_fit(a: &DdmFitArgs) -> Result<()> {
    ensure_input(&a.trials)?;
    let trials = io::read_trials_csv(&a.trials)?;
    let init = DdmParams::new(a.init_alpha, a.init_tau, a.init_delta);
    let opts = FitOptions {
        max_iter: a.max_iter,
        ..FitOptions::default()
    };
    let fit = ddm::fit_mle(&trials, &init, &opts)?;
    out_dir(&a.out)?;
    let opts = format!("init_alpha = {:?}\ninit_tau = {:?}\ninit_delta = {:?}\nmax_iter = {}\n", a.init_alpha, a.init_tau, a.init_delta, a.max_iter);
    let mut m = Manifest::new("ddm-fit", &opts, None);
    m.input(&a.trials)?;
    write_json_output(&mut m, &a.out.join("fit.json"), &fit)?;
    m.write(&a.out.join("manifest.json"))?;
    println!(
        "alpha {:.4}  tau {:.4}  delta {:.4}  loglik {:.3}  ({} iterations{})",
        fit.params.alpha,
        fit.params.tau,
        fit.params.delta,
        fit.loglik,
        fit.iterations,
        if fit.converged { "" } else { ", not converged" }
    );
    Ok(())
}
