//! Argument definitions and command handlers for the `adapt` binary.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chanadapt::basis::ShIndex;
use chanadapt::harmonic::{harmonic_matrix, HarmonicConfig};
use chanadapt::learned::{init_projection, lsq_fit};
use chanadapt::oracle::{synth_epochs, synth_reference, Coefficients, LabelSpec, SubjectMixing, SynthSpec, SYNTH_L_MAX};
use chanadapt::pipeline::{normalize, resample, NormMode};
use chanadapt::riemannian::{recenter_matrix, RiemannianConfig, Shrinkage};
use chanadapt::ssi::{ssi_matrix, SplineConfig};
use chanadapt::{AdaptationMatrix, BuiltinMontage, EpochSet, Montage, Signal};
use clap::{ArgMatches, Args, Parser, Subcommand};

use crate::bench::{self, build_report, parse_results, render_report, render_results, render_table, BenchConfig};
use crate::error::{CliError, Result};
use crate::formats::matrix::{load_matrix, save_matrix};
use crate::formats::montage::{load_montage, montage_csv};
use crate::formats::sidecar::{epochs_to_signal, signal_to_epochs, Sidecar};
use crate::formats::signal::{read_signal, write_signal};
use crate::formats::{read_text, write_bytes, OutputFormat};

pub const MATRIX_METHODS: [&str; 4] = ["conv1d", "ssi", "harmonic", "riemannian"];

#[derive(Debug, Parser)]
#[command(name = "adapt", version, about = "EEG channel adaptation toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress informational messages on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Output file format (default: from the output extension, `.csv` or binary).
    #[arg(long, global = true)]
    pub format: Option<OutputFormat>,
    /// Leave the creation time out of sidecar metadata.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect electrode montages.
    #[command(subcommand)]
    Montage(MontageCmd),
    /// Build an adaptation matrix.
    Matrix(MatrixArgs),
    /// Apply an adaptation matrix to a signal file.
    Apply(ApplyArgs),
    /// Resample and/or normalize a signal file; operations run in flag order.
    Preprocess(PreprocessArgs),
    /// Generate synthetic spherical-head epochs.
    Synth(SynthArgs),
    /// Seed-replicated montage-transfer benchmark.
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Significance report for a benchmark results CSV.
    Stats(StatsArgs),
}

#[derive(Debug, Subcommand)]
pub enum MontageCmd {
    /// List builtin montages.
    List,
    /// Print a montage as `label,x,y,z`.
    Show { montage: String },
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    /// conv1d, ssi, harmonic or riemannian.
    #[arg(long)]
    pub method: String,
    /// Source montage (builtin name or CSV path).
    #[arg(long)]
    pub source: String,
    /// Target montage.
    #[arg(long)]
    pub target: Option<String>,
    /// Method parameter as key=value; repeatable.
    #[arg(long = "cfg", value_name = "K=V")]
    pub cfg: Vec<String>,
    /// Source-montage signals to fit on (conv1d, riemannian).
    #[arg(long)]
    pub fit_signals: Option<PathBuf>,
    /// Target-montage signals paired with --fit-signals (conv1d).
    #[arg(long)]
    pub fit_targets: Option<PathBuf>,
    /// Matrix the riemannian whitening is applied after: ssi, harmonic or identity.
    #[arg(long, default_value = "ssi")]
    pub base: String,
    /// Subject to fit (riemannian); optional when the file holds one subject.
    #[arg(long)]
    pub subject: Option<String>,
    /// Fit the riemannian whitening on all of the subject's epochs instead
    /// of the leading `train_fraction` of them.
    #[arg(long)]
    pub fit_all: bool,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Resample to this rate (Hz); repeatable.
    #[arg(long, value_name = "HZ")]
    pub resample: Vec<f64>,
    /// minmax, zscore or uv100; repeatable.
    #[arg(long, value_name = "MODE")]
    pub normalize: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub montage: String,
    #[arg(long, default_value_t = 256)]
    pub n_samples: usize,
    #[arg(long, default_value_t = 256.0)]
    pub sfreq: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 1)]
    pub subjects: usize,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    /// Per-subject random SPD channel mixing.
    #[arg(long)]
    pub mixing: bool,
    /// Coefficient std per degree 0..=4, comma separated.
    #[arg(long, default_value = "1,1,1,1,1")]
    pub degree_std: String,
    /// Plant binary labels on this coefficient (e.g. SH2:-2).
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    pub label_offset: f64,
    /// Also write the noise-free, unmixed field on this montage.
    #[arg(long, requires = "reference_output")]
    pub reference_montage: Option<String>,
    #[arg(long)]
    pub reference_output: Option<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum BenchCmd {
    /// Run the benchmark described by a config file (defaults without one).
    Run(BenchRunArgs),
}

#[derive(Debug, Args)]
pub struct BenchRunArgs {
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Per-seed results CSV (default: config `output`, else stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Statistics report CSV (default: config `report`).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Results CSV with `method,seed,balanced_accuracy` rows.
    pub results: PathBuf,
    /// False discovery rate for Benjamini-Hochberg.
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    /// Also write the report as CSV.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub(crate) struct Ctx<'a> {
    pub global: &'a GlobalOpts,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn seed(&self) -> u64 {
        self.global.seed.unwrap_or(0)
    }

    fn format_for(&self, path: &Path) -> OutputFormat {
        self.global.format.unwrap_or_else(|| OutputFormat::from_extension(path))
    }

    fn out(&mut self, text: &str) -> Result<()> {
        self.stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e))
    }

    fn info(&mut self, msg: &str) {
        if !self.global.quiet {
            let _ = writeln!(self.stderr, "{msg}");
        }
    }
}

pub(crate) fn dispatch(cli: &Cli, matches: &ArgMatches, ctx: &mut Ctx<'_>) -> Result<()> {
    match &cli.command {
        Command::Montage(MontageCmd::List) => {
            let mut text = String::new();
            for m in BuiltinMontage::ALL {
                text.push_str(&format!("{}\t{}\n", m.name(), m.labels().len()));
            }
            ctx.out(&text)
        }
        Command::Montage(MontageCmd::Show { montage }) => {
            let m = load_montage(montage)?;
            ctx.out(&montage_csv(&m))
        }
        Command::Matrix(a) => cmd_matrix(a, ctx),
        Command::Apply(a) => cmd_apply(a, ctx),
        Command::Preprocess(a) => {
            let sub = matches.subcommand_matches("preprocess").expect("preprocess matches");
            cmd_preprocess(a, sub, ctx)
        }
        Command::Synth(a) => cmd_synth(a, ctx),
        Command::Bench(BenchCmd::Run(a)) => cmd_bench(a, ctx),
        Command::Stats(a) => cmd_stats(a, ctx),
    }
}

/// `--cfg` pairs; every key must be consumed by the method.
struct CfgPairs(BTreeMap<String, String>);

impl CfgPairs {
    fn parse(items: &[String]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for item in items {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--cfg expects key=value, got {item:?}")))?;
            if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!("--cfg key {k:?} given twice")));
            }
        }
        Ok(Self(map))
    }

    fn take<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("--cfg {key}: bad value {v:?}"))),
        }
    }

    fn finish(self, method: &str) -> Result<()> {
        match self.0.keys().next() {
            None => Ok(()),
            Some(k) => Err(CliError::Usage(format!("--cfg key {k:?} is not used by method {method}"))),
        }
    }
}

fn spline_cfg(cfg: &mut CfgPairs) -> Result<SplineConfig> {
    let mut c = SplineConfig::default();
    if let Some(v) = cfg.take("stiffness")? {
        c.stiffness = v;
    }
    if let Some(v) = cfg.take("n_terms")? {
        c.n_terms = v;
    }
    if let Some(v) = cfg.take("reg_lambda")? {
        c.reg_lambda = v;
    }
    Ok(c)
}

fn harmonic_cfg(cfg: &mut CfgPairs) -> Result<HarmonicConfig> {
    let mut c = HarmonicConfig::default();
    if let Some(v) = cfg.take("l_max")? {
        c.l_max = v;
    }
    if let Some(v) = cfg.take::<String>("mode")? {
        c.mode = v.parse().map_err(|e: chanadapt::Error| CliError::Usage(e.to_string()))?;
    }
    if let Some(v) = cfg.take("ridge")? {
        c.ridge = v;
    }
    Ok(c)
}

fn require_target(a: &MatrixArgs) -> Result<Montage> {
    match &a.target {
        Some(t) => load_montage(t),
        None => Err(CliError::Usage(format!("--method {} requires --target", a.method))),
    }
}

fn cmd_matrix(a: &MatrixArgs, ctx: &mut Ctx<'_>) -> Result<()> {
    if !MATRIX_METHODS.contains(&a.method.as_str()) {
        return Err(CliError::Usage(format!(
            "unknown method {:?} (expected one of {})",
            a.method,
            MATRIX_METHODS.join(", ")
        )));
    }
    let mut cfg = CfgPairs::parse(&a.cfg)?;
    let source = load_montage(&a.source)?;
    let m = match a.method.as_str() {
        "ssi" => {
            let c = spline_cfg(&mut cfg)?;
            cfg.finish("ssi")?;
            ssi_matrix(&source, &require_target(a)?, &c)?
        }
        "harmonic" => {
            let c = harmonic_cfg(&mut cfg)?;
            cfg.finish("harmonic")?;
            harmonic_matrix(&source, &c)?
        }
        "conv1d" => {
            let ridge: f64 = cfg.take("ridge")?.unwrap_or(1e-6);
            let with_bias: bool = cfg.take("bias")?.unwrap_or(true);
            cfg.finish("conv1d")?;
            matrix_conv1d(a, &source, ridge, with_bias, ctx.seed())?
        }
        "riemannian" => matrix_riemannian(a, &source, cfg)?,
        _ => unreachable!(),
    };
    save_matrix(&a.output, &m, ctx.format_for(&a.output))?;
    let (r, c) = m.shape();
    ctx.info(&format!("wrote {} ({r}x{c}, {})", a.output.display(), m.method()));
    Ok(())
}

fn matrix_conv1d(a: &MatrixArgs, source: &Montage, ridge: f64, with_bias: bool, seed: u64) -> Result<AdaptationMatrix> {
    let src_labels = source.labels();
    match (&a.fit_signals, &a.fit_targets) {
        (None, None) => {
            let target = require_target(a)?;
            let p = init_projection(source.len(), target.len(), with_bias, seed)?;
            Ok(p.to_matrix(&src_labels, &target.labels())?.with_meta("init", "random"))
        }
        (Some(xs), Some(xt)) => {
            let x_s = read_signal(xs)?.reorder(&src_labels)?;
            let mut x_t = read_signal(xt)?;
            if let Some(t) = &a.target {
                x_t = x_t.reorder(&load_montage(t)?.labels())?;
            }
            let p = lsq_fit(x_s.data(), x_t.data(), ridge, with_bias)?;
            let tgt_labels = x_t.labels().to_vec();
            Ok(p.to_matrix(&src_labels, &tgt_labels)?
                .with_meta("fit", "lsq")
                .with_meta("ridge", ridge.to_string()))
        }
        _ => Err(CliError::Usage(
            "conv1d fitting needs both --fit-signals and --fit-targets".into(),
        )),
    }
}

fn matrix_riemannian(a: &MatrixArgs, source: &Montage, mut cfg: CfgPairs) -> Result<AdaptationMatrix> {
    let fit = a
        .fit_signals
        .as_ref()
        .ok_or_else(|| CliError::Usage("--method riemannian requires --fit-signals".into()))?;
    let mut rc = RiemannianConfig::default();
    if let Some(v) = cfg.take::<String>("shrinkage")? {
        rc.shrinkage = match v.as_str() {
            "ledoit_wolf" => Shrinkage::LedoitWolf,
            x => Shrinkage::Fixed(
                x.parse()
                    .map_err(|_| CliError::Usage(format!("--cfg shrinkage: bad value {x:?}")))?,
            ),
        };
    }
    if let Some(v) = cfg.take("mean_tol")? {
        rc.mean_tol = v;
    }
    if let Some(v) = cfg.take("mean_max_iter")? {
        rc.mean_max_iter = v;
    }
    let fraction: f64 = cfg.take("train_fraction")?.unwrap_or(0.5);
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CliError::Usage("--cfg train_fraction must be in (0, 1]".into()));
    }
    let base = match a.base.as_str() {
        "ssi" => {
            let c = spline_cfg(&mut cfg)?;
            ssi_matrix(source, &require_target(a)?, &c)?
        }
        "harmonic" => {
            let c = harmonic_cfg(&mut cfg)?;
            harmonic_matrix(source, &c)?
        }
        "identity" => AdaptationMatrix::identity(&source.labels())?,
        other => {
            return Err(CliError::Usage(format!(
                "unknown base {other:?} (expected ssi, harmonic or identity)"
            )))
        }
    };
    cfg.finish("riemannian")?;

    let signal = read_signal(fit)?;
    let meta = Sidecar::read_for(fit)?;
    let epochs = signal_to_epochs(&signal, &meta).map_err(|m| CliError::format(fit, m))?;
    let subject = match &a.subject {
        Some(s) => s.clone(),
        None => {
            let subjects = epochs.subjects();
            if subjects.len() != 1 {
                return Err(CliError::Usage(format!(
                    "{} holds subjects {}; pick one with --subject",
                    fit.display(),
                    subjects.join(",")
                )));
            }
            subjects[0].clone()
        }
    };
    let idx = epochs.indices_of(&subject);
    if idx.is_empty() {
        return Err(CliError::Config(format!("subject {subject:?} not found in {}", fit.display())));
    }
    let n_fit = if a.fit_all {
        idx.len()
    } else {
        bench::recenter_fit_count(idx.len(), fraction)
    };
    let r = recenter_matrix(&epochs.select(&idx[..n_fit])?, &base, &rc)?;
    let fitted_on = if a.fit_all {
        "all".to_string()
    } else {
        format!("leading {n_fit} of {}", idx.len())
    };
    Ok(r.matrix.with_meta("fit_epochs", fitted_on).with_meta("base", a.base.clone()))
}

fn cmd_apply(a: &ApplyArgs, ctx: &mut Ctx<'_>) -> Result<()> {
    let m = load_matrix(&a.matrix)?;
    let x = read_signal(&a.input)?;
    let mut meta = Sidecar::read_for(&a.input)?;
    let (y, reordered) = m.apply_reporting(&x)?;
    write_signal(&a.output, &y, ctx.format_for(&a.output))?;
    meta.push_provenance(&format!("apply({})", m.method()));
    if reordered {
        meta.set("reordered", "true");
        ctx.info("note: input channels reordered to match the matrix source labels");
    }
    meta.write_for(&a.output, !ctx.global.no_timestamp)?;
    ctx.info(&format!("wrote {} ({} channels)", a.output.display(), y.n_channels()));
    Ok(())
}

enum PreOp {
    Resample(f64),
    Normalize(NormMode),
}

fn cmd_preprocess(a: &PreprocessArgs, matches: &ArgMatches, ctx: &mut Ctx<'_>) -> Result<()> {
    let mut ops: Vec<(usize, PreOp)> = Vec::new();
    if let Some(idx) = matches.indices_of("resample") {
        ops.extend(idx.zip(&a.resample).map(|(i, &hz)| (i, PreOp::Resample(hz))));
    }
    if let Some(idx) = matches.indices_of("normalize") {
        for (i, mode) in idx.zip(&a.normalize) {
            let mode: NormMode = mode
                .parse()
                .map_err(|_| CliError::Usage(format!("unknown normalization {mode:?} (expected minmax, zscore or uv100)")))?;
            ops.push((i, PreOp::Normalize(mode)));
        }
    }
    if ops.is_empty() {
        return Err(CliError::Usage("preprocess needs --resample and/or --normalize".into()));
    }
    ops.sort_by_key(|(i, _)| *i);

    let x = read_signal(&a.input)?;
    let mut meta = Sidecar::read_for(&a.input)?;
    let epoched = meta.get("epoch_samples").is_some();
    let mut epochs: Vec<Signal> = signal_to_epochs(&x, &meta)
        .map_err(|m| CliError::format(&a.input, m))?
        .epochs()
        .to_vec();
    for (_, op) in &ops {
        let step = match op {
            PreOp::Resample(hz) => {
                epochs = epochs.iter().map(|e| resample(e, *hz)).collect::<chanadapt::Result<_>>()?;
                format!("resample({hz})")
            }
            PreOp::Normalize(mode) => {
                epochs = epochs.iter().map(|e| normalize(e, *mode)).collect::<chanadapt::Result<_>>()?;
                format!("normalize({mode})")
            }
        };
        meta.push_provenance(&step);
    }
    let y = Signal::concat(&epochs)?;
    if epoched {
        meta.set("epoch_samples", epochs[0].n_samples().to_string());
    }
    write_signal(&a.output, &y, ctx.format_for(&a.output))?;
    meta.write_for(&a.output, !ctx.global.no_timestamp)?;
    ctx.info(&format!("wrote {} ({} samples at {} Hz)", a.output.display(), y.n_samples(), y.sfreq()));
    Ok(())
}

fn write_epochs(path: &Path, set: &EpochSet, step: &str, ctx: &mut Ctx<'_>) -> Result<()> {
    let (signal, mut meta) = epochs_to_signal(set)?;
    meta.push_provenance(step);
    write_signal(path, &signal, ctx.format_for(path))?;
    meta.write_for(path, !ctx.global.no_timestamp)
}

fn cmd_synth(a: &SynthArgs, ctx: &mut Ctx<'_>) -> Result<()> {
    let montage = load_montage(&a.montage)?;
    let degree_std = a
        .degree_std
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| CliError::Usage(format!("bad --degree-std {:?}", a.degree_std)))?;
    if degree_std.len() != SYNTH_L_MAX + 1 {
        return Err(CliError::Usage(format!("--degree-std needs {} values", SYNTH_L_MAX + 1)));
    }
    let labels = match &a.label {
        None => None,
        Some(l) => Some(LabelSpec {
            coefficient: ShIndex::parse_label(l)
                .ok_or_else(|| CliError::Usage(format!("bad --label {l:?} (expected e.g. SH2:-2)")))?,
            offset: a.label_offset,
        }),
    };
    let seed = ctx.seed();
    let spec = SynthSpec {
        montage,
        coefficients: Coefficients::Random {
            degree_std,
            n_samples: a.n_samples,
        },
        noise_sigma: a.noise,
        sfreq: a.sfreq,
        n_subjects: a.subjects,
        n_epochs_per_subject: a.epochs,
        subject_mixing: if a.mixing {
            SubjectMixing::RandomSpd { seed }
        } else {
            SubjectMixing::None
        },
        seed,
        labels,
    };
    let set = synth_epochs(&spec)?;
    let step = format!("synth(seed={seed})");
    write_epochs(&a.output, &set, &step, ctx)?;
    if let (Some(m), Some(path)) = (&a.reference_montage, &a.reference_output) {
        let reference = synth_reference(&spec, &load_montage(m)?)?;
        write_epochs(path, &reference, &format!("synth_reference(seed={seed})"), ctx)?;
    }
    ctx.info(&format!("wrote {} ({} epochs)", a.output.display(), set.len()));
    Ok(())
}

fn cmd_bench(a: &BenchRunArgs, ctx: &mut Ctx<'_>) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => BenchConfig::load(p)?,
        None => BenchConfig::default(),
    };
    if let Some(seed) = ctx.global.seed {
        cfg.first_seed = seed;
    }
    let out = bench::run_bench(&cfg)?;
    for f in &out.failures {
        ctx.info(&format!("warning: {} failed on seed {}: {}", f.method, f.seed, f.message));
    }
    let results = render_results(&out.rows);
    match a.output.clone().or(cfg.output.as_ref().map(PathBuf::from)) {
        Some(p) => {
            write_bytes(&p, results.as_bytes())?;
            ctx.info(&format!("wrote {} ({} rows)", p.display(), out.rows.len()));
        }
        None => ctx.out(&results)?,
    }
    if let Some(p) = a.report.clone().or(cfg.report.as_ref().map(PathBuf::from)) {
        let report = build_report(&out.rows, cfg.q).map_err(CliError::Config)?;
        write_bytes(&p, render_report(&report).as_bytes())?;
        ctx.info(&format!("wrote {}", p.display()));
    }
    Ok(())
}

fn cmd_stats(a: &StatsArgs, ctx: &mut Ctx<'_>) -> Result<()> {
    if !(a.q > 0.0 && a.q < 1.0) {
        return Err(CliError::Usage(format!("--q {} must be in (0, 1)", a.q)));
    }
    let text = read_text(&a.results)?;
    let rows = parse_results(&text).map_err(|m| CliError::format(&a.results, m))?;
    let report = build_report(&rows, a.q).map_err(|m| CliError::format(&a.results, m))?;
    ctx.out(&render_table(&report))?;
    if let Some(p) = &a.output {
        write_bytes(p, render_report(&report).as_bytes())?;
    }
    Ok(())
}
