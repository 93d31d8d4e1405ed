use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tala_core::eval::{write_manifest, AnnotationRecord};
use tala_core::synth::default_bpm_range;
use tala_core::{
    corpus_specs, evaluate, load_clip, read_manifest, summarize, synthesize, write_synth, AnalysisReport, CandidateRanking, Degradation, Detector, Grammar,
    PipelineConfig, SynthSpec, TalaError,
};

const EXIT_IO: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;

#[derive(Parser)]
#[command(name = "tala", version, about = "Detect tala and tempo in tabla recordings")]
struct Cli {
    /// JSON file of theka definitions replacing the bundled grammar.
    #[arg(long, global = true, env = "TALA_THEKA_PATH", value_name = "FILE")]
    theka_file: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyse WAV files and print one JSON report per file.
    Analyze(AnalyzeArgs),
    /// Render synthetic theka clips with ground-truth sidecars.
    Synth(SynthArgs),
    /// Score the detector on a `path,tala,tempo_bpm` manifest.
    Eval(EvalArgs),
}

#[derive(Args)]
struct DetectorArgs {
    /// Peak contrast, as a fraction of the envelope maximum.
    #[arg(long, default_value_t = 0.01)]
    d_f: f64,
    /// Bayan stroke refinement window in seconds.
    #[arg(long, default_value_t = 0.1)]
    window: f64,
    /// Lower edge of the bayan band in Hz.
    #[arg(long, default_value_t = 60.0)]
    band_low: f64,
    /// Upper edge of the bayan band in Hz.
    #[arg(long, default_value_t = 200.0)]
    band_high: f64,
    /// Slack in seconds when assigning onsets to stroke intervals.
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    /// Tie-break between talas matching the dominant pair equally well.
    #[arg(long, value_enum, default_value_t = Ranking::MatrixSupport)]
    ranking: Ranking,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ranking {
    /// Prefer the tala whose patterns cover more of the co-occurrence matrix.
    MatrixSupport,
    /// Prefer the tala listed first in the grammar.
    GrammarOrder,
}

impl DetectorArgs {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            d_f: self.d_f,
            window_s: self.window,
            band_hz: (self.band_low, self.band_high),
            eps_s: self.eps,
            ranking: match self.ranking {
                Ranking::MatrixSupport => CandidateRanking::MatrixSupport,
                Ranking::GrammarOrder => CandidateRanking::GrammarOrder,
            },
            ..PipelineConfig::default()
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(required = true, value_name = "WAV")]
    inputs: Vec<PathBuf>,
    /// Print a short human-readable summary instead of JSON.
    #[arg(long)]
    pretty: bool,
    #[command(flatten)]
    detector: DetectorArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Tala to render. In corpus mode, omit it to render every detectable tala.
    #[arg(long)]
    tala: Option<String>,
    /// Tempo in pulses per minute for a single clip.
    #[arg(long, default_value_t = 240.0)]
    bpm: f64,
    /// Avarts in a single clip.
    #[arg(long, default_value_t = 16)]
    avarts: u32,
    /// Output WAV for a single clip; a `.truth.json` sidecar is written next to it.
    #[arg(short, long, required_unless_present = "corpus")]
    output: Option<PathBuf>,
    /// Render this many clips per tala into --out-dir with a manifest.csv.
    #[arg(long, requires = "out_dir", conflicts_with = "output")]
    corpus: Option<usize>,
    /// Corpus tempo range `lo:hi` in pulses per minute. Defaults to a typical range per tala.
    #[arg(long, value_parser = parse_range)]
    bpm_range: Option<(f64, f64)>,
    /// Approximate corpus clip length in seconds.
    #[arg(long, default_value_t = 30.0)]
    duration: f64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Standard deviation of stroke onset jitter in seconds.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Relative amplitude jitter per stroke.
    #[arg(long, default_value_t = 0.0)]
    amp_jitter: f64,
    /// RMS of added white noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Chance that each optional bayan bol is stressed in an avart.
    #[arg(long, default_value_t = 0.0)]
    stress_prob: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    manifest: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 4)]
    workers: usize,
    /// Also write the summary and per-clip outcomes as JSON to this file.
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
    #[command(flatten)]
    detector: DetectorArgs,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if !(lo > 0.0 && hi >= lo) {
        return Err(format!("need 0 < lo <= hi, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

/// Error paired with the exit status it maps to.
struct Failure(u8, String);

impl From<TalaError> for Failure {
    fn from(e: TalaError) -> Self {
        let code = match e {
            TalaError::Io { .. } | TalaError::UnreadableFile { .. } | TalaError::UnsupportedEncoding { .. } => EXIT_IO,
            TalaError::MalformedManifest(_) | TalaError::InvalidTheka(_) | TalaError::Json(_) => EXIT_DATA,
            _ => EXIT_USAGE,
        };
        Failure(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let grammar = Grammar::resolve(cli.theka_file.as_deref())?;
    match cli.command {
        Command::Analyze(a) => analyze(a, grammar),
        Command::Synth(a) => synth(a, &grammar),
        Command::Eval(a) => eval(a, grammar),
    }
}

fn analyze(args: AnalyzeArgs, grammar: Grammar) -> Result<(), Failure> {
    let detector = Detector::new(args.detector.config(), grammar)?;
    let mut reports = Vec::new();
    let mut failed = None;
    for path in &args.inputs {
        match load_clip(path) {
            Ok(clip) => reports.push(detector.detect(&clip, Some(path.display().to_string()))),
            Err(e) => {
                eprintln!("error: {e}");
                failed = Some(Failure::from(e));
            }
        }
    }
    if args.pretty {
        emit(&reports.iter().map(pretty).collect::<String>());
    } else if reports.len() == 1 && args.inputs.len() == 1 {
        emit(&(to_json(&reports[0])? + "\n"));
    } else if !reports.is_empty() {
        emit(&(to_json(&reports)? + "\n"));
    }
    match failed {
        Some(Failure(code, _)) => Err(Failure(code, "some inputs could not be read".into())),
        None => Ok(()),
    }
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map_err(|e| Failure::from(TalaError::from(e)))
}

fn pretty(r: &AnalysisReport) -> String {
    let mut s = format!("{}\n", r.input.as_deref().unwrap_or("<clip>"));
    s += &format!("  tala:      {}\n", r.tala_name().unwrap_or("none"));
    if let Some(d) = &r.dominant {
        s += &format!("  dominant:  ({}, {}) seen {} times\n", d.pcmax_1, d.pcmax_2, d.occurrences);
    }
    if let Some(t) = &r.tempo {
        s += &format!("  tempo:     {:.2} BPM\n", t.bpm);
        if let Some(m) = t.matras_per_minute {
            s += &format!("  matras:    {m:.2} per minute\n");
        }
    }
    if let Some(m) = &r.matrix {
        let cells = m.nonzero();
        s += &format!("  matrix:    {} transitions over {} cells\n", cells.iter().map(|c| c.2).sum::<u32>(), cells.len());
    }
    for w in &r.warnings {
        s += &format!("  warning:   {} {}\n", w.code, w.message);
    }
    if let Some(e) = &r.error {
        s += &format!("  error:     {} {}\n", e.code, e.message);
    }
    s
}

fn synth(args: SynthArgs, grammar: &Grammar) -> Result<(), Failure> {
    let degradation = Degradation {
        timing_jitter_s: args.jitter,
        amplitude_jitter: args.amp_jitter,
        noise_floor: args.noise,
        optional_stress_probability: args.stress_prob,
    };
    let lookup = |name: &str| grammar.theka(name).cloned().ok_or_else(|| Failure(EXIT_USAGE, format!("unknown tala `{name}`")));

    let Some(count) = args.corpus else {
        let name = args.tala.as_deref().ok_or_else(|| Failure(EXIT_USAGE, "--tala is required for a single clip".into()))?;
        let spec = SynthSpec {
            timing_jitter_s: degradation.timing_jitter_s,
            amplitude_jitter: degradation.amplitude_jitter,
            noise_floor: degradation.noise_floor,
            optional_stress_probability: degradation.optional_stress_probability,
            seed: args.seed,
            ..SynthSpec::clean(lookup(name)?, args.bpm, args.avarts)
        };
        let (clip, truth) = synthesize(&spec)?;
        let out = args.output.expect("clap requires --output");
        let truth_path = write_synth(&clip, &truth, &out)?;
        eprintln!("wrote {} and {}", out.display(), truth_path.display());
        return Ok(());
    };

    let out_dir = args.out_dir.expect("clap requires --out-dir");
    let talas = match &args.tala {
        Some(t) => vec![t.clone()],
        None => grammar.detectable_names(),
    };
    let mut jobs = Vec::new();
    for (i, name) in talas.iter().enumerate() {
        let theka = lookup(name)?;
        let range = match args.bpm_range.or_else(|| default_bpm_range(name)) {
            Some(r) => r,
            None => return Err(Failure(EXIT_USAGE, format!("no default tempo range for `{name}`, pass --bpm-range"))),
        };
        let specs = corpus_specs(&theka, count, range, args.duration, degradation, args.seed.wrapping_add(i as u64));
        for spec in &specs {
            spec.validate()?;
        }
        jobs.extend(specs.into_iter().enumerate().map(|(k, s)| (format!("{name}_{k:03}.wav"), s)));
    }

    std::fs::create_dir_all(&out_dir).map_err(|source| TalaError::Io { path: out_dir.clone(), source })?;
    let mut records = Vec::with_capacity(jobs.len());
    for (file, spec) in jobs {
        let (clip, truth) = synthesize(&spec)?;
        write_synth(&clip, &truth, &out_dir.join(&file))?;
        records.push(AnnotationRecord { path: PathBuf::from(file), tala_name: truth.tala_name, tempo_bpm: truth.tempo_bpm });
    }
    let manifest = out_dir.join("manifest.csv");
    write_manifest(&manifest, &records)?;
    eprintln!("wrote {} clips and {}", records.len(), manifest.display());
    Ok(())
}

fn eval(args: EvalArgs, grammar: Grammar) -> Result<(), Failure> {
    let names: Vec<String> = grammar.thekas.iter().map(|t| t.tala_name.clone()).collect();
    let detectable = grammar.detectable_names();
    let detector = Detector::new(args.detector.config(), grammar)?;
    let records = read_manifest(&args.manifest, &names)?;
    let outcomes = evaluate(&records, &detector, args.workers)?;
    let summary = summarize(&outcomes, &detectable);
    emit(&summary.render());
    if let Some(path) = &args.json {
        let doc = serde_json::json!({ "summary": summary, "outcomes": outcomes });
        write_file(path, &to_json(&doc)?)?;
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|source| Failure::from(TalaError::Io { path: path.to_path_buf(), source }))
}
