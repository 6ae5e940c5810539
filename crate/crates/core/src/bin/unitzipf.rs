//! `unitzipf` command-line interface.
//!
//! Exit codes: 0 success, 2 bad input (arguments, files, data), 1 internal
//! failure. Data goes to stdout only when an output path is `-`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use unitzipf::corpus::{
    load_manifest_features, read_token_records, read_unit_records, write_unit_records,
    TokenRecord, UtteranceRecord,
};
use unitzipf::deviation::{analyze_groups, CompareOptions, DEFAULT_SAMPLE_SIZE, DEFAULT_TOP_K};
use unitzipf::ngram::{char_stream, choose_n, count_char_ngrams, count_unit_ngrams, count_words, Charset, NgramTable};
use unitzipf::powerlaw::{
    fit_band, rank_frequency, thin, FitReport, ZipfSampler, DEFAULT_THIN_POINTS, DEFAULT_TRIM_HI,
    DEFAULT_TRIM_LO,
};
use unitzipf::quantize::{
    assign, dedupe, kmeans_train, read_codebook, write_codebook, TrainOptions, DEFAULT_K,
    DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
use unitzipf::{Error, Result};

#[derive(Parser)]
#[command(name = "unitzipf", version, about = "Zipf / power-law analysis of discrete speech units, characters and words")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a k-means codebook on the feature files listed in a manifest.
    KmeansTrain(KmeansTrainArgs),
    /// Map feature frames to unit ids with a trained codebook.
    Quantize(QuantizeArgs),
    /// Count n-grams of a unit or token record file into a table CSV.
    Count(CountArgs),
    /// Print n = ceil(target length / reference length).
    ChooseN(ChooseNArgs),
    /// Fit a power law to a table CSV over a trimmed rank band.
    Fit(FitArgs),
    /// Compare groups of utterances against a reference group.
    Compare(CompareArgs),
    /// Generate unit records drawn from a Zipf distribution.
    SampleZipf(SampleZipfArgs),
    /// Write thinned rank-frequency plot data for a table CSV.
    Thin(ThinArgs),
}

#[derive(Args)]
struct KmeansTrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QuantizeArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    codebook: PathBuf,
    /// Keep repeated consecutive units.
    #[arg(long)]
    no_dedupe: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Unit,
    #[value(alias = "char")]
    Character,
    Word,
}

#[derive(Args, Clone)]
struct CharOptions {
    /// Characters kept in character streams: `any`, `english`, or `chars:<list>`.
    #[arg(long, default_value = "any", value_parser = parse_charset)]
    charset: Charset,
    /// Token joiner for character streams: `space`, `none`, or a single character.
    #[arg(long, default_value = "space", value_parser = parse_joiner)]
    joiner: Joiner,
}

#[derive(Clone, Copy)]
struct Joiner(Option<char>);

fn parse_charset(s: &str) -> std::result::Result<Charset, String> {
    match s {
        "any" => Ok(Charset::Any),
        "english" => Ok(Charset::english()),
        _ => s
            .strip_prefix("chars:")
            .map(Charset::from_chars)
            .ok_or_else(|| format!("expected any, english or chars:<list>, got {s:?}")),
    }
}

fn parse_joiner(s: &str) -> std::result::Result<Joiner, String> {
    let mut chars = s.chars();
    match (s, chars.next(), chars.next()) {
        ("space", ..) => Ok(Joiner(Some(' '))),
        ("none", ..) => Ok(Joiner(None)),
        (_, Some(c), None) => Ok(Joiner(Some(c))),
        _ => Err(format!("expected space, none or a single character, got {s:?}")),
    }
}

#[derive(Args)]
struct CountArgs {
    /// Unit records (kind unit) or token records (kinds character, word).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[command(flatten)]
    chars: CharOptions,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ChooseNArgs {
    /// Records whose symbols are the reference unit (e.g. words).
    #[arg(long = "reference")]
    reference: PathBuf,
    /// Records measured in reference symbols (e.g. speech units).
    #[arg(long)]
    target: PathBuf,
    #[arg(long, value_enum, default_value = "word")]
    ref_kind: Kind,
    #[arg(long, value_enum, default_value = "unit")]
    target_kind: Kind,
    #[command(flatten)]
    chars: CharOptions,
}

#[derive(Args, Clone, Copy)]
struct BandArgs {
    #[arg(long, default_value_t = DEFAULT_TRIM_LO)]
    trim_lo: f64,
    #[arg(long, default_value_t = DEFAULT_TRIM_HI)]
    trim_hi: f64,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    table: PathBuf,
    #[command(flatten)]
    band: BandArgs,
    /// Estimate only `a` with eta held at this value.
    #[arg(long)]
    fix_eta: Option<f64>,
    /// Fit report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Thinned plot CSV.
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long = "thin", default_value_t = DEFAULT_THIN_POINTS as u64, value_parser = clap::value_parser!(u64).range(2..))]
    thin_points: u64,
}

#[derive(Args)]
struct CompareArgs {
    /// Unit records carrying group labels.
    #[arg(long)]
    input: PathBuf,
    #[arg(long = "reference")]
    reference: String,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    sample_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "top-k", default_value_t = DEFAULT_TOP_K)]
    top_k: usize,
    #[command(flatten)]
    band: BandArgs,
    #[arg(long = "thin", default_value_t = DEFAULT_THIN_POINTS as u64, value_parser = clap::value_parser!(u64).range(2..))]
    thin_points: u64,
    /// Directory receiving report.json and one plot_<group>.csv per group.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SampleZipfArgs {
    #[arg(long)]
    vocab: usize,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long)]
    draws: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draws per emitted utterance (the last one may be shorter).
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    utterance_len: u64,
    /// Group label for every record; also prefixes the ids.
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ThinArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THIN_POINTS as u64, value_parser = clap::value_parser!(u64).range(2..))]
    max_points: u64,
    #[arg(long)]
    out: PathBuf,
}

fn is_stdout(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn write_output(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    if is_stdout(path) {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        f(&mut lock)?;
        lock.flush().map_err(|e| Error::io("<stdout>", e))
    } else {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    write_output(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))
    })
}

fn read_table(path: &Path) -> Result<NgramTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    NgramTable::read_csv(BufReader::new(file))
}

fn kmeans_train_cmd(args: KmeansTrainArgs) -> Result<()> {
    let features = load_manifest_features(&args.manifest)?;
    let opts = TrainOptions {
        k: args.k,
        seed: args.seed,
        max_iters: args.max_iters,
        tol: args.tol,
    };
    let training = kmeans_train(&features, &opts)?;
    write_codebook(&training.codebook, &args.out)?;
    eprintln!(
        "iterations: {} converged: {} inertia: {}",
        training.iterations,
        training.converged,
        training.inertia()
    );
    Ok(())
}

fn quantize_cmd(args: QuantizeArgs) -> Result<()> {
    let codebook = read_codebook(&args.codebook)?;
    let features = load_manifest_features(&args.manifest)?;
    let mut records = Vec::with_capacity(features.len());
    for m in &features {
        let mut rec = assign(&codebook, m)?;
        if !args.no_dedupe {
            rec.units = dedupe(&rec.units);
        }
        records.push(rec);
    }
    if is_stdout(&args.out) {
        write_output(&args.out, |w| {
            for r in &records {
                serde_json::to_writer(&mut *w, r).map_err(|e| Error::io("<stdout>", e.into()))?;
                w.write_all(b"\n").map_err(|e| Error::io("<stdout>", e))?;
            }
            Ok(())
        })
    } else {
        write_unit_records(&records, &args.out)
    }
}

fn count_table(input: &Path, kind: Kind, n: usize, chars: &CharOptions) -> Result<NgramTable> {
    match kind {
        Kind::Unit => count_unit_ngrams(&read_unit_records(input)?, n),
        Kind::Character => count_char_ngrams(&read_token_records(input)?, n, &chars.charset, chars.joiner.0),
        Kind::Word => {
            if n != 1 {
                return Err(Error::InvalidArgument("word counts are unigram only (n = 1)".into()));
            }
            Ok(count_words(&read_token_records(input)?))
        }
    }
}

fn count_cmd(args: CountArgs) -> Result<()> {
    let table = count_table(&args.input, args.kind, args.n, &args.chars)?;
    write_output(&args.out, |w| table.write_csv(w))
}

enum Lengths {
    Units(Vec<UtteranceRecord>),
    Tokens(Vec<TokenRecord>),
}

impl Lengths {
    fn load(path: &Path, kind: Kind) -> Result<Self> {
        Ok(match kind {
            Kind::Unit => Lengths::Units(read_unit_records(path)?),
            _ => Lengths::Tokens(read_token_records(path)?),
        })
    }

    fn ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = match self {
            Lengths::Units(r) => r.iter().map(|r| r.id.as_str()).collect(),
            Lengths::Tokens(r) => r.iter().map(|r| r.id.as_str()).collect(),
        };
        ids.sort_unstable();
        ids
    }

    fn total(&self, kind: Kind, chars: &CharOptions) -> u64 {
        match (self, kind) {
            (Lengths::Units(r), _) => r.iter().map(|r| r.units.len() as u64).sum(),
            (Lengths::Tokens(r), Kind::Character) => r
                .iter()
                .map(|r| char_stream(r, &chars.charset, chars.joiner.0).len() as u64)
                .sum(),
            (Lengths::Tokens(r), _) => r.iter().map(|r| r.tokens.len() as u64).sum(),
        }
    }
}

fn choose_n_cmd(args: ChooseNArgs) -> Result<()> {
    let reference = Lengths::load(&args.reference, args.ref_kind)?;
    let target = Lengths::load(&args.target, args.target_kind)?;
    if reference.ids() != target.ids() {
        return Err(Error::InvalidArgument(
            "reference and target files must cover the same utterance ids".into(),
        ));
    }
    let (ref_len, target_len) = (
        reference.total(args.ref_kind, &args.chars),
        target.total(args.target_kind, &args.chars),
    );
    let n = choose_n(ref_len, target_len)?;
    eprintln!(
        "reference symbols: {ref_len} target symbols: {target_len} ratio: {:.4}",
        target_len as f64 / ref_len as f64
    );
    println!("{n}");
    Ok(())
}

fn fit_cmd(args: FitArgs) -> Result<()> {
    let table = read_table(&args.table)?;
    let rf = rank_frequency(&table).map_err(|_| Error::TooFewPoints { have: 0, group: None })?;
    let fit = fit_band(&rf, args.band.trim_lo, args.band.trim_hi, args.fix_eta)?;
    write_json(&args.out, &FitReport::new(&fit, &rf))?;
    if let Some(plot) = &args.plot {
        let thinned = thin(&rf, args.thin_points as usize);
        write_output(plot, |w| thinned.write_plot_csv(w))?;
    }
    Ok(())
}

fn plot_file_name(group: &str) -> String {
    let safe: String = group
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("plot_{safe}.csv")
}

fn compare_cmd(args: CompareArgs) -> Result<()> {
    let records = read_unit_records(&args.input)?;
    let opts = CompareOptions {
        reference: args.reference,
        n: args.n,
        sample_size: args.sample_size,
        seed: args.seed,
        trim_lo: args.band.trim_lo,
        trim_hi: args.band.trim_hi,
        top_k: args.top_k,
    };
    let analysis = analyze_groups(&records, &opts)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    write_json(&args.out_dir.join("report.json"), &analysis.report)?;
    for (group, rf) in &analysis.curves {
        let thinned = thin(rf, args.thin_points as usize);
        write_output(&args.out_dir.join(plot_file_name(group)), |w| thinned.write_plot_csv(w))?;
    }
    Ok(())
}

fn sample_zipf_cmd(args: SampleZipfArgs) -> Result<()> {
    let sampler = ZipfSampler::new(args.vocab, args.eta)?;
    let mut draws = sampler.draws(args.seed).take(args.draws as usize);
    let prefix = args.group.as_deref().unwrap_or("zipf");
    let mut records = Vec::new();
    loop {
        let units: Vec<u32> = draws.by_ref().take(args.utterance_len as usize).collect();
        if units.is_empty() {
            break;
        }
        records.push(UtteranceRecord {
            id: format!("{prefix}-{:07}", records.len()),
            group: args.group.clone(),
            units,
        });
    }
    if is_stdout(&args.out) {
        write_output(&args.out, |w| {
            for r in &records {
                serde_json::to_writer(&mut *w, r).map_err(|e| Error::io("<stdout>", e.into()))?;
                w.write_all(b"\n").map_err(|e| Error::io("<stdout>", e))?;
            }
            Ok(())
        })
    } else {
        write_unit_records(&records, &args.out)
    }
}

fn thin_cmd(args: ThinArgs) -> Result<()> {
    let table = read_table(&args.table)?;
    let rf = rank_frequency(&table)?;
    let thinned = thin(&rf, args.max_points as usize);
    write_output(&args.out, |w| thinned.write_plot_csv(w))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap leaves the usage line off invalid-value errors.
            if e.kind() == ErrorKind::InvalidValue {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::KmeansTrain(a) => kmeans_train_cmd(a),
        Command::Quantize(a) => quantize_cmd(a),
        Command::Count(a) => count_cmd(a),
        Command::ChooseN(a) => choose_n_cmd(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Compare(a) => compare_cmd(a),
        Command::SampleZipf(a) => sample_zipf_cmd(a),
        Command::Thin(a) => thin_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("unitzipf: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
