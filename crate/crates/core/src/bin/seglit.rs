//! Command-line entry point.
//!
//! Settings resolve as flags, then `SEGLIT_*` environment variables, then
//! `key = value` lines of `seglit.toml` (or the file named by `--config` /
//! `SEGLIT_CONFIG`). Exit status: 0 success, 1 data error, 2 usage error.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use seglit::ingest::{load_lexicon, load_question_bank, parse_conllu_with, write_conllu, ConlluOptions, Lexicon};
use seglit::protocol::{
    generate_cohort, load_ballots, load_session_logs, tally_preferences, validate_assignment, Assignment,
};
use seglit::render::{css_for_runs, render_ansi, render_html, render_spans, span_records, HtmlOptions};
use seglit::segtag::segment_tag;
use seglit::service::{serve, Catalog, SessionStore, StoreConfig, SystemClock};
use seglit::stats::{analyze, synth_ballots, synth_cohort, AnalysisOptions, GroupSpec, SynthConfig, WorkingCorrelation};
use seglit::styler::{apply_scheme, contrast_ratio, validate_scheme, Rgb, StyleScheme, AA_NORMAL_TEXT};
use seglit::textmodel::{Document, KhmerTagset, Language, Span, Token};

const CONFIG_FILE: &str = "seglit.toml";

#[derive(Parser)]
#[command(name = "seglit", version, about = "Segmentation, syntax styling and reading-study analysis")]
#[command(after_help = "Settings resolve as: flags > SEGLIT_* environment variables > seglit.toml \
(key = value, keys named like the variables without the prefix, e.g. `seed = 7`).\n\
Exit status: 0 success, 1 data error, 2 usage error.")]
struct Cli {
    /// Config file; defaults to ./seglit.toml when present.
    #[arg(long, global = true, env = "SEGLIT_CONFIG", value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment and tag plain text into CoNLL-U.
    Segtag(SegtagArgs),
    /// Style CoNLL-U documents into span JSON.
    Style(StyleArgs),
    /// Render styled CoNLL-U documents.
    Render(RenderArgs),
    /// Generate or validate participant assignments.
    #[command(subcommand)]
    Protocol(ProtocolCommand),
    /// Tally preference ballots.
    Tally(TallyArgs),
    /// Analyze session logs into a report.
    Analyze(AnalyzeArgs),
    /// Write synthetic fixtures.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Run the session service.
    Serve(ServeArgs),
    /// Check WCAG contrast of a colour pair or a scheme.
    Contrast(ContrastArgs),
}

#[derive(Args)]
struct SegtagArgs {
    #[arg(long, env = "SEGLIT_LEXICON")]
    lexicon: PathBuf,
    /// Prefix of document ids, numbered per input line.
    #[arg(long, default_value = "doc")]
    id_prefix: String,
    /// Input text, one document per line; `-` or absent reads stdin.
    input: Option<PathBuf>,
}

#[derive(Args)]
struct SchemeArgs {
    /// Built-in scheme (khmer-bold, ja-color) or a scheme JSON file.
    #[arg(long, env = "SEGLIT_SCHEME")]
    scheme: String,
    /// Lexicon whose tagset applies to Khmer input.
    #[arg(long, env = "SEGLIT_LEXICON")]
    lexicon: Option<PathBuf>,
    /// Emit the control rendering (scheme default style throughout).
    #[arg(long)]
    control: bool,
    /// CoNLL-U input; `-` or absent reads stdin.
    input: Option<PathBuf>,
}

#[derive(Args)]
struct StyleArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Html,
    Ansi,
    Json,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long, value_enum, default_value = "html")]
    format: Format,
    /// HTML only: class attributes plus a leading stylesheet.
    #[arg(long)]
    css_classes: bool,
    #[command(flatten)]
    scheme: SchemeArgs,
}

#[derive(Subcommand)]
enum ProtocolCommand {
    /// Assignments for a cohort as JSONL.
    Gen {
        /// JSON array of text ids.
        #[arg(long)]
        texts: PathBuf,
        #[arg(long, env = "SEGLIT_PARTICIPANTS")]
        participants: usize,
        #[arg(long, env = "SEGLIT_SEED", default_value_t = 0)]
        seed: u64,
        /// Counterbalance the first condition across participants.
        #[arg(long)]
        latin_square: bool,
    },
    /// Check assignment JSONL; exits 1 on any violation.
    Validate { input: Option<PathBuf> },
}

#[derive(Args)]
struct TallyArgs {
    input: Option<PathBuf>,
    /// Shortest accepted completion time, minutes.
    #[arg(long, env = "SEGLIT_TALLY_MIN", default_value_t = 5.0)]
    min: f64,
    /// Longest accepted completion time, minutes.
    #[arg(long, env = "SEGLIT_TALLY_MAX", default_value_t = 12.0)]
    max: f64,
}

#[derive(Args)]
struct AnalyzeArgs {
    input: Option<PathBuf>,
    #[arg(long, env = "SEGLIT_BANK")]
    bank: PathBuf,
    /// Text groupings to report (all, 3-8, 5-8); repeatable.
    #[arg(long, value_delimiter = ',')]
    group: Vec<GroupSpec>,
    #[arg(long, env = "SEGLIT_MIN_MINUTES", default_value_t = 30.0)]
    min_minutes: f64,
    #[arg(long, env = "SEGLIT_CORRELATION", default_value = "exchangeable")]
    correlation: WorkingCorrelation,
    /// Print the MCQ table as CSV instead of the JSON report.
    #[arg(long)]
    csv: bool,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// A synthetic cohort: writes sessions.jsonl and bank.json.
    Cohort {
        #[arg(long)]
        out: PathBuf,
        /// JSON file of generator parameters; absent fields keep defaults.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, env = "SEGLIT_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        participants: Option<usize>,
        /// Styled logit shift on cloze accuracy.
        #[arg(long)]
        cloze_shift: Option<f64>,
    },
    /// Preference ballots as JSONL on stdout.
    Ballots {
        #[arg(long)]
        inside: usize,
        #[arg(long, default_value_t = 0)]
        outside: usize,
        #[arg(long, env = "SEGLIT_SEED", default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "SEGLIT_BANK")]
    bank: PathBuf,
    /// CoNLL-U file holding one document per bank text.
    #[arg(long, env = "SEGLIT_TEXTS")]
    texts: PathBuf,
    #[arg(long, env = "SEGLIT_SCHEME")]
    scheme: String,
    #[arg(long, env = "SEGLIT_LEXICON")]
    lexicon: Option<PathBuf>,
    #[arg(long, env = "SEGLIT_ADDR", default_value = "127.0.0.1:8080")]
    addr: std::net::SocketAddr,
    #[arg(long, env = "SEGLIT_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Abandon sessions idle this long, seconds.
    #[arg(long, env = "SEGLIT_IDLE_TIMEOUT")]
    idle_timeout: Option<u64>,
}

#[derive(Args)]
struct ContrastArgs {
    /// Foreground colour, e.g. #1976D2.
    #[arg(required_unless_present = "scheme")]
    foreground: Option<String>,
    #[arg(default_value = "#FFFFFF")]
    background: String,
    /// Check every role colour of a scheme instead.
    #[arg(long, conflicts_with = "foreground")]
    scheme: Option<String>,
    #[arg(long, default_value_t = AA_NORMAL_TEXT)]
    threshold: f64,
}

enum Failure {
    Usage(String),
    Data(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    if let Err(msg) = load_config_file() {
        eprintln!("seglit: {msg}");
        return ExitCode::from(2);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("seglit: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("seglit: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Copies config file entries into `SEGLIT_*` variables that are unset, so
/// clap sees them beneath explicit flags and the real environment.
fn load_config_file() -> Result<(), String> {
    let args: Vec<String> = std::env::args().collect();
    let from_flag = args.iter().enumerate().find_map(|(i, a)| {
        a.strip_prefix("--config=")
            .map(str::to_string)
            .or_else(|| (a == "--config").then(|| args.get(i + 1).cloned()).flatten())
    });
    let (path, required) = match from_flag.or_else(|| std::env::var("SEGLIT_CONFIG").ok()) {
        Some(p) => (PathBuf::from(p), true),
        None => (PathBuf::from(CONFIG_FILE), false),
    };
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(_) if !required => return Ok(()),
        Err(e) => return Err(format!("{}: {e}", path.display())),
    };
    let table: toml::Table = text.parse().map_err(|e| format!("{}: {e}", path.display()))?;
    for (key, value) in table {
        let var = format!("SEGLIT_{}", key.to_uppercase().replace('-', "_"));
        if std::env::var_os(&var).is_some() {
            continue;
        }
        let value = match value {
            toml::Value::String(s) => s,
            toml::Value::Integer(_) | toml::Value::Float(_) | toml::Value::Boolean(_) => value.to_string(),
            other => return Err(format!("{}: `{key}` must be a scalar, found {}", path.display(), other.type_str())),
        };
        std::env::set_var(var, value);
    }
    Ok(())
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Segtag(args) => segtag(args),
        Command::Style(args) => style(args),
        Command::Render(args) => render(args),
        Command::Protocol(cmd) => protocol(cmd),
        Command::Tally(args) => tally(args),
        Command::Analyze(args) => analyze_cmd(args),
        Command::Synth(cmd) => synth(cmd),
        Command::Serve(args) => serve_cmd(args),
        Command::Contrast(args) => contrast(args),
    }
}

fn read_input(path: Option<&Path>) -> Result<String, Failure> {
    match path {
        Some(p) if p != Path::new("-") => {
            fs::read_to_string(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))
        }
        _ => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    read_input(Some(path))
}

fn emit(text: &str) -> Outcome {
    let mut out = io::stdout().lock();
    let written = out.write_all(text.as_bytes()).and_then(|()| {
        if text.ends_with('\n') {
            Ok(())
        } else {
            out.write_all(b"\n")
        }
    });
    match written {
        // A closed downstream reader (e.g. `| head`) is not an error.
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn segtag(args: SegtagArgs) -> Outcome {
    let lexicon = load_lexicon(&read_file(&args.lexicon)?)?;
    let input = read_input(args.input.as_deref())?;
    let mut docs = Vec::new();
    for (n, line) in input.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        docs.push(segment_line(&format!("{}{}", args.id_prefix, n + 1), line, &lexicon)?);
    }
    emit(&write_conllu(&docs))
}

/// One document per line; whitespace separates sentences and is dropped.
fn segment_line(id: &str, line: &str, lexicon: &Lexicon) -> seglit::Result<Document> {
    let mut text = String::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut sentences = Vec::new();
    let mut offset = 0;
    for chunk in line.split_whitespace() {
        let first = tokens.len();
        for tok in segment_tag(chunk, lexicon) {
            let span = Span::new(tok.span.start + offset, tok.span.end + offset);
            tokens.push(Token { span, ..tok });
        }
        text.push_str(chunk);
        offset += chunk.chars().count();
        sentences.push(first..tokens.len());
    }
    Document::with_sentences(id, Language::Khmer, text, tokens, sentences)
}

fn load_scheme(name: &str) -> Result<StyleScheme, Failure> {
    if let Some(s) = StyleScheme::builtin(name) {
        return Ok(s);
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(Failure::Usage(format!(
            "unknown scheme `{name}`: expected khmer-bold, ja-color or a scheme file"
        )));
    }
    Ok(StyleScheme::from_json(&read_file(path)?)?)
}

fn load_documents(path: Option<&Path>, lexicon: Option<&Path>, scheme: &StyleScheme) -> Result<Vec<Document>, Failure> {
    let tagset = match lexicon {
        Some(p) => load_lexicon(&read_file(p)?)?.tagset().clone(),
        None => KhmerTagset::default(),
    };
    let language = match scheme.tag_scheme {
        seglit::textmodel::TagScheme::Khmer => Language::Khmer,
        seglit::textmodel::TagScheme::Ud => Language::Japanese,
    };
    let opts = ConlluOptions {
        language,
        tagset,
        ..ConlluOptions::default()
    };
    Ok(parse_conllu_with(&read_input(path)?, &opts)?)
}

fn runs_for(doc: &Document, scheme: &StyleScheme, control: bool) -> seglit::Result<Vec<seglit::styler::StyleRun>> {
    if control {
        Ok(seglit::styler::plain_runs(doc, scheme))
    } else {
        apply_scheme(doc, scheme)
    }
}

#[derive(serde::Serialize)]
struct StyledDocument<'a> {
    id: &'a str,
    text: &'a str,
    spans: Vec<seglit::render::SpanRecord>,
}

fn style(args: StyleArgs) -> Outcome {
    let a = args.scheme;
    let scheme = load_scheme(&a.scheme)?;
    let docs = load_documents(a.input.as_deref(), a.lexicon.as_deref(), &scheme)?;
    let mut out = Vec::new();
    for doc in &docs {
        let runs = runs_for(doc, &scheme, a.control)?;
        out.push(StyledDocument {
            id: &doc.id,
            text: &doc.source_text,
            spans: span_records(doc, &runs)?,
        });
    }
    emit(&serde_json::to_string_pretty(&out)?)
}

fn render(args: RenderArgs) -> Outcome {
    let a = args.scheme;
    let scheme = load_scheme(&a.scheme)?;
    let docs = load_documents(a.input.as_deref(), a.lexicon.as_deref(), &scheme)?;
    let mut all_runs = Vec::new();
    let mut rendered = Vec::new();
    for doc in &docs {
        let runs = runs_for(doc, &scheme, a.control)?;
        rendered.push(match args.format {
            Format::Html => render_html(
                doc,
                &runs,
                HtmlOptions {
                    css_classes: args.css_classes,
                },
            )?,
            Format::Ansi => render_ansi(doc, &runs)?,
            Format::Json => render_spans(doc, &runs)?,
        });
        all_runs.extend(runs);
    }
    let mut text = String::new();
    if args.css_classes && matches!(args.format, Format::Html) {
        text.push_str(&format!("<style>\n{}</style>\n", css_for_runs(&all_runs)));
    }
    for r in rendered {
        text.push_str(&r);
        text.push('\n');
    }
    emit(&text)
}

fn protocol(cmd: ProtocolCommand) -> Outcome {
    match cmd {
        ProtocolCommand::Gen {
            texts,
            participants,
            seed,
            latin_square,
        } => {
            let ids: Vec<String> = serde_json::from_str(&read_file(&texts)?)
                .map_err(|e| Failure::Data(format!("{}: expected a JSON array of text ids: {e}", texts.display())))?;
            let cohort = generate_cohort(&ids, participants, seed, latin_square)?;
            let mut out = String::new();
            for a in &cohort {
                out.push_str(&serde_json::to_string(a)?);
                out.push('\n');
            }
            emit(&out)
        }
        ProtocolCommand::Validate { input } => {
            let text = read_input(input.as_deref())?;
            let mut bad = 0;
            let mut total = 0;
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                total += 1;
                let a: Assignment =
                    serde_json::from_str(line).map_err(|e| Failure::Data(format!("line {}: {e}", i + 1)))?;
                let violations = validate_assignment(&a);
                if !violations.is_empty() {
                    bad += 1;
                    eprintln!("line {}: {}: {violations:?}", i + 1, a.participant_id);
                }
            }
            emit(&serde_json::json!({ "assignments": total, "invalid": bad }).to_string())?;
            if bad > 0 {
                return Err(Failure::Data(format!("{bad} of {total} assignments violate the design")));
            }
            Ok(())
        }
    }
}

fn tally(args: TallyArgs) -> Outcome {
    if !(args.min <= args.max) {
        return Err(Failure::Usage(format!("--min {} exceeds --max {}", args.min, args.max)));
    }
    let ballots = load_ballots(&read_input(args.input.as_deref())?)?;
    let report = tally_preferences(&ballots, args.min, args.max);
    emit(&serde_json::to_string_pretty(&report)?)
}

fn analyze_cmd(args: AnalyzeArgs) -> Outcome {
    let bank = load_question_bank(&read_file(&args.bank)?)?;
    let logs = load_session_logs(&read_input(args.input.as_deref())?)?;
    let mut groups = args.group;
    if groups.is_empty() {
        groups = GroupSpec::ALL.to_vec();
    }
    let opts = AnalysisOptions {
        min_minutes: args.min_minutes,
        correlation: args.correlation,
        groups,
    };
    let report = analyze(&logs, &bank, &opts)?;
    if args.csv {
        emit(&report.mcq_csv())
    } else {
        emit(&report.to_json()?)
    }
}

fn synth(cmd: SynthCommand) -> Outcome {
    match cmd {
        SynthCommand::Cohort {
            out,
            params,
            seed,
            participants,
            cloze_shift,
        } => {
            let mut cfg: SynthConfig = match params {
                Some(p) => serde_json::from_str(&read_file(&p)?)?,
                None => SynthConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = participants {
                cfg.participants = n;
            }
            if let Some(shift) = cloze_shift {
                cfg.styled_shift[seglit::ingest::QuestionKind::Cloze.index()] = shift;
            }
            let cohort = synth_cohort(&cfg)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("sessions.jsonl"), cohort.sessions_jsonl())?;
            fs::write(out.join("bank.json"), cohort.bank.to_json()?)?;
            Ok(())
        }
        SynthCommand::Ballots { inside, outside, seed } => {
            let mut text = String::new();
            for b in synth_ballots(inside, outside, seed) {
                text.push_str(&serde_json::to_string(&b)?);
                text.push('\n');
            }
            emit(&text)
        }
    }
}

fn serve_cmd(args: ServeArgs) -> Outcome {
    let scheme = load_scheme(&args.scheme)?;
    let bank = load_question_bank(&read_file(&args.bank)?)?;
    let docs = load_documents(Some(&args.texts), args.lexicon.as_deref(), &scheme)?;
    let catalog = Catalog::new(bank, docs, scheme)?;
    let config = StoreConfig {
        data_dir: args.data_dir,
        idle_timeout_ms: args.idle_timeout.map(|s| s * 1000),
    };
    let store = Arc::new(SessionStore::open(catalog, config, Arc::new(SystemClock))?);
    let sweep = Duration::from_secs(args.idle_timeout.map_or(60, |s| s.clamp(1, 60)));
    let runtime = tokio::runtime::Runtime::new()?;
    eprintln!("seglit: listening on {}", args.addr);
    runtime.block_on(serve(store, args.addr, sweep))?;
    Ok(())
}

fn contrast(args: ContrastArgs) -> Outcome {
    if let Some(name) = args.scheme {
        let report = validate_scheme(&load_scheme(&name)?, args.threshold);
        return emit(&serde_json::to_string_pretty(&report)?);
    }
    let fg_hex = args.foreground.unwrap_or_default();
    let fg = Rgb::parse(&fg_hex).map_err(|e| Failure::Usage(e.to_string()))?;
    let bg = Rgb::parse(&args.background).map_err(|e| Failure::Usage(e.to_string()))?;
    let ratio = contrast_ratio(fg, bg);
    emit(
        &serde_json::json!({
            "foreground": fg,
            "background": bg,
            "ratio": ratio,
            "threshold": args.threshold,
            "pass": ratio >= args.threshold,
        })
        .to_string(),
    )
}
