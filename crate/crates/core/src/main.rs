use clap::{Parser, Subcommand};
use rtlmark::config::Config;
use rtlmark::detect::{calibrate, detect, NullModel, Verdict};
use rtlmark::embed::{embed, plan, verify, EmbedError, Manifest};
use rtlmark::eval::{evaluate, load_corpus, rename_attack, AttackSpec, Class, EvalConfig};
use rtlmark::key::WatermarkKey;
use rtlmark::netlist::{parse_netlist, synthesize, trace_watermark, CellLibrary};
use rtlmark::payload::{encode_payload, DEFAULT_MAX_PAYLOAD};
use rtlmark::rules::RuleId;
use rtlmark::verilog::{parse, SourceText};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EX_USAGE: u8 = 64;
const EX_DATAERR: u8 = 65;
const EX_SOFTWARE: u8 = 70;
const EX_IOERR: u8 = 74;

#[derive(Parser)]
#[command(name = "rtlmark", version, about = "Keyed watermarking for Verilog RTL")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, default_value = "rtlmark.toml")]
    config: PathBuf,
    /// Hex key file; overrides `key_file` in the configuration.
    #[arg(long, global = true)]
    key: Option<PathBuf>,
    /// Null model written by `calibrate`; built-in defaults otherwise.
    #[arg(long, global = true)]
    null: Option<PathBuf>,
    /// Detection threshold; overrides the configuration.
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a fresh random key.
    Keygen {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Watermark a Verilog file and write a manifest next to it.
    Embed {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// `model=NAME,dev=NAME`
        #[arg(long, default_value = "model=unknown,dev=unknown")]
        payload: String,
        /// Manifest path; defaults to OUTPUT.manifest.json.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Score a Verilog file. Exit 0 watermarked, 1 clean, 2 error.
    Detect {
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Synthesize (or read) a netlist and trace the payload.
    NetlistDetect {
        input: PathBuf,
        /// Input is already a gate-level netlist.
        #[arg(long)]
        netlist: bool,
        #[arg(long)]
        top: Option<String>,
        /// Carrier width to search; every vector of at least 24 bits otherwise.
        #[arg(long)]
        width: Option<u32>,
    },
    /// Rename a fraction of the internal identifiers.
    Attack {
        input: PathBuf,
        #[arg(long)]
        fraction: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Embed and detect over a corpus with eligible/ and clean/ subdirectories.
    Evaluate {
        corpus: PathBuf,
        /// Rename fraction; repeatable.
        #[arg(long)]
        attack: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[arg(long)]
        netlist: bool,
        #[arg(long, default_value = "model=unknown,dev=unknown")]
        payload: String,
        /// Directory for report.json and report.txt.
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
    /// Estimate per-rule false-match rates on clean sources.
    Calibrate {
        corpus: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print the transformation catalog.
    Rules,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Io(String),
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EX_USAGE,
            Failure::Io(_) => EX_IOERR,
            Failure::Data(_) => EX_DATAERR,
            Failure::Internal(_) => EX_SOFTWARE,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Io(m) | Failure::Data(m) | Failure::Internal(m) => m,
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn source(path: &Path) -> Result<SourceText> {
    Ok(SourceText::new(read(path)?, path.display().to_string()))
}

struct Env {
    config: Config,
    key_path: Option<PathBuf>,
    null_path: Option<PathBuf>,
    tau: f64,
}

impl Env {
    fn key(&self) -> Result<WatermarkKey> {
        let path = self
            .key_path
            .as_ref()
            .ok_or_else(|| Failure::Usage("a key is required: pass --key FILE or set key_file in the configuration".into()))?;
        WatermarkKey::from_hex(read(path)?.trim()).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
    }

    fn null(&self) -> Result<NullModel> {
        match &self.null_path {
            None => Ok(NullModel::default()),
            Some(p) => serde_json::from_str(&read(p)?).map_err(|e| Failure::Data(format!("{}: {e}", p.display()))),
        }
    }
}

fn parse_payload(spec: &str) -> Result<(String, String)> {
    let mut model = None;
    let mut dev = None;
    for part in spec.split(',') {
        match part.split_once('=') {
            Some(("model", v)) => model = Some(v.to_string()),
            Some(("dev" | "developer", v)) => dev = Some(v.to_string()),
            _ => return Err(Failure::Usage(format!("bad payload field `{part}`; expected model=..,dev=.."))),
        }
    }
    match (model, dev) {
        (Some(m), Some(d)) => Ok((m, d)),
        _ => Err(Failure::Usage("payload needs both model= and dev=".into())),
    }
}

fn write_key(path: &Path, key: &WatermarkKey, force: bool) -> Result<()> {
    use std::io::Write;
    let mut opts = std::fs::OpenOptions::new();
    opts.write(true);
    if force {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut f = opts.open(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    writeln!(f, "{}", key.to_hex()).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn top_of(src: &SourceText, given: Option<String>) -> Result<String> {
    given
        .or_else(|| rtlmark::eval::infer_top(src))
        .ok_or_else(|| Failure::Data(format!("{}: no top module", src.origin)))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config = Config::load(Some(&cli.config)).map_err(|e| Failure::Usage(e.to_string()))?;
    let tau = cli.tau.unwrap_or(config.tau);
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Failure::Usage(format!("tau must lie in (0,1), got {tau}")));
    }
    let env = Env {
        key_path: cli.key.clone().or_else(|| config.key_file.clone()),
        null_path: cli.null.clone().or_else(|| config.null_model.clone()),
        config,
        tau,
    };
    match cli.cmd {
        Cmd::Keygen { output, force } => {
            let key = WatermarkKey::generate();
            write_key(&output, &key, force)?;
            println!("key {} written to {}", key.id(), output.display());
        }
        Cmd::Embed {
            input,
            output,
            payload,
            manifest,
        } => {
            let key = env.key()?;
            let null = env.null()?;
            let (model, dev) = parse_payload(&payload)?;
            let payload = encode_payload(&model, &dev, &key, DEFAULT_MAX_PAYLOAD).map_err(|e| Failure::Usage(e.to_string()))?;
            let src = source(&input)?;
            let ast = parse(&src).map_err(|e| Failure::Data(e.to_string()))?;
            let mut objective = env.config.objective().map_err(|e| Failure::Usage(e.to_string()))?;
            objective.tau = env.tau;
            let p = plan(&ast, &key, &payload, &objective, &null).map_err(|e| Failure::Data(e.to_string()))?;
            let doc = embed(&ast, &p, &key, &payload, &env.config.budget).map_err(|e| match e {
                EmbedError::NotEquivalent(_) => Failure::Internal(e.to_string()),
                _ => Failure::Data(e.to_string()),
            })?;
            for d in &doc.diagnostics {
                log::warn!("{d}");
            }
            let report = verify(&doc, &key, &null, env.tau);
            if report.verdict != Verdict::Watermarked {
                return Err(Failure::Internal(format!("embedded output scores {:.4}, below tau", report.confidence)));
            }
            write(&output, &doc.source.content)?;
            let manifest_path = manifest.unwrap_or_else(|| PathBuf::from(format!("{}.manifest.json", output.display())));
            write(&manifest_path, &Manifest::new(&doc, &key, &payload).to_json())?;
            let rules: Vec<&str> = p.selected.iter().map(|s| s.rule.code()).collect();
            println!(
                "embedded {} of {} applicable sites [{}], confidence {:.4}",
                p.selected.len(),
                p.applicable,
                rules.join(","),
                report.confidence
            );
        }
        Cmd::Detect { input, json } => {
            let key = env.key()?;
            let null = env.null()?;
            let src = source(&input)?;
            let report = detect(&src, &key, &null, env.tau);
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                for r in report.breakdown.iter().filter(|r| r.present) {
                    println!("{:<4} p={:.4} w={:.3} +{:.4}", r.rule.code(), r.p, r.weight, r.contribution);
                }
                for d in &report.diagnostics {
                    println!("note: {d}");
                }
                println!("score {:.4} confidence {:.4} -> {:?}", report.score, report.confidence, report.verdict);
            }
            if !report.diagnostics.is_empty() && report.evidence.is_empty() {
                return Ok(ExitCode::from(2));
            }
            return Ok(ExitCode::from(if report.verdict == Verdict::Watermarked { 0 } else { 1 }));
        }
        Cmd::NetlistDetect { input, netlist, top, width } => {
            let key = env.key()?;
            let src = source(&input)?;
            let text = if netlist {
                src.content.clone()
            } else {
                let top = top_of(&src, top)?;
                synthesize(&src.content, &top, &env.config.synth).map_err(|e| match e {
                    rtlmark::netlist::SynthError::Io(m) => Failure::Io(m),
                    other => Failure::Data(other.to_string()),
                })?
            };
            let graph = parse_netlist(&text, &src.origin).map_err(|e| Failure::Data(e.to_string()))?;
            let ev = trace_watermark(&graph, &CellLibrary::default(), &key, width);
            println!("{}", serde_json::to_string_pretty(&ev).expect("evidence serializes"));
            return Ok(ExitCode::from(if ev.found { 0 } else { 1 }));
        }
        Cmd::Attack {
            input,
            fraction,
            seed,
            output,
        } => {
            let src = source(&input)?;
            let out = rename_attack(&src, &AttackSpec::rename(fraction, seed)).map_err(|e| match e {
                rtlmark::eval::AttackError::BadSpec(m) => Failure::Usage(m),
                other => Failure::Data(other.to_string()),
            })?;
            write(&output, &out.source.content)?;
            println!("renamed {} of {} identifiers", out.renames.len(), out.eligible);
        }
        Cmd::Evaluate {
            corpus,
            attack,
            seeds,
            netlist,
            payload,
            out,
        } => {
            let key = env.key()?;
            let null = env.null()?;
            let (model, developer) = parse_payload(&payload)?;
            for f in &attack {
                AttackSpec::rename(*f, 0).validate().map_err(|e| Failure::Usage(e.to_string()))?;
            }
            let corpus = load_corpus(&corpus).map_err(|e| Failure::Io(e.to_string()))?;
            let mut objective = env.config.objective().map_err(|e| Failure::Usage(e.to_string()))?;
            objective.tau = env.tau;
            let cfg = EvalConfig {
                tau: env.tau,
                objective,
                budget: env.config.budget.clone(),
                model,
                developer,
                attack_fractions: attack,
                attack_seeds: seeds,
                netlist,
                synth: env.config.synth.clone(),
                workers: env.config.workers,
            };
            let report = evaluate(&corpus, &key, &null, &cfg);
            std::fs::create_dir_all(&out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
            write(&out.join("report.json"), &report.to_json())?;
            let table = report.to_table();
            write(&out.join("report.txt"), &table)?;
            print!("{table}");
            if report.equivalence_failures > 0 {
                return Err(Failure::Internal(format!("{} equivalence failures", report.equivalence_failures)));
            }
        }
        Cmd::Calibrate { corpus, output } => {
            let key = env.key()?;
            let files: Vec<SourceText> = match load_corpus(&corpus) {
                Ok(c) => c.of(Class::Clean).map(|e| e.source.clone()).collect(),
                Err(_) => {
                    let mut v: Vec<PathBuf> = std::fs::read_dir(&corpus)
                        .map_err(|e| Failure::Io(format!("{}: {e}", corpus.display())))?
                        .filter_map(|e| e.ok().map(|e| e.path()))
                        .filter(|p| p.extension().is_some_and(|x| x == "v"))
                        .collect();
                    v.sort();
                    v.iter().map(|p| source(p)).collect::<Result<_>>()?
                }
            };
            let null = calibrate(&files, &key).map_err(|e| Failure::Data(e.to_string()))?;
            write(&output, &(serde_json::to_string_pretty(&null).expect("null model serializes") + "\n"))?;
            println!("calibrated on {} files", null.corpus_size);
        }
        Cmd::Rules => {
            println!("{:<4} {:<30} {:<11} applies to", "id", "name", "granularity");
            for r in RuleId::ALL {
                println!("{:<4} {:<30} {:<11} {}", r.code(), r.name(), format!("{:?}", r.granularity()), r.applicability());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EX_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let is_detect = matches!(cli.cmd, Cmd::Detect { .. });
    match run(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("rtlmark: {}", f.message());
            if is_detect && !matches!(f, Failure::Usage(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::from(f.code())
            }
        }
    }
}
