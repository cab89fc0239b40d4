use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use sitcon::inference::{defuzzify, infer, DefuzzMethod, PremiseSpec, PremiseVector};
use sitcon::kb::{load_knowledge_base, parse_document, validate_knowledge_base, KnowledgeBase, RepresentationLevel};
use sitcon::reasoning::Policy;
use sitcon::service::{serve, Registry, RegistryConfig, Session, SessionConfig, TickEvent};
use sitcon::sim::{run_closed_loop, trajectory_csv, DisturbanceProfile, EnvironmentState, LoopConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_KB: u8 = 2;

#[derive(Parser)]
#[command(name = "sitcon", version, about = "Situational fuzzy control engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a knowledge base document and list its violations.
    Validate { kb: PathBuf },
    /// Run rule inference on a premises file (JSON map: variable -> term, number or membership function).
    Infer {
        kb: PathBuf,
        premises: PathBuf,
        #[arg(long, value_enum)]
        level: Option<Level>,
        #[arg(long, value_enum, default_value_t = Method::Centroid)]
        method: Method,
    },
    /// Interactive dialog session on stdin/stdout.
    Repl {
        kb: PathBuf,
        #[arg(long, default_value = "en")]
        lang: String,
        #[arg(long, default_value = "wisdom")]
        policy: Policy,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        /// Print full JSON responses instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run the closed loop and write the trajectory as CSV.
    Simulate {
        kb: PathBuf,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Half-width of the uniform stock disturbance; 0 disables it.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value = "wisdom")]
        policy: Policy,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
    },
    /// Serve the HTTP and WebSocket API.
    Serve {
        #[arg(long, env = "PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "KB_DIR")]
        kb_dir: Option<PathBuf>,
        #[arg(long, env = "LOG_DIR")]
        log_dir: Option<PathBuf>,
        /// Extra KB documents to register, id taken from the file name.
        #[arg(long = "kb")]
        kbs: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    RxCodes,
    Usc,
    SemanticFrames,
}

impl From<Level> for RepresentationLevel {
    fn from(l: Level) -> Self {
        match l {
            Level::RxCodes => RepresentationLevel::RxCodes,
            Level::Usc => RepresentationLevel::Usc,
            Level::SemanticFrames => RepresentationLevel::SemanticFrames,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Centroid,
    MaxOfMaxima,
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn kb_error(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_KB, message: message.into() }
}

fn read_kb_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| kb_error(format!("{}: {e}", path.display())))
}

fn load_kb(path: &Path) -> Result<KnowledgeBase, Failure> {
    load_knowledge_base(&read_kb_text(path)?).map_err(|e| kb_error(format!("{}: {e}", path.display())))
}

fn validate(path: &Path) -> Result<(), Failure> {
    let kb = parse_document(&read_kb_text(path)?).map_err(|e| kb_error(format!("{}: {e}", path.display())))?;
    let report = validate_knowledge_base(&kb);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if !report.is_empty() {
        for v in &report.violations {
            eprintln!("error: {v}");
        }
        return Err(kb_error(format!("{}: {} violation(s)", path.display(), report.violations.len())));
    }
    println!(
        "ok: {} universes, {} variables, {} rules, {} situations, {} acts, languages {}",
        kb.universes.len(),
        kb.variables.len(),
        kb.rules.len(),
        kb.situations.len(),
        kb.acts.len(),
        kb.languages().join(",")
    );
    Ok(())
}

fn run_infer(kb_path: &Path, premises_path: &Path, level: Option<Level>, method: Method) -> Result<(), Failure> {
    let kb = load_kb(kb_path)?;
    let text = std::fs::read_to_string(premises_path).map_err(|e| usage(format!("{}: {e}", premises_path.display())))?;
    let specs: BTreeMap<String, PremiseSpec> =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", premises_path.display())))?;
    let premises = PremiseVector::resolve(&specs, &kb).map_err(|e| usage(e.to_string()))?;
    let result = infer(&premises, &kb, level.map(Into::into)).map_err(|e| usage(e.to_string()))?;
    let method = match method {
        Method::Centroid => DefuzzMethod::Centroid,
        Method::MaxOfMaxima => DefuzzMethod::MaxOfMaxima,
    };
    let crisp: BTreeMap<&str, _> = result
        .output
        .iter()
        .filter_map(|(name, set)| Some((name.as_str(), defuzzify(set, kb.variable_universe(name)?, method))))
        .collect();
    let out = json!({ "result": result, "crisp": crisp });
    println!("{}", serde_json::to_string_pretty(&out).expect("json output"));
    Ok(())
}

fn repl(kb_path: &Path, lang: String, policy: Policy, theta: f64, as_json: bool) -> Result<(), Failure> {
    let kb = Arc::new(load_kb(kb_path)?);
    let config = SessionConfig { language: lang, policy, theta, ..SessionConfig::default() };
    let mut session = Session::new("repl", "cli", kb, config).map_err(|e| usage(e.to_string()))?;
    let stdin = io::stdin();
    let mut stdout = io::stdout();
    for line in stdin.lock().lines() {
        let line = line.map_err(|e| usage(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let output = match line {
            ":quit" | ":q" => break,
            ":state" => {
                let snapshot = session.snapshot().map_err(|e| usage(e.to_string()))?;
                serde_json::to_string_pretty(&snapshot).expect("json output")
            }
            _ if line.starts_with(":tick") => {
                let n = line[5..].trim().parse::<usize>().unwrap_or(1);
                let events = session.stream_ticks(n).map_err(|e| usage(e.to_string()))?;
                events.iter().map(|e| tick_line(e, as_json)).collect::<Vec<_>>().join("\n")
            }
            _ => {
                let response = session.dialog_turn(line);
                if as_json {
                    serde_json::to_string(&response).expect("json output")
                } else {
                    response.text
                }
            }
        };
        writeln!(stdout, "{output}").map_err(|e| usage(e.to_string()))?;
    }
    Ok(())
}

fn tick_line(event: &TickEvent, as_json: bool) -> String {
    if as_json {
        return serde_json::to_string(event).expect("json output");
    }
    match event {
        TickEvent::Tick { csv, .. } => csv.join(","),
        TickEvent::Summary { ticks, state, last_decision, .. } => {
            let vars: Vec<String> = state.variables.iter().map(|(k, v)| format!("{k}={v}")).collect();
            format!("{ticks} tick(s); {}; last decision {}", vars.join(" "), last_decision.as_deref().unwrap_or("-"))
        }
    }
}

fn simulate(kb_path: &Path, steps: usize, seed: u64, noise: f64, policy: Policy, theta: f64) -> Result<(), Failure> {
    let kb = Arc::new(load_kb(kb_path)?);
    if noise.is_nan() || noise < 0.0 {
        return Err(usage("--noise must be non-negative"));
    }
    let disturbance = if noise > 0.0 {
        DisturbanceProfile::Seeded { seed, bounds: [("stock".to_string(), (-noise, noise))].into() }
    } else {
        DisturbanceProfile::None
    };
    let config = LoopConfig { policy, theta, disturbance };
    let initial = EnvironmentState::initial(&kb.plant);
    let trajectory = run_closed_loop(kb.clone(), initial, steps, &config).map_err(|e| kb_error(e.to_string()))?;
    let csv = trajectory_csv(&kb.plant, &trajectory).map_err(|e| usage(e.to_string()))?;
    print!("{csv}");
    Ok(())
}

fn run_server(host: &str, port: u16, kb_dir: Option<PathBuf>, log_dir: Option<PathBuf>, kbs: Vec<PathBuf>) -> Result<(), Failure> {
    let addr: SocketAddr = format!("{host}:{port}").parse().map_err(|e| usage(format!("bad address: {e}")))?;
    let registry = Arc::new(Registry::new(RegistryConfig { kb_dir, log_dir }));
    for path in &kbs {
        let id = path
            .file_name()
            .and_then(|n| n.to_str())
            .map(|n| n.split('.').next().unwrap_or(n).to_string())
            .ok_or_else(|| usage(format!("bad kb path {}", path.display())))?;
        registry.put_kb(Some(&id), &read_kb_text(path)?).map_err(|e| kb_error(format!("{}: {e}", path.display())))?;
    }
    let loaded = registry.bootstrap().map_err(|e| kb_error(e.to_string()))?;
    let ids: Vec<String> = registry.kb_summaries().into_iter().map(|s| s.id).collect();
    eprintln!("knowledge bases: {} ({} from KB_DIR)", ids.join(", "), loaded.len());
    let runtime = tokio::runtime::Runtime::new().map_err(|e| usage(e.to_string()))?;
    eprintln!("listening on http://{addr}");
    runtime.block_on(serve(addr, registry)).map_err(|e| usage(format!("server: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let result = match cli.command {
        Command::Validate { kb } => validate(&kb),
        Command::Infer { kb, premises, level, method } => run_infer(&kb, &premises, level, method),
        Command::Repl { kb, lang, policy, theta, json } => repl(&kb, lang, policy, theta, json),
        Command::Simulate { kb, steps, seed, noise, policy, theta } => simulate(&kb, steps, seed, noise, policy, theta),
        Command::Serve { port, host, kb_dir, log_dir, kbs } => run_server(&host, port, kb_dir, log_dir, kbs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("sitcon: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
