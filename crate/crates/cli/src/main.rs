use std::io::{BufReader, Write};
use std::net::TcpListener;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use clap::{Args, Parser, Subcommand};
use cradle::agents::{make_agent, Agent};
use cradle::error::Error;
use cradle::probes::{milestone_report, preferential_looking, service_word_latency, ProbeSettings};
use cradle::runner::{run_episode, train_associator};
use cradle::sdr::{noise_sweep, CodecParams, SdrStream};
use cradle::session::protocol::{default_endpoint, serve_connection, serve_tcp, Outlet, Registry, SharedOutlet};
use cradle::session::{replay, Session, SessionConfig};

const EXIT_USAGE: u8 = 2;
const EXIT_AGENT: u8 = 3;
const EXIT_VERIFY: u8 = 4;

/// Exposures the associator gets before a probe when it has to be trained.
const PROBE_EXPOSURES: u64 = 50;

#[derive(Parser)]
#[command(name = "cradle", version, about = "Developmental sandbox: run, record, replay, probe and serve sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an in-process episode and print a summary.
    Run(RunArgs),
    /// Like run, but also write an episode log.
    Record {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-execute a log and check every step.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
    /// Serve the line protocol over TCP or stdio.
    Serve {
        /// Address to bind; defaults to $CRADLE_ENDPOINT or 127.0.0.1:7878.
        #[arg(long, conflicts_with = "stdio")]
        listen: Option<String>,
        #[arg(long)]
        stdio: bool,
    },
    /// Evaluation probes.
    #[command(subcommand)]
    Probe(ProbeCommand),
    /// Speech codec tools.
    #[command(subcommand)]
    Codec(CodecCommand),
    /// Print the session config JSON schema.
    Schema,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "reflex")]
    agent: String,
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ProbeArgs {
    /// Agent under test; an associator is trained first.
    #[arg(long, default_value = "random_gaze")]
    agent: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum ProbeCommand {
    /// Preferential looking after hearing a word.
    Looking {
        #[command(flatten)]
        common: ProbeArgs,
        #[arg(long, default_value = "WATER")]
        word: String,
        /// Defaults to the word itself.
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value = "BALL")]
        distractor: String,
    },
    /// Steps until the caregiver brings what a word names.
    Service {
        #[command(flatten)]
        common: ProbeArgs,
        #[arg(long, default_value = "WATER")]
        word: String,
    },
    /// First words and comprehension of taught words.
    Milestones {
        #[command(flatten)]
        common: ProbeArgs,
        #[arg(long, value_delimiter = ',', default_value = "WATER,MILK")]
        words: Vec<String>,
    },
}

#[derive(Subcommand)]
enum CodecCommand {
    /// Print the codebook for a seed.
    Build {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Encode text to a JSON frame stream.
    Encode {
        #[arg(long)]
        text: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Decode a JSON frame stream from a file.
    Decode {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Decode accuracy under per-frame bit flips.
    NoiseSweep {
        /// Inclusive range such as 0..5, or a single count.
        #[arg(long, default_value = "0..5", value_parser = parse_range)]
        flips: (usize, usize),
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let bad = |_| format!("expected N or A..B, got {s:?}");
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (a.parse().map_err(bad)?, b.parse().map_err(bad)?);
            if a > b {
                return Err(format!("empty range {s:?}"));
            }
            Ok((a, b))
        }
        None => s.parse().map(|n| (n, n)).map_err(bad),
    }
}

/// A failure and the exit code it maps to.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(EXIT_USAGE, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args, None),
        Command::Record { run, out } => cmd_run(&run, Some(out)),
        Command::Replay { log } => cmd_replay(&log),
        Command::Serve { listen, stdio } => cmd_serve(listen, stdio),
        Command::Probe(p) => cmd_probe(p),
        Command::Codec(c) => cmd_codec(c),
        Command::Schema => {
            print!("{}", cradle::session::config_schema());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("cradle: {msg}");
            ExitCode::from(code)
        }
    }
}

fn load_config(path: Option<&PathBuf>, seed: Option<u64>) -> Result<SessionConfig, Failure> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", p.display())))?;
            SessionConfig::from_json(&text)?
        }
        None => SessionConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `f`, turning a panic inside the agent or the loop into exit 3.
fn guarded<T>(f: impl FnOnce() -> cradle::Result<T>) -> Result<T, Failure> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r.map_err(Failure::from),
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            Err(Failure(EXIT_AGENT, format!("agent failure: {msg}")))
        }
    }
}

fn cmd_run(args: &RunArgs, out: Option<PathBuf>) -> Outcome {
    let mut cfg = load_config(args.config.as_ref(), args.seed)?;
    cfg.record = out;
    let mut agent = make_agent(&args.agent, cfg.seed, &cfg.codec)?;
    let mut session = Session::new(cfg)?;
    let summary = guarded(|| run_episode(&mut session, agent.as_mut(), args.steps, |_, _| false))?;
    print!("{}", summary.lines());
    Ok(())
}

fn cmd_replay(path: &PathBuf) -> Outcome {
    let file = std::fs::File::open(path).map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", path.display())))?;
    let report = replay(BufReader::new(file))?;
    match report.divergence {
        None => {
            println!("verified {} entries", report.entries);
            Ok(())
        }
        Some(d) => {
            println!("divergence at t {} in {}: {}", d.t, d.field, d.detail);
            Err(Failure(EXIT_VERIFY, format!("replay diverged at t {}", d.t)))
        }
    }
}

fn cmd_serve(listen: Option<String>, stdio: bool) -> Outcome {
    let registry = Arc::new(Registry::new());
    {
        let registry = registry.clone();
        ctrlc::set_handler(move || {
            registry.end_all();
            std::process::exit(0);
        })
        .map_err(|e| Failure(EXIT_USAGE, format!("signal handler: {e}")))?;
    }
    if stdio {
        let outlet: SharedOutlet = Arc::new(Mutex::new(Outlet::new(std::io::stdout())));
        registry.add(outlet.clone());
        let stdin = std::io::stdin();
        serve_connection(stdin.lock(), &outlet)?;
        return Ok(());
    }
    let addr = listen.unwrap_or_else(default_endpoint);
    let listener = TcpListener::bind(&addr).map_err(|e| Failure(EXIT_USAGE, format!("cannot bind {addr}: {e}")))?;
    log::info!("listening on {addr}");
    eprintln!("listening on {}", listener.local_addr().map(|a| a.to_string()).unwrap_or(addr));
    serve_tcp(listener, registry)?;
    Ok(())
}

fn probe_settings(common: &ProbeArgs) -> ProbeSettings {
    ProbeSettings {
        seed: common.seed,
        trials: common.trials,
        ..Default::default()
    }
}

/// Builds agents for probe trials. The associator is trained once under
/// the probe seed and cloned for each trial.
fn agent_source(name: &str, settings: &ProbeSettings) -> Result<Box<dyn FnMut(u64) -> Box<dyn Agent>>, Failure> {
    let codec = settings.session.codec.clone();
    make_agent(name, 0, &codec)?;
    if name == "associator" {
        let cfg = SessionConfig {
            seed: settings.seed,
            ..settings.session.clone()
        };
        let (trained, _) = guarded(|| train_associator(cfg, PROBE_EXPOSURES))?;
        return Ok(Box::new(move |_| Box::new(trained.clone())));
    }
    let name = name.to_string();
    Ok(Box::new(move |seed| make_agent(&name, seed, &codec).expect("name checked")))
}

fn cmd_probe(cmd: ProbeCommand) -> Outcome {
    let (common, report) = match cmd {
        ProbeCommand::Looking { common, word, target, distractor } => {
            let settings = probe_settings(&common);
            let mut make = agent_source(&common.agent, &settings)?;
            let target = target.unwrap_or_else(|| word.clone());
            let report = guarded(|| preferential_looking(&mut make, &word, &target, &distractor, &settings))?;
            (common, report)
        }
        ProbeCommand::Service { common, word } => {
            let settings = probe_settings(&common);
            let mut make = agent_source(&common.agent, &settings)?;
            let mut agent = make(settings.seed);
            let out = guarded(|| service_word_latency(agent.as_mut(), &word, None, settings.seed, &settings))?;
            let v = serde_json::to_value(&out).expect("outcome serializes");
            if common.json {
                println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            } else {
                match out.latency {
                    Some(l) => println!("latency {l}"),
                    None => println!("latency -"),
                }
                println!("cried {}", out.cried);
                println!("serviced {}", out.serviced.join(","));
            }
            return Ok(());
        }
        ProbeCommand::Milestones { common, words } => {
            let settings = probe_settings(&common);
            let mut make = agent_source(&common.agent, &settings)?;
            let taught: Vec<&str> = words.iter().map(String::as_str).collect();
            let report = guarded(|| milestone_report(&mut make, &taught, &settings))?;
            (common, report)
        }
    };
    if common.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.table());
    }
    Ok(())
}

fn cmd_codec(cmd: CodecCommand) -> Outcome {
    let params = CodecParams::default();
    let mut stdout = std::io::stdout().lock();
    let io = |e: std::io::Error| Failure(EXIT_USAGE, e.to_string());
    match cmd {
        CodecCommand::Build { seed } => {
            let cb = params.codebook(seed)?;
            for (ch, frame) in cb.entries() {
                let idx: Vec<String> = frame.active().iter().map(u32::to_string).collect();
                writeln!(stdout, "{ch} {}", idx.join(" ")).map_err(io)?;
            }
        }
        CodecCommand::Encode { text, seed } => {
            let cb = params.codebook(seed)?;
            writeln!(stdout, "{}", params.encode(&cb, &text)?.to_json()).map_err(io)?;
        }
        CodecCommand::Decode { stream, seed } => {
            let cb = params.codebook(seed)?;
            let text = std::fs::read_to_string(&stream)
                .map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", stream.display())))?;
            let s = SdrStream::from_json(&text, params.frames_per_symbol)?;
            let decoded = cb.decode_stream(&s, params.min_overlap);
            writeln!(stdout, "{}", decoded.words().join(" ")).map_err(io)?;
        }
        CodecCommand::NoiseSweep { flips, trials, seed } => {
            let cb = params.codebook(seed)?;
            let rows = noise_sweep(&cb, &params, flips.0..=flips.1, trials, seed)?;
            writeln!(stdout, "flips  trials  correct  accuracy  mean_overlap").map_err(io)?;
            for r in rows {
                writeln!(
                    stdout,
                    "{:>5}  {:>6}  {:>7}  {:>8.4}  {:>12.4}",
                    r.flips,
                    r.trials,
                    r.correct,
                    r.accuracy(),
                    r.mean_overlap
                )
                .map_err(io)?;
            }
        }
    }
    Ok(())
}
