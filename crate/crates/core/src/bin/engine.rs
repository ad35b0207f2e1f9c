//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 bad usage, 3 bad config,
//! 4 bad or missing weights, 5 I/O failure.

use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mixnet::bench::{run_bench, BenchSettings};
use mixnet::board::{Board, Color};
use mixnet::book::balanced_openings;
use mixnet::codebook::Codebook;
use mixnet::config::{Backend, ConfigError, EngineConfig, EvaluatorKind, WEIGHTS_ENV};
use mixnet::matches::{selfplay_match, MatchSettings};
use mixnet::pattern::{LinePattern, NUM_PATTERNS};
use mixnet::protocol::{run, Protocol};
use mixnet::search::Limits;
use mixnet::service::{serve, AppState};
use mixnet::weights::{ModelError, NetConfig, NetWeights};

#[derive(Parser)]
#[command(name = "engine", version, about = "Gomoku engine with a pattern-codebook evaluator")]
struct Cli {
    /// Engine config (TOML).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Weight file; overrides the config, which overrides MIXNET_WEIGHTS.
    #[arg(short, long, global = true)]
    weights: Option<PathBuf>,
    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    Black,
    White,
}

#[derive(Subcommand)]
enum Command {
    /// Gomocup protocol on stdin/stdout (the default).
    Proto {
        /// Search to this fixed depth (or playout count) and ignore the clock.
        #[arg(long)]
        depth: Option<u32>,
    },
    /// Fixed benchmark suite.
    Bench {
        #[arg(long, default_value_t = 3)]
        depth: u32,
        #[arg(long, default_value_t = 400)]
        playouts: u64,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Self-play match of the configured engine against an opponent.
    Match {
        /// Opponent config; defaults to alpha-beta on the shape evaluator.
        #[arg(long)]
        opponent: Option<PathBuf>,
        /// Number of book openings; each is played with both colours.
        #[arg(long, default_value_t = 24)]
        openings: usize,
        /// Fixed depth (alpha-beta) per move.
        #[arg(long, default_value_t = 3)]
        depth: u32,
        /// Fixed playouts (MCTS) per move.
        #[arg(long, default_value_t = 800)]
        playouts: u64,
        #[arg(long, default_value_t = 15)]
        size: usize,
        /// Write game records here.
        #[arg(long)]
        pgn: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// HTTP analysis service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Bake the codebook of a weight file into a cache file.
    Bake {
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a weight file with seeded random weights.
    InitWeights {
        #[arg(long, default_value = "small")]
        model: String,
        #[arg(long, default_value_t = mixnet::weights::DEFAULT_INIT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// List line patterns as `id,left,right,cells`.
    DumpPatterns {
        /// Stop after this many patterns.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Feature map of a position as CSV `row,col,channel,value`.
    DumpFeatures {
        /// Position file: one row per line (`x`, `o`, `.`), then `black` or `white`.
        position: PathBuf,
        #[arg(long, value_enum, default_value_t = Side::Black)]
        perspective: Side,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Config(ConfigError::Model(_)) | CliError::Model(_) => 4,
            CliError::Config(ConfigError::Io(_)) | CliError::Io(_) => 5,
            CliError::Config(_) => 3,
        }
    }
}

fn load_config(cli: &Cli) -> Result<EngineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => EngineConfig::load(p)?,
        None => EngineConfig::default(),
    };
    if cli.weights.is_some() {
        cfg.weights = cli.weights.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run_cli(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run_cli(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli)?;
    match cli.command.unwrap_or(Command::Proto { depth: None }) {
        Command::Proto { depth } => {
            let searcher = cfg.build_searcher(None)?;
            let mut proto = Protocol::new(cfg, searcher);
            if let Some(d) = depth {
                proto = proto.with_fixed_depth(d);
            }
            run(proto, io::BufReader::new(io::stdin()), io::stdout().lock())?;
        }
        Command::Bench { depth, playouts, json } => {
            let model = cfg.load_model()?;
            let settings = BenchSettings {
                board_size: 15,
                ab_depth: depth,
                mcts_playouts: playouts,
            };
            let report = run_bench(model, &settings).map_err(|e| CliError::Runtime(e.to_string()))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("plain data"));
            } else {
                println!("{}", report.summary());
            }
        }
        Command::Match {
            opponent,
            openings,
            depth,
            playouts,
            size,
            pgn,
            json,
        } => {
            let opp_cfg = match opponent {
                Some(p) => EngineConfig::load(p)?,
                None => EngineConfig {
                    backend: Backend::Alphabeta,
                    evaluator: EvaluatorKind::Shape,
                    ..EngineConfig::default()
                },
            };
            let book = balanced_openings();
            if openings == 0 || openings > book.len() {
                return Err(CliError::Usage(format!("--openings must be in 1..={}", book.len())));
            }
            let mut a_cfg = cfg;
            a_cfg.board_size = size;
            let mut b_cfg = opp_cfg;
            b_cfg.board_size = size;
            let mut a = a_cfg.build_searcher(None)?;
            let mut b = b_cfg.build_searcher(None)?;
            let settings = MatchSettings {
                board_size: size,
                limits: Limits {
                    depth: Some(depth),
                    playouts: Some(playouts),
                    ..Limits::default()
                },
                max_plies: size * size,
            };
            let mut out = match pgn {
                Some(p) => Some(BufWriter::new(std::fs::File::create(p)?)),
                None => None,
            };
            let mut write_err = None;
            let (report, _) = selfplay_match(a.as_mut(), b.as_mut(), &book[..openings], &settings, |rec| {
                log::info!("{} {} {}", rec.opening, rec.result_tag(), rec.moves.len());
                if let Some(w) = out.as_mut() {
                    if let Err(e) = writeln!(w, "{}", rec.to_pgn()) {
                        write_err.get_or_insert(e);
                    }
                }
            })
            .map_err(|e| CliError::Runtime(e.to_string()))?;
            if let Some(e) = write_err {
                return Err(e.into());
            }
            if let Some(mut w) = out {
                w.flush()?;
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("plain data"));
            } else {
                println!(
                    "{} vs {}: +{} -{} ={} score {:.3} elo {:+.0} [{:+.0}, {:+.0}] crashes {}/{}",
                    report.engine_a,
                    report.engine_b,
                    report.wins,
                    report.losses,
                    report.draws,
                    report.score,
                    report.elo,
                    report.elo_low,
                    report.elo_high,
                    report.crashes_a,
                    report.crashes_b
                );
            }
        }
        Command::Serve { port, host } => {
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| CliError::Usage(format!("bad address: {e}")))?;
            let state = AppState::new(cfg)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(state, addr))?;
        }
        Command::Bake { out } => {
            let path = cfg
                .weights_path()
                .ok_or_else(|| CliError::Usage(format!("bake needs --weights or {WEIGHTS_ENV}")))?;
            let weights = NetWeights::load(&path)?;
            let cb = Codebook::bake(&weights)?;
            cb.save_cache(&out, weights.digest())?;
            println!("baked {} into {}", path.display(), out.display());
        }
        Command::InitWeights { model, seed, out } => {
            let config = NetConfig::by_name(&model).ok_or_else(|| CliError::Usage(format!("unknown model `{model}`")))?;
            NetWeights::random(config, seed)?.save(&out)?;
            println!("wrote {}", out.display());
        }
        Command::DumpPatterns { limit } => {
            let mut w = BufWriter::new(io::stdout().lock());
            writeln!(w, "id,left,right,cells")?;
            for id in 0..limit.unwrap_or(NUM_PATTERNS).min(NUM_PATTERNS) {
                let p = LinePattern::from_index(id as u32).expect("id is in range");
                let cells: String = p.cells().iter().map(|d| char::from(b'0' + d)).collect();
                writeln!(w, "{id},{},{},{cells}", p.left(), p.right())?;
            }
            w.flush()?;
        }
        Command::DumpFeatures { position, perspective } => {
            let text = std::fs::read_to_string(&position)?;
            let board = Board::parse_position(&text).map_err(|e| CliError::Usage(e.to_string()))?;
            let model = cfg.load_model()?;
            let acc = model.accumulator(&board).map_err(|e| CliError::Runtime(e.to_string()))?;
            let color = match perspective {
                Side::Black => Color::Black,
                Side::White => Color::White,
            };
            let fm = acc.read_feature_map(color);
            let mut w = BufWriter::new(io::stdout().lock());
            writeln!(w, "row,col,channel,value")?;
            for r in 0..fm.height {
                for c in 0..fm.width {
                    for k in 0..fm.channels {
                        writeln!(w, "{r},{c},{k},{}", fm.value(r, c, k))?;
                    }
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}
