//! Command-line front end: generate benchmark games, solve them and play
//! the resulting strategies.
//!
//! Exit codes: 0 success, 2 input error, 3 time budget exceeded (bounds are
//! still written), 4 internal failure or a failed play verdict.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use osposg::domains::{
    gen_matching_pennies, gen_patrolling, gen_pursuit, gen_search, PatrollingParams, SearchConfig,
};
use osposg::game::Game;
use osposg::hsvi::{solve_with_progress, SolveError, SolveStatus, SolverConfig};
use osposg::io::{bounds_from_json, bounds_to_json, game_from_json, game_to_json, BoundsFile};
use osposg::play::{
    default_horizon, simulate, write_trajectories, PlayError, Player1, Player2, SimulationConfig,
};

const INPUT: u8 = 2;
const BUDGET: u8 = 3;
const INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(name = "osposg", version, about = "Solve one-sided partially observable stochastic games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a benchmark game.
    Generate {
        #[command(subcommand)]
        family: Family,
        /// Output path; standard output when absent.
        #[arg(long, short, global = true)]
        out: Option<PathBuf>,
    },
    /// Compute lower and upper bounds on the game value.
    Solve(SolveArgs),
    /// Simulate the strategies extracted from a bounds file.
    Play(PlayArgs),
}

#[derive(Subcommand)]
enum Family {
    /// Pursuers chase an evader on a grid.
    Pursuit {
        #[arg(long, default_value_t = 3)]
        rows: usize,
        #[arg(long, default_value_t = 3)]
        cols: usize,
        #[arg(long, default_value_t = 2)]
        pursuers: usize,
        #[arg(long, default_value_t = 0.95)]
        gamma: f64,
    },
    /// Defender units guard two zones against an attacker.
    Search {
        #[arg(long, default_value_t = 3)]
        width: usize,
        #[arg(long, value_enum, default_value_t = SearchUnits::OneOne)]
        config: SearchUnits,
        #[arg(long, default_value_t = 0.95)]
        gamma: f64,
    },
    /// A patroller protects the vertices of a random graph.
    Patrolling {
        #[arg(long, default_value_t = 7)]
        vertices: usize,
        /// Edge probability of the random graph.
        #[arg(long, default_value_t = 0.25)]
        p: f64,
        #[arg(long, default_value_t = 3)]
        attack_time: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.95)]
        gamma: f64,
    },
    /// Matching pennies as a two-stage game.
    Pennies {
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SearchUnits {
    #[value(name = "1-1")]
    OneOne,
    #[value(name = "2-1")]
    TwoOne,
}

#[derive(Args)]
struct SolveArgs {
    game: PathBuf,
    /// Bounds output path.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Neighbourhood parameter; derived from epsilon when absent.
    #[arg(long)]
    neighborhood: Option<f64>,
    #[arg(long, default_value_t = 0.9)]
    eta: f64,
    #[arg(long, default_value_t = 0.025)]
    init_beta: f64,
    /// Seconds for each initialisation run.
    #[arg(long, default_value_t = 1200.0)]
    init_time_limit: f64,
    /// Seconds for the search.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.10)]
    prune_growth: f64,
    /// Progress records, one JSON object per line.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Full solver statistics as JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Selfplay,
    P1VsUniform,
    UniformVsP2,
}

#[derive(Args)]
struct PlayArgs {
    game: PathBuf,
    bounds: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Selfplay)]
    mode: Mode,
    #[arg(long, default_value_t = 2000)]
    episodes: usize,
    /// Stages per episode; long enough for a truncation error of 0.5 when
    /// absent.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Truncation error above which a warning is printed.
    #[arg(long, default_value_t = 0.5)]
    truncation_tol: f64,
    /// Episode trajectories, one JSON object per line.
    #[arg(long)]
    trajectories: Option<PathBuf>,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait Classify<T> {
    fn or_exit(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_exit(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code,
            error: e.into(),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { family, out } => generate(family, out.as_deref()),
        Command::Solve(args) => solve(args),
        Command::Play(args) => play(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load_game(path: &Path) -> Result<Game, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .or_exit(INPUT)?;
    game_from_json(&text)
        .with_context(|| format!("loading game {}", path.display()))
        .or_exit(INPUT)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .or_exit(INPUT)
}

fn generate(family: Family, out: Option<&Path>) -> Result<u8, Failure> {
    let game = match family {
        Family::Pursuit {
            rows,
            cols,
            pursuers,
            gamma,
        } => gen_pursuit(rows, cols, pursuers, gamma),
        Family::Search {
            width,
            config,
            gamma,
        } => {
            let config = match config {
                SearchUnits::OneOne => SearchConfig::OneOne,
                SearchUnits::TwoOne => SearchConfig::TwoOne,
            };
            gen_search(width, config, gamma)
        }
        Family::Patrolling {
            vertices,
            p,
            attack_time,
            seed,
            gamma,
        } => gen_patrolling(&PatrollingParams {
            vertices,
            edge_prob: p,
            attack_time,
            costs: None,
            gamma,
            seed,
        }),
        Family::Pennies { gamma } => gen_matching_pennies(gamma),
    }
    .or_exit(INPUT)?;
    let text = game_to_json(&game);
    match out {
        Some(path) => fs::write(path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))
            .or_exit(INPUT)?,
        None => println!("{text}"),
    }
    eprintln!(
        "{} states, {} transitions",
        game.num_states(),
        game.num_transitions()
    );
    Ok(0)
}

fn solve(args: SolveArgs) -> Result<u8, Failure> {
    let game = load_game(&args.game)?;
    let cfg = SolverConfig {
        epsilon: args.epsilon,
        neighborhood: args.neighborhood,
        eta: args.eta,
        init_beta: args.init_beta,
        init_time_limit: Some(seconds(args.init_time_limit)?),
        time_limit: args.time_limit.map(seconds).transpose()?,
        prune_growth: args.prune_growth,
        seed: args.seed,
        ..SolverConfig::default()
    };
    let mut log = args.log.as_deref().map(create).transpose()?;
    let mut log_error = None;
    let result = solve_with_progress(&game, &cfg, &mut |record| {
        if let Some(w) = &mut log {
            let line = serde_json::to_string(record).expect("record serialises");
            if let Err(e) = writeln!(w, "{line}") {
                log_error.get_or_insert(e);
            }
        }
    });
    let result = match result {
        Ok(r) => r,
        Err(e @ SolveError::InvalidConfig(_)) => return Err(e).or_exit(INPUT),
        Err(e) => return Err(e).or_exit(INTERNAL),
    };
    if let Some(e) = log_error {
        return Err(e).context("writing the progress log").or_exit(INPUT);
    }
    if let Some(mut w) = log {
        w.flush().context("writing the progress log").or_exit(INPUT)?;
    }

    let stats = &result.stats;
    let file = BoundsFile::new(
        &game,
        &result.lb,
        &result.ub,
        result.status,
        stats.final_gap,
        &cfg,
    );
    fs::write(&args.out, bounds_to_json(&file))
        .with_context(|| format!("writing {}", args.out.display()))
        .or_exit(INPUT)?;
    if let Some(path) = &args.stats {
        let text = serde_json::to_string_pretty(stats).expect("stats serialise");
        fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .or_exit(INPUT)?;
    }
    println!(
        "status {} lower {:.6} upper {:.6} gap {:.6} trials {} |Gamma| {} |Upsilon| {} time {:.2}s",
        result.status,
        stats.lower,
        stats.upper,
        stats.final_gap,
        stats.trials,
        result.lb.size(),
        result.ub.size(),
        stats.timing.total
    );
    Ok(match result.status {
        SolveStatus::Converged => 0,
        SolveStatus::WallClockExceeded => {
            eprintln!("time limit reached before the gap fell to {}", cfg.epsilon);
            BUDGET
        }
    })
}

fn seconds(s: f64) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(s)
        .map_err(|_| anyhow!("invalid duration {s}"))
        .or_exit(INPUT)
}

fn play(args: PlayArgs) -> Result<u8, Failure> {
    let game = load_game(&args.game)?;
    let text = fs::read_to_string(&args.bounds)
        .with_context(|| format!("reading {}", args.bounds.display()))
        .or_exit(INPUT)?;
    let (lb, ub) = bounds_from_json(&text)
        .and_then(|f| f.bounds(&game))
        .with_context(|| format!("loading bounds {}", args.bounds.display()))
        .or_exit(INPUT)?;
    let b0 = game.initial_belief();
    let lower = lb.value(b0).or_exit(INTERNAL)?;
    let upper = ub.value(b0).or_exit(INTERNAL)?;

    let cfg = SimulationConfig {
        horizon: args.horizon.unwrap_or_else(|| default_horizon(&game)),
        episodes: args.episodes,
        seed: args.seed,
        keep_trajectories: args.trajectories.is_some(),
    };
    let (p1, p2) = match args.mode {
        Mode::Selfplay => (Player1::Resolving(&lb), Player2::Replay(&ub)),
        Mode::P1VsUniform => (Player1::Resolving(&lb), Player2::Uniform),
        Mode::UniformVsP2 => (Player1::Uniform, Player2::Replay(&ub)),
    };
    let report = simulate(&game, p1, p2, &cfg).map_err(|e| {
        let code = match e {
            PlayError::InvalidConfig(_) => INPUT,
            _ => INTERNAL,
        };
        Failure {
            code,
            error: e.into(),
        }
    })?;
    if let Some(path) = &args.trajectories {
        let mut w = create(path)?;
        write_trajectories(&mut w, &report.results)
            .and_then(|_| w.flush())
            .with_context(|| format!("writing {}", path.display()))
            .or_exit(INPUT)?;
    }

    let tau = report.truncation;
    if tau > args.truncation_tol {
        eprintln!(
            "warning: horizon {} leaves a truncation error of {tau:.4} (above {}); the verdict is widened by it",
            cfg.horizon, args.truncation_tol
        );
    }
    let slack = tau + 3.0 * report.std_error;
    let (lo, hi) = match args.mode {
        Mode::Selfplay => (lower - slack, upper + slack),
        Mode::P1VsUniform => (lower - slack, f64::INFINITY),
        Mode::UniformVsP2 => (f64::NEG_INFINITY, upper + slack),
    };
    let ok = (lo..=hi).contains(&report.mean);
    println!(
        "episodes {} horizon {} mean {:.6} se {:.6} truncation {:.6} lower {:.6} upper {:.6} resets {}",
        report.episodes,
        report.horizon,
        report.mean,
        report.std_error,
        tau,
        lower,
        upper,
        report.p1_resets
    );
    println!(
        "verdict {}: mean in [{lo:.6}, {hi:.6}]",
        if ok { "pass" } else { "FAIL" }
    );
    Ok(if ok { 0 } else { INTERNAL })
}
