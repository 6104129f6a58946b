//! `blockbot`: run the queue service, run a robot, compile block programs
//! and talk to a running service.

mod compile;
mod config;
mod exit;
mod output;
mod remote;
mod robot;
mod serve;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::FileConfig;
use crate::exit::Failure;
use crate::output::Output;

#[derive(Parser)]
#[command(name = "blockbot", version, about = "Block-programmed robot: service, robot runtime and tools")]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true, env = "BLOCKBOT_CONFIG")]
    config: Option<PathBuf>,

    /// JSON lines on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,

    /// More logging on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the queue service.
    Serve(ServeArgs),
    /// Run a robot against a service, or offline on a perception script.
    Robot(RobotArgs),
    /// Compile a block program (no network access).
    Compile(CompileArgs),
    /// Compile and enqueue a block program.
    Submit(SubmitArgs),
    /// Send perception events to a running robot.
    Events(EventsArgs),
    /// Switch a running robot between command and autonomous mode.
    Mode(ModeArgs),
    /// Show queue and robot state.
    State(StateArgs),
    /// Send one command directly, replacing the queue for `stop`.
    Direct(DirectArgs),
    /// Clear the queue.
    Reset(AccountArgs),
    /// Create an account; prints the user id and robot key.
    Signup(CredentialArgs),
    /// Start a session; prints the token.
    Signin(CredentialArgs),
}

#[derive(Args)]
struct ServeArgs {
    /// Listen address; port 0 picks a free port.
    #[arg(long, env = "BLOCKBOT_BIND")]
    bind: Option<String>,
    /// Data directory, created if its parent exists.
    #[arg(long, env = "BLOCKBOT_DATA_DIR")]
    data: Option<PathBuf>,
    /// Serve static console files from this directory.
    #[arg(long)]
    console: Option<PathBuf>,
    #[arg(long, env = "BLOCKBOT_SESSION_TTL_MS")]
    session_ttl_ms: Option<u64>,
    /// Skip fsync on writes (faster, not crash-safe).
    #[arg(long)]
    no_fsync: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DriverKind {
    Sim,
    Stub,
}

#[derive(Args)]
struct RobotArgs {
    /// Queue service base URL. Without one the robot runs offline.
    #[arg(long, env = "BLOCKBOT_SERVICE_URL")]
    service: Option<String>,
    #[arg(long, env = "BLOCKBOT_ROBOT_KEY", hide_env_values = true)]
    key: Option<String>,
    #[arg(long, value_enum)]
    driver: Option<DriverKind>,
    /// Initial pose as `x,y,heading`.
    #[arg(long, allow_hyphen_values = true)]
    pose: Option<String>,
    /// Scripted perception events (JSON lines).
    #[arg(long)]
    perception: Option<PathBuf>,
    /// Playback speed for the perception script; 0 replays without delays.
    #[arg(long, default_value_t = 1.0)]
    replay_speed: f64,
    /// Start in autonomous mode.
    #[arg(long)]
    autonomous: bool,
    /// Finish motions instantly instead of in real time.
    #[arg(long)]
    instant: bool,
    /// Remember executed sequence numbers in this file.
    #[arg(long)]
    journal: Option<PathBuf>,
    /// Local state/events/mode endpoint, e.g. 127.0.0.1:8701.
    #[arg(long)]
    telemetry: Option<String>,
    /// Mirroring table and anchors (TOML).
    #[arg(long)]
    mirror: Option<PathBuf>,
    #[arg(long)]
    retry_base_ms: Option<u64>,
    #[arg(long)]
    retry_budget: Option<u32>,
    #[arg(long)]
    poll_timeout_ms: Option<u64>,
    /// Exit once the queue is empty.
    #[arg(long)]
    until_idle: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Commands,
    Script,
}

#[derive(Args)]
struct CompileArgs {
    /// Block program file, or `-` for stdin.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "commands")]
    emit: Emit,
    /// Only validate; print diagnostics.
    #[arg(long)]
    check: bool,
}

#[derive(Args, Clone)]
struct AccountArgs {
    #[arg(long, env = "BLOCKBOT_SERVICE_URL")]
    service: Option<String>,
    /// Session token; otherwise --email/--password sign in first.
    #[arg(long, env = "BLOCKBOT_TOKEN", hide_env_values = true)]
    token: Option<String>,
    #[arg(long, env = "BLOCKBOT_EMAIL")]
    email: Option<String>,
    #[arg(long, env = "BLOCKBOT_PASSWORD", hide_env_values = true)]
    password: Option<String>,
}

#[derive(Args)]
struct SubmitArgs {
    /// Block program file, or `-` for stdin.
    input: PathBuf,
    #[command(flatten)]
    account: AccountArgs,
    /// Follow the queue until it is idle.
    #[arg(long)]
    watch: bool,
}

#[derive(Args)]
struct EventsArgs {
    /// JSON-lines event file, or `-` for stdin.
    input: PathBuf,
    /// Robot telemetry address.
    #[arg(long)]
    robot: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeName {
    Command,
    Autonomous,
}

#[derive(Args)]
struct ModeArgs {
    #[arg(value_enum)]
    mode: ModeName,
    #[arg(long)]
    robot: Option<String>,
}

#[derive(Args)]
struct StateArgs {
    /// Ask the robot's telemetry endpoint instead of the service.
    #[arg(long)]
    robot: Option<String>,
    #[command(flatten)]
    account: AccountArgs,
}

#[derive(Args)]
struct DirectArgs {
    /// Wire-form command, e.g. `stop` or `{"op":"say","text":"hi"}`.
    command: String,
    #[command(flatten)]
    account: AccountArgs,
}

#[derive(Args)]
struct CredentialArgs {
    #[arg(long, env = "BLOCKBOT_SERVICE_URL")]
    service: Option<String>,
    #[arg(long, env = "BLOCKBOT_EMAIL")]
    email: Option<String>,
    #[arg(long, env = "BLOCKBOT_PASSWORD", hide_env_values = true)]
    password: Option<String>,
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn,blockbot=info",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).with_target(false).init();
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Internal(format!("cannot start runtime: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let out = Output::new(cli.json);
    match cli.command {
        Cmd::Compile(a) => compile::run(&a.input, a.emit == Emit::Script, a.check, &out),
        Cmd::Serve(a) => runtime()?.block_on(serve::run(a, &file, &out)),
        Cmd::Robot(a) => runtime()?.block_on(robot::run(a, &file, &out)),
        Cmd::Submit(a) => runtime()?.block_on(remote::submit(a, &file, &out)),
        Cmd::Events(a) => runtime()?.block_on(remote::events(a, &file, &out)),
        Cmd::Mode(a) => runtime()?.block_on(remote::mode(a, &file, &out)),
        Cmd::State(a) => runtime()?.block_on(remote::state(a, &file, &out)),
        Cmd::Direct(a) => runtime()?.block_on(remote::direct(a, &file, &out)),
        Cmd::Reset(a) => runtime()?.block_on(remote::reset(a, &file, &out)),
        Cmd::Signup(a) => runtime()?.block_on(remote::signup(a, &file, &out)),
        Cmd::Signin(a) => runtime()?.block_on(remote::signin(a, &file, &out)),
    }
}

fn main() {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    if let Err(f) = run(cli) {
        eprintln!("blockbot: {}", f.message());
        std::process::exit(f.code());
    }
}
