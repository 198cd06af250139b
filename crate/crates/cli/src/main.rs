mod commands;

use std::net::IpAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use datadock_core::config::{DEFAULT_MAX_FILE_MB, DEFAULT_PORT, DEFAULT_TOKEN_TTL_HOURS};

/// Self-hosted research data hub.
#[derive(Parser)]
#[command(name = "datadock", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API until interrupted.
    Serve(ServeArgs),
    /// Account administration.
    #[command(subcommand)]
    Admin(AdminCommand),
    /// Write a tar archive of the database and blobs.
    Backup(BackupArgs),
    /// Rebuild an empty data directory from a backup archive.
    Restore(RestoreArgs),
}

#[derive(Args)]
struct DataDir {
    /// Directory holding the database and blobs.
    #[arg(long, env = "DATADOCK_DATA_DIR", default_value = "./data")]
    data_dir: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    data: DataDir,
    /// Port to listen on; 0 picks a free one.
    #[arg(long, env = "DATADOCK_PORT", default_value_t = DEFAULT_PORT)]
    port: u16,
    /// Address to bind.
    #[arg(long, env = "DATADOCK_HOST", default_value = "0.0.0.0")]
    host: IpAddr,
    #[arg(long, env = "DATADOCK_TOKEN_TTL_HOURS", default_value_t = DEFAULT_TOKEN_TTL_HOURS,
          value_parser = clap::value_parser!(u64).range(1..))]
    token_ttl_hours: u64,
    #[arg(long, env = "DATADOCK_MAX_FILE_MB", default_value_t = DEFAULT_MAX_FILE_MB,
          value_parser = clap::value_parser!(u64).range(1..))]
    max_file_mb: u64,
    /// Serve public datasets to requests without a token.
    #[arg(long, env = "DATADOCK_ALLOW_ANON_READ", default_value_t = false,
          action = clap::ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    allow_anon_read: bool,
    /// Origin allowed to call the API from a browser, e.g. the web UI's URL.
    #[arg(long, env = "DATADOCK_CORS_ORIGIN")]
    cors_origin: Option<String>,
}

#[derive(Subcommand)]
enum AdminCommand {
    /// Create an administrator account.
    Create(AdminCreateArgs),
}

#[derive(Args)]
struct AdminCreateArgs {
    #[command(flatten)]
    data: DataDir,
    #[arg(long)]
    username: String,
    #[arg(long)]
    email: String,
    /// Defaults to the username.
    #[arg(long)]
    display_name: Option<String>,
    /// Read the password from the first line of stdin instead of prompting.
    #[arg(long)]
    password_stdin: bool,
}

#[derive(Args)]
struct BackupArgs {
    #[command(flatten)]
    data: DataDir,
    /// Archive to write.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct RestoreArgs {
    #[command(flatten)]
    data: DataDir,
    /// Archive produced by `backup`.
    #[arg(long, short)]
    from: PathBuf,
}

fn main() -> ExitCode {
    // Usage errors exit with 2 inside parse().
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();

    let result = match cli.command {
        Command::Serve(args) => commands::serve(args),
        Command::Admin(AdminCommand::Create(args)) => commands::admin_create(args),
        Command::Backup(args) => commands::backup(args),
        Command::Restore(args) => commands::restore(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
