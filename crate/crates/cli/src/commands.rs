use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use datadock_core::{DataHub, HubConfig, Registration};
use tokio::net::TcpListener;
use tokio::sync::Notify;

use crate::{AdminCreateArgs, BackupArgs, RestoreArgs, ServeArgs};

const DRAIN_LIMIT: Duration = Duration::from_secs(10);

fn open_existing(data_dir: &Path) -> Result<DataHub> {
    if !data_dir.is_dir() {
        bail!("data dir {} does not exist", data_dir.display());
    }
    DataHub::open(HubConfig::new(data_dir)).context("opening store")
}

pub fn serve(args: ServeArgs) -> Result<()> {
    let config = HubConfig {
        token_ttl_hours: args.token_ttl_hours,
        max_file_bytes: args.max_file_mb * 1024 * 1024,
        allow_anon_read: args.allow_anon_read,
        ..HubConfig::new(&args.data.data_dir)
    };
    let hub = DataHub::open(config).context("opening store")?;
    let app = datadock_api::app(Arc::new(hub), args.cors_origin.as_deref())
        .map_err(|e| anyhow::anyhow!("invalid CORS origin: {}", e.message))?;

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting runtime")?;
    runtime.block_on(async move {
        let addr = SocketAddr::new(args.host, args.port);
        let listener = TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        let bound = listener.local_addr()?;
        println!("listening on http://{bound}");
        io::stdout().flush()?;
        tracing::info!(%bound, data_dir = %args.data.data_dir.display(), "serving");

        let stop = Arc::new(Notify::new());
        let trigger = stop.clone();
        let server = tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async move { trigger.notified().await })
                .await
        });
        shutdown_signal().await;
        tracing::info!("shutting down, draining in-flight requests");
        stop.notify_one();
        match tokio::time::timeout(DRAIN_LIMIT, server).await {
            Ok(joined) => joined.context("server task")?.context("serving")?,
            Err(_) => tracing::warn!("drain limit reached, dropping remaining connections"),
        }
        Ok(())
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = ctrl_c => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => ctrl_c.await,
        }
    }
    #[cfg(not(unix))]
    ctrl_c.await;
}

fn read_password(from_stdin: bool) -> Result<String> {
    if from_stdin {
        let mut line = String::new();
        io::stdin()
            .lock()
            .read_line(&mut line)
            .context("reading password from stdin")?;
        return Ok(line.trim_end_matches(['\r', '\n']).to_owned());
    }
    let first = rpassword::prompt_password("Password: ").context("reading password")?;
    let again = rpassword::prompt_password("Repeat password: ").context("reading password")?;
    if first != again {
        bail!("passwords do not match");
    }
    Ok(first)
}

pub fn admin_create(args: AdminCreateArgs) -> Result<()> {
    let hub = DataHub::open(HubConfig::new(&args.data.data_dir)).context("opening store")?;
    let password = read_password(args.password_stdin)?;
    let display_name = args.display_name.as_deref().unwrap_or(&args.username);
    let user = hub.create_account(Registration {
        username: &args.username,
        email: &args.email,
        password: &password,
        display_name,
        is_admin: true,
    })?;
    println!("created admin {} ({})", user.username, user.id);
    Ok(())
}

pub fn backup(args: BackupArgs) -> Result<()> {
    let hub = open_existing(&args.data.data_dir)?;
    let parent = match args.out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    // Written beside the target and renamed, so a failed run leaves no partial archive.
    let scratch = tempfile::Builder::new()
        .prefix(".datadock-backup-")
        .tempfile_in(parent)
        .with_context(|| format!("cannot write to {}", parent.display()))?;
    let mut out = BufWriter::new(scratch);
    let report = hub.backup(&mut out)?;
    let scratch = out.into_inner().map_err(|e| e.into_error())?;
    scratch.as_file().sync_all()?;
    scratch
        .persist(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} ({} blobs, {} bytes of blob data)",
        args.out.display(),
        report.blobs,
        report.bytes
    );
    Ok(())
}

pub fn restore(args: RestoreArgs) -> Result<()> {
    let archive =
        File::open(&args.from).with_context(|| format!("opening {}", args.from.display()))?;
    datadock_core::backup::restore(BufReader::new(archive), &args.data.data_dir)?;
    println!(
        "restored {} into {}",
        args.from.display(),
        args.data.data_dir.display()
    );
    Ok(())
}
