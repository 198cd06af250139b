//! Streaming multipart upload.
//!
//! The async side walks the multipart body and forwards each file's chunks
//! through a small bounded channel to one blocking task that owns the
//! [`UploadSession`](datadock_core::UploadSession). At most a few chunks per
//! request are in memory at any time, whatever the file sizes.

use std::io::{self, Read};

use axum::extract::multipart::{Field, Multipart, MultipartError};
use axum::http::StatusCode;
use bytes::{Buf, Bytes};
use datadock_core::{DataHub, Dataset, DatasetMeta, Error, UserId};
use tokio::sync::mpsc;

use crate::error::{ApiError, ApiResult};
use crate::extract::AppState;

/// Chunks in flight per file.
const CHUNK_WINDOW: usize = 4;
const MAX_META_BYTES: usize = 1 << 20;

enum Step {
    File {
        path: String,
        content_type: Option<String>,
        chunks: mpsc::Receiver<io::Result<Bytes>>,
    },
    Finish(DatasetMeta),
}

/// Adapts a chunk channel to `Read` for the blocking side.
struct ChannelReader {
    chunks: mpsc::Receiver<io::Result<Bytes>>,
    current: Bytes,
}

impl Read for ChannelReader {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        while !self.current.has_remaining() {
            match self.chunks.blocking_recv() {
                Some(Ok(chunk)) => self.current = chunk,
                Some(Err(e)) => return Err(e),
                None => return Ok(0),
            }
        }
        let n = buf.len().min(self.current.len());
        buf[..n].copy_from_slice(&self.current[..n]);
        self.current.advance(n);
        Ok(n)
    }
}

fn run_session(
    hub: &DataHub,
    owner: UserId,
    mut steps: mpsc::Receiver<Step>,
) -> datadock_core::Result<Dataset> {
    let mut session = hub.begin_upload(owner);
    while let Some(step) = steps.blocking_recv() {
        match step {
            Step::File {
                path,
                content_type,
                chunks,
            } => {
                let reader = ChannelReader {
                    chunks,
                    current: Bytes::new(),
                };
                session.add_file(&path, content_type.as_deref(), reader)?;
            }
            Step::Finish(meta) => return session.finish(&meta),
        }
    }
    Err(Error::validation(
        "body",
        "upload ended before it was complete",
    ))
}

fn multipart_error(err: MultipartError) -> ApiError {
    if err.status() == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "too_large", err.body_text())
    } else {
        ApiError::bad_request(format!("malformed multipart body: {}", err.body_text()))
    }
}

async fn read_meta(mut field: Field<'_>) -> ApiResult<DatasetMeta> {
    let mut raw = Vec::new();
    while let Some(chunk) = field.chunk().await.map_err(multipart_error)? {
        if raw.len() + chunk.len() > MAX_META_BYTES {
            return Err(ApiError::validation("meta", "metadata part is too large"));
        }
        raw.extend_from_slice(&chunk);
    }
    serde_json::from_slice(&raw).map_err(|e| ApiError::validation("meta", e.to_string()))
}

/// Decodes the body and creates the dataset. Exactly one `meta` part (JSON)
/// and at least one `file` part, whose filename is the relative path.
pub async fn create_from_multipart(
    state: &AppState,
    owner: UserId,
    mut multipart: Multipart,
) -> ApiResult<Dataset> {
    let (steps, rx) = mpsc::channel(1);
    let hub = state.hub.clone();
    let worker = tokio::task::spawn_blocking(move || run_session(&hub, owner, rx));

    let streamed = stream_parts(&mut multipart, &steps).await;
    match streamed {
        Ok(Some(meta)) => {
            // If the worker already failed, its error is reported below.
            let _ = steps.send(Step::Finish(meta)).await;
            drop(steps);
            worker
                .await
                .map_err(ApiError::internal)?
                .map_err(ApiError::from)
        }
        // The worker stopped reading: it hit an error of its own.
        Ok(None) => {
            drop(steps);
            match worker.await.map_err(ApiError::internal)? {
                Err(e) => Err(e.into()),
                Ok(_) => Err(ApiError::internal("upload worker finished early")),
            }
        }
        Err(e) => {
            drop(steps);
            let _ = worker.await;
            Err(e)
        }
    }
}

/// Forwards file parts to the worker. Returns the metadata once the body
/// is exhausted, or `None` if the worker hung up.
async fn stream_parts(
    multipart: &mut Multipart,
    steps: &mpsc::Sender<Step>,
) -> ApiResult<Option<DatasetMeta>> {
    let mut meta = None;
    let mut files = 0usize;
    while let Some(mut field) = multipart.next_field().await.map_err(multipart_error)? {
        match field.name() {
            Some("meta") => {
                if meta.is_some() {
                    return Err(ApiError::validation(
                        "meta",
                        "exactly one meta part is allowed",
                    ));
                }
                meta = Some(read_meta(field).await?);
            }
            Some("file") => {
                let path = field.file_name().map(str::to_owned).ok_or_else(|| {
                    ApiError::validation("path", "file part is missing a filename")
                })?;
                let content_type = field.content_type().map(str::to_owned);
                let (chunk_tx, chunks) = mpsc::channel(CHUNK_WINDOW);
                let step = Step::File {
                    path,
                    content_type,
                    chunks,
                };
                if steps.send(step).await.is_err() {
                    return Ok(None);
                }
                files += 1;
                loop {
                    match field.chunk().await {
                        Ok(Some(chunk)) => {
                            if chunk_tx.send(Ok(chunk)).await.is_err() {
                                return Ok(None);
                            }
                        }
                        Ok(None) => break,
                        Err(e) => {
                            let _ = chunk_tx
                                .send(Err(io::Error::other("upload interrupted")))
                                .await;
                            return Err(multipart_error(e));
                        }
                    }
                }
            }
            other => {
                let name = other.unwrap_or("").to_owned();
                return Err(ApiError::validation(
                    "body",
                    format!("unexpected part {name:?}"),
                ));
            }
        }
    }
    let meta = meta.ok_or_else(|| ApiError::validation("meta", "missing meta part"))?;
    if files == 0 {
        return Err(ApiError::validation(
            "files",
            "a dataset needs at least one file",
        ));
    }
    Ok(Some(meta))
}
