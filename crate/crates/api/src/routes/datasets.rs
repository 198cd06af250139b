use std::io::{self, BufWriter, Write};

use axum::body::Body;
use axum::extract::multipart::MultipartRejection;
use axum::extract::{Multipart, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use bytes::Bytes;
use datadock_core::{DatasetId, DatasetSummary, MetadataChanges, Page, SearchQuery};
use tokio::sync::mpsc;
use tokio_util::io::ReaderStream;

use crate::error::{ApiError, ApiResult};
use crate::extract::{parse_id, AppState, Auth, JsonBody, PathParams, QueryParams, Viewer};
use crate::upload::create_from_multipart;
use crate::views::DatasetView;

const ARCHIVE_CHUNK: usize = 64 * 1024;

pub async fn create(
    State(state): State<AppState>,
    auth: Auth,
    multipart: Result<Multipart, MultipartRejection>,
) -> ApiResult<(StatusCode, Json<DatasetView>)> {
    let multipart = multipart.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let owner = auth.principal.id();
    let dataset = create_from_multipart(&state, owner, multipart).await?;
    let detail = state
        .run(move |hub| hub.get_dataset(Some(owner), dataset.id))
        .await?;
    Ok((StatusCode::CREATED, Json(detail.into())))
}

pub async fn search(
    State(state): State<AppState>,
    viewer: Viewer,
    params: QueryParams,
) -> ApiResult<Json<Page<DatasetSummary>>> {
    let query = SearchQuery {
        name: params.get("name").map(str::to_owned),
        file_type: params.get("file_type").map(str::to_owned),
        tags: params.all("tag"),
        author: params.get("author").map(str::to_owned),
        page: params.page()?,
    };
    let viewer = viewer.id();
    Ok(Json(
        state.run(move |hub| hub.search(viewer, &query)).await?,
    ))
}

pub async fn get_one(
    State(state): State<AppState>,
    viewer: Viewer,
    PathParams(id): PathParams<String>,
) -> ApiResult<Json<DatasetView>> {
    let id: DatasetId = parse_id(&id, "dataset")?;
    let viewer = viewer.id();
    let detail = state.run(move |hub| hub.get_dataset(viewer, id)).await?;
    Ok(Json(detail.into()))
}

pub async fn update(
    State(state): State<AppState>,
    auth: Auth,
    PathParams(id): PathParams<String>,
    JsonBody(changes): JsonBody<MetadataChanges>,
) -> ApiResult<Json<DatasetView>> {
    let id: DatasetId = parse_id(&id, "dataset")?;
    let caller = auth.principal.id();
    let detail = state
        .run(move |hub| {
            hub.update_metadata(caller, id, changes)?;
            hub.get_dataset(Some(caller), id)
        })
        .await?;
    Ok(Json(detail.into()))
}

pub async fn delete(
    State(state): State<AppState>,
    auth: Auth,
    PathParams(id): PathParams<String>,
) -> ApiResult<StatusCode> {
    let id: DatasetId = parse_id(&id, "dataset")?;
    state
        .run(move |hub| hub.delete_dataset(&auth.principal.user, id))
        .await?;
    Ok(StatusCode::NO_CONTENT)
}

/// Sends written bytes to the response body as they are produced.
struct ChannelWriter(mpsc::Sender<io::Result<Bytes>>);

impl Write for ChannelWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0
            .blocking_send(Ok(Bytes::copy_from_slice(buf)))
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "client went away"))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

fn attachment(name: &str) -> HeaderValue {
    let safe: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_graphic() && c != '"' && c != '\\' || c == ' ' {
                c
            } else {
                '_'
            }
        })
        .collect();
    HeaderValue::from_str(&format!("attachment; filename=\"{safe}.zip\""))
        .unwrap_or_else(|_| HeaderValue::from_static("attachment; filename=\"dataset.zip\""))
}

pub async fn archive(
    State(state): State<AppState>,
    viewer: Viewer,
    PathParams(id): PathParams<String>,
) -> ApiResult<Response> {
    let id: DatasetId = parse_id(&id, "dataset")?;
    let viewer = viewer.id();
    // Access is decided before the first byte goes out.
    let plan = state.run(move |hub| hub.archive_plan(viewer, id)).await?;
    let disposition = attachment(&plan.dataset_name);

    let (tx, mut rx) = mpsc::channel::<io::Result<Bytes>>(4);
    let hub = state.hub.clone();
    tokio::task::spawn_blocking(move || {
        let out = BufWriter::with_capacity(ARCHIVE_CHUNK, ChannelWriter(tx.clone()));
        let result = hub
            .write_archive(&plan, out)
            .and_then(|mut w| w.flush().map_err(Into::into));
        if let Err(err) = result {
            tracing::warn!(dataset = %id, %err, "archive stream aborted");
            let _ = tx.blocking_send(Err(io::Error::other(err.to_string())));
        }
    });
    let stream = futures::stream::poll_fn(move |cx| rx.poll_recv(cx));
    Ok((
        [
            (
                header::CONTENT_TYPE,
                HeaderValue::from_static("application/zip"),
            ),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        Body::from_stream(stream),
    )
        .into_response())
}

pub async fn file(
    State(state): State<AppState>,
    viewer: Viewer,
    PathParams((id, path)): PathParams<(String, String)>,
) -> ApiResult<Response> {
    let id: DatasetId = parse_id(&id, "dataset")?;
    let viewer = viewer.id();
    let (entry, reader) = state
        .run(move |hub| hub.download_file(viewer, id, &path))
        .await?;
    let content_type = HeaderValue::from_str(&entry.content_type)
        .unwrap_or_else(|_| HeaderValue::from_static("application/octet-stream"));
    let file = tokio::fs::File::from_std(reader.into_file());
    Ok((
        [
            (header::CONTENT_TYPE, content_type),
            (header::CONTENT_LENGTH, HeaderValue::from(entry.size_bytes)),
        ],
        Body::from_stream(ReaderStream::new(file)),
    )
        .into_response())
}
