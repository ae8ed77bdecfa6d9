use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use axum::extract::{FromRequest, Path as UrlPath, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use photoscout::annotations::{AnnotationFile, TagTarget};
use photoscout::engine::{run_search, Envelope, SearchResponse, API_VERSION};
use photoscout::synthesis::{ExampleSet, Polarity};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::api::*;
use crate::error::ApiError;
use crate::events::SessionEvent;
use crate::state::AppState;

type Shared = Arc<AppState>;
type ApiResult<T> = Result<Json<Envelope<T>>, ApiError>;

fn reply<T>(body: T) -> ApiResult<T> {
    Ok(Json(Envelope::new(body)))
}

#[derive(Deserialize)]
struct Versioned<T> {
    #[serde(default)]
    v: Option<u32>,
    #[serde(flatten)]
    body: T,
}

/// JSON body in the envelope. A missing `v` is accepted; any other version
/// is rejected.
pub struct Body<T>(pub T);

impl<S, T> FromRequest<S> for Body<T>
where
    S: Send + Sync,
    T: DeserializeOwned,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let Json(Versioned { v, body }) = Json::<Versioned<T>>::from_request(req, state)
            .await
            .map_err(|e| ApiError::unprocessable(e.body_text()))?;
        match v {
            Some(v) if v != API_VERSION => Err(ApiError::unprocessable(format!(
                "unsupported payload version {v}, expected {API_VERSION}"
            ))),
            _ => Ok(Body(body)),
        }
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/albums", post(create_album))
        .route("/albums/{album}/images", get(list_images))
        .route("/albums/{album}/images/{image}/annotation", get(annotation))
        .route("/albums/{album}/tags", post(add_tag))
        .route("/sessions", post(create_session))
        .route("/sessions/{session}/search", post(search))
        .route("/sessions/{session}/saved", post(save))
        .route("/sessions/{session}/saved/{image}", delete(unsave))
        .route("/sessions/{session}/export", post(export))
        .route("/static/{album}/{file}", get(thumbnail))
        .with_state(state)
}

async fn create_album(State(state): State<Shared>, Body(req): Body<CreateAlbum>) -> Result<Response, ApiError> {
    let loader = Arc::clone(&state);
    let album = blocking(move || loader.load_album(&req.album_id, req.path.as_deref())).await??;
    tracing::info!(album = album.album_id(), images = album.len(), "album loaded");
    let body = Envelope::new(AlbumCreated {
        summary: album.summary(),
    });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn list_images(State(state): State<Shared>, UrlPath(album_id): UrlPath<String>) -> ApiResult<ImageList> {
    let entry = state.album(&album_id)?;
    let images = entry
        .album
        .images()
        .map(|img| ImageEntry {
            image_id: img.image_id.clone(),
            width: img.width,
            height: img.height,
            objects: img.objects.len(),
            thumbnail: format!("/static/{album_id}/{}.jpg", img.image_id),
        })
        .collect();
    reply(ImageList { album_id, images })
}

async fn annotation(
    State(state): State<Shared>,
    UrlPath((album_id, image_id)): UrlPath<(String, String)>,
) -> ApiResult<Annotation> {
    let entry = state.album(&album_id)?;
    let album = &entry.album;
    let image = album
        .image(&image_id)
        .ok_or_else(|| ApiError::not_found(format!("unknown image `{image_id}` in album `{album_id}`")))?;
    let records = AnnotationFile::from(image).objects;
    let objects = image
        .objects
        .iter()
        .zip(records)
        .map(|(obj, record)| {
            let tags = album
                .tags()
                .iter()
                .filter(|(_, target)| match target {
                    TagTarget::FaceCluster(c) => obj.face_attributes().is_some_and(|f| &f.cluster == c),
                    TagTarget::Objects(refs) => refs
                        .iter()
                        .any(|r| r.image_id == image_id && r.object_id == obj.object_id),
                })
                .map(|(name, _)| name.to_string())
                .collect();
            AnnotatedObject {
                record,
                description: obj.describe(),
                tags,
            }
        })
        .collect();
    reply(Annotation {
        album_id: album_id.clone(),
        image_id: image.image_id.clone(),
        width: image.width,
        height: image.height,
        objects,
    })
}

async fn add_tag(
    State(state): State<Shared>,
    UrlPath(album_id): UrlPath<String>,
    Body(req): Body<AddTag>,
) -> ApiResult<TagAdded> {
    let target = match (req.face_cluster, req.objects) {
        (Some(cluster), None) => TagTarget::FaceCluster(cluster),
        (None, Some(objects)) => TagTarget::Objects(objects),
        _ => return Err(ApiError::unprocessable("give exactly one of `face_cluster` and `objects`")),
    };
    let session = match &req.session_id {
        Some(id) => {
            let session = state.session(id)?;
            if session.lock().await.album_id != album_id {
                return Err(ApiError::conflict(format!("session `{id}` belongs to another album")));
            }
            Some(session)
        }
        None => None,
    };
    let replaced = state.tag(&album_id, &req.name, target.clone())?;
    let name = photoscout::dsl::canonicalize(&req.name);
    if let Some(session) = session {
        session.lock().await.log.append(SessionEvent::TagAdded {
            name: name.clone(),
            target: target.clone(),
        });
    }
    reply(TagAdded {
        album_id,
        name,
        target,
        replaced,
    })
}

async fn create_session(State(state): State<Shared>, Body(req): Body<CreateSession>) -> Result<Response, ApiError> {
    let session_id = state.create_session(&req.album_id)?;
    let body = Envelope::new(SessionCreated {
        session_id,
        album_id: req.album_id,
    });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

/// Log entries turning `old` into `new`.
fn example_changes(old: &ExampleSet, new: &ExampleSet) -> Vec<SessionEvent> {
    let mut events = Vec::new();
    for (id, _) in old.iter() {
        // a relabelled image shows up as an addition below
        if !new.positive().contains(id) && !new.negative().contains(id) {
            events.push(SessionEvent::ExampleRemoved { image_id: id.to_owned() });
        }
    }
    for (id, polarity) in new.iter() {
        let before = match polarity {
            Polarity::Positive => old.positive().contains(id),
            Polarity::Negative => old.negative().contains(id),
        };
        if !before {
            events.push(SessionEvent::ExampleAdded {
                image_id: id.to_owned(),
                polarity,
            });
        }
    }
    events
}

async fn search(
    State(state): State<Shared>,
    UrlPath(session_id): UrlPath<String>,
    Body(req): Body<SearchRequest>,
) -> ApiResult<SearchResponse> {
    let session = state.session(&session_id)?;
    let mut session = session.lock().await;
    let query = match req.query.or_else(|| session.query.clone()) {
        Some(q) if !q.trim().is_empty() => q,
        _ => return Err(ApiError::unprocessable("no query given")),
    };
    let examples = ExampleSet::new(req.positive, req.negative)?;
    let album = state.album(&session.album_id)?.album;
    examples.check_against(&album)?;

    if session.query.as_deref() != Some(query.as_str()) {
        session.log.append(SessionEvent::QuerySubmitted { query: query.clone() });
    }
    for event in example_changes(&session.examples, &examples) {
        session.log.append(event);
    }
    session.query = Some(query.clone());
    session.examples = examples.clone();

    let source = state.source.clone();
    let (outcome, response) = blocking(move || run_search(&query, &examples, &album, &source)).await??;
    session.log.append(SessionEvent::SearchFinished {
        status: response.status().to_owned(),
        results: response.results().len(),
    });
    session.last_outcome = Some(outcome);
    session.last_response = Some(response.clone());
    reply(response)
}

fn saved_list(saved: &BTreeSet<String>) -> Vec<String> {
    saved.iter().cloned().collect()
}

async fn save(
    State(state): State<Shared>,
    UrlPath(session_id): UrlPath<String>,
    Body(req): Body<SaveRequest>,
) -> ApiResult<SavedSet> {
    let session = state.session(&session_id)?;
    let mut session = session.lock().await;
    let ids = match req.image_ids {
        Some(ids) => ids,
        None => match &session.last_response {
            Some(SearchResponse::Complete { results, .. }) => results.clone(),
            _ => return Err(ApiError::conflict("the session has no search results to save")),
        },
    };
    let album = state.album(&session.album_id)?.album;
    if let Some(missing) = ids.iter().find(|id| !album.contains_image(id)) {
        return Err(ApiError::not_found(format!("unknown image `{missing}`")));
    }
    for id in ids {
        if session.saved.insert(id.clone()) {
            session.log.append(SessionEvent::ImageSaved { image_id: id });
        }
    }
    reply(SavedSet {
        saved: saved_list(&session.saved),
        removed: None,
        warning: None,
    })
}

async fn unsave(
    State(state): State<Shared>,
    UrlPath((session_id, image_id)): UrlPath<(String, String)>,
) -> ApiResult<SavedSet> {
    let session = state.session(&session_id)?;
    let mut session = session.lock().await;
    let removed = session.saved.remove(&image_id);
    let warning = if removed {
        session.log.append(SessionEvent::ImageUnsaved { image_id });
        None
    } else {
        tracing::warn!(session = %session_id, image = %image_id, "image was not saved");
        Some(format!("image `{image_id}` was not saved"))
    };
    reply(SavedSet {
        saved: saved_list(&session.saved),
        removed: Some(removed),
        warning,
    })
}

fn write_manifest(dir: &Path, manifest: &ExportManifest) -> std::io::Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n")?;
    Ok(path)
}

async fn export(
    State(state): State<Shared>,
    UrlPath(session_id): UrlPath<String>,
    Body(req): Body<ExportRequest>,
) -> ApiResult<Exported> {
    let session = state.session(&session_id)?;
    let mut session = session.lock().await;
    if req.destination.trim().is_empty() {
        return Err(ApiError::unprocessable("destination is empty"));
    }
    let manifest = ExportManifest {
        v: API_VERSION,
        album_id: session.album_id.clone(),
        session_id: session.session_id.clone(),
        query: session.query.clone().unwrap_or_default(),
        program: session.program(),
        image_ids: saved_list(&session.saved),
        exported_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    };
    let dir = std::path::PathBuf::from(&req.destination);
    let written = {
        let manifest = manifest.clone();
        blocking(move || write_manifest(&dir, &manifest)).await?
    };
    let path = written.map_err(|e| {
        ApiError::new(
            StatusCode::FORBIDDEN,
            format!("cannot write to `{}`: {e}", req.destination),
        )
    })?;
    session.log.append(SessionEvent::Exported {
        destination: req.destination.clone(),
        images: manifest.image_ids.len(),
    });
    reply(Exported {
        manifest_path: path.display().to_string(),
        manifest,
    })
}

fn content_type(file: &str) -> Option<&'static str> {
    let ext = Path::new(file).extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "jpg" | "jpeg" => Some("image/jpeg"),
        "png" => Some("image/png"),
        "webp" => Some("image/webp"),
        _ => None,
    }
}

async fn thumbnail(
    State(state): State<Shared>,
    UrlPath((album_id, file)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let entry = state.album(&album_id)?;
    let missing = || ApiError::not_found(format!("no thumbnail `{file}`"));
    let plain = !file.contains(['/', '\\']) && !file.starts_with('.');
    let mime = content_type(&file).filter(|_| plain).ok_or_else(missing)?;
    let bytes = tokio::fs::read(entry.dir.join(&file)).await.map_err(|_| missing())?;
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}
