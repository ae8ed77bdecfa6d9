use std::fs;
use std::path::Path;

use clap::Args;
use photoscout::annotations::{load_album, Album, TagTarget};
use photoscout::dsl::{line_col, parse_with_holes};
use photoscout::engine::{run_search, Envelope, SearchResponse};
use photoscout::evaluator::search as run_program;
use photoscout::nlbridge::{SketchSource, SourceMode};
use photoscout::synthesis::ExampleSet;
use photoscout_service::{valid_id, ServiceConfig};

use crate::failure::{Failure, Outcome};

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub album: String,
    #[arg(long)]
    pub query: String,
    #[arg(long = "pos", value_name = "IMAGE_ID")]
    pub positive: Vec<String>,
    #[arg(long = "neg", value_name = "IMAGE_ID")]
    pub negative: Vec<String>,
    /// `name=cluster`, applied before searching.
    #[arg(long = "tag", value_name = "NAME=CLUSTER")]
    pub tags: Vec<String>,
    /// `fallback`, `replay:<file>` or `llm`; defaults to the config.
    #[arg(long, value_name = "SOURCE")]
    pub sketch_source: Option<String>,
    /// Print the response envelope as JSON.
    #[arg(long)]
    pub json: bool,
}

const IMAGE_EXTENSIONS: [&str; 4] = ["jpg", "jpeg", "png", "webp"];

/// An album from the root, with the configured threshold and geometry.
pub fn open_album(config: &ServiceConfig, album_id: &str) -> Outcome<Album> {
    if !valid_id(album_id) {
        return Err(Failure::input(format!("invalid album id `{album_id}`")));
    }
    let dir = config.album_root.join(album_id);
    if !dir.is_dir() {
        return Err(Failure::input(format!("no album `{album_id}` under {}", config.album_root.display())));
    }
    let mut album = load_album(&dir, album_id)?;
    album.set_confidence_threshold(config.confidence_threshold)?;
    album.set_spatial(config.spatial);
    Ok(album)
}

/// Resolves a `--sketch-source` value against the configured source.
pub fn sketch_source(config: &ServiceConfig, flag: Option<&str>) -> Outcome<SketchSource> {
    let base = config.source();
    let mode = match flag {
        None => return Ok(base),
        Some("fallback") => SourceMode::Fallback,
        Some("llm") => SourceMode::Llm(config.sketch_source.llm.clone()),
        Some(other) => match other.strip_prefix("replay:") {
            Some(path) if !path.is_empty() => SourceMode::Replay { path: path.into() },
            _ => {
                return Err(Failure::input(format!(
                    "unknown sketch source `{other}`; expected fallback, llm or replay:<file>"
                )))
            }
        },
    };
    Ok(SketchSource { mode, ..base })
}

/// Splits `name=cluster`.
pub fn tag_flag(text: &str) -> Outcome<(&str, &str)> {
    match text.split_once('=') {
        Some((name, cluster)) if !name.trim().is_empty() && !cluster.trim().is_empty() => {
            Ok((name.trim(), cluster.trim()))
        }
        _ => Err(Failure::input(format!("tag `{text}` is not of the form name=cluster"))),
    }
}

pub fn ingest(config: &ServiceConfig, dir: &Path, album_id: &str) -> Outcome {
    if !valid_id(album_id) {
        return Err(Failure::input(format!("invalid album id `{album_id}`")));
    }
    let album = load_album(dir, album_id).map_err(|e| Failure::failed(format!("{}: {e}", dir.display())))?;
    let dest = config.album_root.join(album_id);
    if dest.exists() {
        return Err(Failure::failed(format!("album `{album_id}` already exists at {}", dest.display())));
    }
    let io = |e: std::io::Error| Failure::environment(format!("cannot write {}: {e}", dest.display()));
    album.write_to(&dest).map_err(io)?;
    let mut copied = 0;
    for entry in fs::read_dir(dir).map_err(io)?.filter_map(Result::ok) {
        let path = entry.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if is_image && path.is_file() {
            fs::copy(&path, dest.join(entry.file_name())).map_err(io)?;
            copied += 1;
        }
    }
    let s = album.summary();
    println!(
        "album {}: {} images, {} objects, {} faces in {} clusters, {} labels, {} tags, {} image files copied",
        s.album_id, s.images, s.objects, s.faces, s.face_clusters, s.labels, s.tags, copied
    );
    Ok(())
}

pub fn eval(config: &ServiceConfig, album_id: &str, program: &Path) -> Outcome {
    let album = open_album(config, album_id)?;
    let text = fs::read_to_string(program)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", program.display())))?;
    let sketch = parse_with_holes(&text, album.vocabulary()).map_err(|e| {
        Failure::input(format!("{}: {}", program.display(), e.reason))
    })?;
    if !sketch.holes().is_empty() {
        let lines: Vec<String> = sketch
            .holes()
            .iter()
            .map(|h| {
                let (line, col) = line_col(&text, h.position);
                format!("{}:{line}:{col}: unknown {} `{}`", program.display(), h.slot.name(), h.origin_token)
            })
            .collect();
        return Err(Failure::input(format!("program has holes\n{}", lines.join("\n"))));
    }
    let mut ids = run_program(sketch.expr(), &album).map_err(|e| Failure::input(e.to_string()))?;
    ids.sort();
    for id in ids {
        println!("{id}");
    }
    Ok(())
}

fn search_response(config: &ServiceConfig, args: &SearchArgs) -> Outcome<SearchResponse> {
    let mut album = open_album(config, &args.album)?;
    for flag in &args.tags {
        let (name, cluster) = tag_flag(flag)?;
        album.register_tag(name, TagTarget::FaceCluster(cluster.to_owned()))?;
    }
    let examples = ExampleSet::new(args.positive.iter().cloned(), args.negative.iter().cloned())?;
    examples.check_against(&album)?;
    let source = sketch_source(config, args.sketch_source.as_deref())?;
    let (_, response) = run_search(&args.query, &examples, &album, &source)?;
    Ok(response)
}

pub fn search(config: &ServiceConfig, args: &SearchArgs) -> Outcome {
    let response = search_response(config, args)?;
    if args.json {
        let text = serde_json::to_string_pretty(&Envelope::new(response)).expect("responses serialize");
        println!("{text}");
        return Ok(());
    }
    println!("status: {}", response.status());
    match &response {
        SearchResponse::Complete {
            program,
            explanation,
            results,
        } => {
            println!("program: {program}");
            println!("explanation: {explanation}");
            println!("results: {}", results.len());
            for id in results {
                println!("  {id}");
            }
        }
        SearchResponse::NeedsClarification { unknown_terms, message } => {
            println!("unknown terms: {}", unknown_terms.join(", "));
            println!("{message}");
        }
        SearchResponse::NoProgram { diagnostic } => println!("{diagnostic}"),
    }
    Ok(())
}

pub fn serve(config: ServiceConfig) -> Outcome {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::environment(e.to_string()))?;
    println!("listening on http://{}", config.addr());
    runtime
        .block_on(photoscout_service::serve(config))
        .map_err(|e| Failure::environment(e.to_string()))
}
