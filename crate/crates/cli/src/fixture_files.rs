//! `photoscout fixtures --out <dir>` writes:
//!
//! ```text
//! albums/{fig1,transport,wedding,festival}/   annotation files
//! llm/fig1.txt, llm/festival.txt              recorded model outputs
//! scripts/wedding.script, scripts/wedding_truth.txt
//! ```

use std::fs;
use std::path::Path;

use photoscout::fixtures::{
    festival_fixture, fig1_album, transportation_album, wedding_fixture, WeddingFixture, BRIDE_CLUSTER,
    FESTIVAL_REPLAY, FESTIVAL_SIZE, FIG1_REPLAY, GROOM_CLUSTER, WEDDING_QUERY,
};

use crate::failure::{Failure, Outcome};

/// The recorded outputs, by file name under `llm/`.
pub const LLM_FILES: [(&str, &str); 2] = [("fig1.txt", FIG1_REPLAY), ("festival.txt", FESTIVAL_REPLAY)];

/// The walkthrough: ask, learn the unknown terms, tag both people, label
/// one image each way, get the ground truth back.
pub fn wedding_script(f: &WeddingFixture) -> String {
    format!(
        "# wedding walkthrough\n\
         query {WEDDING_QUERY}\n\
         expect_status needs_clarification\n\
         expect_terms alice bob holding\n\
         tag alice={BRIDE_CLUSTER}\n\
         tag bob={GROOM_CLUSTER}\n\
         pos {pos}\n\
         neg {neg}\n\
         expect_status complete\n\
         expect_contains {pos}\n\
         expect_absent {neg}\n\
         expect_results wedding_truth.txt\n",
        pos = f.positive,
        neg = f.negative,
    )
}

pub fn write_all(out: &Path) -> Outcome {
    let io = |e: std::io::Error| Failure::environment(format!("cannot write under {}: {e}", out.display()));
    let albums = out.join("albums");
    let wedding = wedding_fixture();
    fig1_album().write_to(&albums.join("fig1")).map_err(io)?;
    transportation_album().write_to(&albums.join("transport")).map_err(io)?;
    wedding.album.write_to(&albums.join("wedding")).map_err(io)?;
    festival_fixture(FESTIVAL_SIZE).album.write_to(&albums.join("festival")).map_err(io)?;

    let llm = out.join("llm");
    fs::create_dir_all(&llm).map_err(io)?;
    for (name, text) in LLM_FILES {
        fs::write(llm.join(name), text).map_err(io)?;
    }

    let scripts = out.join("scripts");
    fs::create_dir_all(&scripts).map_err(io)?;
    fs::write(scripts.join("wedding.script"), wedding_script(&wedding)).map_err(io)?;
    let mut truth = wedding.ground_truth.join("\n");
    truth.push('\n');
    fs::write(scripts.join("wedding_truth.txt"), truth).map_err(io)?;

    println!("wrote fixtures to {}", out.display());
    Ok(())
}
