//! Test support for photoscout: an independent brute-force evaluator and
//! seeded generators for albums, programs and synthesis problems.

pub mod gen;
pub mod oracle;

pub use gen::{
    all_completions, punch_holes, random_album, random_image, random_program, random_sketch,
    random_synthesis_case, reordered, rng, SynthesisCase,
};
pub use oracle::{oracle_consistent, oracle_eval, oracle_search, relation_holds};
