//! Writes the bundled benchmark families to JSON model-class documents.
//!
//! ```text
//! cargo run --example export_families -- [DIR]
//! ```
//! The default directory is `data/` next to this crate's manifest.

use std::path::PathBuf;

use serde_json::json;
use witness_lab::benchmarks::{build_mab_tree_family, build_separation_family};

fn main() -> witness_lab::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data"));
    std::fs::create_dir_all(&dir)?;

    let (class, truth) = build_mab_tree_family(3, 2, 0.2)?;
    let models: Vec<_> = class.members().iter().map(|c| &c.model).collect();
    let doc = json!({ "models": models });
    std::fs::write(dir.join("mab_tree_h3_k2.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    std::fs::write(
        dir.join("mab_tree_h3_k2_truth.json"),
        serde_json::to_string_pretty(&class.get(truth).model)? + "\n",
    )?;

    let family = build_separation_family(2)?;
    let doc = json!({ "models": family });
    std::fs::write(dir.join("separation_d2.json"), serde_json::to_string_pretty(&doc)? + "\n")?;

    println!("wrote 3 files to {}", dir.display());
    Ok(())
}
