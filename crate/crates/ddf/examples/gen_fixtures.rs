//! Regenerates the fixture directory: `cargo run -p ddf --example gen_fixtures [-- DIR]`.

use std::path::PathBuf;

fn main() -> Result<(), ddf::Error> {
    let dir = std::env::args_os().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("fixtures"));
    ddf::fixtures::write_all(&dir)?;
    println!("wrote {}", dir.display());
    Ok(())
}
