//! Regenerate a bundled synthetic fixture.
//!
//! Usage: cargo run -p chainsift-cli --example make_fixture -- [DIR] [N]

use std::path::PathBuf;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().map(PathBuf::from).unwrap_or_else(|| "fixtures/synthetic-50".into());
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(50);
    chainsift_cli::fixture::generate(&dir, n)?;
    println!("wrote {n}-query fixture to {}", dir.display());
    Ok(())
}
