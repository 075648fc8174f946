//! Regenerates the bundled CSV files under `data/`.
//!
//! cargo run --release -p attrib-core --example make_synthetic -- [OUT_DIR]

use std::path::PathBuf;

use attrib_core::sim::interstroke::{synthetic_interstroke, INTERSTROKE_ROWS};
use attrib_core::sim::{generate_case, registry};
use attrib_core::write_csv;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir)?;

    let tiny = generate_case(&registry(1)?, 80, 1)?;
    write_csv(&tiny.dataset, dir.join("tiny.csv"), "a", "y")?;

    let table = synthetic_interstroke(INTERSTROKE_ROWS / 2, 20240101);
    table.write_csv(dir.join("interstroke_synthetic.csv"))?;
    println!("wrote {} and {} rows", 80, table.nrows());
    Ok(())
}
