//! Write the synthetic datasets used in the examples and tests as CSV.
//!
//! `cargo run -p sdpmap --example generate -- OUT_DIR`

use std::error::Error;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use sdpmap::dataio::{gen_interval_grid, gen_swiss_roll, gen_three_clusters, Dataset};

fn write(ds: &Dataset, path: &Path) -> Result<(), Box<dyn Error>> {
    let mut w = BufWriter::new(File::create(path)?);
    let header: Vec<String> = (0..ds.dim()).map(|c| format!("x{}", c + 1)).collect();
    write!(w, "{}", header.join(","))?;
    if ds.labels.is_some() {
        write!(w, ",label")?;
    }
    writeln!(w)?;
    for i in 0..ds.len() {
        let row: Vec<String> = ds.point(i).iter().map(|v| format!("{v:?}")).collect();
        write!(w, "{}", row.join(","))?;
        if let Some(labels) = &ds.labels {
            write!(w, ",{}", labels[i])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "data".into());
    let out = Path::new(&out);
    fs::create_dir_all(out)?;
    write(&gen_three_clusters(100, 8, 0)?, &out.join("three_clusters.csv"))?;
    write(&gen_interval_grid(200)?, &out.join("interval_200.csv"))?;
    write(&gen_swiss_roll(400, 0)?, &out.join("swiss_roll.csv"))?;
    println!("wrote datasets to {}", out.display());
    Ok(())
}
