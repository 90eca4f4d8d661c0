//! Writes the planted-cluster corpus as `train.jsonl` and `test.jsonl`
//! into the directory given as the first argument (default: current dir).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use doctag2vec::synthetic::PlantedClusters;
use doctag2vec::Record;

fn write(path: PathBuf, records: &[Record]) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r).expect("record serializes"))?;
    }
    out.flush()
}

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&dir)?;
    let (train, test) = PlantedClusters::default().generate();
    write(dir.join("train.jsonl"), &train)?;
    write(dir.join("test.jsonl"), &test)?;
    println!("wrote {} training and {} test records to {}", train.len(), test.len(), dir.display());
    Ok(())
}
