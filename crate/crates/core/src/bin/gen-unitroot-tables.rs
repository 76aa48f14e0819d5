//! Regenerates `data/df_pvalue.csv` and `data/ips_moments.csv`.
//!
//! Usage: gen-unitroot-tables [OUT_DIR] [REPLICATIONS]

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Instant;

use gravpanel_core::unitroot::tables::{
    simulate_all, write_moments_csv, write_pvalue_csv, REPLICATIONS, SEED,
};

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data"));
    let reps = args
        .next()
        .map(|r| r.parse().expect("replications must be an integer"))
        .unwrap_or(REPLICATIONS);
    let start = Instant::now();
    let cells = simulate_all(reps, SEED, |c| {
        eprintln!(
            "{} lags={} T={} mean={:.4} var={:.4} ({:.0?})",
            c.deterministics,
            c.lags,
            c.length,
            c.mean,
            c.variance,
            start.elapsed()
        );
    });
    std::fs::create_dir_all(&out)?;
    write_pvalue_csv(
        &cells,
        BufWriter::new(File::create(out.join("df_pvalue.csv"))?),
    )?;
    write_moments_csv(
        &cells,
        BufWriter::new(File::create(out.join("ips_moments.csv"))?),
    )?;
    eprintln!("wrote {} cells to {}", cells.len(), out.display());
    Ok(())
}
