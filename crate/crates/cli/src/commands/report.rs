//! `coalition report`: merge the metric tables of several runs into one
//! comparison table, one row per (method, metric).

use std::path::PathBuf;

use anyhow::{Context, Result};

use coalition_core::artifacts;

use crate::runs;

pub fn run(run_dirs: &[PathBuf], out: Option<PathBuf>) -> Result<()> {
    if run_dirs.is_empty() {
        anyhow::bail!("report needs at least one run directory");
    }
    let mut merged = String::from("method,config,metric,value\n");
    for dir in run_dirs {
        let path = dir.join("metrics.csv");
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("read {}", path.display()))?;
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                continue; // per-run header
            }
            merged.push_str(line);
            merged.push('\n');
        }
    }

    let out = runs::resolve_out_dir(out, "report");
    std::fs::create_dir_all(&out).with_context(|| format!("create {}", out.display()))?;
    artifacts::write_text(&out.join("comparison.csv"), &merged)?;
    print!("{merged}");
    println!("comparison table in {}", out.display());
    Ok(())
}
