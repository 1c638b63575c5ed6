//! Run directories: `config.json`, `observables.ndjson`, `stats.json`,
//! `summary.csv`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::harness::config::RunConfig;
use crate::harness::ensemble::{run_ensemble, EnsembleOptions, EnsembleStats, Model, StreamHeader};

#[derive(Serialize)]
struct ConfigEcho<'a> {
    sha256: String,
    model: &'a str,
    seed: u64,
    realizations: usize,
    config: serde_json::Value,
}

pub fn write_config_echo(dir: &Path, config: &RunConfig, model: Model, seed: u64, m: usize) -> Result<()> {
    let echo = ConfigEcho {
        sha256: config.sha256()?,
        model: model.tag(),
        seed,
        realizations: m,
        config: serde_json::to_value(config)?,
    };
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(&echo)? + "\n")?;
    Ok(())
}

pub fn summary_csv(stats: &EnsembleStats) -> String {
    let mut s = String::from("z,theta,mean_re,mean_im,var_re,var_im,se_re,se_im,scintillation,mean_width_sq\n");
    for (c, z) in stats.checkpoints.iter().enumerate() {
        for t in 0..stats.n_theta {
            let o = stats.observable(c, t);
            s += &format!(
                "{z},{t},{},{},{},{},{},{},{},{}\n",
                o.mean.re,
                o.mean.im,
                o.var_re,
                o.var_im,
                o.se_re,
                o.se_im,
                stats.scintillation_index(c),
                stats.mean_width_sq(c)
            );
        }
    }
    s
}

/// Runs an ensemble, streaming observables into `dir` and persisting the
/// final statistics.
pub fn run_to_dir(config: &RunConfig, model: Model, m: usize, seed: u64, dir: &Path) -> Result<EnsembleStats> {
    fs::create_dir_all(dir)?;
    write_config_echo(dir, config, model, seed, m)?;
    let mut nd = BufWriter::new(File::create(dir.join("observables.ndjson"))?);
    serde_json::to_writer(&mut nd, &StreamHeader::new(config, model, seed, m as u64)?)?;
    nd.write_all(b"\n")?;
    let run = run_ensemble(
        config,
        model,
        m,
        seed,
        EnsembleOptions {
            ndjson: Some(&mut nd),
            ..Default::default()
        },
    )?;
    nd.flush()?;
    fs::write(dir.join("stats.json"), serde_json::to_string(&run.stats)? + "\n")?;
    fs::write(dir.join("summary.csv"), summary_csv(&run.stats))?;
    Ok(run.stats)
}
