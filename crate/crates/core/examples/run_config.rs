//! Builds a run configuration in code, prints it as TOML, and runs the
//! same evaluation the `eval` subcommand would.
//!
//!     cargo run --release --example run_config [out-dir]

use mmsldl::cli::commands::run_eval;
use mmsldl::cli::{RunConfig, SourceSpec};
use mmsldl::data::SynthSpec;

fn main() -> mmsldl::Result<()> {
    let mut cfg = RunConfig {
        seed: 5,
        out: std::env::args().nth(1).unwrap_or_else(|| "mmsldl-example-out".into()).into(),
        source: SourceSpec::Synthetic(SynthSpec {
            classes: 4,
            per_class: 14,
            corruption: 0.1,
            ..Default::default()
        }),
        ..Default::default()
    };
    cfg.split.train_per_class = 7;
    cfg.split.repeats = 3;
    cfg.validate()?;
    println!("{}", cfg.to_toml()?);

    cfg.write_to(&cfg.out)?;
    let mean = run_eval(&cfg, None)?;
    println!(
        "mean over {} repeats: {:.2}% (modality candidates {:.2}% / {:.2}%)",
        mean.repeats, mean.recognition_rate, mean.candidate_rates[0], mean.candidate_rates[1]
    );
    println!("metrics written to {}", cfg.out.display());
    Ok(())
}
