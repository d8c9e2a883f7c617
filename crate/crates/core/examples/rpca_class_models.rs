//! Robust PCA splits one class block into a low-rank part and sparse noise;
//! the fitted class models then score a clean and a foreign sample.
//!
//!     cargo run --example rpca_class_models

use mmsldl::classifier::{reconstruction_error, rpca, ClassNoiseStats, RpcaParams};
use mmsldl::data::{synth_multimodal, SynthSpec};

fn main() -> mmsldl::Result<()> {
    let spec = SynthSpec {
        classes: 2,
        per_class: 30,
        dim: 50,
        rank: 3,
        corruption: 0.05,
        ..Default::default()
    };
    let ds = synth_multimodal(&spec)?;
    let block = ds.views[0].columns(0, spec.per_class).into_owned();
    let clean = ds.clean[0].columns(0, spec.per_class).into_owned();

    let params = RpcaParams::default();
    let split = rpca(&block, &params)?;
    println!(
        "rpca: {} iterations, converged {}, relative error of L {:.2e}",
        split.iterations,
        split.converged,
        (&split.low_rank - &clean).norm() / clean.norm()
    );

    let models = (0..spec.classes)
        .map(|c| ClassNoiseStats::fit(&ds.views[0].columns(c * spec.per_class, spec.per_class).into_owned(), &params))
        .collect::<mmsldl::Result<Vec<_>>>()?;
    let own = ds.clean[0].column(1).into_owned();
    let other = ds.clean[0].column(spec.per_class + 1).into_owned();
    for (c, m) in models.iter().enumerate() {
        println!(
            "class {c} model (rank {}): own sample {:.3e}, class-1 sample {:.3e}",
            m.rank(),
            reconstruction_error(&own, m)?,
            reconstruction_error(&other, m)?
        );
    }
    Ok(())
}
