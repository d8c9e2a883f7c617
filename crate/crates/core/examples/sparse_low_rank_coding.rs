//! Codes corrupted samples against a fixed class-partitioned dictionary and
//! prints the residual trace of the solver.
//!
//!     cargo run --example sparse_low_rank_coding

use mmsldl::data::{synth_multimodal, SynthSpec};
use mmsldl::slrdl::{ksvd_init, solve_coding, Hyperparams};
use nalgebra::DMatrix;

fn main() -> mmsldl::Result<()> {
    let spec = SynthSpec {
        classes: 4,
        per_class: 10,
        dim: 64,
        corruption: 0.1,
        seed: 3,
        ..Default::default()
    };
    let ds = synth_multimodal(&spec)?;
    let blocks: Vec<DMatrix<f64>> = (0..spec.classes)
        .map(|c| ds.views[0].columns(c * spec.per_class, spec.per_class).into_owned())
        .collect();
    let dict = ksvd_init(&blocks, &vec![spec.per_class; spec.classes], 4, 10)?;

    // no partner modality here, so the coupling is off
    let h = Hyperparams::default().uncoupled();
    let out = solve_coding(&ds.views[0], &dict, None, &h)?;
    for r in out.history.iter().step_by(25) {
        println!(
            "iter {:4}  feasibility {:.2e}  split {:.2e}  mu {:.2e}",
            r.iter, r.feasibility, r.split, r.mu
        );
    }
    let last = out.history.last().expect("at least one iteration");
    println!("converged: {} after {} iterations", out.converged, last.iter);

    // how much of the planted corruption ended up in E
    let planted = &ds.masks[0];
    let e = &out.state.e;
    let hit = planted.iter().zip(e.iter()).filter(|(m, e)| **m != 0.0 && e.abs() > 0.1).count();
    let total = planted.iter().filter(|m| **m != 0.0).count();
    println!("{hit} of {total} planted spikes show up in the sparse error");
    Ok(())
}
