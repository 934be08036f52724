//! avenlab: a desk-scale laboratory for average-feature speech
//! disentanglement.
//!
//! The toolkit synthesizes frame-aligned parallel feature corpora with known
//! content/timbre ground truth, trains a small conformer-style encoder to
//! approximate the per-group average feature, and verifies disentanglement
//! with distance statistics, alignment metrics, a feature-domain conversion
//! decoder, and oracle checks that are impossible on real speech.
//!
//! Start with the runnable examples (`cargo run --release --example ...`):
//!
//! - `gradient_check` — verify the autodiff core against central differences
//! - `synth_corpus` — generate a seeded synthetic parallel corpus
//! - `train_encoder` — train the average-feature encoder and watch distances shrink
//! - `distance_report` — pairwise distance / MAV statistics on a corpus
//! - `alignment_metric` — phoneme boundary error on interval files
//! - `voice_swap` — feature-domain conversion with ground-truth targets
//! - `project_features` — 2-D projection export for cluster plots
//!
//! The same capabilities are scriptable through the `avenlab` binary
//! (`synth`, `train`, `eval`, `align`, `convert`, `project` subcommands).

pub mod error;
pub mod numerics;

pub use error::{Error, Result};

/// Entry point used by the `avenlab` binary; returns the process exit code.
pub fn cli_main() -> i32 {
    eprintln!("cli not wired up yet");
    1
}
