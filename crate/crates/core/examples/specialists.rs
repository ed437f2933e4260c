//! Runs the ablation grid and baselines on the synthetic specialist corpus.
//!
//! ```text
//! cargo run --release -p uec-core --example specialists [seed]
//! ```

use uec_core::convolution::CoefficientConfig;
use uec_core::eval::{ablation_suite, baseline_suite, coefficient_profile, render_table, synth_generate, PipelineConfig, RetrievalData, SynthSpec};

fn main() -> uec_core::Result<()> {
    let seed = std::env::args().nth(1).map_or(7, |s| s.parse().expect("seed must be an integer"));
    let spec = SynthSpec { seed, ..SynthSpec::default() };
    let data = synth_generate(&spec)?;
    let profile = coefficient_profile(&data.queries, &CoefficientConfig::default())?;
    let data = RetrievalData::from(data);
    let cfg = PipelineConfig::default();

    println!("ablation (seed {seed})");
    print!("{}", render_table(&ablation_suite(&data, &cfg)?));
    println!("\nbaselines");
    print!("{}", render_table(&baseline_suite(&data, &cfg)?));
    println!("\nmean coefficients per domain");
    print!("{}", profile.to_csv());
    Ok(())
}
