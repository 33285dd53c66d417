//! Run the mutation-only genetic algorithm against an in-process objective
//! and print the best candidate and its trajectory.
//!
//! ```bash
//! cargo run --example evolve
//! ```

use detpipe::ga::{self, CandidateId, EvolutionConfig, EvolveOptions, GeneSpec, HyperparamSpace};

fn main() {
    let space = HyperparamSpace::new(vec![
        GeneSpec::new("lr", 1e-5, 1e-1, 1.0, 0.01),
        GeneSpec::new("momentum", 0.6, 0.98, 0.3, 0.9),
        GeneSpec::new("box_gain", 0.02, 0.2, 1.0, 0.05),
    ])
    .unwrap();

    // Synthetic objective with a known optimum; a real run would train and
    // validate a detector here and report its two mAP numbers.
    let optimum = [0.02, 0.95, 0.08];
    let evaluator = move |_: CandidateId, values: &[f64]| -> Result<(f64, f64), String> {
        let d2: f64 = values
            .iter()
            .zip(optimum)
            .map(|(v, o)| ((v - o) / o) * ((v - o) / o))
            .sum();
        let quality = (1.0 - 0.05 * d2).clamp(0.0, 1.0);
        Ok((quality, 0.8 * quality))
    };

    let config = EvolutionConfig {
        seed: 7,
        ..EvolutionConfig::default()
    };
    let outcome = ga::evolve(&space, &config, evaluator, EvolveOptions::default()).unwrap();

    println!(
        "evaluated {} candidates over {} generations",
        outcome.log.entries.len(),
        config.generations
    );
    println!("best candidate (generation {}):", outcome.best.generation);
    print!("{}", ga::hyp_file_text(&space, &outcome.best.values));
    println!("fitness: {:.4}", outcome.best.fitness.unwrap());

    let trajectory = outcome.log.best_so_far();
    println!("\nbest-so-far fitness every 25 generations:");
    for (i, fit) in trajectory.iter().enumerate().step_by(25) {
        println!("  after candidate {i:>3}: {fit:.4}");
    }

    let scatter = ga::export_scatter(&outcome.log, &space).unwrap();
    println!("\nscatter highlight per gene:\n{}", scatter.best_csv());
}
