//! The headline comparison: six agents on the single-user toy environment
//! with sparse, delayed reward (target = budget = 10, only `a2` satisfies).
//! Deep exploration learns it; myopic exploration does not.
//!
//! Run with: cargo run --release --example toy_deep_exploration

use deep_explore::agent::{AgentConfig, AgentKind};
use deep_explore::env::SeqRecConfig;
use deep_explore::harness::{run_experiment, EnvSpec, ExperimentConfig};

fn main() -> deep_explore::Result<()> {
    let seeds: Vec<u64> = (0..10).collect();
    let mut results = Vec::new();
    for kind in [
        AgentKind::EpsilonGreedy,
        AgentKind::NeuralTs,
        AgentKind::NeuralUcb,
        AgentKind::NeuralLinucb,
        AgentKind::EnsembleDe,
        AgentKind::EpinetDe,
    ] {
        let cfg = ExperimentConfig {
            name: "toy".into(),
            seeds: seeds.clone(),
            life_cycles: 100,
            env: EnvSpec::Seqrec { users: SeqRecConfig::toy().users, spawn: None },
            agent: AgentConfig::new(kind),
            eval: None,
        };
        let start = std::time::Instant::now();
        let out = run_experiment(&cfg)?;
        println!(
            "{:<16} mean {:.3} +- {:.3} (std dev {:.3})  [{:.1}s]",
            out.agent_label,
            out.metrics.mean,
            out.metrics.std_error,
            out.metrics.std_dev,
            start.elapsed().as_secs_f64()
        );
        results.push((out.agent_label.clone(), out.metrics.mean));
        for w in &out.warnings {
            eprintln!("  warning: {w}");
        }
    }
    println!("\naverage life-cycle cumulative reward over {} seeds x 100 life-cycles:", seeds.len());
    for (agent, mean) in &results {
        println!("  {agent:<16} {mean:.3}");
    }
    Ok(())
}
