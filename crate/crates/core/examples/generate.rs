//! Greedy and temperature sampling from a briefly trained model.
//!
//! cargo run --release --example generate

use dyntok::generation::{sample_continuation, ContextPolicy, Sampler, SamplerConfig};
use dyntok::training::{train, AdamWConfig, TrainSettings};
use dyntok::transformer::{ModelConfig, PositionEncoding};

fn main() -> dyntok::Result<()> {
    // a period-5 toy language
    let cycle = [3u32, 1, 4, 1, 5];
    let seqs: Vec<Vec<u32>> = (0..8).map(|s| (0..200).map(|i| cycle[(i + s) % 5]).collect()).collect();
    let model = ModelConfig {
        vocab: 8,
        context: 32,
        dim: 32,
        layers: 2,
        heads: 2,
        dropout: 0.0,
        tie_embeddings: true,
        position: PositionEncoding::Learned,
    };
    let hyper = AdamWConfig {
        lr: 3e-3,
        ..AdamWConfig::default()
    };
    let settings = TrainSettings {
        steps: 150,
        batch_size: 4,
        ..TrainSettings::default()
    };
    let run = train(&seqs, &[], &model, &hyper, &settings)?;
    println!("final train loss {:.4}", run.loss_history.last().unwrap());

    let prefix = vec![4, 1, 5];
    for (temperature, context) in [
        (0.0, ContextPolicy::Sliding),
        (0.0, ContextPolicy::Refill { keep: 16 }),
        (1.5, ContextPolicy::Sliding),
    ] {
        let config = SamplerConfig {
            temperature,
            mask_to_observed: true,
            max_new_tokens: 40,
            seed: 11,
            context,
        };
        let sampler = Sampler::new(config, model.vocab, Some(&run.observed_tokens))?;
        let out = sample_continuation(&run.params, &prefix, &sampler)?;
        println!("T = {temperature}, {context:?}: {out:?}");
    }
    Ok(())
}
