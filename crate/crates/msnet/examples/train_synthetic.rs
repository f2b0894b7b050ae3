//! Trains the default network on a synthetic dataset and prints the log.
//!
//! ```bash
//! cargo run --release -p msnet --example train_synthetic -- 40 100
//! ```
//! Arguments: patients per class (default 40), epochs (default 100).

use std::time::Instant;

use msnet::data::{generate_synthetic, SynthConfig};
use msnet::train::{train, TrainConfig};

fn main() -> msnet::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let per_class = args.next().unwrap_or(40);
    let epochs = args.next().unwrap_or(100);

    let data = generate_synthetic(&SynthConfig {
        patients_per_class: [per_class; 3],
        seed: 7,
        ..SynthConfig::default()
    })?;
    let config = TrainConfig {
        epochs,
        seed: 7,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let outcome = train(&data, &config)?;
    for e in &outcome.log.epochs {
        println!("epoch {:>3}  loss {:.5}  val acc {:.4}", e.epoch, e.train_loss, e.val_accuracy);
    }
    println!(
        "best epoch {} (val acc {:.4}) in {:.1}s",
        outcome.log.best_epoch,
        outcome.log.best_val_accuracy,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
