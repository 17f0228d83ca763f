//! Train the adversarial generator on a table whose unknown category is a
//! function of its known context, then measure conditional accuracy.
//!
//!     cargo run --release --example conditional_generator

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relsynth::generator::{fit_generator, OutputLayout, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, k) = (300, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let classes: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let known = Array2::from_shape_fn((n, k), |(i, j)| f64::from(u8::from(classes[i] == j)));
    // the unknown category is the known one shifted by one
    let unknown = Array2::from_shape_fn((n, k), |(i, j)| f64::from(u8::from((classes[i] + 1) % k == j)));
    let layout = OutputLayout {
        width: k,
        softmax: vec![0..k],
        values: vec![],
        column: vec![0; k],
    };
    let cfg = TrainConfig { epochs: 200, ..Default::default() };
    let (model, history) = fit_generator(known.view(), unknown.view(), &layout, &cfg)?;
    for h in history.iter().step_by(50) {
        println!(
            "epoch {:>3}  D {:.3}  adv {:.3}  mse {:.4}  mean {:.5}",
            h.epoch, h.discriminator, h.adversarial, h.prediction, h.mean
        );
    }
    let out = model.generate_unknown(known.view(), 1)?;
    let hits = (0..n).filter(|&i| out[[i, (classes[i] + 1) % k]] == 1.0).count();
    println!("conditional accuracy {:.3}", hits as f64 / n as f64);
    Ok(())
}
