//! Draw a priority sample, inspect the threshold and weights, and compare the
//! unbiased and self-normalized estimates with the exact weighted mean.

use vod::math::softmax;
use vod::sampling::{estimate_weighted_sum, priority_sample, DiscreteDistribution};

fn main() -> vod::Result<()> {
    let f = [2.0, 1.5, 0.3, -0.4, -1.0, 0.8, 0.1, -2.0];
    let p = softmax(&f);
    let dist = DiscreteDistribution::new((0..f.len()).collect(), p.clone())?;
    let exact: f64 = p.iter().zip(&f).map(|(a, b)| a * b).sum();

    let sample = priority_sample(&dist, 3, 42)?;
    println!("items      {:?}", sample.indices);
    println!("threshold  {:.4}", sample.threshold);
    println!("raw        {:?}", sample.raw_weights);
    println!("normalized {:?}", sample.norm_weights);

    let (mut raw, mut sn) = (0.0, 0.0);
    let reps = 20_000;
    for seed in 0..reps {
        let s = priority_sample(&dist, 3, seed)?;
        raw += estimate_weighted_sum(&s, |i| f.get(i).copied(), false)?;
        sn += estimate_weighted_sum(&s, |i| f.get(i).copied(), true)?;
    }
    println!(
        "exact {exact:.4}  unbiased mean {:.4}  self-normalized mean {:.4}",
        raw / reps as f64,
        sn / reps as f64
    );
    Ok(())
}
