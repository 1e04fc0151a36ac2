//! Estimator variance on a small K grid, printed as CSV.

use vod::bench::{variance_study, write_variance_csv, BenchConfig};

fn main() -> vod::Result<()> {
    let cfg = BenchConfig {
        k_grid: vec![5, 25, 50, 100],
        replicates: 2_000,
        ..BenchConfig::default()
    };
    write_variance_csv(&variance_study(&cfg, 0)?, std::io::stdout())
}
