//! Run the self-check suite and print its report.

use vod::oracle::{run_oracle_suite, OracleConfig};

fn main() -> vod::Result<()> {
    let report = run_oracle_suite(&OracleConfig::default(), 0)?;
    report.write(std::io::stdout())?;
    println!("all passed: {}", report.all_passed());
    Ok(())
}
