//! Exact binomial moment ratios over a grid of (n, p) and the trend check
//! on the largest np decade.

use histoband::binomial::{central_moment_ratio, default_sweep, inverse_moment_ratio, BinomSpec};

fn main() -> histoband::Result<()> {
    for q in [2u32, 4] {
        println!("q = {q}");
        for n in [50u64, 200, 800, 3200] {
            let spec = BinomSpec::new(n, 0.1, q)?;
            println!(
                "  n = {n:>5}  np = {:>6.1}  central/(np)^(q/2) = {:.4}  inverse*(np)^(3q/2) = {:.4}",
                spec.mean(),
                central_moment_ratio(&spec),
                inverse_moment_ratio(&spec)
            );
        }
    }
    let sweep = default_sweep()?;
    for t in &sweep.trends {
        println!(
            "{} q={}: decade maxima {:?} -> {}",
            t.statistic,
            t.order,
            t.decade_max,
            if t.bounded { "bounded" } else { "growing" }
        );
    }
    println!("verdict: {}, identity residual {:.2e}", sweep.verdict, sweep.max_identity_residual);
    Ok(())
}
