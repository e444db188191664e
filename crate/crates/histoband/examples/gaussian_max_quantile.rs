//! Quantiles of the maximum of J independent |N(0,1)| and how they grow
//! with the number of cells.

use histoband::bands::{gaussian_max_cdf, gaussian_max_quantile, QuantileSpec};

fn main() -> histoband::Result<()> {
    let betas = [0.01, 0.05, 0.1, 0.5];
    print!("{:>8}", "J");
    for b in betas {
        print!(" {:>10}", format!("beta={b}"));
    }
    println!(" {:>12}", "sqrt(2lnJ)");
    for cells in [1usize, 10, 100, 1_000, 10_000, 1_000_000] {
        print!("{cells:>8}");
        for beta in betas {
            let c = gaussian_max_quantile(QuantileSpec::new(cells, beta)?);
            assert!((gaussian_max_cdf(c, cells) - (1.0 - beta)).abs() < 1e-12);
            print!(" {c:>10.6}");
        }
        println!(" {:>12.6}", (2.0 * (cells as f64).ln()).sqrt());
    }
    Ok(())
}
