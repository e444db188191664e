//! Fit the histogram estimator to a noisy sine curve and print a 95% band
//! using the known noise variance.

use histoband::bands::build_band;
use histoband::estimators::{fit, tau_oracle, Dataset};
use histoband::grid::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> histoband::Result<()> {
    let n = 5000;
    let sigma = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| (6.0 * x).sin() + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let data = Dataset::new(1, xs, ys)?;

    let grid = Grid::new(1, 12)?;
    let hist = fit(&grid, &data)?;
    let tau = tau_oracle(&grid, |_| 1.0, |_| sigma * sigma)?;
    let band = build_band(&hist, &tau, 0.05)?;

    println!("J = {}, c = {:.4}", grid.cell_count(), band.quantile);
    println!("{:>14} {:>6} {:>9} {:>9} {:>9} {:>9}", "cell", "count", "m_hat", "lower", "upper", "m(mid)");
    for cell in grid.cells() {
        let c = cell.linear;
        let (lo, hi) = grid.cell_box(&cell)?;
        let mid = 0.5 * (lo[0] + hi[0]);
        println!(
            "[{:.3},{:.3}) {:>6} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            lo[0],
            hi[0],
            hist.count[c],
            hist.mean_y[c],
            band.lower(c),
            band.upper(c),
            (6.0 * mid).sin()
        );
    }
    Ok(())
}
