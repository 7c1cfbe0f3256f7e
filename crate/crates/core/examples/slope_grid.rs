//! Slope checks for the logistic / inverted-logistic grid of sums of two
//! identical GPD margins.
//!
//! `cargo run --release -p aggtail --example slope_grid -- [n] [seed] [p_lo p_hi]`

use aggtail::montecarlo::{default_p_grid, p_grid, verify_prediction, Tolerance};
use aggtail::{CopulaSpec, MarginPair};

fn main() -> aggtail::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(10_000_000, |s| s.parse().expect("n"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));
    let grid = match (args.next(), args.next()) {
        (Some(lo), Some(hi)) => p_grid(lo.parse().expect("p_lo"), hi.parse().expect("p_hi"), 40)?,
        _ => default_p_grid(),
    };
    println!("{:<16} {:>6} {:>10} {:>10} {:>8} {:>6}", "copula", "xi", "predicted", "implied", "rel.err", "pass");
    for family in ["logistic", "invlogistic"] {
        for gamma in [0.3, 0.5, 0.9] {
            let spec: CopulaSpec = format!("{family}:{gamma}").parse()?;
            for xi in [-1.0, 0.0, 0.5, 1.0] {
                let m = MarginPair::from_params(1.0, xi, 1.0, xi)?;
                let t = std::time::Instant::now();
                let v = verify_prediction(&m, &spec, None, n, &grid, Tolerance::default(), seed)?;
                println!(
                    "{:<16} {:>6} {:>10.4} {:>10.4} {:>8.4} {:>6} {:>6.1}s",
                    spec.to_string(),
                    xi,
                    v.predicted,
                    v.implied.unwrap_or(f64::NAN),
                    v.relative_error.unwrap_or(f64::NAN),
                    v.pass,
                    t.elapsed().as_secs_f64()
                );
            }
        }
    }
    Ok(())
}
