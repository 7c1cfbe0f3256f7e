//! Runs the gridded study on a synthetic 2×2 grid and prints the table.
//!
//! `cargo run --release -p aggtail --example synthetic_study -- heavy|bounded [n_times] [n_boot] [seed] [p]`

use aggtail::pipeline::{run_study, synthetic_grid, StudyConfig, SynthConfig};

fn main() -> aggtail::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind = args.next().unwrap_or_else(|| "heavy".into());
    let n: usize = args.next().map_or(50_000, |s| s.parse().expect("n_times"));
    let n_boot: usize = args.next().map_or(1000, |s| s.parse().expect("n_boot"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));
    let p_arg: Option<f64> = args.next().map(|s| s.parse().expect("p"));
    let (synth, p) = match kind.as_str() {
        "bounded" => (SynthConfig::bounded_daily(n, seed), 0.98),
        _ => (SynthConfig::heavy_hourly(n, seed), 0.995),
    };
    let p = p_arg.unwrap_or(p);
    let ds = synthetic_grid(&synth)?;
    let cfg = StudyConfig {
        p,
        n_boot,
        seed,
        ..StudyConfig::default()
    };
    let t = std::time::Instant::now();
    let report = run_study(&ds, &cfg)?;
    print!("{}", report.to_table());
    eprintln!("{:.1}s", t.elapsed().as_secs_f64());
    Ok(())
}
