//! Sweeps the learning rate and compares measured stability to the matching
//! guarantee at every level, using the same TOML config format and sweep
//! machinery the command-line front end exposes. Outputs land in
//! `target/example-out/` as CSV and SVG.
//!
//!     cargo run --example sweep_learning_rate

use std::fs;
use std::path::Path;

use sgda_lab::config::ExperimentConfig;
use sgda_lab::plot::render_measure_plot;
use sgda_lab::report::write_rows_csv;
use sgda_lab::sweep::run_sweep;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg: ExperimentConfig = toml::from_str(
        r#"
        [problem]
        kind = "quad_scsc"

        [topology]
        kind = "ring"
        m = 8

        [data]
        n = 50

        [run]
        rounds = 25
        local_steps = 5
        seed_base = 7000
        seed_count = 10
        schedule = { kind = "fixed", c = 0.01 }

        [sweep]
        axis = "learning_rate"
        values = [0.002, 0.005, 0.01, 0.02, 0.05]
        "#,
    )?;
    let seeds = cfg.run.resolve_seeds(None);
    let rows = run_sweep(&cfg, &seeds, 0)?;

    println!(
        "{:>8} {:>22} {:>12} {:>10} {:>12} {:>8}",
        "rate", "measure", "mean", "std", "bound", "ratio"
    );
    for row in &rows {
        let (bound, ratio) = match row.bound {
            Some(b) => (format!("{b:.4e}"), format!("{:.4}", row.mean / b)),
            None => ("-".into(), "-".into()),
        };
        println!(
            "{:>8} {:>22} {:>12.4e} {:>10.2e} {:>12} {:>8}",
            row.value, row.measure, row.mean, row.std, bound, ratio
        );
    }

    // Every cell must sit under its guarantee.
    let violations = rows
        .iter()
        .filter(|r| matches!(r.bound, Some(b) if r.mean > b))
        .count();
    println!("\ncells above their bound: {violations}");

    let out = Path::new("target/example-out");
    fs::create_dir_all(out)?;
    write_rows_csv(&out.join("learning_rate_sweep.csv"), &rows)?;
    let svg = render_measure_plot(&rows, "learning rate", "argument_stability")?;
    fs::write(out.join("learning_rate_sweep.svg"), svg)?;
    println!("wrote {}/learning_rate_sweep.{{csv,svg}}", out.display());
    Ok(())
}
