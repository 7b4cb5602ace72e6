// Cost of exhaustive best-subset search against a single MM fit as the
// number of covariates grows.

use pennmm::simulation::timing_study;

pub fn run_example() -> pennmm::Result<()> {
    let rows = timing_study(&[7, 8, 9], 200, 0.25, 0.08, 1, 2)?;
    println!("{:>3} {:>12} {:>12}", "d", "bic_secs", "mm_secs");
    for r in &rows {
        println!("{:>3} {:>12.5} {:>12.6}", r.d, r.subset_secs, r.mm_secs);
    }
    for w in rows.windows(2) {
        println!(
            "d {} -> {}: subset x{:.2}, mm x{:.2}",
            w[0].d,
            w[1].d,
            w[1].subset_secs / w[0].subset_secs,
            w[1].mm_secs / w[0].mm_secs
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
