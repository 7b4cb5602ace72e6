#[allow(dead_code)]
mod penalty_majorizers {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/penalty_majorizers.rs"));
}

#[test]
fn penalty_majorizers_runs() {
    penalty_majorizers::run_example().expect("penalty_majorizers example should run");
}

#[allow(dead_code)]
mod lasso_linear {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/lasso_linear.rs"));
}

#[test]
fn lasso_linear_runs() {
    lasso_linear::run_example().expect("lasso_linear example should run");
}

#[allow(dead_code)]
mod scad_logistic_gcv {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/scad_logistic_gcv.rs"));
}

#[test]
fn scad_logistic_gcv_runs() {
    scad_logistic_gcv::run_example().expect("scad_logistic_gcv example should run");
}

#[allow(dead_code)]
mod cox_selection {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/cox_selection.rs"));
}

#[test]
fn cox_selection_runs() {
    cox_selection::run_example().expect("cox_selection example should run");
}

#[allow(dead_code)]
mod sandwich_standard_errors {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/sandwich_standard_errors.rs"));
}

#[test]
fn sandwich_standard_errors_runs() {
    sandwich_standard_errors::run_example().expect("sandwich_standard_errors example should run");
}

#[allow(dead_code)]
mod best_subset_timing {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/best_subset_timing.rs"));
}

#[test]
fn best_subset_timing_runs() {
    best_subset_timing::run_example().expect("best_subset_timing example should run");
}

#[allow(dead_code)]
mod rate_diagnostic {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/rate_diagnostic.rs"));
}

#[test]
fn rate_diagnostic_runs() {
    rate_diagnostic::run_example().expect("rate_diagnostic example should run");
}

#[allow(dead_code)]
mod spline_poisson_gcv {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/spline_poisson_gcv.rs"));
}

#[test]
fn spline_poisson_gcv_runs() {
    spline_poisson_gcv::run_example().expect("spline_poisson_gcv example should run");
}

#[allow(dead_code)]
mod simulate_report {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/simulate_report.rs"));
}

#[test]
fn simulate_report_runs() {
    simulate_report::run_example().expect("simulate_report example should run");
}

#[allow(dead_code)]
mod fit_from_csv {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/fit_from_csv.rs"));
}

#[test]
fn fit_from_csv_runs() {
    fit_from_csv::run_example().expect("fit_from_csv example should run");
}
