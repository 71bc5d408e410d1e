//! Finite-difference gradient checks, the convolution oracle and the
//! per-neuron forward check, as run by `acav selftest`.

use acav::selftest::run_selftest;

fn main() -> acav::Result<()> {
    let r = run_selftest(100, 100, 0)?;
    println!(
        "gradients: {} coordinates on {} models, {} kink crossings skipped, max rel err {:.2e}, {} failures",
        r.gradient.checked, r.gradient_models, r.gradient.skipped_kinks, r.gradient.max_relative_error, r.gradient.failures
    );
    println!("conv oracle: {} cases, {} mismatches", r.conv_cases, r.conv_mismatches);
    println!("per-neuron forward: max abs err {:.2e}", r.max_neuron_error);
    println!("{}", if r.passed() { "PASS" } else { "FAIL" });
    Ok(())
}
