//! Finite-difference check of every layer in the network kit.

use otfs_pnp::nn::check::layer_suite;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for c in layer_suite(1, 1e-3)? {
        println!("{:<18} params {:.1e}  inputs {:.1e}", c.label, c.param_rel_err, c.input_rel_err);
    }
    Ok(())
}
