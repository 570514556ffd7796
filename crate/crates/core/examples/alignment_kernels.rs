//! Soft-DTW and bar-level EMD: values against their references, and gradients.
//!
//! cargo run --release --example alignment_kernels

use motionbeat::align::{emd_1d, emd_oracle, grad_check_emd, grad_check_soft_dtw, hard_dtw_oracle, soft_dtw, SoftDtwConfig};

fn main() -> motionbeat::Result<()> {
    let onset = [0.9, 0.1, 0.6, 0.0, 0.8, 0.2];
    let contact = [0.1, 0.8, 0.2, 0.5, 0.0, 0.9];
    let hard = hard_dtw_oracle(&onset, &contact);
    println!("hard DTW {hard:.6}");
    for gamma in [1.0, 0.1, 0.01, 1e-3] {
        let r = soft_dtw(&onset, &contact, SoftDtwConfig { gamma })?;
        println!("  soft-DTW gamma {gamma:<6} value {:.6}  gap {:.2e}", r.value, hard - r.value);
    }
    let err = grad_check_soft_dtw(&onset, &contact, 0.1, 1e-6)?;
    println!("soft-DTW gradient vs finite differences: max relative error {err:.2e}");

    let accent = [0.5, 0.1, 0.3, 0.1];
    let energy = [0.1, 0.4, 0.1, 0.4];
    let r = emd_1d(&accent, &energy)?;
    println!("EMD {:.6} (transport reference {:.6})", r.value, emd_oracle(&accent, &energy));
    println!("  subgradient wrt accent mass {:?}", r.grad_p);
    let err = grad_check_emd(&accent, &energy, 1e-7)?;
    println!("EMD gradient vs finite differences: max relative error {err:.2e}");
    Ok(())
}
