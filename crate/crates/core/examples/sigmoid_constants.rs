//! Quadrature check of the sigmoid scale constants, plus a look at the
//! rule itself.

use sls::quadrature::GaussHermite;
use sls::verify::theorem7_check;

fn main() -> sls::Result<()> {
    let rule = GaussHermite::new(200)?;
    // E[W^4] = 3
    println!("E[W^4] by {}-point rule = {:.15}", rule.len(), rule.expectation(|w| w.powi(4)));

    let r = theorem7_check(601, 200)?;
    println!("ell(6)            = {:.6}", r.ell_at_6);
    println!("min ell'(c), c<=6 = {:.6}", r.min_ell_deriv);
    println!("a = {:.6}, b = {:.6}", r.a, r.b);
    println!("passed = {}", r.passed);
    Ok(())
}
