use std::time::Instant;
use strata::hyperelliptic::{hyp_recursive, hyp_tilde_formula};
use strata::verify::numerical_equal;

fn main() {
    let n: u32 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let t0 = Instant::now();
    let tilde = hyp_tilde_formula(n, false);
    println!("tilde({}): {:?} terms={}", n, t0.elapsed(), tilde.terms.len());
    let t1 = Instant::now();
    let rec = hyp_recursive(n);
    println!("rec({}): {:?} terms={}", n, t1.elapsed(), rec.terms.len());
    let t2 = Instant::now();
    let v = numerical_equal(&tilde, &rec);
    println!("sweep: {:?} status={:?}", t2.elapsed(), v.status);
    if let Some((t, va, vb)) = &v.witness {
        println!("witness: {:?} {} vs {}", t, va, vb);
    }
}
