//! Rank-one tracking of `S_n`, its inverse and log-determinant, checked
//! against a fresh Cholesky factorization.

use asclt_lab::{GramState, SymMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> asclt_lab::Result<()> {
    let d = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut gram = GramState::with_refresh_interval(SymMatrix::identity(d), 1000)?;
    let mut s = SymMatrix::identity(d);

    println!("{:>6} {:>10} {:>14} {:>12} {:>12}", "n", "f_n", "log det S_n", "inv err", "logdet err");
    for n in 1..=5000 {
        let phi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let f = gram.rank_one_update(&phi)?;
        s.add_outer(&phi, 1.0);
        if n % 1000 == 0 {
            let chol = s.cholesky()?;
            let inv_err = gram.s_inv().max_abs_diff(&chol.inverse());
            let ld_err = (gram.log_det() - chol.log_det()).abs();
            println!("{n:>6} {f:>10.3e} {:>14.6} {inv_err:>12.2e} {ld_err:>12.2e}", gram.log_det());
        }
    }
    // f_n = 1 - d_{n-1}/d_n, so n f_n -> d under a stable design
    println!("net log det {:.4}, approx d log n = {:.4}", gram.log_det_net(), d as f64 * 5000f64.ln());
    Ok(())
}
