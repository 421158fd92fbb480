//! Forward differences in the spectral index.

use crate::error::{Error, Result};

/// `C(n, k)` as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `order`-fold forward difference `(Delta f)(k) = f(k+1) - f(k)`; the result
/// has `len - order` entries.
pub fn finite_difference(seq: &[f64], order: usize) -> Result<Vec<f64>> {
    if seq.len() <= order {
        return Err(Error::InsufficientLength {
            len: seq.len(),
            order,
        });
    }
    let mut cur = seq.to_vec();
    for _ in 0..order {
        cur = cur.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(cur)
}

/// Right-hand side of the discrete Leibniz rule,
/// `sum_r C(l, r) Delta^r f(k) Delta^{l-r} g(k + r)`.
pub fn leibniz_difference(f: &[f64], g: &[f64], order: usize) -> Result<Vec<f64>> {
    let len = f.len().min(g.len());
    if len <= order {
        return Err(Error::InsufficientLength { len, order });
    }
    let out_len = len - order;
    let mut out = vec![0.0; out_len];
    for r in 0..=order {
        let df = finite_difference(&f[..len], r)?;
        let dg = finite_difference(&g[..len], order - r)?;
        let c = binomial(order, r);
        for (k, slot) in out.iter_mut().enumerate() {
            *slot += c * df[k] * dg[k + r];
        }
    }
    Ok(out)
}
