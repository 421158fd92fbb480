//! Orthonormal Hermite functions by the three-term recurrence.
//!
//! The recurrence is run on a mantissa with a running natural-log scale so
//! that the Gaussian factor `exp(-t^2/2)` never underflows before the
//! polynomial part has grown. `h_k(t) = mantissa[k] * exp(log_scale[k])`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const RESCALE_HIGH: f64 = 1e150;
const RESCALE_LOW: f64 = 1e-150;

/// `pi^{-1/4}`, the value of `h_0(0)`.
pub fn h0_at_zero() -> f64 {
    PI.powf(-0.25)
}

/// Hermite function values `h_0(t), ..., h_{k_max}(t)` in scaled form.
#[derive(Debug, Clone)]
pub struct ScaledHermite {
    mantissa: Vec<f64>,
    log_scale: Vec<f64>,
}

impl ScaledHermite {
    pub fn new(k_max: usize, t: f64) -> Self {
        Self::with_seed(k_max, t, -0.5 * t * t)
    }

    /// Runs the recurrence without the Gaussian factor, giving the
    /// polynomial parts `h_k(t) exp(t^2/2)`.
    pub fn polynomial_part(k_max: usize, t: f64) -> Self {
        Self::with_seed(k_max, t, 0.0)
    }

    fn with_seed(k_max: usize, t: f64, seed_scale: f64) -> Self {
        let mut mantissa = Vec::with_capacity(k_max + 1);
        let mut log_scale = Vec::with_capacity(k_max + 1);
        let mut scale = seed_scale;
        let mut prev = 0.0_f64;
        let mut cur = h0_at_zero();
        mantissa.push(cur);
        log_scale.push(scale);
        for k in 0..k_max {
            let kf = k as f64;
            let next = t * (2.0 / (kf + 1.0)).sqrt() * cur - (kf / (kf + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
            let big = cur.abs().max(prev.abs());
            if big > RESCALE_HIGH || (big < RESCALE_LOW && big > 0.0) {
                prev /= big;
                cur /= big;
                scale += big.ln();
            }
            mantissa.push(cur);
            log_scale.push(scale);
        }
        Self {
            mantissa,
            log_scale,
        }
    }

    pub fn k_max(&self) -> usize {
        self.mantissa.len() - 1
    }

    pub fn value(&self, k: usize) -> f64 {
        let m = self.mantissa[k];
        if m == 0.0 {
            0.0
        } else {
            m * self.log_scale[k].exp()
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.mantissa.len()).map(|k| self.value(k)).collect()
    }

    /// `h_a(t) / h_b(t)` computed without leaving the scaled representation.
    pub fn ratio(&self, a: usize, b: usize) -> f64 {
        self.mantissa[a] / self.mantissa[b] * (self.log_scale[a] - self.log_scale[b]).exp()
    }

    /// `ln sum_{k <= upto} h_k(t)^2`.
    pub fn log_sum_squares(&self, upto: usize) -> f64 {
        let top = self.log_scale[..=upto]
            .iter()
            .zip(&self.mantissa[..=upto])
            .filter(|(_, m)| **m != 0.0)
            .map(|(s, _)| *s)
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = self.mantissa[..=upto]
            .iter()
            .zip(&self.log_scale[..=upto])
            .map(|(m, s)| m * m * (2.0 * (s - top)).exp())
            .sum();
        sum.ln() + 2.0 * top
    }
}

/// Values `h_0(t), ..., h_{k_max}(t)`; rejects non-finite `t`.
pub fn eval_hermite_1d(k_max: usize, t: f64) -> Result<Vec<f64>> {
    if !t.is_finite() {
        return Err(Error::NonFinite("hermite argument"));
    }
    Ok(hermite_values(k_max, t))
}

pub(crate) fn hermite_values(k_max: usize, t: f64) -> Vec<f64> {
    ScaledHermite::new(k_max, t).values()
}

/// `h_k'(t)` from the ladder identity `2 h_k' = sqrt(2k) h_{k-1} - sqrt(2k+2) h_{k+1}`.
pub fn hermite_derivative_1d(k: usize, t: f64) -> Result<f64> {
    let h = eval_hermite_1d(k + 1, t)?;
    let kf = k as f64;
    let lower = if k == 0 { 0.0 } else { (2.0 * kf).sqrt() * h[k - 1] };
    Ok(0.5 * (lower - (2.0 * kf + 2.0).sqrt() * h[k + 1]))
}

/// Table `d[r][k] = h_k^{(r)}(t)` for `r <= order`, `k <= k_max`, built from
/// the ladder identity applied `r` times.
pub fn hermite_derivative_table(k_max: usize, order: usize, t: f64) -> Vec<Vec<f64>> {
    let top = k_max + order;
    let mut table = Vec::with_capacity(order + 1);
    table.push(hermite_values(top, t));
    for r in 0..order {
        let prev: &Vec<f64> = &table[r];
        let len = top - r; // entries 0..len valid on the next row
        let next: Vec<f64> = (0..len)
            .map(|k| {
                let kf = k as f64;
                let lower = if k == 0 { 0.0 } else { (kf / 2.0).sqrt() * prev[k - 1] };
                lower - ((kf + 1.0) / 2.0).sqrt() * prev[k + 1]
            })
            .collect();
        table.push(next);
    }
    for row in table.iter_mut() {
        row.truncate(k_max + 1);
    }
    table
}

/// Exact moments `m[b][k] = \int y^b h_k(y) dy` for `b <= b_max`, `k <= k_max`.
///
/// Uses `\int h_k = sqrt((k-1)/k) \int h_{k-2}` and multiplication by `y`
/// through `y h_k = sqrt(k/2) h_{k-1} + sqrt((k+1)/2) h_{k+1}`.
pub fn hermite_moments(k_max: usize, b_max: usize) -> Vec<Vec<f64>> {
    let top = k_max + b_max + 1;
    let mut base = vec![0.0; top + 1];
    base[0] = 2.0_f64.sqrt() * PI.powf(0.25);
    let mut k = 2;
    while k <= top {
        base[k] = base[k - 2] * ((k as f64 - 1.0) / k as f64).sqrt();
        k += 2;
    }
    let mut rows = vec![base];
    for b in 1..=b_max {
        let prev = &rows[b - 1];
        let len = top + 1 - b;
        let row: Vec<f64> = (0..len)
            .map(|k| {
                let kf = k as f64;
                let lower = if k == 0 { 0.0 } else { (kf / 2.0).sqrt() * prev[k - 1] };
                lower + ((kf + 1.0) / 2.0).sqrt() * prev[k + 1]
            })
            .collect();
        rows.push(row);
    }
    for row in rows.iter_mut() {
        row.truncate(k_max + 1);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Physicists' Hermite polynomial by the textbook recurrence, for small k.
    fn physicists_h(k: usize, t: f64) -> f64 {
        let (mut a, mut b) = (1.0, 2.0 * t);
        if k == 0 {
            return a;
        }
        for n in 1..k {
            let c = 2.0 * t * b - 2.0 * n as f64 * a;
            a = b;
            b = c;
        }
        b
    }

    fn closed_form(k: usize, t: f64) -> f64 {
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        physicists_h(k, t) * (-t * t / 2.0).exp() / (2f64.powi(k as i32) * fact * PI.sqrt()).sqrt()
    }

    #[test]
    fn h0_at_origin() {
        let v = eval_hermite_1d(0, 0.0).unwrap();
        assert_eq!(v.len(), 1);
        assert_relative_eq!(v[0], 0.7511255444649425, epsilon = 1e-15);
    }

    #[test]
    fn h1_and_h2_closed_forms() {
        let v = eval_hermite_1d(1, 1.0).unwrap();
        let expected = 2f64.sqrt() * PI.powf(-0.25) * (-0.5f64).exp();
        assert_relative_eq!(v[1], expected, epsilon = 1e-15);
        assert_relative_eq!(v[1], 0.644289, epsilon = 1e-6);
        let v = eval_hermite_1d(2, 0.0).unwrap();
        assert_relative_eq!(v[2], -1.0 / (2f64.sqrt() * PI.powf(0.25)), epsilon = 1e-15);
    }

    #[test]
    fn matches_polynomial_closed_form() {
        for &t in &[-3.1, -0.4, 0.0, 0.7, 2.5, 5.0] {
            let v = eval_hermite_1d(12, t).unwrap();
            for (k, vk) in v.iter().enumerate() {
                assert_relative_eq!(*vk, closed_form(k, t), epsilon = 1e-12, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn nan_is_rejected() {
        assert!(eval_hermite_1d(3, f64::NAN).is_err());
        assert!(eval_hermite_1d(3, f64::INFINITY).is_err());
    }

    #[test]
    fn stable_far_in_the_tail() {
        for &t in &[-80.0, -45.0, 38.7, 60.0, 80.0] {
            let v = eval_hermite_1d(2000, t).unwrap();
            assert!(v.iter().all(|x| x.is_finite()));
            // Turning point of h_2000 is about 63.3, so h_2000(60) is O(1e-2) not zero.
            if t == 60.0 {
                assert!(v[2000].abs() > 1e-6);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let t = 0.7;
        let d = hermite_derivative_1d(1, t).unwrap();
        let h = eval_hermite_1d(2, t).unwrap();
        assert_relative_eq!(d, (2f64.sqrt() * h[0] - 2.0 * h[2]) / 2.0, epsilon = 1e-15);
        let step = 1e-5;
        let fd = (eval_hermite_1d(1, t + step).unwrap()[1] - eval_hermite_1d(1, t - step).unwrap()[1])
            / (2.0 * step);
        assert_relative_eq!(d, fd, epsilon = 1e-9);
    }

    #[test]
    fn derivative_table_second_order() {
        let t = -1.3;
        let table = hermite_derivative_table(6, 2, t);
        for k in 0..=6 {
            let step = 1e-4;
            let f = |s: f64| hermite_values(k, s)[k];
            let fd2 = (f(t + step) - 2.0 * f(t) + f(t - step)) / (step * step);
            assert_relative_eq!(table[2][k], fd2, epsilon = 1e-6);
        }
    }

    #[test]
    fn moments_match_gaussian_integrals() {
        let m = hermite_moments(4, 2);
        // \int h_0 = sqrt(2) pi^{1/4}
        assert_relative_eq!(m[0][0], 2f64.sqrt() * PI.powf(0.25), epsilon = 1e-14);
        assert_eq!(m[0][1], 0.0);
        // \int y h_1 = \int sqrt(2) y^2 pi^{-1/4} e^{-y^2/2} = sqrt(2) pi^{-1/4} sqrt(2 pi) = 2 pi^{1/4}
        assert_relative_eq!(m[1][1], 2.0 * PI.powf(0.25), epsilon = 1e-14);
        // \int y^2 h_0 = pi^{-1/4} sqrt(2 pi)
        assert_relative_eq!(m[2][0], PI.powf(-0.25) * (2.0 * PI).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn log_sum_of_squares_in_tail() {
        let s = ScaledHermite::new(10, 50.0);
        let direct: f64 = (0..=10).map(|k| s.value(k).powi(2)).sum();
        assert_eq!(direct, 0.0); // underflows in plain arithmetic
        assert!(s.log_sum_squares(10).is_finite());
        let near = ScaledHermite::new(10, 3.0);
        let direct: f64 = (0..=10).map(|k| near.value(k).powi(2)).sum();
        assert_relative_eq!(near.log_sum_squares(10), direct.ln(), epsilon = 1e-13);
    }
}
