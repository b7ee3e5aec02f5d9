//! Central finite differences over the 8 box channels.

/// Step size relative to `max(|v|, 1)`.
pub const FD_REL_STEP: f64 = 1e-6;

pub fn relative_step(v: f64) -> f64 {
    FD_REL_STEP * v.abs().max(1.0)
}

/// Central-difference gradient of `f` at `x`, one channel at a time.
pub fn central_difference<F>(f: F, x: [f64; 8]) -> [f64; 8]
where
    F: Fn(&[f64; 8]) -> f64,
{
    let mut probe = x;
    std::array::from_fn(|i| {
        let h = relative_step(x[i]);
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        (up - down) / (2.0 * h)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let f = |v: &[f64; 8]| v.iter().enumerate().map(|(i, x)| (i as f64 + 1.0) * x * x).sum();
        let x = [1.0, -2.0, 0.5, 3.0, 0.0, 1.0, -1.0, 2.0];
        let g = central_difference(f, x);
        for i in 0..8 {
            let exact = 2.0 * (i as f64 + 1.0) * x[i];
            assert!((g[i] - exact).abs() < 1e-6, "{i}: {} vs {exact}", g[i]);
        }
    }
}
