//! Small combinatorial helpers shared by the formula modules.

/// Binomial coefficient `C(n, r)` as a float; zero when `r > n`.
pub fn binomial(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    let mut acc = 1.0;
    for i in 0..r {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Central difference `(g(x + h) - g(x - h)) / 2h`.
pub fn central_difference<F>(g: F, x: f64, h: f64) -> crate::Result<f64>
where
    F: Fn(f64) -> crate::Result<f64>,
{
    Ok((g(x + h)? - g(x - h)?) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_table() {
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(5, 5), 1.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert_eq!(binomial(30, 15), 155_117_520.0);
    }
}
