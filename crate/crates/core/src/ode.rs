use nalgebra::SVector;

/// Classical RK4 over `dt`, split into `substeps` equal steps, for an
/// autonomous right-hand side.
pub(crate) fn rk4<const N: usize>(
    mut x: SVector<f64, N>,
    dt: f64,
    substeps: usize,
    f: impl Fn(&SVector<f64, N>) -> SVector<f64, N>,
) -> SVector<f64, N> {
    let h = dt / substeps as f64;
    for _ in 0..substeps {
        let k1 = f(&x);
        let k2 = f(&(x + k1 * (h / 2.0)));
        let k3 = f(&(x + k2 * (h / 2.0)));
        let k4 = f(&(x + k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector1;

    #[test]
    fn exponential_decay_fourth_order() {
        let err = |n: usize| {
            let x = rk4(Vector1::new(1.0), 1.0, n, |x| -x * 3.0);
            (x[0] - (-3.0f64).exp()).abs()
        };
        let order = (err(20) / err(40)).log2();
        assert!(order > 3.8 && order < 4.2, "{order}");
    }
}
