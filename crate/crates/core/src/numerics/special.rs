/// Bessel function of the first kind, order one.
pub fn bessel_j1(x: f64) -> f64 {
    libm::j1(x)
}

/// J₁(x)/x, with the removable singularity at the origin handled by its series.
pub fn j1_over_x(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        // 1/2 − x²/16 + x⁴/384 − x⁶/18432
        0.5 - x2 / 16.0 + x2 * x2 / 384.0 - x2 * x2 * x2 / 18_432.0
    } else {
        libm::j1(x) / x
    }
}

/// Error function, odd by construction.
pub fn erf_fn(x: f64) -> f64 {
    if x < 0.0 {
        -libm::erf(-x)
    } else {
        libm::erf(x)
    }
}

/// sin(x)/x with sinc(0) = 1.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // Jₙ(x) = (1/π)∫₀^π cos(nθ − x sin θ) dθ; the trapezoid rule over a full
    // period of the integrand converges geometrically.
    fn bessel_by_integral(n: i32, x: f64) -> f64 {
        let m = 4096;
        let h = 2.0 * PI / m as f64;
        let mut s = 0.0;
        for i in 0..m {
            let th = i as f64 * h;
            s += (n as f64 * th - x * th.sin()).cos();
        }
        s * h / (2.0 * PI)
    }

    #[test]
    fn j1_origin_and_slope() {
        assert_eq!(bessel_j1(0.0), 0.0);
        assert!((j1_over_x(0.0) - 0.5).abs() < 1e-16);
        assert!((bessel_j1(1e-8) / 1e-8 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn j1_series_joins_smoothly() {
        for x in [9e-4, 1e-3, 1.1e-3] {
            let direct = libm::j1(x) / x;
            assert!((j1_over_x(x) - direct).abs() < 1e-15, "x = {x}");
        }
    }

    #[test]
    fn recurrence_j0_plus_j2() {
        for i in 0..=200 {
            let x = 0.1 + (50.0 - 0.1) * i as f64 / 200.0;
            let lhs = bessel_by_integral(0, x) + bessel_by_integral(2, x);
            let rhs = 2.0 * bessel_j1(x) / x;
            assert!((lhs - rhs).abs() < 1e-10, "x = {x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn j1_against_integral_representation() {
        for x in [0.5, 1.0, std::f64::consts::E, 10.0, 123.4, 999.0] {
            let want = bessel_by_integral(1, x);
            assert!((bessel_j1(x) - want).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn erf_is_odd_bounded_monotone() {
        assert_eq!(erf_fn(0.0), 0.0);
        assert_eq!(erf_fn(40.0), 1.0);
        assert_eq!(erf_fn(f64::INFINITY), 1.0);
        let mut prev = -1.0;
        for i in -600..=600 {
            let x = i as f64 * 0.01;
            let y = erf_fn(x);
            assert_eq!(erf_fn(-x), -y);
            assert!((-1.0..=1.0).contains(&y));
            assert!(y >= prev);
            prev = y;
        }
    }

    #[test]
    fn erf_central_interval() {
        let v = erf_fn(1.0 / 2f64.sqrt());
        assert!((v - 0.682_689_492_137_085_9).abs() < 1e-15);
    }
}
