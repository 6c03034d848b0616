//! Special functions.

/// Bessel function of the first kind, order zero.
///
/// Polynomial approximations from Abramowitz & Stegun 9.4.1 / 9.4.3;
/// absolute error below 1e-7 on the whole real line.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 3.0 {
        let y = (ax / 3.0).powi(2);
        1.0 + y
            * (-2.249_999_7
                + y * (1.265_620_8
                    + y * (-0.316_386_6 + y * (0.044_447_9 + y * (-0.003_944_4 + y * 0.000_210_0)))))
    } else {
        let y = 3.0 / ax;
        let f0 = 0.797_884_56
            + y * (-0.000_000_77
                + y * (-0.005_527_40
                    + y * (-0.000_095_12
                        + y * (0.001_372_37 + y * (-0.000_728_05 + y * 0.000_144_76)))));
        let theta = ax - 0.785_398_16
            + y * (-0.041_663_97
                + y * (-0.000_039_54
                    + y * (0.002_625_73
                        + y * (-0.000_541_25 + y * (-0.000_293_33 + y * 0.000_135_58)))));
        f0 * theta.cos() / ax.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // J0(x) = (1/pi) * int_0^pi cos(x sin t) dt, composite Simpson.
    fn j0_quadrature(x: f64) -> f64 {
        let n = 20_000;
        let h = PI / n as f64;
        let f = |t: f64| (x * t.sin()).cos();
        let mut s = f(0.0) + f(PI);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0 / PI
    }

    #[test]
    fn matches_quadrature() {
        let mut x = -12.0;
        while x <= 12.0 {
            let err = (bessel_j0(x) - j0_quadrature(x)).abs();
            assert!(err < 1e-7, "x={x} err={err}");
            x += 0.0137;
        }
    }

    #[test]
    fn known_points() {
        assert_eq!(bessel_j0(0.0), 1.0);
        // first zero
        assert!(bessel_j0(2.404_825_557_695_773).abs() < 1e-7);
    }
}
