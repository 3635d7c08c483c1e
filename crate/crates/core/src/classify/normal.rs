/// Standard normal CDF via the Abramowitz and Stegun 26.2.17 rational
/// polynomial; absolute error below 7.5e-8 everywhere.
pub fn standard_normal_cdf(x: f64) -> f64 {
    // Reflection keeps the identity cdf(x) + cdf(-x) = 1 exact; zero is
    // pinned so a zero z score yields p = 1 exactly.
    if x == 0.0 {
        return 0.5;
    }
    if x < 0.0 {
        return 1.0 - standard_normal_cdf(-x);
    }
    let t = 1.0 / (1.0 + 0.231_641_9 * x);
    let poly = t
        * (0.319_381_530
            + t * (-0.356_563_782
                + t * (1.781_477_937 + t * (-1.821_255_978 + t * 1.330_274_429))));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    1.0 - pdf * poly
}
