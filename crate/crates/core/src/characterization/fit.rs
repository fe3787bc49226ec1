//! Least-squares helpers shared by the fitting methods.

/// Straight line `y = slope * x + intercept` with its coefficient of
/// determination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl LineFit {
    pub fn at(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    /// Abscissa where the line crosses zero.
    pub fn root(&self) -> f64 {
        -self.intercept / self.slope
    }
}

/// Ordinary least squares. Returns `None` with fewer than two points or
/// when all abscissae coincide. A perfect fit of constant data reports
/// `r_squared = 1`.
pub fn line_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let (dx, dy) = (x[k] - mx, y[k] - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = (0..n).map(|k| (y[k] - slope * x[k] - intercept).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Some(LineFit { slope, intercept, r_squared })
}

/// Median of finite values; `None` if there are none.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let f = line_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14);
        assert!((f.root() - 0.5).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        assert!(line_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[f64::NAN]), None);
    }

    proptest! {
        #[test]
        fn residuals_are_orthogonal_to_the_data(y in proptest::collection::vec(-1.0f64..1.0, 3..20)) {
            let x: Vec<f64> = (0..y.len()).map(|k| k as f64).collect();
            let f = line_fit(&x, &y).unwrap();
            let r: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b - f.at(*a)).collect();
            prop_assert!(r.iter().sum::<f64>().abs() < 1e-9);
            prop_assert!(r.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-8);
            prop_assert!(f.r_squared <= 1.0 + 1e-12);
        }
    }
}
