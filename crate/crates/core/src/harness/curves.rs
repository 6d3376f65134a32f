//! Gradient-weight curves `|dL/df_y|` over a grid of `f_y` values.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::losses::{weight_curve, LossSpec};

pub const MIN_RESOLUTION: usize = 10;

/// The interior grid `i / resolution` for `i = 1..resolution`.
pub fn curve_grid(resolution: usize) -> Result<Vec<f64>> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::Configuration(format!(
            "curve resolution must be at least {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    Ok((1..resolution).map(|i| i as f64 / resolution as f64).collect())
}

/// CSV with an `f_y` column followed by one column per loss, headed by the
/// loss's spec string (for example `gce:0.7`).
pub fn curves_csv(specs: &[LossSpec], resolution: usize) -> Result<String> {
    if specs.is_empty() {
        return Err(Error::Configuration("no losses given".into()));
    }
    let grid = curve_grid(resolution)?;
    let columns = specs
        .iter()
        .map(|s| weight_curve(s, &grid))
        .collect::<Result<Vec<_>>>()?;
    let mut out = String::from("f_y");
    for s in specs {
        write!(out, ",{s}").expect("writing to a String");
    }
    out.push('\n');
    for (i, fy) in grid.iter().enumerate() {
        write!(out, "{fy}").expect("writing to a String");
        for col in &columns {
            write!(out, ",{}", col[i]).expect("writing to a String");
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(csv: &str, idx: usize) -> Vec<f64> {
        csv.lines()
            .skip(1)
            .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
            .collect()
    }

    #[test]
    fn resolution_floor() {
        assert!(curve_grid(9).is_err());
        assert_eq!(curve_grid(10).unwrap().len(), 9);
    }

    #[test]
    fn known_columns() {
        let specs = [LossSpec::Ce, LossSpec::Gce { q: 1.0 }, LossSpec::Tce { t: 2 }];
        let csv = curves_csv(&specs, 10).unwrap();
        assert_eq!(csv.lines().next(), Some("f_y,ce,gce:1,tce:2"));
        let ce = column(&csv, 1);
        assert!((ce[0] - 10.0).abs() < 1e-12);
        assert!(column(&csv, 2).iter().all(|&v| v == 1.0));
        // CE and TCE weights fall as f_y grows.
        assert!(ce.windows(2).all(|w| w[1] < w[0]));
        assert!(column(&csv, 3).windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn gce_above_one_rises() {
        let csv = curves_csv(&[LossSpec::Gce { q: 1.5 }, LossSpec::Gce { q: 0.5 }], 20).unwrap();
        assert!(column(&csv, 1).windows(2).all(|w| w[1] > w[0]));
        assert!(column(&csv, 2).windows(2).all(|w| w[1] < w[0]));
    }
}
