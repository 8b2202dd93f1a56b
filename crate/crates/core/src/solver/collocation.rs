use super::{qr_least_squares, DenseMatrix, LuFactors};
use crate::error::{Error, Result};
use crate::model::exp_product;
use twofloat::TwoFloat;

/// Coefficients of an exponential collocation fit.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationFit {
    /// One coefficient per rate, in the order the rates were given.
    pub coefficients: Vec<f64>,
    pub constant: Option<f64>,
    /// `‖E c − values‖₂` over all points.
    pub residual: f64,
}

/// Solves `Σₙ cₙ e^{αₙ tᵢ} (+ c₀) = valuesᵢ` for the coefficients.
///
/// Square systems go through LU, taller ones through Householder least
/// squares. Columns are equilibrated first.
pub fn exp_collocation_solve(
    rates: &[f64],
    points: &[f64],
    values: &[f64],
    constant_term: bool,
) -> Result<CollocationFit> {
    let unknowns = rates.len() + usize::from(constant_term);
    if unknowns == 0 {
        return Err(Error::InvalidInput("no unknowns in collocation solve".into()));
    }
    if points.len() != values.len() {
        return Err(Error::InvalidInput(format!(
            "{} points but {} values",
            points.len(),
            values.len()
        )));
    }
    if points.len() < unknowns {
        return Err(Error::InsufficientRecords {
            required: unknowns,
            got: points.len(),
        });
    }
    for (i, a) in rates.iter().enumerate() {
        if rates[..i].contains(a) {
            return Err(Error::InvalidInput(format!("rate {a} appears twice")));
        }
    }
    for (i, t) in points.iter().enumerate() {
        if points[..i].contains(t) {
            return Err(Error::InvalidInput(format!("point {t} appears twice")));
        }
    }

    let mut data = Vec::with_capacity(points.len() * unknowns);
    for &t in points {
        for &a in rates {
            data.push(exp_product(a, t)?);
        }
        if constant_term {
            data.push(1.0);
        }
    }
    let e = DenseMatrix::new(points.len(), unknowns, data)?;

    let (solution, residual) = if points.len() == unknowns {
        let (scaled, scales) = e.equilibrate_columns();
        let lu = LuFactors::factor(&scaled)?;
        let y = lu.solve(values);
        let x: Vec<f64> = y.iter().zip(&scales).map(|(v, s)| v * s).collect();
        let r = e
            .mul_vec(&x)
            .iter()
            .zip(values)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        (x, r)
    } else {
        let (mut x, _) = qr_least_squares(&e, values)?;
        // two refinement sweeps against a compensated residual
        for _ in 0..2 {
            let r: Vec<f64> = (0..e.rows())
                .map(|i| {
                    let mut acc = TwoFloat::from(values[i]);
                    for (j, v) in x.iter().enumerate() {
                        acc -= TwoFloat::new_mul(e[(i, j)], *v);
                    }
                    acc.hi()
                })
                .collect();
            let (dx, _) = qr_least_squares(&e, &r)?;
            for (v, d) in x.iter_mut().zip(&dx) {
                *v += d;
            }
        }
        let r = e
            .mul_vec(&x)
            .iter()
            .zip(values)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        (x, r)
    };

    let (coefficients, constant) = if constant_term {
        let (c, k) = solution.split_at(rates.len());
        (c.to_vec(), Some(k[0]))
    } else {
        (solution, None)
    };
    Ok(CollocationFit {
        coefficients,
        constant,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn cosh_pair() {
        let fit = exp_collocation_solve(&[1.0, -1.0], &[0.0, 1.0], &[2.0, E + 1.0 / E], false).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-14);
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-14);
        assert!(fit.constant.is_none());
    }

    #[test]
    fn single_point_single_term() {
        let fit = exp_collocation_solve(&[0.37], &[0.0], &[4.2], false).unwrap();
        assert_eq!(fit.coefficients, vec![4.2]);
    }

    #[test]
    fn overdetermined_consistent_data() {
        let rates = [-0.7, 0.4];
        let points = [0.2, 0.9, 1.3, 2.2];
        let values: Vec<f64> = points
            .iter()
            .map(|t: &f64| 1.5 * (-0.7 * t).exp() + 0.25 * (0.4 * t).exp())
            .collect();
        let fit = exp_collocation_solve(&rates, &points, &values, false).unwrap();
        let scale = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(fit.residual <= 1e-10 * scale);
        assert!((fit.coefficients[0] - 1.5).abs() < 1e-12);
        assert!((fit.coefficients[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn with_constant_column() {
        let points = [0.5, 1.0, 2.0];
        let values: Vec<f64> = points.iter().map(|t: &f64| 5.0 + (-t).exp()).collect();
        let fit = exp_collocation_solve(&[-1.0], &points, &values, true).unwrap();
        assert!((fit.constant.unwrap() - 5.0).abs() < 1e-13);
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            exp_collocation_solve(&[1.0, 2.0], &[0.0], &[1.0], false),
            Err(Error::InsufficientRecords { required: 2, got: 1 })
        ));
    }
}
