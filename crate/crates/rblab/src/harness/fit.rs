use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Singular-value ratio below which a design counts as rank deficient.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fit {
    pub coefficients: Vec<f64>,
    /// Fitted minus observed, per point.
    pub residuals: Vec<f64>,
    pub rmse: f64,
}

/// Least-squares fits of `p0 + p1 n` and, with four or more points,
/// `p0 + p1 n + p2 n^1.5`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub linear: Fit,
    pub power: Option<Fit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingModel {
    Linear,
    Power,
}

impl ScalingFit {
    /// The model with the lower RMSE; the linear model wins ties.
    pub fn selected(&self) -> ScalingModel {
        match &self.power {
            Some(p) if p.rmse < self.linear.rmse => ScalingModel::Power,
            _ => ScalingModel::Linear,
        }
    }
}

fn least_squares(points: &[(f64, f64)], columns: &[fn(f64) -> f64]) -> Result<Fit> {
    let design = DMatrix::from_fn(points.len(), columns.len(), |i, j| columns[j](points[i].0));
    let y = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    let svd = design.clone().svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if !(ratio >= RANK_TOL) {
        return Err(Error::RankDeficient { ratio });
    }
    let coef = svd.solve(&y, 0.0).map_err(|e| Error::Fit(e.to_string()))?;
    let residual = &design * &coef - y;
    let rmse = (residual.norm_squared() / points.len() as f64).sqrt();
    Ok(Fit { coefficients: coef.iter().copied().collect(), residuals: residual.iter().copied().collect(), rmse })
}

pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points for the linear model, got {}", points.len())));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite() || p.0 < 0.0) {
        return Err(Error::Fit("points must be finite with nonnegative n".into()));
    }
    let linear = least_squares(points, &[|_| 1.0, |n| n])?;
    let power = if points.len() >= 4 { Some(least_squares(points, &[|_| 1.0, |n| n, |n| n.powf(1.5)])?) } else { None };
    Ok(ScalingFit { linear, power })
}
