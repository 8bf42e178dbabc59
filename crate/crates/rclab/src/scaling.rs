//! Predicted critical exponents as functions of κ(q), the scaling relations
//! between them, and log-log exponent fits.
//!
//! Exponent formulas are generic over any field-like scalar so that rational κ
//! (q = 1, 2, 3, 4) can be checked in exact arithmetic.

use num_traits::{FromPrimitive, Num};
use serde::Serialize;

use crate::{Error, Real, Result};

/// Exponents of the critical model; `iota` is absent where it is not defined (q ≤ 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentSet<T> {
    pub kappa: T,
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub delta: T,
    pub eta: T,
    pub nu: T,
    pub zeta: T,
    pub xi1: T,
    pub xi4: T,
    pub iota: Option<T>,
}

fn c<T: FromPrimitive>(n: i64) -> T {
    T::from_i64(n).expect("small integer representable")
}

impl<T: Num + Copy + FromPrimitive> ExponentSet<T> {
    /// All exponents from κ; `with_iota` controls whether `ι = 3κ/8 - 1` is reported.
    pub fn from_kappa(k: T, with_iota: bool) -> Self {
        let (two, three, six, eight) = (c::<T>(2), c::<T>(3), c::<T>(6), c::<T>(8));
        let a = eight - k;
        let b = three * k - eight;
        ExponentSet {
            kappa: k,
            alpha: two * (c::<T>(16) - three * k) / (three * a),
            beta: b / (c::<T>(12) * k),
            gamma: (three * k * k + c::<T>(64)) / (six * k * a),
            delta: (eight + k) * (eight + three * k) / (a * b),
            eta: a * b / (c::<T>(16) * k),
            nu: eight / (three * a),
            zeta: a * b / ((eight + k) * (three * k + eight)),
            xi1: a * b / (c::<T>(32) * k),
            xi4: T::one() - k / eight + six / k,
            iota: with_iota.then(|| three * k / eight - T::one()),
        }
    }
}

/// `κ(q) = 4π / arccos(-√q / 2)`.
pub fn kappa<T: Real>(q: T) -> T {
    T::lit(4.0) * T::PI() / (-(q.sqrt()) / T::lit(2.0)).acos()
}

/// Table values at cluster weight `q ∈ (0, 4]`.
pub fn predicted<T: Real>(q: T) -> Result<ExponentSet<T>> {
    if !(q > T::zero() && q <= T::lit(4.0)) {
        return Err(Error::InvalidParameter(format!("q = {q} outside (0, 4]")));
    }
    Ok(ExponentSet::from_kappa(kappa(q), q > T::one()))
}

/// Residuals of R1–R7 (R7 only when ι is defined).
pub fn check_relations<T: Num + Copy + FromPrimitive>(e: &ExponentSet<T>) -> Vec<(&'static str, T)> {
    let (one, two) = (T::one(), c::<T>(2));
    let mut out = vec![
        ("R1", e.eta - two * e.xi1),
        ("R2", e.zeta - e.xi1 / (two - e.xi1)),
        ("R3", e.delta - (two - e.xi1) / e.xi1),
        ("R4", e.beta - e.nu * e.xi1),
        ("R5", e.gamma - (two - two * e.xi1) * e.nu),
        ("R6", e.alpha - (two - two * e.nu)),
    ];
    if let Some(iota) = e.iota {
        out.push(("R7", e.nu * (two - iota) - one));
    }
    out
}

/// One measured point: scale, estimate, standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitPoint {
    pub scale: f64,
    pub estimate: f64,
    pub stderr: f64,
}

/// Fitted decay exponent: `estimate ~ scale^{-slope}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub slope_stderr: f64,
    pub n_points: usize,
    pub weighted: bool,
}

/// Fit excluding the scale `R = 4`.
pub fn fit_exponent(points: &[FitPoint]) -> Result<Fit> {
    fit_exponent_with(points, &[4.0])
}

/// Least squares of `ln estimate` on `ln scale`. Weighted by `(stderr/estimate)^{-2}`
/// when every error bar is positive, ordinary otherwise (error from the residuals).
pub fn fit_exponent_with(points: &[FitPoint], exclude_scales: &[f64]) -> Result<Fit> {
    let pts: Vec<&FitPoint> = points.iter().filter(|p| !exclude_scales.contains(&p.scale)).collect();
    if pts.len() < 3 {
        return Err(Error::InvalidParameter(format!("{} points; at least 3 needed", pts.len())));
    }
    if let Some(p) = pts.iter().find(|p| !(p.estimate > 0.0) || !(p.scale > 0.0)) {
        return Err(Error::InvalidParameter(format!("nonpositive estimate or scale at R = {}", p.scale)));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.scale.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.estimate.ln()).collect();
    let weighted = pts.iter().all(|p| p.stderr > 0.0);
    let ws: Vec<f64> = if weighted {
        pts.iter().map(|p| (p.estimate / p.stderr).powi(2)).collect()
    } else {
        vec![1.0; pts.len()]
    };
    let sw: f64 = ws.iter().sum();
    let xm = ws.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = ws.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = ws.iter().zip(&xs).map(|(w, x)| w * (x - xm) * (x - xm)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidParameter("scales must not all coincide".into()));
    }
    let sxy: f64 = ws.iter().zip(xs.iter().zip(&ys)).map(|(w, (x, y))| w * (x - xm) * (y - ym)).sum();
    let b = sxy / sxx;
    let se = if weighted {
        (1.0 / sxx).sqrt()
    } else {
        let a = ym - b * xm;
        let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
        (rss / (pts.len() - 2) as f64 / sxx).sqrt()
    };
    Ok(Fit { slope: -b, slope_stderr: se, n_points: pts.len(), weighted })
}

/// One line of a measured-versus-predicted report.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonRow {
    pub exponent: String,
    pub q: f64,
    pub predicted: f64,
    pub measured: f64,
    pub stderr: f64,
    pub n_scales: usize,
}

/// Exponent governing the decay of a named observable (`pi1`, `pi4`, `delta`).
pub fn exponent_for_observable(obs: &str, e: &ExponentSet<f64>) -> Option<(&'static str, f64)> {
    match obs {
        "pi1" => Some(("xi1", e.xi1)),
        "pi4" => Some(("xi4", e.xi4)),
        "delta" => e.iota.map(|i| ("iota", i)),
        _ => None,
    }
}
