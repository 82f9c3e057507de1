//! Marking strategies: single-field criteria and their goal-oriented combinations.
//!
//! Sets are built by growing a prefix of the elements sorted by decreasing
//! indicator (ties by ascending index). Elements with a zero indicator are
//! never marked. Each construction re-checks its defining inequality with the
//! aggregates of the final [`MarkedSet`] and keeps growing if rounding made it fail.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::estimators::{weighted_indicator, IndicatorField};
use crate::mesh::MarkedSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkingError {
    #[error("marking parameter θ must lie in (0, 1], got {0}")]
    Theta(f64),
    #[error("strategy B needs nonzero estimators (η = {eta}, ζ = {zeta})")]
    ZeroEstimator { eta: f64, zeta: f64 },
    #[error("indicator fields have different lengths ({0} vs {1})")]
    MeshMismatch(usize, usize),
    #[error("unknown marking strategy `{key}`; valid keys: {}", valid.join(", "))]
    UnknownStrategy { key: String, valid: Vec<String> },
    #[error("weighting function {name}: {reason}")]
    InvalidWeight { name: String, reason: String },
}

type W2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Weighting function `W` of Strategy B.
#[derive(Clone)]
pub enum WeightFn {
    /// `(x + y) / 2`.
    Mean,
    /// `max{sin(πx/2), 2^y - 1}`.
    MaxSinExp,
    /// `((x^10 + y^10) / 2)^{1/10}`.
    PNorm10,
    Custom { name: String, f: W2 },
}

impl WeightFn {
    pub const NAMES: [&'static str; 3] = ["mean", "max-sin-exp", "pnorm10"];

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "mean" => Some(Self::Mean),
            "max-sin-exp" => Some(Self::MaxSinExp),
            "pnorm10" => Some(Self::PNorm10),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Mean => "mean",
            Self::MaxSinExp => "max-sin-exp",
            Self::PNorm10 => "pnorm10",
            Self::Custom { name, .. } => name,
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Self::Mean => 0.5 * (x + y),
            Self::MaxSinExp => (std::f64::consts::FRAC_PI_2 * x).sin().max(y.exp2() - 1.0),
            Self::PNorm10 => ((x.powi(10) + y.powi(10)) / 2.0).powf(0.1),
            Self::Custom { f, .. } => f(x, y),
        }
    }

    /// `max W(x,y) / max{x,y}` over a 21×21 grid on `[0,1]²` without the origin.
    pub fn grid_constant(&self) -> f64 {
        let mut c: f64 = 0.0;
        for i in 0..=20 {
            for j in 0..=20 {
                if i == 0 && j == 0 {
                    continue;
                }
                let (x, y) = (i as f64 / 20.0, j as f64 / 20.0);
                c = c.max(self.eval(x, y) / x.max(y));
            }
        }
        c
    }

    pub fn validate(&self) -> Result<(), MarkingError> {
        let bad = |reason: String| MarkingError::InvalidWeight {
            name: self.name().to_string(),
            reason,
        };
        let w11 = self.eval(1.0, 1.0);
        if (w11 - 1.0).abs() > 1e-12 {
            return Err(bad(format!("W(1,1) = {w11}, expected 1")));
        }
        let c = self.grid_constant();
        if !c.is_finite() {
            return Err(bad("W(x,y) / max{x,y} is unbounded on the grid".into()));
        }
        Ok(())
    }
}

impl fmt::Debug for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WeightFn({})", self.name())
    }
}

/// Function `V` of Strategy A.
#[derive(Clone)]
pub struct VFn {
    pub name: String,
    pub f: W2,
}

impl VFn {
    /// Continuity at the origin, checked numerically.
    pub fn validate(&self) -> Result<(), MarkingError> {
        let v = (self.f)(1e-12, 1e-12);
        if v.is_nan() || v.abs() >= 1e-3 {
            return Err(MarkingError::InvalidWeight {
                name: self.name.clone(),
                reason: format!("V(1e-12, 1e-12) = {v} is not close to V(0,0) = 0"),
            });
        }
        Ok(())
    }
}

impl fmt::Debug for VFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VFn({})", self.name)
    }
}

/// Goal-oriented marking recipe for the pair `(η, ζ)`.
#[derive(Clone, Debug)]
pub enum Strategy {
    /// Dörfler on η and on ζ, keep the smaller set.
    DoerflerSmaller,
    /// Dörfler on η and on ζ, take the union.
    DoerflerUnion,
    /// Maximum criterion on η and on ζ, take the union.
    MaximumUnion,
    /// Equidistribution on η and on ζ, take the union.
    EquidistUnion,
    /// Dörfler on the weighted estimator ρ.
    RhoDoerfler,
    /// `θ ≤ W(η(M)²/η², ζ(M)²/ζ²)`.
    StrategyB(WeightFn),
    /// `[max_{T∉M} η(T)] [max_{T∉M} ζ(T)] ≤ V(η(M), ζ(M))`.
    StrategyA(VFn),
}

impl Strategy {
    pub const KEYS: [&'static str; 8] = [
        "doerfler-smaller",
        "doerfler-union",
        "maximum-union",
        "equidist-union",
        "rho-doerfler",
        "strategyB:mean",
        "strategyB:max-sin-exp",
        "strategyB:pnorm10",
    ];

    pub fn from_key(key: &str) -> Result<Self, MarkingError> {
        let s = match key {
            "doerfler-smaller" => Self::DoerflerSmaller,
            "doerfler-union" => Self::DoerflerUnion,
            "maximum-union" => Self::MaximumUnion,
            "equidist-union" => Self::EquidistUnion,
            "rho-doerfler" => Self::RhoDoerfler,
            _ => match key.strip_prefix("strategyB:").and_then(WeightFn::from_name) {
                Some(w) => Self::StrategyB(w),
                None => {
                    return Err(MarkingError::UnknownStrategy {
                        key: key.to_string(),
                        valid: Self::KEYS.iter().map(|k| k.to_string()).collect(),
                    })
                }
            },
        };
        Ok(s)
    }

    pub fn key(&self) -> String {
        match self {
            Self::DoerflerSmaller => "doerfler-smaller".into(),
            Self::DoerflerUnion => "doerfler-union".into(),
            Self::MaximumUnion => "maximum-union".into(),
            Self::EquidistUnion => "equidist-union".into(),
            Self::RhoDoerfler => "rho-doerfler".into(),
            Self::StrategyB(w) => format!("strategyB:{}", w.name()),
            Self::StrategyA(v) => format!("strategyA:{}", v.name),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

#[derive(Clone, Debug)]
pub struct MarkRequest {
    pub strategy: Strategy,
    pub theta: f64,
}

impl MarkRequest {
    pub fn new(strategy: Strategy, theta: f64) -> Result<Self, MarkingError> {
        let req = Self { strategy, theta };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), MarkingError> {
        check_theta(self.theta)?;
        match &self.strategy {
            Strategy::StrategyB(w) => w.validate(),
            Strategy::StrategyA(v) => v.validate(),
            _ => Ok(()),
        }
    }
}

fn check_theta(theta: f64) -> Result<(), MarkingError> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(MarkingError::Theta(theta))
    }
}

/// Nonzero elements by decreasing key, ties by index.
fn descending(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).filter(|&t| keys[t] > 0.0).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    order
}

fn prefix_set(order: &[usize], k: usize, n: usize) -> MarkedSet {
    MarkedSet::new(order[..k].to_vec(), n).expect("prefix of distinct in-range indices")
}

/// Smallest prefix of `order` passing `ok`, starting the search at `start`.
fn grow(order: &[usize], n: usize, start: usize, ok: impl Fn(&MarkedSet) -> bool) -> MarkedSet {
    let mut k = start.min(order.len());
    loop {
        let m = prefix_set(order, k, n);
        if k == order.len() || ok(&m) {
            return m;
        }
        k += 1;
    }
}

pub fn check_doerfler(xi: &IndicatorField, marked: &MarkedSet, theta: f64) -> bool {
    theta * xi.squared_global() <= xi.squared_marked(marked)
}

/// `θ ξ² ≤ ξ(M)²` with a minimal number of elements.
pub fn mark_doerfler(xi: &IndicatorField, theta: f64) -> Result<MarkedSet, MarkingError> {
    check_theta(theta)?;
    let order = descending(xi.values());
    if order.is_empty() {
        return Ok(MarkedSet::empty());
    }
    let target = theta * xi.squared_global();
    let mut acc = 0.0;
    let mut k = 0;
    while k < order.len() && acc < target {
        acc += xi.get(order[k]).powi(2);
        k += 1;
    }
    Ok(grow(&order, xi.len(), k, |m| check_doerfler(xi, m, theta)))
}

fn threshold_set(xi: &IndicatorField, threshold: f64) -> MarkedSet {
    let idx = (0..xi.len()).filter(|&t| xi.get(t) > 0.0 && xi.get(t) >= threshold).collect();
    MarkedSet::new(idx, xi.len()).expect("distinct indices")
}

/// `ξ(T) ≥ (1 - θ) max ξ`.
pub fn mark_maximum(xi: &IndicatorField, theta: f64) -> Result<MarkedSet, MarkingError> {
    check_theta(theta)?;
    let max = xi.values().iter().copied().fold(0.0, f64::max);
    Ok(threshold_set(xi, (1.0 - theta) * max))
}

/// `ξ(T) ≥ (1 - θ) ξ / #T`.
pub fn mark_equidistribution(xi: &IndicatorField, theta: f64) -> Result<MarkedSet, MarkingError> {
    check_theta(theta)?;
    if xi.is_empty() {
        return Ok(MarkedSet::empty());
    }
    Ok(threshold_set(xi, (1.0 - theta) * xi.global() / xi.len() as f64))
}

fn max_unmarked(xi: &IndicatorField, marked: &MarkedSet) -> f64 {
    (0..xi.len())
        .filter(|&t| !marked.contains(t))
        .map(|t| xi.get(t))
        .fold(0.0, f64::max)
}

pub fn check_general(xi: &IndicatorField, marked: &MarkedSet, m: &dyn Fn(f64) -> f64) -> bool {
    max_unmarked(xi, marked) <= m(xi.aggregate_marked(marked))
}

/// `max_{T∉M} ξ(T) ≤ M(ξ(M))` for a nonnegative function `M`.
pub fn mark_general(xi: &IndicatorField, m: &dyn Fn(f64) -> f64) -> MarkedSet {
    let order = descending(xi.values());
    let mut acc: f64 = 0.0;
    let mut k = 0;
    while k < order.len() && xi.get(order[k]) > m(acc.sqrt()) {
        acc += xi.get(order[k]).powi(2);
        k += 1;
    }
    grow(&order, xi.len(), k, |s| check_general(xi, s, m))
}

fn same_len(a: &IndicatorField, b: &IndicatorField) -> Result<(), MarkingError> {
    if a.len() != b.len() {
        return Err(MarkingError::MeshMismatch(a.len(), b.len()));
    }
    Ok(())
}

fn ratios(eta: &IndicatorField, zeta: &IndicatorField, marked: &MarkedSet) -> (f64, f64) {
    (
        eta.squared_marked(marked) / eta.squared_global(),
        zeta.squared_marked(marked) / zeta.squared_global(),
    )
}

pub fn check_strategy_b(eta: &IndicatorField, zeta: &IndicatorField, marked: &MarkedSet, theta: f64, w: &WeightFn) -> bool {
    let (x, y) = ratios(eta, zeta, marked);
    theta <= w.eval(x, y)
}

pub fn check_strategy_a(eta: &IndicatorField, zeta: &IndicatorField, marked: &MarkedSet, v: &VFn) -> bool {
    max_unmarked(eta, marked) * max_unmarked(zeta, marked)
        <= (v.f)(eta.aggregate_marked(marked), zeta.aggregate_marked(marked))
}

/// Goal-oriented marking of the pair `(η, ζ)`.
pub fn mark_goafem(eta: &IndicatorField, zeta: &IndicatorField, req: &MarkRequest) -> Result<MarkedSet, MarkingError> {
    req.validate()?;
    same_len(eta, zeta)?;
    let theta = req.theta;
    let n = eta.len();
    Ok(match &req.strategy {
        Strategy::DoerflerSmaller => {
            let (a, b) = (mark_doerfler(eta, theta)?, mark_doerfler(zeta, theta)?);
            if b.len() < a.len() {
                b
            } else {
                a
            }
        }
        Strategy::DoerflerUnion => mark_doerfler(eta, theta)?.union(&mark_doerfler(zeta, theta)?),
        Strategy::MaximumUnion => mark_maximum(eta, theta)?.union(&mark_maximum(zeta, theta)?),
        Strategy::EquidistUnion => mark_equidistribution(eta, theta)?.union(&mark_equidistribution(zeta, theta)?),
        Strategy::RhoDoerfler => {
            let rho = weighted_indicator(eta, zeta).expect("lengths checked");
            mark_doerfler(&rho, theta)?
        }
        Strategy::StrategyB(w) => {
            let (e2, z2) = (eta.global().powi(2), zeta.global().powi(2));
            if e2 == 0.0 || z2 == 0.0 {
                return Err(MarkingError::ZeroEstimator {
                    eta: eta.global(),
                    zeta: zeta.global(),
                });
            }
            let keys: Vec<f64> = (0..n)
                .map(|t| (eta.get(t).powi(2) / e2).max(zeta.get(t).powi(2) / z2))
                .collect();
            let order = descending(&keys);
            let (mut x, mut y, mut k) = (0.0, 0.0, 0);
            while k < order.len() && theta > w.eval(x, y) {
                x += eta.get(order[k]).powi(2) / e2;
                y += zeta.get(order[k]).powi(2) / z2;
                k += 1;
            }
            grow(&order, n, k, |m| check_strategy_b(eta, zeta, m, theta, w))
        }
        Strategy::StrategyA(v) => {
            let rho = weighted_indicator(eta, zeta).expect("lengths checked");
            let order = descending(rho.values());
            grow(&order, n, 0, |m| check_strategy_a(eta, zeta, m, v))
        }
    })
}
