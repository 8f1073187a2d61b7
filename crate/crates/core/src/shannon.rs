//! Single-description rate-distortion functions and the binary
//! successive-refinement cascade.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::DescriptionSet;
use crate::probability::{binary_entropy, JointDistribution, VariableSpec};
use crate::regions::{AuxModel, DistortionSpec, Role, RoleKind, Scheme};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RdPoint<T> {
    pub rate: T,
    pub distortion: T,
}

/// `R(D) = 1 − h₂(D)` for the fair binary source under Hamming distortion.
pub fn rd_binary<T: Scalar>(d: T) -> Result<T> {
    if !d.is_finite() || d < T::zero() || d > T::one() {
        return Err(Error::InvalidArgument(format!(
            "distortion {d} outside [0, 1]"
        )));
    }
    if d >= T::lit(0.5) {
        return Ok(T::zero());
    }
    Ok((T::one() - binary_entropy(d)).max(T::zero()))
}

const SLOPE_MIN: f64 = 1e-6;
const SLOPE_MAX: f64 = 64.0;
const BISECT_ITERS: usize = 200;
const BA_ITERS: usize = 100_000;

fn validate_rd_input<T: Scalar>(source: &[T], d: &[Vec<T>]) -> Result<usize> {
    if source.is_empty() {
        return Err(Error::EmptySet);
    }
    let total: T = source.iter().copied().sum();
    if (total - T::one()).abs() > T::norm_tol() {
        return Err(Error::NotNormalized(total.as_f64()));
    }
    if let Some(i) = source.iter().position(|p| !p.is_finite() || *p < T::zero()) {
        return Err(Error::BadProbability {
            idx: i,
            value: source[i].as_f64(),
        });
    }
    if d.len() != source.len() {
        return Err(Error::Dimension(format!(
            "distortion matrix has {} rows for {} source symbols",
            d.len(),
            source.len()
        )));
    }
    let m = d[0].len();
    if m == 0 || d.iter().any(|r| r.len() != m) {
        return Err(Error::Dimension("ragged or empty distortion matrix".into()));
    }
    if d.iter().flatten().any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(Error::InvalidArgument(
            "distortion entries must be finite and >= 0".into(),
        ));
    }
    Ok(m)
}

/// One Blahut–Arimoto run at fixed slope `s`: `q(x̂|x) ∝ r(x̂)·2^{−s·d(x,x̂)}`.
fn ba_at_slope<T: Scalar>(p: &[T], d: &[Vec<T>], s: T) -> RdPoint<T> {
    let m = d[0].len();
    let two = T::lit(2.0);
    let kernel: Vec<Vec<T>> = d
        .iter()
        .map(|row| row.iter().map(|&v| two.powf(-s * v)).collect())
        .collect();
    let mut r = vec![T::one() / T::from_usize(m).expect("size"); m];
    let mut q = vec![vec![T::zero(); m]; p.len()];
    let mut last_rate = T::infinity();
    let mut point = RdPoint {
        rate: T::zero(),
        distortion: T::zero(),
    };
    for _ in 0..BA_ITERS {
        for (x, row) in q.iter_mut().enumerate() {
            let z: T = (0..m).map(|y| r[y] * kernel[x][y]).sum();
            for y in 0..m {
                row[y] = r[y] * kernel[x][y] / z;
            }
        }
        let mut next = vec![T::zero(); m];
        for (x, row) in q.iter().enumerate() {
            for y in 0..m {
                next[y] = next[y] + p[x] * row[y];
            }
        }
        let mut rate = T::zero();
        let mut dist = T::zero();
        for (x, row) in q.iter().enumerate() {
            for y in 0..m {
                let w = p[x] * row[y];
                if w > T::zero() {
                    rate = rate + w * (row[y] / next[y]).log2();
                    dist = dist + w * d[x][y];
                }
            }
        }
        r = next;
        point = RdPoint {
            rate: rate.max(T::zero()),
            distortion: dist,
        };
        if (rate - last_rate).abs() < T::lit(1e-9).max(T::epsilon()) {
            break;
        }
        last_rate = rate;
    }
    point
}

/// Rate-distortion function of a finite source by Blahut–Arimoto with
/// bisection on the slope. The returned distortion is at most `target + 1e-6`.
pub fn rd_blahut_arimoto<T: Scalar>(source: &[T], d: &[Vec<T>], target: T) -> Result<RdPoint<T>> {
    let m = validate_rd_input(source, d)?;
    if !target.is_finite() || target < T::zero() {
        return Err(Error::InvalidArgument(format!(
            "target distortion {target}"
        )));
    }
    let d_min: T = source
        .iter()
        .zip(d)
        .map(|(&p, row)| p * row.iter().copied().fold(T::infinity(), T::min))
        .sum();
    let d_max = (0..m)
        .map(|y| source.iter().zip(d).map(|(&p, row)| p * row[y]).sum::<T>())
        .fold(T::infinity(), T::min);
    if target >= d_max {
        return Ok(RdPoint {
            rate: T::zero(),
            distortion: d_max,
        });
    }
    if target < d_min - T::norm_tol() {
        return Err(Error::Infeasible(format!(
            "distortion {target} is below the minimum achievable {d_min}"
        )));
    }
    let slack = T::lit(1e-6);
    let (mut lo, mut hi) = (T::lit(SLOPE_MIN), T::lit(SLOPE_MAX));
    let mut best = ba_at_slope(source, d, hi);
    if best.distortion > target + slack {
        return Err(Error::Infeasible(format!(
            "distortion {target} not reached at the largest slope ({})",
            best.distortion
        )));
    }
    let at_lo = ba_at_slope(source, d, lo);
    if at_lo.distortion <= target {
        return Ok(at_lo);
    }
    for _ in 0..BISECT_ITERS {
        let mid = (lo + hi) / T::lit(2.0);
        let pt = ba_at_slope(source, d, mid);
        if pt.distortion <= target {
            hi = mid;
            best = pt;
        } else {
            lo = mid;
        }
        if hi - lo < T::lit(1e-12) * hi || target - best.distortion < T::lit(1e-10) {
            break;
        }
    }
    Ok(best)
}

/// Rate-distortion curve over a list of targets.
pub fn rd_curve<T: Scalar>(
    source: &[T],
    d: &[Vec<T>],
    targets: &[T],
) -> Result<Vec<(T, RdPoint<T>)>> {
    targets
        .iter()
        .map(|&t| Ok((t, rd_blahut_arimoto(source, d, t)?)))
        .collect()
}

/// Crossover of the second cascade stage: `q = (D1 − D2)/(1 − 2·D2)`.
pub fn sr_crossover<T: Scalar>(d1: T, d2: T) -> Result<T> {
    let half = T::lit(0.5);
    if !(d1.is_finite() && d2.is_finite()) || d2 < T::zero() || d2 >= half || d1 >= half || d2 > d1
    {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= D2 <= D1 < 0.5, got D1={d1}, D2={d2}"
        )));
    }
    Ok((d1 - d2) / (T::one() - T::lit(2.0) * d2))
}

/// Joint table over `(X, X̂1, X̂2)` of the degraded cascade, last fastest:
/// `X̂2 = X ⊕ bern(D2)`, `X̂1 = X̂2 ⊕ bern(q)`.
pub fn sr_cascade_table<T: Scalar>(d1: T, d2: T) -> Result<Vec<T>> {
    let q = sr_crossover(d1, d2)?;
    let half = T::lit(0.5);
    let flip = |e: T, a: usize, b: usize| if a == b { T::one() - e } else { e };
    let mut probs = Vec::with_capacity(8);
    for x in 0..2 {
        for x1 in 0..2 {
            for x2 in 0..2 {
                probs.push(half * flip(d2, x, x2) * flip(q, x2, x1));
            }
        }
    }
    Ok(probs)
}

/// EC model for the successive-refinement cross-section: `U_1 = X̂1`,
/// `U_12 = X̂2`, `U_2` constant; distortions constrained on `{1}` and `{1,2}`.
pub fn sr_degraded_model<T: Scalar>(d1: T, d2: T) -> Result<(AuxModel<T>, DistortionSpec)> {
    let probs = sr_cascade_table(d1, d2)?;
    let vars = vec![
        VariableSpec::new("X", 2),
        VariableSpec::new("U_1", 2),
        VariableSpec::new("U_12", 2),
    ];
    let joint = JointDistribution::new(vars, probs)?;
    let s1 = DescriptionSet::new(2, &[1])?;
    let s12 = DescriptionSet::new(2, &[1, 2])?;
    let model = AuxModel::new(
        2,
        Scheme::EC,
        joint,
        "X",
        &[
            Role::new("U_1", RoleKind::Private, s1),
            Role::new("U_12", RoleKind::Refinement, s12),
        ],
    )?;
    Ok((model, DistortionSpec::hamming(2, &[s1, s12])))
}
