//! EC and ZB cross-sections `min R_1 + R_2` subject to `D_1 + D_2 ≤ 2D`,
//! `D_12 = 0`, and the ZB-versus-EC separation scan.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::l2::{eval_theta, EcGrid, L2Point};
use super::local::local_search;
use super::SearchConfig;
use crate::error::{Error, Result};
use crate::io::ModelFile;
use crate::regions::{AuxModel, Scheme};

const FEAS_TOL: f64 = 1e-7;
const MAX_PENALTY_ROUNDS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CrossScheme {
    EC,
    ZB,
}

impl CrossScheme {
    fn stream_tag(self) -> u64 {
        match self {
            CrossScheme::EC => 1,
            CrossScheme::ZB => 2,
        }
    }

    pub fn scheme(self) -> Scheme {
        match self {
            CrossScheme::EC => Scheme::EC,
            CrossScheme::ZB => Scheme::ZB,
        }
    }
}

/// Best point found for one cross-section value.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossSection {
    pub scheme: CrossScheme,
    pub d: f64,
    pub value: f64,
    pub point: L2Point,
    /// `(restart, final value)` for every random restart.
    pub trace: Vec<(usize, f64)>,
}

fn violation(nv: usize, nu: usize, theta: &[f64], d: f64) -> f64 {
    let e = eval_theta(nv, nu, theta);
    (e.d1 + e.d2 - 2.0 * d).max(0.0)
}

/// Moves a nearly feasible point onto the feasible side by mixing it with
/// `U_1 = U_2 = X` (same `V` conditional), which has zero distortion.
fn polish(p: &L2Point, d: f64) -> L2Point {
    if violation(p.nv, p.nu, &p.theta, d) == 0.0 {
        return p.clone();
    }
    let b = p.block_len();
    let mut reference = vec![0.0; p.theta.len()];
    for x in 0..2 {
        for v in 0..p.nv {
            let pv: f64 = p.theta[x * b + v * p.nu * p.nu..x * b + (v + 1) * p.nu * p.nu]
                .iter()
                .sum();
            let u = x.min(p.nu - 1);
            reference[x * b + (v * p.nu + u) * p.nu + u] = pv;
        }
    }
    let mix = |t: f64| -> Vec<f64> {
        p.theta
            .iter()
            .zip(&reference)
            .map(|(a, r)| t * a + (1.0 - t) * r)
            .collect()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if violation(p.nv, p.nu, &mix(mid), d) == 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    L2Point {
        theta: mix(lo),
        ..p.clone()
    }
}

/// Penalty descent with escalating weight, then polish.
fn descend(
    start: L2Point,
    d: f64,
    cfg: &SearchConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(L2Point, f64)> {
    let (nv, nu) = (start.nv, start.nu);
    let space = start.space();
    let mut theta = start.theta.clone();
    let mut lambda = 1.0;
    for _ in 0..MAX_PENALTY_ROUNDS {
        let objective = |t: &[f64]| {
            let e = eval_theta(nv, nu, t);
            e.sum_rate + lambda * (e.d1 + e.d2 - 2.0 * d).max(0.0)
        };
        theta = local_search(objective, &space, theta, cfg, rng)?.0;
        if violation(nv, nu, &theta, d) <= FEAS_TOL {
            break;
        }
        lambda *= 10.0;
    }
    let out = polish(&L2Point { nv, nu, theta }, d);
    let value = out.eval().sum_rate;
    // A feasible start is never made worse.
    if violation(nv, nu, &start.theta, d) == 0.0 {
        let v0 = start.eval().sum_rate;
        if v0 <= value {
            return Ok((start, v0));
        }
    }
    Ok((out, value))
}

fn dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// Even restarts: product of random marginals per source symbol. Odd
/// restarts: a random deterministic map `x ↦ (v, u_1, u_2)` mixed with noise.
fn random_start(rng: &mut ChaCha8Rng, restart: usize, nv: usize, nu: usize) -> L2Point {
    let b = nv * nu * nu;
    let mut theta = Vec::with_capacity(2 * b);
    for _ in 0..2 {
        if restart % 2 == 0 {
            let (rv, r1, r2) = (dirichlet(rng, nv), dirichlet(rng, nu), dirichlet(rng, nu));
            for v in 0..nv {
                for u1 in 0..nu {
                    for u2 in 0..nu {
                        theta.push(rv[v] * r1[u1] * r2[u2]);
                    }
                }
            }
        } else {
            let cell = rng.gen_range(0..b);
            let eta = rng.gen_range(0.05..0.5);
            let noise = dirichlet(rng, b);
            theta.extend((0..b).map(|i| eta * noise[i] + if i == cell { 1.0 - eta } else { 0.0 }));
        }
    }
    L2Point { nv, nu, theta }
}

fn restart_rng(cfg: &SearchConfig, tag: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream((tag << 32) | restart as u64);
    rng
}

/// Random-restart search for one cross-section value, also descending from
/// every point in `seeds`. Parallel over restarts; the merge takes the
/// minimum with ties to the lowest restart, then the seeds in order.
pub fn cross_section(
    scheme: CrossScheme,
    d: f64,
    cfg: &SearchConfig,
    seeds: &[L2Point],
) -> Result<CrossSection> {
    cfg.validate()?;
    if !(d > 0.0 && d < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "D must lie in (0, 0.5), got {d}"
        )));
    }
    let nv = match scheme {
        CrossScheme::EC => 1,
        CrossScheme::ZB => cfg.alphabets.shared,
    };
    let nu = cfg.alphabets.private;
    let runs: Vec<Result<(L2Point, f64)>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(cfg, scheme.stream_tag(), r);
            let start = random_start(&mut rng, r, nv, nu);
            descend(start, d, cfg, &mut rng)
        })
        .collect();
    let mut best: Option<(L2Point, f64)> = None;
    let mut trace = Vec::with_capacity(runs.len());
    for (r, run) in runs.into_iter().enumerate() {
        let (p, v) = run?;
        trace.push((r, v));
        if best.as_ref().map_or(true, |(_, bv)| v < *bv) {
            best = Some((p, v));
        }
    }
    for (i, s) in seeds.iter().enumerate() {
        if s.nv != nv || s.nu != nu {
            return Err(Error::Dimension(
                "seed point does not match the search alphabets".into(),
            ));
        }
        let mut rng = restart_rng(cfg, 3, i);
        let (p, v) = descend(s.clone(), d, cfg, &mut rng)?;
        if best.as_ref().map_or(true, |(_, bv)| v < *bv) {
            best = Some((p, v));
        }
    }
    let (point, value) = best.expect("at least one restart");
    Ok(CrossSection {
        scheme,
        d,
        value,
        point,
        trace,
    })
}

fn ec_with_grid(d: f64, cfg: &SearchConfig, grid: Option<&EcGrid>) -> Result<CrossSection> {
    let seeds: Vec<L2Point> = grid
        .and_then(|g| g.best_at(d))
        .map(|(_, p)| p)
        .into_iter()
        .collect();
    cross_section(CrossScheme::EC, d, cfg, &seeds)
}

/// `R̄_EC(D)`: restarts plus the polished best point of the EC grid.
pub fn cross_section_ec(d: f64, cfg: &SearchConfig) -> Result<(f64, AuxModel<f64>)> {
    let grid = (cfg.ec_grid > 0).then(|| EcGrid::build(cfg.ec_grid));
    let cs = ec_with_grid(d, cfg, grid.as_ref())?;
    Ok((cs.value, cs.point.to_model(Scheme::EC)?.0))
}

/// ZB cross-section: restarts plus a descent from the embedded EC optimum.
/// With a constant `V_12` this is the EC problem itself.
pub fn cross_section_zb(d: f64, cfg: &SearchConfig) -> Result<(f64, AuxModel<f64>)> {
    let grid = (cfg.ec_grid > 0).then(|| EcGrid::build(cfg.ec_grid));
    let ec = ec_with_grid(d, cfg, grid.as_ref())?;
    if cfg.alphabets.shared == 1 {
        return Ok((ec.value, ec.point.to_model(Scheme::ZB)?.0));
    }
    let seed = L2Point::embed(&ec.point, cfg.alphabets.shared);
    let cs = cross_section(CrossScheme::ZB, d, cfg, &[seed])?;
    Ok((cs.value, cs.point.to_model(Scheme::ZB)?.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub d: f64,
    pub value_ec: f64,
    pub value_zb: f64,
    pub gap: f64,
    /// Best EC grid value before polishing, when the grid is enabled.
    pub ec_grid_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationReport {
    #[serde(rename = "D_star")]
    pub d_star: f64,
    pub value_ec: f64,
    pub value_cms_or_zb: f64,
    /// `value_ec − value_cms_or_zb`.
    pub gap: f64,
    pub best_model: ModelFile,
    pub ec_model: ModelFile,
    pub best_point: L2Point,
    pub ec_point: L2Point,
    /// ZB restarts at `D_star`.
    pub per_restart_trace: Vec<(usize, f64)>,
    pub scan: Vec<ScanRow>,
    pub config: SearchConfig,
    /// Kept out of the serialized report so reruns are byte-identical.
    #[serde(skip)]
    pub wall_time: f64,
}

/// Scans `grid`, running both cross-sections at every `D`, and reports the
/// `D` with the largest `R̄_EC − R̄_ZB` (first one on ties).
pub fn separation_zb(cfg: &SearchConfig, d_grid: &[f64]) -> Result<SeparationReport> {
    cfg.validate()?;
    if d_grid.is_empty() {
        return Err(Error::EmptySet);
    }
    if let Some(d) = d_grid.iter().find(|&&d| !(d > 0.0 && d < 0.5)) {
        return Err(Error::InvalidArgument(format!(
            "grid point {d} outside (0, 0.5)"
        )));
    }
    let started = Instant::now();
    let grid = (cfg.ec_grid > 0).then(|| EcGrid::build(cfg.ec_grid));
    let mut scan = Vec::new();
    let mut best: Option<(usize, CrossSection, CrossSection)> = None;
    for (i, &d) in d_grid.iter().enumerate() {
        let ec = ec_with_grid(d, cfg, grid.as_ref())?;
        let zb = if cfg.alphabets.shared == 1 {
            CrossSection {
                scheme: CrossScheme::ZB,
                ..ec.clone()
            }
        } else {
            let seed = L2Point::embed(&ec.point, cfg.alphabets.shared);
            cross_section(CrossScheme::ZB, d, cfg, &[seed])?
        };
        let gap = ec.value - zb.value;
        scan.push(ScanRow {
            d,
            value_ec: ec.value,
            value_zb: zb.value,
            gap,
            ec_grid_value: grid.as_ref().and_then(|g| g.best_at(d)).map(|(v, _)| v),
        });
        if best.as_ref().map_or(true, |(j, _, _)| gap > scan[*j].gap) {
            best = Some((i, ec, zb));
        }
    }
    let (i, ec, zb) = best.expect("nonempty grid");
    let (zb_model, zb_spec) = zb.point.to_model(Scheme::ZB)?;
    let (ec_model, ec_spec) = ec.point.to_model(Scheme::EC)?;
    Ok(SeparationReport {
        d_star: d_grid[i],
        value_ec: ec.value,
        value_cms_or_zb: zb.value,
        gap: ec.value - zb.value,
        best_model: ModelFile::from_model(&zb_model, &zb_spec),
        ec_model: ModelFile::from_model(&ec_model, &ec_spec),
        best_point: zb.point,
        ec_point: ec.point,
        per_restart_trace: zb.trace,
        scan,
        config: cfg.clone(),
        wall_time: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SearchConfig {
        SearchConfig {
            restarts: 4,
            ec_grid: 8,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn polish_restores_feasibility() {
        let p = L2Point {
            nv: 1,
            nu: 2,
            theta: vec![0.25; 8],
        };
        let q = polish(&p, 0.1);
        let e = q.eval();
        assert!(e.d1 + e.d2 <= 0.2 + 1e-12);
        assert!(e.d1 + e.d2 >= 0.2 - 1e-9);
    }

    #[test]
    fn trivial_distortion_gives_lossless_floor() {
        let cfg = quick();
        let ec = cross_section(CrossScheme::EC, 0.499, &cfg, &[]).unwrap();
        assert!((ec.value - 1.0).abs() < 1e-3, "{}", ec.value);
        assert_eq!(ec.trace.len(), 4);
        let low = cross_section(CrossScheme::EC, 0.001, &cfg, &[]).unwrap();
        assert!(low.value > 1.9, "{}", low.value);
    }

    #[test]
    fn constant_shared_variable_recovers_ec() {
        let cfg = SearchConfig {
            alphabets: super::super::AuxAlphabets {
                shared: 1,
                private: 2,
            },
            ..quick()
        };
        let (ec, _) = cross_section_ec(0.2, &cfg).unwrap();
        let (zb, _) = cross_section_zb(0.2, &cfg).unwrap();
        assert!((ec - zb).abs() < 1e-6);
    }

    #[test]
    fn invalid_inputs() {
        assert!(cross_section(CrossScheme::EC, 0.5, &quick(), &[]).is_err());
        let cfg = SearchConfig {
            restarts: 0,
            ..quick()
        };
        assert!(cross_section(CrossScheme::EC, 0.1, &cfg, &[]).is_err());
        assert!(separation_zb(&quick(), &[0.6]).is_err());
    }
}
