//! Perturbation descent over products of probability simplices.

use rand::Rng;

use super::SearchConfig;
use crate::error::{Error, Result};
use crate::regions::AuxModel;

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    // Renormalize away rounding drift.
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

/// Parameter vector made of consecutive blocks, each a point of a simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct PmfSpace {
    blocks: Vec<(usize, usize)>,
}

impl PmfSpace {
    /// `count` blocks of `len` cells each.
    pub fn uniform(count: usize, len: usize) -> Self {
        Self {
            blocks: (0..count).map(|b| (b * len, len)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.blocks.last().map(|&(s, l)| s + l).unwrap_or(0)
    }

    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.blocks
    }

    pub fn project_block(&self, theta: &mut [f64], b: usize) {
        let (s, l) = self.blocks[b];
        project_simplex(&mut theta[s..s + l]);
    }

    pub fn project(&self, theta: &mut [f64]) {
        for b in 0..self.blocks.len() {
            self.project_block(theta, b);
        }
    }

    fn block_of(&self, i: usize) -> usize {
        self.blocks
            .iter()
            .position(|&(s, l)| i >= s && i < s + l)
            .expect("index in space")
    }
}

/// Coordinate `±step` moves plus one random direction per block and sweep,
/// each followed by projection. The step shrinks after a sweep without
/// improvement; the search stops once it falls below `cfg.tol` or after
/// `cfg.max_iters` sweeps.
pub fn local_search<F, R>(
    mut objective: F,
    space: &PmfSpace,
    init: Vec<f64>,
    cfg: &SearchConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    if init.len() != space.dim() {
        return Err(Error::Dimension(format!(
            "initial point has {} coordinates, space has {}",
            init.len(),
            space.dim()
        )));
    }
    let mut theta = init;
    let mut best = objective(&theta);
    if !best.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut step = cfg.step_init;
    let mut trial = theta.clone();
    for _ in 0..cfg.max_iters {
        let mut improved = false;
        for i in 0..theta.len() {
            let b = space.block_of(i);
            for sign in [1.0, -1.0] {
                trial.copy_from_slice(&theta);
                trial[i] += sign * step;
                space.project_block(&mut trial, b);
                let f = objective(&trial);
                if !f.is_finite() {
                    return Err(Error::NonFinite);
                }
                if f < best {
                    best = f;
                    theta.copy_from_slice(&trial);
                    improved = true;
                }
            }
        }
        for b in 0..space.blocks().len() {
            let (s, l) = space.blocks()[b];
            trial.copy_from_slice(&theta);
            for x in &mut trial[s..s + l] {
                *x += step * (2.0 * rng.gen::<f64>() - 1.0);
            }
            space.project_block(&mut trial, b);
            let f = objective(&trial);
            if !f.is_finite() {
                return Err(Error::NonFinite);
            }
            if f < best {
                best = f;
                theta.copy_from_slice(&trial);
                improved = true;
            }
        }
        if !improved {
            step *= cfg.step_shrink;
            if step < cfg.tol {
                break;
            }
        }
    }
    Ok((theta, best))
}

/// [`local_search`] over the whole joint table of a model.
pub fn local_search_model<F, R>(
    objective: F,
    init: &AuxModel<f64>,
    cfg: &SearchConfig,
    rng: &mut R,
) -> Result<(AuxModel<f64>, f64)>
where
    F: Fn(&AuxModel<f64>) -> f64,
    R: Rng + ?Sized,
{
    let n = init.joint().probs().len();
    let space = PmfSpace::uniform(1, n);
    let (theta, v) = local_search(
        |p: &[f64]| objective(&init.with_probs_unchecked(p.to_vec())),
        &space,
        init.joint().probs().to_vec(),
        cfg,
        rng,
    )?;
    Ok((init.with_probs(theta)?, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn projection_lands_on_simplex() {
        let mut v = vec![0.9, 0.4, -0.2];
        project_simplex(&mut v);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(v.iter().all(|&x| x >= 0.0));
        assert!((v[0] - 0.75).abs() < 1e-12 && (v[1] - 0.25).abs() < 1e-12 && v[2] == 0.0);
        let mut w = vec![0.2, 0.3, 0.5];
        project_simplex(&mut w);
        assert!((w[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quadratic_surrogate_converges() {
        let target = [0.1, 0.6, 0.3, 0.5, 0.5];
        let space = PmfSpace {
            blocks: vec![(0, 3), (3, 2)],
        };
        let cfg = SearchConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let init = vec![1.0, 0.0, 0.0, 0.0, 1.0];
        let f = |p: &[f64]| {
            p.iter()
                .zip(&target)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
        };
        let (x, v) = local_search(f, &space, init, &cfg, &mut rng).unwrap();
        assert!(v < 1e-10, "{v}");
        for (a, b) in x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn constant_objective_keeps_init() {
        let space = PmfSpace::uniform(2, 2);
        let init = vec![0.3, 0.7, 1.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (x, v) = local_search(
            |_| 1.5,
            &space,
            init.clone(),
            &SearchConfig::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(x, init);
        assert_eq!(v, 1.5);
    }

    #[test]
    fn deterministic_and_checked() {
        let space = PmfSpace::uniform(1, 4);
        let f = |p: &[f64]| (p[0] - 0.2).abs() + (p[3] - 0.4).powi(2);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            local_search(f, &space, vec![0.25; 4], &SearchConfig::default(), &mut rng).unwrap()
        };
        assert_eq!(run(9), run(9));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            local_search(
                |_| f64::NAN,
                &space,
                vec![0.25; 4],
                &SearchConfig::default(),
                &mut rng
            ),
            Err(Error::NonFinite)
        ));
        assert!(local_search(f, &space, vec![1.0], &SearchConfig::default(), &mut rng).is_err());
    }
}
