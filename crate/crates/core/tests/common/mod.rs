#![allow(dead_code)]

use mdcms_core::lattice::DescriptionSet;
use mdcms_core::probability::{JointDistribution, VariableSpec};
use mdcms_core::regions::{AuxModel, Role, RoleKind, Scheme};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn set(l: usize, m: &[usize]) -> DescriptionSet {
    DescriptionSet::new(l, m).unwrap()
}

pub fn random_pmf(rng: &mut ChaCha8Rng, n: usize, sparsity: f64) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen::<f64>() < sparsity {
                0.0
            } else {
                -rng.gen::<f64>().ln()
            }
        })
        .collect();
    if p.iter().all(|&x| x == 0.0) {
        p[0] = 1.0;
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

/// Binary X, a binary `V_L`, binary `U_K` for every nonempty K, all other
/// shared variables constant.
pub fn random_vkg_like(rng: &mut ChaCha8Rng, l: usize, scheme: Scheme) -> AuxModel<f64> {
    let full = DescriptionSet::full(l).unwrap();
    let mut vars = vec![VariableSpec::new("X", 2), VariableSpec::new("V", 2)];
    let mut roles = vec![Role::new("V", RoleKind::Shared, full)];
    for k in full.nonempty_subsets() {
        let name = format!("U{}", k.label());
        vars.push(VariableSpec::new(&name, 2));
        let kind = if k.len() == 1 {
            RoleKind::Private
        } else {
            RoleKind::Refinement
        };
        roles.push(Role::new(name, kind, k));
    }
    let n = 1usize << vars.len();
    let joint = JointDistribution::new(vars, random_pmf(rng, n, 0.3)).unwrap();
    AuxModel::new(l, scheme, joint, "X", &roles).unwrap()
}

/// Binary X and every CMS variable at L=3.
pub fn random_cms3(rng: &mut ChaCha8Rng) -> AuxModel<f64> {
    let full = DescriptionSet::full(3).unwrap();
    let mut vars = vec![VariableSpec::new("X", 2)];
    let mut roles = Vec::new();
    for s in full.nonempty_subsets() {
        if s.len() >= 2 {
            let name = format!("V{}", s.label());
            vars.push(VariableSpec::new(&name, 2));
            roles.push(Role::new(name, RoleKind::Shared, s));
        }
        let name = format!("U{}", s.label());
        vars.push(VariableSpec::new(&name, 2));
        let kind = if s.len() == 1 {
            RoleKind::Private
        } else {
            RoleKind::Refinement
        };
        roles.push(Role::new(name, kind, s));
    }
    let n = 1usize << vars.len();
    let joint = JointDistribution::new(vars, random_pmf(rng, n, 0.5)).unwrap();
    AuxModel::new(3, Scheme::CMS, joint, "X", &roles).unwrap()
}
