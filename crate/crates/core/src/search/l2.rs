//! Two-description cross-section with `D_12 = 0` for the fair binary
//! source: `U_12 = X`, and the remaining auxiliaries `(V_12, U_1, U_2)`
//! are described by one conditional table per source symbol.

use serde::{Deserialize, Serialize};

use super::local::PmfSpace;
use crate::error::Result;
use crate::lattice::DescriptionSet;
use crate::probability::{JointDistribution, VariableSpec};
use crate::regions::{AuxModel, DistortionSpec, Role, RoleKind, Scheme};

/// `theta[((x·nv + v)·nu + u1)·nu + u2] = P(v, u1, u2 | x)`; `P(x) = 1/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L2Point {
    pub nv: usize,
    pub nu: usize,
    pub theta: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct L2Eval {
    pub sum_rate: f64,
    pub d1: f64,
    pub d2: f64,
}

fn h(table: &[f64]) -> f64 {
    table
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

impl L2Point {
    pub fn block_len(&self) -> usize {
        self.nv * self.nu * self.nu
    }

    pub fn space(&self) -> PmfSpace {
        PmfSpace::uniform(2, self.block_len())
    }

    /// Embeds an EC point (`nv = 1`) with `V_12` fixed to symbol 0.
    pub fn embed(ec: &L2Point, nv: usize) -> L2Point {
        let b = ec.nu * ec.nu;
        let mut theta = vec![0.0; 2 * nv * b];
        for x in 0..2 {
            theta[x * nv * b..x * nv * b + b].copy_from_slice(&ec.theta[x * b..(x + 1) * b]);
        }
        L2Point {
            nv,
            nu: ec.nu,
            theta,
        }
    }

    pub fn eval(&self) -> L2Eval {
        eval_theta(self.nv, self.nu, &self.theta)
    }

    /// Full model (`X, [V_12], U_1, U_2, U_12`) with Hamming distortion on
    /// `{1}`, `{2}`, `{1,2}`. EC models omit `V_12`.
    pub fn to_model(&self, scheme: Scheme) -> Result<(AuxModel<f64>, DistortionSpec)> {
        let with_v = scheme != Scheme::EC;
        let mut vars = vec![VariableSpec::new("X", 2)];
        if with_v {
            vars.push(VariableSpec::new("V_12", self.nv));
        }
        vars.push(VariableSpec::new("U_1", self.nu));
        vars.push(VariableSpec::new("U_2", self.nu));
        vars.push(VariableSpec::new("U_12", 2));
        let mut probs = Vec::new();
        for x in 0..2 {
            // Without V_12 the table is summed over v.
            let nv_out = if with_v { self.nv } else { 1 };
            for vo in 0..nv_out {
                for u1 in 0..self.nu {
                    for u2 in 0..self.nu {
                        let mut p = 0.0;
                        let vs: Vec<usize> = if with_v {
                            vec![vo]
                        } else {
                            (0..self.nv).collect()
                        };
                        for v in vs {
                            p += self.theta[((x * self.nv + v) * self.nu + u1) * self.nu + u2];
                        }
                        for u12 in 0..2 {
                            probs.push(if u12 == x { 0.5 * p } else { 0.0 });
                        }
                    }
                }
            }
        }
        let joint = JointDistribution::new(vars, probs)?;
        let s1 = DescriptionSet::new(2, &[1])?;
        let s2 = DescriptionSet::new(2, &[2])?;
        let s12 = DescriptionSet::new(2, &[1, 2])?;
        let mut roles = vec![
            Role::new("U_1", RoleKind::Private, s1),
            Role::new("U_2", RoleKind::Private, s2),
            Role::new("U_12", RoleKind::Refinement, s12),
        ];
        if with_v {
            roles.push(Role::new("V_12", RoleKind::Shared, s12));
        }
        let model = AuxModel::new(2, scheme, joint, "X", &roles)?;
        Ok((model, DistortionSpec::hamming(2, &[s1, s2, s12])))
    }
}

/// Sum rate and MAP distortions of a point, in closed form:
/// `2·I(X;V) + max(I(X;U_1|V) + I(X;U_2|V), I(U_1;U_2|V) + H(X|V))`.
pub fn eval_theta(nv: usize, nu: usize, theta: &[f64]) -> L2Eval {
    let mut pxv = vec![0.0; 2 * nv];
    let mut pxvu1 = vec![0.0; 2 * nv * nu];
    let mut pxvu2 = vec![0.0; 2 * nv * nu];
    let mut pvu1u2 = vec![0.0; nv * nu * nu];
    let mut idx = 0;
    for x in 0..2 {
        for v in 0..nv {
            for u1 in 0..nu {
                for u2 in 0..nu {
                    let p = 0.5 * theta[idx];
                    idx += 1;
                    pxv[x * nv + v] += p;
                    pxvu1[(x * nv + v) * nu + u1] += p;
                    pxvu2[(x * nv + v) * nu + u2] += p;
                    pvu1u2[(v * nu + u1) * nu + u2] += p;
                }
            }
        }
    }
    let half = nv * nu;
    let pv: Vec<f64> = (0..nv).map(|v| pxv[v] + pxv[nv + v]).collect();
    let pvu1: Vec<f64> = (0..half).map(|i| pxvu1[i] + pxvu1[half + i]).collect();
    let pvu2: Vec<f64> = (0..half).map(|i| pxvu2[i] + pxvu2[half + i]).collect();
    let d1: f64 = (0..half).map(|i| pxvu1[i].min(pxvu1[half + i])).sum();
    let d2: f64 = (0..half).map(|i| pxvu2[i].min(pxvu2[half + i])).sum();

    let (hv, hxv) = (h(&pv), h(&pxv));
    let (hvu1, hvu2) = (h(&pvu1), h(&pvu2));
    let (hxvu1, hxvu2) = (h(&pxvu1), h(&pxvu2));
    let hvu1u2 = h(&pvu1u2);
    let alpha = (1.0 + hv - hxv).max(0.0);
    let b1 = (hxv + hvu1 - hv - hxvu1).max(0.0);
    let b2 = (hxv + hvu2 - hv - hxvu2).max(0.0);
    let b12 = hvu1 + hvu2 - hv - hvu1u2 + hxv - hv;
    L2Eval {
        sum_rate: 2.0 * alpha + (b1 + b2).max(b12),
        d1,
        d2,
    }
}

/// Best EC points on the lattice `P(u_1, u_2 | x) ∈ {0, 1/den, …, 1}` with
/// binary `U_1, U_2`, bucketed by `den·(D_1 + D_2)·2`.
#[derive(Clone, Debug)]
pub struct EcGrid {
    pub denominator: usize,
    compositions: Vec<[u16; 4]>,
    /// Per bucket: (value, index of the x=0 block, index of the x=1 block).
    buckets: Vec<Option<(f64, usize, usize)>>,
}

fn compositions(den: usize) -> Vec<[u16; 4]> {
    let mut out = Vec::new();
    for a in 0..=den {
        for b in 0..=den - a {
            for c in 0..=den - a - b {
                out.push([a as u16, b as u16, c as u16, (den - a - b - c) as u16]);
            }
        }
    }
    out
}

impl EcGrid {
    /// Exhaustive sweep; `den = 32` visits about 4.3e7 points.
    pub fn build(den: usize) -> EcGrid {
        let comps = compositions(den);
        let n = 2 * den;
        let nf = n as f64;
        let t: Vec<f64> = (0..=n)
            .map(|k| {
                if k == 0 {
                    0.0
                } else {
                    k as f64 * (k as f64).log2()
                }
            })
            .collect();
        // Per block: row sums (u1), column sums (u2), and Σ t over them.
        let rows: Vec<[usize; 2]> = comps
            .iter()
            .map(|c| [(c[0] + c[1]) as usize, (c[2] + c[3]) as usize])
            .collect();
        let cols: Vec<[usize; 2]> = comps
            .iter()
            .map(|c| [(c[0] + c[2]) as usize, (c[1] + c[3]) as usize])
            .collect();
        let trow: Vec<f64> = rows.iter().map(|r| t[r[0]] + t[r[1]]).collect();
        let tcol: Vec<f64> = cols.iter().map(|r| t[r[0]] + t[r[1]]).collect();
        let log_n = nf.log2();
        let nb = 2 * den + 1;
        let mut buckets: Vec<Option<(f64, usize, usize)>> = vec![None; nb];
        for (ia, a) in comps.iter().enumerate() {
            let (ra, ca) = (rows[ia], cols[ia]);
            for (ib, b) in comps.iter().enumerate() {
                let (rb, cb) = (rows[ib], cols[ib]);
                let d = ra[0].min(rb[0]) + ra[1].min(rb[1]) + ca[0].min(cb[0]) + ca[1].min(cb[1]);
                let s_u1 = t[ra[0] + rb[0]] + t[ra[1] + rb[1]];
                let s_u2 = t[ca[0] + cb[0]] + t[ca[1] + cb[1]];
                let s_u12 = t[(a[0] + b[0]) as usize]
                    + t[(a[1] + b[1]) as usize]
                    + t[(a[2] + b[2]) as usize]
                    + t[(a[3] + b[3]) as usize];
                let i1 = 1.0 + (trow[ia] + trow[ib] - s_u1) / nf;
                let i2 = 1.0 + (tcol[ia] + tcol[ib] - s_u2) / nf;
                let i12 = log_n + (s_u12 - s_u1 - s_u2) / nf;
                let value = (i1 + i2).max(1.0 + i12);
                let slot = &mut buckets[d];
                if slot.map_or(true, |(v, _, _)| value < v) {
                    *slot = Some((value, ia, ib));
                }
            }
        }
        EcGrid {
            denominator: den,
            compositions: comps,
            buckets,
        }
    }

    /// Best grid point with `D_1 + D_2 ≤ 2·d`.
    pub fn best_at(&self, d: f64) -> Option<(f64, L2Point)> {
        let limit = (4.0 * self.denominator as f64 * d + 1e-9).floor() as usize;
        let mut best: Option<(f64, usize, usize)> = None;
        for slot in self.buckets.iter().take(limit + 1).flatten() {
            if best.map_or(true, |(v, _, _)| slot.0 < v) {
                best = Some(*slot);
            }
        }
        best.map(|(v, ia, ib)| {
            let den = self.denominator as f64;
            let mut theta = Vec::with_capacity(8);
            for i in [ia, ib] {
                theta.extend(self.compositions[i].iter().map(|&c| c as f64 / den));
            }
            (
                v,
                L2Point {
                    nv: 1,
                    nu: 2,
                    theta,
                },
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn copy_point(nv: usize) -> L2Point {
        // U1 = U2 = X, V independent uniform.
        let mut theta = vec![0.0; 2 * nv * 4];
        for x in 0..2 {
            for v in 0..nv {
                theta[((x * nv + v) * 2 + x) * 2 + x] = 1.0 / nv as f64;
            }
        }
        L2Point { nv, nu: 2, theta }
    }

    fn normalized(nv: usize, f: impl Fn(usize) -> f64) -> L2Point {
        let b = nv * 4;
        let mut theta: Vec<f64> = (0..2 * b).map(f).collect();
        for blk in theta.chunks_mut(b) {
            let s: f64 = blk.iter().sum();
            blk.iter_mut().for_each(|x| *x /= s);
        }
        L2Point { nv, nu: 2, theta }
    }

    #[test]
    fn closed_form_matches_generic_evaluation() {
        let p = copy_point(1);
        let e = p.eval();
        assert!((e.sum_rate - 2.0).abs() < 1e-12 && e.d1 == 0.0 && e.d2 == 0.0);
        let p = normalized(3, |i| ((i * 7 + 3) % 11) as f64 + 0.5);
        let e = p.eval();
        for scheme in [Scheme::ZB, Scheme::CMS] {
            let (m, spec) = p.to_model(scheme).unwrap();
            let r = m.min_rates(&[1.0, 1.0], Some(&spec)).unwrap();
            assert!(
                (r.objective - e.sum_rate).abs() < 1e-9,
                "{} vs {}",
                r.objective,
                e.sum_rate
            );
            let d = r.distortions.unwrap();
            assert!((d.get(DescriptionSet::new(2, &[1]).unwrap()).unwrap() - e.d1).abs() < 1e-12);
            assert!((d.get(DescriptionSet::new(2, &[2]).unwrap()).unwrap() - e.d2).abs() < 1e-12);
            assert!(
                d.get(DescriptionSet::new(2, &[1, 2]).unwrap())
                    .unwrap()
                    .abs()
                    < 1e-15
            );
        }
        let ec = normalized(1, |i| (i % 3) as f64 + 0.25);
        let (m, _) = ec.to_model(Scheme::EC).unwrap();
        assert!((m.sum_rate_l2().unwrap() - ec.eval().sum_rate).abs() < 1e-9);
        let emb = L2Point::embed(&ec, 3);
        assert!((emb.eval().sum_rate - ec.eval().sum_rate).abs() < 1e-12);
    }

    #[test]
    fn grid_matches_closed_form() {
        let g = EcGrid::build(4);
        assert_eq!(g.compositions.len(), 35);
        for d in [0.0, 0.1, 0.25, 0.5] {
            let (v, p) = g.best_at(d).unwrap();
            let e = p.eval();
            assert!((e.sum_rate - v).abs() < 1e-12);
            assert!(e.d1 + e.d2 <= 2.0 * d + 1e-12);
        }
        assert!((g.best_at(0.0).unwrap().0 - 2.0).abs() < 1e-12);
        assert!((g.best_at(0.5).unwrap().0 - 1.0).abs() < 1e-12);
    }
}
