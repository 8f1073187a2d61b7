//! Three- and four-description models assembled from a two-description
//! cross-section point, and the CMS-versus-VKG comparisons on them.

use std::collections::BTreeMap;

use serde::Serialize;

use super::cross::SeparationReport;
use crate::error::{Error, Result};
use crate::lattice::{DescriptionSet, SubsetFamily};
use crate::lp::Relation;
use crate::probability::{JointDistribution, VariableSpec};
use crate::regions::{AuxModel, DistortionSpec, RateRow, Role, Scheme};
use crate::shannon::{rd_binary, sr_cascade_table};

/// Slack on rate caps carried over from another program.
const CAP_TOL: f64 = 1e-12;

fn lift_roles(model: &AuxModel<f64>, l: usize) -> Result<Vec<Role>> {
    model
        .roles()
        .into_iter()
        .map(|r| {
            Ok(Role::new(
                r.name,
                r.kind,
                DescriptionSet::new(l, &r.subset.members())?,
            ))
        })
        .collect()
}

/// Appends variables distributed as `cond[x]` given the source symbol `x`.
fn extend_joint(
    base: &AuxModel<f64>,
    extra: Vec<VariableSpec>,
    cond: &[Vec<f64>],
) -> Result<JointDistribution<f64>> {
    let joint = base.joint();
    let src = base.source_var();
    if joint.alphabet(src) != cond.len() {
        return Err(Error::InvalidModel(
            "source alphabet does not match the appended table".into(),
        ));
    }
    let width = cond[0].len();
    let mut probs = Vec::with_capacity(joint.probs().len() * width);
    for (i, &p) in joint.probs().iter().enumerate() {
        let x = joint.digit(i, src);
        probs.extend(cond[x].iter().map(|&c| p * c));
    }
    let mut vars = joint.vars().to_vec();
    vars.extend(extra);
    JointDistribution::new(vars, probs)
}

fn check_two(model: &AuxModel<f64>) -> Result<()> {
    if model.l() != 2 || !matches!(model.scheme(), Scheme::ZB | Scheme::EC) {
        return Err(Error::Scheme(
            "expected a two-description ZB or EC model".into(),
        ));
    }
    if model.joint().alphabet(model.source_var()) != 2 {
        return Err(Error::InvalidModel("expected a binary source".into()));
    }
    Ok(())
}

fn set(l: usize, m: &[usize]) -> DescriptionSet {
    DescriptionSet::new(l, m).expect("static subset")
}

/// Four-description CMS model: descriptions 1–2 carry `model`, descriptions
/// 3–4 the degraded cascade with `U_3` at distortion `d3` and `U_34` at
/// `d34`, independent of the first group given `X`. Only `V_12` can be
/// non-constant. Distortions are constrained on `{1},{2},{1,2},{3},{3,4}`.
pub fn build_l4_cms(
    model: &AuxModel<f64>,
    d3: f64,
    d34: f64,
) -> Result<(AuxModel<f64>, DistortionSpec)> {
    check_two(model)?;
    let table = sr_cascade_table(d3, d34)?;
    // P(x̂1, x̂2 | x) = 2·P(x, x̂1, x̂2).
    let cond: Vec<Vec<f64>> = table
        .chunks(4)
        .map(|c| c.iter().map(|p| 2.0 * p).collect())
        .collect();
    let joint = extend_joint(
        model,
        vec![VariableSpec::new("U_3", 2), VariableSpec::new("U_34", 2)],
        &cond,
    )?;
    let mut roles = lift_roles(model, 4)?;
    roles.push(Role::new(
        "U_3",
        crate::regions::RoleKind::Private,
        set(4, &[3]),
    ));
    roles.push(Role::new(
        "U_34",
        crate::regions::RoleKind::Refinement,
        set(4, &[3, 4]),
    ));
    let m = AuxModel::new(4, Scheme::CMS, joint, model.source_name(), &roles)?;
    let subsets = [
        set(4, &[1]),
        set(4, &[2]),
        set(4, &[1, 2]),
        set(4, &[3]),
        set(4, &[3, 4]),
    ];
    Ok((m, DistortionSpec::hamming(2, &subsets)))
}

/// Same table with every CMS shared variable dropped except `V_12`, which
/// becomes the single VKG variable `V_1234`.
fn as_vkg(cms: &AuxModel<f64>) -> Result<AuxModel<f64>> {
    let l = cms.l();
    let v = cms
        .shared_var(set(l, &[1, 2]))
        .ok_or_else(|| Error::InvalidModel("model has no V_12".into()))?;
    let mut map = BTreeMap::new();
    map.insert(cms.full_set(), v);
    Ok(cms.relabel(Scheme::VKG, map))
}

fn row(l: usize, members: &[usize], relation: Relation, rhs: f64) -> RateRow<f64> {
    let mut coeffs = vec![0.0; l];
    for &m in members {
        coeffs[m - 1] = 1.0;
    }
    RateRow {
        coeffs,
        relation,
        rhs,
    }
}

fn weights(l: usize, members: &[usize]) -> Vec<f64> {
    row(l, members, Relation::Eq, 0.0).coeffs
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct L4Report {
    pub d3: f64,
    pub d34: f64,
    pub rd_d3: f64,
    pub rd_d34: f64,
    /// CMS rates minimizing `R_1 + R_2` with `R_3 = R(D3)`, `R_3 + R_4 = R(D34)`.
    pub cms_rates: Vec<f64>,
    pub cms_sum12: f64,
    /// ZB value of the witness.
    pub zb_value: f64,
    /// Smallest `R_3 + R_4` once `V_12` is replaced by `V_1234`.
    pub vkg_min_r34: f64,
    /// Whether that VKG model admits both equality constraints.
    pub vkg_equalities_feasible: bool,
    /// `min R_1 + R_2` of the VKG program with a constant shared variable.
    pub value_vkg: f64,
    /// `value_vkg − cms_sum12`.
    pub gap: f64,
}

fn l4_rows(rd3: f64, rd34: f64) -> Vec<RateRow<f64>> {
    vec![
        row(4, &[3], Relation::Eq, rd3),
        row(4, &[3, 4], Relation::Eq, rd34),
    ]
}

/// Four-description comparison at the separation point of `report`.
pub fn separation_l4(report: &SeparationReport, d3: f64, d34: f64) -> Result<L4Report> {
    let (zb, _) = report.best_point.to_model(Scheme::ZB)?;
    let (ec, _) = report.ec_point.to_model(Scheme::EC)?;
    let rd3 = rd_binary(d3)?;
    let rd34 = rd_binary(d34)?;
    let rows = l4_rows(rd3, rd34);

    let (cms, _) = build_l4_cms(&zb, d3, d34)?;
    let r = cms.min_rates_with(&weights(4, &[1, 2]), None, &rows)?;
    let zb_value = zb.min_rates(&[1.0, 1.0], None)?.objective;

    let vkg = as_vkg(&cms)?;
    let vkg_min_r34 = vkg.min_rates(&weights(4, &[3, 4]), None)?.objective;
    let vkg_equalities_feasible = match vkg.min_rates_with(&weights(4, &[1, 2]), None, &rows) {
        Ok(_) => true,
        Err(Error::Infeasible(_)) => false,
        Err(e) => return Err(e),
    };

    let (cms_ec, _) = build_l4_cms(&ec, d3, d34)?;
    let value_vkg = as_vkg(&cms_ec)?
        .min_rates_with(&weights(4, &[1, 2]), None, &rows)?
        .objective;
    Ok(L4Report {
        d3,
        d34,
        rd_d3: rd3,
        rd_d34: rd34,
        cms_rates: r.rates.rates.clone(),
        cms_sum12: r.objective,
        zb_value,
        vkg_min_r34,
        vkg_equalities_feasible,
        value_vkg,
        gap: value_vkg - r.objective,
    })
}

/// Three-description model: the two-description point plus a refinement
/// `U_13 = X ⊕ bern(d13)`. Distortions are constrained on
/// `{1},{2},{1,2},{1,3}`.
pub fn build_l3_cms(model: &AuxModel<f64>, d13: f64) -> Result<(AuxModel<f64>, DistortionSpec)> {
    check_two(model)?;
    if !(0.0..0.5).contains(&d13) {
        return Err(Error::InvalidArgument(format!(
            "D13 must lie in [0, 0.5), got {d13}"
        )));
    }
    let cond = vec![vec![1.0 - d13, d13], vec![d13, 1.0 - d13]];
    let joint = extend_joint(model, vec![VariableSpec::new("U_13", 2)], &cond)?;
    let mut roles = lift_roles(model, 3)?;
    roles.push(Role::new(
        "U_13",
        crate::regions::RoleKind::Refinement,
        set(3, &[1, 3]),
    ));
    let m = AuxModel::new(3, Scheme::CMS, joint, model.source_name(), &roles)?;
    let subsets = [set(3, &[1]), set(3, &[2]), set(3, &[1, 2]), set(3, &[1, 3])];
    Ok((m, DistortionSpec::hamming(2, &subsets)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct L3Report {
    pub d13: f64,
    /// Rates of the two-description optimum, used as caps on `R_1, R_2`.
    pub r1_cap: f64,
    pub r2_cap: f64,
    pub r3_cms: f64,
    pub r3_vkg: f64,
    /// Rate of the common codeword, `α_2({{1,2}})` of the witness.
    pub r_c: f64,
    /// `r3_vkg − r3_cms`.
    pub gap: f64,
    /// False when the witness does not separate the two-description schemes.
    pub witness: bool,
}

/// Three-description comparison: smallest `R_3` with `R_1, R_2` held at the
/// two-description optimum, under CMS (`V_12` stays out of description 3)
/// and VKG (`V_12` becomes `V_123`).
pub fn separation_l3(report: &SeparationReport, d13: Option<f64>) -> Result<L3Report> {
    let (zb, _) = report.best_point.to_model(Scheme::ZB)?;
    let two = zb.min_rates(&[1.0, 1.0], None)?;
    let (r1, r2) = (two.rates.rates[0], two.rates.rates[1]);
    let d1 = zb
        .synthesize_decoders(&DistortionSpec::hamming(2, &[set(2, &[1])]))?
        .1
        .get(set(2, &[1]))
        .unwrap_or(0.0);
    let d13 = d13.unwrap_or(0.5 * d1);
    let r_c = zb.alpha(2, &SubsetFamily::from_sets(2, [set(2, &[1, 2])])?)?;

    let (cms, _) = build_l3_cms(&zb, d13)?;
    let caps = [
        row(3, &[1], Relation::Le, r1 + CAP_TOL),
        row(3, &[2], Relation::Le, r2 + CAP_TOL),
    ];
    let w = weights(3, &[3]);
    let r3_cms = cms.min_rates_with(&w, None, &caps)?.rates.rates[2];
    let r3_vkg = as_vkg(&cms)?.min_rates_with(&w, None, &caps)?.rates.rates[2];
    Ok(L3Report {
        d13,
        r1_cap: r1,
        r2_cap: r2,
        r3_cms,
        r3_vkg,
        r_c,
        gap: r3_vkg - r3_cms,
        witness: report.gap > 0.0 && r_c > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::VarSet;
    use crate::search::L2Point;

    fn point(nv: usize) -> L2Point {
        let b = nv * 4;
        let mut theta: Vec<f64> = (0..2 * b).map(|i| ((i * 5 + 2) % 7) as f64 + 0.3).collect();
        for blk in theta.chunks_mut(b) {
            let s: f64 = blk.iter().sum();
            blk.iter_mut().for_each(|x| *x /= s);
        }
        L2Point { nv, nu: 2, theta }
    }

    #[test]
    fn l4_assembly_is_a_product() {
        let (zb, _) = point(3).to_model(Scheme::ZB).unwrap();
        let (m, spec) = build_l4_cms(&zb, 0.2, 0.1).unwrap();
        let j = m.joint();
        let g1 = j.var_set(&["V_12", "U_1", "U_2", "U_12"]).unwrap();
        let g2 = j.var_set(&["U_3", "U_34"]).unwrap();
        let x = VarSet::single(m.source_var());
        assert!(j.mutual_information_of(g1, g2, x).abs() < 1e-12);
        assert_eq!(spec.subsets().count(), 5);
        let r = m
            .min_rates_with(
                &weights(4, &[1, 2]),
                None,
                &l4_rows(rd_binary(0.2).unwrap(), rd_binary(0.1).unwrap()),
            )
            .unwrap();
        let zb_sum = zb.min_rates(&[1.0, 1.0], None).unwrap().objective;
        assert!((r.objective - zb_sum).abs() < 1e-9);
        assert!((r.rates.rates[2] - rd_binary(0.2).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn constant_shared_variable_gives_no_l3_gap() {
        let (ec, _) = point(1).to_model(Scheme::EC).unwrap();
        let (cms, _) = build_l3_cms(&ec, 0.05).unwrap();
        let w = weights(3, &[3]);
        let a = cms.min_rates(&w, None).unwrap().objective;
        let b = as_vkg(&cms).unwrap().min_rates(&w, None).unwrap().objective;
        assert!((a - b).abs() < 1e-9, "{a} {b}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let (zb, _) = point(2).to_model(Scheme::ZB).unwrap();
        assert!(build_l4_cms(&zb, 0.1, 0.2).is_err());
        assert!(build_l3_cms(&zb, 0.5).is_err());
    }
}
