mod common;

use common::{random_cms3, random_vkg_like};
use mdcms_core::lattice::DescriptionSet;
use mdcms_core::probability::{JointDistribution, VariableSpec};
use mdcms_core::regions::{
    AuxModel, Decoder, DistortionMeasure, DistortionSpec, DistortionVector, RateAllocation, Scheme,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn reduction_identity_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let l = if i % 20 == 19 { 4 } else { 3 };
        let m = random_vkg_like(&mut rng, l, Scheme::CMS);
        let c = m.check_reduction().unwrap();
        worst = worst.max(c.max_discrepancy);
        assert!(
            c.max_discrepancy <= 1e-9,
            "model {i}: {}",
            c.max_discrepancy
        );
    }
    assert!(worst <= 1e-9);
}

#[test]
fn reduction_lp_matches_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..30 {
        let m = random_vkg_like(&mut rng, 3, Scheme::CMS);
        let c = m.check_reduction().unwrap();
        assert!(c.max_lp_gap <= 1e-9, "model {i}: lp gap {}", c.max_lp_gap);
    }
}

#[test]
fn alpha_beta_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..40 {
        let m = random_cms3(&mut rng);
        for c in m.cms_constraints().unwrap() {
            assert!(c.bound >= -1e-9, "{:?} = {}", c.kind, c.bound);
        }
    }
}

#[test]
fn zb_model_matches_classic_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let m = random_vkg_like(&mut rng, 2, Scheme::ZB);
        let [r1, r2, sum] = m.zb_bounds().unwrap();
        let a = m.min_rates(&[1.0, 0.0], None).unwrap().objective;
        let b = m.min_rates(&[0.0, 1.0], None).unwrap().objective;
        let s = m.min_rates(&[1.0, 1.0], None).unwrap().objective;
        assert!((a - r1).abs() < 1e-9 && (b - r2).abs() < 1e-9);
        assert!((s - r1.max(0.0).max(sum - r2).max(r1 + r2).max(sum)).abs() < 1e-9);
        assert!((m.sum_rate_l2().unwrap() - s).abs() < 1e-9);
        let vkg = m.reduce_cms_to_vkg().unwrap();
        assert!((vkg.sum_rate_l2().unwrap() - s).abs() < 1e-9);
    }
}

#[test]
fn membership_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let full = DescriptionSet::full(3).unwrap();
    let spec = DistortionSpec::hamming(2, &full.nonempty_subsets());
    for _ in 0..10 {
        let m = random_cms3(&mut rng);
        let w: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..1.0)).collect();
        let r = m.min_rates(&w, Some(&spec)).unwrap();
        let d = r.distortions.clone().unwrap();
        assert!(m.membership(&r.rates.rates, &d, &spec).unwrap());
        for i in 0..3 {
            let mut up = r.rates.rates.clone();
            up[i] += 0.05;
            assert!(m.membership(&up, &d, &spec).unwrap());
        }
        let alloc = r.allocation.unwrap();
        assert!(m.allocation_feasible(&alloc).unwrap().feasible);
        assert!(
            m.allocation_feasible(&alloc.shifted(0.1).unwrap())
                .unwrap()
                .feasible
        );
        let below: Vec<f64> = r.rates.rates.iter().map(|x| x - 0.05).collect();
        let total: f64 = r.rates.rates.iter().zip(&w).map(|(a, b)| a * b).sum();
        if total > 0.2 {
            assert!(!m.membership(&below, &d, &spec).unwrap());
        }
    }
}

#[test]
fn synthesized_decoders_beat_random_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..5 {
        let m = random_cms3(&mut rng);
        let full = DescriptionSet::full(3).unwrap();
        for k in full.nonempty_subsets() {
            let meas = DistortionMeasure {
                alphabet: 3,
                matrix: (0..2)
                    .map(|_| (0..3).map(|_| rng.gen_range(0.0..2.0)).collect())
                    .collect(),
            };
            let spec = DistortionSpec::new().with(k, meas.clone());
            let (dec, d) = m.synthesize_decoders(&spec).unwrap();
            let best = d.get(k).unwrap();
            let base: &Decoder = dec.get(k).unwrap();
            for _ in 0..50 {
                let mut alt = base.clone();
                alt.table.iter_mut().for_each(|y| *y = rng.gen_range(0..3));
                assert!(best <= m.decoder_distortion(&alt, &meas).unwrap() + 1e-12);
            }
        }
    }
}

/// Two binary descriptions: grid search over `(R1, R2)` at step 2^-10.
#[test]
fn lp_matches_rate_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let step = 1.0 / 1024.0;
    for scheme in [Scheme::ZB, Scheme::VKG] {
        for _ in 0..3 {
            let m = random_vkg_like(&mut rng, 2, scheme);
            let w = [rng.gen_range(0.2..1.0), rng.gen_range(0.2..1.0)];
            let lp = m.min_rates(&w, None).unwrap().objective;
            let spec = DistortionSpec::new();
            let target = DistortionVector::default();
            let max = 4.0;
            let n = (max / step) as usize;
            let mut best = f64::INFINITY;
            // For each R1, membership is monotone in R2: bisect the smallest member.
            for i in 0..=n {
                let r1 = i as f64 * step;
                if w[0] * r1 >= best {
                    break;
                }
                if !m.membership(&[r1, max], &target, &spec).unwrap() {
                    continue;
                }
                let (mut lo, mut hi) = (0usize, n);
                if m.membership(&[r1, 0.0], &target, &spec).unwrap() {
                    hi = 0;
                } else {
                    while hi - lo > 1 {
                        let mid = (lo + hi) / 2;
                        if m.membership(&[r1, mid as f64 * step], &target, &spec)
                            .unwrap()
                        {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                }
                best = best.min(w[0] * r1 + w[1] * hi as f64 * step);
            }
            assert!(best >= lp - 1e-9, "grid {best} below lp {lp}");
            assert!(
                best - lp <= (w[0] + w[1]) * step + 1e-9,
                "grid {best} vs lp {lp}"
            );
        }
    }
}

#[test]
fn zero_allocation_on_constant_model() {
    let joint = JointDistribution::new(vec![VariableSpec::new("X", 2)], vec![0.5, 0.5]).unwrap();
    let m = AuxModel::new(4, Scheme::CMS, joint, "X", &[]).unwrap();
    assert!(
        m.allocation_feasible(&RateAllocation::zero(4))
            .unwrap()
            .feasible
    );
}
