mod common;

use cardiorefine_core::{FeatureGrid, Geometry, LabelSchema, LabelVolume, Volume};
use cardiorefine_unet::loss::{cross_entropy, softmax, softmax_cross_entropy};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn labels(r: &mut rand_chacha::ChaCha8Rng, dims: [usize; 3], schema: LabelSchema) -> LabelVolume {
    let n = dims.iter().product();
    let data = (0..n).map(|_| r.random_range(0..schema.num_channels() as u8)).collect();
    LabelVolume::new(Geometry::isotropic(dims, 1.0).unwrap(), schema, data).unwrap()
}

#[test]
fn peaked_logits_give_vanishing_loss() {
    let mut r = rng(1);
    let t = labels(&mut r, [3, 3, 3], LabelSchema::Six);
    let mut g = FeatureGrid::<f64>::zeros([1, 7, 3, 3, 3]);
    for (i, &l) in t.data().iter().enumerate() {
        g.data_mut()[l as usize * 27 + i] = 50.0;
    }
    let (loss, _) = softmax_cross_entropy(&g, &t, None).unwrap();
    assert!(loss < 1e-20, "{loss}");
}

#[test]
fn uniform_logits_give_log_c() {
    let mut r = rng(2);
    for schema in [LabelSchema::Six, LabelSchema::Seven, LabelSchema::Ten] {
        let t = labels(&mut r, [2, 3, 4], schema);
        let c = schema.num_channels();
        let (loss, _) = softmax_cross_entropy(&FeatureGrid::<f64>::zeros([1, c, 2, 3, 4]), &t, None).unwrap();
        assert!((loss - (c as f64).ln()).abs() < 1e-12);
    }
}

#[test]
fn gradient_sums_to_zero_per_voxel() {
    let mut r = rng(3);
    let t = labels(&mut r, [3, 3, 3], LabelSchema::Ten);
    let g = grid(&mut r, [1, 11, 3, 3, 3]);
    let (_, grad) = softmax_cross_entropy(&g, &t, None).unwrap();
    for i in 0..27 {
        let s: f64 = (0..11).map(|c| grad.data()[c * 27 + i]).sum();
        assert!(s.abs() < 1e-15);
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut r = rng(4);
    let t = labels(&mut r, [3, 3, 3], LabelSchema::Six);
    let weights = [0.2, 1.0, 2.0, 1.5, 0.7, 1.1, 3.0];
    for w in [None, Some(&weights[..])] {
        let g = grid(&mut r, [1, 7, 3, 3, 3]);
        let (_, grad) = softmax_cross_entropy(&g, &t, w).unwrap();
        let mut v = g.data().to_vec();
        let numeric = numeric_grad(&mut v, |x| {
            let g = FeatureGrid::from_vec([1, 7, 3, 3, 3], x.to_vec()).unwrap();
            softmax_cross_entropy(&g, &t, w).unwrap().0
        });
        let worst = worst_rel_err(grad.data(), &numeric);
        assert!(worst < 1e-6, "{worst}");
    }
}

#[test]
fn weighted_loss_is_weighted_mean() {
    let g = Geometry::isotropic([1, 1, 2], 1.0).unwrap();
    let t = LabelVolume::new(g, LabelSchema::Six, vec![0, 1]).unwrap();
    let logits = FeatureGrid::<f64>::zeros([1, 7, 1, 1, 2]);
    let mut w = vec![1.0; 7];
    w[1] = 3.0;
    let (loss, _) = softmax_cross_entropy(&logits, &t, Some(&w)).unwrap();
    assert!((loss - 7f64.ln()).abs() < 1e-12);
    let mut peaked = logits.clone();
    peaked.data_mut()[0] = 40.0; // voxel 0 confidently right
    let (loss, _) = softmax_cross_entropy(&peaked, &t, Some(&w)).unwrap();
    assert!((loss - 0.75 * 7f64.ln()).abs() < 1e-12);
}

#[test]
fn rejects_bad_targets_and_shapes() {
    let g = FeatureGrid::<f64>::zeros([1, 3, 1, 1, 2]);
    assert!(cross_entropy(&g, &[0, 3], None).is_err());
    assert!(cross_entropy(&g, &[0], None).is_err());
    assert!(cross_entropy(&g, &[0, 1], Some(&[1.0, 1.0])).is_err());
    let lv = LabelVolume::background(Geometry::isotropic([1, 1, 2], 1.0).unwrap(), LabelSchema::Six);
    assert!(softmax_cross_entropy(&g, &lv, None).is_err());
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(c in 1usize..12, n in 1usize..20, seed in any::<u64>(), scale in 0.1f64..200.0) {
        let mut r = rng(seed);
        let v: Vec<f64> = values(&mut r, c * n).iter().map(|x| x * scale).collect();
        let p = softmax(&FeatureGrid::from_vec([1, c, 1, 1, n], v).unwrap());
        for i in 0..n {
            let s: f64 = (0..c).map(|ch| p.data()[ch * n + i]).sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
            prop_assert!((0..c).all(|ch| p.data()[ch * n + i] >= 0.0));
        }
    }
}
