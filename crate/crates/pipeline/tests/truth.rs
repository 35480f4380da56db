use cardiorefine_core::labels::{Annotations, Plane};
use cardiorefine_core::phantom::{generate_phantom, PhantomParams};
use cardiorefine_core::{Geometry, IntensityVolume, LabelSchema, LabelVolume, Structure, Volume};
use cardiorefine_pipeline::training::stage_pair;
use cardiorefine_pipeline::truth::crop_start;
use cardiorefine_pipeline::{
    build_ground_truth, simulate_fov_crop, Case, Error, GridConfig, Stage, StageTrainingConfig,
};
use proptest::prelude::*;

fn id(schema: LabelSchema, s: Structure) -> u8 {
    schema.id_of(s).unwrap()
}

#[test]
fn phantom_ten_rebuilt_exactly() {
    for seed in 0..4 {
        let ph = generate_phantom(&PhantomParams::standard(seed)).unwrap();
        let six = ph.labels.merge_into(LabelSchema::Six).unwrap();
        let gt = build_ground_truth(&ph.intensity, &six, &ph.annotations).unwrap();
        assert_eq!(gt.ten, ph.labels, "seed {seed}");
        assert_eq!(gt.seven, ph.labels.merge_into(LabelSchema::Seven).unwrap());
        assert_eq!(gt.myo_transferred, 0);
        // relabelling only: nothing is deleted on the way to TEN
        assert_eq!(gt.ten.foreground_count(), six.foreground_count());
        assert_eq!(gt.seven.foreground_count(), six.foreground_count());
    }
}

#[test]
fn no_pa_map_is_seven_without_pa() {
    let ph = generate_phantom(&PhantomParams::standard(5)).unwrap();
    let gt = build_ground_truth(&ph.intensity, &ph.labels, &ph.annotations).unwrap();
    assert_eq!(gt.six_no_pa_refined.schema(), LabelSchema::SixNoPaRefined);
    let pa = id(LabelSchema::Seven, Structure::PA);
    for (&a, &b) in gt.seven.data().iter().zip(gt.six_no_pa_refined.data()) {
        assert_eq!(b, if a == pa { 0 } else { a });
    }
    assert!(gt.seven.count_structure(Structure::PA) > 0);
}

#[test]
fn plane_beyond_the_heart_leaves_pa_empty() {
    let ph = generate_phantom(&PhantomParams::standard(1)).unwrap();
    let mut ann = ph.annotations.clone();
    ann.plane = Plane::new([1e4, 0.0, 0.0], [1.0, 0.0, 0.0]).unwrap();
    let gt = build_ground_truth(&ph.intensity, &ph.labels, &ann).unwrap();
    assert_eq!(gt.seven.count_structure(Structure::PA), 0);
    assert_eq!(gt.seven.data(), gt.six_no_pa_refined.data());
}

#[test]
fn no_boxes_means_all_body() {
    let ph = generate_phantom(&PhantomParams::standard(2)).unwrap();
    let ann = Annotations { boxes: vec![], ..ph.annotations.clone() };
    let gt = build_ground_truth(&ph.intensity, &ph.labels, &ann).unwrap();
    let la = ph.labels.merge_into(LabelSchema::Six).unwrap().count_structure(Structure::LA);
    assert_eq!(gt.ten.count_structure(Structure::LAbody), la);
    for s in [Structure::LPV, Structure::RPV, Structure::LAA] {
        assert_eq!(gt.ten.count_structure(s), 0);
    }
}

#[test]
fn preparing_without_annotations_fails() {
    let ph = generate_phantom(&PhantomParams::standard(0)).unwrap();
    let mut case = Case::from_phantom("a", &ph);
    case.annotations = None;
    assert!(matches!(case.prepare(&GridConfig::desk()), Err(Error::MissingAnnotations(id)) if id == "a"));
}

#[test]
fn prepared_targets_share_the_window() {
    let ph = generate_phantom(&PhantomParams::standard(3)).unwrap();
    let p = Case::from_phantom("c", &ph).prepare(&GridConfig::desk()).unwrap();
    let gt = p.truth().unwrap();
    for v in [&gt.six, &gt.six_no_pa_refined, &gt.seven, &gt.ten] {
        assert_eq!(v.geometry(), p.intensity.geometry());
        assert_eq!(v.dims(), [32, 48, 48]);
    }
    // the standard phantom already sits on the desk grid; only the window moves
    assert_eq!(gt.ten.foreground_count(), ph.labels.foreground_count());
}

fn slab(nz: usize) -> (IntensityVolume, LabelVolume) {
    let g = Geometry::isotropic([nz, 2, 3], 1.0).unwrap();
    let n = g.len();
    (
        IntensityVolume::new(g.clone(), (0..n).map(|i| i as f32 + 1.0).collect()).unwrap(),
        LabelVolume::new(g, LabelSchema::Six, (0..n).map(|i| (i % 6 + 1) as u8).collect()).unwrap(),
    )
}

#[test]
fn zero_fraction_is_identity() {
    let (img, lab) = slab(7);
    let (ci, cl) = simulate_fov_crop(&img, &lab, 0.0).unwrap();
    assert_eq!((ci, cl), (img, lab));
}

#[test]
fn quarter_of_128_slices_clears_32() {
    let (img, lab) = slab(128);
    let (ci, cl) = simulate_fov_crop(&img, &lab, 0.25).unwrap();
    let per = 6;
    assert!(cl.data()[96 * per..].iter().all(|&v| v == 0));
    assert!(cl.data()[..96 * per].iter().all(|&v| v != 0));
    assert!(ci.data()[96 * per..].iter().all(|&v| v == 1.0));
    assert_eq!(&ci.data()[..96 * per], &img.data()[..96 * per]);
}

#[test]
fn fraction_out_of_range_rejected() {
    let (img, lab) = slab(4);
    for f in [-0.1, 0.5, 0.9, f64::NAN] {
        assert!(simulate_fov_crop(&img, &lab, f).is_err(), "{f}");
    }
}

#[test]
fn cropped_inputs_miss_part_of_the_pa() {
    let grid = GridConfig::desk();
    let cfg = StageTrainingConfig::new(Stage::Unet2Extrapolate);
    let pa = id(LabelSchema::Seven, Structure::PA);
    for seed in 0..4 {
        let ph = generate_phantom(&PhantomParams::standard(seed)).unwrap();
        let case = Case::from_phantom("p", &ph).prepare(&grid).unwrap();
        let pair = stage_pair(Stage::Unet2Extrapolate, &case, &grid, &cfg).unwrap().unwrap();
        let input = pair.sample.input.data();
        let v = pair.target.data().len();
        // channel 0 is background in the one-hot input
        let outside = (0..v).filter(|&i| pair.target.data()[i] == pa && input[i] == 1.0).count();
        assert!(outside > 0, "seed {seed}");
        let above = crop_start(32, cfg.fov_crop_fraction) * 48 * 48;
        assert!((above..v).any(|i| pair.target.data()[i] == pa), "seed {seed}");
    }
}

proptest! {
    #[test]
    fn crop_only_touches_the_top(nz in 1usize..40, f in 0.0f64..0.5) {
        let (img, lab) = slab(nz);
        let (ci, cl) = simulate_fov_crop(&img, &lab, f).unwrap();
        let cut = crop_start(nz, f) * 6;
        prop_assert_eq!(nz * 6 - cut, (f * nz as f64).floor() as usize * 6);
        prop_assert_eq!(&cl.data()[..cut], &lab.data()[..cut]);
        prop_assert_eq!(&ci.data()[..cut], &img.data()[..cut]);
        prop_assert!(cl.data()[cut..].iter().all(|&v| v == 0));
    }
}
