use cardiorefine_core::metrics::{dice, dice_report, CaseScores, DiceReport};
use cardiorefine_core::{Geometry, LabelSchema, LabelVolume, Structure, Volume};
use proptest::prelude::*;

const TABLE_COLUMNS: [Structure; 5] = [Structure::LV, Structure::LVMyo, Structure::RV, Structure::LA, Structure::RA];

fn row_report(values: [f64; 5]) -> DiceReport {
    DiceReport::from_scores(
        TABLE_COLUMNS.to_vec(),
        vec![CaseScores {
            case_id: "mean".into(),
            scores: values.iter().map(|&v| Some(v / 100.0)).collect(),
        }],
    )
    .unwrap()
}

#[test]
fn published_rows_render_exactly() {
    let r = row_report([90.1, 84.7, 89.2, 91.7, 87.7]);
    assert_eq!(r.mean_row("U-Net 4", &TABLE_COLUMNS), "U-Net 4\t90.1\t84.7\t89.2\t91.7\t87.7");
    let r = row_report([88.0, 81.5, 83.4, 81.6, 82.2]);
    assert_eq!(r.mean_row("U-Net 1", &TABLE_COLUMNS), "U-Net 1\t88.0\t81.5\t83.4\t81.6\t82.2");
}

#[test]
fn table_lists_labels_as_columns() {
    let r = row_report([90.1, 84.7, 89.2, 91.7, 87.7]);
    let t = r.to_table();
    let lines: Vec<&str> = t.lines().collect();
    assert_eq!(lines[0], "\tLV\tLVMyo\tRV\tLA\tRA");
    assert_eq!(lines[1], "n\t1\t1\t1\t1\t1");
    assert_eq!(lines[3], "mean\t90.1\t84.7\t89.2\t91.7\t87.7");
    assert_eq!(lines[4], "std\t0.0\t0.0\t0.0\t0.0\t0.0");
}

#[test]
fn out_of_range_scores_rejected() {
    let bad = CaseScores {
        case_id: "x".into(),
        scores: vec![Some(1.2)],
    };
    assert!(DiceReport::from_scores(vec![Structure::LV], vec![bad]).is_err());
}

#[test]
fn csv_rows_per_case_and_label() {
    let g = Geometry::isotropic([1, 2, 2], 1.0).unwrap();
    let p = LabelVolume::new(g.clone(), LabelSchema::Six, vec![1, 1, 2, 0]).unwrap();
    let r = LabelVolume::new(g, LabelSchema::Six, vec![1, 0, 2, 2]).unwrap();
    let rep = dice_report(&[("c1".into(), &p, &r)], LabelSchema::Six).unwrap();
    let csv = rep.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("case_id,label,dice"));
    assert_eq!(lines.next(), Some("c1,LV,0.666667"));
    assert_eq!(lines.next(), Some("c1,LVMyo,0.666667"));
    assert_eq!(lines.next(), None);
}

fn pair(max: usize) -> impl Strategy<Value = (LabelVolume, LabelVolume)> {
    (1..=max, 1..=max, 1..=max).prop_flat_map(|(z, y, x)| {
        let n = z * y * x;
        (prop::collection::vec(0u8..=3, n), prop::collection::vec(0u8..=3, n)).prop_map(move |(a, b)| {
            let g = Geometry::isotropic([z, y, x], 1.0).unwrap();
            (
                LabelVolume::new(g.clone(), LabelSchema::Six, a).unwrap(),
                LabelVolume::new(g, LabelSchema::Six, b).unwrap(),
            )
        })
    })
}

fn relabel(v: &LabelVolume, f: impl Fn(usize, u8) -> u8) -> LabelVolume {
    let data = v.data().iter().enumerate().map(|(i, &l)| f(i, l)).collect();
    LabelVolume::new(v.geometry().clone(), v.schema(), data).unwrap()
}

proptest! {
    #[test]
    fn dice_symmetric_and_bounded((a, b) in pair(5), l in 0u8..=3) {
        let ab = dice(&a, &b, l).unwrap();
        prop_assert_eq!(ab, dice(&b, &a, l).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(dice(&a, &a, l).unwrap(), 1.0);
    }

    #[test]
    fn dice_ignores_voxel_order((a, b) in pair(5), l in 0u8..=3, seed in any::<u64>()) {
        let n = a.data().len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let pa = relabel(&a, |i, _| a.data()[perm[i]]);
        let pb = relabel(&b, |i, _| b.data()[perm[i]]);
        prop_assert_eq!(dice(&pa, &pb, l).unwrap(), dice(&a, &b, l).unwrap());
    }

    #[test]
    fn dice_ignores_other_labels((a, b) in pair(5), l in 1u8..=3, other in 4u8..=6) {
        let ra = relabel(&a, |_, v| if v != l && v != 0 { other } else { v });
        let rb = relabel(&b, |_, v| if v != l { (v + 1) % 3 + 4 } else { v });
        prop_assert_eq!(dice(&ra, &rb, l).unwrap(), dice(&a, &b, l).unwrap());
    }

    #[test]
    fn summary_order_statistics(values in prop::collection::vec(0.0f64..=1.0, 1..12)) {
        let cases = values.iter().enumerate().map(|(i, &v)| CaseScores {
            case_id: format!("c{i}"),
            scores: vec![Some(v)],
        }).collect();
        let s = &DiceReport::from_scores(vec![Structure::LV], cases).unwrap().summary()[0];
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assert!(sorted[0] <= s.median && s.median <= sorted[sorted.len() - 1]);
        prop_assert!(sorted[0] - 1e-12 <= s.mean && s.mean <= sorted[sorted.len() - 1] + 1e-12);
        prop_assert!(s.std >= 0.0);
        prop_assert_eq!(s.n, values.len());
    }
}
