use crate::error::{Error, Result};
use crate::schema::{LabelSchema, Structure};
use crate::volume::{LabelVolume, Volume};

use super::parcel::to_ten;

/// Combines the stage predictions into one TEN map.
///
/// Starting from `base` (SIX_NO_PA_REFINED):
/// 1. where `extrapolated` (SEVEN) predicts PA and `base` has RV or
///    background, the voxel becomes PA;
/// 2. every `base` LA voxel takes its sub-label from `parcellated` (TEN),
///    defaulting to LAbody where that map has no LA part.
///
/// A missing stage contributes nothing: no PA, or an all-LAbody atrium.
pub fn fuse_predictions(
    base: &LabelVolume,
    extrapolated: Option<&LabelVolume>,
    parcellated: Option<&LabelVolume>,
) -> Result<LabelVolume> {
    base.ensure_schema(LabelSchema::SixNoPaRefined)?;
    if let Some(e) = extrapolated {
        e.ensure_schema(LabelSchema::Seven)?;
        base.geometry().ensure_matches(e.geometry())?;
    }
    if let Some(p) = parcellated {
        p.ensure_schema(LabelSchema::Ten)?;
        base.geometry().ensure_matches(p.geometry())?;
    }

    let schema = base.schema();
    let rv = schema.require(Structure::RV)?;
    let la = schema.require(Structure::LA)?;
    let pa_seven = LabelSchema::Seven.require(Structure::PA)?;
    let pa_ten = LabelSchema::Ten.require(Structure::PA)?;
    let body = LabelSchema::Ten.require(Structure::LAbody)?;

    let mut data = to_ten(base, Structure::LAbody)?;
    let src = base.data();
    if let Some(e) = extrapolated {
        for (i, &v) in e.data().iter().enumerate() {
            if v == pa_seven && (src[i] == rv || src[i] == 0) {
                data[i] = pa_ten;
            }
        }
    }
    if let Some(p) = parcellated {
        for (i, &v) in p.data().iter().enumerate() {
            if src[i] == la {
                let part = LabelSchema::Ten.structure_of(v).filter(|s| s.is_la_part());
                data[i] = match part {
                    Some(s) => LabelSchema::Ten.require(s)?,
                    None => body,
                };
            }
        }
    }
    LabelVolume::new(base.geometry().clone(), LabelSchema::Ten, data).map_err(|e| match e {
        Error::InvalidLabel { .. } => Error::SchemaMismatch {
            expected: "TEN".into(),
            found: "undeclared label after fusion".into(),
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;

    fn vol(schema: LabelSchema, data: &[u8]) -> LabelVolume {
        let g = Geometry::isotropic([1, 1, data.len()], 1.0).unwrap();
        LabelVolume::new(g, schema, data.to_vec()).unwrap()
    }

    #[test]
    fn identity_fusion_renames_la() {
        // LV LVMyo RV LA RA AA bg
        let base = vol(LabelSchema::SixNoPaRefined, &[1, 2, 3, 4, 5, 6, 0]);
        let ext = vol(LabelSchema::Seven, &[1, 2, 3, 4, 5, 6, 0]);
        let parc = vol(LabelSchema::Ten, &[1, 2, 3, 7, 4, 5, 0]);
        let out = fuse_predictions(&base, Some(&ext), Some(&parc)).unwrap();
        assert_eq!(out.data(), &[1, 2, 3, 7, 4, 5, 0]);
    }

    #[test]
    fn pa_stamped_on_rv_and_background_only() {
        let base = vol(LabelSchema::SixNoPaRefined, &[3, 0, 1, 4]);
        let ext = vol(LabelSchema::Seven, &[7, 7, 7, 7]);
        let out = fuse_predictions(&base, Some(&ext), None).unwrap();
        // PA on RV and background; LV kept; LA becomes LAbody
        assert_eq!(out.data(), &[6, 6, 1, 7]);
    }

    #[test]
    fn la_parts_and_default() {
        let base = vol(LabelSchema::SixNoPaRefined, &[4, 4, 4, 4]);
        let parc = vol(LabelSchema::Ten, &[8, 9, 10, 0]);
        let out = fuse_predictions(&base, None, Some(&parc)).unwrap();
        assert_eq!(out.data(), &[8, 9, 10, 7]);
    }

    #[test]
    fn schema_mismatch_rejected() {
        let base = vol(LabelSchema::Six, &[1]);
        assert!(matches!(
            fuse_predictions(&base, None, None),
            Err(Error::SchemaMismatch { .. })
        ));
        let base = vol(LabelSchema::SixNoPaRefined, &[1]);
        let wrong = vol(LabelSchema::Ten, &[1]);
        assert!(fuse_predictions(&base, Some(&wrong), None).is_err());
    }
}
