use crate::error::{Error, Result};
use crate::schema::Structure;
use crate::volume::{IntensityVolume, LabelVolume, Volume};

use super::mask::{BinaryMask, Connectivity};
use super::morphology::dilate;

/// Upper bound on correction passes.
pub const MAX_REASSIGN_ITERATIONS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct ReassignOutcome {
    pub labels: LabelVolume,
    /// Passes entered, including the one that found nothing to move.
    pub iterations: usize,
    pub transferred: usize,
}

fn mean_where(values: &[f32], mut pred: impl FnMut(usize) -> bool) -> Option<f64> {
    let (mut sum, mut n) = (0.0f64, 0usize);
    for (i, &v) in values.iter().enumerate() {
        if pred(i) {
            sum += v as f64;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Moves over-segmented LV cavity voxels back into the myocardium.
///
/// The myocardium is dilated by one face-connected layer; the part of that
/// shell lying in the LV is the candidate set. When the candidates' mean
/// intensity is closer to the current myocardium mean than to the current
/// LV mean, every candidate darker than `mean + sd` of the *original*
/// myocardium is relabelled LVMyo. Repeats up to
/// [`MAX_REASSIGN_ITERATIONS`] times and stops early on an empty candidate
/// set or a failed mean test.
pub fn lv_myo_reassign(
    intensity: &IntensityVolume,
    labels: &LabelVolume,
) -> Result<ReassignOutcome> {
    intensity.geometry().ensure_matches(labels.geometry())?;
    let schema = labels.schema();
    let lv = schema.require(Structure::LV)?;
    let myo = schema.require(Structure::LVMyo)?;
    let img = intensity.data();
    let mut data = labels.data().to_vec();

    let n0 = data.iter().filter(|&&v| v == myo).count();
    if n0 == 0 {
        return Err(Error::EmptyStructure("LVMyo"));
    }
    let mu0 = mean_where(img, |i| data[i] == myo).unwrap();
    let var0 = data
        .iter()
        .zip(img)
        .filter(|(&l, _)| l == myo)
        .map(|(_, &v)| (v as f64 - mu0).powi(2))
        .sum::<f64>()
        / n0 as f64;
    let threshold = mu0 + var0.sqrt();

    let dims = labels.dims();
    let mut iterations = 0;
    let mut transferred = 0;
    while iterations < MAX_REASSIGN_ITERATIONS {
        iterations += 1;
        let myo_mask = BinaryMask::new(dims, data.iter().map(|&v| v == myo).collect())?;
        let grown = dilate(&myo_mask, Connectivity::Face6, 1);
        let overlap: Vec<usize> = grown.indices().filter(|&i| data[i] == lv).collect();
        if overlap.is_empty() {
            break;
        }
        let mu_overlap = overlap.iter().map(|&i| img[i] as f64).sum::<f64>() / overlap.len() as f64;
        let mu_myo = mean_where(img, |i| data[i] == myo).unwrap();
        let mu_lv = mean_where(img, |i| data[i] == lv).unwrap();
        if (mu_overlap - mu_myo).abs() >= (mu_overlap - mu_lv).abs() {
            break;
        }
        let moved: Vec<usize> = overlap
            .into_iter()
            .filter(|&i| (img[i] as f64) < threshold)
            .collect();
        for &i in &moved {
            data[i] = myo;
        }
        transferred += moved.len();
        if moved.is_empty() {
            break;
        }
    }

    Ok(ReassignOutcome {
        labels: labels.rebuild(labels.geometry().clone(), data),
        iterations,
        transferred,
    })
}
