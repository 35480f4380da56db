use std::fs;

use cardiorefine_unet::weights::{from_bytes, to_bytes, Manifest, MAGIC};
use cardiorefine_unet::{load_weights, save_weights, Error, UNet, UNetConfig};

fn model() -> UNet<f32> {
    UNet::new(UNetConfig::new(2, 5, 0.125).unwrap(), 3).unwrap()
}

/// Splits a file image into (manifest, blob).
fn parts(bytes: &[u8]) -> (Manifest, Vec<u8>) {
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    (serde_json::from_slice(&bytes[16..16 + len]).unwrap(), bytes[16 + len..].to_vec())
}

fn assemble(m: &Manifest, blob: &[u8]) -> Vec<u8> {
    let json = serde_json::to_vec(m).unwrap();
    let mut out = MAGIC.to_vec();
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(blob);
    out
}

#[test]
fn round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.w3u");
    let m = model();
    save_weights(&m, &path).unwrap();
    let back: UNet<f32> = load_weights(&path).unwrap();
    assert_eq!(back.config(), m.config());
    for ((na, a), (nb, b)) in m.weights().iter().zip(back.weights().iter()) {
        assert_eq!(na, nb);
        assert_eq!(a.shape(), b.shape());
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(fs::read(&path).unwrap(), to_bytes(&back));
}

#[test]
fn manifest_lists_layout() {
    let (m, blob) = parts(&to_bytes(&model()));
    assert_eq!(m.tensors.len(), 28);
    assert_eq!(m.tensors[0].name, "down1.conv1.weight");
    assert_eq!(m.tensors[0].shape, vec![2, 2, 3, 3, 3]);
    assert!(m.tensors.iter().all(|t| t.dtype == "f32"));
    let last = m.tensors.last().unwrap();
    assert_eq!(last.offset + last.bytes, blob.len());
}

#[test]
fn single_precision_file_loads_as_double() {
    let m = model();
    let wide: UNet<f64> = from_bytes(&to_bytes(&m), "mem".as_ref()).unwrap();
    for ((_, a), (_, b)) in m.weights().iter().zip(wide.weights().iter()) {
        assert!(a.data().iter().zip(b.data()).all(|(&x, &y)| x as f64 == y));
    }
    let narrow: UNet<f32> = from_bytes(&to_bytes(&wide), "mem".as_ref()).unwrap();
    assert_eq!(narrow.weights(), m.weights());
}

#[test]
fn truncated_file_is_an_error() {
    let bytes = to_bytes(&model());
    for cut in [4, 12, 40, bytes.len() - 1] {
        let r = from_bytes::<f32>(&bytes[..cut], "t".as_ref());
        assert!(matches!(r, Err(Error::Format { .. })), "cut at {cut}: {r:?}");
    }
}

#[test]
fn trailing_bytes_are_an_error() {
    let mut bytes = to_bytes(&model());
    bytes.push(0);
    assert!(matches!(from_bytes::<f32>(&bytes, "t".as_ref()), Err(Error::Format { .. })));
}

#[test]
fn edited_shape_names_the_layer() {
    let (mut m, blob) = parts(&to_bytes(&model()));
    let e = m.tensors.iter_mut().find(|t| t.name == "up2.deconv.weight").unwrap();
    e.shape[0] += 1;
    match from_bytes::<f32>(&assemble(&m, &blob), "t".as_ref()) {
        Err(Error::WeightMismatch { layer, .. }) => assert_eq!(layer, "up2.deconv"),
        other => panic!("{other:?}"),
    }
    // consistent byte counts but a shape the architecture does not have
    let (mut m, blob) = parts(&to_bytes(&model()));
    let e = m.tensors.iter_mut().find(|t| t.name == "down1.conv2.weight").unwrap();
    let s = e.shape.clone();
    e.shape = vec![s[1], s[0], 3, 3, 3];
    match from_bytes::<f32>(&assemble(&m, &blob), "t".as_ref()) {
        Err(Error::WeightMismatch { layer, reason }) => {
            assert_eq!(layer, "down1.conv2");
            assert!(reason.contains("expected"), "{reason}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn config_mismatch_is_rejected() {
    let (mut m, blob) = parts(&to_bytes(&model()));
    m.config.out_channels = 6;
    assert!(matches!(
        from_bytes::<f32>(&assemble(&m, &blob), "t".as_ref()),
        Err(Error::WeightMismatch { .. })
    ));
}

#[test]
fn bad_magic_and_missing_file() {
    let mut bytes = to_bytes(&model());
    bytes[0] = b'X';
    assert!(from_bytes::<f32>(&bytes, "t".as_ref()).is_err());
    assert!(matches!(load_weights::<f32>("/nonexistent/m.w3u"), Err(Error::Io { .. })));
}
