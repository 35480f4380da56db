use super::mask::{BinaryMask, Connectivity, Neighborhood};

/// Binary dilation: each pass adds every voxel adjacent to the current set.
///
/// `iterations == 0` returns the input unchanged.
pub fn dilate(mask: &BinaryMask, connectivity: Connectivity, iterations: usize) -> BinaryMask {
    let hood = Neighborhood::new(mask.dims(), connectivity);
    let mut current = mask.clone();
    for _ in 0..iterations {
        let mut next = current.clone();
        for i in current.indices() {
            hood.for_each(i, |n| next.set(n, true));
        }
        if next == current {
            break;
        }
        current = next;
    }
    current
}
