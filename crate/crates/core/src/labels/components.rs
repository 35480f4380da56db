use crate::volume::{LabelVolume, Volume};

use super::mask::{BinaryMask, Connectivity};

/// Connected-component labelling of a mask.
///
/// `labels[i]` is 0 outside the mask, otherwise the 1-based component
/// number. Components are numbered by decreasing size; equal sizes are
/// ordered by the smallest linear index they contain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Components {
    pub labels: Vec<u32>,
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// Mask of the component with the given 1-based number.
    pub fn mask_of(&self, dims: [usize; 3], component: u32) -> BinaryMask {
        BinaryMask::new(dims, self.labels.iter().map(|&c| c == component).collect())
            .expect("component labels match dims")
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let ra = find(parent, a);
    let rb = find(parent, b);
    if ra != rb {
        // the smaller index becomes the root so roots are first voxels
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// Two-pass union-find labelling over the backward half of the
/// neighbourhood.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Components {
    let [nz, ny, nx] = mask.dims();
    let backward: Vec<[isize; 3]> = connectivity
        .offsets()
        .into_iter()
        .filter(|&[dz, dy, dx]| (dz * ny as isize + dy) * nx as isize + dx < 0)
        .collect();

    let n = mask.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = (z * ny + y) * nx + x;
                if !mask.get(i) {
                    continue;
                }
                for &[dz, dy, dx] in &backward {
                    let (zz, yy, xx) = (z as isize + dz, y as isize + dy, x as isize + dx);
                    if zz < 0 || yy < 0 || xx < 0 || yy >= ny as isize || xx >= nx as isize {
                        continue;
                    }
                    let j = (zz as usize * ny + yy as usize) * nx + xx as usize;
                    if mask.get(j) {
                        union(&mut parent, i, j);
                    }
                }
            }
        }
    }

    // roots are the smallest index of their component, visited in order
    let mut root_slot = vec![u32::MAX; n];
    let mut sizes: Vec<usize> = Vec::new();
    let mut firsts: Vec<usize> = Vec::new();
    let mut provisional = vec![0u32; n];
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        if !mask.get(i) {
            continue;
        }
        let r = find(&mut parent, i);
        if root_slot[r] == u32::MAX {
            root_slot[r] = sizes.len() as u32;
            sizes.push(0);
            firsts.push(r);
        }
        let slot = root_slot[r];
        sizes[slot as usize] += 1;
        provisional[i] = slot + 1;
    }

    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(firsts[a].cmp(&firsts[b])));
    let mut rank = vec![0u32; sizes.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new as u32 + 1;
    }
    let labels = provisional
        .into_iter()
        .map(|p| if p == 0 { 0 } else { rank[p as usize - 1] })
        .collect();
    let sizes = order.iter().map(|&o| sizes[o]).collect();
    Components { labels, sizes }
}

/// For each ID in `ids`, clears every voxel of that ID outside its largest
/// connected component.
pub fn largest_component_cleanup(
    labels: &LabelVolume,
    ids: &[u8],
    connectivity: Connectivity,
) -> LabelVolume {
    let mut data = labels.data().to_vec();
    for &id in ids {
        if id == 0 {
            continue;
        }
        let mask = BinaryMask::from_label(labels, id);
        let comps = connected_components(&mask, connectivity);
        if comps.len() <= 1 {
            continue;
        }
        for (i, &c) in comps.labels.iter().enumerate() {
            if c > 1 {
                data[i] = 0;
            }
        }
    }
    labels.rebuild(labels.geometry().clone(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::LabelSchema;
    use crate::volume::Geometry;

    #[test]
    fn empty_mask_has_no_components() {
        let c = connected_components(&BinaryMask::empty([3, 3, 3]), Connectivity::Face6);
        assert!(c.is_empty());
        assert!(c.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn opposite_corners() {
        let mut m = BinaryMask::empty([3, 3, 3]);
        m.set(0, true);
        m.set(26, true);
        let c = connected_components(&m, Connectivity::Face6);
        assert_eq!(c.sizes, vec![1, 1]);
        assert_eq!(c.labels[0], 1);
        assert_eq!(c.labels[26], 2);
    }

    #[test]
    fn diagonal_depends_on_connectivity() {
        let mut m = BinaryMask::empty([2, 2, 2]);
        m.set(0, true);
        m.set(7, true);
        assert_eq!(connected_components(&m, Connectivity::Face6).len(), 2);
        assert_eq!(connected_components(&m, Connectivity::Edge18).len(), 2);
        assert_eq!(connected_components(&m, Connectivity::Vertex26).len(), 1);
    }

    #[test]
    fn ordered_by_size() {
        // a 1-voxel blob first in scan order, then a 3-voxel bar
        let mut m = BinaryMask::empty([1, 1, 6]);
        for i in [0, 2, 3, 4] {
            m.set(i, true);
        }
        let c = connected_components(&m, Connectivity::Face6);
        assert_eq!(c.sizes, vec![3, 1]);
        assert_eq!(c.labels, vec![2, 0, 1, 1, 1, 0]);
    }

    #[test]
    fn cleanup_drops_small_piece() {
        let g = Geometry::isotropic([1, 1, 8], 1.0).unwrap();
        let lab = LabelVolume::new(g, LabelSchema::Six, vec![1, 1, 1, 0, 1, 2, 0, 2]).unwrap();
        let out = largest_component_cleanup(&lab, &[1], Connectivity::Vertex26);
        assert_eq!(out.data(), &[1, 1, 1, 0, 0, 2, 0, 2]);
        let out = largest_component_cleanup(&lab, &[1, 2], Connectivity::Vertex26);
        assert_eq!(out.data(), &[1, 1, 1, 0, 0, 2, 0, 0]);
    }
}
