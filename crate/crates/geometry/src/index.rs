use rstar::primitives::{GeomWithData, Rectangle};
use rstar::{RTree, AABB};

use crate::types::Bbox;

type Entry = GeomWithData<Rectangle<[f64; 2]>, usize>;

/// Immutable R-tree over bounding boxes, bulk loaded.
pub struct SpatialIndex {
    tree: RTree<Entry>,
}

impl SpatialIndex {
    pub fn build(items: impl IntoIterator<Item = (usize, Bbox)>) -> Self {
        let entries = items
            .into_iter()
            .filter(|(_, b)| !b.is_empty())
            .map(|(id, b)| GeomWithData::new(Rectangle::from_corners([b.min_x, b.min_y], [b.max_x, b.max_y]), id))
            .collect();
        Self { tree: RTree::bulk_load(entries) }
    }

    pub fn len(&self) -> usize {
        self.tree.size()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.size() == 0
    }

    /// Ids whose box intersects `probe` (boundary contact included), sorted.
    pub fn query(&self, probe: &Bbox) -> Vec<usize> {
        if probe.is_empty() {
            return Vec::new();
        }
        let env = AABB::from_corners([probe.min_x, probe.min_y], [probe.max_x, probe.max_y]);
        let mut ids: Vec<usize> = self.tree.locate_in_envelope_intersecting(&env).map(|e| e.data).collect();
        ids.sort_unstable();
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_index() {
        let idx = SpatialIndex::build(Vec::new());
        assert!(idx.is_empty());
        assert!(idx.query(&Bbox::new(0.0, 0.0, 1.0, 1.0)).is_empty());
    }

    #[test]
    fn single_item_found_by_own_box() {
        let b = Bbox::new(2.0, 3.0, 4.0, 5.0);
        let idx = SpatialIndex::build([(7, b)]);
        assert_eq!(idx.query(&b), vec![7]);
        assert_eq!(idx.query(&Bbox::new(4.0, 5.0, 6.0, 6.0)), vec![7], "corner contact");
        assert!(idx.query(&Bbox::new(4.1, 5.1, 6.0, 6.0)).is_empty());
    }
}
