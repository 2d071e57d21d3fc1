//! Uniform bucket grid over points, used for nearest-neighbor queries on
//! lane-marking samples.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::geom::PointXY;

#[derive(Debug, Clone, PartialEq)]
pub struct PointGrid {
    cell: f64,
    buckets: BTreeMap<(i64, i64), Vec<usize>>,
}

impl PointGrid {
    pub fn build(points: impl IntoIterator<Item = PointXY>, cell: f64) -> PointGrid {
        let mut buckets: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        for (i, p) in points.into_iter().enumerate() {
            buckets.entry(key(p, cell)).or_default().push(i);
        }
        PointGrid { cell, buckets }
    }

    /// Visits every stored index whose cell overlaps the square of half
    /// width `r` around `p`. Callers filter by exact distance.
    pub fn visit_near(&self, p: PointXY, r: f64, mut visit: impl FnMut(usize)) {
        let (x0, y0) = key(PointXY::new(p.x - r, p.y - r), self.cell);
        let (x1, y1) = key(PointXY::new(p.x + r, p.y + r), self.cell);
        for x in x0..=x1 {
            for (_, ids) in self.buckets.range((x, y0)..=(x, y1)) {
                ids.iter().for_each(|&i| visit(i));
            }
        }
    }
}

fn key(p: PointXY, cell: f64) -> (i64, i64) {
    (libm::floor(p.x / cell) as i64, libm::floor(p.y / cell) as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn finds_points_within_radius() {
        let pts = [PointXY::new(0.0, 0.0), PointXY::new(2.5, 0.0), PointXY::new(-7.0, 3.0)];
        let grid = PointGrid::build(pts.iter().copied(), 2.0);
        let mut seen = Vec::new();
        grid.visit_near(PointXY::new(0.5, 0.0), 2.1, |i| seen.push(i));
        seen.sort();
        assert_eq!(seen, vec![0, 1]);
    }
}
