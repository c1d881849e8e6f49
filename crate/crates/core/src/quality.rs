//! Voxel-count data quality indicators over a K x K x K box partition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{BoundingBox, PointCloud};

/// Voxels per box axis, `K` in `1..=4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PartitionResolution(u8);

impl PartitionResolution {
    pub const MAX: u8 = 4;

    pub fn new(k: u8) -> Result<Self> {
        if (1..=Self::MAX).contains(&k) {
            Ok(Self(k))
        } else {
            Err(Error::param("K", format!("must be in 1..=4, got {k}")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Number of voxels, `K^3`.
    pub fn cells(self) -> usize {
        let k = self.0 as usize;
        k * k * k
    }
}

impl Default for PartitionResolution {
    fn default() -> Self {
        Self(3)
    }
}

impl TryFrom<u8> for PartitionResolution {
    type Error = Error;
    fn try_from(k: u8) -> Result<Self> {
        Self::new(k)
    }
}

impl From<PartitionResolution> for u8 {
    fn from(k: PartitionResolution) -> u8 {
        k.0
    }
}

/// Per-voxel point counts, indexed `ix + K*iy + K^2*iz`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QualityIndicator {
    k: PartitionResolution,
    counts: Vec<u32>,
}

impl QualityIndicator {
    pub fn zeros(k: PartitionResolution) -> Self {
        Self {
            k,
            counts: vec![0; k.cells()],
        }
    }

    pub fn from_counts(k: PartitionResolution, counts: Vec<u32>) -> Result<Self> {
        if counts.len() != k.cells() {
            return Err(Error::DimensionMismatch {
                expected: k.cells(),
                got: counts.len(),
            });
        }
        Ok(Self { k, counts })
    }

    pub fn resolution(&self) -> PartitionResolution {
        self.k
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Total number of points, `|D|`.
    pub fn point_count(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Adds another indicator of the same resolution in place.
    pub fn accumulate(&mut self, other: &QualityIndicator) -> Result<()> {
        if other.k != self.k {
            return Err(Error::ResolutionMismatch {
                expected: self.k.get(),
                got: other.k.get(),
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

/// Voxel index of a coordinate along one axis. The upper face is clamped
/// into the last voxel.
fn axis_cell(coord: f64, lo: f64, length: f64, k: usize) -> usize {
    let raw = ((coord - lo) / (length / k as f64)).floor();
    if raw <= 0.0 {
        0
    } else {
        (raw as usize).min(k - 1)
    }
}

pub fn compute_indicator(
    points: &PointCloud,
    bbox: &BoundingBox,
    k: PartitionResolution,
) -> Result<QualityIndicator> {
    let kk = k.get() as usize;
    let lo = bbox.min_corner();
    let len = bbox.lengths();
    let mut out = QualityIndicator::zeros(k);
    for p in &points.points {
        if !bbox.contains(p) {
            return Err(Error::PointOutsideBox {
                x: p.x,
                y: p.y,
                z: p.z,
            });
        }
        let ix = axis_cell(p.x, lo.x, len[0], kk);
        let iy = axis_cell(p.y, lo.y, len[1], kk);
        let iz = axis_cell(p.z, lo.z, len[2], kk);
        out.counts[ix + kk * iy + kk * kk * iz] += 1;
    }
    Ok(out)
}

/// Sum of the indicators of the selected vehicles. Point sets from distinct
/// sensors are disjoint, so the sum equals the indicator of their union.
pub fn fuse_indicators(
    selection: &[bool],
    indicators: &[QualityIndicator],
) -> Result<QualityIndicator> {
    if selection.len() != indicators.len() {
        return Err(Error::DimensionMismatch {
            expected: indicators.len(),
            got: selection.len(),
        });
    }
    let first = indicators.first().ok_or(Error::EmptyData)?;
    let mut out = QualityIndicator::zeros(first.k);
    for (ind, &selected) in indicators.iter().zip(selection) {
        if ind.k != first.k {
            return Err(Error::ResolutionMismatch {
                expected: first.k.get(),
                got: ind.k.get(),
            });
        }
        if selected {
            out.accumulate(ind)?;
        }
    }
    Ok(out)
}

pub fn point_count(indicator: &QualityIndicator) -> u64 {
    indicator.point_count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Point3;

    fn k(v: u8) -> PartitionResolution {
        PartitionResolution::new(v).unwrap()
    }

    fn cube2() -> BoundingBox {
        BoundingBox::new(Point3::new(0.0, 0.0, 0.0), [2.0, 2.0, 2.0]).unwrap()
    }

    #[test]
    fn empty_set_gives_zero_vector() {
        let z = compute_indicator(&PointCloud::default(), &cube2(), k(2)).unwrap();
        assert_eq!(z.counts(), &[0; 8]);
    }

    #[test]
    fn voxel_arithmetic() {
        let pc = PointCloud::new(vec![Point3::new(-0.5, -0.5, -0.5)]);
        let z = compute_indicator(&pc, &cube2(), k(2)).unwrap();
        assert_eq!(z.counts(), &[1, 0, 0, 0, 0, 0, 0, 0]);

        let pc = PointCloud::new(vec![Point3::new(1.0, 1.0, 1.0)]);
        let z = compute_indicator(&pc, &cube2(), k(2)).unwrap();
        assert_eq!(z.counts()[7], 1);
        assert_eq!(z.point_count(), 1);

        let pc = PointCloud::new(vec![Point3::new(0.5, -0.5, 0.5)]);
        let z = compute_indicator(&pc, &cube2(), k(2)).unwrap();
        assert_eq!(z.counts()[1 + 4], 1);
    }

    #[test]
    fn outside_point_rejected() {
        let pc = PointCloud::new(vec![Point3::new(1.5, 0.0, 0.0)]);
        assert!(matches!(
            compute_indicator(&pc, &cube2(), k(2)),
            Err(Error::PointOutsideBox { .. })
        ));
    }

    #[test]
    fn fusion_examples() {
        let z0 = QualityIndicator::from_counts(k(1), vec![1]).unwrap();
        let z1 = QualityIndicator::from_counts(k(1), vec![5]).unwrap();
        let f = fuse_indicators(&[true, false], &[z0.clone(), z1.clone()]).unwrap();
        assert_eq!(f.counts(), &[1]);
        let f = fuse_indicators(&[false, false], &[z0.clone(), z1.clone()]).unwrap();
        assert_eq!(f.counts(), &[0]);

        let mut a = vec![0; 8];
        a[0] = 1;
        a[1] = 2;
        let mut b = vec![0; 8];
        b[0] = 3;
        let za = QualityIndicator::from_counts(k(2), a).unwrap();
        let zb = QualityIndicator::from_counts(k(2), b).unwrap();
        let f = fuse_indicators(&[true, true], &[za, zb]).unwrap();
        assert_eq!(&f.counts()[..2], &[4, 2]);
        assert_eq!(point_count(&f), 6);
    }

    #[test]
    fn fusion_rejects_mixed_resolution() {
        let z0 = QualityIndicator::zeros(k(1));
        let z1 = QualityIndicator::zeros(k(2));
        assert!(matches!(
            fuse_indicators(&[true, true], &[z0, z1]),
            Err(Error::ResolutionMismatch { .. })
        ));
    }

    #[test]
    fn resolution_range() {
        assert!(PartitionResolution::new(0).is_err());
        assert!(PartitionResolution::new(5).is_err());
        assert_eq!(PartitionResolution::default().get(), 3);
        assert_eq!(k(4).cells(), 64);
    }
}
