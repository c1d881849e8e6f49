//! Closed-form ground-truth accuracy used to label training data.
//!
//! `a = 1 - exp(-lambda * sum_k min(Z_k, z_sat) / (area / s0))` with `Z`
//! taken at the oracle's own partition resolution. The per-voxel cap rewards
//! spatial spread; the area normalization makes large objects need more points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quality::{compute_indicator, PartitionResolution, QualityIndicator};
use crate::scene::{BoundingBox, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleParams {
    pub k_oracle: PartitionResolution,
    pub lambda: f64,
    pub z_sat: f64,
    /// Reference surface area in square meters.
    pub s0: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            k_oracle: PartitionResolution::new(4).expect("4 is a valid resolution"),
            lambda: 0.15,
            z_sat: 40.0,
            s0: 25.0,
        }
    }
}

impl OracleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::param("oracle.lambda", "must be positive"));
        }
        if !(self.z_sat >= 1.0) {
            return Err(Error::param("oracle.z_sat", "must be at least 1"));
        }
        if !(self.s0 > 0.0) {
            return Err(Error::param("oracle.s0", "must be positive"));
        }
        Ok(())
    }
}

pub fn oracle_accuracy(points: &PointCloud, bbox: &BoundingBox, params: &OracleParams) -> Result<f64> {
    let z = compute_indicator(points, bbox, params.k_oracle)?;
    oracle_from_indicator(&z, bbox, params)
}

/// Oracle accuracy from counts already binned at `params.k_oracle`.
pub fn oracle_from_indicator(
    z: &QualityIndicator,
    bbox: &BoundingBox,
    params: &OracleParams,
) -> Result<f64> {
    if z.resolution() != params.k_oracle {
        return Err(Error::ResolutionMismatch {
            expected: params.k_oracle.get(),
            got: z.resolution().get(),
        });
    }
    let capped: f64 = z.counts().iter().map(|&c| (c as f64).min(params.z_sat)).sum();
    let scale = bbox.surface_area() / params.s0;
    Ok(1.0 - (-params.lambda * capped / scale).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Point3;

    fn truck() -> BoundingBox {
        BoundingBox::new(Point3::new(0.0, 0.0, 1.5), [8.0, 2.5, 3.0]).unwrap()
    }

    #[test]
    fn no_points_no_accuracy() {
        let a = oracle_accuracy(&PointCloud::default(), &truck(), &OracleParams::default()).unwrap();
        assert_eq!(a, 0.0);
    }

    #[test]
    fn concentrated_points_saturate() {
        let p = OracleParams::default();
        let b = truck();
        let corner = b.min_corner();
        let n = (10.0 * p.z_sat) as usize;
        let pc = PointCloud::new(vec![corner; n]);
        let a = oracle_accuracy(&pc, &b, &p).unwrap();
        // capped at z_sat: 1 - exp(-0.15 * 40 / (103/25))
        let expected = 1.0 - (-0.15_f64 * 40.0 / (103.0 / 25.0)).exp();
        assert!((a - expected).abs() < 1e-12, "{a} vs {expected}");
        let pc40 = PointCloud::new(vec![corner; 40]);
        assert_eq!(oracle_accuracy(&pc40, &b, &p).unwrap(), a);
    }

    #[test]
    fn spread_beats_concentrated() {
        let p = OracleParams::default();
        let b = truck();
        let lo = b.min_corner();
        let l = b.lengths();
        let k = 4;
        let per_voxel = 5;
        let mut spread = Vec::new();
        for iz in 0..k {
            for iy in 0..k {
                for ix in 0..k {
                    let c = Point3::new(
                        lo.x + (ix as f64 + 0.5) * l[0] / k as f64,
                        lo.y + (iy as f64 + 0.5) * l[1] / k as f64,
                        lo.z + (iz as f64 + 0.5) * l[2] / k as f64,
                    );
                    spread.extend(std::iter::repeat_n(c, per_voxel));
                }
            }
        }
        let concentrated = vec![spread[0]; spread.len()];
        let a_spread = oracle_accuracy(&PointCloud::new(spread), &b, &p).unwrap();
        let a_conc = oracle_accuracy(&PointCloud::new(concentrated), &b, &p).unwrap();
        assert!(a_spread >= a_conc);
        assert!(a_spread > 0.99 && a_conc < 0.8);
    }
}
