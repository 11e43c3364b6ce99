//! Fixed-point force accumulation.
//!
//! Force fields receive contributions from several ranks in whatever order
//! they win the cell lock. Accumulating in 64.64 fixed point makes the sum
//! independent of that order, so runs are bitwise reproducible.

use crate::vec3::Vec3;

const SCALE: f64 = 18_446_744_073_709_551_616.0; // 2^64

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(crate) struct FixedVec3([i128; 3]);

fn quantize(x: f64) -> i128 {
    (x * SCALE).round() as i128
}

impl FixedVec3 {
    pub(crate) const ZERO: FixedVec3 = FixedVec3([0; 3]);

    pub(crate) fn from_vec3(v: Vec3) -> Self {
        Self([quantize(v.x), quantize(v.y), quantize(v.z)])
    }

    pub(crate) fn to_vec3(self) -> Vec3 {
        Vec3::new(
            self.0[0] as f64 / SCALE,
            self.0[1] as f64 / SCALE,
            self.0[2] as f64 / SCALE,
        )
    }

    pub(crate) fn add(&mut self, v: Vec3) {
        let q = Self::from_vec3(v);
        for (a, b) in self.0.iter_mut().zip(q.0) {
            *a += b;
        }
    }

    pub(crate) fn component(self, axis: usize) -> f64 {
        self.0[axis] as f64 / SCALE
    }

    pub(crate) fn set_component(&mut self, axis: usize, value: f64) {
        self.0[axis] = quantize(value);
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn round_trips_dyadic_values_exactly() {
        let v = Vec3::new(1.5, -0.25, 1024.0);
        assert_eq!(FixedVec3::from_vec3(v).to_vec3(), v);
    }

    proptest! {
        #[test]
        fn accumulation_is_order_independent(
            values in proptest::collection::vec(-1e3f64..1e3, 1..40),
            rot in 0usize..40,
        ) {
            let mut forward = FixedVec3::ZERO;
            for &v in &values {
                forward.add(Vec3::new(v, -v, v * 0.5));
            }
            let mut rotated = values.clone();
            let n = rotated.len();
            rotated.rotate_left(rot % n);
            rotated.reverse();
            let mut backward = FixedVec3::ZERO;
            for &v in &rotated {
                backward.add(Vec3::new(v, -v, v * 0.5));
            }
            prop_assert_eq!(forward, backward);
            let exact: f64 = values.iter().sum();
            prop_assert!((forward.to_vec3().x - exact).abs() <= 1e-9 * (1.0 + exact.abs()));
        }
    }
}
