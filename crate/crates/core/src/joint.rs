//! Row-major indexing of joint types and joint actions.
//!
//! Player 0 is the most significant component, so the flat order is the
//! lexicographic order of the component tuples.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpbeError};

/// A product space `×_i {0, .., sizes[i] - 1}` with a row-major flattening.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointIndex {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl JointIndex {
    pub fn new(sizes: &[usize]) -> Self {
        let mut strides = vec![1; sizes.len()];
        for k in (0..sizes.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * sizes[k + 1];
        }
        let total = sizes.iter().product();
        Self {
            sizes: sizes.to_vec(),
            strides,
            total,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of joint elements.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn flatten(&self, components: &[usize]) -> Result<usize> {
        if components.len() != self.sizes.len() {
            return Err(SpbeError::Dimension(format!(
                "expected {} components, got {}",
                self.sizes.len(),
                components.len()
            )));
        }
        let mut flat = 0;
        for (k, (&c, &s)) in components.iter().zip(&self.sizes).enumerate() {
            if c >= s {
                return Err(SpbeError::OutOfRange {
                    component: k,
                    index: c,
                    size: s,
                });
            }
            flat += c * self.strides[k];
        }
        Ok(flat)
    }

    pub fn unflatten(&self, flat: usize) -> Result<Vec<usize>> {
        if flat >= self.total {
            return Err(SpbeError::OutOfRange {
                component: 0,
                index: flat,
                size: self.total,
            });
        }
        Ok((0..self.sizes.len()).map(|k| self.component(flat, k)).collect())
    }

    /// Component `k` of a flat index. No range check on `flat`.
    #[inline]
    pub fn component(&self, flat: usize, k: usize) -> usize {
        (flat / self.strides[k]) % self.sizes[k]
    }

    /// Replace component `k` of `flat` with `value`.
    #[inline]
    pub fn with_component(&self, flat: usize, k: usize, value: usize) -> usize {
        flat - self.component(flat, k) * self.strides[k] + value * self.strides[k]
    }
}

/// Free-function form of [`JointIndex::flatten`].
pub fn joint_flatten(components: &[usize], sizes: &[usize]) -> Result<usize> {
    JointIndex::new(sizes).flatten(components)
}

pub fn joint_unflatten(flat: usize, sizes: &[usize]) -> Result<Vec<usize>> {
    JointIndex::new(sizes).unflatten(flat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flatten_examples() {
        assert_eq!(joint_flatten(&[0, 0], &[2, 2]).unwrap(), 0);
        assert_eq!(joint_flatten(&[1, 1], &[2, 2]).unwrap(), 3);
        assert_eq!(joint_flatten(&[1, 0, 2], &[2, 2, 3]).unwrap(), 8);
    }

    #[test]
    fn out_of_range_component() {
        let err = joint_flatten(&[0, 2], &[2, 2]).unwrap_err();
        assert!(matches!(err, SpbeError::OutOfRange { component: 1, .. }));
        assert!(joint_flatten(&[0], &[2, 2]).is_err());
        assert!(joint_unflatten(4, &[2, 2]).is_err());
    }

    #[test]
    fn with_component_replaces() {
        let j = JointIndex::new(&[2, 3]);
        let f = j.flatten(&[1, 2]).unwrap();
        assert_eq!(j.unflatten(j.with_component(f, 1, 0)).unwrap(), vec![1, 0]);
        assert_eq!(j.unflatten(j.with_component(f, 0, 0)).unwrap(), vec![0, 2]);
    }

    proptest! {
        #[test]
        fn round_trip(sizes in prop::collection::vec(1usize..=4, 1..=3), seed in any::<u64>()) {
            let j = JointIndex::new(&sizes);
            let comps: Vec<usize> = sizes.iter().enumerate()
                .map(|(k, &s)| ((seed >> (8 * k)) as usize) % s).collect();
            let f = j.flatten(&comps).unwrap();
            prop_assert!(f < j.len());
            prop_assert_eq!(j.unflatten(f).unwrap(), comps);
        }

        #[test]
        fn flat_order_is_lexicographic(sizes in prop::collection::vec(1usize..=4, 1..=3)) {
            let j = JointIndex::new(&sizes);
            let all: Vec<Vec<usize>> = (0..j.len()).map(|f| j.unflatten(f).unwrap()).collect();
            let mut sorted = all.clone();
            sorted.sort();
            prop_assert_eq!(all, sorted);
        }
    }
}
