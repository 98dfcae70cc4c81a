//! Periodic parameter grid.
//!
//! Nodes are stored in the order `x_1, ..., x_N` with `x_N ≡ 0`, so that
//! node `i` (zero based) closes segment `i`, which spans `[x_{i-1}, x_i]`.
//! All index arithmetic is modulo `N`.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicMesh {
    /// Unwrapped breakpoints `0 = b_0 < b_1 < ... < b_N = 1`.
    breaks: Vec<f64>,
    nodes: Vec<f64>,
    seg_len: Vec<f64>,
    h_max: f64,
}

impl PeriodicMesh {
    /// Uniform grid `x_j = j/n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidMesh(format!(
                "a closed polygon needs at least 3 nodes, got {n}"
            )));
        }
        let h = 1.0 / n as f64;
        let breaks: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
        let nodes = (1..=n).map(|j| if j == n { 0.0 } else { j as f64 / n as f64 }).collect();
        Ok(Self {
            breaks,
            nodes,
            seg_len: vec![h; n],
            h_max: h,
        })
    }

    /// Grid from explicit segment lengths `h_1, ..., h_N`; they must be
    /// positive and sum to one.
    pub fn from_segment_lengths(lengths: &[f64]) -> Result<Self> {
        let n = lengths.len();
        if n < 3 {
            return Err(Error::InvalidMesh(format!(
                "a closed polygon needs at least 3 nodes, got {n}"
            )));
        }
        if let Some((j, h)) = lengths
            .iter()
            .enumerate()
            .find(|(_, h)| !(h.is_finite() && **h > 0.0))
        {
            return Err(Error::InvalidMesh(format!("segment {j} has length {h}")));
        }
        let total: f64 = lengths.iter().sum();
        if (total - 1.0).abs() > 8.0 * f64::EPSILON * n as f64 {
            return Err(Error::InvalidMesh(format!(
                "segment lengths sum to {total}, expected 1"
            )));
        }
        let mut breaks = Vec::with_capacity(n + 1);
        breaks.push(0.0);
        let mut acc = 0.0;
        for h in &lengths[..n - 1] {
            acc += h;
            breaks.push(acc);
        }
        breaks.push(1.0);
        let nodes = breaks[1..n].iter().copied().chain(std::iter::once(0.0)).collect();
        let h_max = lengths.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            breaks,
            nodes,
            seg_len: lengths.to_vec(),
            h_max,
        })
    }

    pub fn len(&self) -> usize {
        self.seg_len.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seg_len.is_empty()
    }

    /// Node coordinates reduced to `[0, 1)`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn segment_lengths(&self) -> &[f64] {
        &self.seg_len
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// Reduces any (possibly negative) index modulo `N`.
    #[inline]
    pub fn wrap(&self, j: isize) -> usize {
        j.rem_euclid(self.len() as isize) as usize
    }

    #[inline]
    pub fn node(&self, j: isize) -> f64 {
        self.nodes[self.wrap(j)]
    }

    #[inline]
    pub fn segment_length(&self, j: isize) -> f64 {
        self.seg_len[self.wrap(j)]
    }

    /// Segment `j` as the unwrapped interval `[x_{j-1}, x_j] ⊂ [0, 1]`.
    #[inline]
    pub fn segment(&self, j: usize) -> (f64, f64) {
        (self.breaks[j], self.breaks[j + 1])
    }

    /// Grid regularity: `h_j >= cbar h` and `|h_{j+1} - h_j| <= cbar h^2`.
    pub fn check_regularity(&self, cbar: f64) -> bool {
        let h = self.h_max;
        let n = self.len() as isize;
        (0..n).all(|j| {
            let hj = self.segment_length(j);
            let hn = self.segment_length(j + 1);
            hj >= cbar * h && (hn - hj).abs() <= cbar * h * h
        })
    }

    /// Nodal values `v(x_j)`; the interpolant `I_h v` is determined by these.
    pub fn interpolate<T, F: Fn(f64) -> T>(&self, f: F) -> Vec<T> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_four() {
        let m = PeriodicMesh::uniform(4).unwrap();
        assert_eq!(m.nodes(), &[0.25, 0.5, 0.75, 0.0]);
        assert!(m.segment_lengths().iter().all(|&h| h == 0.25));
        assert_eq!(m.h_max(), 0.25);
    }

    #[test]
    fn uniform_three_sums_to_one() {
        let m = PeriodicMesh::uniform(3).unwrap();
        let s: f64 = m.segment_lengths().iter().sum();
        assert!((s - 1.0).abs() < 8.0 * f64::EPSILON * 3.0);
        assert!(m.segment_lengths().iter().all(|&h| (h - 1.0 / 3.0).abs() < 1e-16));
    }

    #[test]
    fn rejects_two_nodes() {
        assert!(matches!(PeriodicMesh::uniform(2), Err(Error::InvalidMesh(_))));
        assert!(PeriodicMesh::from_segment_lengths(&[0.5, 0.5]).is_err());
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(PeriodicMesh::from_segment_lengths(&[0.5, 0.6, 0.1]).is_err());
        assert!(PeriodicMesh::from_segment_lengths(&[0.5, 0.5, 0.0]).is_err());
        assert!(PeriodicMesh::from_segment_lengths(&[1.5, -0.25, -0.25]).is_err());
    }

    #[test]
    fn regularity() {
        assert!(PeriodicMesh::uniform(10).unwrap().check_regularity(1.0));
        assert!(PeriodicMesh::uniform(100).unwrap().check_regularity(0.5));
        let m = PeriodicMesh::from_segment_lengths(&[0.5, 0.25, 0.25]).unwrap();
        assert!(!m.check_regularity(0.9));
        assert_eq!(m.nodes(), &[0.5, 0.75, 0.0]);
    }

    #[test]
    fn interpolation() {
        let m4 = PeriodicMesh::uniform(4).unwrap();
        assert!(m4.interpolate(|_| 1.0).iter().all(|&v| v == 1.0));
        let c = m4.interpolate(|x| (2.0 * std::f64::consts::PI * x).cos());
        let expected = [0.0, -1.0, 0.0, 1.0];
        for (a, b) in c.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let m5 = PeriodicMesh::uniform(5).unwrap();
        assert_eq!(m5.interpolate(|x| x), vec![0.2, 0.4, 0.6, 0.8, 0.0]);
    }

    #[test]
    fn segments_tile_unit_interval() {
        let m = PeriodicMesh::from_segment_lengths(&[0.2, 0.3, 0.1, 0.4]).unwrap();
        let mut prev = 0.0;
        for j in 0..m.len() {
            let (a, b) = m.segment(j);
            assert_eq!(a, prev);
            assert!((b - a - m.segment_lengths()[j]).abs() < 1e-15);
            prev = b;
        }
        assert_eq!(prev, 1.0);
    }

    #[test]
    fn periodic_indexing() {
        let m = PeriodicMesh::from_segment_lengths(&[0.2, 0.3, 0.1, 0.4]).unwrap();
        for j in -8isize..8 {
            assert_eq!(m.node(j), m.node(j + 4));
            assert_eq!(m.segment_length(j), m.segment_length(j - 4));
        }
    }
}
