//! Fixed-width histograms of content scores before and after the sigmoid
//! transform.

use std::io::Write;

use crate::error::{Error, Result};
use crate::labelforge::{sigmoid_transform, SigmoidParams};

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` edges from 0 to 1.
    pub edges: Vec<f64>,
    pub raw: Vec<u64>,
    /// Counts of transformed scores; equal to `raw` without a transform.
    pub transformed: Vec<u64>,
}

/// Bin of `score` in `bins` equal-width bins over [0, 1]; 1.0 falls in the
/// last bin.
pub fn bin_index(score: f64, bins: usize) -> usize {
    // comparing against j / bins avoids the rounding of score * bins
    (1..bins)
        .filter(|&j| score >= j as f64 / bins as f64)
        .count()
}

pub fn histogram(
    scores: &[f64],
    bins: usize,
    transform: Option<SigmoidParams>,
) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::Domain("bins must be at least 1".into()));
    }
    let mut raw = vec![0u64; bins];
    let mut transformed = vec![0u64; bins];
    for &s in scores {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("score {s} outside [0,1]")));
        }
        raw[bin_index(s, bins)] += 1;
        let t = match transform {
            Some(p) => sigmoid_transform(s, p)?,
            None => s,
        };
        transformed[bin_index(t, bins)] += 1;
    }
    Ok(Histogram {
        edges: (0..=bins).map(|j| j as f64 / bins as f64).collect(),
        raw,
        transformed,
    })
}

impl Histogram {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin,lower,upper,raw,transformed")?;
        for (b, (r, t)) in self.raw.iter().zip(&self.transformed).enumerate() {
            writeln!(out, "{b},{},{},{r},{t}", self.edges[b], self.edges[b + 1])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_scores_fill_one_bin() {
        let h = histogram(&[0.5; 100], 10, None).unwrap();
        let mut want = vec![0; 10];
        want[5] = 100;
        assert_eq!(h.raw, want);
    }

    #[test]
    fn uniform_grid_is_flat() {
        let scores: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let h = histogram(&scores, 10, None).unwrap();
        assert_eq!(h.raw, vec![100; 10]);
        let mid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert_eq!(histogram(&mid, 10, None).unwrap().raw, vec![100; 10]);
    }

    #[test]
    fn right_shifted_transform_fills_the_lowest_bin() {
        let scores: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let h = histogram(
            &scores,
            10,
            Some(SigmoidParams {
                alpha: 10.0,
                beta: 0.7,
            }),
        )
        .unwrap();
        assert!(h.transformed[0] > h.raw[0], "{:?}", h.transformed);
    }

    #[test]
    fn edges_and_errors() {
        assert_eq!(bin_index(1.0, 10), 9);
        assert_eq!(bin_index(0.0, 10), 0);
        assert_eq!(bin_index(0.3, 1), 0);
        assert!(histogram(&[1.5], 10, None).is_err());
        assert!(histogram(&[0.5], 0, None).is_err());
    }
}
