use std::ops::{Index, IndexMut};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Weight,
    Bias,
}

/// A contiguous run of parameters belonging to one layer and kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub layer: usize,
    pub kind: ParamKind,
    pub offset: usize,
    pub len: usize,
}

/// Segment map of a flat parameter vector.
///
/// Segments are contiguous, non-overlapping and cover `0..len()` exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    segments: Vec<Segment>,
    len: usize,
}

impl Layout {
    /// Builds a layout from `(layer, kind, len)` triples laid out back to back.
    pub fn from_parts(parts: &[(usize, ParamKind, usize)]) -> Self {
        let mut offset = 0;
        let segments = parts
            .iter()
            .map(|&(layer, kind, len)| {
                let s = Segment {
                    layer,
                    kind,
                    offset,
                    len,
                };
                offset += len;
                s
            })
            .collect();
        Layout {
            segments,
            len: offset,
        }
    }

    /// Validates explicit segments.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let mut expected = 0;
        for s in &segments {
            if s.offset != expected {
                return Err(Error::config(format!(
                    "layout segment at offset {} does not start at {}",
                    s.offset, expected
                )));
            }
            expected += s.len;
        }
        Ok(Layout {
            segments,
            len: expected,
        })
    }

    /// A single weight segment of `n` parameters in layer 0.
    pub fn flat(n: usize) -> Self {
        Layout::from_parts(&[(0, ParamKind::Weight, n)])
    }

    /// Fully-connected layout: per layer, an `out x in` row-major weight block then `out` biases.
    pub fn for_network(layer_sizes: &[usize]) -> Self {
        let parts: Vec<_> = layer_sizes
            .windows(2)
            .enumerate()
            .flat_map(|(l, w)| {
                [
                    (l, ParamKind::Weight, w[0] * w[1]),
                    (l, ParamKind::Bias, w[1]),
                ]
            })
            .collect();
        Layout::from_parts(&parts)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_layers(&self) -> usize {
        self.segments.iter().map(|s| s.layer + 1).max().unwrap_or(0)
    }
}

/// Flat parameter vector together with its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Arc<Layout>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, layout: Arc<Layout>) -> Result<Self> {
        check_len("ParamVector::new", layout.len(), values.len())?;
        Ok(ParamVector { values, layout })
    }

    pub fn zeros(layout: Arc<Layout>) -> Self {
        ParamVector {
            values: vec![0.0; layout.len()],
            layout,
        }
    }

    /// A vector on a single flat weight segment.
    pub fn flat(values: Vec<f64>) -> Self {
        let layout = Arc::new(Layout::flat(values.len()));
        ParamVector { values, layout }
    }

    /// Same layout as `self`, different values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        ParamVector::new(values, self.layout.clone())
    }

    pub fn zeros_like(&self) -> Self {
        ParamVector::zeros(self.layout.clone())
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn segment(&self, s: &Segment) -> &[f64] {
        &self.values[s.offset..s.offset + s.len]
    }

    pub fn segment_mut(&mut self, s: &Segment) -> &mut [f64] {
        &mut self.values[s.offset..s.offset + s.len]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    pub fn check_same_layout(&self, other: &ParamVector, context: &'static str) -> Result<()> {
        check_len(context, self.len(), other.len())?;
        if !Arc::ptr_eq(&self.layout, &other.layout) && self.layout != other.layout {
            return Err(Error::Dimension {
                context,
                expected: self.layout.segments().len(),
                actual: other.layout.segments().len(),
            });
        }
        Ok(())
    }

    /// `self + scale * dir`
    pub fn axpy(&self, scale: f64, dir: &ParamVector) -> Result<ParamVector> {
        self.check_same_layout(dir, "ParamVector::axpy")?;
        let values = self
            .values
            .iter()
            .zip(&dir.values)
            .map(|(a, b)| a + scale * b)
            .collect();
        Ok(ParamVector {
            values,
            layout: self.layout.clone(),
        })
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}
