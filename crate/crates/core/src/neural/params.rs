//! Flat parameter vector and the named blocks carved out of it.

use ndarray::{ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use super::Topology;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
    /// Included in the L2 penalty.
    pub decay: bool,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Block indices for one recurrent layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LayerBlocks {
    pub w_x: usize,
    pub w_h: usize,
    pub b: usize,
    pub bn: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub blocks: Vec<Block>,
    pub len: usize,
}

impl Layout {
    fn push(&mut self, name: String, rows: usize, cols: usize, decay: bool) -> usize {
        self.blocks.push(Block { name, rows, cols, offset: self.len, decay });
        self.len += rows * cols;
        self.blocks.len() - 1
    }

    /// Layer-major: for each layer the input kernel, recurrent kernel and
    /// bias (columns gate-major), then batch-norm scale and shift; then the
    /// dense head and output layer.
    pub(crate) fn for_topology(t: &Topology) -> (Layout, Vec<LayerBlocks>, [usize; 4]) {
        let mut layout = Layout { blocks: vec![], len: 0 };
        let gu = t.cell.n_gates() * t.units;
        let mut layers = vec![];
        for l in 0..t.n_layers {
            let in_dim = if l == 0 { t.n_series } else { t.units };
            let w_x = layout.push(format!("layer{l}.w_x"), in_dim, gu, true);
            let w_h = layout.push(format!("layer{l}.w_h"), t.units, gu, true);
            let b = layout.push(format!("layer{l}.bias"), 1, gu, false);
            let bn = t.use_batchnorm.then(|| {
                (
                    layout.push(format!("layer{l}.bn_gamma"), 1, t.units, false),
                    layout.push(format!("layer{l}.bn_beta"), 1, t.units, false),
                )
            });
            layers.push(LayerBlocks { w_x, w_h, b, bn });
        }
        let dw = layout.push("dense.w".into(), t.units, t.units, true);
        let db = layout.push("dense.bias".into(), 1, t.units, false);
        let ow = layout.push("output.w".into(), t.units, t.n_outputs(), true);
        let ob = layout.push("output.bias".into(), 1, t.n_outputs(), false);
        (layout, layers, [dw, db, ow, ob])
    }

    pub fn view<'a>(&self, data: &'a [f64], block: usize) -> ArrayView2<'a, f64> {
        let b = &self.blocks[block];
        ArrayView2::from_shape((b.rows, b.cols), &data[b.range()]).expect("block fits layout")
    }

    pub fn view_mut<'a>(&self, data: &'a mut [f64], block: usize) -> ArrayViewMut2<'a, f64> {
        let b = &self.blocks[block];
        ArrayViewMut2::from_shape((b.rows, b.cols), &mut data[b.range()]).expect("block fits layout")
    }

    /// `sum w^2` over decayed blocks.
    pub fn penalty(&self, data: &[f64]) -> f64 {
        self.blocks.iter().filter(|b| b.decay).map(|b| data[b.range()].iter().map(|w| w * w).sum::<f64>()).sum()
    }
}
