use std::ops::Range;

use nalgebra::Point3;

use super::{RenderError, MAX_LAYERS};

/// `H x W x L x 3` camera-space intersection coordinates (x right, y down,
/// z forward). Entries without an intersection hold NaN; the stopping index
/// or mask decides validity.
#[derive(Debug, Clone, PartialEq)]
pub struct LariMap {
    height: usize,
    width: usize,
    layers: usize,
    data: Vec<f64>,
}

impl LariMap {
    /// All entries NaN.
    pub fn new(height: usize, width: usize, layers: usize) -> LariMap {
        LariMap {
            height,
            width,
            layers,
            data: vec![f64::NAN; height * width * layers * 3],
        }
    }

    /// Wraps `(h, w, l, xyz)` row-major data.
    pub fn from_raw(
        height: usize,
        width: usize,
        layers: usize,
        data: Vec<f64>,
    ) -> Result<LariMap, RenderError> {
        if data.len() != height * width * layers * 3 {
            return Err(RenderError::ShapeMismatch(format!(
                "{} values for a {height}x{width}x{layers}x3 map",
                data.len()
            )));
        }
        Ok(LariMap {
            height,
            width,
            layers,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn offset(&self, row: usize, col: usize, layer: usize) -> usize {
        ((row * self.width + col) * self.layers + layer) * 3
    }

    pub fn get(&self, row: usize, col: usize, layer: usize) -> Point3<f64> {
        let o = self.offset(row, col, layer);
        Point3::new(self.data[o], self.data[o + 1], self.data[o + 2])
    }

    pub fn set(&mut self, row: usize, col: usize, layer: usize, p: &Point3<f64>) {
        let o = self.offset(row, col, layer);
        self.data[o..o + 3].copy_from_slice(p.coords.as_slice());
    }

    /// Every coordinate multiplied by `factor` (NaN stays NaN).
    pub fn scaled(&self, factor: f64) -> LariMap {
        LariMap {
            data: self.data.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// Per-pixel ray stopping index: the number of valid layers, 0 meaning the
/// ray hits nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoppingIndexMap {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl StoppingIndexMap {
    pub fn new(height: usize, width: usize) -> StoppingIndexMap {
        StoppingIndexMap {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    pub fn from_raw(height: usize, width: usize, data: Vec<u8>) -> Result<Self, RenderError> {
        if data.len() != height * width {
            return Err(RenderError::ShapeMismatch(format!(
                "{} indices for a {height}x{width} map",
                data.len()
            )));
        }
        Ok(StoppingIndexMap {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.data[row * self.width + col] = value;
    }

    pub fn max(&self) -> u8 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    /// Fails when any index exceeds `layers`.
    pub fn check_layers(&self, layers: usize) -> Result<(), RenderError> {
        match self.data.iter().find(|&&c| c as usize > layers) {
            Some(&value) => Err(RenderError::IndexOutOfRange { value, layers }),
            None => Ok(()),
        }
    }
}

/// `H x W x L` validity mask whose true entries form a prefix of each
/// pixel's layer axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntersectionMask {
    height: usize,
    width: usize,
    layers: usize,
    data: Vec<bool>,
}

impl IntersectionMask {
    /// Validates the prefix property of `(h, w, l)` row-major booleans.
    pub fn from_raw(
        height: usize,
        width: usize,
        layers: usize,
        data: Vec<bool>,
    ) -> Result<Self, RenderError> {
        if data.len() != height * width * layers {
            return Err(RenderError::ShapeMismatch(format!(
                "{} entries for a {height}x{width}x{layers} mask",
                data.len()
            )));
        }
        for (pixel, row) in data.chunks(layers.max(1)).enumerate() {
            if row.windows(2).any(|w| !w[0] && w[1]) {
                return Err(RenderError::NotPrefix {
                    row: pixel / width,
                    col: pixel % width,
                });
            }
        }
        Ok(IntersectionMask {
            height,
            width,
            layers,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize, layer: usize) -> bool {
        self.data[(row * self.width + col) * self.layers + layer]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Recovers the stopping index as the per-pixel prefix length.
    pub fn to_index(&self) -> StoppingIndexMap {
        let data = self
            .data
            .chunks(self.layers.max(1))
            .map(|row| row.iter().take_while(|&&b| b).count() as u8)
            .collect();
        StoppingIndexMap {
            height: self.height,
            width: self.width,
            data,
        }
    }
}

/// `H x W x (L + 1)` ray stopping logits.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingLogits {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl StoppingLogits {
    pub fn from_raw(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, RenderError> {
        if !(2..=MAX_LAYERS + 1).contains(&channels) {
            return Err(RenderError::InvalidLayerCount(channels.saturating_sub(1)));
        }
        if data.len() != height * width * channels {
            return Err(RenderError::ShapeMismatch(format!(
                "{} logits for a {height}x{width}x{channels} tensor",
                data.len()
            )));
        }
        Ok(StoppingLogits {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Layer count `L`; the tensor has `L + 1` channels.
    pub fn layers(&self) -> usize {
        self.channels - 1
    }

    pub fn pixels(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.channels)
    }

    pub fn check_finite(&self) -> Result<(), RenderError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(RenderError::NonFiniteLogits(i)),
            None => Ok(()),
        }
    }
}

/// `M(h, w, l) = 1` iff `l + 1 <= C(h, w)`.
pub fn mask_from_index(
    index: &StoppingIndexMap,
    layers: usize,
) -> Result<IntersectionMask, RenderError> {
    index.check_layers(layers)?;
    let mut data = Vec::with_capacity(index.data.len() * layers);
    for &c in &index.data {
        data.extend((0..layers).map(|l| l < c as usize));
    }
    Ok(IntersectionMask {
        height: index.height,
        width: index.width,
        layers,
        data,
    })
}

fn check_shapes(map: &LariMap, mask: &IntersectionMask) -> Result<(), RenderError> {
    if (map.height, map.width, map.layers) != (mask.height, mask.width, mask.layers) {
        return Err(RenderError::ShapeMismatch(format!(
            "map {}x{}x{} vs mask {}x{}x{}",
            map.height, map.width, map.layers, mask.height, mask.width, mask.layers
        )));
    }
    Ok(())
}

/// Points of `map` where `mask` is set, in `(h, w, l)` row-major order.
pub fn select_points(
    map: &LariMap,
    mask: &IntersectionMask,
) -> Result<Vec<Point3<f64>>, RenderError> {
    select_points_in_layers(map, mask, 0..map.layers).map(|v| v.into_iter().map(|(p, _)| p).collect())
}

/// Like [`select_points`] restricted to a layer range, returning each point's
/// layer alongside it.
pub fn select_points_in_layers(
    map: &LariMap,
    mask: &IntersectionMask,
    layers: Range<usize>,
) -> Result<Vec<(Point3<f64>, usize)>, RenderError> {
    check_shapes(map, mask)?;
    let mut out = Vec::new();
    for row in 0..map.height {
        for col in 0..map.width {
            for l in layers.clone().filter(|&l| l < map.layers) {
                if mask.get(row, col, l) {
                    out.push((map.get(row, col, l), l));
                }
            }
        }
    }
    Ok(out)
}

/// Per-pixel argmax over the `L + 1` channels; ties go to the smaller index.
/// Softmax is monotone, so this equals the argmax of the softmax.
pub fn index_from_logits(logits: &StoppingLogits) -> Result<StoppingIndexMap, RenderError> {
    logits.check_finite()?;
    let data = logits
        .pixels()
        .map(|px| {
            let mut best = 0;
            for (i, &v) in px.iter().enumerate().skip(1) {
                if v > px[best] {
                    best = i;
                }
            }
            best as u8
        })
        .collect();
    Ok(StoppingIndexMap {
        height: logits.height,
        width: logits.width,
        data,
    })
}
