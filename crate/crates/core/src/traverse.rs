//! Latent traversal grids: decodings laid out as tiled greymaps.

use std::path::{Path, PathBuf};

use crate::assignment::one_hot;
use crate::neural::{decoder_forward, MlpParams};
use crate::pgm::{to_grey, write_pgm};
use crate::{Error, Matrix, Result};

pub const DEFAULT_RANGE: (f64, f64) = (-1.5, 1.5);
pub const DEFAULT_STEPS: usize = 10;

/// Tiled image of `rows × cols` decodings, each `tile_w × tile_h`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Grid {
    fn tile(probs: &Matrix, cols: usize, tile_w: usize, tile_h: usize) -> Grid {
        let rows = probs.rows().div_ceil(cols);
        let (width, height) = (cols * tile_w, rows * tile_h);
        let mut pixels = vec![0u8; width * height];
        for (i, img) in probs.iter_rows().enumerate() {
            let (gr, gc) = (i / cols, i % cols);
            for y in 0..tile_h {
                let dst = (gr * tile_h + y) * width + gc * tile_w;
                for x in 0..tile_w {
                    pixels[dst + x] = to_grey(img[y * tile_w + x]);
                }
            }
        }
        Grid { width, height, pixels }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_pgm(path, self.width, self.height, &self.pixels)
    }
}

fn tile_height(params: &MlpParams, tile_w: usize) -> Result<usize> {
    let dim = params.image_dim();
    if tile_w == 0 || dim % tile_w != 0 {
        return Err(Error::Invalid(format!("image width {tile_w} does not divide {dim} pixels")));
    }
    Ok(dim / tile_w)
}

/// Evenly spaced points from `lo` to `hi` inclusive.
pub fn sweep(range: (f64, f64), steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![range.0],
        _ => (0..steps)
            .map(|i| range.0 + (range.1 - range.0) * i as f64 / (steps - 1) as f64)
            .collect(),
    }
}

/// One row per continuous dim, sweeping it over `range` with the others at 0,
/// decoded under discrete value `value`.
pub fn continuous_grid(params: &MlpParams, value: usize, range: (f64, f64), steps: usize, tile_w: usize) -> Result<Grid> {
    let (m, s) = (params.latent_dim(), params.discrete_card());
    if value >= s {
        return Err(Error::Invalid(format!("discrete value {value} out of range (S = {s})")));
    }
    if steps == 0 {
        return Err(Error::Invalid("a traversal needs at least one step".into()));
    }
    let tile_h = tile_height(params, tile_w)?;
    let points = sweep(range, steps);
    let mut z = Matrix::zeros(m * steps, m);
    for j in 0..m {
        for (c, &v) in points.iter().enumerate() {
            z.set(j * steps + c, j, v);
        }
    }
    let probs = decoder_forward(params, &z, &one_hot(&vec![value; m * steps], s))?;
    Ok(Grid::tile(&probs, steps, tile_w, tile_h))
}

/// A single row decoding every discrete value at `z = 0`.
pub fn discrete_grid(params: &MlpParams, tile_w: usize) -> Result<Grid> {
    let (m, s) = (params.latent_dim(), params.discrete_card());
    let tile_h = tile_height(params, tile_w)?;
    let probs = decoder_forward(params, &Matrix::zeros(s, m), &one_hot(&(0..s).collect::<Vec<_>>(), s))?;
    Ok(Grid::tile(&probs, s, tile_w, tile_h))
}

/// Writes `traverse_d<k>.pgm` for every discrete value and `traverse_discrete.pgm`.
pub fn write_traversals(params: &MlpParams, dir: impl AsRef<Path>, range: (f64, f64), tile_w: usize) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for k in 0..params.discrete_card() {
        let path = dir.join(format!("traverse_d{k}.pgm"));
        continuous_grid(params, k, range, DEFAULT_STEPS, tile_w)?.save(&path)?;
        written.push(path);
    }
    let path = dir.join("traverse_discrete.pgm");
    discrete_grid(params, tile_w)?.save(&path)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{init_params, Architecture};
    use crate::Prng;

    fn params() -> MlpParams {
        init_params(&Architecture::mlp(48, &[8], 3, 2), 3, 2, &Prng::new(1)).unwrap()
    }

    #[test]
    fn sweep_endpoints() {
        let pts = sweep(DEFAULT_RANGE, DEFAULT_STEPS);
        assert_eq!(pts.len(), 10);
        assert_eq!(pts[0], -1.5);
        assert_eq!(pts[9], 1.5);
    }

    #[test]
    fn grid_dimensions() {
        let p = params();
        let g = continuous_grid(&p, 1, DEFAULT_RANGE, 10, 8).unwrap();
        assert_eq!((g.width, g.height), (80, 18));
        assert_eq!(g.pixels.len(), 80 * 18);
        let d = discrete_grid(&p, 8).unwrap();
        assert_eq!((d.width, d.height), (16, 6));
        assert!(continuous_grid(&p, 2, DEFAULT_RANGE, 10, 8).is_err());
        assert!(discrete_grid(&p, 7).is_err());
    }

    #[test]
    fn files_written() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_traversals(&params(), dir.path(), DEFAULT_RANGE, 8).unwrap();
        assert_eq!(files.len(), 3);
        let bytes = std::fs::read(&files[0]).unwrap();
        assert!(bytes.starts_with(b"P5\n80 18\n255\n"));
        assert_eq!(bytes.len(), b"P5\n80 18\n255\n".len() + 80 * 18);
    }
}
