//! Synthetic factor-labeled sprites ("mini-dSprites") and their file format.

pub(crate) mod format;
mod render;

pub use format::{load_dataset, save_dataset, DATASET_MAGIC};
pub use render::{render_shape, Shape};

use crate::{Error, Matrix, Prng, Result};

/// Factor grids for the generator. Factor order is shape, scale, pos_x, pos_y.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorSpec {
    pub width: usize,
    pub scales: Vec<f64>,
    pub pos_x: Vec<f64>,
    pub pos_y: Vec<f64>,
}

impl Default for FactorSpec {
    fn default() -> Self {
        let positions = FactorSpec::grid(8, 0.3, 0.7);
        FactorSpec {
            width: 16,
            scales: vec![0.3, 0.5, 0.7],
            pos_x: positions.clone(),
            pos_y: positions,
        }
    }
}

impl FactorSpec {
    /// Evenly spaced grids: `k` points over `[lo, hi]` (a single point sits at the midpoint).
    pub fn grid(k: usize, lo: f64, hi: f64) -> Vec<f64> {
        match k {
            0 => Vec::new(),
            1 => vec![(lo + hi) / 2.0],
            _ => (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::Config("image width must be positive".into()));
        }
        for (name, grid) in [("scale", &self.scales), ("pos_x", &self.pos_x), ("pos_y", &self.pos_y)] {
            if grid.is_empty() {
                return Err(Error::Config(format!("factor {name} needs at least one value")));
            }
            if grid.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
                return Err(Error::Config(format!("factor {name} values must lie in (0, 1)")));
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!("factor {name} grid must be strictly increasing")));
            }
        }
        Ok(())
    }

    pub fn factors(&self) -> Vec<Factor> {
        vec![
            Factor::new("shape", Shape::ALL.len()),
            Factor::new("scale", self.scales.len()),
            Factor::new("pos_x", self.pos_x.len()),
            Factor::new("pos_y", self.pos_y.len()),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factor {
    pub name: String,
    pub cardinality: usize,
}

impl Factor {
    pub fn new(name: &str, cardinality: usize) -> Self {
        Factor {
            name: name.to_string(),
            cardinality,
        }
    }
}

/// Full-factorial dataset: row `i` holds the mixed-radix decode of `i` over
/// the factor cardinalities (last factor fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    width: usize,
    height: usize,
    factors: Vec<Factor>,
    /// `N · width · height` bytes, each 0 or 255.
    images: Vec<u8>,
    /// `N · F` factor indices.
    labels: Vec<u16>,
}

impl Dataset {
    pub(crate) fn from_parts(
        width: usize,
        height: usize,
        factors: Vec<Factor>,
        images: Vec<u8>,
        labels: Vec<u16>,
    ) -> Result<Self> {
        let count: usize = factors.iter().map(|f| f.cardinality).product();
        if factors.is_empty() || factors.iter().any(|f| f.cardinality == 0) {
            return Err(Error::Invalid("every factor needs a positive cardinality".into()));
        }
        if images.len() != count * width * height || labels.len() != count * factors.len() {
            return Err(Error::Invalid(format!(
                "dataset with {count} rows has {} pixel bytes and {} factor entries",
                images.len(),
                labels.len()
            )));
        }
        let ds = Dataset {
            width,
            height,
            factors,
            images,
            labels,
        };
        for row in 0..count {
            if ds.decode_row(row).iter().zip(ds.factor_row(row)).any(|(&a, &b)| a != b as usize) {
                return Err(Error::Invalid(format!(
                    "row {row} factors are not the full-factorial decode of its index"
                )));
            }
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.labels.len() / self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels_per_image(&self) -> usize {
        self.width * self.height
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn image(&self, row: usize) -> &[u8] {
        let d = self.pixels_per_image();
        &self.images[row * d..(row + 1) * d]
    }

    pub fn raw_images(&self) -> &[u8] {
        &self.images
    }

    pub fn raw_factors(&self) -> &[u16] {
        &self.labels
    }

    pub fn factor_row(&self, row: usize) -> &[u16] {
        let f = self.factors.len();
        &self.labels[row * f..(row + 1) * f]
    }

    /// Values of factor `k` for every row.
    pub fn factor_column(&self, k: usize) -> Vec<usize> {
        (0..self.len()).map(|r| self.factor_row(r)[k] as usize).collect()
    }

    fn decode_row(&self, mut row: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for (slot, f) in out.iter_mut().zip(&self.factors).rev() {
            *slot = row % f.cardinality;
            row /= f.cardinality;
        }
        out
    }

    /// Row index of a factor combination.
    pub fn row_of(&self, values: &[usize]) -> usize {
        values
            .iter()
            .zip(&self.factors)
            .fold(0, |acc, (&v, f)| acc * f.cardinality + v)
    }

    /// Images of the given rows as `0.0`/`1.0` pixels.
    pub fn images_matrix(&self, rows: &[usize]) -> Matrix {
        let d = self.pixels_per_image();
        let mut m = Matrix::zeros(rows.len(), d);
        for (dst, &r) in rows.iter().enumerate() {
            for (o, &p) in m.row_mut(dst).iter_mut().zip(self.image(r)) {
                *o = f64::from(p) / 255.0;
            }
        }
        m
    }

    pub fn all_images(&self) -> Matrix {
        self.images_matrix(&(0..self.len()).collect::<Vec<_>>())
    }

    /// Row indices of `count` samples, drawn with replacement, whose factor
    /// `k` is pinned to `value` while every other factor is uniform.
    pub fn fixed_factor_rows(&self, k: usize, value: usize, count: usize, rng: &mut Prng) -> Result<Vec<usize>> {
        let factor = self
            .factors
            .get(k)
            .ok_or_else(|| Error::Invalid(format!("factor index {k} out of range ({} factors)", self.factors.len())))?;
        if value >= factor.cardinality {
            return Err(Error::Invalid(format!(
                "value {value} out of range for factor {} (cardinality {})",
                factor.name, factor.cardinality
            )));
        }
        let mut combo = vec![0; self.factors.len()];
        Ok((0..count)
            .map(|_| {
                for (j, (slot, f)) in combo.iter_mut().zip(&self.factors).enumerate() {
                    *slot = if j == k { value } else { rng.below(f.cardinality) };
                }
                self.row_of(&combo)
            })
            .collect())
    }
}

/// Images and factor rows of a factor-conditioned batch.
pub fn fixed_factor_batch(
    ds: &Dataset,
    k: usize,
    value: usize,
    count: usize,
    rng: &mut Prng,
) -> Result<(Matrix, Vec<Vec<u16>>)> {
    let rows = ds.fixed_factor_rows(k, value, count, rng)?;
    let factors = rows.iter().map(|&r| ds.factor_row(r).to_vec()).collect();
    Ok((ds.images_matrix(&rows), factors))
}

/// Renders every factor combination in row-major factor order.
pub fn generate_dataset(spec: &FactorSpec) -> Result<Dataset> {
    spec.validate()?;
    let factors = spec.factors();
    let w = spec.width;
    let count: usize = factors.iter().map(|f| f.cardinality).product();
    let mut images = Vec::with_capacity(count * w * w);
    let mut labels = Vec::with_capacity(count * factors.len());
    for (si, &shape) in Shape::ALL.iter().enumerate() {
        for (ki, &scale) in spec.scales.iter().enumerate() {
            for (xi, &cx) in spec.pos_x.iter().enumerate() {
                for (yi, &cy) in spec.pos_y.iter().enumerate() {
                    images.extend(render_shape(shape, scale, cx, cy, w));
                    labels.extend([si, ki, xi, yi].map(|v| v as u16));
                }
            }
        }
    }
    Dataset::from_parts(w, w, factors, images, labels)
}
