/// Sprite shapes. The discrete factor of the synthetic dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Square,
    Ellipse,
    Triangle,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Square, Shape::Ellipse, Shape::Triangle];

    fn contains(self, du: f64, dv: f64, half: f64) -> bool {
        match self {
            Shape::Square => du.abs().max(dv.abs()) <= half,
            Shape::Ellipse => (du / half).powi(2) + (dv / half).powi(2) <= 1.0,
            // Apex at the top edge of the box, base spanning its bottom edge;
            // rows grow downward.
            Shape::Triangle => {
                let from_top = dv + half;
                (0.0..=2.0 * half).contains(&from_top) && du.abs() <= from_top / 2.0
            }
        }
    }
}

/// Rasterizes one shape onto a `width × width` canvas of 0/255 bytes.
///
/// Pixel `(px, py)` is on iff its center `((px + 0.5) / W, (py + 0.5) / W)`
/// falls inside the shape of side `scale` centered at `(cx, cy)`. Anything
/// outside the canvas is simply not drawn.
pub fn render_shape(shape: Shape, scale: f64, cx: f64, cy: f64, width: usize) -> Vec<u8> {
    let w = width as f64;
    let half = scale / 2.0;
    let mut img = vec![0u8; width * width];
    for py in 0..width {
        let dv = (py as f64 + 0.5) / w - cy;
        for px in 0..width {
            let du = (px as f64 + 0.5) / w - cx;
            if shape.contains(du, dv, half) {
                img[py * width + px] = 255;
            }
        }
    }
    img
}
