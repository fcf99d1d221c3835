//! Binary PPM figures: dilatation colour maps and deformed grids.

use std::f64::consts::PI;

use crate::beltrami::MapField;
use crate::error::{Error, Result};
use crate::grid::{Field, C64};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major, top row first.
    pub pixels: Vec<[u8; 3]>,
}

impl Image {
    pub fn filled(width: usize, height: usize, colour: [u8; 3]) -> Self {
        Self { width, height, pixels: vec![colour; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, colour: [u8; 3]) {
        self.pixels[y * self.width + x] = colour;
    }

    /// P6 bytes, with the config hash in a header comment.
    pub fn to_ppm(&self, config_hash: &str) -> Vec<u8> {
        let mut out = format!("P6\n# config {config_hash}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(3 * self.pixels.len());
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }
}

/// `h` in turns, `s, v` in [0, 1].
fn hsv(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = match sector as u32 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    let byte = |c: f64| (c.clamp(0.0, 1.0) * 255.0).round() as u8;
    [byte(r), byte(g), byte(b)]
}

/// One pixel per grid node: hue is `arg mu`, value is `|mu| / k`.
pub fn render_dilatation(mu: &Field, k: f64) -> Result<Image> {
    let grid = mu.grid();
    if grid.dim() != 2 {
        return Err(Error::Argument("only planar dilatations can be rendered".into()));
    }
    let n = grid.n();
    let k = if k > 0.0 { k } else { 1.0 };
    let mut img = Image::filled(n, n, [0, 0, 0]);
    for (flat, m) in mu.data().iter().enumerate() {
        let [ix, iy, _] = grid.unflatten(flat);
        let hue = (m.arg() / (2.0 * PI)).rem_euclid(1.0);
        img.set(ix, n - 1 - iy, hsv(hue, 1.0, m.norm() / k));
    }
    Ok(img)
}

/// Images under `map` of the lines `x = c` and `y = c` for `lines + 1`
/// equally spaced `c` in `[-radius, radius]`, drawn black on white in the
/// square `[-radius, radius]^2`.
pub fn render_deformed_grid(map: &MapField, lines: usize, size: usize, radius: f64) -> Result<Image> {
    if lines == 0 || size < 2 || !(radius > 0.0) {
        return Err(Error::Argument("need at least one line, two pixels and a positive radius".into()));
    }
    let mut img = Image::filled(size, size, [255, 255, 255]);
    let scale = (size - 1) as f64 / (2.0 * radius);
    let steps = 4 * size;
    let mut plot = |z: C64| {
        let px = ((z.re + radius) * scale).round();
        let py = ((radius - z.im) * scale).round();
        if px >= 0.0 && py >= 0.0 && px < size as f64 && py < size as f64 {
            img.set(px as usize, py as usize, [0, 0, 0]);
        }
    };
    for l in 0..=lines {
        let c = -radius + 2.0 * radius * l as f64 / lines as f64;
        for s in 0..=steps {
            let t = -radius + 2.0 * radius * s as f64 / steps as f64;
            plot(map.eval(C64::new(c, t)));
            plot(map.eval(C64::new(t, c)));
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn zero_dilatation_is_black() {
        let grid = Grid::new(2, 16, 1.0).unwrap();
        let img = render_dilatation(&Field::zeros(grid), 0.5).unwrap();
        assert!(img.pixels.iter().all(|p| *p == [0, 0, 0]));
        let full = render_dilatation(&Field::constant(grid, C64::new(0.5, 0.0)), 0.5).unwrap();
        assert!(full.pixels.iter().all(|p| *p == [255, 0, 0]));
    }

    #[test]
    fn identity_draws_a_regular_lattice() {
        let grid = Grid::new(2, 16, 4.0).unwrap();
        let id = MapField::affine(grid, C64::new(1.0, 0.0), C64::new(0.0, 0.0)).unwrap();
        let img = render_deformed_grid(&id, 8, 129, 1.0).unwrap();
        let black = |x: usize, y: usize| img.get(x, y) == [0, 0, 0];
        for line in 0..=8 {
            let c = 16 * line;
            assert!((0..129).all(|t| black(c, t) && black(t, c)));
        }
        for x in [5, 8, 30] {
            for y in [3, 9, 70] {
                assert!(!black(x, y));
            }
        }
    }

    #[test]
    fn ppm_header() {
        let bytes = Image::filled(3, 2, [1, 2, 3]).to_ppm("abc");
        let header = b"P6\n# config abc\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 18);
    }
}
