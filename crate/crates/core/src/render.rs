//! Class maps over rectangular grids, written as binary PPM.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::MapDescriptor;
use crate::classify::{classify_with_table, iterate_max_modulus, ClassifierParams, EscapeClass};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(re: (f64, f64), im: (f64, f64), width: usize, height: usize) -> Result<Self> {
        let g = GridSpec {
            re_min: re.0,
            re_max: re.1,
            im_min: im.0,
            im_max: im.1,
            width,
            height,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("grid must have at least one pixel"));
        }
        let ok = |a: f64, b: f64| a.is_finite() && b.is_finite() && a < b;
        if !ok(self.re_min, self.re_max) || !ok(self.im_min, self.im_max) {
            return Err(Error::invalid("grid corners must be finite with min < max"));
        }
        Ok(())
    }

    /// Centre of pixel (col, row); row 0 is the top edge (largest imaginary part).
    pub fn pixel_center(&self, col: usize, row: usize) -> Complex64 {
        let dx = (self.re_max - self.re_min) / self.width as f64;
        let dy = (self.im_max - self.im_min) / self.height as f64;
        Complex64::new(
            self.re_min + (col as f64 + 0.5) * dx,
            self.im_max - (row as f64 + 0.5) * dy,
        )
    }

    /// Pixel whose cell contains z, if any.
    pub fn pixel_of(&self, z: Complex64) -> Option<(usize, usize)> {
        let u = (z.re - self.re_min) / (self.re_max - self.re_min);
        let v = (self.im_max - z.im) / (self.im_max - self.im_min);
        if !(0.0..1.0).contains(&u) || !(0.0..1.0).contains(&v) {
            return None;
        }
        Some((
            (u * self.width as f64) as usize,
            (v * self.height as f64) as usize,
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    /// Row-major [`EscapeClass`] codes.
    pub codes: Vec<u8>,
}

impl ImageBuffer {
    pub fn class_at(&self, col: usize, row: usize) -> EscapeClass {
        EscapeClass::from_code(self.codes[row * self.width + col]).expect("valid class code")
    }

    pub fn histogram(&self) -> Vec<(EscapeClass, usize)> {
        EscapeClass::ALL
            .iter()
            .map(|c| (*c, self.codes.iter().filter(|x| **x == c.code()).count()))
            .collect()
    }

    /// Binary P6 with the map, grid, params and legend in `#` comment lines.
    pub fn write_ppm<W: Write>(&self, mut w: W, header: &[String]) -> std::io::Result<()> {
        writeln!(w, "P6")?;
        for line in header {
            for l in line.lines() {
                writeln!(w, "# {l}")?;
            }
        }
        for c in EscapeClass::ALL {
            let [r, g, b] = c.color();
            writeln!(w, "# legend {} {} {} {}", c.label(), r, g, b)?;
        }
        writeln!(w, "{} {}", self.width, self.height)?;
        writeln!(w, "255")?;
        let mut px = Vec::with_capacity(self.codes.len() * 3);
        for c in &self.codes {
            px.extend_from_slice(&EscapeClass::from_code(*c).map_or([0, 0, 0], |c| c.color()));
        }
        w.write_all(&px)
    }

    pub fn to_ppm(&self, header: &[String]) -> Vec<u8> {
        let mut v = vec![];
        self.write_ppm(&mut v, header).expect("writing to a Vec");
        v
    }
}

/// Classifies every pixel centre on the global rayon pool.
pub fn render_escape_classes(
    map: &MapDescriptor,
    grid: &GridSpec,
    params: &ClassifierParams,
) -> Result<ImageBuffer> {
    grid.validate()?;
    params.validate()?;
    let table = iterate_max_modulus(
        map,
        params.radius_for(map),
        params.n_max,
        params.overflow_cap,
    )
    .ok();
    let rows: Vec<Vec<u8>> = (0..grid.height)
        .into_par_iter()
        .map(|row| {
            (0..grid.width)
                .map(|col| {
                    classify_with_table(map, grid.pixel_center(col, row), params, table.as_ref())
                        .class
                        .code()
                })
                .collect()
        })
        .collect();
    Ok(ImageBuffer {
        width: grid.width,
        height: grid.height,
        codes: rows.concat(),
    })
}

/// [`render_escape_classes`] on a dedicated pool of `workers` threads.
pub fn render_with_workers(
    map: &MapDescriptor,
    grid: &GridSpec,
    params: &ClassifierParams,
    workers: usize,
) -> Result<ImageBuffer> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| render_escape_classes(map, grid, params))
}
