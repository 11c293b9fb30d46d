//! Pixelated planar and hemispherical detectors.
//!
//! The planar detector is the square `|x|, |y| ≤ a` in the plane `z = Z`, with
//! `a` fixed by the solid angle it subtends from the origin. Pixels are polar
//! cells in the distance `ρ = √(r⊥² + Z²)` from the origin, using
//! `dA = ρ dρ dφ`: the spacing is geometric close to the axis, where near-field
//! gradients live, and capped at `λ/8` further out so that far-field
//! interference fringes are sampled uniformly. Each angular sector is closed
//! off at the radius giving its exact share of the square, so the pixel areas
//! add up to `4a²`.
//!
//! The hemispherical detector is a spherical cap of radius `R` around `±e_z`,
//! pixelated uniformly in `(cos θ, φ)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI};

use crate::tolerances::MAX_PIXELS;
use crate::vec3::*;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub position: Vec3,
    pub normal: Vec3,
    pub area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    Forward,
    Backward,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Forward => 1.0,
            Orientation::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Geometry {
    Planar { z: f64, half_width: f64, solid_angle: f64, refinement: u32, lambda: f64 },
    Hemisphere { r: f64, orientation: Orientation, solid_angle: f64, refinement: u32, lambda: f64 },
}

impl Geometry {
    /// `|Z|` or `R`.
    pub fn distance(&self) -> f64 {
        match *self {
            Geometry::Planar { z, .. } => z.abs(),
            Geometry::Hemisphere { r, .. } => r,
        }
    }

    pub fn solid_angle(&self) -> f64 {
        match *self {
            Geometry::Planar { solid_angle, .. } | Geometry::Hemisphere { solid_angle, .. } => solid_angle,
        }
    }

    pub fn refinement(&self) -> u32 {
        match *self {
            Geometry::Planar { refinement, .. } | Geometry::Hemisphere { refinement, .. } => refinement,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrid {
    pub pixels: Vec<Pixel>,
    pub geometry: Geometry,
    /// `Σ dA |n·r|/|r|³` over the pixels.
    pub covered_solid_angle: f64,
}

impl PixelGrid {
    fn new(pixels: Vec<Pixel>, geometry: Geometry) -> Self {
        let covered_solid_angle = pixels
            .iter()
            .map(|p| {
                let r = norm(p.position);
                p.area * dot(p.normal, p.position).abs() / (r * r * r)
            })
            .sum();
        Self { pixels, geometry, covered_solid_angle }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.pixels.iter().map(|p| p.area).sum()
    }
}

/// `a/|Z|` of a square of half-width `a` subtending `Ω` at distance `|Z|`,
/// from `tan(Ω/4) = a²/(|Z|√(2a² + Z²))`.
pub fn planar_half_width_ratio(solid_angle: f64) -> Result<f64> {
    if !(solid_angle > 0.0 && solid_angle < 2.0 * PI) {
        return Err(Error::Geometry(format!("planar solid angle must lie in (0, 2π), got {solid_angle}")));
    }
    let t = (solid_angle / 4.0).tan();
    Ok((t * t + t * (t * t + 1.0).sqrt()).sqrt())
}

/// Analytic solid angle of the centered square `|x|, |y| ≤ a` at distance `|Z|`.
pub fn square_solid_angle(a: f64, z: f64) -> f64 {
    4.0 * (a * a / (z.abs() * (2.0 * a * a + z * z).sqrt())).atan()
}

fn check_refinement(refinement: u32) -> Result<()> {
    if refinement == 0 || refinement > 12 {
        return Err(Error::Config(format!("refinement must lie in 1..=12, got {refinement}")));
    }
    Ok(())
}

/// Radial edges from `z` to `edge`: geometric steps `ρ/20` capped at `λ/8`
/// up to `march_to`, stretched to end on `edge`, then each cell split into
/// `split` equal parts.
fn radial_edges(z: f64, edge: f64, march_to: f64, lambda: f64, split: usize) -> Vec<f64> {
    let mut base = vec![z];
    let mut rho = z;
    while rho < march_to {
        rho += (0.05 * rho).min(lambda / 8.0);
        base.push(rho);
    }
    let last = *base.last().unwrap();
    let stretch = (edge - z) / (last - z);
    let base: Vec<f64> = base.iter().map(|r| z + (r - z) * stretch).collect();
    let mut out = Vec::with_capacity((base.len() - 1) * split + 1);
    for w in base.windows(2) {
        for s in 0..split {
            out.push(w[0] + (w[1] - w[0]) * s as f64 / split as f64);
        }
    }
    out.push(edge);
    out
}

/// Outer `ρ` of the polar sector `ψ ∈ [lo, hi]` with the same area as the
/// matching slice of the square.
fn sector_edge(a: f64, z: f64, lo: f64, hi: f64) -> f64 {
    let area = 0.5 * a * a * (hi.tan() - lo.tan());
    (2.0 * area / (hi - lo) + z * z).sqrt()
}

pub fn planar_grid(z: f64, solid_angle: f64, refinement: u32, lambda: f64) -> Result<PixelGrid> {
    if !(z.abs() > 0.0 && z.is_finite()) {
        return Err(Error::Geometry(format!("detector plane must be off the scatterer, got Z = {z}")));
    }
    check_refinement(refinement)?;
    let zabs = z.abs();
    let a = planar_half_width_ratio(solid_angle)? * zabs;
    let split = 1usize << (refinement - 1);
    let per_octant = 8 * split;
    let dphi = FRAC_PI_4 / per_octant as f64;

    let mut pixels = Vec::new();
    for sector in 0..8 * per_octant {
        let (p1, p2) = (sector as f64 * dphi, (sector + 1) as f64 * dphi);
        // ψ, the angle to the nearest axis, where r_max = a/cos ψ
        let j = sector % per_octant;
        let j = if (sector / per_octant) % 2 == 0 { j } else { per_octant - 1 - j };
        let (lo, hi) = (j as f64 * dphi, (j + 1) as f64 * dphi);
        let edge = sector_edge(a, zabs, lo, hi);
        // the cell count follows the unrefined sector, so refinement multiplies it exactly
        let parent = j / split;
        let dp = FRAC_PI_4 / 8.0;
        let march_to = sector_edge(a, zabs, parent as f64 * dp, (parent + 1) as f64 * dp);
        let edges = radial_edges(zabs, edge, march_to, lambda, split);
        let phi = 0.5 * (p1 + p2);
        let (sp, cp) = phi.sin_cos();
        for w in edges.windows(2) {
            let rho = 0.5 * (w[0] + w[1]);
            let r_perp = (rho * rho - zabs * zabs).max(0.0).sqrt();
            pixels.push(Pixel {
                position: [r_perp * cp, r_perp * sp, z],
                normal: EZ,
                area: 0.5 * (w[1] * w[1] - w[0] * w[0]) * dphi,
            });
        }
        if pixels.len() > MAX_PIXELS {
            return Err(Error::Resource(format!("planar grid exceeds {MAX_PIXELS} pixels")));
        }
    }
    Ok(PixelGrid::new(pixels, Geometry::Planar { z, half_width: a, solid_angle, refinement, lambda }))
}

pub fn hemisphere_grid(
    r: f64,
    orientation: Orientation,
    solid_angle: f64,
    refinement: u32,
    lambda: f64,
) -> Result<PixelGrid> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Geometry(format!("hemisphere radius must be positive, got {r}")));
    }
    if !(solid_angle > 0.0 && solid_angle <= 2.0 * PI) {
        return Err(Error::Geometry(format!("hemisphere solid angle must lie in (0, 2π], got {solid_angle}")));
    }
    check_refinement(refinement)?;
    let split = 1usize << (refinement - 1);
    let c_min = 1.0 - solid_angle / (2.0 * PI);
    // the incident phase kR cos θ runs through R(1 − c_min)/λ fringes
    let n_c = (24usize).max((8.0 * r * (1.0 - c_min) / lambda).ceil() as usize) * split;
    let n_phi = 64 * split;
    if n_c * n_phi > MAX_PIXELS {
        return Err(Error::Resource(format!("hemisphere grid exceeds {MAX_PIXELS} pixels")));
    }
    let sign = orientation.sign();
    let dc = (1.0 - c_min) / n_c as f64;
    let dphi = 2.0 * PI / n_phi as f64;
    let mut pixels = Vec::with_capacity(n_c * n_phi);
    for i in 0..n_c {
        let c = c_min + (i as f64 + 0.5) * dc;
        let s = (1.0 - c * c).sqrt();
        for j in 0..n_phi {
            let phi = (j as f64 + 0.5) * dphi;
            let e_r = [s * phi.cos(), s * phi.sin(), sign * c];
            pixels.push(Pixel { position: scale(e_r, r), normal: scale(e_r, sign), area: r * r * dc * dphi });
        }
    }
    Ok(PixelGrid::new(pixels, Geometry::Hemisphere { r, orientation, solid_angle, refinement, lambda }))
}

/// Half-opening angle of a cap subtending `Ω`.
pub fn cap_half_angle(solid_angle: f64) -> f64 {
    (1.0 - solid_angle / (2.0 * PI)).acos()
}

/// Same geometry at the next refinement level.
pub fn refine(grid: &PixelGrid) -> Result<PixelGrid> {
    match grid.geometry {
        Geometry::Planar { z, solid_angle, refinement, lambda, .. } => {
            planar_grid(z, solid_angle, refinement + 1, lambda)
        }
        Geometry::Hemisphere { r, orientation, solid_angle, refinement, lambda } => {
            hemisphere_grid(r, orientation, solid_angle, refinement + 1, lambda)
        }
    }
}
