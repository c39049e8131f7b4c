//! Germ-grain disc process simulators (Boolean, Matérn cluster, Matérn II
//! hard-core) and rasterization of disc unions to binary masks.
//!
//! Parents/proposals are simulated on the window dilated by the
//! interaction range, so the processes are stationary inside the window
//! and the closed-form intensity checks hold without edge corrections.
//! Grain centers outside the window are discarded; grains themselves may
//! overhang the boundary and are clipped at rasterization.
//!
//! Every simulator takes an explicit seed and is bit-reproducible.

use crate::error::{Error, Result};
use crate::geometry::{Disc, Point};
use crate::rng::stream_rng;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// Observation window `[0, width] × [0, height]` rasterized to `nx × ny`
/// pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub width: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Window {
    pub fn new(width: f64, height: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) || nx == 0 || ny == 0 {
            return Err(Error::InvalidProcess(
                "window dimensions must be positive".into(),
            ));
        }
        Ok(Window {
            width,
            height,
            nx,
            ny,
        })
    }

    /// Square window of `px` pixels with unit pixel size.
    pub fn square_pixels(px: usize) -> Result<Self> {
        Window::new(px as f64, px as f64, px, px)
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    /// World coordinates of the center of pixel `(ix, iy)`.
    pub fn pixel_center(&self, ix: usize, iy: usize) -> Point {
        Point::new(
            (ix as f64 + 0.5) * self.width / self.nx as f64,
            (iy as f64 + 0.5) * self.height / self.ny as f64,
        )
    }
}

/// Law of the i.i.d. grain radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum RadiusLaw {
    Fixed { r: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl RadiusLaw {
    fn validate(&self) -> Result<()> {
        match *self {
            RadiusLaw::Fixed { r } => {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(Error::InvalidProcess(format!(
                        "fixed radius must be positive, got {r}"
                    )));
                }
            }
            RadiusLaw::Uniform { lo, hi } => {
                if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                    return Err(Error::InvalidProcess(format!(
                        "uniform radius law needs 0 < lo <= hi, got [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            RadiusLaw::Fixed { r } => r,
            RadiusLaw::Uniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..hi)
                }
            }
        }
    }

    /// `E[R²]`, used by the Boolean coverage formula.
    pub fn mean_square(&self) -> f64 {
        match *self {
            RadiusLaw::Fixed { r } => r * r,
            RadiusLaw::Uniform { lo, hi } => (lo * lo + lo * hi + hi * hi) / 3.0,
        }
    }
}

/// A realisation of a disc process: grain centers inside the window.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscUnion {
    pub discs: Vec<Disc>,
    pub window: Window,
}

impl DiscUnion {
    pub fn new(discs: Vec<Disc>, window: Window) -> Result<Self> {
        if let Some(d) = discs.iter().find(|d| !window.contains(d.center)) {
            return Err(Error::InvalidProcess(format!(
                "disc center ({}, {}) outside window",
                d.center.x, d.center.y
            )));
        }
        Ok(DiscUnion { discs, window })
    }
}

/// Binary occupancy image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl RasterMask {
    pub fn empty(width: usize, height: usize) -> Self {
        RasterMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::MalformedPgm(format!(
                "expected {} pixels, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(RasterMask {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> bool {
        self.bits[iy * self.width + ix]
    }

    #[inline]
    pub fn set(&mut self, ix: usize, iy: usize, on: bool) {
        self.bits[iy * self.width + ix] = on;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn foreground_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Pixel indices of foreground pixels in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height)
            .flat_map(move |iy| (0..self.width).map(move |ix| (ix, iy)))
            .filter(move |&(ix, iy)| self.get(ix, iy))
    }
}

fn poisson_count(rng: &mut impl Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let law = Poisson::new(mean).expect("positive mean");
    law.sample(rng) as usize
}

fn uniform_in(rng: &mut impl Rng, x0: f64, x1: f64, y0: f64, y1: f64) -> Point {
    Point::new(rng.random_range(x0..x1), rng.random_range(y0..y1))
}

/// Boolean model: Poisson(intensity · area) centers uniform in the
/// window, radii i.i.d. from `radius_law`, independent of the centers.
pub fn sim_boolean(
    w: &Window,
    intensity: f64,
    radius_law: &RadiusLaw,
    seed: u64,
) -> Result<DiscUnion> {
    if !(intensity > 0.0 && intensity.is_finite()) {
        return Err(Error::InvalidProcess(format!(
            "intensity must be positive, got {intensity}"
        )));
    }
    radius_law.validate()?;
    let mut rng = stream_rng(seed, 0);
    let count = poisson_count(&mut rng, intensity * w.area());
    let centers: Vec<Point> = (0..count)
        .map(|_| uniform_in(&mut rng, 0.0, w.width, 0.0, w.height))
        .collect();
    let discs = centers
        .into_iter()
        .map(|c| Disc::new(c, radius_law.sample(&mut rng)))
        .collect::<Result<Vec<_>>>()?;
    DiscUnion::new(discs, *w)
}

/// Matérn cluster process, also returning the parent points for
/// diagnostics: every child is within `cluster_radius` of its parent.
pub fn sim_cluster_with_parents(
    w: &Window,
    parent_intensity: f64,
    mean_children: f64,
    cluster_radius: f64,
    radius_law: &RadiusLaw,
    seed: u64,
) -> Result<(DiscUnion, Vec<Point>)> {
    if !(parent_intensity > 0.0 && parent_intensity.is_finite()) {
        return Err(Error::InvalidProcess(format!(
            "parent intensity must be positive, got {parent_intensity}"
        )));
    }
    if !(mean_children >= 0.0 && mean_children.is_finite()) {
        return Err(Error::InvalidProcess(format!(
            "mean children must be nonnegative, got {mean_children}"
        )));
    }
    if !(cluster_radius > 0.0 && cluster_radius.is_finite()) {
        return Err(Error::InvalidProcess(format!(
            "cluster radius must be positive, got {cluster_radius}"
        )));
    }
    radius_law.validate()?;
    let mut rng = stream_rng(seed, 0);
    // Parents live on the dilated window so the child process is
    // stationary inside the window.
    let r = cluster_radius;
    let dilated_area = (w.width + 2.0 * r) * (w.height + 2.0 * r);
    let n_parents = poisson_count(&mut rng, parent_intensity * dilated_area);
    let parents: Vec<Point> = (0..n_parents)
        .map(|_| uniform_in(&mut rng, -r, w.width + r, -r, w.height + r))
        .collect();
    let mut discs = Vec::new();
    for &parent in &parents {
        let n_children = poisson_count(&mut rng, mean_children);
        for _ in 0..n_children {
            let rho = r * rng.random_range(0.0..1.0f64).sqrt();
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let child = parent + Point::new(rho * theta.cos(), rho * theta.sin());
            let grain_radius = radius_law.sample(&mut rng);
            if w.contains(child) {
                discs.push(Disc::new(child, grain_radius)?);
            }
        }
    }
    Ok((DiscUnion::new(discs, *w)?, parents))
}

/// Matérn cluster process: Poisson parents, Poisson(mean_children)
/// children per parent uniform in the disc of `cluster_radius` around the
/// parent, i.i.d. grain radii; parents are discarded.
pub fn sim_cluster(
    w: &Window,
    parent_intensity: f64,
    mean_children: f64,
    cluster_radius: f64,
    radius_law: &RadiusLaw,
    seed: u64,
) -> Result<DiscUnion> {
    sim_cluster_with_parents(w, parent_intensity, mean_children, cluster_radius, radius_law, seed)
        .map(|(u, _)| u)
}

/// Matérn type-II thinning: keep point `i` iff no other proposal within
/// `hardcore_distance` carries a smaller mark (ties, which have
/// probability zero, break by index).
pub(crate) fn matern2_thin(proposals: &[(Point, f64)], hardcore_distance: f64) -> Vec<bool> {
    let n = proposals.len();
    let mut keep = vec![true; n];
    for i in 0..n {
        let (pi, mi) = proposals[i];
        for (j, &(pj, mj)) in proposals.iter().enumerate() {
            if i == j {
                continue;
            }
            if pi.dist(pj) < hardcore_distance && (mj < mi || (mj == mi && j < i)) {
                keep[i] = false;
                break;
            }
        }
    }
    keep
}

/// Matérn II hard-core process: Poisson proposals with i.i.d. uniform
/// marks, thinned so retained centers are pairwise at least
/// `hardcore_distance` apart; retained points get i.i.d. grain radii.
pub fn sim_repulsive(
    w: &Window,
    proposal_intensity: f64,
    hardcore_distance: f64,
    radius_law: &RadiusLaw,
    seed: u64,
) -> Result<DiscUnion> {
    if !(proposal_intensity > 0.0 && proposal_intensity.is_finite()) {
        return Err(Error::InvalidProcess(format!(
            "proposal intensity must be positive, got {proposal_intensity}"
        )));
    }
    if !(hardcore_distance > 0.0 && hardcore_distance.is_finite()) {
        return Err(Error::InvalidProcess(format!(
            "hardcore distance must be positive, got {hardcore_distance}"
        )));
    }
    radius_law.validate()?;
    let mut rng = stream_rng(seed, 0);
    let d = hardcore_distance;
    let dilated_area = (w.width + 2.0 * d) * (w.height + 2.0 * d);
    let n_prop = poisson_count(&mut rng, proposal_intensity * dilated_area);
    let proposals: Vec<(Point, f64)> = (0..n_prop)
        .map(|_| {
            let p = uniform_in(&mut rng, -d, w.width + d, -d, w.height + d);
            let mark: f64 = rng.random();
            (p, mark)
        })
        .collect();
    let keep = matern2_thin(&proposals, d);
    let mut discs = Vec::new();
    for (i, &(p, _)) in proposals.iter().enumerate() {
        if keep[i] && w.contains(p) {
            discs.push(Disc::new(p, radius_law.sample(&mut rng))?);
        }
    }
    DiscUnion::new(discs, *w)
}

/// Rasterize the union: a pixel is on iff its center lies inside at least
/// one disc. Discs overhanging the window are clipped implicitly.
pub fn rasterize(u: &DiscUnion) -> RasterMask {
    let w = &u.window;
    let mut mask = RasterMask::empty(w.nx, w.ny);
    let sx = w.nx as f64 / w.width;
    let sy = w.ny as f64 / w.height;
    for disc in &u.discs {
        let ix0 = (((disc.center.x - disc.radius) * sx - 0.5).floor().max(0.0)) as usize;
        let iy0 = (((disc.center.y - disc.radius) * sy - 0.5).floor().max(0.0)) as usize;
        let ix1 = ((((disc.center.x + disc.radius) * sx).ceil()) as usize).min(w.nx - 1);
        let iy1 = ((((disc.center.y + disc.radius) * sy).ceil()) as usize).min(w.ny - 1);
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                if !mask.get(ix, iy) && disc.contains(w.pixel_center(ix, iy)) {
                    mask.set(ix, iy, true);
                }
            }
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_window() -> Window {
        Window::new(1.0, 1.0, 50, 50).unwrap()
    }

    const FIXED_LAW: RadiusLaw = RadiusLaw::Fixed { r: 0.05 };

    #[test]
    fn boolean_negligible_intensity_is_empty() {
        let w = unit_window();
        let u = sim_boolean(&w, 1e-4, &FIXED_LAW, 1).unwrap();
        assert!(u.discs.is_empty());
    }

    #[test]
    fn boolean_mean_count_within_three_sigma() {
        let w = unit_window();
        let intensity = 5.0;
        let reps = 4000;
        let total: usize = (0..reps)
            .map(|seed| sim_boolean(&w, intensity, &FIXED_LAW, seed).unwrap().discs.len())
            .sum();
        let mean = total as f64 / reps as f64;
        // Poisson(5): SE of the mean is sqrt(5/reps).
        let se = (intensity / reps as f64).sqrt();
        assert!(
            (mean - intensity).abs() < 3.0 * se,
            "mean {mean} vs {intensity} (se {se})"
        );
    }

    #[test]
    fn boolean_fixed_radius_law() {
        let w = unit_window();
        let u = sim_boolean(&w, 50.0, &FIXED_LAW, 3).unwrap();
        assert!(!u.discs.is_empty());
        assert!(u.discs.iter().all(|d| d.radius == 0.05));
    }

    #[test]
    fn boolean_is_deterministic() {
        let w = unit_window();
        let law = RadiusLaw::Uniform { lo: 0.02, hi: 0.08 };
        let a = sim_boolean(&w, 30.0, &law, 9).unwrap();
        let b = sim_boolean(&w, 30.0, &law, 9).unwrap();
        assert_eq!(a, b);
        let c = sim_boolean(&w, 30.0, &law, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn cluster_zero_children_empty() {
        let w = unit_window();
        let u = sim_cluster(&w, 10.0, 0.0, 0.1, &FIXED_LAW, 4).unwrap();
        assert!(u.discs.is_empty());
    }

    #[test]
    fn cluster_children_near_some_parent() {
        let w = unit_window();
        let (u, parents) =
            sim_cluster_with_parents(&w, 20.0, 4.0, 0.1, &FIXED_LAW, 5).unwrap();
        assert!(!u.discs.is_empty());
        for d in &u.discs {
            let nearest = parents
                .iter()
                .map(|p| p.dist(d.center))
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= 0.1 + 1e-12);
        }
    }

    #[test]
    fn cluster_mean_count_within_three_sigma() {
        let w = unit_window();
        let (pi, mc, cr) = (8.0, 3.0, 0.08);
        let reps = 3000;
        let counts: Vec<f64> = (0..reps)
            .map(|seed| {
                sim_cluster(&w, pi, mc, cr, &FIXED_LAW, seed).unwrap().discs.len() as f64
            })
            .collect();
        let mean = counts.iter().sum::<f64>() / reps as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
        let se = (var / reps as f64).sqrt();
        let expected = pi * mc * w.area();
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "mean {mean} vs expected {expected} (se {se})"
        );
    }

    #[test]
    fn repulsive_thinning_rule() {
        // Single proposal is always retained.
        let keep = matern2_thin(&[(Point::new(0.5, 0.5), 0.3)], 0.2);
        assert_eq!(keep, vec![true]);

        let w = unit_window();
        let u = sim_repulsive(&w, 300.0, 0.1, &FIXED_LAW, 6).unwrap();
        assert!(!u.discs.is_empty());
        for (i, a) in u.discs.iter().enumerate() {
            for b in &u.discs[i + 1..] {
                assert!(a.center.dist(b.center) >= 0.1);
            }
        }
    }

    #[test]
    fn repulsive_retention_intensity_matches_matern_formula() {
        let w = unit_window();
        let (lambda, d) = (120.0, 0.06);
        let reps = 3000;
        let counts: Vec<f64> = (0..reps)
            .map(|seed| {
                sim_repulsive(&w, lambda, d, &FIXED_LAW, seed).unwrap().discs.len() as f64
            })
            .collect();
        let mean = counts.iter().sum::<f64>() / reps as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
        let se = (var / reps as f64).sqrt();
        let disc_area = std::f64::consts::PI * d * d;
        let expected = (1.0 - (-lambda * disc_area).exp()) / disc_area * w.area();
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "mean {mean} vs Matérn II intensity {expected} (se {se})"
        );
    }

    #[test]
    fn rasterize_empty_and_full() {
        let w = Window::new(4.0, 4.0, 40, 40).unwrap();
        let empty = rasterize(&DiscUnion::new(vec![], w).unwrap());
        assert_eq!(empty.foreground_count(), 0);

        let big = Disc::new(Point::new(2.0, 2.0), 10.0).unwrap();
        let full = rasterize(&DiscUnion::new(vec![big], w).unwrap());
        assert_eq!(full.foreground_count(), 40 * 40);
    }

    #[test]
    fn rasterize_disc_area() {
        // Unit disc at the center of [0,4]^2 at 400x400: the on-pixel
        // count approximates the disc area pi within 1%.
        let w = Window::new(4.0, 4.0, 400, 400).unwrap();
        let disc = Disc::new(Point::new(2.0, 2.0), 1.0).unwrap();
        let mask = rasterize(&DiscUnion::new(vec![disc], w).unwrap());
        let pixel_area = (4.0 / 400.0f64).powi(2);
        let measured = mask.foreground_count() as f64 * pixel_area;
        let expected = std::f64::consts::PI;
        assert!(
            (measured - expected).abs() < 0.01 * expected,
            "measured {measured} vs {expected}"
        );
    }

    #[test]
    fn boolean_coverage_fraction() {
        // 1 - exp(-lambda * pi * E[R^2]) within 2% over replications.
        let w = Window::new(1.0, 1.0, 100, 100).unwrap();
        let law = RadiusLaw::Uniform { lo: 0.03, hi: 0.06 };
        let intensity = 60.0;
        let reps = 200;
        let mut covered = 0usize;
        let mut total = 0usize;
        for seed in 0..reps {
            let mask = rasterize(&sim_boolean(&w, intensity, &law, seed).unwrap());
            covered += mask.foreground_count();
            total += 100 * 100;
        }
        let measured = covered as f64 / total as f64;
        let expected = 1.0 - (-intensity * std::f64::consts::PI * law.mean_square()).exp();
        assert!(
            (measured - expected).abs() < 0.02,
            "coverage {measured} vs {expected}"
        );
    }

    #[test]
    fn stationarity_left_right_halves() {
        let w = unit_window();
        let reps = 400;
        for process in 0..3 {
            let mut left = Vec::with_capacity(reps);
            let mut right = Vec::with_capacity(reps);
            for seed in 0..reps as u64 {
                let union = match process {
                    0 => sim_boolean(&w, 40.0, &FIXED_LAW, seed).unwrap(),
                    1 => sim_cluster(&w, 15.0, 3.0, 0.08, &FIXED_LAW, seed).unwrap(),
                    _ => sim_repulsive(&w, 150.0, 0.06, &FIXED_LAW, seed).unwrap(),
                };
                let mask = rasterize(&union);
                let half = mask.width() / 2;
                let mut l = 0usize;
                let mut r = 0usize;
                for (ix, _) in mask.foreground() {
                    if ix < half {
                        l += 1;
                    } else {
                        r += 1;
                    }
                }
                left.push(l as f64);
                right.push(r as f64);
            }
            let mean =
                |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let var = |v: &[f64], m: f64| {
                v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
            };
            let (ml, mr) = (mean(&left), mean(&right));
            let se = ((var(&left, ml) + var(&right, mr)) / reps as f64).sqrt();
            assert!(
                (ml - mr).abs() < 3.0 * se,
                "process {process}: halves {ml} vs {mr} (se {se})"
            );
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        let w = unit_window();
        assert!(sim_boolean(&w, 0.0, &FIXED_LAW, 1).is_err());
        assert!(sim_boolean(&w, 5.0, &RadiusLaw::Fixed { r: 0.0 }, 1).is_err());
        assert!(sim_boolean(&w, 5.0, &RadiusLaw::Uniform { lo: 0.2, hi: 0.1 }, 1).is_err());
        assert!(sim_cluster(&w, 5.0, -1.0, 0.1, &FIXED_LAW, 1).is_err());
        assert!(sim_repulsive(&w, 5.0, 0.0, &FIXED_LAW, 1).is_err());
    }
}
