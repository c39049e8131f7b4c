//! The two-realisation pipeline: cover a raster realisation with a maximal
//! Poisson-disc sample, build the Voronoi tessellation of the centers,
//! intersect cells with the covering discs, sample non-neighbouring cells,
//! extract support vectors, and run a two-sample kernel test.
//!
//! Coordinates are pixel units: the window is `[0, width] × [0, height]`
//! and the center of pixel `(ix, iy)` is `(ix + 0.5, iy + 0.5)`.

use crate::error::{Error, Result};
use crate::geometry::{
    clip_tagged, disc_to_polygon, rectangle, support_polygon, AngleGrid, ConvexBody, Disc, Point,
    SupportVector, MERGE_EPS,
};
use crate::hyptest::{permutation_test, split_test, TestResult, UniTest};
use crate::kernels::KernelSpec;
use crate::nstat::SampleSet;
use crate::pointproc::RasterMask;
use crate::rng::{derive_seed, stream_rng};
use rand::seq::SliceRandom;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Where the origin of each piece sits before support evaluation.
///
/// The support function is origin-dependent, so this choice materially
/// affects what the test is sensitive to: `Generator` (the covering-disc
/// center, the default) guarantees a strictly interior origin and hence
/// positive support values; `Centroid` recentres each piece on its own
/// centroid. The policy is recorded in result metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OriginPolicy {
    Generator,
    Centroid,
}

/// Covering parameters of the approximation stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverConfig {
    /// Covering-disc radius in pixels.
    pub radius: f64,
    /// Number of polygon edges approximating a covering disc.
    pub disc_poly_k: usize,
    pub origin_policy: OriginPolicy,
}

impl CoverConfig {
    pub fn new(radius: f64) -> Self {
        CoverConfig {
            radius,
            disc_poly_k: 64,
            origin_policy: OriginPolicy::Generator,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::RadiusTooSmall(self.radius));
        }
        if self.disc_poly_k < 16 {
            return Err(Error::DiscPolygonTooCoarse(self.disc_poly_k));
        }
        Ok(())
    }
}

/// Voronoi tessellation of the cover centers, clipped to the window.
#[derive(Debug, Clone, Serialize)]
pub struct Tessellation {
    pub centers: Vec<Point>,
    pub cells: Vec<ConvexBody>,
    /// Sorted neighbor lists; symmetric and irreflexive.
    pub adjacency: Vec<Vec<usize>>,
    pub window: (f64, f64),
}

impl Tessellation {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn are_neighbours(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }
}

/// Spatial hash over points with cell size `radius / sqrt(2)`.
struct GridIndex {
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
    points: Vec<Point>,
}

impl GridIndex {
    fn new(width: f64, height: f64, radius: f64) -> Self {
        let cell = radius / std::f64::consts::SQRT_2;
        let nx = (width / cell).ceil().max(1.0) as usize;
        let ny = (height / cell).ceil().max(1.0) as usize;
        GridIndex {
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
            points: Vec::new(),
        }
    }

    fn bucket_of(&self, p: Point) -> (usize, usize) {
        let bx = ((p.x / self.cell) as usize).min(self.nx - 1);
        let by = ((p.y / self.cell) as usize).min(self.ny - 1);
        (bx, by)
    }

    fn insert(&mut self, p: Point) {
        let idx = self.points.len();
        self.points.push(p);
        let (bx, by) = self.bucket_of(p);
        self.buckets[by * self.nx + bx].push(idx);
    }

    /// Squared distance to the nearest stored point, searching buckets
    /// within the given world radius.
    fn nearest_within(&self, p: Point, radius: f64) -> Option<f64> {
        let reach = (radius / self.cell).ceil() as isize + 1;
        let (bx, by) = self.bucket_of(p);
        let mut best: Option<f64> = None;
        for dy in -reach..=reach {
            let y = by as isize + dy;
            if y < 0 || y >= self.ny as isize {
                continue;
            }
            for dx in -reach..=reach {
                let x = bx as isize + dx;
                if x < 0 || x >= self.nx as isize {
                    continue;
                }
                for &i in &self.buckets[y as usize * self.nx + x as usize] {
                    let diff = self.points[i] - p;
                    let d2 = diff.dot(diff);
                    if best.is_none_or(|b| d2 < b) {
                        best = Some(d2);
                    }
                }
            }
        }
        best.filter(|&d2| d2 <= radius * radius)
    }
}

/// Maximal Poisson-disc cover of the foreground: centers are foreground
/// pixel centers with pairwise distances >= R, and every foreground pixel
/// center is within R of some center.
///
/// Seeded dart throwing over the shuffled foreground pixels establishes
/// the blue-noise bulk; a deterministic row-major sweep then inserts a
/// center at any still-uncovered pixel (such a pixel is automatically
/// admissible), iterated to a fixpoint.
pub fn poisson_disc_cover(mask: &RasterMask, radius: f64, seed: u64) -> Result<Vec<Point>> {
    if radius < 1.0 || !radius.is_finite() {
        return Err(Error::RadiusTooSmall(radius));
    }
    let foreground: Vec<Point> = mask
        .foreground()
        .map(|(ix, iy)| Point::new(ix as f64 + 0.5, iy as f64 + 0.5))
        .collect();
    if foreground.is_empty() {
        return Err(Error::NothingToCover);
    }

    let width = mask.width() as f64;
    let height = mask.height() as f64;
    let mut index = GridIndex::new(width, height, radius);
    let r2 = radius * radius;

    let mut order: Vec<usize> = (0..foreground.len()).collect();
    order.shuffle(&mut stream_rng(seed, 0));
    for &i in &order {
        let p = foreground[i];
        let too_close = index
            .nearest_within(p, radius)
            .is_some_and(|d2| d2 < r2 - 1e-9);
        if !too_close {
            index.insert(p);
        }
    }

    // Maximality sweep: insert any uncovered pixel, repeat to fixpoint.
    loop {
        let mut inserted = false;
        for &p in &foreground {
            let covered = index.nearest_within(p, radius).is_some();
            if !covered {
                index.insert(p);
                inserted = true;
            }
        }
        if !inserted {
            break;
        }
    }
    Ok(index.points)
}

const WINDOW_TAG: usize = usize::MAX;

fn voronoi_cell(
    i: usize,
    centers: &[Point],
    width: f64,
    height: f64,
) -> Result<(ConvexBody, Vec<usize>)> {
    let ci = centers[i];
    let window = rectangle(0.0, 0.0, width, height);
    let mut poly: Vec<(Point, usize)> = window
        .vertices()
        .iter()
        .map(|&v| (v, WINDOW_TAG))
        .collect();

    // Nearest bisectors first, with a deterministic tie break, so the
    // early exit below fires as soon as possible.
    let mut others: Vec<(f64, usize)> = (0..centers.len())
        .filter(|&j| j != i)
        .map(|j| {
            let d = centers[j] - ci;
            (d.dot(d), j)
        })
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut max_r2 = poly
        .iter()
        .map(|(v, _)| (*v - ci).dot(*v - ci))
        .fold(0.0, f64::max);
    for &(d2, j) in &others {
        // A bisector at distance d/2 beyond every current vertex cannot
        // cut the cell, and the remaining centers are farther still.
        if d2 / 4.0 > max_r2 {
            break;
        }
        let mid = (ci + centers[j]) * 0.5;
        let inward = ci - centers[j];
        poly = clip_tagged(&poly, mid, inward, j)
            .ok_or_else(|| Error::InvalidProcess("voronoi cell collapsed".into()))?;
        max_r2 = poly
            .iter()
            .map(|(v, _)| (*v - ci).dot(*v - ci))
            .fold(0.0, f64::max);
    }

    // Merge near-duplicate vertices; a vanishing edge hands its tag role
    // to the survivor's outgoing edge.
    let mut merged: Vec<(Point, usize)> = Vec::with_capacity(poly.len());
    for (v, tag) in poly {
        match merged.last_mut() {
            Some(last) if last.0.dist(v) <= MERGE_EPS => last.1 = tag,
            _ => merged.push((v, tag)),
        }
    }
    while merged.len() > 1 && merged[0].0.dist(merged.last().unwrap().0) <= MERGE_EPS {
        merged.pop();
    }

    let mut neighbours: Vec<usize> = Vec::new();
    let n = merged.len();
    for k in 0..n {
        let (v, tag) = merged[k];
        let (next, _) = merged[(k + 1) % n];
        if tag != WINDOW_TAG && v.dist(next) > MERGE_EPS {
            neighbours.push(tag);
        }
    }
    neighbours.sort_unstable();
    neighbours.dedup();

    let body = ConvexBody::new(merged.into_iter().map(|(v, _)| v).collect())?;
    Ok((body, neighbours))
}

/// Voronoi tessellation over the centers, clipped to the window
/// `[0, width] × [0, height]`. Cell `i` is the window rectangle cut by the
/// perpendicular bisector half-plane against every other center (nearest
/// first, with an early exit once no remaining bisector can reach the
/// cell). Adjacency records bisectors that contribute an edge of positive
/// length, symmetrized.
pub fn voronoi(centers: &[Point], width: f64, height: f64) -> Result<Tessellation> {
    let cells = voronoi_cells_collect(centers, width, height, true)?;
    finish_tessellation(centers, width, height, cells)
}

/// Sequential Voronoi construction; bit-identical to [`voronoi`].
pub fn voronoi_seq(centers: &[Point], width: f64, height: f64) -> Result<Tessellation> {
    let cells = voronoi_cells_collect(centers, width, height, false)?;
    finish_tessellation(centers, width, height, cells)
}

fn voronoi_cells_collect(
    centers: &[Point],
    width: f64,
    height: f64,
    parallel: bool,
) -> Result<Vec<(ConvexBody, Vec<usize>)>> {
    if centers.is_empty() {
        return Err(Error::NothingToCover);
    }
    {
        let mut seen = std::collections::HashSet::new();
        for c in centers {
            if !seen.insert((c.x.to_bits(), c.y.to_bits())) {
                return Err(Error::DuplicateCenters);
            }
        }
    }
    #[cfg(feature = "parallel")]
    if parallel {
        return (0..centers.len())
            .into_par_iter()
            .map(|i| voronoi_cell(i, centers, width, height))
            .collect();
    }
    let _ = parallel;
    (0..centers.len())
        .map(|i| voronoi_cell(i, centers, width, height))
        .collect()
}

fn finish_tessellation(
    centers: &[Point],
    width: f64,
    height: f64,
    cells: Vec<(ConvexBody, Vec<usize>)>,
) -> Result<Tessellation> {
    let n = cells.len();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, (_, neighbours)) in cells.iter().enumerate() {
        for &j in neighbours {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
    }
    for (i, adj) in adjacency.iter_mut().enumerate() {
        adj.sort_unstable();
        adj.dedup();
        adj.retain(|&j| j != i);
    }
    Ok(Tessellation {
        centers: centers.to_vec(),
        cells: cells.into_iter().map(|(body, _)| body).collect(),
        adjacency,
        window: (width, height),
    })
}

/// Cell ∩ covering-disc pieces, indexed by cell. A piece that collapses
/// to nothing (possible only through floating-point degeneracy at ragged
/// boundaries) is recorded in `dropped` and excluded from sampling.
#[derive(Debug, Clone)]
pub struct PieceSet {
    bodies: Vec<Option<ConvexBody>>,
    dropped: Vec<usize>,
}

impl PieceSet {
    pub fn body(&self, cell: usize) -> Option<&ConvexBody> {
        self.bodies[cell].as_ref()
    }

    /// The surviving pieces in cell order.
    pub fn bodies(&self) -> impl Iterator<Item = &ConvexBody> {
        self.bodies.iter().flatten()
    }

    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    pub fn len(&self) -> usize {
        self.bodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bodies.is_empty()
    }
}

/// Intersect every cell with the polygonal approximation of its covering
/// disc (regular `disc_poly_k`-gon of the cover radius around the cell's
/// generator), by iterated half-plane clipping against the k-gon edges.
pub fn clip_cells_to_discs(t: &Tessellation, cfg: &CoverConfig) -> Result<PieceSet> {
    cfg.validate()?;
    let mut bodies = Vec::with_capacity(t.len());
    let mut dropped = Vec::new();
    for (i, cell) in t.cells.iter().enumerate() {
        let disc = Disc::new(t.centers[i], cfg.radius)?;
        let kgon = disc_to_polygon(&disc, cfg.disc_poly_k)?;
        let mut piece = Some(cell.clone());
        let verts = kgon.vertices();
        for e in 0..verts.len() {
            let a = verts[e];
            let b = verts[(e + 1) % verts.len()];
            let edge = b - a;
            let inward = Point::new(-edge.y, edge.x);
            piece = match piece {
                Some(p) => crate::geometry::clip_halfplane(&p, a, inward),
                None => None,
            };
            if piece.is_none() {
                break;
            }
        }
        match piece {
            Some(p) => bodies.push(Some(p)),
            None => {
                bodies.push(None);
                dropped.push(i);
            }
        }
    }
    Ok(PieceSet { bodies, dropped })
}

/// Seeded greedy independent set: walk the cells in a uniformly shuffled
/// order, accept a cell iff it is not adjacent to any accepted cell, stop
/// after `m` acceptances.
pub fn sample_noneighbour_cells(t: &Tessellation, m: usize, seed: u64) -> Result<Vec<usize>> {
    sample_noneighbour_filtered(t, m, None, seed)
}

fn sample_noneighbour_filtered(
    t: &Tessellation,
    m: usize,
    eligible: Option<&[bool]>,
    seed: u64,
) -> Result<Vec<usize>> {
    if m < 1 {
        return Err(Error::InsufficientCells);
    }
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.shuffle(&mut stream_rng(seed, 0));
    let mut accepted: Vec<usize> = Vec::with_capacity(m);
    let mut blocked = vec![false; t.len()];
    for idx in order {
        if blocked[idx] || eligible.is_some_and(|e| !e[idx]) {
            continue;
        }
        accepted.push(idx);
        if accepted.len() == m {
            return Ok(accepted);
        }
        blocked[idx] = true;
        for &j in &t.adjacency[idx] {
            blocked[j] = true;
        }
    }
    Err(Error::InsufficientCells)
}

/// Translate each chosen piece so its origin (per the policy) sits at the
/// coordinate origin, then evaluate the support function on the grid.
/// Output order matches the order of `chosen`.
pub fn extract_support_sample(
    t: &Tessellation,
    pieces: &PieceSet,
    chosen: &[usize],
    grid: &AngleGrid,
    cfg: &CoverConfig,
) -> Result<Vec<SupportVector>> {
    chosen
        .iter()
        .map(|&cell| {
            let body = pieces.body(cell).ok_or(Error::EmptyPiece)?;
            let origin = match cfg.origin_policy {
                OriginPolicy::Generator => t.centers[cell],
                OriginPolicy::Centroid => body.centroid(),
            };
            let centered = body.translated(-origin);
            Ok(support_polygon(&centered, grid))
        })
        .collect()
}

/// Which test the pipeline dispatches to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    Permutation { s: usize },
    SplitKs,
    SplitAd,
}

/// Full parameter set of [`two_realisation_test`].
#[derive(Debug, Clone)]
pub struct TwoRealisationConfig {
    pub radius: f64,
    /// Number of non-neighbouring cells sampled from each realisation.
    pub m: usize,
    /// Number of support directions.
    pub n: usize,
    pub kernel: KernelSpec,
    pub method: MethodSpec,
    pub seed: u64,
    pub disc_poly_k: usize,
    pub origin_policy: OriginPolicy,
}

impl TwoRealisationConfig {
    pub fn new(
        radius: f64,
        m: usize,
        n: usize,
        kernel: KernelSpec,
        method: MethodSpec,
        seed: u64,
    ) -> Self {
        TwoRealisationConfig {
            radius,
            m,
            n,
            kernel,
            method,
            seed,
            disc_poly_k: 64,
            origin_policy: OriginPolicy::Generator,
        }
    }

    fn cover(&self) -> CoverConfig {
        CoverConfig {
            radius: self.radius,
            disc_poly_k: self.disc_poly_k,
            origin_policy: self.origin_policy,
        }
    }
}

/// Test outcome plus pipeline provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineResult {
    #[serde(flatten)]
    pub test: TestResult,
    pub radius: f64,
    pub m: usize,
    pub n: usize,
    pub origin_policy: OriginPolicy,
    /// Cover centers per realisation.
    pub centers: (usize, usize),
}

// Stage tags for deriving stage seeds from the master seed.
const STAGE_COVER_A: u64 = 1;
const STAGE_COVER_B: u64 = 2;
const STAGE_SAMPLE_A: u64 = 3;
const STAGE_SAMPLE_B: u64 = 4;
const STAGE_TEST: u64 = 5;

fn realisation_support(
    mask: &RasterMask,
    cfg: &TwoRealisationConfig,
    cover_seed: u64,
    sample_seed: u64,
) -> Result<(Vec<SupportVector>, usize)> {
    let centers = poisson_disc_cover(mask, cfg.radius, cover_seed)?;
    let t = voronoi(&centers, mask.width() as f64, mask.height() as f64)?;
    let pieces = clip_cells_to_discs(&t, &cfg.cover())?;
    let eligible: Vec<bool> = (0..t.len()).map(|i| pieces.body(i).is_some()).collect();
    let chosen = sample_noneighbour_filtered(&t, cfg.m, Some(&eligible), sample_seed)?;
    let grid = AngleGrid::new(cfg.n)?;
    let support = extract_support_sample(&t, &pieces, &chosen, &grid, &cfg.cover())?;
    Ok((support, centers.len()))
}

/// Run the whole §-style two-realisation procedure: cover, tessellate,
/// clip, sample `m` non-neighbouring cells, extract support vectors, and
/// test. The covering radius must be shared between the realisations
/// (callers comparing different processes pass the smaller of the two
/// per-process radii).
pub fn two_realisation_test(
    mask1: &RasterMask,
    mask2: &RasterMask,
    cfg: &TwoRealisationConfig,
) -> Result<PipelineResult> {
    let (support_a, centers_a) = realisation_support(
        mask1,
        cfg,
        derive_seed(cfg.seed, STAGE_COVER_A),
        derive_seed(cfg.seed, STAGE_SAMPLE_A),
    )?;
    let (support_b, centers_b) = realisation_support(
        mask2,
        cfg,
        derive_seed(cfg.seed, STAGE_COVER_B),
        derive_seed(cfg.seed, STAGE_SAMPLE_B),
    )?;
    let set = SampleSet::new(support_a, support_b)?;
    let test_seed = derive_seed(cfg.seed, STAGE_TEST);
    let test = match cfg.method {
        MethodSpec::Permutation { s } => permutation_test(&set, &cfg.kernel, s, test_seed)?,
        MethodSpec::SplitKs => split_test(&set, &cfg.kernel, UniTest::Ks, test_seed)?,
        MethodSpec::SplitAd => split_test(&set, &cfg.kernel, UniTest::Ad, test_seed)?,
    };
    Ok(PipelineResult {
        test,
        radius: cfg.radius,
        m: cfg.m,
        n: cfg.n,
        origin_policy: cfg.origin_policy,
        centers: (centers_a, centers_b),
    })
}
