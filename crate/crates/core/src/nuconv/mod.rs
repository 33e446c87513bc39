//! Grid-based evaluation of the dense repulsive field.
//!
//! The all-pairs sums Σ_j (1+‖y_i−y_j‖²)^{-s} (y_i − y_j) are factored
//! through an equispaced grid covering the point cloud: point masses are
//! spread onto nearby grid nodes with tensor-product Lagrange weights
//! (`s2g`), the grid-to-grid kernel convolution runs in transform space
//! (`g2g`), and field values are read back at the points with the same
//! weights (`g2s`). Cost per evaluation is O(n·wᵈ + |G| log |G|) instead
//! of O(n²).
//!
//! The same stencil is used for spreading and reading, so the grid
//! estimate of the normalization Σ_{i≠j} w_ij reduces to a dot product
//! between the spread mass field and its (1+r²)^{-1} convolution.

mod interp;

pub mod g2g;

pub use g2g::{dense_reference, ConvEngine, ConvKernel};

use interp::{lagrange_weights, support_base};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NuconvError {
    #[error("embedding dimension must be 1, 2, or 3, got {0}")]
    BadDim(usize),
    #[error("interpolation order must be even and between 2 and 8, got {0}")]
    BadOrder(usize),
    #[error("coordinate array length {len} is not a multiple of the dimension {d}")]
    RaggedCoords { len: usize, d: usize },
    #[error("no points to grid")]
    NoPoints,
    #[error("non-finite coordinate at point {index}")]
    NonFinite { index: usize },
    #[error("grid spacing override must be positive and finite")]
    BadSpacing,
    #[error("point {index} falls outside the planned grid")]
    OutsidePlannedGrid { index: usize },
    #[error("grid workspace has no binned points")]
    NotBinned,
    #[error("buffer length {got}, expected {want}")]
    SizeMismatch { got: usize, want: usize },
    #[error("repulsive field needs at least two points")]
    TooFewPoints,
    #[error("grid normalization estimate was not positive")]
    NonpositiveNormalization,
}

/// Fallback spacing when every point coincides and the extent gives no
/// scale to work with.
const DEGENERATE_H: f64 = 1e-4;

/// Controls how the grid is sized from the point cloud.
#[derive(Debug, Clone)]
pub struct GridConfig {
    /// Fixed grid spacing; overrides the extent-based rule.
    pub h_target: Option<f64>,
    /// Upper bound on the automatic spacing. Past the point where the
    /// extent-proportional rule reaches this cap, node count grows
    /// linearly with the extent instead of staying constant.
    pub h_max: f64,
    /// Automatic spacing is extent / this (before the `h_max` cap), so
    /// the grid keeps roughly this many cells across the cloud.
    pub extent_divisor: f64,
    /// Tensor Lagrange support width per axis; even, 2 to 8.
    pub interp_order: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            h_target: None,
            // the kernel varies on scale 1, so spacings much past 1
            // cannot resolve it
            h_max: 1.0,
            extent_divisor: 50.0,
            // order 6 reaches ~1e-6 field accuracy near h = 0.1 where
            // order 4 needs h below 0.07 for even 1e-5
            interp_order: 6,
        }
    }
}

fn max_nodes_per_axis(d: usize) -> usize {
    match d {
        1 => 8192,
        2 => 2048,
        _ => 512,
    }
}

/// Smallest integer ≥ n with no prime factor larger than 5; transform
/// lengths of this form stay on the fast FFT paths.
fn next_smooth_235(n: usize) -> usize {
    fn is_smooth(mut v: usize) -> bool {
        for p in [2usize, 3, 5] {
            while v % p == 0 {
                v /= p;
            }
        }
        v == 1
    }
    let mut v = n.max(1);
    while !is_smooth(v) {
        v += 1;
    }
    v
}

/// Axis-aligned node lattice: `dims[k]` nodes spaced `h[k]` apart
/// starting at `lo[k]`, first `d` entries meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    d: usize,
    dims: [usize; 3],
    h: [f64; 3],
    lo: [f64; 3],
}

impl GridGeometry {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims[..self.d]
    }

    pub fn h(&self) -> &[f64] {
        &self.h[..self.d]
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.d]
    }

    pub fn grid_len(&self) -> usize {
        self.dims().iter().product()
    }
}

fn check_points(y: &[f64], d: usize) -> Result<usize, NuconvError> {
    if !(1..=3).contains(&d) {
        return Err(NuconvError::BadDim(d));
    }
    if y.len() % d != 0 {
        return Err(NuconvError::RaggedCoords { len: y.len(), d });
    }
    let n = y.len() / d;
    if n == 0 {
        return Err(NuconvError::NoPoints);
    }
    if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
        return Err(NuconvError::NonFinite { index: pos / d });
    }
    Ok(n)
}

/// Sizes a grid over the bounding box of `y`, leaving `order/2` spare
/// cells on every side so each point's full stencil stays in range.
pub fn plan_grid(y: &[f64], d: usize, cfg: &GridConfig) -> Result<GridGeometry, NuconvError> {
    let n = check_points(y, d)?;
    let order = cfg.interp_order;
    if order < 2 || order > 8 || order % 2 != 0 {
        return Err(NuconvError::BadOrder(order));
    }
    if let Some(h) = cfg.h_target {
        if !(h.is_finite() && h > 0.0) {
            return Err(NuconvError::BadSpacing);
        }
    }

    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for i in 0..n {
        for k in 0..d {
            let v = y[i * d + k];
            min[k] = min[k].min(v);
            max[k] = max[k].max(v);
        }
    }
    let mut raw = [0.0f64; 3];
    let mut max_extent = 0.0f64;
    for k in 0..d {
        raw[k] = max[k] - min[k];
        max_extent = max_extent.max(raw[k]);
    }

    let mut h_target = cfg
        .h_target
        .unwrap_or_else(|| (max_extent / cfg.extent_divisor).min(cfg.h_max));
    if !(h_target > 0.0) {
        h_target = DEGENERATE_H;
    }

    let max_per = max_nodes_per_axis(d);
    let floor_nodes = (order + 2).max(8);
    let mut dims = [1usize; 3];
    let mut h = [0.0f64; 3];
    let mut lo = [0.0f64; 3];
    for k in 0..d {
        let cells = (raw[k] / h_target).ceil() as usize;
        let mut nodes = (cells + 1 + order).clamp(floor_nodes, max_per);
        nodes = next_smooth_235(nodes).min(max_per);
        let avail = (nodes - 1 - order) as f64;
        h[k] = h_target.max(raw[k] / avail);
        let span = (nodes - 1) as f64 * h[k];
        lo[k] = min[k] - (span - raw[k]) / 2.0;
        dims[k] = nodes;
    }

    Ok(GridGeometry { d, dims, h, lo })
}

/// Per-point stencil: base node and per-axis weights, stride 8 in `wts`.
#[inline]
fn stencil(
    geom: &GridGeometry,
    order: usize,
    y: &[f64],
    i: usize,
    bases: &mut [usize; 3],
    wts: &mut [f64; 24],
) -> Result<(), NuconvError> {
    let d = geom.d;
    for k in 0..d {
        let u = (y[i * d + k] - geom.lo[k]) / geom.h[k];
        if !u.is_finite() {
            return Err(NuconvError::NonFinite { index: i });
        }
        let b = support_base(u, order);
        if b < 0 || b as usize + order > geom.dims[k] {
            return Err(NuconvError::OutsidePlannedGrid { index: i });
        }
        bases[k] = b as usize;
        lagrange_weights(u - b as f64, order, &mut wts[k * 8..k * 8 + order]);
    }
    Ok(())
}

#[inline]
fn scatter_point(
    grid: &mut [f64],
    geom: &GridGeometry,
    order: usize,
    bases: &[usize; 3],
    wts: &[f64; 24],
    v: f64,
) {
    match geom.d {
        1 => {
            let row = &mut grid[bases[0]..bases[0] + order];
            for t in 0..order {
                row[t] += v * wts[t];
            }
        }
        2 => {
            let n1 = geom.dims[1];
            for t0 in 0..order {
                let a = v * wts[t0];
                let base = (bases[0] + t0) * n1 + bases[1];
                let row = &mut grid[base..base + order];
                for t1 in 0..order {
                    row[t1] += a * wts[8 + t1];
                }
            }
        }
        _ => {
            let n1 = geom.dims[1];
            let n2 = geom.dims[2];
            for t0 in 0..order {
                let a0 = v * wts[t0];
                let r0 = (bases[0] + t0) * n1;
                for t1 in 0..order {
                    let a = a0 * wts[8 + t1];
                    let base = (r0 + bases[1] + t1) * n2 + bases[2];
                    let row = &mut grid[base..base + order];
                    for t2 in 0..order {
                        row[t2] += a * wts[16 + t2];
                    }
                }
            }
        }
    }
}

#[inline]
fn gather_point(
    grid: &[f64],
    geom: &GridGeometry,
    order: usize,
    bases: &[usize; 3],
    wts: &[f64; 24],
) -> f64 {
    match geom.d {
        1 => {
            let row = &grid[bases[0]..bases[0] + order];
            let mut acc = 0.0;
            for t in 0..order {
                acc += row[t] * wts[t];
            }
            acc
        }
        2 => {
            let n1 = geom.dims[1];
            let mut acc = 0.0;
            for t0 in 0..order {
                let base = (bases[0] + t0) * n1 + bases[1];
                let row = &grid[base..base + order];
                let mut part = 0.0;
                for t1 in 0..order {
                    part += row[t1] * wts[8 + t1];
                }
                acc += part * wts[t0];
            }
            acc
        }
        _ => {
            let n1 = geom.dims[1];
            let n2 = geom.dims[2];
            let mut acc = 0.0;
            for t0 in 0..order {
                let r0 = (bases[0] + t0) * n1;
                let mut acc1 = 0.0;
                for t1 in 0..order {
                    let base = (r0 + bases[1] + t1) * n2 + bases[2];
                    let row = &grid[base..base + order];
                    let mut part = 0.0;
                    for t2 in 0..order {
                        part += row[t2] * wts[16 + t2];
                    }
                    acc1 += part * wts[8 + t1];
                }
                acc += acc1 * wts[t0];
            }
            acc
        }
    }
}

/// Kernel values at every signed stencil offset, (2·order-1)^d entries,
/// axis index δ_k + order - 1.
fn self_kernel_table(geom: &GridGeometry, order: usize, kernel: ConvKernel) -> Vec<f64> {
    let d = geom.d;
    let m = 2 * order - 1;
    let total = m.pow(d as u32);
    let mut tbl = vec![0.0; total];
    for (flat, v) in tbl.iter_mut().enumerate() {
        let mut rem = flat;
        let mut r2 = 0.0;
        for k in (0..d).rev() {
            let idx = rem % m;
            rem /= m;
            let delta = (idx as i64 - (order as i64 - 1)) as f64 * geom.h[k];
            r2 += delta * delta;
        }
        *v = match kernel {
            ConvKernel::CauchyPow1 => 1.0 / (1.0 + r2),
            ConvKernel::CauchyPow2 => {
                let w = 1.0 / (1.0 + r2);
                w * w
            }
        };
    }
    tbl
}

/// φᵀ·T·φ for one point's stencil weights: the contribution the grid
/// pipeline assigns to the point interacting with itself. Subtracting
/// this (rather than the analytic kernel value at zero) removes the
/// self-pair without leaving an O(interpolation error) residue per
/// point.
///
/// The weight product over node pairs factorizes per axis, so the double
/// sum collapses to the per-axis weight autocorrelations against the
/// offset table: (2·order-1)^d work instead of order^(2d).
#[inline]
fn self_energy(tbl: &[f64], d: usize, order: usize, wts: &[f64; 24]) -> f64 {
    let m = 2 * order - 1;
    let mut corr = [[0.0f64; 15]; 3];
    for k in 0..d {
        let w = &wts[k * 8..k * 8 + order];
        let c = &mut corr[k];
        for a in 0..order {
            for b in 0..order {
                c[a + order - 1 - b] += w[a] * w[b];
            }
        }
    }
    match d {
        1 => (0..m).map(|t| corr[0][t] * tbl[t]).sum(),
        2 => {
            let mut acc = 0.0;
            for t0 in 0..m {
                let w0 = corr[0][t0];
                let row = t0 * m;
                for t1 in 0..m {
                    acc += w0 * corr[1][t1] * tbl[row + t1];
                }
            }
            acc
        }
        _ => {
            let mut acc = 0.0;
            for t0 in 0..m {
                let w0 = corr[0][t0];
                for t1 in 0..m {
                    let w01 = w0 * corr[1][t1];
                    let row = (t0 * m + t1) * m;
                    for t2 in 0..m {
                        acc += w01 * corr[2][t2] * tbl[row + t2];
                    }
                }
            }
            acc
        }
    }
}

/// Repulsive-field evaluator: owns the grid geometry, the transform
/// engine, the locality permutation, and all grid-sized buffers, so the
/// per-iteration path allocates nothing once shapes stabilize.
pub struct GridWorkspace {
    cfg: GridConfig,
    geom: GridGeometry,
    n: usize,
    epoch: u64,
    /// Grid-major rank → index in the coordinates last passed to
    /// [`GridWorkspace::bin_points`].
    perm: Vec<u32>,
    engine: ConvEngine,
    field_a: Vec<f64>,
    field_b: Vec<f64>,
    conv_out: Vec<f64>,
    y_grid: Vec<f64>,
    frep_grid: Vec<f64>,
}

impl GridWorkspace {
    pub fn new(cfg: GridConfig) -> Self {
        GridWorkspace {
            cfg,
            geom: GridGeometry {
                d: 0,
                dims: [0; 3],
                h: [0.0; 3],
                lo: [0.0; 3],
            },
            n: 0,
            epoch: 0,
            perm: Vec::new(),
            engine: ConvEngine::new(),
            field_a: Vec::new(),
            field_b: Vec::new(),
            conv_out: Vec::new(),
            y_grid: Vec::new(),
            frep_grid: Vec::new(),
        }
    }

    pub fn config(&self) -> &GridConfig {
        &self.cfg
    }

    /// Geometry from the last [`GridWorkspace::bin_points`] call.
    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    /// Bumps every time the points are re-binned; consumers holding
    /// permutation-derived state use it to detect staleness.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid_len(&self) -> usize {
        self.geom.grid_len()
    }

    /// Grid-major rank → input index, from the last binning.
    pub fn perm(&self) -> &[u32] {
        &self.perm
    }

    /// Transient floats one convolution needs beyond its input and
    /// output grids.
    pub fn conv_scratch_len(&self) -> usize {
        self.engine.scratch_len()
    }

    fn ensure_binned(&self) -> Result<(), NuconvError> {
        if self.n == 0 {
            Err(NuconvError::NotBinned)
        } else {
            Ok(())
        }
    }

    /// Plans the grid over `y`, prepares transforms, and sorts points
    /// into grid-major cell order (stable within a cell).
    pub fn bin_points(&mut self, y: &[f64], d: usize) -> Result<(), NuconvError> {
        let geom = plan_grid(y, d, &self.cfg)?;
        let n = y.len() / d;
        let order = self.cfg.interp_order;
        self.engine.prepare(geom.dims(), geom.h());

        // cells of `order` grid steps per axis keep a whole stencil's
        // rows adjacent for points binned together
        let mut bins_per_axis = [1usize; 3];
        for k in 0..d {
            bins_per_axis[k] = (geom.dims[k] + order - 1) / order;
        }
        let nbins: usize = bins_per_axis[..d].iter().product();
        let mut bin_of = vec![0u32; n];
        for i in 0..n {
            let mut flat = 0usize;
            for k in 0..d {
                let u = (y[i * d + k] - geom.lo[k]) / geom.h[k];
                let cell = (u as usize) / order;
                flat = flat * bins_per_axis[k] + cell.min(bins_per_axis[k] - 1);
            }
            bin_of[i] = flat as u32;
        }
        let mut counts = vec![0usize; nbins + 1];
        for &b in &bin_of {
            counts[b as usize + 1] += 1;
        }
        for b in 0..nbins {
            counts[b + 1] += counts[b];
        }
        self.perm.resize(n, 0);
        for i in 0..n {
            let slot = &mut counts[bin_of[i] as usize];
            self.perm[*slot] = i as u32;
            *slot += 1;
        }

        let g = geom.grid_len();
        self.field_a.resize(g, 0.0);
        self.field_b.resize(g, 0.0);
        self.conv_out.resize(g, 0.0);
        self.geom = geom;
        self.n = n;
        self.epoch += 1;
        Ok(())
    }

    /// Spreads `values[i]` at `y` point i onto the planned grid.
    pub fn s2g(&self, y: &[f64], values: &[f64], out: &mut [f64]) -> Result<(), NuconvError> {
        self.ensure_binned()?;
        let d = self.geom.d;
        let n = check_points(y, d)?;
        if values.len() != n {
            return Err(NuconvError::SizeMismatch {
                got: values.len(),
                want: n,
            });
        }
        let g = self.geom.grid_len();
        if out.len() != g {
            return Err(NuconvError::SizeMismatch {
                got: out.len(),
                want: g,
            });
        }
        out.fill(0.0);
        let order = self.cfg.interp_order;
        let mut bases = [0usize; 3];
        let mut wts = [0.0f64; 24];
        for i in 0..n {
            stencil(&self.geom, order, y, i, &mut bases, &mut wts)?;
            scatter_point(out, &self.geom, order, &bases, &wts, values[i]);
        }
        Ok(())
    }

    /// Reads the grid field back at each `y` point.
    pub fn g2s(&self, y: &[f64], grid: &[f64], out: &mut [f64]) -> Result<(), NuconvError> {
        self.ensure_binned()?;
        let d = self.geom.d;
        let n = check_points(y, d)?;
        let g = self.geom.grid_len();
        if grid.len() != g {
            return Err(NuconvError::SizeMismatch {
                got: grid.len(),
                want: g,
            });
        }
        if out.len() != n {
            return Err(NuconvError::SizeMismatch {
                got: out.len(),
                want: n,
            });
        }
        let order = self.cfg.interp_order;
        let mut bases = [0usize; 3];
        let mut wts = [0.0f64; 24];
        for i in 0..n {
            stencil(&self.geom, order, y, i, &mut bases, &mut wts)?;
            out[i] = gather_point(grid, &self.geom, order, &bases, &wts);
        }
        Ok(())
    }

    /// Kernel convolution over the planned grid.
    pub fn g2g_apply(
        &mut self,
        input: &[f64],
        kernel: ConvKernel,
        out: &mut [f64],
    ) -> Result<(), NuconvError> {
        self.ensure_binned()?;
        let g = self.geom.grid_len();
        if input.len() != g {
            return Err(NuconvError::SizeMismatch {
                got: input.len(),
                want: g,
            });
        }
        if out.len() != g {
            return Err(NuconvError::SizeMismatch {
                got: out.len(),
                want: g,
            });
        }
        self.engine.apply(input, out, kernel);
        Ok(())
    }

    /// Repulsive field for points already in grid-major order (the order
    /// of [`GridWorkspace::perm`]); `frep` comes back in that same order.
    /// Returns the normalization estimate Σ_{i≠j} (1+‖y_i−y_j‖²)^{-1}.
    pub fn repulsive_from_grid_order(
        &mut self,
        y: &[f64],
        frep: &mut [f64],
    ) -> Result<f64, NuconvError> {
        self.ensure_binned()?;
        let d = self.geom.d;
        let n = self.n;
        if n < 2 {
            return Err(NuconvError::TooFewPoints);
        }
        if y.len() != n * d {
            return Err(NuconvError::SizeMismatch {
                got: y.len(),
                want: n * d,
            });
        }
        if frep.len() != n * d {
            return Err(NuconvError::SizeMismatch {
                got: frep.len(),
                want: n * d,
            });
        }
        let order = self.cfg.interp_order;
        let mut mass = std::mem::take(&mut self.field_a);
        let mut coord = std::mem::take(&mut self.field_b);
        let mut conv = std::mem::take(&mut self.conv_out);
        let result = (|| {
            let mut bases = [0usize; 3];
            let mut wts = [0.0f64; 24];

            let tbl = self_kernel_table(&self.geom, order, ConvKernel::CauchyPow1);
            let mut self_sum = 0.0;
            mass.fill(0.0);
            for i in 0..n {
                stencil(&self.geom, order, y, i, &mut bases, &mut wts)?;
                scatter_point(&mut mass, &self.geom, order, &bases, &wts, 1.0);
                self_sum += self_energy(&tbl, d, order, &wts);
            }

            // Σ_i gather_i(T1·mass) = ⟨mass, T1·mass⟩, then drop the
            // grid's own self-pair contributions
            self.engine.apply(&mass, &mut conv, ConvKernel::CauchyPow1);
            let mut z = -self_sum;
            for (a, c) in mass.iter().zip(&conv) {
                z += a * c;
            }
            if !(z > 0.0) {
                return Err(NuconvError::NonpositiveNormalization);
            }

            self.engine.apply(&mass, &mut conv, ConvKernel::CauchyPow2);
            for i in 0..n {
                stencil(&self.geom, order, y, i, &mut bases, &mut wts)?;
                let s2 = gather_point(&conv, &self.geom, order, &bases, &wts);
                for k in 0..d {
                    frep[i * d + k] = y[i * d + k] * s2;
                }
            }

            for k in 0..d {
                coord.fill(0.0);
                for i in 0..n {
                    stencil(&self.geom, order, y, i, &mut bases, &mut wts)?;
                    scatter_point(&mut coord, &self.geom, order, &bases, &wts, y[i * d + k]);
                }
                self.engine.apply(&coord, &mut conv, ConvKernel::CauchyPow2);
                for i in 0..n {
                    stencil(&self.geom, order, y, i, &mut bases, &mut wts)?;
                    frep[i * d + k] -= gather_point(&conv, &self.geom, order, &bases, &wts);
                }
            }

            let scale = 4.0 / z;
            for v in frep.iter_mut() {
                *v *= scale;
            }
            Ok(z)
        })();
        self.field_a = mass;
        self.field_b = coord;
        self.conv_out = conv;
        result
    }

    /// Grid estimate of Σ_{i≠j} (1+‖y_i−y_j‖²)^{-1} alone; re-bins `y`.
    pub fn normalization(&mut self, y: &[f64], d: usize) -> Result<f64, NuconvError> {
        self.bin_points(y, d)?;
        let n = self.n;
        if n < 2 {
            return Err(NuconvError::TooFewPoints);
        }
        let order = self.cfg.interp_order;
        let mut mass = std::mem::take(&mut self.field_a);
        let mut conv = std::mem::take(&mut self.conv_out);
        let result = (|| {
            let mut bases = [0usize; 3];
            let mut wts = [0.0f64; 24];
            let tbl = self_kernel_table(&self.geom, order, ConvKernel::CauchyPow1);
            let mut self_sum = 0.0;
            mass.fill(0.0);
            for i in 0..n {
                stencil(&self.geom, order, y, i, &mut bases, &mut wts)?;
                scatter_point(&mut mass, &self.geom, order, &bases, &wts, 1.0);
                self_sum += self_energy(&tbl, d, order, &wts);
            }
            self.engine.apply(&mass, &mut conv, ConvKernel::CauchyPow1);
            let mut z = -self_sum;
            for (a, c) in mass.iter().zip(&conv) {
                z += a * c;
            }
            if !(z > 0.0) {
                return Err(NuconvError::NonpositiveNormalization);
            }
            Ok(z)
        })();
        self.field_a = mass;
        self.conv_out = conv;
        result
    }

    /// One-call repulsive field: bins `y`, evaluates in grid order for
    /// locality, and returns `frep` in the order of `y`.
    pub fn repulsive_term(
        &mut self,
        y: &[f64],
        d: usize,
        frep: &mut [f64],
    ) -> Result<f64, NuconvError> {
        self.bin_points(y, d)?;
        let n = self.n;
        if frep.len() != n * d {
            return Err(NuconvError::SizeMismatch {
                got: frep.len(),
                want: n * d,
            });
        }
        let mut yg = std::mem::take(&mut self.y_grid);
        let mut fg = std::mem::take(&mut self.frep_grid);
        yg.resize(n * d, 0.0);
        fg.resize(n * d, 0.0);
        for (rank, &src) in self.perm.iter().enumerate() {
            let src = src as usize;
            yg[rank * d..rank * d + d].copy_from_slice(&y[src * d..src * d + d]);
        }
        let result = self.repulsive_from_grid_order(&yg, &mut fg);
        if result.is_ok() {
            for (rank, &src) in self.perm.iter().enumerate() {
                let src = src as usize;
                frep[src * d..src * d + d].copy_from_slice(&fg[rank * d..rank * d + d]);
            }
        }
        self.y_grid = yg;
        self.frep_grid = fg;
        result
    }
}
