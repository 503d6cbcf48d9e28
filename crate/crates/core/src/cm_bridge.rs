//! Continuum-model side of the reconstruction: a discretized
//! current-density forward map on the disk, the boundary projection
//! operators connecting electrode data to boundary densities, and the
//! electrode-count convergence experiment.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::exec;
use crate::fem::{BasisKind, Conductivity, ContactImpedance, MeasurementMatrix};
use crate::linsys::{Factorized, TripletBuilder};
use crate::mesh::Mesh;
use crate::spectral::{self, TestMatrix};
use crate::synthdata::Phantom;

/// Default number of uniform boundary quadrature points.
pub const DEFAULT_GRID: usize = 4096;

/// Trigonometric boundary current densities: `p/2` cosine modes followed by
/// `p/2` sine modes, normalized to unit norm on the boundary circle.
#[derive(Debug, Clone)]
pub struct CmCurrentBasis {
    p: usize,
}

impl CmCurrentBasis {
    pub fn new(p: usize) -> Result<Self> {
        if p < 2 || p % 2 != 0 {
            return Err(Error::Basis(format!("density count must be even and >= 2, got {p}")));
        }
        Ok(CmCurrentBasis { p })
    }

    pub fn len(&self) -> usize {
        self.p
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Evaluates density `m` at boundary angle `theta`.
    pub fn density(&self, m: usize, theta: f64) -> f64 {
        let norm = 1.0 / std::f64::consts::PI.sqrt();
        if m < self.p / 2 {
            let freq = (m + 1) as f64;
            norm * (freq * theta).cos()
        } else {
            let freq = (m + 1 - self.p / 2) as f64;
            norm * (freq * theta).sin()
        }
    }

    /// Indices of the densities with frequency at most `max_freq`, cosine
    /// block first.
    pub fn indices_up_to_frequency(&self, max_freq: usize) -> Vec<usize> {
        let half = self.p / 2;
        let lim = max_freq.min(half);
        let mut idx: Vec<usize> = (0..lim).collect();
        idx.extend((0..lim).map(|m| half + m));
        idx
    }
}

/// Factorized Neumann problem for one conductivity, with the zero-mean
/// boundary trace constraint.
pub struct CmSystem {
    factorized: Factorized,
    n_nodes: usize,
}

/// Assembles and factorizes the conductivity equation with natural boundary
/// data on the polygonal disk.
pub fn assemble_cm_system(mesh: &Mesh, gamma: &Conductivity) -> Result<CmSystem> {
    let n = mesh.n_nodes();
    if gamma.values().len() != mesh.n_triangles() {
        return Err(Error::Dimension(format!(
            "conductivity has {} values for {} triangles",
            gamma.values().len(),
            mesh.n_triangles()
        )));
    }
    let mut builder = TripletBuilder::new(n + 1);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [a, b, c] = [mesh.nodes()[tri[0]], mesh.nodes()[tri[1]], mesh.nodes()[tri[2]]];
        let area = mesh.areas()[t];
        let bx = [b.y - c.y, c.y - a.y, a.y - b.y];
        let by = [c.x - b.x, a.x - c.x, b.x - a.x];
        let coef = gamma.values()[t] / (4.0 * area);
        for i in 0..3 {
            for j in 0..3 {
                builder.add(tri[i], tri[j], coef * (bx[i] * bx[j] + by[i] * by[j]));
            }
        }
    }
    // Zero-mean trace constraint, weighted by the boundary mass of each node.
    for e in mesh.boundary_edges() {
        let len = e.length(mesh);
        for &v in &e.nodes {
            builder.add(n, v, len / 2.0);
            builder.add(v, n, len / 2.0);
        }
    }
    Ok(CmSystem {
        factorized: Factorized::new(builder.build()?)?,
        n_nodes: n,
    })
}

/// Two-point Gauss load vector of a boundary density.
fn density_load(mesh: &Mesh, basis: &CmCurrentBasis, m: usize) -> Vec<f64> {
    let tau = 2.0 * std::f64::consts::PI;
    let mut b = vec![0.0; mesh.n_nodes() + 1];
    let gauss_t = [0.5 - 0.5 / 3.0_f64.sqrt(), 0.5 + 0.5 / 3.0_f64.sqrt()];
    for e in mesh.boundary_edges() {
        let len = e.length(mesh);
        let [ta, mut tb] = e.theta;
        if tb < ta {
            tb += tau;
        }
        for &t in &gauss_t {
            let theta = ta + t * (tb - ta);
            let f = basis.density(m, theta);
            let w = 0.5 * len * f;
            b[e.nodes[0]] += w * (1.0 - t);
            b[e.nodes[1]] += w * t;
        }
    }
    b
}

/// Cached forward solves for every density of a basis at one conductivity.
pub struct CmForward {
    pub basis: CmCurrentBasis,
    /// Nodal solutions, one column per density.
    pub nodal: DMatrix<f64>,
    /// Boundary load vectors, one column per density (multiplier row dropped).
    pub loads: DMatrix<f64>,
    /// Gram matrix of the current-to-voltage map on the density span.
    pub gram: DMatrix<f64>,
}

/// Solves the forward problem for every density and assembles the Gram
/// matrix of the boundary map on the density span.
pub fn cm_forward_nd(mesh: &Mesh, gamma: &Conductivity, basis: &CmCurrentBasis) -> Result<CmForward> {
    let system = assemble_cm_system(mesh, gamma)?;
    let p = basis.len();
    let n = system.n_nodes;
    let results: Vec<Result<(Vec<f64>, Vec<f64>)>> = exec::map_indexed(p, |m| {
        let load = density_load(mesh, basis, m);
        let x = system.factorized.solve(&load)?;
        Ok((load, x))
    });
    let mut nodal = DMatrix::zeros(n, p);
    let mut loads = DMatrix::zeros(n, p);
    for (m, r) in results.into_iter().enumerate() {
        let (load, x) = r?;
        for i in 0..n {
            loads[(i, m)] = load[i];
            nodal[(i, m)] = x[i];
        }
    }
    // Gram entries <map f_l, f_m> = b_m . u_l; exactly symmetric up to
    // solver roundoff, symmetrized for downstream spectral use.
    let raw = loads.transpose() * &nodal;
    let gram = (&raw + raw.transpose()).scale(0.5);
    Ok(CmForward {
        basis: basis.clone(),
        nodal,
        loads,
        gram,
    })
}

/// Per-triangle gradients of every cached density solution.
pub struct CmGradientTable {
    /// `2 p` interleaved gradient components per triangle.
    grads: Vec<f64>,
    areas: Vec<f64>,
    p: usize,
}

impl CmForward {
    pub fn gradient_table(&self, mesh: &Mesh) -> CmGradientTable {
        let p = self.basis.len();
        let n_tri = mesh.n_triangles();
        let per_col: Vec<Vec<[f64; 2]>> = exec::map_indexed(p, |m| {
            let nodal = DVector::from_iterator(mesh.n_nodes(), self.nodal.column(m).iter().copied());
            crate::fem::potential_gradients(mesh, &nodal)
        });
        let mut grads = vec![0.0; n_tri * 2 * p];
        for t in 0..n_tri {
            for m in 0..p {
                grads[t * 2 * p + 2 * m] = per_col[m][t][0];
                grads[t * 2 * p + 2 * m + 1] = per_col[m][t][1];
            }
        }
        CmGradientTable {
            grads,
            areas: mesh.areas().to_vec(),
            p,
        }
    }
}

impl CmGradientTable {
    pub fn p(&self) -> usize {
        self.p
    }

    /// Weighted energy Gram over triangles: sum of `w_t area_t g g^T`.
    pub fn weighted_energy(&self, triangles: impl Iterator<Item = (usize, f64)>) -> DMatrix<f64> {
        let p = self.p;
        let mut m = DMatrix::zeros(p, p);
        for (t, w) in triangles {
            let coef = w * self.areas[t];
            let g = &self.grads[t * 2 * p..(t + 1) * 2 * p];
            for l in 0..p {
                let (glx, gly) = (g[2 * l], g[2 * l + 1]);
                for c in l..p {
                    let dot = coef * (glx * g[2 * c] + gly * g[2 * c + 1]);
                    m[(l, c)] += dot;
                    if c != l {
                        m[(c, l)] += dot;
                    }
                }
            }
        }
        m
    }

    /// Plain energy Gram of one cell.
    pub fn cell_energy(&self, cell: &[usize]) -> DMatrix<f64> {
        self.weighted_energy(cell.iter().map(|&t| (t, 1.0)))
    }

    /// Energy of one linear combination of the cached solutions, weighted
    /// per triangle.
    pub fn combined_energy(&self, coeffs: &DVector<f64>, weights: &[f64]) -> f64 {
        let p = self.p;
        let mut total = 0.0;
        for t in 0..self.areas.len() {
            let g = &self.grads[t * 2 * p..(t + 1) * 2 * p];
            let mut gx = 0.0;
            let mut gy = 0.0;
            for m in 0..p {
                gx += coeffs[m] * g[2 * m];
                gy += coeffs[m] * g[2 * m + 1];
            }
            total += weights[t] * self.areas[t] * (gx * gx + gy * gy);
        }
        total
    }
}

/// Linearized test matrix on the density span: background energy minus the
/// probed cell energy minus the measured data Gram.
pub fn cm_linearized_test_matrix(
    background: &CmForward,
    table: &CmGradientTable,
    gamma0: &Conductivity,
    beta: f64,
    cell: &[usize],
    data_gram: &DMatrix<f64>,
) -> Result<TestMatrix> {
    let p = background.basis.len();
    if data_gram.nrows() != p || data_gram.ncols() != p {
        return Err(Error::Dimension(format!(
            "data Gram is {} x {}, expected {p} x {p}",
            data_gram.nrows(),
            data_gram.ncols()
        )));
    }
    let volume = table.weighted_energy(gamma0.values().iter().copied().enumerate());
    let probe = table.cell_energy(cell);
    let a = volume - probe.scale(beta) - data_gram;
    TestMatrix::from_symmetrizing(&a)
}

// ---------------------------------------------------------------------------
// Boundary projection operators
// ---------------------------------------------------------------------------

/// Quadrature-grid realizations of the electrode projection operators: the
/// tile embedding `Q`, its adjoint `Q*`, the mean removal `L`, the
/// electrode average `P`, and the contact impedance matrix `Z`.
///
/// The grid carries uniformly spaced midpoints, so tile sums are exact when
/// the grid size is a multiple of the electrode count.
pub struct ProjectionOperators {
    grid_n: usize,
    tile_of: Vec<usize>,
    electrode_of: Vec<Option<usize>>,
    pub k: usize,
    pub coverage: f64,
    /// Exact tile arc lengths.
    pub ext_lengths: Vec<f64>,
    /// Exact electrode arc lengths.
    pub electrode_lengths: Vec<f64>,
    /// Diagonal of `Z`: contact impedance over electrode length.
    pub z_diag: Vec<f64>,
}

impl ProjectionOperators {
    pub fn new(k: usize, coverage: f64, z: &ContactImpedance, grid_n: usize) -> Result<Self> {
        let tau = 2.0 * std::f64::consts::PI;
        if k < 2 || !(coverage > 0.0 && coverage < 1.0) {
            return Err(Error::Layout(format!("bad electrode parameters k = {k}, coverage = {coverage}")));
        }
        if z.values().len() != k {
            return Err(Error::Dimension(format!(
                "contact impedance has {} entries for {k} electrodes",
                z.values().len()
            )));
        }
        if grid_n % k != 0 {
            return Err(Error::Config(format!(
                "grid size {grid_n} must be a multiple of the electrode count {k}"
            )));
        }
        let half_width = coverage * std::f64::consts::PI / k as f64;
        let mut tile_of = vec![0usize; grid_n];
        let mut electrode_of = vec![None; grid_n];
        for i in 0..grid_n {
            let theta = tau * (i as f64 + 0.5) / grid_n as f64;
            let tile = (((theta / tau) * k as f64).floor() as usize).min(k - 1);
            tile_of[i] = tile;
            let center = std::f64::consts::PI / k as f64 + tau * tile as f64 / k as f64;
            if theta >= center - half_width && theta < center + half_width {
                electrode_of[i] = Some(tile);
            }
        }
        let ext_lengths = vec![tau / k as f64; k];
        let electrode_lengths = vec![coverage * tau / k as f64; k];
        let z_diag = (0..k).map(|j| z.values()[j] / electrode_lengths[j]).collect();
        Ok(ProjectionOperators {
            grid_n,
            tile_of,
            electrode_of,
            k,
            coverage,
            ext_lengths,
            electrode_lengths,
            z_diag,
        })
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    /// Angles of the quadrature points.
    pub fn grid_angles(&self) -> Vec<f64> {
        let tau = 2.0 * std::f64::consts::PI;
        (0..self.grid_n).map(|i| tau * (i as f64 + 0.5) / self.grid_n as f64).collect()
    }

    fn dtheta(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.grid_n as f64
    }

    /// `(Q* f)_j`: integral of a boundary function over each tile.
    pub fn qstar(&self, f: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.k);
        for (i, &v) in f.iter().enumerate() {
            out[self.tile_of[i]] += v;
        }
        out * self.dtheta()
    }

    /// `Q W`: tile-wise constant extension of an electrode vector.
    pub fn q(&self, w: &DVector<f64>) -> Vec<f64> {
        (0..self.grid_n).map(|i| w[self.tile_of[i]]).collect()
    }

    /// `L f`: removes the boundary mean.
    pub fn mean_free(&self, f: &[f64]) -> Vec<f64> {
        let mean = f.iter().sum::<f64>() / self.grid_n as f64;
        f.iter().map(|v| v - mean).collect()
    }

    /// `(P f)_j`: mean of a boundary function over each electrode.
    pub fn electrode_average(&self, f: &[f64]) -> DVector<f64> {
        let mut sums = DVector::zeros(self.k);
        let mut counts = vec![0usize; self.k];
        for (i, &v) in f.iter().enumerate() {
            if let Some(j) = self.electrode_of[i] {
                sums[j] += v;
                counts[j] += 1;
            }
        }
        for j in 0..self.k {
            sums[j] /= counts[j].max(1) as f64;
        }
        sums
    }

    /// Boundary inner product on the quadrature grid.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() * self.dtheta()
    }

    /// The tile-wise constant density with `Q* f = current`.
    pub fn density_for_current(&self, current: &DVector<f64>) -> Vec<f64> {
        (0..self.grid_n)
            .map(|i| {
                let j = self.tile_of[i];
                current[j] / self.ext_lengths[j]
            })
            .collect()
    }
}

/// `L Q (R - Z) Q*` as an applicable operator on mean-free boundary
/// densities.
pub struct CemToCmOperator<'a> {
    r: &'a MeasurementMatrix,
    ops: &'a ProjectionOperators,
}

/// Wraps a measurement map and the projection operators into the boundary
/// operator that approximates the current-density forward map.
pub fn cem_to_cm_approximation<'a>(
    r: &'a MeasurementMatrix,
    ops: &'a ProjectionOperators,
) -> Result<CemToCmOperator<'a>> {
    if r.k() != ops.k {
        return Err(Error::Dimension(format!(
            "measurement map has k = {}, projection operators have k = {}",
            r.k(),
            ops.k
        )));
    }
    Ok(CemToCmOperator { r, ops })
}

impl CemToCmOperator<'_> {
    /// Applies the operator to a mean-free density sampled on the grid.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.ops.grid_n() {
            return Err(Error::Dimension(format!(
                "density sampled on {} points, expected {}",
                f.len(),
                self.ops.grid_n()
            )));
        }
        let norm = self.ops.inner(f, f).sqrt();
        let mean = f.iter().sum::<f64>() * self.ops.dtheta();
        if mean.abs() > 1e-8 * norm.max(1e-300) {
            return Err(Error::Config(format!(
                "density is not mean-free: integral = {mean:.3e}"
            )));
        }
        let mut x = self.ops.qstar(f);
        let m = x.sum() / self.ops.k as f64;
        x.add_scalar_mut(-m);
        let mut y = self.r.apply(&x);
        for j in 0..self.ops.k {
            y[j] -= self.ops.z_diag[j] * x[j];
        }
        Ok(self.ops.mean_free(&self.ops.q(&y)))
    }

    /// Gram matrix of the operator on a density basis, through the
    /// electrode-side identity `<L Q A Q* f, g> = A Q* f . Q* g`.
    pub fn gram(&self, basis: &CmCurrentBasis) -> DMatrix<f64> {
        let p = basis.len();
        let angles = self.ops.grid_angles();
        let mut qstars = Vec::with_capacity(p);
        for m in 0..p {
            let f: Vec<f64> = angles.iter().map(|&t| basis.density(m, t)).collect();
            let mut x = self.ops.qstar(&f);
            let mean = x.sum() / self.ops.k as f64;
            x.add_scalar_mut(-mean);
            qstars.push(x);
        }
        let mut gram = DMatrix::zeros(p, p);
        for l in 0..p {
            let mut y = self.r.apply(&qstars[l]);
            for j in 0..self.ops.k {
                y[j] -= self.ops.z_diag[j] * qstars[l][j];
            }
            for m in 0..p {
                gram[(l, m)] = y.dot(&qstars[m]);
            }
        }
        (&gram + gram.transpose()).scale(0.5)
    }
}

/// Checks that semidefiniteness of an electrode-space operator transports
/// to its boundary-density version: the first verdict is spectral, the
/// second samples quadratic forms of `L Q A Q*` over tile-wise constant
/// densities built from eigenvector and seeded random currents.
pub fn semidefiniteness_transfer_check(
    a: &TestMatrix,
    ortho: &DMatrix<f64>,
    ops: &ProjectionOperators,
) -> Result<(bool, bool)> {
    let k = ops.k;
    if ortho.nrows() != k || ortho.ncols() != a.dim() {
        return Err(Error::Dimension(format!(
            "orthonormal basis is {} x {}, expected {} x {}",
            ortho.nrows(),
            ortho.ncols(),
            k,
            a.dim()
        )));
    }
    let norm = spectral::spectral_norm(a.entries());
    let tol = 1e-9 * norm.max(1e-300);
    let spectral_verdict = spectral::min_eigenvalue(a) >= -tol;

    let eig = nalgebra::SymmetricEigen::new(a.entries().clone());
    let mut currents: Vec<DVector<f64>> = Vec::new();
    for c in 0..a.dim() {
        currents.push(ortho * DVector::from_iterator(a.dim(), eig.eigenvectors.column(c).iter().copied()));
    }
    let mut rng = crate::synthdata::CounterRng::new(1234);
    for _ in 0..8 {
        let mut v = DVector::from_fn(k, |_, _| rng.next_f64() - 0.5);
        let mean = v.sum() / k as f64;
        v.add_scalar_mut(-mean);
        currents.push(v);
    }

    let apply_a = |x: &DVector<f64>| -> DVector<f64> { ortho * (a.entries() * (ortho.transpose() * x)) };
    let mut transported_verdict = true;
    for current in &currents {
        let f = ops.density_for_current(current);
        let qf = ops.qstar(&f);
        // The quadratic form of L Q A Q* at f equals (A Q* f) . (Q* f).
        let quad = apply_a(&qf).dot(&qf);
        if quad < -tol * qf.norm_squared().max(1e-300) {
            transported_verdict = false;
        }
    }
    Ok((spectral_verdict, transported_verdict))
}

// ---------------------------------------------------------------------------
// Electrode-count convergence experiment
// ---------------------------------------------------------------------------

/// One row of the convergence report.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub k: usize,
    pub h_extended: f64,
    pub norm_estimate: f64,
    pub ratio_vs_prev: Option<f64>,
}

/// Writes the convergence report in CSV form.
pub fn write_convergence_csv(rows: &[ConvergenceRow], path: &Path) -> Result<()> {
    let mut out = String::from("k,h_extended,norm_estimate,ratio_vs_prev\n");
    for r in rows {
        let ratio = r.ratio_vs_prev.map(|v| format!("{v:.16e}")).unwrap_or_default();
        writeln!(out, "{},{:.16e},{:.16e},{}", r.k, r.h_extended, r.norm_estimate, ratio).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Restriction of a Gram matrix to a density index subset.
pub fn sub_gram(g: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| g[(idx[r], idx[c])])
}

/// Parameters of the electrode-count convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    pub ks: Vec<usize>,
    pub coverage: f64,
    pub z_value: f64,
    /// Mesh scale for the per-electrode-count forward solves.
    pub fem_target_h: f64,
    /// Mesh scale for the continuum reference.
    pub cm_target_h: f64,
    pub grid_n: usize,
}

/// Distance between the continuum forward map and its electrode transport,
/// restricted to the trigonometric densities of frequency up to each `k`.
/// The distance must shrink roughly linearly as the electrode count grows.
pub fn convergence_study(phantom: &Phantom, cfg: &ConvergenceConfig) -> Result<Vec<ConvergenceRow>> {
    if cfg.ks.is_empty() {
        return Err(Error::Config("need at least one electrode count".into()));
    }
    if cfg.ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("electrode counts must be strictly increasing".into()));
    }
    let tau = 2.0 * std::f64::consts::PI;
    let k_max = *cfg.ks.last().unwrap();
    let full_basis = CmCurrentBasis::new(2 * k_max)?;

    let cm_mesh = crate::mesh::generate_disk_mesh(cfg.cm_target_h)?;
    let cm_gamma = crate::synthdata::rasterize_phantom(phantom, &cm_mesh)?;
    let cm = cm_forward_nd(&cm_mesh, &cm_gamma, &full_basis)?;

    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &k in &cfg.ks {
        let mesh = crate::mesh::generate_aligned_disk_mesh(cfg.fem_target_h, k, cfg.coverage)?;
        let layout = crate::mesh::build_electrode_layout(&mesh, k, cfg.coverage)?;
        let gamma = crate::synthdata::rasterize_phantom(phantom, &mesh)?;
        let z = ContactImpedance::uniform(k, cfg.z_value)?;
        let system = crate::fem::assemble_cem_system(&mesh, &layout, &gamma, &z)?;
        let basis = crate::synthdata::current_basis(BasisKind::GramSchmidt, k)?;
        let r = crate::fem::measurement_matrix(&system, &basis)?;
        let ops = ProjectionOperators::new(k, cfg.coverage, &z, cfg.grid_n)?;
        let op = cem_to_cm_approximation(&r, &ops)?;

        let restricted = CmCurrentBasis::new(2 * k)?;
        let proj_gram = op.gram(&restricted);
        let idx = full_basis.indices_up_to_frequency(k);
        let cm_gram = sub_gram(&cm.gram, &idx);
        let norm_estimate = spectral::spectral_norm(&(cm_gram - proj_gram));
        let ratio = rows.last().map(|prev: &ConvergenceRow| norm_estimate / prev.norm_estimate);
        rows.push(ConvergenceRow {
            k,
            h_extended: tau / k as f64,
            norm_estimate,
            ratio_vs_prev: ratio,
        });
    }
    Ok(rows)
}
