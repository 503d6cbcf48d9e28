//! Forward solver for the complete electrode model with piecewise affine
//! elements, the electrode measurement map in a chosen current basis, and
//! the per-triangle sensitivity blocks of its derivative with respect to
//! the conductivity.
//!
//! Unknowns are ordered as nodal potentials, then electrode voltages, then
//! one Lagrange multiplier enforcing the zero-mean voltage convention. The
//! factorization is computed once per conductivity and reused for all
//! currents.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::exec;
use crate::linsys::{Factorized, TripletBuilder};
use crate::mesh::{ElectrodeLayout, Mesh};

/// Simplex-wise constant conductivity field with a positive lower bound.
#[derive(Debug, Clone)]
pub struct Conductivity {
    values: Vec<f64>,
    lower_bound: f64,
}

impl Conductivity {
    pub fn new(values: Vec<f64>, lower_bound: f64) -> Result<Self> {
        if !(lower_bound > 0.0) {
            return Err(Error::Conductivity(format!(
                "lower bound must be positive, got {lower_bound}"
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v >= lower_bound) {
                return Err(Error::Conductivity(format!(
                    "value {v} on triangle {i} below the lower bound {lower_bound}"
                )));
            }
        }
        Ok(Conductivity { values, lower_bound })
    }

    pub fn homogeneous(mesh: &Mesh, value: f64) -> Result<Self> {
        Conductivity::new(vec![value; mesh.n_triangles()], value)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    /// Returns the field scaled by a positive constant.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Conductivity(format!("scale must be positive, got {c}")));
        }
        Conductivity::new(self.values.iter().map(|v| v * c).collect(), self.lower_bound * c)
    }

    /// Returns the field with `bump` added on the listed triangles.
    pub fn perturbed(&self, triangles: &[usize], bump: f64) -> Result<Self> {
        let mut values = self.values.clone();
        for &t in triangles {
            values[t] += bump;
        }
        let lb = values.iter().copied().fold(f64::INFINITY, f64::min);
        if !(lb > 0.0) {
            return Err(Error::Conductivity("perturbation destroys positivity".into()));
        }
        Conductivity::new(values, lb)
    }
}

/// Positive contact impedance per electrode.
#[derive(Debug, Clone)]
pub struct ContactImpedance {
    z: Vec<f64>,
}

impl ContactImpedance {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        for (j, &v) in z.iter().enumerate() {
            if !(v > 0.0) {
                return Err(Error::Fem(format!("contact impedance {v} on electrode {j} must be positive")));
            }
        }
        Ok(ContactImpedance { z })
    }

    pub fn uniform(k: usize, z: f64) -> Result<Self> {
        ContactImpedance::new(vec![z; k])
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        ContactImpedance::new(self.z.iter().map(|v| v * c).collect())
    }
}

/// Identifies how a current basis was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Trig,
    Dipole,
    GramSchmidt,
}

impl BasisKind {
    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Trig => "trig",
            BasisKind::Dipole => "dipole",
            BasisKind::GramSchmidt => "gram_schmidt",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "trig" => Ok(BasisKind::Trig),
            "dipole" => Ok(BasisKind::Dipole),
            "gram_schmidt" => Ok(BasisKind::GramSchmidt),
            other => Err(Error::Parse(format!("unknown basis kind '{other}'"))),
        }
    }
}

/// A basis of the mean-free current space: `k - 1` linearly independent
/// vectors in `R^k`, each summing to zero.
#[derive(Debug, Clone)]
pub struct CurrentBasis {
    kind: BasisKind,
    /// `k x (k-1)`; column `m` is the m-th input current pattern.
    matrix: DMatrix<f64>,
}

impl CurrentBasis {
    pub fn try_new(kind: BasisKind, matrix: DMatrix<f64>) -> Result<Self> {
        let k = matrix.nrows();
        if k < 2 || matrix.ncols() != k - 1 {
            return Err(Error::Basis(format!(
                "expected k x (k-1) basis matrix, got {} x {}",
                k,
                matrix.ncols()
            )));
        }
        for m in 0..k - 1 {
            let col = matrix.column(m);
            if col.sum().abs() > 1e-10 * col.norm().max(1.0) {
                return Err(Error::Basis(format!("basis vector {m} is not mean-free")));
            }
        }
        let gram = matrix.transpose() * &matrix;
        let eig = gram.symmetric_eigenvalues();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for &l in eig.iter() {
            lo = lo.min(l);
            hi = hi.max(l);
        }
        if lo <= 1e-12 * hi {
            return Err(Error::Basis("basis vectors are linearly dependent".into()));
        }
        Ok(CurrentBasis { kind, matrix })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Symmetric (Loewdin) orthonormalization of the basis columns: an
    /// orthonormal basis of the same mean-free subspace.
    pub fn orthonormalized(&self) -> DMatrix<f64> {
        let gram = self.matrix.transpose() * &self.matrix;
        let eig = nalgebra::SymmetricEigen::new(gram);
        let mut scaled = eig.eigenvectors.clone();
        for (c, &l) in eig.eigenvalues.iter().enumerate() {
            let inv_sqrt = 1.0 / l.sqrt();
            scaled.column_mut(c).scale_mut(inv_sqrt);
        }
        let inv_sqrt_gram = &scaled * eig.eigenvectors.transpose();
        &self.matrix * inv_sqrt_gram
    }
}

/// Assembled and factorized forward system for one conductivity.
pub struct CemSystem {
    factorized: Factorized,
    n_nodes: usize,
    k: usize,
}

/// Discrete solution pair: interior potential and electrode voltages.
#[derive(Debug, Clone)]
pub struct CemSolution {
    pub potential: DVector<f64>,
    pub voltages: DVector<f64>,
}

/// Assembles the conductivity stiffness, the electrode coupling terms, and
/// the zero-mean voltage constraint, then factorizes the resulting system.
pub fn assemble_cem_system(
    mesh: &Mesh,
    layout: &ElectrodeLayout,
    gamma: &Conductivity,
    z: &ContactImpedance,
) -> Result<CemSystem> {
    let n = mesh.n_nodes();
    let k = layout.k;
    if gamma.values().len() != mesh.n_triangles() {
        return Err(Error::Dimension(format!(
            "conductivity has {} values for {} triangles",
            gamma.values().len(),
            mesh.n_triangles()
        )));
    }
    if z.values().len() != k {
        return Err(Error::Dimension(format!(
            "contact impedance has {} entries for {k} electrodes",
            z.values().len()
        )));
    }

    let dim = n + k + 1;
    let mut builder = TripletBuilder::new(dim);

    // Conductivity stiffness over triangles.
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [a, b, c] = [mesh.nodes()[tri[0]], mesh.nodes()[tri[1]], mesh.nodes()[tri[2]]];
        let area = mesh.areas()[t];
        // P1 gradients via edge normals.
        let bx = [b.y - c.y, c.y - a.y, a.y - b.y];
        let by = [c.x - b.x, a.x - c.x, b.x - a.x];
        let coef = gamma.values()[t] / (4.0 * area);
        for i in 0..3 {
            for j in 0..3 {
                builder.add(tri[i], tri[j], coef * (bx[i] * bx[j] + by[i] * by[j]));
            }
        }
    }

    // Electrode terms: (1/z_j) * int_{E_j} (v - V_j)(w - W_j) dS on the
    // polygonal boundary edges covered by each electrode.
    for (j, edges) in layout.edges.iter().enumerate() {
        let inv_z = 1.0 / z.values()[j];
        let col_v = n + j;
        for &e in edges {
            let edge = mesh.boundary_edges()[e];
            let len = edge.length(mesh);
            let [p, q] = edge.nodes;
            let m11 = inv_z * len / 3.0;
            let m12 = inv_z * len / 6.0;
            builder.add(p, p, m11);
            builder.add(q, q, m11);
            builder.add(p, q, m12);
            builder.add(q, p, m12);
            let half = inv_z * len / 2.0;
            builder.add(p, col_v, -half);
            builder.add(col_v, p, -half);
            builder.add(q, col_v, -half);
            builder.add(col_v, q, -half);
            builder.add(col_v, col_v, inv_z * len);
        }
    }

    // Zero-mean electrode voltage constraint via one Lagrange multiplier.
    let mult = n + k;
    for j in 0..k {
        builder.add(mult, n + j, 1.0);
        builder.add(n + j, mult, 1.0);
    }

    let factorized = Factorized::new(builder.build()?)
        .map_err(|e| Error::Solver(format!("forward system is singular ({e}); check mesh and layout")))?;
    Ok(CemSystem {
        factorized,
        n_nodes: n,
        k,
    })
}

impl CemSystem {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Largest entrywise asymmetry of the assembled system matrix.
    pub fn symmetry_defect(&self) -> f64 {
        self.factorized.symmetry_defect()
    }
}

/// Solves the forward problem for one mean-free current pattern.
pub fn solve_cem(system: &CemSystem, current: &DVector<f64>) -> Result<CemSolution> {
    let k = system.k;
    let n = system.n_nodes;
    if current.len() != k {
        return Err(Error::Dimension(format!(
            "current has {} entries for {k} electrodes",
            current.len()
        )));
    }
    if current.sum().abs() > 1e-12 * current.norm().max(1.0) {
        return Err(Error::Fem(format!(
            "input current must be mean-free; sum = {:.3e}",
            current.sum()
        )));
    }
    let mut rhs = vec![0.0; n + k + 1];
    for j in 0..k {
        rhs[n + j] = current[j];
    }
    let x = system.factorized.solve(&rhs)?;
    let potential = DVector::from_iterator(n, x[..n].iter().copied());
    let voltages = DVector::from_iterator(k, x[n..n + k].iter().copied());
    let vsum = voltages.sum().abs();
    if vsum > 1e-10 * voltages.norm().max(1.0) {
        return Err(Error::Solver(format!(
            "electrode voltages are not mean-free: sum = {vsum:.3e}"
        )));
    }
    Ok(CemSolution { potential, voltages })
}

/// Per-triangle gradients of a nodal field.
pub fn potential_gradients(mesh: &Mesh, nodal: &DVector<f64>) -> Vec<[f64; 2]> {
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let [a, b, c] = [mesh.nodes()[tri[0]], mesh.nodes()[tri[1]], mesh.nodes()[tri[2]]];
            let area = mesh.areas()[t];
            let bx = [b.y - c.y, c.y - a.y, a.y - b.y];
            let by = [c.x - b.x, a.x - c.x, b.x - a.x];
            let mut g = [0.0, 0.0];
            for i in 0..3 {
                let v = nodal[tri[i]] / (2.0 * area);
                g[0] += v * bx[i];
                g[1] += v * by[i];
            }
            g
        })
        .collect()
}

/// The electrode measurement map expressed on the span of a current basis.
///
/// Internally the map is represented in the orthonormalized basis of the
/// mean-free current space, which keeps the matrix symmetric and its
/// spectrum independent of how the user basis was scaled.
#[derive(Debug, Clone)]
pub struct MeasurementMatrix {
    entries: DMatrix<f64>,
    ortho: DMatrix<f64>,
    kind: BasisKind,
    sym_defect: f64,
}

impl MeasurementMatrix {
    /// Symmetrized matrix of the measurement map, `(k-1) x (k-1)`.
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Orthonormal basis columns the entries refer to, `k x (k-1)`.
    pub fn ortho_basis(&self) -> &DMatrix<f64> {
        &self.ortho
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.ortho.nrows()
    }

    /// Relative self-adjointness defect of the raw matrix before
    /// symmetrization.
    pub fn sym_defect(&self) -> f64 {
        self.sym_defect
    }

    /// Applies the measurement map to a mean-free current vector.
    pub fn apply(&self, current: &DVector<f64>) -> DVector<f64> {
        &self.ortho * (&self.entries * (self.ortho.transpose() * current))
    }

    /// Assembles a measurement operator from an explicit symmetric matrix
    /// and the orthonormal basis it refers to.
    pub fn from_parts(entries: DMatrix<f64>, ortho: DMatrix<f64>, kind: BasisKind) -> Result<Self> {
        let k = ortho.nrows();
        if k < 2 || ortho.ncols() != k - 1 || entries.nrows() != k - 1 || entries.ncols() != k - 1 {
            return Err(Error::Dimension(format!(
                "inconsistent shapes: entries {} x {}, basis {} x {}",
                entries.nrows(),
                entries.ncols(),
                ortho.nrows(),
                ortho.ncols()
            )));
        }
        let defect = sym_defect(&entries);
        Ok(MeasurementMatrix {
            entries: symmetrize(&entries),
            ortho,
            kind,
            sym_defect: defect,
        })
    }

    /// Builds a measurement operator directly from raw per-basis voltage
    /// columns (`k x (k-1)`, column `m` for the m-th user basis current).
    pub fn from_voltage_columns(basis: &CurrentBasis, voltages: &DMatrix<f64>) -> Result<Self> {
        let k = basis.k();
        if voltages.nrows() != k || voltages.ncols() != k - 1 {
            return Err(Error::Dimension(format!(
                "voltage table is {} x {}, expected {} x {}",
                voltages.nrows(),
                voltages.ncols(),
                k,
                k - 1
            )));
        }
        // Represent the underlying operator V I^+ on the orthonormalized
        // basis: A = U^T V (I^+ U) with I^+ the pseudoinverse of the basis.
        let imat = basis.matrix();
        let gram = imat.transpose() * imat;
        let pinv_u = gram
            .clone()
            .lu()
            .solve(&(imat.transpose() * basis.orthonormalized()))
            .ok_or_else(|| Error::Basis("basis Gram matrix is singular".into()))?;
        let ortho = basis.orthonormalized();
        let raw = ortho.transpose() * voltages * pinv_u;
        let defect = sym_defect(&raw);
        let entries = symmetrize(&raw);
        Ok(MeasurementMatrix {
            entries,
            ortho,
            kind: basis.kind(),
            sym_defect: defect,
        })
    }

    /// Writes the matrix in the plain text interchange format.
    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "{} {}", self.k(), self.kind.name()).unwrap();
        let m = self.entries.nrows();
        for i in 0..m {
            let row: Vec<String> = (0..m).map(|j| format!("{:.16e}", self.entries[(i, j)])).collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn sym_defect(m: &DMatrix<f64>) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / norm
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()).scale(0.5)
}

fn solve_basis_columns(
    system: &CemSystem,
    ortho: &DMatrix<f64>,
    sequential: bool,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let k = system.k();
    let n = system.n_nodes();
    let cols = k - 1;
    let run = |m: usize| -> Result<CemSolution> {
        let current = DVector::from_iterator(k, ortho.column(m).iter().copied());
        solve_cem(system, &current)
    };
    let solutions: Vec<Result<CemSolution>> = if sequential {
        exec::map_indexed_seq(cols, run)
    } else {
        exec::map_indexed(cols, run)
    };
    let mut potentials = DMatrix::zeros(n, cols);
    let mut voltages = DMatrix::zeros(k, cols);
    for (m, sol) in solutions.into_iter().enumerate() {
        let sol = sol?;
        potentials.set_column(m, &sol.potential);
        voltages.set_column(m, &sol.voltages);
    }
    Ok((potentials, voltages))
}

fn measurement_matrix_impl(
    system: &CemSystem,
    basis: &CurrentBasis,
    sequential: bool,
) -> Result<MeasurementMatrix> {
    if basis.k() != system.k() {
        return Err(Error::Dimension(format!(
            "basis has k = {}, system has k = {}",
            basis.k(),
            system.k()
        )));
    }
    let ortho = basis.orthonormalized();
    let (_, voltages) = solve_basis_columns(system, &ortho, sequential)?;
    let raw = ortho.transpose() * voltages;
    let defect = sym_defect(&raw);
    if defect > 1e-8 {
        return Err(Error::Fem(format!(
            "measurement map self-adjointness defect {defect:.3e} above 1e-8; solver output is inconsistent"
        )));
    }
    Ok(MeasurementMatrix {
        entries: symmetrize(&raw),
        ortho,
        kind: basis.kind(),
        sym_defect: defect,
    })
}

/// Matrix of the measurement map on the basis span: one forward solve per
/// basis vector, then explicit symmetrization.
pub fn measurement_matrix(system: &CemSystem, basis: &CurrentBasis) -> Result<MeasurementMatrix> {
    measurement_matrix_impl(system, basis, false)
}

/// Single-threaded reference path of [`measurement_matrix`].
pub fn measurement_matrix_seq(system: &CemSystem, basis: &CurrentBasis) -> Result<MeasurementMatrix> {
    measurement_matrix_impl(system, basis, true)
}

/// Per-triangle derivative blocks of the measurement map at a background
/// conductivity, stored as gradients of the orthonormalized basis solutions.
///
/// The block for triangle `K` is `-area_K * W_K W_K^T` where row `m` of
/// `W_K` is the gradient of the m-th basis solution on `K`; it is exactly
/// symmetric and negative semidefinite by construction.
#[derive(Debug, Clone)]
pub struct SensitivityTensor {
    k1: usize,
    /// `2 * k1` gradient components per covered triangle.
    grads: Vec<f64>,
    covered: Vec<bool>,
    areas: Vec<f64>,
    ortho: DMatrix<f64>,
}

impl SensitivityTensor {
    pub fn k(&self) -> usize {
        self.k1 + 1
    }

    pub fn ortho_basis(&self) -> &DMatrix<f64> {
        &self.ortho
    }

    pub fn covers(&self, triangle: usize) -> bool {
        triangle < self.covered.len() && self.covered[triangle]
    }

    /// Derivative block of one triangle.
    pub fn block(&self, triangle: usize) -> Result<DMatrix<f64>> {
        self.accumulate(std::slice::from_ref(&triangle))
    }

    fn accumulate(&self, triangles: &[usize]) -> Result<DMatrix<f64>> {
        let k1 = self.k1;
        let mut m = DMatrix::zeros(k1, k1);
        for &t in triangles {
            if !self.covers(t) {
                return Err(Error::Fem(format!("triangle {t} is not covered by the sensitivity tensor")));
            }
            let area = self.areas[t];
            let g = &self.grads[t * 2 * k1..(t + 1) * 2 * k1];
            for l in 0..k1 {
                let (glx, gly) = (g[2 * l], g[2 * l + 1]);
                for c in l..k1 {
                    let dot = area * (glx * g[2 * c] + gly * g[2 * c + 1]);
                    m[(l, c)] -= dot;
                    if c != l {
                        m[(c, l)] -= dot;
                    }
                }
            }
        }
        Ok(m)
    }
}

fn sensitivity_tensor_impl(
    system: &CemSystem,
    basis: &CurrentBasis,
    subset: Option<&[usize]>,
    mesh: &Mesh,
    sequential: bool,
) -> Result<SensitivityTensor> {
    if basis.k() != system.k() {
        return Err(Error::Dimension(format!(
            "basis has k = {}, system has k = {}",
            basis.k(),
            system.k()
        )));
    }
    let ortho = basis.orthonormalized();
    let (potentials, _) = solve_basis_columns(system, &ortho, sequential)?;
    let k1 = system.k() - 1;
    let n_tri = mesh.n_triangles();

    let mut covered = vec![false; n_tri];
    match subset {
        Some(list) => {
            for &t in list {
                if t >= n_tri {
                    return Err(Error::Dimension(format!("triangle {t} out of range")));
                }
                covered[t] = true;
            }
        }
        None => covered.fill(true),
    }

    // Gradients of every basis solution on every covered triangle.
    let per_col: Vec<Vec<[f64; 2]>> = {
        let run = |m: usize| {
            let nodal = DVector::from_iterator(mesh.n_nodes(), potentials.column(m).iter().copied());
            potential_gradients(mesh, &nodal)
        };
        if sequential {
            exec::map_indexed_seq(k1, run)
        } else {
            exec::map_indexed(k1, run)
        }
    };
    let mut grads = vec![0.0; n_tri * 2 * k1];
    for t in 0..n_tri {
        if !covered[t] {
            continue;
        }
        for m in 0..k1 {
            grads[t * 2 * k1 + 2 * m] = per_col[m][t][0];
            grads[t * 2 * k1 + 2 * m + 1] = per_col[m][t][1];
        }
    }
    Ok(SensitivityTensor {
        k1,
        grads,
        covered,
        areas: mesh.areas().to_vec(),
        ortho,
    })
}

/// Computes the sensitivity tensor at the system's conductivity; pass a
/// triangle subset to restrict the cached blocks.
pub fn sensitivity_tensor(
    system: &CemSystem,
    basis: &CurrentBasis,
    subset: Option<&[usize]>,
    mesh: &Mesh,
) -> Result<SensitivityTensor> {
    sensitivity_tensor_impl(system, basis, subset, mesh, false)
}

/// Single-threaded reference path of [`sensitivity_tensor`].
pub fn sensitivity_tensor_seq(
    system: &CemSystem,
    basis: &CurrentBasis,
    subset: Option<&[usize]>,
    mesh: &Mesh,
) -> Result<SensitivityTensor> {
    sensitivity_tensor_impl(system, basis, subset, mesh, true)
}

/// Sums the derivative blocks over a test set.
pub fn apply_sensitivity(tensor: &SensitivityTensor, cell_triangles: &[usize]) -> Result<DMatrix<f64>> {
    tensor.accumulate(cell_triangles)
}


#[cfg(test)]
mod format_tests {
    use super::*;
    use crate::mesh::{build_electrode_layout, generate_aligned_disk_mesh};
    use crate::synthdata::current_basis;

    #[test]
    fn measurement_matrix_text_format() {
        let mesh = generate_aligned_disk_mesh(0.15, 8, 0.5).unwrap();
        let layout = build_electrode_layout(&mesh, 8, 0.5).unwrap();
        let gamma = Conductivity::homogeneous(&mesh, 1.0).unwrap();
        let z = ContactImpedance::uniform(8, 0.1).unwrap();
        let sys = assemble_cem_system(&mesh, &layout, &gamma, &z).unwrap();
        let basis = current_basis(BasisKind::GramSchmidt, 8).unwrap();
        let mm = measurement_matrix(&sys, &basis).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.txt");
        mm.write_text(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "8 gram_schmidt");
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 7);
        for (i, row) in rows.iter().enumerate() {
            let vals: Vec<f64> = row.split_whitespace().map(|t| t.parse().unwrap()).collect();
            assert_eq!(vals.len(), 7);
            for (j, v) in vals.iter().enumerate() {
                assert_eq!(*v, mm.entries()[(i, j)], "entry ({i},{j}) loses precision");
            }
        }
    }
}
