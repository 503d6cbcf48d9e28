//! The reconstruction algorithms: regularized semidefiniteness tests over a
//! cell collection, the data-driven regularization rule, and the
//! model-refinement sandwich experiment.
//!
//! Sign conventions are centralized here. The probing term always enters
//! the test matrix negative semidefinite: for conductive inclusions the
//! test matrix is `R(bg) + beta S_B - R(data) + alpha Id` with `beta > 0`,
//! for resistive inclusions it is `R(data) + |beta| S_B - R(bg) + alpha Id`
//! with `beta < 0` configured. The regularization rule flips the data
//! difference accordingly, so that in both cases `alpha` is minus `mu`
//! times the smallest eigenvalue of the inclusion-free residual.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, Point2};

use crate::cm_bridge;
use crate::error::{Error, Result};
use crate::exec;
use crate::fem::{self, BasisKind, Conductivity, ContactImpedance, MeasurementMatrix, SensitivityTensor};
use crate::mesh::{self, TestSetCollection};
use crate::spectral::{self, TestMatrix};
use crate::synthdata::{self, InclusionSign, NoiseSpec, Phantom};

/// Which reconstruction algorithm to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmId {
    /// Real-valued indicator from a single probing contrast.
    One,
    /// Counting indicator over an increasing schedule of probing contrasts.
    Two,
}

/// Probing contrast: a single value or a tightening schedule.
#[derive(Debug, Clone)]
pub enum BetaSchedule {
    Single(f64),
    List(Vec<f64>),
}

impl BetaSchedule {
    pub fn values(&self) -> Vec<f64> {
        match self {
            BetaSchedule::Single(b) => vec![*b],
            BetaSchedule::List(l) => l.clone(),
        }
    }
}

/// Parameters of a reconstruction run.
#[derive(Debug, Clone)]
pub struct ReconstructionConfig {
    pub beta: BetaSchedule,
    pub mu: f64,
    pub sign: InclusionSign,
    pub algorithm: AlgorithmId,
    /// When set, bypasses the data-driven regularization rule.
    pub fixed_alpha: Option<f64>,
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        let betas = self.beta.values();
        if betas.is_empty() {
            return Err(Error::Config("empty probing schedule".into()));
        }
        for &b in &betas {
            match self.sign {
                InclusionSign::Conductive if b <= 0.0 => {
                    return Err(Error::Config(format!("conductive probing needs beta > 0, got {b}")));
                }
                InclusionSign::Resistive if b >= 0.0 => {
                    return Err(Error::Config(format!("resistive probing needs beta < 0, got {b}")));
                }
                _ => {}
            }
        }
        match self.algorithm {
            AlgorithmId::One => {
                if betas.len() != 1 {
                    return Err(Error::Config("algorithm 1 takes a single probing contrast".into()));
                }
            }
            AlgorithmId::Two => {
                // The schedule must tighten strictly: increasing magnitude.
                if betas.windows(2).any(|w| w[1].abs() <= w[0].abs()) {
                    return Err(Error::Config(
                        "algorithm 2 needs a strictly tightening (increasing magnitude) schedule".into(),
                    ));
                }
            }
        }
        if !(self.mu > 0.0) {
            return Err(Error::Config(format!("mu must be positive, got {}", self.mu)));
        }
        Ok(())
    }
}

/// Per-cell indicator values with the cell geometry needed for export.
#[derive(Debug, Clone)]
pub struct IndicatorField {
    pub values: Vec<f64>,
    pub centers: Vec<Point2<f64>>,
    /// Configured cell diameter, for rendering.
    pub cell_diam: f64,
    /// Regularization shift that was applied.
    pub alpha: f64,
}

impl IndicatorField {
    /// Cells with a positive indicator.
    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.values[i] > 0.0).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("x,y,ind\n");
        for (c, v) in self.centers.iter().zip(&self.values) {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", c.x, c.y, v).unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read_csv(path: &Path, cell_diam: f64, alpha: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut centers = Vec::new();
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                if line.trim() != "x,y,ind" {
                    return Err(Error::Parse(format!("unexpected indicator header '{line}'")));
                }
                continue;
            }
            let mut it = line.split(',');
            let x: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad indicator row {i}")))?;
            let y: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad indicator row {i}")))?;
            let v: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad indicator row {i}")))?;
            centers.push(Point2::new(x, y));
            values.push(v);
        }
        Ok(IndicatorField {
            values,
            centers,
            cell_diam,
            alpha,
        })
    }
}

/// Data-driven regularization shift: minus `mu` times the smallest
/// eigenvalue of the difference between the inclusion-free map and the
/// measured map. Negative values are legitimate.
pub fn regularization_alpha(r0: &MeasurementMatrix, rdelta: &MeasurementMatrix, mu: f64) -> Result<f64> {
    check_compatible(r0, rdelta)?;
    let diff = TestMatrix::from_symmetrizing(&(r0.entries() - rdelta.entries()))?;
    Ok(-mu * spectral::min_eigenvalue(&diff))
}

fn check_compatible(a: &MeasurementMatrix, b: &MeasurementMatrix) -> Result<()> {
    if a.k() != b.k() {
        return Err(Error::Dimension(format!("electrode counts differ: {} vs {}", a.k(), b.k())));
    }
    if a.kind() != b.kind() {
        return Err(Error::Config(format!(
            "measurement maps use different bases: {} vs {}",
            a.kind().name(),
            b.kind().name()
        )));
    }
    Ok(())
}

fn resolve_alpha(
    r0: &MeasurementMatrix,
    rdelta: &MeasurementMatrix,
    config: &ReconstructionConfig,
) -> Result<f64> {
    if let Some(a) = config.fixed_alpha {
        return Ok(a);
    }
    match config.sign {
        InclusionSign::Conductive => regularization_alpha(r0, rdelta, config.mu),
        InclusionSign::Resistive => regularization_alpha(rdelta, r0, config.mu),
    }
}

/// Test matrix of one cell at one probing contrast; the cell block is
/// negative semidefinite and the data difference is oriented by the sign.
fn cell_test_matrix(
    a0: &DMatrix<f64>,
    adelta: &DMatrix<f64>,
    cell_block: &DMatrix<f64>,
    beta: f64,
    alpha: f64,
    sign: InclusionSign,
) -> TestMatrix {
    let m = match sign {
        InclusionSign::Conductive => a0 + cell_block.scale(beta) - adelta,
        InclusionSign::Resistive => adelta + cell_block.scale(beta.abs()) - a0,
    };
    let mut m = (&m + m.transpose()).scale(0.5);
    for i in 0..m.nrows() {
        m[(i, i)] += alpha;
    }
    TestMatrix::from_symmetrizing(&m).expect("symmetric by construction")
}

/// Precomputed per-cell sensitivity sums, shared across probing stages.
fn cell_blocks(
    tensor: &SensitivityTensor,
    cells: &TestSetCollection,
    sequential: bool,
) -> Result<Vec<DMatrix<f64>>> {
    let run = |i: usize| fem::apply_sensitivity(tensor, &cells.cells[i].triangles);
    let blocks: Vec<Result<DMatrix<f64>>> = if sequential {
        exec::map_indexed_seq(cells.len(), run)
    } else {
        exec::map_indexed(cells.len(), run)
    };
    blocks.into_iter().collect()
}

fn check_inputs(
    tensor: &SensitivityTensor,
    r0: &MeasurementMatrix,
    rdelta: &MeasurementMatrix,
    config: &ReconstructionConfig,
) -> Result<()> {
    config.validate()?;
    check_compatible(r0, rdelta)?;
    if tensor.k() != r0.k() {
        return Err(Error::Dimension(format!(
            "sensitivity tensor has k = {}, measurement maps have k = {}",
            tensor.k(),
            r0.k()
        )));
    }
    Ok(())
}

fn algorithm1_impl(
    tensor: &SensitivityTensor,
    r0: &MeasurementMatrix,
    rdelta: &MeasurementMatrix,
    cells: &TestSetCollection,
    config: &ReconstructionConfig,
    sequential: bool,
) -> Result<IndicatorField> {
    check_inputs(tensor, r0, rdelta, config)?;
    if config.algorithm != AlgorithmId::One {
        return Err(Error::Config("config selects algorithm 2".into()));
    }
    let beta = config.beta.values()[0];
    let alpha = resolve_alpha(r0, rdelta, config)?;
    let blocks = cell_blocks(tensor, cells, sequential)?;
    let run = |i: usize| -> f64 {
        let t = cell_test_matrix(r0.entries(), rdelta.entries(), &blocks[i], beta, alpha, config.sign);
        spectral::min_eigenvalue(&t).max(0.0)
    };
    let values = if sequential {
        exec::map_indexed_seq(cells.len(), run)
    } else {
        exec::map_indexed(cells.len(), run)
    };
    Ok(IndicatorField {
        values,
        centers: cells.cells.iter().map(|c| c.center).collect(),
        cell_diam: cells.diam,
        alpha,
    })
}

/// Real-valued indicator: the clipped smallest eigenvalue of the
/// regularized test matrix at one probing contrast, per cell.
pub fn algorithm1(
    tensor: &SensitivityTensor,
    r0: &MeasurementMatrix,
    rdelta: &MeasurementMatrix,
    cells: &TestSetCollection,
    config: &ReconstructionConfig,
) -> Result<IndicatorField> {
    algorithm1_impl(tensor, r0, rdelta, cells, config, false)
}

/// Single-threaded reference path of [`algorithm1`].
pub fn algorithm1_seq(
    tensor: &SensitivityTensor,
    r0: &MeasurementMatrix,
    rdelta: &MeasurementMatrix,
    cells: &TestSetCollection,
    config: &ReconstructionConfig,
) -> Result<IndicatorField> {
    algorithm1_impl(tensor, r0, rdelta, cells, config, true)
}

fn algorithm2_impl(
    tensor: &SensitivityTensor,
    r0: &MeasurementMatrix,
    rdelta: &MeasurementMatrix,
    cells: &TestSetCollection,
    config: &ReconstructionConfig,
    sequential: bool,
) -> Result<IndicatorField> {
    check_inputs(tensor, r0, rdelta, config)?;
    if config.algorithm != AlgorithmId::Two {
        return Err(Error::Config("config selects algorithm 1".into()));
    }
    let betas = config.beta.values();
    let alpha = resolve_alpha(r0, rdelta, config)?;
    let blocks = cell_blocks(tensor, cells, sequential)?;

    // Cells drop out of the active set at their first failed stage; the
    // per-cell sensitivity sums are reused across stages.
    let mut counts = vec![0.0_f64; cells.len()];
    let mut active: Vec<usize> = (0..cells.len()).collect();
    for &beta in &betas {
        if active.is_empty() {
            break;
        }
        let run = |slot: usize| -> bool {
            let i = active[slot];
            let t = cell_test_matrix(r0.entries(), rdelta.entries(), &blocks[i], beta, alpha, config.sign);
            spectral::min_eigenvalue(&t) >= 0.0
        };
        let passed = if sequential {
            exec::map_indexed_seq(active.len(), run)
        } else {
            exec::map_indexed(active.len(), run)
        };
        let mut next = Vec::with_capacity(active.len());
        for (slot, &i) in active.iter().enumerate() {
            if passed[slot] {
                counts[i] += 1.0;
                next.push(i);
            }
        }
        active = next;
    }
    Ok(IndicatorField {
        values: counts,
        centers: cells.cells.iter().map(|c| c.center).collect(),
        cell_diam: cells.diam,
        alpha,
    })
}

/// Counting indicator: how many consecutive stages of the tightening
/// schedule a cell survives, with failed cells never retested.
pub fn algorithm2(
    tensor: &SensitivityTensor,
    r0: &MeasurementMatrix,
    rdelta: &MeasurementMatrix,
    cells: &TestSetCollection,
    config: &ReconstructionConfig,
) -> Result<IndicatorField> {
    algorithm2_impl(tensor, r0, rdelta, cells, config, false)
}

/// Single-threaded reference path of [`algorithm2`].
pub fn algorithm2_seq(
    tensor: &SensitivityTensor,
    r0: &MeasurementMatrix,
    rdelta: &MeasurementMatrix,
    cells: &TestSetCollection,
    config: &ReconstructionConfig,
) -> Result<IndicatorField> {
    algorithm2_impl(tensor, r0, rdelta, cells, config, true)
}

// ---------------------------------------------------------------------------
// Sandwich experiment: set inclusions across model refinement
// ---------------------------------------------------------------------------

/// Set statistics of one coarse model against the reference.
#[derive(Debug, Clone)]
pub struct SandwichSetStats {
    /// Every reference-passing cell also passes the regularized coarse test.
    pub left_inclusion_holds: bool,
    /// Cells passing the regularized coarse test but falling outside the
    /// widened reference set: violations of the right inclusion.
    pub right_inclusion_violations: usize,
    /// Cells where the regularized coarse set and the widened reference set
    /// disagree.
    pub sym_diff_vs_lambda: usize,
    /// Cells where the regularized coarse set and the tight reference set
    /// disagree.
    pub sym_diff_vs_ref: usize,
    pub ref_pass: usize,
    pub coarse_pass: usize,
    pub lambda_pass: usize,
}

/// Pure set logic of the sandwich property on per-cell smallest
/// eigenvalues: membership thresholds are `0`, `-alpha`, and `-lambda`.
pub fn sandwich_sets(
    ref_minsig: &[f64],
    coarse_minsig: &[f64],
    alpha: f64,
    lambda: f64,
    zero_tol: f64,
) -> Result<SandwichSetStats> {
    if ref_minsig.len() != coarse_minsig.len() {
        return Err(Error::Dimension(format!(
            "cell counts differ: {} vs {}",
            ref_minsig.len(),
            coarse_minsig.len()
        )));
    }
    let mut stats = SandwichSetStats {
        left_inclusion_holds: true,
        right_inclusion_violations: 0,
        sym_diff_vs_lambda: 0,
        sym_diff_vs_ref: 0,
        ref_pass: 0,
        coarse_pass: 0,
        lambda_pass: 0,
    };
    for (&r, &c) in ref_minsig.iter().zip(coarse_minsig) {
        let in_ref = r >= -zero_tol;
        let in_coarse = c + alpha >= -zero_tol;
        let in_lambda = r + lambda >= -zero_tol;
        stats.ref_pass += in_ref as usize;
        stats.coarse_pass += in_coarse as usize;
        stats.lambda_pass += in_lambda as usize;
        if in_ref && !in_coarse {
            stats.left_inclusion_holds = false;
        }
        if in_coarse && !in_lambda {
            stats.right_inclusion_violations += 1;
        }
        if in_coarse != in_lambda {
            stats.sym_diff_vs_lambda += 1;
        }
        if in_coarse != in_ref {
            stats.sym_diff_vs_ref += 1;
        }
    }
    Ok(stats)
}

/// Parameters of the sandwich experiment. All models share one mesh that is
/// aligned to every electrode count, so the cell collection and the data
/// are common and the monotonicity arguments hold at machine precision.
#[derive(Debug, Clone)]
pub struct SandwichConfig {
    pub phantom: Phantom,
    pub beta: f64,
    pub ks: Vec<usize>,
    pub noise_sigmas: Vec<f64>,
    pub seed: u64,
    pub target_h: f64,
    pub coverage: f64,
    pub z_value: f64,
    pub cell_diam: f64,
    /// Trigonometric density count of the reference model.
    pub reference_p: usize,
}

/// One row of the sandwich report.
#[derive(Debug, Clone)]
pub struct SandwichRow {
    pub k: usize,
    pub sigma: f64,
    pub delta: f64,
    pub alpha: f64,
    pub omega_est: f64,
    pub lambda: f64,
    pub stats: SandwichSetStats,
}

#[derive(Debug, Clone)]
pub struct SandwichReport {
    pub rows: Vec<SandwichRow>,
    pub n_cells: usize,
    pub ref_pass: usize,
}

impl SandwichReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from(
            "k,sigma,delta,alpha,omega_est,lambda,left_inclusion,right_violations,sym_diff_vs_lambda,sym_diff_vs_ref,ref_pass,coarse_pass,lambda_pass\n",
        );
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{},{},{},{},{},{},{}",
                r.k,
                r.sigma,
                r.delta,
                r.alpha,
                r.omega_est,
                r.lambda,
                r.stats.left_inclusion_holds,
                r.stats.right_inclusion_violations,
                r.stats.sym_diff_vs_lambda,
                r.stats.sym_diff_vs_ref,
                r.stats.ref_pass,
                r.stats.coarse_pass,
                r.stats.lambda_pass
            )
            .unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Runs the sandwich experiment: the reference is the linearized test on a
/// trigonometric density span, the coarse models are electrode tests at
/// increasing electrode counts, with the regularization shift set to the
/// exact operator-level noise bound.
pub fn sandwich_experiment(cfg: &SandwichConfig) -> Result<SandwichReport> {
    if cfg.ks.windows(2).any(|w| w[0] >= w[1]) || cfg.ks.is_empty() {
        return Err(Error::Config("electrode counts must be nonempty and strictly increasing".into()));
    }
    let mesh = mesh::generate_multi_aligned_disk_mesh(cfg.target_h, &cfg.ks, cfg.coverage)?;
    let cells = mesh::build_hex_test_sets(&mesh, cfg.cell_diam)?;
    let gamma = synthdata::rasterize_phantom(&cfg.phantom, &mesh)?;
    let gamma0 = Conductivity::homogeneous(&mesh, cfg.phantom.gamma0)?;

    // Reference model: per-cell smallest eigenvalues of the linearized test
    // on the density span.
    let density_basis = cm_bridge::CmCurrentBasis::new(cfg.reference_p)?;
    let fwd0 = cm_bridge::cm_forward_nd(&mesh, &gamma0, &density_basis)?;
    let data = cm_bridge::cm_forward_nd(&mesh, &gamma, &density_basis)?;
    let table = fwd0.gradient_table(&mesh);
    let ref_minsig: Vec<f64> = {
        let vals: Vec<Result<f64>> = exec::map_indexed(cells.len(), |i| {
            let t = cm_bridge::cm_linearized_test_matrix(
                &fwd0,
                &table,
                &gamma0,
                cfg.beta,
                &cells.cells[i].triangles,
                &data.gram,
            )?;
            Ok(spectral::min_eigenvalue(&t))
        });
        vals.into_iter().collect::<Result<Vec<f64>>>()?
    };
    // Uniform membership tolerance on the reference operator scale; the
    // morally-inside cells of both models cluster well within this band.
    let ref_scale = spectral::spectral_norm(&fwd0.gram);
    let zero_tol = 1e-8 * ref_scale;
    let ref_pass = ref_minsig.iter().filter(|&&v| v >= -zero_tol).count();

    let mut rows = Vec::new();
    for &k in &cfg.ks {
        let layout = mesh::build_electrode_layout(&mesh, k, cfg.coverage)?;
        let z = ContactImpedance::uniform(k, cfg.z_value)?;
        let sys0 = fem::assemble_cem_system(&mesh, &layout, &gamma0, &z)?;
        let sys_data = fem::assemble_cem_system(&mesh, &layout, &gamma, &z)?;
        let basis = synthdata::current_basis(BasisKind::GramSchmidt, k)?;
        let r0 = fem::measurement_matrix(&sys0, &basis)?;
        let tensor = fem::sensitivity_tensor(&sys0, &basis, None, &mesh)?;
        let blocks = cell_blocks(&tensor, &cells, false)?;
        let voltages = synthdata::simulate_voltages(&sys_data, &basis)?;

        // Eigenvalues of the electrode test transported to the boundary:
        // the tile embedding has Gram (2 pi / k) Id on mean-free vectors,
        // so the nonzero spectrum of L Q A Q* is (2 pi / k) eig(A). This
        // puts the coarse models on the reference operator scale.
        let transport = 2.0 * std::f64::consts::PI / k as f64;

        let minsig_for = |rdelta: &MeasurementMatrix| -> Vec<f64> {
            let vals: Vec<f64> = exec::map_indexed(cells.len(), |i| {
                let t = cell_test_matrix(
                    r0.entries(),
                    rdelta.entries(),
                    &blocks[i],
                    cfg.beta,
                    0.0,
                    InclusionSign::Conductive,
                );
                transport * spectral::min_eigenvalue(&t)
            });
            vals
        };

        let clean_rep = MeasurementMatrix::from_voltage_columns(&basis, &voltages)?;
        let clean_minsig = minsig_for(&clean_rep);
        let omega_est = ref_minsig
            .iter()
            .zip(&clean_minsig)
            .map(|(r, c)| (r - c).abs())
            .fold(0.0_f64, f64::max);

        for &sigma in &cfg.noise_sigmas {
            let (minsig, delta) = if sigma == 0.0 {
                (clean_minsig.clone(), 0.0)
            } else {
                let noisy = synthdata::apply_noise(&voltages, &basis, &NoiseSpec { sigma, seed: cfg.seed })?;
                let rep = MeasurementMatrix::from_voltage_columns(&basis, &noisy.vtilde)?;
                (minsig_for(&rep), transport * noisy.delta_bound)
            };
            let alpha = delta;
            let lambda = 2.0 * (omega_est + delta);
            let stats = sandwich_sets(&ref_minsig, &minsig, alpha, lambda, zero_tol)?;
            rows.push(SandwichRow {
                k,
                sigma,
                delta,
                alpha,
                omega_est,
                lambda,
                stats,
            });
        }
    }
    Ok(SandwichReport {
        rows,
        n_cells: cells.len(),
        ref_pass,
    })
}

// ---------------------------------------------------------------------------
// Nonlinear probe (property-suite support)
// ---------------------------------------------------------------------------

/// Smallest eigenvalue of the nonlinear test `R(bg + beta on cell) - R(data)`
/// for one cell, computed with a fresh forward solve. Used by the
/// inverse-crime property suite; the reconstruction algorithms use the
/// linearized test.
pub fn nonlinear_cell_test(
    mesh: &mesh::Mesh,
    layout: &mesh::ElectrodeLayout,
    gamma0: &Conductivity,
    z: &ContactImpedance,
    basis: &crate::fem::CurrentBasis,
    rdata: &MeasurementMatrix,
    beta: f64,
    cell: &[usize],
) -> Result<f64> {
    let probed = gamma0.perturbed(cell, beta)?;
    let sys = fem::assemble_cem_system(mesh, layout, &probed, z)?;
    let r = fem::measurement_matrix(&sys, basis)?;
    let t = TestMatrix::from_symmetrizing(&(r.entries() - rdata.entries()))?;
    Ok(spectral::min_eigenvalue(&t))
}
