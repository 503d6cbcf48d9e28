//! Small-scale property suite runnable from the command line: monotonicity
//! of the measurement map, the scaling law, eigenvalue continuity, the
//! semidefiniteness transfer, derivative finite differences, and the
//! sandwich inclusions.
//!
//! The individual checkers take their data as arguments so that broken
//! inputs (a sign error, skipped symmetrization) are detectable.

use nalgebra::DMatrix;

use crate::cm_bridge;
use crate::error::Result;
use crate::fem::{self, BasisKind, Conductivity, ContactImpedance};
use crate::mesh;
use crate::monotonicity::{self, SandwichConfig};
use crate::spectral::{self, TestMatrix};
use crate::synthdata::{self, CounterRng, InclusionSign, Phantom};

/// Outcome of one property check.
#[derive(Debug, Clone)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Every block of a sensitivity tensor must be negative semidefinite.
pub fn blocks_negative_semidefinite(blocks: &[DMatrix<f64>]) -> bool {
    blocks.iter().all(|b| {
        let max_eig = b.symmetric_eigenvalues().max();
        max_eig <= 1e-9 * b.norm().max(1e-300)
    })
}

/// A raw operator matrix must be symmetric up to solver roundoff.
pub fn operator_symmetry_ok(raw: &DMatrix<f64>) -> bool {
    (raw - raw.transpose()).norm() <= 1e-8 * raw.norm().max(1e-300)
}

/// The smallest eigenvalue of a matrix difference must be bounded below for
/// a monotone conductivity pair.
pub fn monotonicity_ok(diff_low_minus_high: &DMatrix<f64>) -> bool {
    let min_eig = diff_low_minus_high.symmetric_eigenvalues().min();
    min_eig >= -1e-9 * diff_low_minus_high.norm().max(1e-300)
}

fn outcome(name: &'static str, passed: bool, detail: String) -> PropertyOutcome {
    PropertyOutcome { name, passed, detail }
}

fn two_disk_phantom() -> Phantom {
    Phantom {
        gamma0: 1.0,
        inclusions: vec![
            synthdata::Inclusion {
                shape: synthdata::Shape::Disk {
                    center: [-0.4, -0.3],
                    radius: 0.25,
                },
                contrast: 1.0,
                sign: InclusionSign::Conductive,
            },
            synthdata::Inclusion {
                shape: synthdata::Shape::Disk {
                    center: [0.4, 0.3],
                    radius: 0.2,
                },
                contrast: 1.0,
                sign: InclusionSign::Conductive,
            },
        ],
    }
}

/// Runs the whole suite at desk scale and reports one outcome per property.
pub fn run_all() -> Result<Vec<PropertyOutcome>> {
    let mut out = Vec::new();
    let k = 8usize;
    let mesh = mesh::generate_aligned_disk_mesh(0.075, k, 0.5)?;
    let layout = mesh::build_electrode_layout(&mesh, k, 0.5)?;
    let gamma0 = Conductivity::homogeneous(&mesh, 1.0)?;
    let z = ContactImpedance::uniform(k, 0.1)?;
    let sys0 = fem::assemble_cem_system(&mesh, &layout, &gamma0, &z)?;
    let basis = synthdata::current_basis(BasisKind::GramSchmidt, k)?;
    let r0 = fem::measurement_matrix(&sys0, &basis)?;
    let tensor = fem::sensitivity_tensor(&sys0, &basis, None, &mesh)?;

    // Measurement map monotonicity on seeded random conductivity pairs.
    {
        let mut rng = CounterRng::new(101);
        let mut pass = true;
        let mut worst = 0.0_f64;
        for _ in 0..5 {
            let lo: Vec<f64> = (0..mesh.n_triangles()).map(|_| 0.6 + rng.next_f64()).collect();
            let hi: Vec<f64> = lo.iter().map(|&v| v + rng.next_f64()).collect();
            let r_lo = fem::measurement_matrix(
                &fem::assemble_cem_system(&mesh, &layout, &Conductivity::new(lo, 0.5)?, &z)?,
                &basis,
            )?;
            let r_hi = fem::measurement_matrix(
                &fem::assemble_cem_system(&mesh, &layout, &Conductivity::new(hi, 0.5)?, &z)?,
                &basis,
            )?;
            let diff = r_lo.entries() - r_hi.entries();
            let min_eig = diff.symmetric_eigenvalues().min();
            worst = worst.min(min_eig / diff.norm().max(1e-300));
            pass &= monotonicity_ok(&diff);
        }
        out.push(outcome("monotonicity", pass, format!("worst relative eigenvalue {worst:.2e}")));
    }

    // Joint scaling of conductivity and contact impedance.
    {
        let mut pass = true;
        let mut worst = 0.0_f64;
        for c in [0.5, 2.0, 10.0] {
            let sys = fem::assemble_cem_system(&mesh, &layout, &gamma0.scaled(c)?, &z.scaled(1.0 / c)?)?;
            let r = fem::measurement_matrix(&sys, &basis)?;
            let rel = (r.entries() - r0.entries() / c).norm() / r0.entries().norm();
            worst = worst.max(rel);
            pass &= rel <= 1e-10;
        }
        out.push(outcome("scaling_law", pass, format!("worst relative deviation {worst:.2e}")));
    }

    // Eigenvalue continuity on random symmetric pairs.
    {
        let mut rng = CounterRng::new(202);
        let mut pass = true;
        for _ in 0..200 {
            let a = TestMatrix::from_symmetrizing(&DMatrix::from_fn(7, 7, |_, _| rng.next_f64() - 0.5))?;
            let b = TestMatrix::from_symmetrizing(&DMatrix::from_fn(7, 7, |_, _| rng.next_f64() - 0.5))?;
            pass &= spectral::spectral_continuity_check(&a, &b)?;
        }
        out.push(outcome("eigenvalue_continuity", pass, "200 random pairs".into()));
    }

    // Semidefiniteness transfer between electrode and density spaces.
    {
        let ops = cm_bridge::ProjectionOperators::new(k, 0.5, &z, 1024)?;
        let ortho = basis.orthonormalized();
        let mut rng = CounterRng::new(303);
        let mut pass = true;
        for _ in 0..100 {
            let m = DMatrix::from_fn(7, 7, |_, _| rng.next_f64() * 2.0 - 1.0);
            let shift = rng.next_f64() - 0.5;
            let a = TestMatrix::from_symmetrizing(&m)?.shifted(shift);
            let (s, t) = cm_bridge::semidefiniteness_transfer_check(&a, &ortho, &ops)?;
            pass &= s == t;
        }
        out.push(outcome("semidefiniteness_transfer", pass, "100 random operators".into()));
    }

    // Derivative versus one-sided finite differences.
    {
        let mut rng = CounterRng::new(404);
        let mut pass = true;
        let mut ratios = Vec::new();
        for _ in 0..3 {
            let t = (rng.next_f64() * mesh.n_triangles() as f64) as usize;
            let block = tensor.block(t)?;
            pass &= blocks_negative_semidefinite(std::slice::from_ref(&block));
            let mut rem = Vec::new();
            for step in [1e-2, 1e-3] {
                let g = gamma0.perturbed(&[t], step)?;
                let sys = fem::assemble_cem_system(&mesh, &layout, &g, &z)?;
                let r = fem::measurement_matrix(&sys, &basis)?;
                let fd = (r.entries() - r0.entries()) / step;
                rem.push((fd - &block).norm());
            }
            let ratio = rem[0] / rem[1];
            ratios.push(ratio);
            pass &= (8.0..=12.0).contains(&ratio);
        }
        out.push(outcome(
            "derivative_finite_difference",
            pass,
            format!("remainder ratios {ratios:.2?}"),
        ));
    }

    // Sandwich inclusions at small scale.
    {
        let cfg = SandwichConfig {
            phantom: two_disk_phantom(),
            beta: 0.4,
            ks: vec![8, 16],
            noise_sigmas: vec![0.0, 5e-3],
            seed: 7,
            target_h: 0.05,
            coverage: 0.5,
            z_value: 0.1,
            cell_diam: 0.2,
            reference_p: 32,
        };
        let report = monotonicity::sandwich_experiment(&cfg)?;
        let pass = report.rows.iter().all(|r| r.stats.left_inclusion_holds);
        let detail = report
            .rows
            .iter()
            .map(|r| format!("k={} sigma={:.0e}: symdiff. {}", r.k, r.sigma, r.stats.sym_diff_vs_lambda))
            .collect::<Vec<_>>()
            .join("; ");
        out.push(outcome("sandwich_inclusions", pass, detail));
    }

    Ok(out)
}
