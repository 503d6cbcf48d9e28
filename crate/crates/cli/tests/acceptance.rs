//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with its measured quantities. Run with
//! `cargo test -p eit-cli --test acceptance -- --nocapture`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use eit_cli::commands::{self, Ctx};
use eit_cli::config::RunConfig;
use eit_core::cm_bridge::{self, CmCurrentBasis, ConvergenceConfig};
use eit_core::fem::{self, BasisKind, Conductivity, ContactImpedance};
use eit_core::mesh::{self, TestSetCollection};
use eit_core::monotonicity::{self, AlgorithmId, BetaSchedule, ReconstructionConfig, SandwichConfig};
use eit_core::spectral::{self, TestMatrix};
use eit_core::synthdata::{self, CounterRng, InclusionSign, NoiseSpec, Phantom};
use nalgebra::{DMatrix, DVector};

fn experiments_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments")
}

fn unit_two_disk_phantom() -> Phantom {
    let text = std::fs::read_to_string(experiments_dir().join("phantoms/two_disks_unit.json")).unwrap();
    Phantom::from_json(&text).unwrap()
}

struct Criterion {
    name: &'static str,
    start: Instant,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Criterion {
            name,
            start: Instant::now(),
        }
    }

    fn finish(self, pass: bool, detail: &str) {
        println!(
            "criterion {} [{}] ({:.1} s): {}",
            self.name,
            if pass { "PASS" } else { "FAIL" },
            self.start.elapsed().as_secs_f64(),
            detail
        );
        assert!(pass, "criterion {} failed: {detail}", self.name);
    }
}

/// Criterion 1: measurement map monotonicity on seeded random ordered
/// conductivity pairs, k = 16, roughly 1e4 triangles.
#[test]
fn c01_cem_monotonicity() {
    let c = Criterion::new("1 (CEM monotonicity)");
    let k = 16;
    let mesh = mesh::generate_aligned_disk_mesh(0.032, k, 0.5).unwrap();
    assert!(mesh.n_triangles() >= 9_000 && mesh.n_triangles() <= 14_000);
    let layout = mesh::build_electrode_layout(&mesh, k, 0.5).unwrap();
    let z = ContactImpedance::uniform(k, 0.1).unwrap();
    let basis = synthdata::current_basis(BasisKind::GramSchmidt, k).unwrap();
    let mut rng = CounterRng::new(2024);
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let lo: Vec<f64> = (0..mesh.n_triangles()).map(|_| 0.5 + 1.5 * rng.next_f64()).collect();
        let hi: Vec<f64> = lo.iter().map(|&v| v + rng.next_f64()).collect();
        let r_lo = fem::measurement_matrix(
            &fem::assemble_cem_system(&mesh, &layout, &Conductivity::new(lo, 0.4).unwrap(), &z).unwrap(),
            &basis,
        )
        .unwrap();
        let r_hi = fem::measurement_matrix(
            &fem::assemble_cem_system(&mesh, &layout, &Conductivity::new(hi, 0.4).unwrap(), &z).unwrap(),
            &basis,
        )
        .unwrap();
        let diff = r_lo.entries() - r_hi.entries();
        let rel = diff.symmetric_eigenvalues().min() / diff.norm();
        worst = worst.min(rel);
    }
    c.finish(worst >= -1e-9, &format!("20 pairs, worst relative min eigenvalue {worst:.2e}"));
}

/// Criterion 2: joint scaling of conductivity and contact impedance.
#[test]
fn c02_scaling_law() {
    let c = Criterion::new("2 (scaling law)");
    let k = 16;
    let mesh = mesh::generate_aligned_disk_mesh(0.05, k, 0.5).unwrap();
    let layout = mesh::build_electrode_layout(&mesh, k, 0.5).unwrap();
    let basis = synthdata::current_basis(BasisKind::GramSchmidt, k).unwrap();
    let gamma0 = Conductivity::homogeneous(&mesh, 1.0).unwrap();
    let z = ContactImpedance::uniform(k, 0.1).unwrap();
    let base = fem::measurement_matrix(
        &fem::assemble_cem_system(&mesh, &layout, &gamma0, &z).unwrap(),
        &basis,
    )
    .unwrap();
    let scaled = fem::measurement_matrix(
        &fem::assemble_cem_system(&mesh, &layout, &gamma0.scaled(2.0).unwrap(), &z.scaled(0.5).unwrap()).unwrap(),
        &basis,
    )
    .unwrap();
    let rel = (scaled.entries() - base.entries() / 2.0).norm() / base.entries().norm();
    c.finish(rel <= 1e-10, &format!("relative deviation {rel:.2e}"));
}

/// Criterion 3: boundary map of the homogeneous disk acts on the m-th
/// trigonometric density as multiplication by 1/m (separation of
/// variables), within 1% for m <= 8 on the fine mesh.
#[test]
fn c03_analytic_nd_oracle() {
    let c = Criterion::new("3 (analytic ND oracle)");
    let mesh = mesh::generate_disk_mesh(0.02).unwrap();
    let gamma = Conductivity::homogeneous(&mesh, 1.0).unwrap();
    let basis = CmCurrentBasis::new(16).unwrap();
    let fwd = cm_bridge::cm_forward_nd(&mesh, &gamma, &basis).unwrap();
    let mut worst = 0.0_f64;
    for m in 0..8usize {
        let expect = 1.0 / (m + 1) as f64;
        for &idx in &[m, 8 + m] {
            worst = worst.max((fwd.gram[(idx, idx)] - expect).abs() / expect);
        }
    }
    c.finish(worst < 0.01, &format!("worst relative error {worst:.2e} over modes 1..=8"));
}

/// Criterion 4: one-sided finite differences of the measurement map
/// converge at first order to the sensitivity blocks: remainder ratio
/// between steps 1e-2 and 1e-3 lies in [8, 12] on 10 random triangles.
#[test]
fn c04_frechet_derivative() {
    let c = Criterion::new("4 (derivative finite differences)");
    let k = 16;
    let mesh = mesh::generate_aligned_disk_mesh(0.032, k, 0.5).unwrap();
    let layout = mesh::build_electrode_layout(&mesh, k, 0.5).unwrap();
    let z = ContactImpedance::uniform(k, 0.1).unwrap();
    let basis = synthdata::current_basis(BasisKind::GramSchmidt, k).unwrap();
    let gamma0 = Conductivity::homogeneous(&mesh, 1.0).unwrap();
    let sys0 = fem::assemble_cem_system(&mesh, &layout, &gamma0, &z).unwrap();
    let r0 = fem::measurement_matrix(&sys0, &basis).unwrap();
    let tensor = fem::sensitivity_tensor(&sys0, &basis, None, &mesh).unwrap();
    let mut rng = CounterRng::new(404);
    let mut ratios = Vec::new();
    let mut pass = true;
    for _ in 0..10 {
        let t = (rng.next_f64() * mesh.n_triangles() as f64) as usize;
        let block = tensor.block(t).unwrap();
        let mut rem = Vec::new();
        for step in [1e-2, 1e-3] {
            let g = gamma0.perturbed(&[t], step).unwrap();
            let sys = fem::assemble_cem_system(&mesh, &layout, &g, &z).unwrap();
            let r = fem::measurement_matrix(&sys, &basis).unwrap();
            let fd = (r.entries() - r0.entries()) / step;
            rem.push((fd - &block).norm());
        }
        let ratio = rem[0] / rem[1];
        pass &= (8.0..=12.0).contains(&ratio);
        ratios.push(ratio);
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0_f64, f64::max);
    c.finish(pass, &format!("10 triangles, remainder ratios in [{lo:.2}, {hi:.2}]"));
}

/// Criterion 5: the distance between the continuum forward map and its
/// electrode transport shrinks with ratio near one half per electrode
/// doubling, k = 8 -> 16 -> 32.
#[test]
fn c05_model_convergence() {
    let c = Criterion::new("5 (electrode-model convergence)");
    let cfg = ConvergenceConfig {
        ks: vec![8, 16, 32],
        coverage: 0.5,
        z_value: 0.1,
        fem_target_h: 0.02,
        cm_target_h: 0.012,
        grid_n: 4096,
    };
    let rows = cm_bridge::convergence_study(&unit_two_disk_phantom(), &cfg).unwrap();
    let mut pass = rows.windows(2).all(|w| w[1].norm_estimate < w[0].norm_estimate);
    let mut ratios = Vec::new();
    for row in &rows[1..] {
        let ratio = row.ratio_vs_prev.unwrap();
        pass &= (0.35..=0.75).contains(&ratio);
        ratios.push(format!("{ratio:.3}"));
    }
    c.finish(pass, &format!("norms {:?}, ratios {:?}", rows.iter().map(|r| format!("{:.3e}", r.norm_estimate)).collect::<Vec<_>>(), ratios));
}

/// Criterion 6: eigenvalue continuity and the semidefiniteness transfer
/// over 200 random trials each, zero violations.
#[test]
fn c06_continuity_and_transfer() {
    let c = Criterion::new("6 (eigenvalue continuity and transfer)");
    let mut rng = CounterRng::new(606);
    let mut violations = 0;
    for _ in 0..200 {
        let a = TestMatrix::from_symmetrizing(&DMatrix::from_fn(9, 9, |_, _| rng.next_f64() - 0.5)).unwrap();
        let b = TestMatrix::from_symmetrizing(&DMatrix::from_fn(9, 9, |_, _| rng.next_f64() - 0.5)).unwrap();
        if !spectral::spectral_continuity_check(&a, &b).unwrap() {
            violations += 1;
        }
    }
    let z = ContactImpedance::uniform(8, 0.1).unwrap();
    let ops = cm_bridge::ProjectionOperators::new(8, 0.5, &z, 1024).unwrap();
    let basis = synthdata::current_basis(BasisKind::GramSchmidt, 8).unwrap();
    let ortho = basis.orthonormalized();
    for _ in 0..200 {
        let m = DMatrix::from_fn(7, 7, |_, _| rng.next_f64() * 2.0 - 1.0);
        let shift = rng.next_f64() - 0.5;
        let a = TestMatrix::from_symmetrizing(&m).unwrap().shifted(shift);
        let (s, t) = cm_bridge::semidefiniteness_transfer_check(&a, &ortho, &ops).unwrap();
        if s != t {
            violations += 1;
        }
    }
    c.finish(violations == 0, &format!("{violations} violations in 400 trials"));
}

fn far_from_disks(cells: &TestSetCollection, i: usize, phantom: &Phantom, margin: f64) -> bool {
    let c = cells.cells[i].center;
    phantom.inclusions.iter().all(|inc| match &inc.shape {
        synthdata::Shape::Disk { center, radius } => {
            ((c.x - center[0]).powi(2) + (c.y - center[1]).powi(2)).sqrt() - radius > margin
        }
        synthdata::Shape::Polygon { .. } => true,
    })
}

/// Criterion 7: inverse-crime definiteness with the sharp probing bound:
/// cells fully inside an inclusion pass, at least 90% of far cells fail.
#[test]
fn c07_inverse_crime_definiteness() {
    let c = Criterion::new("7 (inverse-crime definiteness)");
    let k = 16;
    let phantom = unit_two_disk_phantom();
    let mesh = mesh::generate_aligned_disk_mesh(0.032, k, 0.5).unwrap();
    let layout = mesh::build_electrode_layout(&mesh, k, 0.5).unwrap();
    let cells = mesh::build_hex_test_sets(&mesh, 0.14).unwrap();
    let z = ContactImpedance::uniform(k, 0.1).unwrap();
    let basis = synthdata::current_basis(BasisKind::GramSchmidt, k).unwrap();
    let gamma0 = Conductivity::homogeneous(&mesh, 1.0).unwrap();
    let gamma = synthdata::rasterize_phantom(&phantom, &mesh).unwrap();
    let sys0 = fem::assemble_cem_system(&mesh, &layout, &gamma0, &z).unwrap();
    let r0 = fem::measurement_matrix(&sys0, &basis).unwrap();
    let rdata = fem::measurement_matrix(
        &fem::assemble_cem_system(&mesh, &layout, &gamma, &z).unwrap(),
        &basis,
    )
    .unwrap();
    let tensor = fem::sensitivity_tensor(&sys0, &basis, None, &mesh).unwrap();
    let beta = 0.5;
    let tol = 1e-7 * spectral::spectral_norm(r0.entries());
    let mask = phantom.inclusion_mask(&mesh);

    let mut inside_cells = 0;
    let mut inside_ok = true;
    let mut far_total = 0;
    let mut far_rejected = 0;
    for (i, cell) in cells.cells.iter().enumerate() {
        let block = fem::apply_sensitivity(&tensor, &cell.triangles).unwrap();
        let m = r0.entries() + block.scale(beta) - rdata.entries();
        let min_sig = spectral::min_eigenvalue(&TestMatrix::from_symmetrizing(&m).unwrap());
        if cell.triangles.iter().all(|&t| mask[t].is_some()) {
            inside_cells += 1;
            inside_ok &= min_sig >= -tol;
        }
        if far_from_disks(&cells, i, &phantom, 0.2) {
            far_total += 1;
            if min_sig < -tol {
                far_rejected += 1;
            }
        }
    }
    let far_fraction = far_rejected as f64 / far_total.max(1) as f64;
    let pass = inside_cells >= 2 && inside_ok && far_fraction >= 0.9;
    c.finish(
        pass,
        &format!("{inside_cells} inside cells all pass: {inside_ok}; far cells rejected {far_rejected}/{far_total}"),
    );
}

/// Criterion 8: the regularized coarse sets contain the reference set and
/// stay within the widened reference set for k in {16, 32} and both noise
/// levels; the symmetric difference against the tight reference shrinks
/// along refinement chains.
#[test]
fn c08_sandwich_inclusions() {
    let c = Criterion::new("8 (sandwich inclusions)");
    let cfg = SandwichConfig {
        phantom: unit_two_disk_phantom(),
        beta: 0.5,
        ks: vec![16, 32],
        noise_sigmas: vec![0.0, 5e-3],
        seed: 7,
        target_h: 0.035,
        coverage: 0.5,
        z_value: 0.1,
        cell_diam: 0.3,
        reference_p: 64,
    };
    let report = monotonicity::sandwich_experiment(&cfg).unwrap();
    let mut pass = true;
    let mut detail = String::new();
    for row in &report.rows {
        pass &= row.stats.left_inclusion_holds;
        pass &= row.stats.right_inclusion_violations == 0;
        detail.push_str(&format!(
            "k={} sigma={:.0e}: left={} right_violations={} diff_ref={}; ",
            row.k, row.sigma, row.stats.left_inclusion_holds, row.stats.right_inclusion_violations, row.stats.sym_diff_vs_ref
        ));
    }
    // Convergence of the regularized sets: the symmetric difference against
    // the tight reference set must not grow when the noise vanishes at
    // fixed k, nor when k grows at vanished noise.
    for k in [16usize, 32] {
        let noisy = report
            .rows
            .iter()
            .find(|r| r.k == k && r.sigma > 0.0)
            .unwrap()
            .stats
            .sym_diff_vs_ref;
        let clean = report
            .rows
            .iter()
            .find(|r| r.k == k && r.sigma == 0.0)
            .unwrap()
            .stats
            .sym_diff_vs_ref;
        pass &= clean <= noisy;
    }
    let clean16 = report.rows.iter().find(|r| r.k == 16 && r.sigma == 0.0).unwrap().stats.sym_diff_vs_ref;
    let clean32 = report.rows.iter().find(|r| r.k == 32 && r.sigma == 0.0).unwrap().stats.sym_diff_vs_ref;
    pass &= clean32 <= clean16;
    c.finish(pass, &detail);
}

fn support_stats(csv: &Path, phantom: &Phantom, diam: f64) -> (f64, Vec<usize>) {
    let field = monotonicity::IndicatorField::read_csv(csv, diam, 0.0).unwrap();
    let hex_area = 3.0 * 3.0_f64.sqrt() / 8.0 * diam * diam;
    let support: Vec<usize> = field.support();
    let share = support.len() as f64 * hex_area / std::f64::consts::PI;
    let hits = phantom
        .inclusions
        .iter()
        .map(|inc| {
            support
                .iter()
                .filter(|&&i| inc.shape.contains(field.centers[i].x, field.centers[i].y))
                .count()
        })
        .collect();
    (share, hits)
}

fn run_pipeline(config_name: &str, out: &Path) -> RunConfig {
    let config_path = experiments_dir().join(config_name);
    let config = RunConfig::load(&config_path, &[]).unwrap();
    let ctx = Ctx {
        config: config.clone(),
        config_dir: experiments_dir(),
        out_dir: out.to_path_buf(),
    };
    commands::cmd_simulate(&ctx).unwrap();
    commands::cmd_reconstruct(&ctx).unwrap();
    config
}

/// Criterion 9: the checked-in experiment configurations (both algorithms,
/// noiseless and noisy data, both conductive phantoms) produce indicator
/// supports that intersect every true inclusion and stay under 40% of the
/// disk area, deterministically under the configured seed.
#[test]
fn c09_figure_reproduction() {
    let c = Criterion::new("9 (end-to-end figure reproduction)");
    let configs = [
        "two_disks_alg1.json",
        "two_disks_alg2.json",
        "two_disks_alg1_noisy.json",
        "two_disks_alg2_noisy.json",
        "disk_square_alg1.json",
        "disk_square_alg2.json",
        "disk_square_alg1_noisy.json",
        "disk_square_alg2_noisy.json",
    ];
    let mut pass = true;
    let mut detail = String::new();
    for name in configs {
        let dir = tempfile::tempdir().unwrap();
        let config = run_pipeline(name, dir.path());
        let phantom_path = experiments_dir().join(config.phantom_file.as_ref().unwrap());
        let phantom = Phantom::from_json(&std::fs::read_to_string(phantom_path).unwrap()).unwrap();
        let diam = config.cells.as_ref().unwrap().diam;
        let (share, hits) = support_stats(&dir.path().join("indicator.csv"), &phantom, diam);
        let ok = share < 0.4 && hits.iter().all(|&h| h > 0);
        pass &= ok;
        detail.push_str(&format!("{name}: share={share:.3} hits={hits:?}; "));

        // Determinism: a rerun reproduces both outputs byte for byte.
        let first_data = std::fs::read(dir.path().join(&config.data_file)).unwrap();
        let first_ind = std::fs::read(dir.path().join("indicator.csv")).unwrap();
        let first_pgm = std::fs::read(dir.path().join("indicator.pgm")).unwrap();
        run_pipeline(name, dir.path());
        pass &= std::fs::read(dir.path().join(&config.data_file)).unwrap() == first_data;
        pass &= std::fs::read(dir.path().join("indicator.csv")).unwrap() == first_ind;
        pass &= std::fs::read(dir.path().join("indicator.pgm")).unwrap() == first_pgm;
    }
    c.finish(pass, &detail);
}

/// Criterion 10: the indicator is nondecreasing in the regularization
/// shift and nonincreasing in the probing contrast, cellwise over a 3x3
/// grid.
#[test]
fn c10_algorithm_monotonicity() {
    let c = Criterion::new("10 (algorithm monotonicity)");
    let k = 16;
    let phantom = unit_two_disk_phantom();
    let mesh = mesh::generate_aligned_disk_mesh(0.05, k, 0.5).unwrap();
    let layout = mesh::build_electrode_layout(&mesh, k, 0.5).unwrap();
    let cells = mesh::build_hex_test_sets(&mesh, 0.22).unwrap();
    let z = ContactImpedance::uniform(k, 0.1).unwrap();
    let basis = synthdata::current_basis(BasisKind::GramSchmidt, k).unwrap();
    let gamma0 = Conductivity::homogeneous(&mesh, 1.0).unwrap();
    let gamma = synthdata::rasterize_phantom(&phantom, &mesh).unwrap();
    let sys0 = fem::assemble_cem_system(&mesh, &layout, &gamma0, &z).unwrap();
    let r0 = fem::measurement_matrix(&sys0, &basis).unwrap();
    let rdata = fem::measurement_matrix(
        &fem::assemble_cem_system(&mesh, &layout, &gamma, &z).unwrap(),
        &basis,
    )
    .unwrap();
    let tensor = fem::sensitivity_tensor(&sys0, &basis, None, &mesh).unwrap();

    let run = |alpha: f64, beta: f64| -> Vec<f64> {
        let cfg = ReconstructionConfig {
            beta: BetaSchedule::Single(beta),
            mu: 1.0,
            sign: InclusionSign::Conductive,
            algorithm: AlgorithmId::One,
            fixed_alpha: Some(alpha),
        };
        monotonicity::algorithm1(&tensor, &r0, &rdata, &cells, &cfg).unwrap().values
    };
    let alphas = [0.0, 5e-4, 2e-3];
    let betas = [0.3, 0.5, 0.8];
    let mut pass = true;
    let grid: Vec<Vec<Vec<f64>>> = alphas
        .iter()
        .map(|&a| betas.iter().map(|&b| run(a, b)).collect())
        .collect();
    for bi in 0..betas.len() {
        for ai in 0..alphas.len() - 1 {
            for cell in 0..cells.len() {
                pass &= grid[ai + 1][bi][cell] >= grid[ai][bi][cell] - 1e-12;
            }
        }
    }
    for ai in 0..alphas.len() {
        for bi in 0..betas.len() - 1 {
            for cell in 0..cells.len() {
                pass &= grid[ai][bi + 1][cell] <= grid[ai][bi][cell] + 1e-12;
            }
        }
    }
    c.finish(pass, &format!("3x3 grid over {} cells", cells.len()));
}

/// The noise realization matches the reported data corruption level.
#[test]
fn noise_level_matches_report() {
    let c = Criterion::new("aux (noise level)");
    let k = 16;
    let mesh = mesh::generate_aligned_disk_mesh(0.05, k, 0.5).unwrap();
    let layout = mesh::build_electrode_layout(&mesh, k, 0.5).unwrap();
    let z = ContactImpedance::uniform(k, 0.1).unwrap();
    let gamma = synthdata::rasterize_phantom(&unit_two_disk_phantom(), &mesh).unwrap();
    let sys = fem::assemble_cem_system(&mesh, &layout, &gamma, &z).unwrap();
    let basis = synthdata::current_basis(BasisKind::GramSchmidt, k).unwrap();
    let v = synthdata::simulate_voltages(&sys, &basis).unwrap();
    let noisy = synthdata::apply_noise(&v, &basis, &NoiseSpec { sigma: 5e-3, seed: 1 }).unwrap();
    let ok = noisy.relative_error > 2.5e-3 && noisy.relative_error < 1e-2;
    c.finish(ok, &format!("relative error {:.3e} at sigma 5e-3", noisy.relative_error));
}

/// Basis-independence of the measurement spectrum: orthonormalized and
/// dipole representations of the same map share eigenvalues.
#[test]
fn basis_equivalence_of_spectra() {
    let c = Criterion::new("aux (basis equivalence)");
    let k = 8;
    let mesh = mesh::generate_aligned_disk_mesh(0.08, k, 0.5).unwrap();
    let layout = mesh::build_electrode_layout(&mesh, k, 0.5).unwrap();
    let z = ContactImpedance::uniform(k, 0.1).unwrap();
    let gamma = synthdata::rasterize_phantom(&unit_two_disk_phantom(), &mesh).unwrap();
    let sys = fem::assemble_cem_system(&mesh, &layout, &gamma, &z).unwrap();
    let gs = fem::measurement_matrix(&sys, &synthdata::current_basis(BasisKind::GramSchmidt, k).unwrap()).unwrap();
    let dp = fem::measurement_matrix(&sys, &synthdata::current_basis(BasisKind::Dipole, k).unwrap()).unwrap();
    let mut e1: Vec<f64> = gs.entries().symmetric_eigenvalues().iter().copied().collect();
    let mut e2: Vec<f64> = dp.entries().symmetric_eigenvalues().iter().copied().collect();
    e1.sort_by(f64::total_cmp);
    e2.sort_by(f64::total_cmp);
    let worst = e1
        .iter()
        .zip(&e2)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    let scale = e1.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    c.finish(worst <= 1e-8 * scale, &format!("worst eigenvalue gap {worst:.2e}"));
}

/// A current vector that averages to zero on every electrode reproduces
/// itself through the tile projections; exercised via the transported
/// operator of the identity.
#[test]
fn projected_identity_round_trip() {
    let c = Criterion::new("aux (projection round trip)");
    let k = 16;
    let z = ContactImpedance::uniform(k, 0.1).unwrap();
    let ops = cm_bridge::ProjectionOperators::new(k, 0.5, &z, 4096).unwrap();
    let mut rng = CounterRng::new(99);
    let mut current = DVector::from_fn(k, |_, _| rng.next_f64() - 0.5);
    let mean = current.sum() / k as f64;
    current.add_scalar_mut(-mean);
    let f = ops.density_for_current(&current);
    let back = ops.qstar(&f);
    c.finish(
        (back - &current).norm() < 1e-12,
        "tile density reproduces its electrode integrals",
    );
}
