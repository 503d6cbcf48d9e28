//! The four pipeline commands: simulate, reconstruct, convergence, selftest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use eit_core::error::{Error, Result};
use eit_core::fem::{self, BasisKind, Conductivity, ContactImpedance};
use eit_core::mesh::{self, Mesh};
use eit_core::monotonicity::{self, AlgorithmId, SandwichConfig};
use eit_core::synthdata::{self, NoiseSpec, Phantom};
use nalgebra::DMatrix;

use crate::config::RunConfig;
use crate::pgm;

/// Paths and configuration of one invocation.
pub struct Ctx {
    pub config: RunConfig,
    pub config_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Ctx {
    fn resolve_input(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.config_dir.join(p)
        }
    }

    fn data_path(&self) -> PathBuf {
        let p = &self.config.data_file;
        if p.is_absolute() {
            p.clone()
        } else {
            self.out_dir.join(p)
        }
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn phantom(&self) -> Result<Phantom> {
        let rel = self
            .config
            .phantom_file
            .as_ref()
            .ok_or_else(|| Error::Config("missing 'phantom_file' in config".into()))?;
        let path = self.resolve_input(rel);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read phantom {}: {e}", path.display())))?;
        Phantom::from_json(&text)
    }

    fn mesh(&self, target_h: f64) -> Result<Mesh> {
        match &self.config.mesh.file {
            Some(p) => Mesh::read_text(&self.resolve_input(p)),
            None => mesh::generate_aligned_disk_mesh(target_h, self.config.electrodes.k, self.config.electrodes.coverage),
        }
    }
}

struct StageTimer {
    last: Instant,
}

impl StageTimer {
    fn new() -> Self {
        StageTimer { last: Instant::now() }
    }

    fn stage(&mut self, name: &str) {
        let now = Instant::now();
        eprintln!("[stage] {name}: {:.1} ms", (now - self.last).as_secs_f64() * 1e3);
        self.last = now;
    }
}

fn write_voltage_csv(path: &Path, vtilde: &DMatrix<f64>, meta: &str) -> Result<()> {
    let mut out = String::new();
    for i in 0..vtilde.nrows() {
        let row: Vec<String> = (0..vtilde.ncols()).map(|j| format!("{:.16e}", vtilde[(i, j)])).collect();
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    std::fs::write(path, out)?;
    let mut meta_path = path.as_os_str().to_owned();
    meta_path.push(".meta");
    std::fs::write(PathBuf::from(meta_path), format!("{meta}\n"))?;
    Ok(())
}

/// Reads a voltage table and its sidecar `k basis_kind sigma seed` line.
pub fn read_voltage_csv(path: &Path) -> Result<(DMatrix<f64>, usize, BasisKind)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read data {}: {e}", path.display())))?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|line| {
            line.split(',')
                .map(|tok| tok.trim().parse().map_err(|e| Error::Parse(format!("bad voltage entry: {e}"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let k = rows.len();
    if k < 2 || rows.iter().any(|r| r.len() != k - 1) {
        return Err(Error::Parse(format!("voltage table must be k x (k-1), got {k} rows")));
    }
    let v = DMatrix::from_fn(k, k - 1, |i, j| rows[i][j]);

    let mut meta_path = path.as_os_str().to_owned();
    meta_path.push(".meta");
    let meta = std::fs::read_to_string(PathBuf::from(meta_path))
        .map_err(|e| Error::Config(format!("cannot read data sidecar for {}: {e}", path.display())))?;
    let mut it = meta.split_whitespace();
    let meta_k: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse("sidecar missing electrode count".into()))?;
    let kind = BasisKind::parse(it.next().unwrap_or(""))?;
    if meta_k != k {
        return Err(Error::Parse(format!("sidecar says k = {meta_k}, table has k = {k}")));
    }
    Ok((v, k, kind))
}

/// Simulates electrode voltages for the configured phantom and writes the
/// (optionally noisy) data file with its sidecar.
pub fn cmd_simulate(ctx: &Ctx) -> Result<()> {
    let mut timer = StageTimer::new();
    let cfg = &ctx.config;
    let phantom = ctx.phantom()?;
    let sim_h = if cfg.mesh.inverse_crime {
        cfg.mesh.target_h
    } else {
        cfg.mesh.target_h / cfg.mesh.sim_refine
    };
    let mesh = ctx.mesh(sim_h)?;
    timer.stage("mesh");
    let layout = mesh::build_electrode_layout(&mesh, cfg.electrodes.k, cfg.electrodes.coverage)?;
    let gamma = synthdata::rasterize_phantom(&phantom, &mesh)?;
    let z = ContactImpedance::uniform(cfg.electrodes.k, cfg.contact_impedance)?;
    let system = fem::assemble_cem_system(&mesh, &layout, &gamma, &z)?;
    timer.stage("assemble");
    let basis = synthdata::current_basis(cfg.basis_kind()?, cfg.electrodes.k)?;
    let voltages = synthdata::simulate_voltages(&system, &basis)?;
    timer.stage("solve");
    let spec = NoiseSpec {
        sigma: cfg.noise.sigma,
        seed: cfg.noise.seed,
    };
    let noisy = synthdata::apply_noise(&voltages, &basis, &spec)?;
    eprintln!(
        "simulate: relative_error={:.6e} delta_bound={:.6e}",
        noisy.relative_error, noisy.delta_bound
    );
    std::fs::create_dir_all(&ctx.out_dir)?;
    let meta = format!(
        "{} {} {:.6e} {}",
        cfg.electrodes.k,
        basis.kind().name(),
        cfg.noise.sigma,
        cfg.noise.seed
    );
    write_voltage_csv(&ctx.data_path(), &noisy.vtilde, &meta)?;
    timer.stage("write");
    Ok(())
}

/// Reconstructs an indicator field from a voltage data file and writes the
/// per-cell CSV plus a grayscale raster.
pub fn cmd_reconstruct(ctx: &Ctx) -> Result<()> {
    let mut timer = StageTimer::new();
    let cfg = &ctx.config;
    let (vtilde, k, kind) = read_voltage_csv(&ctx.data_path())?;
    if k != cfg.electrodes.k {
        return Err(Error::Config(format!(
            "data file has k = {k}, config expects k = {}",
            cfg.electrodes.k
        )));
    }
    if kind != cfg.basis_kind()? {
        return Err(Error::Config(format!(
            "data file uses basis '{}', config expects '{}'",
            kind.name(),
            cfg.basis
        )));
    }
    timer.stage("read-data");

    let mesh = ctx.mesh(cfg.mesh.target_h)?;
    let layout = mesh::build_electrode_layout(&mesh, k, cfg.electrodes.coverage)?;
    let cells = mesh::build_hex_test_sets(
        &mesh,
        cfg.cells
            .as_ref()
            .ok_or_else(|| Error::Config("missing 'cells' section".into()))?
            .diam,
    )?;
    timer.stage("mesh");

    let gamma0 = Conductivity::homogeneous(&mesh, cfg.background)?;
    let z = ContactImpedance::uniform(k, cfg.contact_impedance)?;
    let sys0 = fem::assemble_cem_system(&mesh, &layout, &gamma0, &z)?;
    let basis = synthdata::current_basis(kind, k)?;
    let r0 = fem::measurement_matrix(&sys0, &basis)?;
    let tensor = fem::sensitivity_tensor(&sys0, &basis, None, &mesh)?;
    timer.stage("background-model");

    let rdelta = fem::MeasurementMatrix::from_voltage_columns(&basis, &vtilde)?;
    let rc = cfg.reconstruction_config()?;
    let field = match rc.algorithm {
        AlgorithmId::One => monotonicity::algorithm1(&tensor, &r0, &rdelta, &cells, &rc)?,
        AlgorithmId::Two => monotonicity::algorithm2(&tensor, &r0, &rdelta, &cells, &rc)?,
    };
    timer.stage("indicator");
    let support = field.support().len();
    eprintln!(
        "reconstruct: alpha={:.6e} cells={} support={}",
        field.alpha,
        cells.len(),
        support
    );

    std::fs::create_dir_all(&ctx.out_dir)?;
    field.write_csv(&ctx.out_path("indicator.csv"))?;
    let raster = pgm::render(&field.centers, &field.values, field.cell_diam);
    pgm::write_pgm(&ctx.out_path("indicator.pgm"), &raster)?;
    timer.stage("write");
    Ok(())
}

/// Runs the electrode-count convergence study and, when configured, the
/// sandwich experiment; writes both CSV reports.
pub fn cmd_convergence(ctx: &Ctx) -> Result<()> {
    let mut timer = StageTimer::new();
    let cfg = &ctx.config;
    let conv = cfg
        .convergence
        .as_ref()
        .ok_or_else(|| Error::Config("missing 'convergence' section".into()))?;
    let phantom = ctx.phantom()?;
    std::fs::create_dir_all(&ctx.out_dir)?;

    let study = eit_core::cm_bridge::convergence_study(
        &phantom,
        &eit_core::cm_bridge::ConvergenceConfig {
            ks: conv.ks.clone(),
            coverage: cfg.electrodes.coverage,
            z_value: cfg.contact_impedance,
            fem_target_h: cfg.mesh.target_h,
            cm_target_h: conv.cm_target_h,
            grid_n: conv.grid_n,
        },
    )?;
    for row in &study {
        eprintln!(
            "convergence: k={} norm={:.6e} ratio={}",
            row.k,
            row.norm_estimate,
            row.ratio_vs_prev.map(|r| format!("{r:.3}")).unwrap_or_default()
        );
    }
    eit_core::cm_bridge::write_convergence_csv(&study, &ctx.out_path("convergence.csv"))?;
    timer.stage("operator-distance");

    if let Some(sw) = &conv.sandwich {
        let report = monotonicity::sandwich_experiment(&SandwichConfig {
            phantom,
            beta: sw.beta,
            ks: conv.ks.clone(),
            noise_sigmas: sw.noise_sigmas.clone(),
            seed: cfg.noise.seed,
            target_h: sw.target_h,
            coverage: cfg.electrodes.coverage,
            z_value: cfg.contact_impedance,
            cell_diam: sw.cell_diam,
            reference_p: sw.reference_p,
        })?;
        for row in &report.rows {
            eprintln!(
                "sandwich: k={} sigma={:.0e} left={} right_violations={} sym_diff_ref={}",
                row.k, row.sigma, row.stats.left_inclusion_holds, row.stats.right_inclusion_violations, row.stats.sym_diff_vs_ref
            );
        }
        report.write_csv(&ctx.out_path("sandwich.csv"))?;
        timer.stage("sandwich");
    }
    Ok(())
}

/// Runs the property suite; returns false when any property fails.
pub fn cmd_selftest() -> Result<bool> {
    let outcomes = eit_core::selftest::run_all()?;
    let mut passed = 0;
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        passed += o.passed as usize;
    }
    println!("selftest: {passed}/{} properties passed", outcomes.len());
    Ok(passed == outcomes.len())
}
