//! Triangular meshes of the unit disk, electrode layouts on its boundary,
//! and hexagonal tilings used as reconstruction test sets.
//!
//! Meshes are generated by a structured polar-ring triangulation: ring `i`
//! of `n` carries `6 i` nodes at radius `i / n`, and consecutive rings are
//! stitched by an angular merge sweep. The construction is deterministic,
//! and the outermost ring can be snapped so that electrode arc endpoints
//! coincide with boundary nodes, which keeps boundary integrals exact on
//! whole edges.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point2;

use crate::error::{Error, Result};

/// Upper bound on generated triangles; guards against absurd `target_h`.
const TRIANGLE_BUDGET: usize = 4_000_000;

/// Boundary nodes must sit on the unit circle to within this tolerance.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// A boundary edge between two consecutive boundary nodes, with the arc
/// positions (angles in `[0, 2pi)`) of its endpoints.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub theta: [f64; 2],
}

impl BoundaryEdge {
    /// Chord length of the edge.
    pub fn length(&self, mesh: &Mesh) -> f64 {
        (mesh.nodes[self.nodes[0]] - mesh.nodes[self.nodes[1]]).norm()
    }

    /// Midpoint angle, unwrapped so that wrap-around edges stay inside the arc.
    pub fn mid_theta(&self) -> f64 {
        let [a, mut b] = self.theta;
        if b < a {
            b += 2.0 * std::f64::consts::PI;
        }
        (0.5 * (a + b)).rem_euclid(2.0 * std::f64::consts::PI)
    }
}

/// Triangulation of the unit disk.
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Point2<f64>>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    areas: Vec<f64>,
    max_edge: f64,
}

impl Mesh {
    /// Builds a mesh from raw arrays, validating every structural invariant.
    pub fn try_new(
        nodes: Vec<Point2<f64>>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        let mut areas = Vec::with_capacity(triangles.len());
        let mut max_edge = 0.0_f64;
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nodes.len() {
                    return Err(Error::Mesh(format!("triangle {t} references node {v} out of range")));
                }
            }
            let [a, b, c] = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
            let area = signed_area(&a, &b, &c);
            if area <= 0.0 {
                return Err(Error::Mesh(format!("triangle {t} has non-positive area {area:e}")));
            }
            areas.push(area);
            max_edge = max_edge
                .max((a - b).norm())
                .max((b - c).norm())
                .max((c - a).norm());
        }
        let mesh = Mesh {
            nodes,
            triangles,
            boundary_edges,
            areas,
            max_edge,
        };
        mesh.validate_boundary()?;
        Ok(mesh)
    }

    fn validate_boundary(&self) -> Result<()> {
        if self.boundary_edges.is_empty() {
            return Err(Error::Mesh("no boundary edges".into()));
        }
        // Every boundary node lies on the unit circle.
        for e in &self.boundary_edges {
            for (slot, &v) in e.nodes.iter().enumerate() {
                if v >= self.nodes.len() {
                    return Err(Error::Mesh(format!("boundary edge references node {v} out of range")));
                }
                let r = self.nodes[v].coords.norm();
                if (r - 1.0).abs() > BOUNDARY_TOL {
                    return Err(Error::Mesh(format!("boundary node {v} at radius {r} off the unit circle")));
                }
                let theta = e.theta[slot];
                let p = Point2::new(theta.cos(), theta.sin());
                if (p - self.nodes[v]).norm() > 1e-7 {
                    return Err(Error::Mesh(format!("boundary edge angle metadata inconsistent at node {v}")));
                }
            }
        }
        // The edges form one closed loop: walk successors from the first edge.
        let mut next: BTreeMap<usize, usize> = BTreeMap::new();
        for e in &self.boundary_edges {
            if next.insert(e.nodes[0], e.nodes[1]).is_some() {
                return Err(Error::Mesh("boundary node with two outgoing edges".into()));
            }
        }
        let start = self.boundary_edges[0].nodes[0];
        let mut cur = start;
        for _ in 0..self.boundary_edges.len() {
            cur = *next
                .get(&cur)
                .ok_or_else(|| Error::Mesh("boundary loop is broken".into()))?;
        }
        if cur != start {
            return Err(Error::Mesh("boundary edges do not close into a single loop".into()));
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Point2<f64>] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Positive area of each triangle, cached at construction.
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    /// Length of the longest triangle edge.
    pub fn max_edge(&self) -> f64 {
        self.max_edge
    }

    /// Centroid of triangle `t`.
    pub fn centroid(&self, t: usize) -> Point2<f64> {
        let [a, b, c] = self.triangles[t];
        let p = (self.nodes[a].coords + self.nodes[b].coords + self.nodes[c].coords) / 3.0;
        Point2::from(p)
    }

    /// Writes the mesh in the plain text interchange format.
    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "nodes {}", self.nodes.len()).unwrap();
        for p in &self.nodes {
            writeln!(out, "{:.16e} {:.16e}", p.x, p.y).unwrap();
        }
        writeln!(out, "triangles {}", self.triangles.len()).unwrap();
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        writeln!(out, "boundary {}", self.boundary_edges.len()).unwrap();
        for e in &self.boundary_edges {
            writeln!(
                out,
                "{} {} {:.16e} {:.16e}",
                e.nodes[0], e.nodes[1], e.theta[0], e.theta[1]
            )
            .unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Reads a mesh written by [`Mesh::write_text`] and re-validates it.
    pub fn read_text(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let n: usize = parse_count(lines.next(), "nodes")?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| Error::Parse("truncated node list".into()))?;
            let mut it = line.split_whitespace();
            let x = parse_f64(it.next())?;
            let y = parse_f64(it.next())?;
            nodes.push(Point2::new(x, y));
        }
        let m: usize = parse_count(lines.next(), "triangles")?;
        let mut triangles = Vec::with_capacity(m);
        for _ in 0..m {
            let line = lines.next().ok_or_else(|| Error::Parse("truncated triangle list".into()))?;
            let mut it = line.split_whitespace();
            triangles.push([parse_usize(it.next())?, parse_usize(it.next())?, parse_usize(it.next())?]);
        }
        let b: usize = parse_count(lines.next(), "boundary")?;
        let mut boundary = Vec::with_capacity(b);
        for _ in 0..b {
            let line = lines.next().ok_or_else(|| Error::Parse("truncated boundary list".into()))?;
            let mut it = line.split_whitespace();
            boundary.push(BoundaryEdge {
                nodes: [parse_usize(it.next())?, parse_usize(it.next())?],
                theta: [parse_f64(it.next())?, parse_f64(it.next())?],
            });
        }
        Mesh::try_new(nodes, triangles, boundary)
    }
}

fn parse_count(line: Option<&str>, tag: &str) -> Result<usize> {
    let line = line.ok_or_else(|| Error::Parse(format!("missing '{tag}' header")))?;
    let mut it = line.split_whitespace();
    let got = it.next().unwrap_or("");
    if got != tag {
        return Err(Error::Parse(format!("expected '{tag}' header, got '{got}'")));
    }
    parse_usize(it.next())
}

fn parse_usize(tok: Option<&str>) -> Result<usize> {
    tok.ok_or_else(|| Error::Parse("missing integer field".into()))?
        .parse()
        .map_err(|e| Error::Parse(format!("bad integer: {e}")))
}

fn parse_f64(tok: Option<&str>) -> Result<f64> {
    tok.ok_or_else(|| Error::Parse("missing float field".into()))?
        .parse()
        .map_err(|e| Error::Parse(format!("bad float: {e}")))
}

fn signed_area(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

/// Generates a structured disk mesh with maximal edge length at most
/// `1.5 * target_h`, without any boundary alignment.
pub fn generate_disk_mesh(target_h: f64) -> Result<Mesh> {
    generate_rings(target_h, &[])
}

/// Generates a disk mesh whose outermost ring is snapped so that the arc
/// endpoints of a `k`-electrode layout with the given boundary coverage
/// coincide with boundary nodes.
pub fn generate_aligned_disk_mesh(target_h: f64, k: usize, coverage: f64) -> Result<Mesh> {
    generate_multi_aligned_disk_mesh(target_h, &[k], coverage)
}

/// Generates a disk mesh aligned to several electrode layouts at once, so
/// that one mesh can carry experiments sweeping the electrode count.
pub fn generate_multi_aligned_disk_mesh(target_h: f64, ks: &[usize], coverage: f64) -> Result<Mesh> {
    if ks.is_empty() {
        return Err(Error::Layout("need at least one electrode count".into()));
    }
    let mut targets = Vec::new();
    for &k in ks {
        check_layout_params(k, coverage)?;
        targets.extend(layout_snap_angles(k, coverage));
    }
    generate_rings(target_h, &targets)
}

fn ring_count(target_h: f64) -> Result<usize> {
    if !(target_h > 0.0 && target_h < 1.0) {
        return Err(Error::Mesh(format!("target_h must lie in (0, 1), got {target_h}")));
    }
    let n = (1.3 / target_h).ceil() as usize;
    let n = n.max(2);
    if 6 * n * n > TRIANGLE_BUDGET {
        return Err(Error::Mesh(format!(
            "target_h = {target_h} needs {} triangles, beyond the budget of {TRIANGLE_BUDGET}",
            6 * n * n
        )));
    }
    Ok(n)
}

fn generate_rings(target_h: f64, snap_targets: &[f64]) -> Result<Mesh> {
    let n = ring_count(target_h)?;
    let tau = 2.0 * std::f64::consts::PI;

    // Ring i holds 6 i uniformly spaced nodes; where alignment angles are
    // requested, the outermost ring is built around them instead.
    let mut ring_angles: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    ring_angles.push(vec![0.0]); // center placeholder
    for i in 1..=n {
        let m = 6 * i;
        ring_angles.push((0..m).map(|j| tau * j as f64 / m as f64).collect());
    }
    if !snap_targets.is_empty() {
        ring_angles[n] = aligned_outer_ring(6 * n, snap_targets);
    }

    let mut nodes = vec![Point2::new(0.0, 0.0)];
    let mut ring_start = vec![0usize; n + 1];
    for i in 1..=n {
        ring_start[i] = nodes.len();
        let r = i as f64 / n as f64;
        for &theta in &ring_angles[i] {
            nodes.push(Point2::new(r * theta.cos(), r * theta.sin()));
        }
    }

    let mut triangles = Vec::with_capacity(6 * n * n);
    // Center fan.
    for j in 0..6usize {
        triangles.push([0, ring_start[1] + j, ring_start[1] + (j + 1) % 6]);
    }
    // Annuli: merge rings i and i+1 by sweeping angles.
    for i in 1..n {
        stitch_annulus(
            &ring_angles[i],
            &ring_angles[i + 1],
            ring_start[i],
            ring_start[i + 1],
            &mut triangles,
        );
    }

    let outer = &ring_angles[n];
    let m = outer.len();
    let boundary = (0..m)
        .map(|j| BoundaryEdge {
            nodes: [ring_start[n] + j, ring_start[n] + (j + 1) % m],
            theta: [outer[j], outer[(j + 1) % m]],
        })
        .collect();

    let mesh = Mesh::try_new(nodes, triangles, boundary)?;
    if mesh.max_edge() > 1.5 * target_h {
        return Err(Error::Mesh(format!(
            "generated maximal edge {:.3e} exceeds 1.5 * target_h = {:.3e}",
            mesh.max_edge(),
            1.5 * target_h
        )));
    }
    Ok(mesh)
}

/// Builds the outermost ring around the required alignment angles: every
/// target becomes a node and the gaps between consecutive targets are filled
/// uniformly at roughly the nominal spacing `2pi / m_nominal`.
fn aligned_outer_ring(m_nominal: usize, targets: &[f64]) -> Vec<f64> {
    let tau = 2.0 * std::f64::consts::PI;
    let spacing = tau / m_nominal as f64;
    let mut anchors: Vec<f64> = targets.iter().map(|t| t.rem_euclid(tau)).collect();
    anchors.sort_by(f64::total_cmp);
    anchors.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut angles = Vec::with_capacity(m_nominal + anchors.len());
    for idx in 0..anchors.len() {
        let a = anchors[idx];
        let b = if idx + 1 < anchors.len() { anchors[idx + 1] } else { anchors[0] + tau };
        let gap = b - a;
        let pieces = (gap / spacing).round().max(1.0) as usize;
        for t in 0..pieces {
            angles.push(a + gap * t as f64 / pieces as f64);
        }
    }
    angles
}

/// Triangulates the annulus between two rings by advancing whichever ring
/// has the smaller next angle; produces `p + q` positively oriented
/// triangles for rings of `p` and `q` nodes.
fn stitch_annulus(
    inner: &[f64],
    outer: &[f64],
    inner_start: usize,
    outer_start: usize,
    triangles: &mut Vec<[usize; 3]>,
) {
    let tau = 2.0 * std::f64::consts::PI;
    let p = inner.len();
    let q = outer.len();
    let unwrap = |angles: &[f64], idx: usize| -> f64 {
        angles[idx % angles.len()] + (idx / angles.len()) as f64 * tau
    };
    let (mut i, mut j) = (0usize, 0usize);
    while i < p || j < q {
        let advance_inner = if i >= p {
            false
        } else if j >= q {
            true
        } else {
            unwrap(inner, i + 1) <= unwrap(outer, j + 1)
        };
        if advance_inner {
            triangles.push([
                inner_start + i % p,
                outer_start + j % q,
                inner_start + (i + 1) % p,
            ]);
            i += 1;
        } else {
            triangles.push([
                inner_start + i % p,
                outer_start + j % q,
                outer_start + (j + 1) % q,
            ]);
            j += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Electrode layouts
// ---------------------------------------------------------------------------

/// Equispaced electrode arcs on the boundary of the unit disk.
///
/// Electrode `j` is the arc of angular width `coverage * 2pi / k` centered
/// at `pi/k + 2pi j / k`; the layout also records which mesh boundary edges
/// each electrode covers.
#[derive(Debug, Clone)]
pub struct ElectrodeLayout {
    pub k: usize,
    pub coverage: f64,
    /// Arc intervals `[theta_start, theta_end)` per electrode.
    pub arcs: Vec<[f64; 2]>,
    /// Indices into the mesh boundary edge list, per electrode.
    pub edges: Vec<Vec<usize>>,
    /// Polygonal length of each electrode (sum of covered edge chords).
    pub edge_lengths: Vec<f64>,
}

fn check_layout_params(k: usize, coverage: f64) -> Result<()> {
    if k < 2 {
        return Err(Error::Layout(format!("electrode count must be at least 2, got {k}")));
    }
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::Layout(format!("coverage must lie in (0, 1), got {coverage}")));
    }
    Ok(())
}

fn electrode_arcs(k: usize, coverage: f64) -> Vec<[f64; 2]> {
    let tau = 2.0 * std::f64::consts::PI;
    let half_width = coverage * std::f64::consts::PI / k as f64;
    (0..k)
        .map(|j| {
            let center = std::f64::consts::PI / k as f64 + tau * j as f64 / k as f64;
            [center - half_width, center + half_width]
        })
        .collect()
}

/// All boundary angles that must coincide with mesh nodes for the layout:
/// electrode endpoints and the extended-electrode tile boundaries.
fn layout_snap_angles(k: usize, coverage: f64) -> Vec<f64> {
    let tau = 2.0 * std::f64::consts::PI;
    let mut angles = Vec::with_capacity(3 * k);
    for arc in electrode_arcs(k, coverage) {
        angles.push(arc[0]);
        angles.push(arc[1]);
    }
    for j in 0..k {
        angles.push(tau * j as f64 / k as f64);
    }
    angles
}

/// Builds the equispaced electrode layout on a mesh whose boundary resolves
/// it: arc endpoints must coincide with boundary nodes and every electrode
/// must cover at least two boundary edges.
pub fn build_electrode_layout(mesh: &Mesh, k: usize, coverage: f64) -> Result<ElectrodeLayout> {
    check_layout_params(k, coverage)?;
    let arcs = electrode_arcs(k, coverage);

    let node_angles: Vec<f64> = mesh
        .boundary_edges()
        .iter()
        .map(|e| e.theta[0])
        .collect();
    let aligned = |phi: f64| {
        let tau = 2.0 * std::f64::consts::PI;
        node_angles.iter().any(|&t| {
            let d = (t - phi).rem_euclid(tau);
            d < BOUNDARY_TOL || tau - d < BOUNDARY_TOL
        })
    };
    for arc in &arcs {
        for &endpoint in arc {
            if !aligned(endpoint) {
                return Err(Error::Layout(
                    "electrode arc endpoint does not coincide with a mesh boundary node; \
                     generate the mesh aligned to this layout"
                        .into(),
                ));
            }
        }
    }

    let mut edges = vec![Vec::new(); k];
    for (e_idx, edge) in mesh.boundary_edges().iter().enumerate() {
        let mid = edge.mid_theta();
        for (j, arc) in arcs.iter().enumerate() {
            if mid > arc[0] && mid < arc[1] {
                edges[j].push(e_idx);
                break;
            }
        }
    }
    let mut edge_lengths = Vec::with_capacity(k);
    for (j, list) in edges.iter().enumerate() {
        if list.len() < 2 {
            return Err(Error::Layout(format!(
                "electrode {j} covers {} boundary edges; at least 2 required",
                list.len()
            )));
        }
        edge_lengths.push(list.iter().map(|&e| mesh.boundary_edges()[e].length(mesh)).sum());
    }

    Ok(ElectrodeLayout {
        k,
        coverage,
        arcs,
        edges,
        edge_lengths,
    })
}

impl ElectrodeLayout {
    /// Exact arc length of each electrode on the unit circle.
    pub fn arc_length(&self) -> f64 {
        self.coverage * 2.0 * std::f64::consts::PI / self.k as f64
    }

    /// Writes the layout in the plain text interchange format.
    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "{} {:.16e}", self.k, self.coverage).unwrap();
        for arc in &self.arcs {
            writeln!(out, "{:.16e} {:.16e}", arc[0], arc[1]).unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Extended electrodes: the full boundary tile of width `2pi/k` around each
/// electrode, so that the closures cover the whole boundary.
#[derive(Debug, Clone)]
pub struct ExtendedElectrodeLayout {
    /// Tile intervals `[theta_start, theta_end)` per electrode.
    pub extended: Vec<[f64; 2]>,
    /// Realized minimum of electrode-to-tile length ratios.
    pub c_min: f64,
    pub k: usize,
}

/// Surrounds each electrode of an equispaced layout with its full boundary
/// tile. The realized length ratio equals the layout coverage.
pub fn build_extended_electrodes(layout: &ElectrodeLayout) -> Result<ExtendedElectrodeLayout> {
    let tau = 2.0 * std::f64::consts::PI;
    let k = layout.k;
    let tile = tau / k as f64;
    let extended: Vec<[f64; 2]> = (0..k).map(|j| [tile * j as f64, tile * (j as f64 + 1.0)]).collect();
    for (j, arc) in layout.arcs.iter().enumerate() {
        if arc[0] < extended[j][0] - BOUNDARY_TOL || arc[1] > extended[j][1] + BOUNDARY_TOL {
            return Err(Error::Layout(format!(
                "electrode {j} is not contained in its boundary tile; layout is not equispaced"
            )));
        }
    }
    let c_min = (0..k)
        .map(|j| (layout.arcs[j][1] - layout.arcs[j][0]) / tile)
        .fold(f64::INFINITY, f64::min);
    Ok(ExtendedElectrodeLayout { extended, c_min, k })
}

// ---------------------------------------------------------------------------
// Hexagonal test sets
// ---------------------------------------------------------------------------

/// One test set: the triangles whose centroids fall into a hexagon of the
/// tiling, together with the hexagon center and the realized diameter.
#[derive(Debug, Clone)]
pub struct TestCell {
    pub triangles: Vec<usize>,
    pub center: Point2<f64>,
    pub diameter: f64,
}

/// The collection of hexagonal test sets covering the interior of the disk.
#[derive(Debug, Clone)]
pub struct TestSetCollection {
    pub cells: Vec<TestCell>,
    /// Configured hexagon diameter (corner to corner).
    pub diam: f64,
}

impl TestSetCollection {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Mesh area covered by cell `i`.
    pub fn cell_area(&self, mesh: &Mesh, i: usize) -> f64 {
        self.cells[i].triangles.iter().map(|&t| mesh.areas()[t]).sum()
    }
}

/// Corner positions of the flat-top hexagon with the given center and
/// circumradius.
fn hex_corners(center: Point2<f64>, r: f64) -> [Point2<f64>; 6] {
    std::array::from_fn(|t| {
        let ang = std::f64::consts::PI / 3.0 * t as f64;
        Point2::new(center.x + r * ang.cos(), center.y + r * ang.sin())
    })
}

fn hex_center(q: i64, r: i64, radius: f64) -> Point2<f64> {
    let x = radius * 1.5 * q as f64;
    let y = radius * 3.0_f64.sqrt() * (r as f64 + q as f64 / 2.0);
    Point2::new(x, y)
}

/// Axial coordinates of the hexagon containing `p` (flat-top tiling anchored
/// at the origin), by cube rounding.
fn hex_of_point(p: Point2<f64>, radius: f64) -> (i64, i64) {
    let qf = (2.0 / 3.0) * p.x / radius;
    let rf = (-p.x / 3.0 + 3.0_f64.sqrt() / 3.0 * p.y) / radius;
    cube_round(qf, rf)
}

fn cube_round(qf: f64, rf: f64) -> (i64, i64) {
    let sf = -qf - rf;
    let mut q = qf.round();
    let mut r = rf.round();
    let s = sf.round();
    let dq = (q - qf).abs();
    let dr = (r - rf).abs();
    let ds = (s - sf).abs();
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    (q as i64, r as i64)
}

/// Tiles the disk with flat-top hexagons of the given corner-to-corner
/// diameter and assigns triangles to hexagons by centroid. Hexagons that
/// touch the boundary or collect fewer than three triangles are dropped.
pub fn build_hex_test_sets(mesh: &Mesh, diam: f64) -> Result<TestSetCollection> {
    if !(diam > 0.0) {
        return Err(Error::TestSets(format!("diameter must be positive, got {diam}")));
    }
    if diam < 3.0 * mesh.max_edge() {
        return Err(Error::TestSets(format!(
            "diameter {diam} below the guard 3 * max_edge = {:.3e}; small test sets are unreliable on this mesh",
            3.0 * mesh.max_edge()
        )));
    }
    let radius = diam / 2.0;

    let mut buckets: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for t in 0..mesh.n_triangles() {
        let key = hex_of_point(mesh.centroid(t), radius);
        buckets.entry(key).or_default().push(t);
    }

    let mut cells = Vec::new();
    for ((q, r), tris) in buckets {
        if tris.len() < 3 {
            continue;
        }
        let center = hex_center(q, r, radius);
        let inside = hex_corners(center, radius)
            .iter()
            .all(|c| c.coords.norm() < 1.0 - 1e-12);
        if !inside {
            continue;
        }
        if !edge_connected(mesh, &tris) {
            return Err(Error::TestSets(format!(
                "test set at ({:.3}, {:.3}) is not edge-connected; refine the mesh or enlarge the cells",
                center.x, center.y
            )));
        }
        let diameter = cell_diameter(mesh, &tris);
        cells.push(TestCell {
            triangles: tris,
            center,
            diameter,
        });
    }
    Ok(TestSetCollection { cells, diam })
}

fn cell_diameter(mesh: &Mesh, tris: &[usize]) -> f64 {
    let mut verts: Vec<usize> = tris.iter().flat_map(|&t| mesh.triangles()[t]).collect();
    verts.sort_unstable();
    verts.dedup();
    let mut best = 0.0_f64;
    for (i, &a) in verts.iter().enumerate() {
        for &b in &verts[i + 1..] {
            best = best.max((mesh.nodes()[a] - mesh.nodes()[b]).norm());
        }
    }
    best
}

/// BFS over shared (sorted) edges restricted to `tris`.
fn edge_connected(mesh: &Mesh, tris: &[usize]) -> bool {
    if tris.len() <= 1 {
        return true;
    }
    let mut edge_owner: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (local, &t) in tris.iter().enumerate() {
        let tri = mesh.triangles()[t];
        for e in 0..3 {
            let a = tri[e];
            let b = tri[(e + 1) % 3];
            let key = (a.min(b), a.max(b));
            edge_owner.entry(key).or_default().push(local);
        }
    }
    let mut adj = vec![Vec::new(); tris.len()];
    for owners in edge_owner.values() {
        if owners.len() == 2 {
            adj[owners[0]].push(owners[1]);
            adj[owners[1]].push(owners[0]);
        }
    }
    let mut seen = vec![false; tris.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == tris.len()
}


#[cfg(test)]
mod format_tests {
    use super::*;

    #[test]
    fn electrode_layout_text_format() {
        let mesh = generate_aligned_disk_mesh(0.12, 8, 0.5).unwrap();
        let layout = build_electrode_layout(&mesh, 8, 0.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("layout.txt");
        layout.write_text(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
        assert_eq!(header[0], "8");
        assert_eq!(header[1].parse::<f64>().unwrap(), 0.5);
        let arcs: Vec<&str> = lines.collect();
        assert_eq!(arcs.len(), 8);
        for (j, line) in arcs.iter().enumerate() {
            let vals: Vec<f64> = line.split_whitespace().map(|t| t.parse().unwrap()).collect();
            assert_eq!(vals[0], layout.arcs[j][0]);
            assert_eq!(vals[1], layout.arcs[j][1]);
        }
    }
}
