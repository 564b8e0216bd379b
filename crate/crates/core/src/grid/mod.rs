//! Structured-lattice discretization of the Dirichlet problem
//! `F(D²u) = θ` in Ω, `u = φ` on ∂Ω.
//!
//! Unknowns live on lattice points `h·k` strictly inside Ω. A node is
//! *interior* when every stencil line (axes and face diagonals) reaches a
//! neighboring unknown, and *boundary-adjacent* otherwise; in the latter case
//! the line is cut at ∂Ω and the arm ends on a boundary point carrying `φ`.

mod domain;
mod dump;
mod phase_spec;
mod sparse;
mod stencil;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operator::{phase_bound, phase_gradient, phase_of, OperatorError, PhaseClass, Spectrum, SymMatrix};

pub use domain::{DomainKind, DomainSpec};
pub use dump::{dump_columns, dump_csv, node_table, read_dump, DumpRow, SolutionDump};
pub use phase_spec::{boundary_fn, classify_values, BoundaryFn, PhaseSpec};
pub use sparse::CsrMatrix;
pub use stencil::{Arm, ArmEnd, LinearForm, NodeStencil};

use stencil::{first_difference, second_difference, FormBuilder};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("degenerate grid: no lattice point lies inside the domain")]
    DegenerateGrid,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("field length mismatch: expected {expected}, found {found}")]
    FieldLength { expected: usize, found: usize },
    #[error("phase out of range at node {node}: theta = {theta} not inside (-{bound}, {bound})")]
    PhaseOutOfRange { node: usize, theta: f64, bound: f64 },
    #[error("operator failure at node {node}: {source}")]
    Operator { node: usize, source: OperatorError },
    #[error("dump format error: {0}")]
    Dump(String),
    #[error("dump does not match grid: {0}")]
    SignatureMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    Interior,
    BoundaryAdjacent,
    Exterior,
}

impl NodeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeClass::Interior => "interior",
            NodeClass::BoundaryAdjacent => "boundary_adjacent",
            NodeClass::Exterior => "exterior",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "interior" => Some(NodeClass::Interior),
            "boundary_adjacent" => Some(NodeClass::BoundaryAdjacent),
            "exterior" => Some(NodeClass::Exterior),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub lattice: Vec<i64>,
    pub x: Vec<f64>,
    pub class: NodeClass,
    pub boundary_distance: f64,
}

/// Dense lookup from lattice coordinates to node indices over the bounding
/// box of Ω.
#[derive(Clone, Debug)]
struct LatticeIndex {
    half: Vec<i64>,
    strides: Vec<usize>,
    slots: Vec<Option<u32>>,
}

impl LatticeIndex {
    fn new(half: Vec<i64>) -> Self {
        let n = half.len();
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * (2 * half[i + 1] as usize + 1);
        }
        let total = strides[0] * (2 * half[0] as usize + 1);
        Self { half, strides, slots: vec![None; total] }
    }

    fn slot(&self, k: &[i64]) -> Option<usize> {
        let mut s = 0usize;
        for ((ki, hi), st) in k.iter().zip(&self.half).zip(&self.strides) {
            if ki.abs() > *hi {
                return None;
            }
            s += (ki + hi) as usize * st;
        }
        Some(s)
    }

    fn get(&self, k: &[i64]) -> Option<usize> {
        self.slot(k).and_then(|s| self.slots[s]).map(|v| v as usize)
    }

    /// All lattice points of the bounding box in lexicographic order, last
    /// axis fastest.
    fn points(&self) -> Vec<Vec<i64>> {
        let n = self.half.len();
        let mut out = Vec::with_capacity(self.slots.len());
        let mut k: Vec<i64> = self.half.iter().map(|h| -h).collect();
        loop {
            out.push(k.clone());
            let mut d = n;
            loop {
                if d == 0 {
                    return out;
                }
                d -= 1;
                k[d] += 1;
                if k[d] <= self.half[d] {
                    break;
                }
                k[d] = -self.half[d];
            }
        }
    }
}

/// Discretized Dirichlet problem with its current solution field.
#[derive(Clone)]
pub struct GridProblem {
    domain: DomainSpec,
    phase: PhaseSpec,
    phi: BoundaryFn,
    nodes: Vec<Node>,
    stencils: Vec<NodeStencil>,
    index: LatticeIndex,
    boundary_samples: Vec<(Vec<f64>, f64)>,
    theta: Vec<f64>,
    classification: PhaseClass,
    /// Solution values at the nodes.
    pub u: Vec<f64>,
}

impl std::fmt::Debug for GridProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridProblem")
            .field("domain", &self.domain)
            .field("phase", &self.phase)
            .field("nodes", &self.nodes.len())
            .field("classification", &self.classification)
            .finish()
    }
}

/// Lattice points closer than this many spacings to ∂Ω are treated as
/// boundary points. Keeps every Shortley–Weller arm at least `0.007·h` long,
/// so the stencil weights stay bounded by a fixed multiple of `1/h²`.
pub const BOUNDARY_SNAP: f64 = 1e-2;

/// Stencil line directions: the axes, then `eᵢ + eⱼ` and `eᵢ − eⱼ` for `i < j`.
fn line_directions(n: usize) -> Vec<Vec<i64>> {
    let mut dirs = Vec::new();
    for i in 0..n {
        let mut d = vec![0; n];
        d[i] = 1;
        dirs.push(d);
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut p = vec![0; n];
            p[i] = 1;
            p[j] = 1;
            let mut m = vec![0; n];
            m[i] = 1;
            m[j] = -1;
            dirs.push(p);
            dirs.push(m);
        }
    }
    dirs
}

#[inline]
pub(crate) fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (r, c) = if i <= j { (i, j) } else { (j, i) };
    r * (2 * n - r + 1) / 2 + (c - r)
}

impl GridProblem {
    /// Classifies the lattice, builds every node stencil and samples the
    /// phase field. The solution field starts at zero.
    pub fn build(domain: DomainSpec, phi: BoundaryFn, phase: PhaseSpec) -> Result<Self, GridError> {
        domain.validate()?;
        let n = domain.dim;
        if phase.dim() != n {
            return Err(GridError::DimensionMismatch { expected: n, found: phase.dim() });
        }
        let h = domain.h;
        let half: Vec<i64> = (0..n).map(|i| (domain.extent(i) / h).ceil() as i64 + 1).collect();
        let mut index = LatticeIndex::new(half);

        let mut nodes = Vec::new();
        for k in index.points() {
            let x: Vec<f64> = k.iter().map(|&ki| ki as f64 * h).collect();
            if domain.contains(&x) {
                let boundary_distance = domain.distance_to_boundary(&x);
                if boundary_distance < BOUNDARY_SNAP * h {
                    continue;
                }
                let slot = index.slot(&k).expect("lattice point inside bounding box");
                index.slots[slot] = Some(nodes.len() as u32);
                nodes.push(Node { lattice: k, x, class: NodeClass::Interior, boundary_distance });
            }
        }
        if nodes.is_empty() {
            return Err(GridError::DegenerateGrid);
        }

        let dirs = line_directions(n);
        let built: Vec<(NodeStencil, bool, Vec<(Vec<f64>, f64)>)> = nodes
            .par_iter()
            .map(|node| build_stencil(&domain, &index, &phi, &dirs, node))
            .collect();

        let mut stencils = Vec::with_capacity(nodes.len());
        let mut boundary_samples = Vec::new();
        for (node, (st, full, samples)) in nodes.iter_mut().zip(built) {
            if !full {
                node.class = NodeClass::BoundaryAdjacent;
            }
            stencils.push(st);
            boundary_samples.extend(samples);
        }

        let mut p = Self {
            domain,
            phase,
            phi,
            u: vec![0.0; nodes.len()],
            nodes,
            stencils,
            index,
            boundary_samples,
            theta: Vec::new(),
            classification: PhaseClass::Mixed,
        };
        let theta: Vec<f64> = p.nodes.iter().map(|nd| p.phase.eval(&nd.x, 0.0)).collect();
        p.set_theta(theta)?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn h(&self) -> f64 {
        self.domain.h
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn phase(&self) -> &PhaseSpec {
        &self.phase
    }

    pub fn phi(&self) -> &BoundaryFn {
        &self.phi
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn stencil(&self, i: usize) -> &NodeStencil {
        &self.stencils[i]
    }

    /// Boundary points reached by cut stencil arms, with their `φ` values.
    pub fn boundary_samples(&self) -> &[(Vec<f64>, f64)] {
        &self.boundary_samples
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn classification(&self) -> PhaseClass {
        self.classification
    }

    pub fn lookup(&self, lattice: &[i64]) -> Option<usize> {
        self.index.get(lattice)
    }

    /// The unknown one lattice step from node `i` along `±e_axis`, if any.
    pub fn neighbor(&self, i: usize, axis: usize, forward: bool) -> Option<usize> {
        let mut k = self.nodes[i].lattice.clone();
        k[axis] += if forward { 1 } else { -1 };
        self.index.get(&k)
    }

    /// Index of the lattice node at the origin, when it is an unknown.
    pub fn center_node(&self) -> Option<usize> {
        self.lookup(&vec![0; self.dim()])
    }

    /// Replaces the phase field, rejecting values outside `(-nπ/2, nπ/2)`.
    pub fn set_theta(&mut self, theta: Vec<f64>) -> Result<(), GridError> {
        if theta.len() != self.len() {
            return Err(GridError::FieldLength { expected: self.len(), found: theta.len() });
        }
        let bound = phase_bound(self.dim());
        for (node, &t) in theta.iter().enumerate() {
            if !(t.abs() < bound) {
                return Err(GridError::PhaseOutOfRange { node, theta: t, bound });
            }
        }
        self.classification =
            classify_values(&theta, self.dim()).map_err(|source| GridError::Operator { node: 0, source })?;
        self.theta = theta;
        Ok(())
    }

    /// Replaces the phase function and resamples the field.
    pub fn set_phase(&mut self, phase: PhaseSpec) -> Result<(), GridError> {
        if phase.dim() != self.dim() {
            return Err(GridError::DimensionMismatch { expected: self.dim(), found: phase.dim() });
        }
        let theta = self.nodes.iter().zip(&self.u).map(|(nd, &u)| phase.eval(&nd.x, u)).collect();
        self.phase = phase;
        self.set_theta(theta)
    }

    pub fn set_u(&mut self, u: Vec<f64>) -> Result<(), GridError> {
        if u.len() != self.len() {
            return Err(GridError::FieldLength { expected: self.len(), found: u.len() });
        }
        self.u = u;
        Ok(())
    }

    /// Phase at node `i` for solution value `u_i`; only phases that depend on
    /// `u` are re-evaluated.
    #[inline]
    pub fn theta_at(&self, i: usize, u_i: f64) -> f64 {
        if self.phase.depends_on_u() {
            self.phase.eval(&self.nodes[i].x, u_i)
        } else {
            self.theta[i]
        }
    }

    pub fn check_field(&self, u: &[f64]) -> Result<(), GridError> {
        if u.len() != self.len() {
            return Err(GridError::FieldLength { expected: self.len(), found: u.len() });
        }
        Ok(())
    }

    /// Discrete Hessian of the field `u` at node `i`.
    pub fn hessian_of(&self, u: &[f64], i: usize) -> SymMatrix {
        let n = self.dim();
        let st = &self.stencils[i];
        SymMatrix::from_packed(n, st.hess.iter().map(|f| f.eval(u, i)).collect())
    }

    /// Discrete gradient of the field `u` at node `i`.
    pub fn gradient_of(&self, u: &[f64], i: usize) -> Vec<f64> {
        self.stencils[i].grad.iter().map(|f| f.eval(u, i)).collect()
    }

    /// Hessian and gradient of the stored solution at node `i`.
    pub fn discrete_hessian(&self, i: usize) -> (SymMatrix, Vec<f64>) {
        (self.hessian_of(&self.u, i), self.gradient_of(&self.u, i))
    }

    /// Spectra of the discrete Hessian of `u` at every node.
    pub fn spectra_of(&self, u: &[f64]) -> Result<Vec<Spectrum>, GridError> {
        self.check_field(u)?;
        (0..self.len())
            .into_par_iter()
            .map(|i| self.hessian_of(u, i).spectrum().map_err(|source| GridError::Operator { node: i, source }))
            .collect()
    }

    /// `F(D²ₕu) − θ` at every node.
    pub fn residual_of(&self, u: &[f64]) -> Result<Vec<f64>, GridError> {
        self.check_field(u)?;
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let f = phase_of(&self.hessian_of(u, i)).map_err(|source| GridError::Operator { node: i, source })?;
                Ok(f - self.theta_at(i, u[i]))
            })
            .collect()
    }

    pub fn residual(&self) -> Result<Vec<f64>, GridError> {
        self.residual_of(&self.u)
    }

    /// Jacobian of [`residual_of`](Self::residual_of): row `a` is
    /// `Σ_{i,j} DF(M_a)_{ij} ∂(M_a)_{ij}/∂u` with `DF = (I + M²)⁻¹`.
    pub fn jacobian_of(&self, u: &[f64]) -> Result<CsrMatrix, GridError> {
        self.check_field(u)?;
        let n = self.dim();
        let rows: Result<Vec<Vec<(usize, f64)>>, GridError> = (0..self.len())
            .into_par_iter()
            .map(|a| {
                let m = self.hessian_of(u, a);
                let df = phase_gradient(&m).map_err(|source| GridError::Operator { node: a, source })?;
                let mut row = Vec::with_capacity(32);
                let mut diag = 0.0;
                for i in 0..n {
                    for j in i..n {
                        let c = if i == j { df.get(i, i) } else { 2.0 * df.get(i, j) };
                        let form = &self.stencils[a].hess[packed_index(n, i, j)];
                        diag += c * form.center;
                        row.extend(form.terms.iter().map(|&(b, w)| (b, c * w)));
                    }
                }
                if self.phase.depends_on_u() {
                    let x = &self.nodes[a].x;
                    let du = 1e-7 * u[a].abs().max(1.0);
                    let dtheta = (self.phase.eval(x, u[a] + du) - self.phase.eval(x, u[a] - du)) / (2.0 * du);
                    diag -= dtheta;
                }
                row.push((a, diag));
                Ok(row)
            })
            .collect();
        Ok(CsrMatrix::from_rows(self.len(), rows?))
    }

    pub fn assemble_jacobian(&self) -> Result<CsrMatrix, GridError> {
        self.jacobian_of(&self.u)
    }

    /// Nodal values of a smooth function.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|nd| f(&nd.x)).collect()
    }

    /// Boundary data `φ` evaluated at an arbitrary point.
    pub fn phi_at(&self, x: &[f64]) -> f64 {
        (self.phi)(x)
    }
}

fn build_stencil(
    domain: &DomainSpec,
    index: &LatticeIndex,
    phi: &BoundaryFn,
    dirs: &[Vec<i64>],
    node: &Node,
) -> (NodeStencil, bool, Vec<(Vec<f64>, f64)>) {
    let n = domain.dim;
    let h = domain.h;
    let mut full = true;
    let mut samples = Vec::new();
    let mut arms = Vec::with_capacity(dirs.len());
    for d in dirs {
        let mut pair = [None, None];
        for (slot, sign) in [(0usize, 1i64), (1, -1)] {
            let k: Vec<i64> = node.lattice.iter().zip(d).map(|(ki, di)| ki + sign * di).collect();
            let arm = match index.get(&k) {
                Some(j) => Arm { fraction: 1.0, end: ArmEnd::Node(j) },
                None => {
                    full = false;
                    let step: Vec<f64> = d.iter().map(|&di| (sign * di) as f64 * h).collect();
                    let t = domain.ray_exit(&node.x, &step).min(1.0);
                    let z: Vec<f64> = node.x.iter().zip(&step).map(|(xi, si)| xi + t * si).collect();
                    let value = phi(&z);
                    samples.push((z, value));
                    Arm { fraction: t, end: ArmEnd::Boundary { value } }
                }
            };
            pair[slot] = Some(arm);
        }
        let [p, m] = pair;
        arms.push((p.unwrap(), m.unwrap()));
    }

    let second: Vec<LinearForm> = arms
        .iter()
        .zip(dirs)
        .map(|((p, m), d)| {
            let len = (d.iter().map(|v| v * v).sum::<i64>() as f64).sqrt() * h;
            second_difference(p, m, len)
        })
        .collect();
    let unequal = |(p, m): &(Arm, Arm)| (p.fraction - m.fraction).abs() > 1e-12;
    let pure_first_order = arms[..n].iter().any(unequal);
    let mixed_first_order = arms[n..].iter().any(unequal);

    let mut hess = vec![LinearForm::default(); n * (n + 1) / 2];
    for i in 0..n {
        hess[packed_index(n, i, i)] = second[i].clone();
    }
    let mut k = n;
    for i in 0..n {
        for j in i + 1..n {
            let mut f = FormBuilder::default();
            f.add_scaled(&second[k], 0.5);
            f.add_scaled(&second[k + 1], -0.5);
            hess[packed_index(n, i, j)] = f.finish();
            k += 2;
        }
    }
    let grad = (0..n).map(|i| first_difference(&arms[i].0, &arms[i].1, h)).collect();
    (NodeStencil { hess, grad, pure_first_order, mixed_first_order }, full, samples)
}

#[cfg(test)]
mod tests;
