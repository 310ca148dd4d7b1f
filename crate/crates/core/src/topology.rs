//! Classical circuit matrices: capacitance C, susceptance L*, branch incidence
//! vectors w_k, loop incidence G and external-flux distribution B.
//!
//! Branch orientation: a branch touching ground points from its live node to
//! ground, any other branch points from its lower node to its higher node. With
//! φ_b = wᵀΦ + bᵀφ_ext this gives w = e_from − e_to with ground dropped.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::netlist::{to_si, CircuitSpec, Element, ElementKind, FluxDistribution};

/// Capacitance given to inductive branches without an explicit `cap` when
/// distributing time-dependent flux.
pub const PLACEHOLDER_BRANCH_CAP: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchKind {
    LinearInductor,
    Junction,
}

/// Rule used to pick closure branches before growing the spanning tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TreeOrder {
    /// Junction closures preferred, last eligible branch in sorted order.
    #[default]
    Standard,
    /// Linear-inductor closures preferred, first eligible branch in sorted order.
    Alternate,
}

#[derive(Debug, Clone)]
pub struct InductiveBranch {
    pub index: usize,
    pub kind: BranchKind,
    /// Normalized edge key (min, max).
    pub edge: (usize, usize),
    /// Position of the element within its edge list.
    pub element: usize,
    pub from: usize,
    pub to: usize,
    /// Inductance in henry or E_J in joule.
    pub value: f64,
    pub w: Vec<i32>,
    pub b: Vec<f64>,
    /// Indices of declared loops containing this branch.
    pub loops: Vec<usize>,
    /// Branch capacitance used by the time-dependent flux distribution.
    pub cap: f64,
}

#[derive(Debug, Clone)]
pub struct CircuitMatrices {
    pub n_nodes: usize,
    pub n_loops: usize,
    pub c: DMatrix<f64>,
    pub lstar: DMatrix<f64>,
    pub branches: Vec<InductiveBranch>,
    /// Stacked w_kᵀ, one row per inductive branch.
    pub w: DMatrix<i32>,
    /// Stacked b_kᵀ.
    pub b: DMatrix<f64>,
    /// Loop incidence, one row per loop.
    pub g: DMatrix<i32>,
    /// Diagonal of C_ed.
    pub c_ed: DVector<f64>,
    /// Closure branch of each loop.
    pub closures: Vec<usize>,
    pub flux_dist: FluxDistribution,
}

fn orientation(edge: (usize, usize)) -> (usize, usize) {
    if edge.0 == 0 {
        (edge.1, 0)
    } else {
        edge
    }
}

/// Incidence vector of a node pair: +1 at `from`, −1 at `to`, ground dropped.
pub fn incidence(n_nodes: usize, from: usize, to: usize) -> Vec<i32> {
    let mut w = vec![0; n_nodes];
    if from > 0 {
        w[from - 1] += 1;
    }
    if to > 0 {
        w[to - 1] -= 1;
    }
    w
}

fn stamp(m: &mut DMatrix<f64>, (i, j): (usize, usize), v: f64) {
    if i > 0 {
        m[(i - 1, i - 1)] += v;
    }
    if j > 0 {
        m[(j - 1, j - 1)] += v;
    }
    if i > 0 && j > 0 {
        m[(i - 1, j - 1)] -= v;
        m[(j - 1, i - 1)] -= v;
    }
}

/// Capacitance matrix including capacitors attached to inductive elements.
pub fn build_cap_matrix(spec: &CircuitSpec) -> Result<DMatrix<f64>> {
    let n = spec.n_nodes();
    let mut c = DMatrix::zeros(n, n);
    for (&edge, elements) in &spec.edges {
        for e in elements {
            let cap = match e {
                Element::Capacitor(c) => Some(c),
                other => other.parallel_cap(),
            };
            if let Some(cap) = cap {
                stamp(&mut c, edge, to_si(cap.value, ElementKind::Capacitor)?);
            }
        }
    }
    Ok(c)
}

/// Susceptance matrix L*: stamped 1/l of linear inductors; junctions excluded.
pub fn build_susceptance_matrix(spec: &CircuitSpec) -> Result<DMatrix<f64>> {
    let n = spec.n_nodes();
    let mut l = DMatrix::zeros(n, n);
    for (&edge, elements) in &spec.edges {
        for e in elements {
            if let Element::Inductor(ind) = e {
                stamp(&mut l, edge, 1.0 / to_si(ind.value, ElementKind::Inductor)?);
            }
        }
    }
    Ok(l)
}

/// Walks the branches of one loop as a single closed cycle starting from
/// `start` in its own direction. Returns the traversal sign of every branch or
/// `None` when the branches do not form exactly one simple cycle.
pub fn trace_cycle(ends: &[(usize, usize)], start: usize) -> Option<Vec<i32>> {
    if ends.len() < 2 {
        return None;
    }
    let mut degree = std::collections::BTreeMap::new();
    for &(a, b) in ends {
        *degree.entry(a).or_insert(0) += 1;
        *degree.entry(b).or_insert(0) += 1;
    }
    if degree.values().any(|&d| d != 2) {
        return None;
    }
    let mut signs = vec![0; ends.len()];
    signs[start] = 1;
    let origin = ends[start].0;
    let mut node = ends[start].1;
    let mut used = 1;
    while node != origin {
        let next = (0..ends.len()).find(|&k| signs[k] == 0 && (ends[k].0 == node || ends[k].1 == node))?;
        if ends[next].0 == node {
            signs[next] = 1;
            node = ends[next].1;
        } else {
            signs[next] = -1;
            node = ends[next].0;
        }
        used += 1;
    }
    (used == ends.len()).then_some(signs)
}

/// Inductive branches in canonical order with loop memberships resolved.
fn collect_branches(spec: &CircuitSpec) -> Result<Vec<InductiveBranch>> {
    let n = spec.n_nodes();
    let mut out = Vec::new();
    for (&edge, elements) in &spec.edges {
        for (pos, e) in elements.iter().enumerate() {
            let (kind, value) = match e {
                Element::Capacitor(_) => continue,
                Element::Inductor(l) => (BranchKind::LinearInductor, to_si(l.value, ElementKind::Inductor)?),
                Element::Junction(j) => (BranchKind::Junction, to_si(j.value, ElementKind::Junction)?),
            };
            let mut loops = Vec::new();
            for id in e.loops() {
                let idx = spec
                    .loop_index(id)
                    .ok_or_else(|| Error::Invalid(format!("element on edge {edge:?} references unknown loop '{id}'")))?;
                if !loops.contains(&idx) {
                    loops.push(idx);
                }
            }
            let cap = match e.parallel_cap() {
                Some(c) => to_si(c.value, ElementKind::Capacitor)?,
                None => PLACEHOLDER_BRANCH_CAP,
            };
            let (from, to) = orientation(edge);
            out.push(InductiveBranch {
                index: out.len(),
                kind,
                edge,
                element: pos,
                from,
                to,
                value,
                w: incidence(n, from, to),
                b: vec![0.0; spec.loops.len()],
                loops,
                cap,
            });
        }
    }
    Ok(out)
}

fn loop_members(branches: &[InductiveBranch], l: usize) -> Vec<usize> {
    branches.iter().filter(|b| b.loops.contains(&l)).map(|b| b.index).collect()
}

fn designate_closures(branches: &[InductiveBranch], n_loops: usize, order: TreeOrder) -> Option<Vec<usize>> {
    let mut closures: Vec<usize> = Vec::with_capacity(n_loops);
    for l in 0..n_loops {
        let private: Vec<&InductiveBranch> = branches
            .iter()
            .filter(|b| b.loops == [l] && !closures.contains(&b.index))
            .collect();
        let preferred = match order {
            TreeOrder::Standard => BranchKind::Junction,
            TreeOrder::Alternate => BranchKind::LinearInductor,
        };
        let pick = |cands: Vec<&&InductiveBranch>| -> Option<usize> {
            match order {
                TreeOrder::Standard => cands.last().map(|b| b.index),
                TreeOrder::Alternate => cands.first().map(|b| b.index),
            }
        };
        let favoured: Vec<&&InductiveBranch> = private.iter().filter(|b| b.kind == preferred).collect();
        let chosen = pick(favoured).or_else(|| pick(private.iter().collect()))?;
        closures.push(chosen);
    }
    Some(closures)
}

/// Breadth-first spanning forest over the inductive graph, skipping `excluded`.
fn bfs_tree(branches: &[InductiveBranch], n_nodes: usize, excluded: &[usize]) -> Vec<usize> {
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n_nodes + 1];
    for b in branches {
        if excluded.contains(&b.index) {
            continue;
        }
        adjacency[b.from].push(b.index);
        adjacency[b.to].push(b.index);
    }
    let mut visited = vec![false; n_nodes + 1];
    let mut tree = Vec::new();
    for root in 0..=n_nodes {
        if visited[root] || adjacency[root].is_empty() {
            continue;
        }
        visited[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(node) = queue.pop_front() {
            for &k in &adjacency[node] {
                let b = &branches[k];
                let other = if b.from == node { b.to } else { b.from };
                if !visited[other] {
                    visited[other] = true;
                    tree.push(k);
                    queue.push_back(other);
                }
            }
        }
    }
    tree.sort_unstable();
    tree
}

struct TreeResult {
    closures: Vec<usize>,
    g: DMatrix<i32>,
}

fn spanning_tree(branches: &[InductiveBranch], n_nodes: usize, n_loops: usize, order: TreeOrder) -> Result<TreeResult> {
    // Every declared loop must be a single closed inductive cycle.
    let mut loop_signs = Vec::with_capacity(n_loops);
    for l in 0..n_loops {
        let members = loop_members(branches, l);
        let ends: Vec<(usize, usize)> = members.iter().map(|&k| (branches[k].from, branches[k].to)).collect();
        if trace_cycle(&ends, 0).is_none() {
            return Err(Error::Topology(format!(
                "loop {} is not closed by its inductive branches ({} member(s))",
                l + 1,
                members.len()
            )));
        }
        loop_signs.push(members);
    }

    let designated = designate_closures(branches, n_loops, order);
    let excluded = designated.clone().unwrap_or_default();
    let tree = bfs_tree(branches, n_nodes, &excluded);
    let mut non_tree: Vec<usize> = (0..branches.len()).filter(|k| !tree.contains(k)).collect();
    non_tree.sort_unstable();

    let closures = match designated {
        Some(d) => {
            let mut sorted = d.clone();
            sorted.sort_unstable();
            if sorted != non_tree {
                let extra = non_tree.iter().find(|k| !d.contains(k)).copied();
                return Err(Error::Topology(match extra {
                    Some(k) => format!(
                        "inductive cycle through branch on edge {:?} is not declared as a loop",
                        branches[k].edge
                    ),
                    None => "declared loops are not independent".into(),
                }));
            }
            d
        }
        None => {
            if non_tree.len() != n_loops {
                return Err(Error::Topology(format!(
                    "circuit has {} independent inductive cycles but {} loops are declared",
                    non_tree.len(),
                    n_loops
                )));
            }
            non_tree
        }
    };

    let mut g = DMatrix::<i32>::zeros(n_loops, branches.len());
    for (l, members) in loop_signs.iter().enumerate() {
        let ends: Vec<(usize, usize)> = members.iter().map(|&k| (branches[k].from, branches[k].to)).collect();
        // Orient each loop along its closure branch when it belongs to the loop.
        let start = members.iter().position(|&k| k == closures[l]).unwrap_or(0);
        let signs = trace_cycle(&ends, start).expect("cycle checked above");
        for (pos, &k) in members.iter().enumerate() {
            g[(l, k)] = signs[pos];
        }
    }
    Ok(TreeResult { closures, g })
}

/// Spanning-tree flux assignment: solves G_c B_c = I on the closure columns.
fn assign_static(g: &DMatrix<i32>, closures: &[usize], n_branches: usize) -> Result<DMatrix<f64>> {
    let n_loops = closures.len();
    let mut b = DMatrix::zeros(n_branches, n_loops);
    if n_loops == 0 {
        return Ok(b);
    }
    let gc = DMatrix::from_fn(n_loops, n_loops, |l, c| g[(l, closures[c])] as f64);
    let inv = if gc == DMatrix::identity(n_loops, n_loops) {
        gc
    } else {
        gc.lu()
            .try_inverse()
            .ok_or_else(|| Error::Topology("declared loops are not independent".into()))?
    };
    for (c, &k) in closures.iter().enumerate() {
        for l in 0..n_loops {
            b[(k, l)] = inv[(c, l)];
        }
    }
    Ok(b)
}

/// Time-dependent flux distribution: B solving Wᵀ C_ed B = 0 and G B = I.
pub fn assign_fluxes_timedep(w: &DMatrix<i32>, g: &DMatrix<i32>, c_ed: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n_branches = w.nrows();
    let n_nodes = w.ncols();
    let n_loops = g.nrows();
    if n_loops == 0 {
        return Ok(DMatrix::zeros(n_branches, 0));
    }
    let scale = c_ed.max();
    let mut m = DMatrix::zeros(n_nodes + n_loops, n_branches);
    for i in 0..n_nodes {
        for k in 0..n_branches {
            m[(i, k)] = w[(k, i)] as f64 * c_ed[k] / scale;
        }
    }
    for l in 0..n_loops {
        for k in 0..n_branches {
            m[(n_nodes + l, k)] = g[(l, k)] as f64;
        }
    }
    let mut rhs = DMatrix::zeros(n_nodes + n_loops, n_loops);
    for l in 0..n_loops {
        rhs[(n_nodes + l, l)] = 1.0;
    }
    let b = if m.is_square() {
        m.clone().lu().solve(&rhs)
    } else {
        None
    };
    let b = match b {
        Some(b) => b,
        None => {
            let svd = m.clone().svd(true, true);
            let smax = svd.singular_values.max();
            svd.solve(&rhs, 1e-13 * smax)
                .map_err(|e| Error::Topology(format!("flux distribution solve failed: {e}")))?
        }
    };
    let (r_cap, r_loop) = timedep_residuals(w, g, c_ed, &b);
    if r_cap > 1e-9 || r_loop > 1e-9 {
        let rank = m.clone().svd(false, false).rank(1e-13 * m.amax());
        return Err(Error::Topology(format!(
            "flux distribution system is rank deficient (rank {rank} of {n_branches}); residuals {r_cap:e}, {r_loop:e}"
        )));
    }
    Ok(b)
}

/// Relative residuals ‖WᵀC_ed B‖/‖WᵀC_ed‖ and ‖GB − I‖ (max norms).
pub fn timedep_residuals(w: &DMatrix<i32>, g: &DMatrix<i32>, c_ed: &DVector<f64>, b: &DMatrix<f64>) -> (f64, f64) {
    let wf = w.map(|x| x as f64);
    let wtc = wf.transpose() * DMatrix::from_diagonal(c_ed);
    let r1 = (&wtc * b).amax() / wtc.amax().max(f64::MIN_POSITIVE);
    let gf = g.map(|x| x as f64);
    let r2 = (gf * b - DMatrix::identity(g.nrows(), g.nrows())).amax();
    (r1, r2)
}

/// Builds all classical matrices for `spec` using the default tree rule.
pub fn build_matrices(spec: &CircuitSpec) -> Result<CircuitMatrices> {
    build_matrices_with(spec, TreeOrder::Standard)
}

pub fn build_matrices_with(spec: &CircuitSpec, order: TreeOrder) -> Result<CircuitMatrices> {
    let n_nodes = spec.n_nodes();
    let n_loops = spec.loops.len();
    let c = build_cap_matrix(spec)?;
    let lstar = build_susceptance_matrix(spec)?;
    let mut branches = collect_branches(spec)?;
    let tree = spanning_tree(&branches, n_nodes, n_loops, order)?;
    let w = DMatrix::from_fn(branches.len(), n_nodes, |k, i| branches[k].w[i]);
    let c_ed = DVector::from_iterator(branches.len(), branches.iter().map(|b| b.cap));
    let b = match spec.settings.flux_dist {
        FluxDistribution::Junctions => assign_static(&tree.g, &tree.closures, branches.len())?,
        FluxDistribution::All => assign_fluxes_timedep(&w, &tree.g, &c_ed)?,
    };
    for br in branches.iter_mut() {
        br.b = b.row(br.index).iter().copied().collect();
    }
    Ok(CircuitMatrices {
        n_nodes,
        n_loops,
        c,
        lstar,
        branches,
        w,
        b,
        g: tree.g,
        c_ed,
        closures: tree.closures,
        flux_dist: spec.settings.flux_dist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;

    /// Two-loop circuit of the appendix worked example (capacitances in fF).
    const TWO_LOOP: &str = "\
[units]
cap = fF
[loops]
l1 = flux 0
l2 = flux 0
[elements]
(0,1): C 1; JJ 5 GHz loops l2 cap 2
(0,2): JJ 5 GHz loops l1 cap 3
(1,3): JJ 5 GHz loops l2 cap 4
(2,3): C 6; JJ 5 GHz loops l1 cap 7
(0,3): L 1 GHz loops l1,l2
";

    #[test]
    fn two_loop_capacitance_matrix() {
        let spec = parse_netlist(TWO_LOOP).unwrap();
        let c = build_cap_matrix(&spec).unwrap() * 1e15;
        // c1 = 1, cJ2 = 2 (on (0,1)), cJ1 = 3 (on (0,2)), cJ3 = 4, c2 = 6, cJ4 = 7.
        let expected = [[1.0 + 2.0 + 4.0, 0.0, -4.0], [0.0, 6.0 + 3.0 + 7.0, -13.0], [-4.0, -13.0, 6.0 + 4.0 + 7.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((c[(i, j)] - expected[i][j]).abs() < 1e-12, "{i}{j}: {}", c[(i, j)]);
            }
        }
    }

    #[test]
    fn two_loop_susceptance_and_vectors() {
        let spec = parse_netlist(TWO_LOOP).unwrap();
        let m = build_matrices(&spec).unwrap();
        let l = 1.0 / to_si(crate::netlist::ElementValue::new(1.0, crate::netlist::Unit::GHz), ElementKind::Inductor).unwrap();
        assert_eq!(m.lstar[(2, 2)], l);
        assert_eq!(m.lstar.iter().filter(|&&x| x != 0.0).count(), 1);
        // Branch order: (0,1) JJ, (0,2) JJ, (0,3) L, (1,3) JJ, (2,3) JJ.
        assert_eq!(m.branches[0].w, vec![1, 0, 0]);
        assert_eq!(m.branches[1].w, vec![0, 1, 0]);
        assert_eq!(m.branches[2].w, vec![0, 0, 1]);
        assert_eq!(m.branches[3].w, vec![1, 0, -1]);
        assert_eq!(m.branches[4].w, vec![0, 1, -1]);
        assert_eq!(m.branches[3].b, vec![0.0, 1.0]);
        assert_eq!(m.branches[4].b, vec![1.0, 0.0]);
        for k in [0, 1, 2] {
            assert_eq!(m.branches[k].b, vec![0.0, 0.0]);
        }
        assert_eq!(&m.g * &m.w, DMatrix::<i32>::zeros(2, 3));
    }

    #[test]
    fn zero_pi_counts() {
        let spec = parse_netlist(crate::netlist::tests_support::ZERO_PI).unwrap();
        let m = build_matrices(&spec).unwrap();
        assert_eq!(m.branches.len(), 4);
        assert_eq!(m.n_loops, 1);
        let j_closure = m.closures[0];
        assert_eq!(m.branches[j_closure].kind, BranchKind::Junction);
        assert_eq!(&m.g * &m.w, DMatrix::<i32>::zeros(1, 3));
    }

    #[test]
    fn single_branch_no_loop() {
        let spec = parse_netlist("[elements]\n(0,1): C 1; L 1\n").unwrap();
        let m = build_matrices(&spec).unwrap();
        assert_eq!(m.w, DMatrix::from_row_slice(1, 1, &[1]));
        assert_eq!(m.b.ncols(), 0);
    }

    #[test]
    fn parallel_capacitors_sum() {
        let spec = parse_netlist("[units]\ncap = fF\n[elements]\n(0,1): C 1\n(0,2): C 1\n(1,2): C 2; C 3\n").unwrap();
        let c = build_cap_matrix(&spec).unwrap();
        assert!((c[(0, 1)] + 5e-15).abs() < 1e-28);
    }

    #[test]
    fn fluxonium_timedep_matches_hand_solve() {
        let text = "[loops]\nl1 = flux 0\n[elements]\n(0,1): L 0.46 loops l1; JJ 10.2 loops l1 cap 3.6\n[settings]\nflux_dist = all\n";
        let spec = parse_netlist(text).unwrap();
        let m = build_matrices(&spec).unwrap();
        // Node equation: cL bL + cJ bJ = 0; loop equation (closure JJ, L traversed backwards): bJ − bL = 1.
        let cj = to_si(crate::netlist::ElementValue::new(3.6, crate::netlist::Unit::GHz), ElementKind::Capacitor).unwrap();
        let cl = PLACEHOLDER_BRANCH_CAP;
        let bj = cl / (cl + cj);
        let bl = -cj / (cl + cj);
        assert!((m.branches[1].b[0] - bj).abs() < 1e-12);
        assert!((m.branches[0].b[0] - bl).abs() < 1e-12);
        let (r1, r2) = timedep_residuals(&m.w, &m.g, &m.c_ed, &m.b);
        assert!(r1 <= 1e-9 && r2 <= 1e-9);
    }

    #[test]
    fn stacked_loops_sharing_a_branch() {
        let spec = parse_netlist(TWO_LOOP).unwrap();
        let m = build_matrices(&spec).unwrap();
        let gf = m.g.map(|x| x as f64);
        assert!((gf * &m.b - DMatrix::identity(2, 2)).amax() == 0.0);
    }

    #[test]
    fn undeclared_cycle_is_rejected() {
        let err = build_matrices(&parse_netlist("[elements]\n(0,1): C 1; JJ 1; JJ 2\n").unwrap()).unwrap_err();
        assert!(err.to_string().contains("not declared"), "{err}");
    }

    #[test]
    fn trace_cycle_detects_open_paths() {
        assert!(trace_cycle(&[(1, 0), (1, 2)], 0).is_none());
        assert_eq!(trace_cycle(&[(1, 0), (1, 0)], 0), Some(vec![1, -1]));
    }

    #[test]
    fn alternate_tree_moves_the_closure() {
        let text = "[loops]\nl1 = flux 0.3\n[elements]\n(0,1): L 0.46 loops l1; JJ 10.2 loops l1; C 3.6\n";
        let spec = parse_netlist(text).unwrap();
        let a = build_matrices_with(&spec, TreeOrder::Standard).unwrap();
        let b = build_matrices_with(&spec, TreeOrder::Alternate).unwrap();
        assert_eq!(a.branches[a.closures[0]].kind, BranchKind::Junction);
        assert_eq!(b.branches[b.closures[0]].kind, BranchKind::LinearInductor);
    }
}
