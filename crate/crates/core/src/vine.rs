//! Regular vine structure selection, sequential time-varying fitting,
//! R-vine matrix encoding and simulation.
//!
//! A vine on n variables is a sequence of trees: tree 1 spans the
//! variables; the nodes of tree d+1 are the edges of tree d, and two of
//! them may be joined only when they share a node (the proximity
//! condition). Each edge carries a pair copula between conditional
//! margins. Structure selection weights candidate edges by |Kendall's
//! tau| of the conditional pseudo-observations: a maximum spanning tree
//! for R-vines, a star for C-vines, a greedy Hamiltonian path (first
//! tree) for D-vines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, Driver, FitCfg, GasPath, PairDynamics};
use crate::error::{Error, Result};
use crate::marginals::{PitMode, UniformPanel};
use crate::paircopula::{self, CopulaParam, Family};
use crate::stats;

/// Vine class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VineMode {
    RVine,
    CVine,
    DVine,
}

impl VineMode {
    pub fn name(&self) -> &'static str {
        match self {
            VineMode::RVine => "rvine",
            VineMode::CVine => "cvine",
            VineMode::DVine => "dvine",
        }
    }

    pub fn parse(s: &str) -> Result<VineMode> {
        match s.to_ascii_lowercase().as_str() {
            "rvine" | "r" => Ok(VineMode::RVine),
            "cvine" | "c" => Ok(VineMode::CVine),
            "dvine" | "d" => Ok(VineMode::DVine),
            other => Err(Error::Domain(format!("unknown vine mode `{other}`"))),
        }
    }
}

/// Spanning-tree weight criterion. `MaxAbsTau` is the default;
/// `MinAbsTau` selects the minimum-weight tree instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeCriterion {
    MaxAbsTau,
    MinAbsTau,
}

/// One vine edge: conditioned pair, conditioning set, and (above the
/// first tree) the indices of the two previous-level edges it joins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VineEdge {
    /// 1-based tree level.
    pub level: usize,
    /// Conditioned variables, ascending.
    pub conditioned: (usize, usize),
    /// Conditioning variables, ascending.
    pub conditioning: Vec<usize>,
    /// Indices into the previous level's edge list; `None` at level 1.
    /// The first child's variable set contains `conditioned.0`.
    pub children: Option<(usize, usize)>,
}

impl VineEdge {
    /// All variables touched by this edge.
    pub fn full_set(&self) -> Vec<usize> {
        let mut all = self.conditioning.clone();
        all.push(self.conditioned.0);
        all.push(self.conditioned.1);
        all.sort_unstable();
        all
    }

    pub fn label(&self) -> String {
        if self.conditioning.is_empty() {
            format!("{},{}", self.conditioned.0 + 1, self.conditioned.1 + 1)
        } else {
            let cond: Vec<String> = self
                .conditioning
                .iter()
                .map(|v| (v + 1).to_string())
                .collect();
            format!(
                "{},{}|{}",
                self.conditioned.0 + 1,
                self.conditioned.1 + 1,
                cond.join(",")
            )
        }
    }
}

/// Tree sequence of a regular vine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VineStructure {
    pub n: usize,
    pub mode: VineMode,
    pub trees: Vec<Vec<VineEdge>>,
}

impl VineStructure {
    /// Builds and validates a structure from per-level conditioned pairs
    /// and conditioning sets, inferring child links.
    pub fn from_edge_sets(
        n: usize,
        mode: VineMode,
        levels: &[Vec<(usize, usize, Vec<usize>)>],
    ) -> Result<VineStructure> {
        if n < 2 {
            return Err(Error::Structure("vine needs at least 2 variables".into()));
        }
        if levels.len() != n - 1 {
            return Err(Error::Structure(format!(
                "expected {} tree levels, got {}",
                n - 1,
                levels.len()
            )));
        }
        let mut trees: Vec<Vec<VineEdge>> = Vec::with_capacity(n - 1);
        for (li, level_edges) in levels.iter().enumerate() {
            let level = li + 1;
            if level_edges.len() != n - level {
                return Err(Error::Structure(format!(
                    "tree {level} has {} edges, expected {}",
                    level_edges.len(),
                    n - level
                )));
            }
            let mut built: Vec<VineEdge> = Vec::with_capacity(level_edges.len());
            for &(a, b, ref cond) in level_edges {
                if a == b || a >= n || b >= n {
                    return Err(Error::Structure(format!(
                        "invalid conditioned pair ({a},{b})"
                    )));
                }
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let mut conditioning = cond.clone();
                conditioning.sort_unstable();
                conditioning.dedup();
                if conditioning.len() != level - 1 {
                    return Err(Error::Structure(format!(
                        "edge ({lo},{hi}) at tree {level} has conditioning size {}",
                        conditioning.len()
                    )));
                }
                if conditioning.contains(&lo) || conditioning.contains(&hi) {
                    return Err(Error::Structure(
                        "conditioned variable repeated in conditioning set".into(),
                    ));
                }
                let children = if level == 1 {
                    None
                } else {
                    let prev = &trees[li - 1];
                    let want_a: Vec<usize> = {
                        let mut s = conditioning.clone();
                        s.push(lo);
                        s.sort_unstable();
                        s
                    };
                    let want_b: Vec<usize> = {
                        let mut s = conditioning.clone();
                        s.push(hi);
                        s.sort_unstable();
                        s
                    };
                    let ia = find_unique_edge(prev, &want_a, lo)?;
                    let ib = find_unique_edge(prev, &want_b, hi)?;
                    if !edges_adjacent(&trees, li - 1, ia, ib) {
                        return Err(Error::Structure(format!(
                            "proximity violated for edge ({},{}) at tree {level}",
                            lo + 1,
                            hi + 1
                        )));
                    }
                    Some((ia, ib))
                };
                built.push(VineEdge {
                    level,
                    conditioned: (lo, hi),
                    conditioning,
                    children,
                });
            }
            // Each level must be a tree over its node space.
            let n_nodes = if level == 1 { n } else { trees[li - 1].len() };
            let node_ids: Vec<(usize, usize)> = built
                .iter()
                .map(|e| match e.children {
                    None => e.conditioned,
                    Some(c) => c,
                })
                .collect();
            check_spanning_tree(n_nodes, &node_ids)?;
            trees.push(built);
        }
        Ok(VineStructure { n, mode, trees })
    }

    pub fn n_edges(&self) -> usize {
        self.trees.iter().map(|t| t.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let levels: Vec<Vec<(usize, usize, Vec<usize>)>> = self
            .trees
            .iter()
            .map(|t| {
                t.iter()
                    .map(|e| (e.conditioned.0, e.conditioned.1, e.conditioning.clone()))
                    .collect()
            })
            .collect();
        let rebuilt = VineStructure::from_edge_sets(self.n, self.mode, &levels)?;
        for (mine, theirs) in self
            .trees
            .iter()
            .flatten()
            .zip(rebuilt.trees.iter().flatten())
        {
            if mine.conditioned != theirs.conditioned || mine.conditioning != theirs.conditioning {
                return Err(Error::Structure("edge books disagree after rebuild".into()));
            }
        }
        Ok(())
    }
}

fn find_unique_edge(
    prev: &[VineEdge],
    full_set: &[usize],
    conditioned_member: usize,
) -> Result<usize> {
    let mut found = None;
    for (i, e) in prev.iter().enumerate() {
        if e.full_set() == full_set {
            if found.is_some() {
                return Err(Error::Structure(format!(
                    "duplicate edge with variable set {full_set:?}"
                )));
            }
            found = Some(i);
        }
    }
    let idx = found.ok_or_else(|| {
        Error::Structure(format!("no previous edge with variable set {full_set:?}"))
    })?;
    let e = &prev[idx];
    if e.conditioned.0 != conditioned_member && e.conditioned.1 != conditioned_member {
        return Err(Error::Structure(format!(
            "variable {conditioned_member} not conditioned in child edge {}",
            e.label()
        )));
    }
    Ok(idx)
}

/// Two edges of `trees[level_idx]` are adjacent when they share a node
/// of that tree: a variable at level 1, a previous-level edge above.
fn edges_adjacent(trees: &[Vec<VineEdge>], level_idx: usize, i: usize, j: usize) -> bool {
    let (a, b) = (&trees[level_idx][i], &trees[level_idx][j]);
    match (a.children, b.children) {
        (None, None) => {
            let shared = [a.conditioned.0, a.conditioned.1]
                .iter()
                .filter(|v| **v == b.conditioned.0 || **v == b.conditioned.1)
                .count();
            shared == 1
        }
        (Some(ca), Some(cb)) => {
            let shared = [ca.0, ca.1]
                .iter()
                .filter(|v| **v == cb.0 || **v == cb.1)
                .count();
            shared == 1
        }
        _ => false,
    }
}

fn check_spanning_tree(n_nodes: usize, edges: &[(usize, usize)]) -> Result<()> {
    if edges.len() + 1 != n_nodes {
        return Err(Error::Structure(format!(
            "{} edges cannot span {n_nodes} nodes",
            edges.len()
        )));
    }
    let mut uf: Vec<usize> = (0..n_nodes).collect();
    fn root(uf: &mut Vec<usize>, mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    for &(a, b) in edges {
        if a >= n_nodes || b >= n_nodes {
            return Err(Error::Structure("edge endpoint out of range".into()));
        }
        let (ra, rb) = (root(&mut uf, a), root(&mut uf, b));
        if ra == rb {
            return Err(Error::Structure("cycle in tree".into()));
        }
        uf[ra] = rb;
    }
    Ok(())
}

/// Candidate edge for the next tree level under the proximity condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateEdge {
    pub conditioned: (usize, usize),
    pub conditioning: Vec<usize>,
    /// Indices of the two previous-level edges it would join.
    pub children: (usize, usize),
}

/// Enumerates the admissible edges of the next tree: pairs of
/// previous-tree edges sharing exactly one node. The conditioned pair is
/// the symmetric difference of the two variable sets and the
/// conditioning set is their intersection.
pub fn proximity_candidates(prev_tree: &[VineEdge]) -> Vec<CandidateEdge> {
    let mut out = Vec::new();
    let all_trees = [prev_tree.to_vec()];
    for i in 0..prev_tree.len() {
        for j in i + 1..prev_tree.len() {
            if !edges_adjacent(&all_trees, 0, i, j) {
                continue;
            }
            let fi = prev_tree[i].full_set();
            let fj = prev_tree[j].full_set();
            let mut sym: Vec<usize> = Vec::new();
            let mut inter: Vec<usize> = Vec::new();
            for v in fi.iter().chain(fj.iter()) {
                let in_i = fi.binary_search(v).is_ok();
                let in_j = fj.binary_search(v).is_ok();
                if in_i && in_j {
                    if !inter.contains(v) {
                        inter.push(*v);
                    }
                } else if !sym.contains(v) {
                    sym.push(*v);
                }
            }
            sym.sort_unstable();
            inter.sort_unstable();
            if sym.len() != 2 {
                continue;
            }
            // children.0 is the edge whose variable set holds conditioned.0.
            let children = if fi.binary_search(&sym[0]).is_ok() {
                (i, j)
            } else {
                (j, i)
            };
            out.push(CandidateEdge {
                conditioned: (sym[0], sym[1]),
                conditioning: inter,
                children,
            });
        }
    }
    out.sort_by_key(|c| c.conditioned);
    out
}

/// Spanning tree over weighted candidate edges. Nodes are indices
/// `0..n_nodes`; each candidate is `(node_a, node_b, tau)` and the
/// weight is |tau|. Deterministic lexicographic tie-breaking.
pub fn select_tree_weighted(
    n_nodes: usize,
    candidates: &[(usize, usize, f64)],
    mode: VineMode,
    criterion: TreeCriterion,
) -> Result<Vec<usize>> {
    if n_nodes < 2 {
        return Err(Error::Structure("tree needs at least 2 nodes".into()));
    }
    let better = |w_new: f64, w_old: f64| match criterion {
        TreeCriterion::MaxAbsTau => w_new > w_old,
        TreeCriterion::MinAbsTau => w_new < w_old,
    };

    match mode {
        VineMode::RVine => {
            // Prim growth from the node with the largest weight sum.
            let mut strength = vec![0.0; n_nodes];
            for &(a, b, tau) in candidates {
                strength[a] += tau.abs();
                strength[b] += tau.abs();
            }
            let start = (0..n_nodes)
                .max_by(|&i, &j| strength[i].partial_cmp(&strength[j]).unwrap())
                .unwrap();
            let mut in_tree = vec![false; n_nodes];
            in_tree[start] = true;
            let mut chosen = Vec::with_capacity(n_nodes - 1);
            for _ in 0..n_nodes - 1 {
                let mut pick: Option<(usize, f64)> = None;
                for (ci, &(a, b, tau)) in candidates.iter().enumerate() {
                    if in_tree[a] == in_tree[b] {
                        continue; // both inside or both outside
                    }
                    let w = tau.abs();
                    let replace = match pick {
                        None => true,
                        Some((_, best_w)) => better(w, best_w),
                    };
                    if replace {
                        pick = Some((ci, w));
                    }
                }
                let (ci, _) = pick.ok_or_else(|| {
                    Error::Structure("candidate edges do not connect all nodes".into())
                })?;
                let (a, b, _) = candidates[ci];
                in_tree[a] = true;
                in_tree[b] = true;
                chosen.push(ci);
            }
            chosen.sort_unstable();
            Ok(chosen)
        }
        VineMode::CVine => {
            // Star at the root with the largest (smallest) weight sum.
            let mut strength = vec![0.0; n_nodes];
            let mut degree = vec![0usize; n_nodes];
            for &(a, b, tau) in candidates {
                strength[a] += tau.abs();
                strength[b] += tau.abs();
                degree[a] += 1;
                degree[b] += 1;
            }
            let eligible: Vec<usize> = (0..n_nodes).filter(|&i| degree[i] == n_nodes - 1).collect();
            if eligible.is_empty() {
                return Err(Error::Structure(
                    "no node is adjacent to all others; c-vine star impossible".into(),
                ));
            }
            let root = *eligible
                .iter()
                .max_by(|&&i, &&j| {
                    let cmp = strength[i].partial_cmp(&strength[j]).unwrap();
                    match criterion {
                        TreeCriterion::MaxAbsTau => cmp,
                        TreeCriterion::MinAbsTau => cmp.reverse(),
                    }
                })
                .unwrap();
            let chosen: Vec<usize> = candidates
                .iter()
                .enumerate()
                .filter(|(_, &(a, b, _))| a == root || b == root)
                .map(|(ci, _)| ci)
                .collect();
            Ok(chosen)
        }
        VineMode::DVine => {
            // Greedy Hamiltonian path: strongest edges first, subject to
            // degree <= 2 and acyclicity.
            let mut order: Vec<usize> = (0..candidates.len()).collect();
            order.sort_by(|&x, &y| {
                let (ax, bx, tx) = candidates[x];
                let (ay, by, ty) = candidates[y];
                let cmp = tx.abs().partial_cmp(&ty.abs()).unwrap();
                let cmp = match criterion {
                    TreeCriterion::MaxAbsTau => cmp.reverse(),
                    TreeCriterion::MinAbsTau => cmp,
                };
                cmp.then((ax, bx).cmp(&(ay, by)))
            });
            let mut uf: Vec<usize> = (0..n_nodes).collect();
            fn root(uf: &mut Vec<usize>, mut x: usize) -> usize {
                while uf[x] != x {
                    uf[x] = uf[uf[x]];
                    x = uf[x];
                }
                x
            }
            let mut degree = vec![0usize; n_nodes];
            let mut chosen = Vec::with_capacity(n_nodes - 1);
            for ci in order {
                if chosen.len() == n_nodes - 1 {
                    break;
                }
                let (a, b, _) = candidates[ci];
                if degree[a] >= 2 || degree[b] >= 2 {
                    continue;
                }
                let (ra, rb) = (root(&mut uf, a), root(&mut uf, b));
                if ra == rb {
                    continue;
                }
                uf[ra] = rb;
                degree[a] += 1;
                degree[b] += 1;
                chosen.push(ci);
            }
            if chosen.len() != n_nodes - 1 {
                return Err(Error::Structure(
                    "candidate edges admit no hamiltonian path".into(),
                ));
            }
            chosen.sort_unstable();
            Ok(chosen)
        }
    }
}

/// Computes Kendall's tau for each allowed node pair and selects a
/// spanning tree. Returns `(node_a, node_b, tau)` per chosen edge.
pub fn select_tree(
    node_series: &[&[f64]],
    allowed_edges: &[(usize, usize)],
    mode: VineMode,
    criterion: TreeCriterion,
) -> Result<Vec<(usize, usize, f64)>> {
    let weighted: Vec<(usize, usize, f64)> = allowed_edges
        .iter()
        .map(|&(a, b)| {
            let tau = paircopula::kendall_tau(node_series[a], node_series[b]).unwrap_or(0.0);
            (a, b, tau)
        })
        .collect();
    let chosen = select_tree_weighted(node_series.len(), &weighted, mode, criterion)?;
    Ok(chosen.into_iter().map(|ci| weighted[ci]).collect())
}

/// Applies the fitted edge's h-functions along its parameter path:
/// `out.0[t] = h(u_t | v_t; θ_t)` and `out.1[t] = h(v_t | u_t; θ_t)`.
pub fn conditional_series(
    dynamics: &PairDynamics,
    path: &GasPath,
    u: &[f64],
    v: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if u.len() != v.len() || u.len() != path.theta.len() {
        return Err(Error::Dimension(format!(
            "conditional_series length mismatch: u={}, v={}, path={}",
            u.len(),
            v.len(),
            path.theta.len()
        )));
    }
    let nu = dynamics.coef.nu_static();
    let mut first = Vec::with_capacity(u.len());
    let mut second = Vec::with_capacity(u.len());
    for t in 0..u.len() {
        let param = CopulaParam {
            theta: path.theta[t],
            nu,
        };
        first.push(paircopula::h_function(dynamics.family, &param, u[t], v[t])?);
        second.push(paircopula::h_function(dynamics.family, &param, v[t], u[t])?);
    }
    Ok((first, second))
}

/// One fitted vine edge with its conditional pseudo-series.
#[derive(Debug, Clone)]
pub struct FittedEdge {
    pub edge: VineEdge,
    pub tau: f64,
    pub dynamics: PairDynamics,
    pub path: GasPath,
    /// h(conditioned.0 | conditioned.1, conditioning) per t.
    pub cond_lo: Vec<f64>,
    /// h(conditioned.1 | conditioned.0, conditioning) per t.
    pub cond_hi: Vec<f64>,
}

impl FittedEdge {
    /// Conditional column for one member of the conditioned pair.
    pub fn column_for(&self, var: usize) -> Result<&[f64]> {
        if var == self.edge.conditioned.0 {
            Ok(&self.cond_lo)
        } else if var == self.edge.conditioned.1 {
            Ok(&self.cond_hi)
        } else {
            Err(Error::Structure(format!(
                "variable {var} not conditioned in edge {}",
                self.edge.label()
            )))
        }
    }

    pub fn copula_param_at(&self, t: usize) -> Result<CopulaParam> {
        let theta = self
            .path
            .theta_at(t)
            .ok_or_else(|| Error::Domain(format!("time index {t} beyond filtered path")))?;
        Ok(CopulaParam {
            theta,
            nu: self.dynamics.coef.nu_static(),
        })
    }
}

/// Fully fitted time-varying vine.
#[derive(Debug, Clone)]
pub struct FittedTVVine {
    pub n: usize,
    pub mode: VineMode,
    pub names: Vec<String>,
    pub trees: Vec<Vec<FittedEdge>>,
    pub total_copula_loglik: f64,
    pub total_aic: f64,
    pub pit_mode: PitMode,
    pub n_obs: usize,
    pub warnings: Vec<String>,
}

impl FittedTVVine {
    pub fn structure(&self) -> VineStructure {
        VineStructure {
            n: self.n,
            mode: self.mode,
            trees: self
                .trees
                .iter()
                .map(|t| t.iter().map(|fe| fe.edge.clone()).collect())
                .collect(),
        }
    }

    pub fn n_edges(&self) -> usize {
        self.trees.iter().map(|t| t.len()).sum()
    }
}

/// Configuration for [`fit_sequential`].
#[derive(Debug, Clone)]
pub struct FitVineCfg {
    pub mode: VineMode,
    pub families: Vec<Family>,
    pub driver: Driver,
    pub criterion: TreeCriterion,
    pub fit: FitCfg,
}

impl Default for FitVineCfg {
    fn default() -> Self {
        FitVineCfg {
            mode: VineMode::RVine,
            families: Family::ALL.to_vec(),
            driver: Driver::Gas,
            criterion: TreeCriterion::MaxAbsTau,
            fit: FitCfg::default(),
        }
    }
}

/// Sequential tree-by-tree estimation: select a tree, fit every edge by
/// AIC family selection, push the conditional pseudo-observations to the
/// next level. Edge fits within a level run in parallel.
pub fn fit_sequential(u: &UniformPanel, cfg: &FitVineCfg) -> Result<FittedTVVine> {
    u.validate()?;
    let n = u.n_series();
    let t_len = u.len();
    if n < 2 {
        return Err(Error::Dimension("vine needs at least 2 series".into()));
    }
    let mut warnings = Vec::new();
    if t_len < 100 {
        warnings.push(format!("sample length {t_len} below the recommended 100"));
    }

    let mut trees: Vec<Vec<FittedEdge>> = Vec::with_capacity(n - 1);

    // Tree 1 over the raw uniform columns.
    let node_series: Vec<&[f64]> = u.columns.iter().map(|c| c.as_slice()).collect();
    let all_pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let selected = select_tree(&node_series, &all_pairs, cfg.mode, cfg.criterion)?;
    let mut level_edges: Vec<(VineEdge, f64, Vec<f64>, Vec<f64>)> = selected
        .iter()
        .map(|&(a, b, tau)| {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let edge = VineEdge {
                level: 1,
                conditioned: (lo, hi),
                conditioning: vec![],
                children: None,
            };
            (edge, tau, u.columns[lo].clone(), u.columns[hi].clone())
        })
        .collect();
    level_edges.sort_by_key(|(e, ..)| e.conditioned);
    trees.push(fit_level(level_edges, cfg)?);

    // Deeper trees over conditional pseudo-observations.
    for level in 2..n {
        let prev_fitted = &trees[level - 2];
        let prev_edges: Vec<VineEdge> = prev_fitted.iter().map(|fe| fe.edge.clone()).collect();
        let candidates = proximity_candidates(&prev_edges);
        if candidates.is_empty() {
            return Err(Error::Structure(format!(
                "no admissible edges at tree {level}"
            )));
        }
        let weighted: Vec<(usize, usize, f64)> = candidates
            .iter()
            .map(|c| {
                let col_a = prev_fitted[c.children.0].column_for(c.conditioned.0)?;
                let col_b = prev_fitted[c.children.1].column_for(c.conditioned.1)?;
                let tau = paircopula::kendall_tau(col_a, col_b).unwrap_or(0.0);
                Ok((c.children.0, c.children.1, tau))
            })
            .collect::<Result<Vec<_>>>()?;
        let chosen = select_tree_weighted(prev_fitted.len(), &weighted, cfg.mode, cfg.criterion)?;

        let mut level_edges: Vec<(VineEdge, f64, Vec<f64>, Vec<f64>)> = chosen
            .iter()
            .map(|&ci| {
                let cand = &candidates[ci];
                let tau = weighted[ci].2;
                let col_a = prev_fitted[cand.children.0]
                    .column_for(cand.conditioned.0)?
                    .to_vec();
                let col_b = prev_fitted[cand.children.1]
                    .column_for(cand.conditioned.1)?
                    .to_vec();
                let edge = VineEdge {
                    level,
                    conditioned: cand.conditioned,
                    conditioning: cand.conditioning.clone(),
                    children: Some(cand.children),
                };
                Ok((edge, tau, col_a, col_b))
            })
            .collect::<Result<Vec<_>>>()?;
        level_edges.sort_by_key(|(e, ..)| e.conditioned);
        trees.push(fit_level(level_edges, cfg)?);
    }

    let total_copula_loglik = trees.iter().flatten().map(|fe| fe.dynamics.loglik).sum();
    let total_aic = trees.iter().flatten().map(|fe| fe.dynamics.aic).sum();
    for fe in trees.iter().flatten() {
        if fe.path.saturation_warning() {
            warnings.push(format!(
                "edge {} saturated on {} steps",
                fe.edge.label(),
                fe.path.saturated_steps
            ));
        }
    }
    Ok(FittedTVVine {
        n,
        mode: cfg.mode,
        names: u.names.clone(),
        trees,
        total_copula_loglik,
        total_aic,
        pit_mode: u.mode,
        n_obs: t_len,
        warnings,
    })
}

fn fit_level(
    level_edges: Vec<(VineEdge, f64, Vec<f64>, Vec<f64>)>,
    cfg: &FitVineCfg,
) -> Result<Vec<FittedEdge>> {
    level_edges
        .into_par_iter()
        .map(|(edge, tau, col_a, col_b)| {
            let mut fit_cfg = cfg.fit.clone();
            let salt = (edge.level as u64) << 32
                | (edge.conditioned.0 as u64) << 16
                | edge.conditioned.1 as u64;
            fit_cfg.seed = stats::mix_seed(cfg.fit.seed, salt);
            let (dynamics, path) =
                dynamics::select_family(&col_a, &col_b, &cfg.families, cfg.driver, &fit_cfg)
                    .map_err(|e| Error::EdgeFit {
                        edge: edge.label(),
                        message: e.to_string(),
                    })?;
            let (cond_lo, cond_hi) = conditional_series(&dynamics, &path, &col_a, &col_b)?;
            Ok(FittedEdge {
                edge,
                tau,
                dynamics,
                path,
                cond_lo,
                cond_hi,
            })
        })
        .collect()
}

/// Full model log-likelihood: marginal terms plus every edge term.
pub fn total_loglik(fitted: &FittedTVVine, marginal_logliks: &[f64]) -> f64 {
    marginal_logliks.iter().sum::<f64>() + fitted.total_copula_loglik
}

/// Per-column chain view of a structure: the diagonal variable and its
/// edges ordered from the deepest tree down to tree 1. The chain order
/// doubles as the simulation order.
#[derive(Debug, Clone)]
pub struct ColumnChain {
    pub diagonal: usize,
    /// (level, edge index within that level), level descending.
    pub edges: Vec<(usize, usize)>,
}

/// Decomposes the structure into diagonal chains, the core step of both
/// the matrix encoding and the simulation algorithm.
pub fn rvine_chains(structure: &VineStructure) -> Result<Vec<ColumnChain>> {
    let n = structure.n;
    let mut consumed: Vec<Vec<bool>> = structure
        .trees
        .iter()
        .map(|t| vec![false; t.len()])
        .collect();
    let mut used_var = vec![false; n];
    let mut chains = Vec::with_capacity(n);

    for col in 0..n - 1 {
        let top_level = n - 1 - col; // 1-based level of the column's deepest edge
        let remaining: Vec<usize> = (0..structure.trees[top_level - 1].len())
            .filter(|&i| !consumed[top_level - 1][i])
            .collect();
        if remaining.len() != 1 {
            return Err(Error::Structure(format!(
                "expected one unconsumed edge at tree {top_level}, found {}",
                remaining.len()
            )));
        }
        let top_idx = remaining[0];
        let top = &structure.trees[top_level - 1][top_idx];
        // Deterministic diagonal: the smaller conditioned variable.
        let diag = top.conditioned.0;

        let mut edges = Vec::with_capacity(top_level);
        let mut level = top_level;
        let mut idx = top_idx;
        loop {
            let e = &structure.trees[level - 1][idx];
            if e.conditioned.0 != diag && e.conditioned.1 != diag {
                return Err(Error::Structure(format!(
                    "chain broken: {} lacks diagonal {diag}",
                    e.label()
                )));
            }
            consumed[level - 1][idx] = true;
            edges.push((level, idx));
            if level == 1 {
                break;
            }
            let (ia, ib) = e.children.expect("level >= 2 has children");
            let prev = &structure.trees[level - 2];
            let next = if prev[ia].conditioned.0 == diag || prev[ia].conditioned.1 == diag {
                ia
            } else if prev[ib].conditioned.0 == diag || prev[ib].conditioned.1 == diag {
                ib
            } else {
                return Err(Error::Structure(format!(
                    "no child of {} conditions on {diag}",
                    e.label()
                )));
            };
            idx = next;
            level -= 1;
        }
        used_var[diag] = true;
        chains.push(ColumnChain {
            diagonal: diag,
            edges,
        });
    }

    let last = (0..n)
        .find(|&v| !used_var[v])
        .ok_or_else(|| Error::Structure("no variable left for the final diagonal".into()))?;
    chains.push(ColumnChain {
        diagonal: last,
        edges: vec![],
    });
    Ok(chains)
}

/// Lower-triangular R-vine matrix with 1-based variable entries; entry
/// `m[i][j]` (0-based rows/columns) pairs the diagonal `m[j][j]` with
/// `m[i][j]` given `{m[i+1][j], ..., m[n-1][j]}` at tree level `n - i`.
pub fn to_rvine_matrix(structure: &VineStructure) -> Result<Vec<Vec<usize>>> {
    let n = structure.n;
    let chains = rvine_chains(structure)?;
    let mut matrix = vec![vec![0usize; n]; n];
    for (col, chain) in chains.iter().enumerate() {
        matrix[col][col] = chain.diagonal + 1;
        for &(level, idx) in &chain.edges {
            let e = &structure.trees[level - 1][idx];
            let partner = if e.conditioned.0 == chain.diagonal {
                e.conditioned.1
            } else {
                e.conditioned.0
            };
            matrix[n - level][col] = partner + 1;
        }
    }
    Ok(matrix)
}

/// Rebuilds a structure from an R-vine matrix (inverse of
/// [`to_rvine_matrix`] up to edge bookkeeping).
pub fn from_rvine_matrix(matrix: &[Vec<usize>], mode: VineMode) -> Result<VineStructure> {
    let n = matrix.len();
    if n < 2 || matrix.iter().any(|row| row.len() != n) {
        return Err(Error::Structure("matrix must be square, n >= 2".into()));
    }
    let mut diag_seen = vec![false; n];
    for j in 0..n {
        let d = matrix[j][j];
        if d == 0 || d > n || diag_seen[d - 1] {
            return Err(Error::Structure(
                "diagonal must be a permutation of 1..=n".into(),
            ));
        }
        diag_seen[d - 1] = true;
    }
    let mut levels: Vec<Vec<(usize, usize, Vec<usize>)>> = vec![Vec::new(); n - 1];
    for j in 0..n - 1 {
        for i in j + 1..n {
            let level = n - i; // 1-based
            let a = matrix[j][j] - 1;
            let b = matrix[i][j];
            if b == 0 || b > n {
                return Err(Error::Structure(format!("entry ({i},{j}) out of range")));
            }
            let b = b - 1;
            let conditioning: Vec<usize> = (i + 1..n).map(|r| matrix[r][j] - 1).collect();
            levels[level - 1].push((a, b, conditioning));
        }
    }
    for level in levels.iter_mut() {
        level.sort_by_key(|&(a, b, _)| (a.min(b), a.max(b)));
    }
    VineStructure::from_edge_sets(n, mode, &levels)
}

/// Per-edge natural copula parameters frozen at one time index.
pub(crate) struct FrozenVine<'a> {
    pub structure: &'a VineStructure,
    pub families: Vec<Vec<Family>>,
    pub params: Vec<Vec<CopulaParam>>,
}

impl<'a> FrozenVine<'a> {
    fn family_param(&self, level: usize, idx: usize) -> (Family, &CopulaParam) {
        (self.families[level - 1][idx], &self.params[level - 1][idx])
    }

    /// Conditional value F(var | full_set \ {var}) of an edge, computed
    /// recursively through the child links with memoization.
    fn cond_value(
        &self,
        x: &[f64],
        memo: &mut std::collections::HashMap<(usize, usize, usize), f64>,
        level: usize,
        idx: usize,
        var: usize,
    ) -> Result<f64> {
        if let Some(&v) = memo.get(&(level, idx, var)) {
            return Ok(v);
        }
        let edge = &self.structure.trees[level - 1][idx];
        let (a, b) = edge.conditioned;
        let other = if var == a {
            b
        } else if var == b {
            a
        } else {
            return Err(Error::Structure(format!(
                "variable {var} not conditioned in {}",
                edge.label()
            )));
        };
        let (family, param) = self.family_param(level, idx);
        let value = if level == 1 {
            paircopula::h_function(family, param, x[var], x[other])?
        } else {
            let (ia, ib) = edge.children.expect("level >= 2");
            let prev = &self.structure.trees[level - 2];
            let child_of = |v: usize| -> Result<usize> {
                if prev[ia].conditioned.0 == v || prev[ia].conditioned.1 == v {
                    Ok(ia)
                } else if prev[ib].conditioned.0 == v || prev[ib].conditioned.1 == v {
                    Ok(ib)
                } else {
                    Err(Error::Structure(format!(
                        "no child of {} conditions on {v}",
                        edge.label()
                    )))
                }
            };
            let v_val = self.cond_value(x, memo, level - 1, child_of(var)?, var)?;
            let o_val = self.cond_value(x, memo, level - 1, child_of(other)?, other)?;
            paircopula::h_function(family, param, v_val, o_val)?
        };
        memo.insert((level, idx, var), value);
        Ok(value)
    }

    /// Inverse-h recursion for one draw given uniforms `w` in chain
    /// order.
    pub(crate) fn simulate_one(&self, chains: &[ColumnChain], w: &[f64]) -> Result<Vec<f64>> {
        let n = self.structure.n;
        let mut x = vec![f64::NAN; n];
        let mut memo = std::collections::HashMap::new();
        // Last chain has no edges: its variable is the raw uniform.
        x[chains[n - 1].diagonal] = w[n - 1];
        for col in (0..n - 1).rev() {
            let chain = &chains[col];
            let v = chain.diagonal;
            let mut t = w[col];
            for &(level, idx) in &chain.edges {
                let edge = &self.structure.trees[level - 1][idx];
                let partner = if edge.conditioned.0 == v {
                    edge.conditioned.1
                } else {
                    edge.conditioned.0
                };
                let partner_val = if level == 1 {
                    x[partner]
                } else {
                    let (ia, ib) = edge.children.expect("level >= 2");
                    let prev = &self.structure.trees[level - 2];
                    let child =
                        if prev[ia].conditioned.0 == partner || prev[ia].conditioned.1 == partner {
                            ia
                        } else {
                            ib
                        };
                    self.cond_value(&x, &mut memo, level - 1, child, partner)?
                };
                let (family, param) = self.family_param(level, idx);
                t = paircopula::h_inverse(family, param, t, partner_val)?;
            }
            x[v] = t;
        }
        Ok(x)
    }

    /// The pair of conditional arguments each edge sees for a complete
    /// observation `x`, level by level.
    pub(crate) fn edge_inputs(&self, x: &[f64]) -> Result<Vec<Vec<(f64, f64)>>> {
        let mut memo = std::collections::HashMap::new();
        let mut out = Vec::with_capacity(self.structure.trees.len());
        for (li, tree) in self.structure.trees.iter().enumerate() {
            let level = li + 1;
            let mut per_edge = Vec::with_capacity(tree.len());
            for (idx, edge) in tree.iter().enumerate() {
                let (a, b) = edge.conditioned;
                let (va, vb) = if level == 1 {
                    (x[a], x[b])
                } else {
                    let (ia, ib) = edge.children.expect("level >= 2");
                    let prev = &self.structure.trees[level - 2];
                    let child_of = |v: usize| {
                        if prev[ia].conditioned.0 == v || prev[ia].conditioned.1 == v {
                            ia
                        } else {
                            ib
                        }
                    };
                    (
                        self.cond_value(x, &mut memo, level - 1, child_of(a), a)?,
                        self.cond_value(x, &mut memo, level - 1, child_of(b), b)?,
                    )
                };
                let _ = idx;
                per_edge.push((va, vb));
            }
            out.push(per_edge);
        }
        Ok(out)
    }
}

pub(crate) fn freeze_at<'a>(
    fitted: &'a FittedTVVine,
    structure: &'a VineStructure,
    t_index: usize,
) -> Result<FrozenVine<'a>> {
    let mut families = Vec::with_capacity(fitted.trees.len());
    let mut params = Vec::with_capacity(fitted.trees.len());
    for tree in &fitted.trees {
        let mut f_row = Vec::with_capacity(tree.len());
        let mut p_row = Vec::with_capacity(tree.len());
        for fe in tree {
            f_row.push(fe.dynamics.family);
            p_row.push(fe.copula_param_at(t_index)?);
        }
        families.push(f_row);
        params.push(p_row);
    }
    Ok(FrozenVine {
        structure,
        families,
        params,
    })
}

/// Draws joint uniforms from the fitted vine at time `t_index`
/// (`t_index == n_obs` selects the one-step-ahead parameters).
/// Deterministic given the seed: draw `i` uses substream `i`.
pub fn simulate(
    fitted: &FittedTVVine,
    t_index: usize,
    n_draws: usize,
    seed: u64,
) -> Result<UniformPanel> {
    if n_draws == 0 {
        return Err(Error::Domain("n_draws must be positive".into()));
    }
    let structure = fitted.structure();
    let chains = rvine_chains(&structure)?;
    let frozen = freeze_at(fitted, &structure, t_index)?;
    let n = fitted.n;

    let draws: Vec<Vec<f64>> = (0..n_draws)
        .into_par_iter()
        .map(|draw| {
            use rand::Rng;
            let mut rng = stats::substream_rng(seed, draw as u64);
            let w: Vec<f64> = (0..n)
                .map(|_| rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12))
                .collect();
            frozen
                .simulate_one(&chains, &w)
                .map_err(|e| Error::EdgeFit {
                    edge: format!("draw {draw}"),
                    message: e.to_string(),
                })
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let columns: Vec<Vec<f64>> = (0..n)
        .map(|v| draws.iter().map(|d| d[v]).collect())
        .collect();
    Ok(UniformPanel {
        names: fitted.names.clone(),
        columns,
        mode: fitted.pit_mode,
    })
}

/// Builds a constant-parameter vine, mainly for simulation tests and
/// synthetic data generation.
pub fn static_vine(
    structure: VineStructure,
    edge_params: Vec<Vec<(Family, CopulaParam)>>,
    names: Vec<String>,
    n_obs: usize,
) -> Result<FittedTVVine> {
    structure.validate()?;
    if edge_params.len() != structure.trees.len() {
        return Err(Error::Dimension("edge_params shape mismatch".into()));
    }
    let mut trees = Vec::with_capacity(structure.trees.len());
    for (tree, params) in structure.trees.iter().zip(edge_params) {
        if params.len() != tree.len() {
            return Err(Error::Dimension("edge_params shape mismatch".into()));
        }
        let mut fitted = Vec::with_capacity(tree.len());
        for (edge, (family, param)) in tree.iter().zip(params) {
            let link = dynamics::link_inverse(family, param.theta);
            let coef = dynamics::DriverCoef::Gas(dynamics::GasCoef {
                k: link,
                a: 0.0,
                b: 0.0,
                nu_static: param.nu,
                gamma: 0.0,
            });
            fitted.push(FittedEdge {
                edge: edge.clone(),
                tau: 0.0,
                dynamics: PairDynamics {
                    family,
                    coef,
                    loglik: 0.0,
                    aic: 0.0,
                    converged: true,
                },
                path: GasPath {
                    theta_tilde: vec![link; n_obs],
                    theta: vec![param.theta; n_obs],
                    theta_next: param.theta,
                    loglik: 0.0,
                    saturated_steps: 0,
                },
                cond_lo: vec![],
                cond_hi: vec![],
            });
        }
        trees.push(fitted);
    }
    Ok(FittedTVVine {
        n: structure.n,
        mode: structure.mode,
        names,
        trees,
        total_copula_loglik: 0.0,
        total_aic: 0.0,
        pit_mode: PitMode::Empirical,
        n_obs,
        warnings: vec![],
    })
}

/// Serializable form of a fitted vine: structure and coefficients only;
/// parameter paths are refiltered against data on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VineArtifact {
    pub format_version: u32,
    pub n: usize,
    pub mode: VineMode,
    pub names: Vec<String>,
    pub pit_mode: PitMode,
    pub rvine_matrix: Vec<Vec<usize>>,
    pub trees: Vec<Vec<EdgeRecord>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub conditioned: (usize, usize),
    pub conditioning: Vec<usize>,
    pub tau: f64,
    pub dynamics: PairDynamics,
}

pub const VINE_FORMAT_VERSION: u32 = 1;

impl VineArtifact {
    pub fn from_fitted(fitted: &FittedTVVine) -> Result<VineArtifact> {
        let structure = fitted.structure();
        Ok(VineArtifact {
            format_version: VINE_FORMAT_VERSION,
            n: fitted.n,
            mode: fitted.mode,
            names: fitted.names.clone(),
            pit_mode: fitted.pit_mode,
            rvine_matrix: to_rvine_matrix(&structure)?,
            trees: fitted
                .trees
                .iter()
                .map(|t| {
                    t.iter()
                        .map(|fe| EdgeRecord {
                            conditioned: fe.edge.conditioned,
                            conditioning: fe.edge.conditioning.clone(),
                            tau: fe.tau,
                            dynamics: fe.dynamics.clone(),
                        })
                        .collect()
                })
                .collect(),
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<VineArtifact> {
        let text = std::fs::read_to_string(path)?;
        let artifact: VineArtifact = serde_json::from_str(&text)?;
        if artifact.format_version != VINE_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "vine artifact version {} != supported {}",
                artifact.format_version, VINE_FORMAT_VERSION
            )));
        }
        Ok(artifact)
    }

    /// Recomputes the filtered paths and conditional series against a
    /// uniform panel, reconstructing a usable [`FittedTVVine`].
    pub fn refilter(&self, u: &UniformPanel) -> Result<FittedTVVine> {
        u.validate()?;
        if u.n_series() != self.n {
            return Err(Error::Dimension(format!(
                "panel has {} series, artifact expects {}",
                u.n_series(),
                self.n
            )));
        }
        let levels: Vec<Vec<(usize, usize, Vec<usize>)>> = self
            .trees
            .iter()
            .map(|t| {
                t.iter()
                    .map(|r| (r.conditioned.0, r.conditioned.1, r.conditioning.clone()))
                    .collect()
            })
            .collect();
        let structure = VineStructure::from_edge_sets(self.n, self.mode, &levels)?;

        let mut trees: Vec<Vec<FittedEdge>> = Vec::with_capacity(structure.trees.len());
        for (li, tree) in structure.trees.iter().enumerate() {
            let mut fitted_level = Vec::with_capacity(tree.len());
            for (edge, record) in tree.iter().zip(&self.trees[li]) {
                let (col_a, col_b): (Vec<f64>, Vec<f64>) = if edge.level == 1 {
                    (
                        u.columns[edge.conditioned.0].clone(),
                        u.columns[edge.conditioned.1].clone(),
                    )
                } else {
                    let (ia, ib) = edge.children.expect("level >= 2");
                    let prev: &Vec<FittedEdge> = &trees[li - 1];
                    (
                        prev[ia].column_for(edge.conditioned.0)?.to_vec(),
                        prev[ib].column_for(edge.conditioned.1)?.to_vec(),
                    )
                };
                let path = dynamics::filter(
                    record.dynamics.family,
                    &record.dynamics.coef,
                    &col_a,
                    &col_b,
                )
                .map_err(|e| Error::EdgeFit {
                    edge: edge.label(),
                    message: e.to_string(),
                })?;
                let (cond_lo, cond_hi) =
                    conditional_series(&record.dynamics, &path, &col_a, &col_b)?;
                fitted_level.push(FittedEdge {
                    edge: edge.clone(),
                    tau: record.tau,
                    dynamics: record.dynamics.clone(),
                    path,
                    cond_lo,
                    cond_hi,
                });
            }
            trees.push(fitted_level);
        }
        let total_copula_loglik = trees.iter().flatten().map(|fe| fe.dynamics.loglik).sum();
        let total_aic = trees.iter().flatten().map(|fe| fe.dynamics.aic).sum();
        Ok(FittedTVVine {
            n: self.n,
            mode: self.mode,
            names: self.names.clone(),
            trees,
            total_copula_loglik,
            total_aic,
            pit_mode: self.pit_mode,
            n_obs: u.len(),
            warnings: vec![],
        })
    }
}
