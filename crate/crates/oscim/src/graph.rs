//! Problem instances: random graph generation, MaxCut/Ising conventions and
//! an exhaustive ground-state oracle for small sizes.
//!
//! Convention used everywhere in this crate: an edge of the MaxCut problem
//! carries coupling weight -1 (antiferromagnetic), so that minimizing the
//! Ising energy
//!
//! ```text
//! E = -(1/2) sum_{i,j} W_ij s_i s_j,   s_i in {+1, -1}
//! ```
//!
//! is equivalent to maximizing the cut. For such instances
//! `cut = (|edges| - E) / 2` exactly.

use serde::{Deserialize, Serialize};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{OscimError, Result};
use crate::matrix::SquareMatrix;

/// Largest n accepted by the exhaustive oracle (2^(n-1) enumeration).
pub const MAX_BRUTE_FORCE_N: usize = 24;

/// How a problem instance was produced.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphKind {
    ErdosRenyi { p: f64 },
    Regular { degree: usize },
    Explicit,
}

impl GraphKind {
    pub fn label(&self) -> String {
        match self {
            GraphKind::ErdosRenyi { p } => format!("erdos_renyi(p={p})"),
            GraphKind::Regular { degree } => format!("regular(degree={degree})"),
            GraphKind::Explicit => "explicit".to_string(),
        }
    }

    fn parse(label: &str) -> Self {
        if let Some(rest) = label
            .strip_prefix("erdos_renyi(p=")
            .and_then(|r| r.strip_suffix(')'))
        {
            if let Ok(p) = rest.parse::<f64>() {
                return GraphKind::ErdosRenyi { p };
            }
        }
        if let Some(rest) = label
            .strip_prefix("regular(degree=")
            .and_then(|r| r.strip_suffix(')'))
        {
            if let Ok(degree) = rest.parse::<usize>() {
                return GraphKind::Regular { degree };
            }
        }
        GraphKind::Explicit
    }
}

/// Symmetric weighted coupling graph defining one Ising / MaxCut problem.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingInstance {
    pub n: usize,
    /// Symmetric n-by-n coupling matrix with zero diagonal.
    pub weights: SquareMatrix,
    /// Edges (i, j, w) with i < j, in sync with `weights`.
    pub edge_list: Vec<(usize, usize, f64)>,
    pub seed: u64,
    pub kind: GraphKind,
}

/// On-disk form: `{"n": .., "kind": .., "seed": .., "edges": [[i, j, w], ..]}`.
#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    kind: String,
    seed: u64,
    edges: Vec<(usize, usize, f64)>,
}

impl IsingInstance {
    /// Build an instance from an explicit edge list; weights are mirrored.
    pub fn from_edges(
        n: usize,
        edges: Vec<(usize, usize, f64)>,
        seed: u64,
        kind: GraphKind,
    ) -> Result<Self> {
        if n < 2 {
            return Err(OscimError::InvalidInstance(format!(
                "need at least 2 nodes, got {n}"
            )));
        }
        let mut weights = SquareMatrix::zeros(n);
        for &(i, j, w) in &edges {
            if i >= j || j >= n {
                return Err(OscimError::InvalidInstance(format!(
                    "bad edge ({i}, {j}) for n = {n}"
                )));
            }
            if weights.get(i, j) != 0.0 {
                return Err(OscimError::InvalidInstance(format!(
                    "duplicate edge ({i}, {j})"
                )));
            }
            weights.set_sym(i, j, w);
        }
        Ok(Self {
            n,
            weights,
            edge_list: edges,
            seed,
            kind,
        })
    }

    pub fn num_edges(&self) -> usize {
        self.edge_list.len()
    }

    /// Check the structural invariants (symmetry, zero diagonal, edge list in
    /// sync with the matrix).
    pub fn validate(&self) -> Result<()> {
        if !self.weights.is_symmetric() {
            return Err(OscimError::InvalidInstance("asymmetric weights".into()));
        }
        if !self.weights.has_zero_diagonal() {
            return Err(OscimError::InvalidInstance("nonzero diagonal".into()));
        }
        let mut rebuilt = SquareMatrix::zeros(self.n);
        for &(i, j, w) in &self.edge_list {
            rebuilt.set_sym(i, j, w);
        }
        if rebuilt != self.weights {
            return Err(OscimError::InvalidInstance(
                "edge list and weight matrix disagree".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = InstanceFile {
            n: self.n,
            kind: self.kind.label(),
            seed: self.seed,
            edges: self.edge_list.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        let inst = Self::from_edges(file.n, file.edges, file.seed, GraphKind::parse(&file.kind))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn write_file(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Git-style blob hash of the serialized instance, for provenance in run
    /// metadata.
    pub fn content_hash(&self) -> Result<String> {
        Ok(git_blob_sha1(self.to_json()?.as_bytes()))
    }
}

/// SHA-1 of `blob <len>\0<content>`, hex encoded — the same digest `git
/// hash-object` would assign the file.
pub fn git_blob_sha1(content: &[u8]) -> String {
    use sha1::{Digest, Sha1};
    let mut hasher = Sha1::new();
    hasher.update(format!("blob {}\0", content.len()).as_bytes());
    hasher.update(content);
    hasher
        .finalize()
        .iter()
        .fold(String::with_capacity(40), |mut acc, b| {
            acc.push_str(&format!("{b:02x}"));
            acc
        })
}

/// Spin configuration with entries restricted to {+1, -1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinVector(Vec<i8>);

impl SpinVector {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(OscimError::InvalidParameter(
                "spin entries must be +1 or -1".into(),
            ));
        }
        Ok(Self(spins))
    }

    pub fn all_up(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|s| -s).collect())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&s| s as f64).collect()
    }
}

/// Erdős–Rényi G(n, p) with every present edge at weight -1.
///
/// Pairs (i, j), i < j, are visited in lexicographic order with one uniform
/// draw each, so equal seeds give bit-identical instances.
pub fn generate_er_graph(n: usize, p: f64, seed: u64) -> Result<IsingInstance> {
    if n < 2 {
        return Err(OscimError::InvalidInstance(format!(
            "need at least 2 nodes, got {n}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(OscimError::InvalidInstance(format!(
            "edge probability {p} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((i, j, -1.0));
            }
        }
    }
    IsingInstance::from_edges(n, edges, seed, GraphKind::ErdosRenyi { p })
}

/// Random regular graph via the configuration model: pair up stubs, reject
/// pairings with self-loops or multi-edges, retry with an incremented
/// sub-seed. All edges carry weight -1.
pub fn generate_regular_graph(n: usize, degree: usize, seed: u64) -> Result<IsingInstance> {
    if n < 2 {
        return Err(OscimError::InvalidInstance(format!(
            "need at least 2 nodes, got {n}"
        )));
    }
    if degree >= n {
        return Err(OscimError::InvalidInstance(format!(
            "degree {degree} must be < n = {n}"
        )));
    }
    if (n * degree) % 2 != 0 {
        return Err(OscimError::InvalidInstance(format!(
            "n * degree = {} is odd, no such graph exists",
            n * degree
        )));
    }
    if degree == 0 {
        return IsingInstance::from_edges(n, Vec::new(), seed, GraphKind::Regular { degree });
    }

    const MAX_ATTEMPTS: u64 = 100_000;
    for attempt in 0..MAX_ATTEMPTS {
        let sub_seed = seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed);
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat(v).take(degree)).collect();
        stubs.shuffle(&mut rng);

        let mut seen = vec![false; n * n];
        let mut edges = Vec::with_capacity(n * degree / 2);
        let mut ok = true;
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b {
                ok = false;
                break;
            }
            let (i, j) = (a.min(b), a.max(b));
            if seen[i * n + j] {
                ok = false;
                break;
            }
            seen[i * n + j] = true;
            edges.push((i, j, -1.0));
        }
        if ok {
            edges.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
            return IsingInstance::from_edges(n, edges, seed, GraphKind::Regular { degree });
        }
    }
    Err(OscimError::InvalidInstance(format!(
        "configuration model failed to produce a simple {degree}-regular graph on {n} nodes"
    )))
}

/// Ising energy E = -(1/2) sum_{i,j} W_ij s_i s_j over the full matrix
/// (both orderings of every pair counted, zero diagonal).
pub fn ising_energy(weights: &SquareMatrix, s: &SpinVector) -> Result<f64> {
    let n = weights.n();
    if s.len() != n {
        return Err(OscimError::DimensionMismatch {
            expected: n,
            got: s.len(),
        });
    }
    let sf = s.to_f64();
    let field = weights.mul_vec(&sf);
    let e: f64 = field.iter().zip(sf.iter()).map(|(h, s)| h * s).sum();
    Ok(-0.5 * e)
}

/// Number of instance edges crossing the partition induced by `s`.
///
/// Only defined for unit-magnitude weights (the MaxCut convention).
pub fn cut_value(instance: &IsingInstance, s: &SpinVector) -> Result<usize> {
    if s.len() != instance.n {
        return Err(OscimError::DimensionMismatch {
            expected: instance.n,
            got: s.len(),
        });
    }
    for &(i, j, w) in &instance.edge_list {
        if w.abs() != 1.0 {
            return Err(OscimError::ConventionError(format!(
                "edge ({i}, {j}) has weight {w}, expected magnitude 1"
            )));
        }
    }
    Ok(instance
        .edge_list
        .iter()
        .filter(|&&(i, j, _)| s.get(i) != s.get(j))
        .count())
}

/// Exhaustive minimizer of the Ising energy over all spin assignments.
///
/// Exploits global flip symmetry by fixing the first spin to +1 and enumerating the
/// remaining 2^(n-1) assignments in lexicographic order (+1 before -1), so
/// ties resolve to the first-found configuration. Energy is maintained
/// incrementally through the local fields and recomputed exactly whenever a
/// new minimum is accepted.
pub fn brute_force_ground_state(weights: &SquareMatrix) -> Result<(SpinVector, f64)> {
    let n = weights.n();
    if n == 0 {
        return Err(OscimError::InvalidInstance("empty matrix".into()));
    }
    if n > MAX_BRUTE_FORCE_N {
        return Err(OscimError::BudgetExceeded {
            n,
            max: MAX_BRUTE_FORCE_N,
        });
    }

    let mut s = vec![1.0f64; n];
    // Local fields h_i = sum_j W_ij s_j.
    let mut h = weights.mul_vec(&s);
    let mut energy: f64 = -0.5 * h.iter().zip(s.iter()).map(|(h, s)| h * s).sum::<f64>();

    let mut best_s = s.clone();
    let mut best_e = energy;

    let total: u64 = 1u64 << (n - 1);
    for m in 1..total {
        // Incrementing the counter flips a trailing run of bits; spin i maps
        // to bit (n-1-i) so counter order equals lexicographic spin order.
        let changed = (m - 1) ^ m;
        for b in 0..(n - 1) {
            if changed & (1 << b) != 0 {
                let i = n - 1 - b;
                energy += 2.0 * s[i] * h[i];
                s[i] = -s[i];
                let two_si = 2.0 * s[i];
                let row = weights.row(i);
                for (hj, w) in h.iter_mut().zip(row.iter()) {
                    *hj += two_si * w;
                }
            }
        }
        if energy < best_e {
            // Recompute exactly to keep accumulated error out of the record.
            let exact = {
                let field = weights.mul_vec(&s);
                -0.5 * field.iter().zip(s.iter()).map(|(h, s)| h * s).sum::<f64>()
            };
            if exact < best_e {
                best_e = exact;
                best_s = s.clone();
            }
            energy = energy.min(exact);
        }
    }

    let spins = SpinVector::new(best_s.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect())?;
    Ok((spins, best_e))
}

/// Optimal cut of an antiferromagnetic unit-weight instance, via the oracle.
pub fn brute_force_max_cut(instance: &IsingInstance) -> Result<usize> {
    let (_, e_min) = brute_force_ground_state(&instance.weights)?;
    let cut = (instance.num_edges() as f64 - e_min) / 2.0;
    Ok(cut.round() as usize)
}
