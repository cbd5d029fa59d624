//! Basic-operation counting model for the root-finding circuit, and the
//! quantum vs. classical complexity comparison.
//!
//! The asymptotic forms are frozen to exact formulas: a gate with `i >= 2`
//! controls costs `i + 2` basic operations, one with at most one control
//! costs 1. Nothing here is an executable decomposition.

/// Clean ancilla assumed by the multi-control decomposition; counted here, never simulated.
pub const DECOMPOSITION_ANCILLAS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpLedger {
    pub m: usize,
    pub cyclic_swap: u64,
    pub formation: u64,
    pub combination: u64,
    pub branch_swap: u64,
    pub scaling: u64,
    pub total: u64,
}

pub fn count_multi_controlled(controls: usize) -> u64 {
    if controls <= 1 {
        1
    } else {
        controls as u64 + 2
    }
}

/// Per-block counts for `m` main qubits.
///
/// # Panics
/// If `m == 0`.
pub fn count_circuit(m: usize) -> OpLedger {
    assert!(m >= 1, "need at least one main qubit");
    let m64 = m as u64;
    let cyclic_swap = 2 + (2..m as u64).sum::<u64>();
    // 2^m rotations, each controlled by m main qubits
    let formation = (1u64 << m) * (m64 + 2);
    let combination = 2 * m64;
    let branch_swap = count_multi_controlled(m + 1);
    let scaling = count_multi_controlled(1);
    OpLedger {
        m,
        cyclic_swap,
        formation,
        combination,
        branch_swap,
        scaling,
        total: cyclic_swap + formation + combination + branch_swap + scaling,
    }
}

/// `2^b n log2 n`.
pub fn quantum_complexity(n: u64, b: u32) -> f64 {
    let n = n as f64;
    2f64.powi(b as i32) * n * n.log2()
}

/// `n log2^2 n (log2^2 n + log2 b)`.
pub fn pan_complexity(n: u64, b: u32) -> f64 {
    let l = (n as f64).log2();
    n as f64 * l * l * (l * l + (b as f64).log2())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub n: u64,
    pub b: u32,
    pub quantum: f64,
    pub classical: f64,
    pub ratio: f64,
    pub quantum_cheaper: bool,
}

pub fn compare_report(ns: &[u64], bs: &[u32]) -> Vec<CompareRow> {
    let mut rows = Vec::with_capacity(ns.len() * bs.len());
    for &n in ns {
        for &b in bs {
            let quantum = quantum_complexity(n, b);
            let classical = pan_complexity(n, b);
            let ratio = quantum / classical;
            rows.push(CompareRow { n, b, quantum, classical, ratio, quantum_cheaper: quantum < classical });
        }
    }
    rows
}
