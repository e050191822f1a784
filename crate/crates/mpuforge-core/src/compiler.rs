//! Tree-merge synthesis: place leaf isometries, schedule ⌈log₂N⌉ merge
//! levels, and emit the circuit IR. Uniform-bulk inputs reuse one cap pair
//! and one merge operator everywhere; nonuniform chains go through the
//! Choi canonical form and use per-cut caps `L = 1`, `R = diag(s_k)`.
//!
//! Cost-model note: the depth() op counts one unit per primitive. The
//! scaling report additionally charges each merge its site span, absorbing
//! the linear term of the depth recursion (the subspace flip touches every
//! bond register of the merged block), and uses the padded coefficient sum
//! actually driving the rotation count as `q_used` in the reference column.

use std::sync::Arc;

use num_complex::Complex64;

use crate::circuit::{
    apply_state, basis_state, depth_value, zero_sector, Circuit, CircuitNode, DepthReport, Gate,
    LevelCost, Register, RegisterKind,
};
use crate::error::{Error, Result};
use crate::isometry::{compute_caps_uniform, CapPair, CapSource};
use crate::lcu::{lcu_decompose_compact, merge_operator_embedded, plan_padding, PaddingPlan};
use crate::linalg::{self, c, identity, unitary_completion, CMatrix, CVector};
use crate::mpu::{choi_canonicalize, is_unitary, MpoChain, SchmidtData, UniformMpu};

#[derive(Clone, Debug)]
pub struct CompileOptions {
    /// Cap window length; `None` escalates 1..=3 until the caps reach full
    /// bond rank.
    pub blocking: Option<usize>,
    pub tol: f64,
    pub dim_cap: usize,
    pub state_cap: usize,
    /// Optional density operators overriding the maximally mixed cap choice.
    pub sigma: Option<CMatrix>,
    pub tau: Option<CMatrix>,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            blocking: None,
            tol: linalg::DEFAULT_TOL,
            dim_cap: crate::mpu::DEFAULT_DIM_CAP,
            state_cap: crate::circuit::STATE_CAP,
            sigma: None,
            tau: None,
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct MergeInfo {
    pub level: usize,
    /// Bond cut the merge fuses (1-based, between sites cut and cut+1).
    pub cut: usize,
    /// Sites covered by the merged block.
    pub span: usize,
    pub c_raw: f64,
    pub c_padded: f64,
    pub rotations: usize,
    pub pad_phases: Vec<f64>,
    pub lcu_terms: usize,
    /// Oracle-call depth of the deeper child and of the merged block.
    pub depth_child: usize,
    pub depth_merged: usize,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct QReport {
    pub mode: String,
    pub blocking: Option<usize>,
    pub q_unif: Option<f64>,
    pub per_cut: Option<Vec<f64>>,
    /// Conditioning number of the construction (max over cuts / uniform).
    pub q: f64,
    pub crude_bound: Option<f64>,
    /// Max padded coefficient sum over merges; drives the rotation counts.
    pub q_used: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct AncillaManifest {
    pub bond: Vec<usize>,
    pub lcu: Vec<usize>,
    pub pad: Vec<usize>,
}

impl AncillaManifest {
    pub fn all(&self) -> Vec<usize> {
        let mut v = self.bond.clone();
        v.extend(&self.lcu);
        v.extend(&self.pad);
        v
    }

    pub fn len(&self) -> usize {
        self.bond.len() + self.lcu.len() + self.pad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct CompileResult {
    pub circuit: Circuit,
    pub physical: Vec<usize>,
    pub ancillas: AncillaManifest,
    pub q_report: QReport,
    pub depth: DepthReport,
    pub merges: Vec<MergeInfo>,
    pub n_sites: usize,
    /// Depth with the per-merge span charge (cost-model note).
    pub accounted_depth: f64,
}

// ---------------------------------------------------------------------------
// Shared tree machinery
// ---------------------------------------------------------------------------

struct Block {
    lo: usize,
    hi: usize,
    circuit: Arc<CircuitNode>,
    /// Dagger of `circuit`, built incrementally so payload adjoints are
    /// allocated once and shared across the tree.
    circuit_dag: Arc<CircuitNode>,
    nonphys: Vec<usize>,
    left_reg: Option<usize>,
    right_reg: Option<usize>,
    accounted: f64,
    depth_units: usize,
}

/// Per-cut merge gate payloads (shared across the tree for uniform bulks).
struct MergeGates {
    wctrl: Arc<Gate>,
    wctrl_dag: Arc<Gate>,
    prepare: Arc<Gate>,
    prepare_dag: Arc<Gate>,
    c_raw: f64,
    padding: PaddingPlan,
    lcu_terms: usize,
}

fn merge_gates(m_embedded: &CMatrix) -> Result<MergeGates> {
    let lcu = lcu_decompose_compact(m_embedded)?;
    let c_raw = lcu.total();
    let padding = plan_padding(c_raw)?;
    let padded = lcu.pad(&padding.pad_phases);
    let b = crate::amplification::prepare_unitary(&padded.coefficients)?;
    let wctrl = Gate::Select {
        blocks: padded.unitaries.clone(),
    };
    let wctrl_dag = wctrl.dagger();
    let prepare = Gate::Dense(b.clone());
    let prepare_dag = Gate::Dense(b.adjoint());
    Ok(MergeGates {
        wctrl: Arc::new(wctrl),
        wctrl_dag: Arc::new(wctrl_dag),
        prepare: Arc::new(prepare),
        prepare_dag: Arc::new(prepare_dag),
        c_raw,
        padding,
        lcu_terms: padded.len(),
    })
}

/// Pairs of block indices merged per level for `n` leaves, left to right,
/// odd block promoted.
fn merge_schedule(n: usize) -> Vec<Vec<(usize, usize)>> {
    let mut levels = Vec::new();
    let mut count = n;
    while count > 1 {
        let pairs: Vec<(usize, usize)> = (0..count / 2).map(|i| (2 * i, 2 * i + 1)).collect();
        levels.push(pairs);
        count = count / 2 + count % 2;
    }
    levels
}

struct TreeEmitter<'a> {
    registers: &'a [Register],
    /// (lcu ancilla reg, pad regs) per merge, in schedule order.
    merge_regs: Vec<(usize, Vec<usize>)>,
    next_merge: usize,
}

impl<'a> TreeEmitter<'a> {
    fn merge(
        &mut self,
        x: Block,
        y: Block,
        gates: &MergeGates,
        level: usize,
        infos: &mut Vec<MergeInfo>,
    ) -> Result<Block> {
        let (a_reg, pad_regs) = self.merge_regs[self.next_merge].clone();
        self.next_merge += 1;
        let rx = x
            .right_reg
            .ok_or_else(|| Error::Validation("left block has no right bond".into()))?;
        let ly = y
            .left_reg
            .ok_or_else(|| Error::Validation("right block has no left bond".into()))?;

        let par = CircuitNode::par(vec![x.circuit.clone(), y.circuit.clone()]);
        let par_dag = CircuitNode::par(vec![x.circuit_dag.clone(), y.circuit_dag.clone()]);
        let mut wctrl_regs = vec![rx, ly];
        wctrl_regs.extend(&pad_regs);
        wctrl_regs.push(a_reg);
        let u_gates = |wc: &Arc<Gate>| -> Vec<Arc<CircuitNode>> {
            vec![
                CircuitNode::primitive(gates.prepare.clone(), vec![a_reg]),
                CircuitNode::primitive(wc.clone(), wctrl_regs.clone()),
                CircuitNode::primitive(gates.prepare_dag.clone(), vec![a_reg]),
            ]
        };

        let ell = gates.padding.rotations;
        let mut seq = vec![par.clone()];
        seq.extend(u_gates(&gates.wctrl));
        let mut seq_dag_tail: Vec<Arc<CircuitNode>> = Vec::new();
        if ell > 0 {
            // G = -U R_Ψ U† R_Φ applied left to right:
            // (-R_Φ), U† = [B, W†, B†], then R_Ψ = [Ṽ†, F, Ṽ, R_Φ], then U.
            let mut flip_regs: Vec<usize> = x.nonphys.clone();
            flip_regs.extend(&y.nonphys);
            flip_regs.extend(&pad_regs);
            flip_regs.push(a_reg);
            let neg_rphi = CircuitNode::primitive(
                Arc::new(Gate::AncillaReflection { negate: true }),
                vec![a_reg],
            );
            let rphi = CircuitNode::primitive(
                Arc::new(Gate::AncillaReflection { negate: false }),
                vec![a_reg],
            );
            let flip = CircuitNode::primitive(Arc::new(Gate::SubspaceFlip), flip_regs);
            let mut g = vec![neg_rphi.clone()];
            g.extend(u_gates(&gates.wctrl_dag));
            g.push(par_dag.clone());
            g.push(flip.clone());
            g.push(par.clone());
            g.push(rphi.clone());
            g.extend(u_gates(&gates.wctrl));
            // G† from the same shared pieces (reflections are involutions)
            let mut g_dag = Vec::new();
            g_dag.extend(u_gates(&gates.wctrl_dag));
            g_dag.push(rphi);
            g_dag.push(par_dag.clone());
            g_dag.push(flip);
            g_dag.push(par.clone());
            g_dag.extend(u_gates(&gates.wctrl));
            g_dag.push(neg_rphi);
            seq.push(CircuitNode::repeat(CircuitNode::seq(g), ell));
            seq_dag_tail.push(CircuitNode::repeat(CircuitNode::seq(g_dag), ell));
        }
        let circuit = CircuitNode::seq(seq);
        // dagger of Seq[par, U, Repeat(G)] = Seq[Repeat(G†), U†, par†]
        let mut dag_seq = seq_dag_tail;
        dag_seq.extend(u_gates(&gates.wctrl_dag));
        dag_seq.push(par_dag);
        let circuit_dag = CircuitNode::seq(dag_seq);

        let span = y.hi - x.lo + 1;
        let depth_child = x.depth_units.max(y.depth_units);
        // par + U(3) + ℓ * (9 fixed gates + two child rounds per G)
        let depth_units = depth_child + 3 + ell * (9 + 2 * depth_child);
        infos.push(MergeInfo {
            level,
            cut: x.hi,
            span,
            c_raw: gates.c_raw,
            c_padded: gates.padding.padded_c,
            rotations: ell,
            pad_phases: gates.padding.pad_phases.clone(),
            lcu_terms: gates.lcu_terms,
            depth_child,
            depth_merged: depth_units,
        });

        let mut nonphys = x.nonphys;
        nonphys.extend(y.nonphys);
        nonphys.extend(&pad_regs);
        nonphys.push(a_reg);
        // accounted cost: (2ℓ+1) child rounds + machinery depth + span charge
        let machinery = 3.0 + 9.0 * ell as f64;
        let accounted =
            (2 * ell + 1) as f64 * x.accounted.max(y.accounted) + machinery + span as f64;
        let _ = self.registers;
        Ok(Block {
            lo: x.lo,
            hi: y.hi,
            circuit,
            circuit_dag,
            nonphys,
            left_reg: x.left_reg,
            right_reg: y.right_reg,
            accounted,
            depth_units,
        })
    }
}

/// Embed an isometry with bond legs `(dl, d.., dr)` into enlarged bond
/// dimensions; padding rows are zero.
fn embed_rows(
    v: &CMatrix,
    dl: usize,
    mid: usize,
    dr: usize,
    dl_new: usize,
    dr_new: usize,
) -> CMatrix {
    let mut out = CMatrix::zeros(dl_new * mid * dr_new, v.ncols());
    for ml in 0..dl {
        for i in 0..mid {
            for mr in 0..dr {
                let src = (ml * mid + i) * dr + mr;
                let dst = (ml * mid + i) * dr_new + mr;
                for j in 0..v.ncols() {
                    out[(dst, j)] = v[(src, j)];
                }
            }
        }
    }
    out
}

/// Dilation gate: complete the isometry columns (inputs at bond-zero rows)
/// to a unitary.
fn dilation_gate(v_embedded: &CMatrix, input_positions: &[usize]) -> Result<Arc<Gate>> {
    let u = unitary_completion(v_embedded, input_positions)?;
    Ok(Arc::new(Gate::Dense(u)))
}

// ---------------------------------------------------------------------------
// Uniform compiler
// ---------------------------------------------------------------------------

/// Caches the N-independent pieces so scaling reports reuse them.
pub struct UniformCompiler {
    mpu: UniformMpu,
    caps: CapPair,
    blocking: usize,
    q_unif: f64,
    embedded_bond: usize,
    bulk_gate: Arc<Gate>,
    bulk_gate_dag: Arc<Gate>,
    left_gate: Arc<Gate>,
    left_gate_dag: Arc<Gate>,
    right_gate: Arc<Gate>,
    right_gate_dag: Arc<Gate>,
    gates: MergeGates,
}

impl UniformCompiler {
    pub fn new(mpu: &UniformMpu, opts: &CompileOptions) -> Result<Self> {
        if !mpu.is_open() {
            return Err(Error::Validation(
                "compile_uniform needs the open (l, r) form; convert the boundary first".into(),
            ));
        }
        let d = mpu.phys_dim();
        // unitarity gate at small sizes
        for n in [2usize, 3] {
            if d.pow(n as u32) <= opts.dim_cap {
                let (ok, res) = is_unitary(&mpu.chain(n)?, 1e-8, opts.dim_cap)?;
                if !ok {
                    return Err(Error::Validation(format!(
                        "input is not unitary at N={n} (residual {res:.3e})"
                    )));
                }
            }
        }
        // caps, escalating the window until full rank
        let candidates: Vec<usize> = match opts.blocking {
            Some(m) => vec![m],
            None => vec![1, 2, 3],
        };
        let mut chosen: Option<(usize, CapPair)> = None;
        let mut last_rank = 0usize;
        for m in candidates {
            let caps =
                compute_caps_uniform(mpu, m, opts.sigma.as_ref(), opts.tau.as_ref(), opts.tol)?;
            if caps.full_rank {
                chosen = Some((m, caps));
                break;
            }
            last_rank = linalg::numerical_rank(&caps.left, opts.tol)
                .min(linalg::numerical_rank(&caps.right, opts.tol));
        }
        let (blocking, caps) = chosen.ok_or_else(|| {
            Error::Unsupported(format!(
                "bond rank check failed: capped tensor rank {last_rank} < D = {} for every window <= 3",
                mpu.bond_dim()
            ))
        })?;
        let q_unif = crate::isometry::conditioning_uniform(&caps, opts.tol)?;

        let dd = mpu.bond_dim();
        let de = dd.max(2);
        let chain3 = mpu.chain(3)?;
        let bulk_v = crate::isometry::build_isometry(
            &chain3,
            2,
            2,
            Some(&caps.left),
            Some(&caps.right),
            usize::MAX,
        )?
        .dense_v;
        let left_v =
            crate::isometry::build_isometry(&chain3, 1, 1, None, Some(&caps.right), usize::MAX)?
                .dense_v;
        let right_v =
            crate::isometry::build_isometry(&chain3, 3, 3, Some(&caps.left), None, usize::MAX)?
                .dense_v;

        let bulk_emb = embed_rows(&bulk_v, dd, d, dd, de, de);
        let left_emb = embed_rows(&left_v, 1, d, dd, 1, de);
        let right_emb = embed_rows(&right_v, dd, d, 1, de, 1);
        let bulk_gate = dilation_gate(&bulk_emb, &(0..d).map(|j| j * de).collect::<Vec<_>>())?;
        let left_gate = dilation_gate(&left_emb, &(0..d).map(|j| j * de).collect::<Vec<_>>())?;
        let right_gate = dilation_gate(&right_emb, &(0..d).collect::<Vec<_>>())?;
        let bulk_gate_dag = Arc::new(bulk_gate.dagger());
        let left_gate_dag = Arc::new(left_gate.dagger());
        let right_gate_dag = Arc::new(right_gate.dagger());

        let m_emb = merge_operator_embedded(&caps, &caps, de, de, opts.tol)?;
        let gates = merge_gates(&m_emb)?;

        Ok(Self {
            mpu: mpu.clone(),
            caps,
            blocking,
            q_unif,
            embedded_bond: de,
            bulk_gate,
            bulk_gate_dag,
            left_gate,
            left_gate_dag,
            right_gate,
            right_gate_dag,
            gates,
        })
    }

    pub fn q_unif(&self) -> f64 {
        self.q_unif
    }

    pub fn blocking(&self) -> usize {
        self.blocking
    }

    pub fn caps(&self) -> &CapPair {
        &self.caps
    }

    pub fn compile(&self, n: usize) -> Result<CompileResult> {
        if n < 2 {
            return Err(Error::Validation("compile needs N >= 2".into()));
        }
        let d = self.mpu.phys_dim();
        let de = self.embedded_bond;
        let schedule = merge_schedule(n);
        let total_merges: usize = schedule.iter().map(|l| l.len()).sum();

        // registers: phys, bonds, lcu ancillas, pads
        let mut registers = Vec::new();
        for k in 0..n {
            registers.push(Register {
                id: k,
                kind: RegisterKind::Physical,
                dim: d,
            });
        }
        let mut next = n;
        // bond regs per leaf: (left, right); boundary leaves miss one
        let mut bond_regs: Vec<(Option<usize>, Option<usize>)> = Vec::with_capacity(n);
        for k in 0..n {
            let left = if k == 0 {
                None
            } else {
                registers.push(Register {
                    id: next,
                    kind: RegisterKind::Bond,
                    dim: de,
                });
                next += 1;
                Some(next - 1)
            };
            let right = if k == n - 1 {
                None
            } else {
                registers.push(Register {
                    id: next,
                    kind: RegisterKind::Bond,
                    dim: de,
                });
                next += 1;
                Some(next - 1)
            };
            bond_regs.push((left, right));
        }
        let h = self.gates.lcu_terms;
        let pad_count = self.gates.padding.pad_phases.len();
        let mut merge_regs = Vec::with_capacity(total_merges);
        for _ in 0..total_merges {
            registers.push(Register {
                id: next,
                kind: RegisterKind::LcuAncilla,
                dim: h,
            });
            next += 1;
            merge_regs.push((next - 1, Vec::new()));
        }
        for mr in merge_regs.iter_mut() {
            for _ in 0..pad_count {
                registers.push(Register {
                    id: next,
                    kind: RegisterKind::Pad,
                    dim: 2,
                });
                next += 1;
                mr.1.push(next - 1);
            }
        }

        // leaves
        let mut blocks: Vec<Block> = Vec::with_capacity(n);
        for (k, &(lreg, rreg)) in bond_regs.iter().enumerate() {
            let (gate, gate_dag, regs): (Arc<Gate>, Arc<Gate>, Vec<usize>) = if k == 0 {
                (
                    self.left_gate.clone(),
                    self.left_gate_dag.clone(),
                    vec![k, rreg.unwrap()],
                )
            } else if k == n - 1 {
                (
                    self.right_gate.clone(),
                    self.right_gate_dag.clone(),
                    vec![lreg.unwrap(), k],
                )
            } else {
                (
                    self.bulk_gate.clone(),
                    self.bulk_gate_dag.clone(),
                    vec![lreg.unwrap(), k, rreg.unwrap()],
                )
            };
            let mut nonphys = Vec::new();
            nonphys.extend(lreg);
            nonphys.extend(rreg);
            blocks.push(Block {
                lo: k + 1,
                hi: k + 1,
                circuit: CircuitNode::primitive(gate, regs.clone()),
                circuit_dag: CircuitNode::primitive(gate_dag, regs),
                nonphys,
                left_reg: lreg,
                right_reg: rreg,
                accounted: 1.0,
                depth_units: 1,
            });
        }

        let mut emitter = TreeEmitter {
            registers: &registers,
            merge_regs,
            next_merge: 0,
        };
        let mut infos = Vec::new();
        let mut per_level = Vec::new();
        for (li, pairs) in schedule.iter().enumerate() {
            let mut merged = Vec::new();
            let mut buf = blocks;
            let mut taken = vec![false; buf.len()];
            for &(a, b) in pairs {
                let x = std::mem::replace(&mut buf[a], Block::placeholder());
                let y = std::mem::replace(&mut buf[b], Block::placeholder());
                taken[a] = true;
                taken[b] = true;
                merged.push(emitter.merge(x, y, &self.gates, li + 1, &mut infos)?);
            }
            for (k, t) in taken.iter().enumerate() {
                if !t {
                    merged.push(std::mem::replace(&mut buf[k], Block::placeholder()));
                }
            }
            merged.sort_by_key(|b| b.lo);
            per_level.push(LevelCost {
                level: li + 1,
                depth: merged
                    .iter()
                    .map(|b| depth_value(&b.circuit))
                    .max()
                    .unwrap_or(0),
                accounted: merged.iter().map(|b| b.accounted).fold(0.0, f64::max),
            });
            blocks = merged;
        }
        let root_block = blocks.pop().expect("tree reduces to one block");
        self.finish(n, registers, root_block, infos, per_level)
    }

    fn finish(
        &self,
        n: usize,
        registers: Vec<Register>,
        root_block: Block,
        merges: Vec<MergeInfo>,
        per_level: Vec<LevelCost>,
    ) -> Result<CompileResult> {
        let circuit = Circuit {
            registers,
            root: root_block.circuit.clone(),
        };
        circuit.validate()?;
        let q_used = merges.iter().map(|m| m.c_padded).fold(1.0, f64::max);
        let depth = DepthReport {
            depth: depth_value(&circuit.root),
            per_level,
            q_used: Some(q_used),
            fitted_exponent: None,
        };
        let mut bond = Vec::new();
        let mut lcu = Vec::new();
        let mut pad = Vec::new();
        for r in &circuit.registers {
            match r.kind {
                RegisterKind::Bond => bond.push(r.id),
                RegisterKind::LcuAncilla => lcu.push(r.id),
                RegisterKind::Pad => pad.push(r.id),
                RegisterKind::Physical => {}
            }
        }
        Ok(CompileResult {
            physical: (0..n).collect(),
            ancillas: AncillaManifest { bond, lcu, pad },
            q_report: QReport {
                mode: "uniform".into(),
                blocking: Some(self.blocking),
                q_unif: Some(self.q_unif),
                per_cut: None,
                q: self.q_unif,
                crude_bound: None,
                q_used,
            },
            depth,
            merges,
            n_sites: n,
            accounted_depth: root_block.accounted,
            circuit,
        })
    }
}

impl Block {
    fn placeholder() -> Block {
        Block {
            lo: 0,
            hi: 0,
            circuit: CircuitNode::seq(vec![]),
            circuit_dag: CircuitNode::seq(vec![]),
            nonphys: vec![],
            left_reg: None,
            right_reg: None,
            accounted: 0.0,
            depth_units: 0,
        }
    }
}

pub fn compile_uniform(mpu: &UniformMpu, n: usize, opts: &CompileOptions) -> Result<CompileResult> {
    UniformCompiler::new(mpu, opts)?.compile(n)
}

// ---------------------------------------------------------------------------
// Nonuniform compiler
// ---------------------------------------------------------------------------

pub fn compile_nonuniform(chain: &MpoChain, opts: &CompileOptions) -> Result<CompileResult> {
    let n = chain.len();
    if n < 2 {
        return Err(Error::Validation("compile needs N >= 2".into()));
    }
    let (d_out, d_in) = chain.phys_dims();
    if d_out == d_in && d_out <= opts.dim_cap {
        let (ok, res) = is_unitary(chain, 1e-8, opts.dim_cap)?;
        if !ok {
            return Err(Error::Validation(format!(
                "input chain is not unitary (residual {res:.3e})"
            )));
        }
    }
    let data = choi_canonicalize(chain, opts.tol)?;
    compile_canonical(&data, opts)
}

/// Compile a chain that is already in canonical form (Schmidt data given).
pub fn compile_canonical(data: &SchmidtData, opts: &CompileOptions) -> Result<CompileResult> {
    let canon = &data.canonical_tensors;
    let n = canon.len();
    let cond = crate::isometry::conditioning_nonuniform(data);

    // per-leaf caps: L_k = 1 (left-canonical gauge), R_k = diag(s_k)
    let cut_dims: Vec<usize> = data.per_cut.iter().map(|s| s.len()).collect();
    let diag_cap = |k: usize| -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_vec(
            data.per_cut[k].iter().map(|&x| c(x, 0.0)).collect(),
        ))
    };
    let leaf_caps: Vec<CapPair> = (0..n)
        .map(|k| {
            let left = if k == 0 {
                identity(1)
            } else {
                identity(cut_dims[k - 1])
            };
            let right = if k == n - 1 { identity(1) } else { diag_cap(k) };
            CapPair {
                left,
                right,
                full_rank: true,
                source: CapSource::Canonical { cut: k + 1 },
            }
        })
        .collect();

    // per-cut merge gates
    let mut cut_gates = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let de = cut_dims[k].max(2);
        let m_emb = merge_operator_embedded(&leaf_caps[k], &leaf_caps[k + 1], de, de, opts.tol)?;
        cut_gates.push(merge_gates(&m_emb)?);
    }

    let schedule = merge_schedule(n);
    // registers
    let mut registers = Vec::new();
    for (k, t) in canon.tensors.iter().enumerate() {
        registers.push(Register {
            id: k,
            kind: RegisterKind::Physical,
            dim: t.d_out,
        });
    }
    let mut next = n;
    let mut bond_regs: Vec<(Option<usize>, Option<usize>)> = Vec::with_capacity(n);
    for k in 0..n {
        let left = if k == 0 {
            None
        } else {
            let de = cut_dims[k - 1].max(2);
            registers.push(Register {
                id: next,
                kind: RegisterKind::Bond,
                dim: de,
            });
            next += 1;
            Some(next - 1)
        };
        let right = if k == n - 1 {
            None
        } else {
            let de = cut_dims[k].max(2);
            registers.push(Register {
                id: next,
                kind: RegisterKind::Bond,
                dim: de,
            });
            next += 1;
            Some(next - 1)
        };
        bond_regs.push((left, right));
    }
    // merge ancillas in schedule order (need cut per merge; replay ranges)
    let mut merge_cuts = Vec::new();
    {
        let mut ranges: Vec<(usize, usize)> = (1..=n).map(|k| (k, k)).collect();
        for pairs in &schedule {
            let mut merged = Vec::new();
            let mut taken = vec![false; ranges.len()];
            for &(a, b) in pairs {
                merge_cuts.push(ranges[a].1);
                merged.push((ranges[a].0, ranges[b].1));
                taken[a] = true;
                taken[b] = true;
            }
            for (k, t) in taken.iter().enumerate() {
                if !t {
                    merged.push(ranges[k]);
                }
            }
            merged.sort_by_key(|r| r.0);
            ranges = merged;
        }
    }
    let mut merge_regs = Vec::with_capacity(merge_cuts.len());
    for &cut in &merge_cuts {
        let h = cut_gates[cut - 1].lcu_terms;
        registers.push(Register {
            id: next,
            kind: RegisterKind::LcuAncilla,
            dim: h,
        });
        next += 1;
        merge_regs.push((next - 1, Vec::new()));
    }
    for (mi, &cut) in merge_cuts.iter().enumerate() {
        for _ in 0..cut_gates[cut - 1].padding.pad_phases.len() {
            registers.push(Register {
                id: next,
                kind: RegisterKind::Pad,
                dim: 2,
            });
            next += 1;
            merge_regs[mi].1.push(next - 1);
        }
    }

    // leaves
    let mut blocks = Vec::with_capacity(n);
    for k in 0..n {
        let (lreg, rreg) = bond_regs[k];
        let left_cap = if k == 0 {
            None
        } else {
            Some(leaf_caps[k].left.clone())
        };
        let right_cap = if k == n - 1 {
            None
        } else {
            Some(leaf_caps[k].right.clone())
        };
        let v = crate::isometry::build_isometry(
            canon,
            k + 1,
            k + 1,
            left_cap.as_ref(),
            right_cap.as_ref(),
            usize::MAX,
        )?
        .dense_v;
        let t = &canon.tensors[k];
        let dl = if k == 0 { 1 } else { cut_dims[k - 1] };
        let dr = if k == n - 1 { 1 } else { cut_dims[k] };
        let dle = if k == 0 { 1 } else { dl.max(2) };
        let dre = if k == n - 1 { 1 } else { dr.max(2) };
        let v_emb = embed_rows(&v, dl, t.d_out, dr, dle, dre);
        let positions: Vec<usize> = (0..t.d_in).map(|j| j * dre).collect();
        let gate = dilation_gate(&v_emb, &positions)?;
        let gate_dag = Arc::new(gate.dagger());
        let mut regs = Vec::new();
        regs.extend(lreg);
        regs.push(k);
        regs.extend(rreg);
        let mut nonphys = Vec::new();
        nonphys.extend(lreg);
        nonphys.extend(rreg);
        blocks.push(Block {
            lo: k + 1,
            hi: k + 1,
            circuit: CircuitNode::primitive(gate, regs.clone()),
            circuit_dag: CircuitNode::primitive(gate_dag, regs),
            nonphys,
            left_reg: lreg,
            right_reg: rreg,
            accounted: 1.0,
            depth_units: 1,
        });
    }

    let mut emitter = TreeEmitter {
        registers: &registers,
        merge_regs,
        next_merge: 0,
    };
    let mut infos = Vec::new();
    let mut per_level = Vec::new();
    for (li, pairs) in schedule.iter().enumerate() {
        let mut merged = Vec::new();
        let mut buf = blocks;
        let mut taken = vec![false; buf.len()];
        for &(a, b) in pairs {
            let x = std::mem::replace(&mut buf[a], Block::placeholder());
            let y = std::mem::replace(&mut buf[b], Block::placeholder());
            taken[a] = true;
            taken[b] = true;
            let cut = x.hi;
            merged.push(emitter.merge(x, y, &cut_gates[cut - 1], li + 1, &mut infos)?);
        }
        for (k, t) in taken.iter().enumerate() {
            if !t {
                merged.push(std::mem::replace(&mut buf[k], Block::placeholder()));
            }
        }
        merged.sort_by_key(|b| b.lo);
        per_level.push(LevelCost {
            level: li + 1,
            depth: merged
                .iter()
                .map(|b| depth_value(&b.circuit))
                .max()
                .unwrap_or(0),
            accounted: merged.iter().map(|b| b.accounted).fold(0.0, f64::max),
        });
        blocks = merged;
    }
    let root_block = blocks.pop().expect("tree reduces to one block");

    let circuit = Circuit {
        registers,
        root: root_block.circuit.clone(),
    };
    circuit.validate()?;
    let q_used = infos.iter().map(|m| m.c_padded).fold(1.0, f64::max);
    let depth = DepthReport {
        depth: depth_value(&circuit.root),
        per_level,
        q_used: Some(q_used),
        fitted_exponent: None,
    };
    let mut bond = Vec::new();
    let mut lcu = Vec::new();
    let mut pad = Vec::new();
    for r in &circuit.registers {
        match r.kind {
            RegisterKind::Bond => bond.push(r.id),
            RegisterKind::LcuAncilla => lcu.push(r.id),
            RegisterKind::Pad => pad.push(r.id),
            RegisterKind::Physical => {}
        }
    }
    Ok(CompileResult {
        physical: (0..n).collect(),
        ancillas: AncillaManifest { bond, lcu, pad },
        q_report: QReport {
            mode: "nonuniform".into(),
            blocking: None,
            q_unif: None,
            per_cut: Some(cond.per_cut.clone()),
            q: cond.q,
            crude_bound: Some(cond.crude_bound),
            q_used,
        },
        depth,
        merges: infos,
        n_sites: n,
        accounted_depth: root_block.accounted,
        circuit,
    })
}

// ---------------------------------------------------------------------------
// Simulation-facing helpers
// ---------------------------------------------------------------------------

/// Apply the compiled circuit to every physical basis state (ancillas at
/// zero) and return the effective operator on the physical register plus the
/// worst-case ancilla leakage.
pub fn effective_operator(result: &CompileResult) -> Result<(CMatrix, f64)> {
    let regs = &result.circuit.registers;
    let anc = result.ancillas.all();
    let phys_dims: Vec<usize> = result
        .physical
        .iter()
        .map(|&id| regs.iter().find(|r| r.id == id).unwrap().dim)
        .collect();
    let dim: usize = phys_dims.iter().product();
    let mut u = CMatrix::zeros(dim, dim);
    let mut worst_leak = 0.0f64;
    for col in 0..dim {
        // decode col into per-register digits (phys regs lead the order)
        let mut assignment = vec![0usize; regs.len()];
        let mut rem = col;
        for k in (0..phys_dims.len()).rev() {
            assignment[k] = rem % phys_dims[k];
            rem /= phys_dims[k];
        }
        let mut state = basis_state(regs, &assignment);
        apply_state(regs, &result.circuit.root, &mut state)?;
        let (sector, leak) = zero_sector(regs, &anc, &state);
        worst_leak = worst_leak.max(leak);
        for (row, amp) in sector.iter().enumerate() {
            u[(row, col)] = *amp;
        }
    }
    Ok((u, worst_leak))
}

/// Compare the compiled circuit against a dense reference unitary:
/// returns `(phase-invariant metric, max ancilla leakage)`.
pub fn verify_against(result: &CompileResult, reference: &CMatrix) -> Result<(f64, f64)> {
    let (u, leak) = effective_operator(result)?;
    if u.shape() != reference.shape() {
        return Err(Error::Shape("reference dimension mismatch".into()));
    }
    Ok((linalg::phase_invariant_metric(&u, reference), leak))
}

// ---------------------------------------------------------------------------
// Depth scaling
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, serde::Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub depth: usize,
    pub accounted: f64,
    pub reference: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub q: f64,
    pub q_used: f64,
    pub fitted_exponent: f64,
    pub ratio_spread: f64,
    pub bounded: bool,
}

/// Depth-only scaling table: ratio of the accounted depth against
/// `N^{1 + log2 q_used}`, with the max/min spread checked against `bound`.
pub fn depth_scaling_report(
    mpu: &UniformMpu,
    n_list: &[usize],
    opts: &CompileOptions,
    bound: f64,
) -> Result<ScalingReport> {
    let compiler = UniformCompiler::new(mpu, opts)?;
    let mut rows = Vec::with_capacity(n_list.len());
    let mut q_used = 1.0f64;
    for &n in n_list {
        let res = compiler.compile(n)?;
        q_used = q_used.max(res.q_report.q_used);
        rows.push(ScalingRow {
            n,
            depth: res.depth.depth,
            accounted: res.accounted_depth,
            reference: 0.0,
            ratio: 0.0,
        });
    }
    let expo = 1.0 + q_used.log2();
    for row in rows.iter_mut() {
        row.reference = (row.n as f64).powf(expo);
        row.ratio = row.accounted / row.reference;
    }
    let max = rows.iter().map(|r| r.ratio).fold(f64::MIN, f64::max);
    let min = rows.iter().map(|r| r.ratio).fold(f64::MAX, f64::min);
    let spread = max / min;
    // least-squares slope of ln(accounted) against ln(N)
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.accounted.ln()).collect();
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let ym = ys.iter().sum::<f64>() / ys.len() as f64;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let fitted = if den > 0.0 { num / den } else { 0.0 };
    Ok(ScalingReport {
        rows,
        q: compiler.q_unif(),
        q_used,
        fitted_exponent: fitted,
        ratio_spread: spread,
        bounded: spread <= bound,
    })
}

#[allow(unused)]
fn complex_zero() -> Complex64 {
    Complex64::ZERO
}
