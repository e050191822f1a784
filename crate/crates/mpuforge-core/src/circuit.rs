//! Hierarchical circuit representation on typed qudit registers, with the
//! oracle-call depth model, dense export, and a statevector simulator that
//! applies primitives by local tensor contraction.
//!
//! Register order convention: the circuit's register list is the state
//! ordering (first register is the slowest index, row-major).

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};

/// Cap on dense materialization (`to_unitary`).
pub const DENSE_CAP: usize = 4096;
/// Cap on statevector length.
pub const STATE_CAP: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegisterKind {
    Physical,
    Bond,
    LcuAncilla,
    Pad,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Register {
    pub id: usize,
    pub kind: RegisterKind,
    pub dim: usize,
}

/// Gate payloads. `Dense` and `Select` carry explicit matrices; the two
/// reflection gates are diagonal ±1 and stay structured so wide registers
/// never materialize.
#[derive(Clone, Debug)]
pub enum Gate {
    /// Square unitary over the primitive's registers, row-major grouping.
    Dense(CMatrix),
    /// Controlled select `Σ_i W_i ⊗ |i><i|`: the last register of the
    /// primitive is the control, the blocks act on the rest.
    Select { blocks: Vec<CMatrix> },
    /// Diagonal on a single register: +1 at index 0, −1 elsewhere
    /// (`2|0><0| - 1`); with `negate` the overall sign flips.
    AncillaReflection { negate: bool },
    /// Diagonal phase flip: −1 exactly when the last register (the
    /// amplification ancilla) reads 0 and any other register is nonzero.
    SubspaceFlip,
}

impl Gate {
    pub fn dagger(&self) -> Gate {
        match self {
            Gate::Dense(m) => Gate::Dense(m.adjoint()),
            Gate::Select { blocks } => Gate::Select {
                blocks: blocks.iter().map(|b| b.adjoint()).collect(),
            },
            // both reflections are real diagonal involutions
            Gate::AncillaReflection { negate } => Gate::AncillaReflection { negate: *negate },
            Gate::SubspaceFlip => Gate::SubspaceFlip,
        }
    }

    /// Dense matrix over the given register dims (primitive-local order).
    pub fn to_dense(&self, dims: &[usize]) -> CMatrix {
        let total: usize = dims.iter().product();
        match self {
            Gate::Dense(m) => m.clone(),
            Gate::Select { blocks } => {
                let ctrl = *dims.last().expect("select needs a control register");
                let sub = total / ctrl;
                let mut out = CMatrix::zeros(total, total);
                for (v, b) in blocks.iter().enumerate().take(ctrl) {
                    for r in 0..sub {
                        for cc in 0..sub {
                            // index = target_index * ctrl + ctrl_value
                            out[(r * ctrl + v, cc * ctrl + v)] = b[(r, cc)];
                        }
                    }
                }
                out
            }
            Gate::AncillaReflection { negate } => {
                let sign = if *negate { -1.0 } else { 1.0 };
                CMatrix::from_fn(total, total, |r, cc| {
                    if r != cc {
                        Complex64::ZERO
                    } else if r == 0 {
                        c(sign, 0.0)
                    } else {
                        c(-sign, 0.0)
                    }
                })
            }
            Gate::SubspaceFlip => {
                let ctrl = *dims.last().expect("flip needs a control register");
                CMatrix::from_fn(total, total, |r, cc| {
                    if r != cc {
                        return Complex64::ZERO;
                    }
                    let ctrl_val = r % ctrl;
                    let rest = r / ctrl;
                    if ctrl_val == 0 && rest != 0 {
                        c(-1.0, 0.0)
                    } else {
                        c(1.0, 0.0)
                    }
                })
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Primitive {
    pub gate: Arc<Gate>,
    /// Register ids, in the gate's own index order.
    pub registers: Vec<usize>,
}

#[derive(Clone, Debug)]
pub enum CircuitNode {
    Primitive(Primitive),
    /// Leftmost child acts first.
    Sequence(Vec<Arc<CircuitNode>>),
    Parallel(Vec<Arc<CircuitNode>>),
    Repeat {
        body: Arc<CircuitNode>,
        times: usize,
    },
}

impl CircuitNode {
    pub fn primitive(gate: Arc<Gate>, registers: Vec<usize>) -> Arc<CircuitNode> {
        Arc::new(CircuitNode::Primitive(Primitive { gate, registers }))
    }

    pub fn seq(children: Vec<Arc<CircuitNode>>) -> Arc<CircuitNode> {
        Arc::new(CircuitNode::Sequence(children))
    }

    pub fn par(children: Vec<Arc<CircuitNode>>) -> Arc<CircuitNode> {
        Arc::new(CircuitNode::Parallel(children))
    }

    pub fn repeat(body: Arc<CircuitNode>, times: usize) -> Arc<CircuitNode> {
        Arc::new(CircuitNode::Repeat { body, times })
    }

    pub fn dagger(self: &Arc<Self>) -> Arc<CircuitNode> {
        match self.as_ref() {
            CircuitNode::Primitive(p) => {
                CircuitNode::primitive(Arc::new(p.gate.dagger()), p.registers.clone())
            }
            CircuitNode::Sequence(children) => {
                CircuitNode::seq(children.iter().rev().map(|ch| ch.dagger()).collect())
            }
            CircuitNode::Parallel(children) => {
                CircuitNode::par(children.iter().map(|ch| ch.dagger()).collect())
            }
            CircuitNode::Repeat { body, times } => CircuitNode::repeat(body.dagger(), *times),
        }
    }

    /// All register ids the node touches.
    pub fn support(&self) -> std::collections::BTreeSet<usize> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_support(&mut out);
        out
    }

    fn collect_support(&self, out: &mut std::collections::BTreeSet<usize>) {
        match self {
            CircuitNode::Primitive(p) => out.extend(p.registers.iter().cloned()),
            CircuitNode::Sequence(ch) | CircuitNode::Parallel(ch) => {
                for x in ch {
                    x.collect_support(out);
                }
            }
            CircuitNode::Repeat { body, .. } => body.collect_support(out),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Circuit {
    pub registers: Vec<Register>,
    pub root: Arc<CircuitNode>,
}

impl Circuit {
    pub fn total_dim(&self) -> usize {
        self.registers.iter().map(|r| r.dim).product()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for r in &self.registers {
            if r.dim < 2 {
                return Err(Error::Validation(format!("register {} has dim < 2", r.id)));
            }
            if !seen.insert(r.id) {
                return Err(Error::Validation(format!("duplicate register id {}", r.id)));
            }
        }
        validate_node(&self.root, &self.registers)
    }
}

fn reg_dim(registers: &[Register], id: usize) -> Result<usize> {
    registers
        .iter()
        .find(|r| r.id == id)
        .map(|r| r.dim)
        .ok_or_else(|| Error::Validation(format!("unknown register id {id}")))
}

fn validate_node(node: &CircuitNode, registers: &[Register]) -> Result<()> {
    match node {
        CircuitNode::Primitive(p) => {
            let mut dims = Vec::with_capacity(p.registers.len());
            let mut seen = std::collections::HashSet::new();
            for &id in &p.registers {
                if !seen.insert(id) {
                    return Err(Error::Validation("primitive registers not distinct".into()));
                }
                dims.push(reg_dim(registers, id)?);
            }
            // product only where a payload has to match it; the structured
            // reflections act on arbitrarily many registers
            let checked_total = || -> Result<usize> {
                dims.iter().try_fold(1usize, |acc, &d| {
                    acc.checked_mul(d)
                        .ok_or_else(|| Error::Resource("register product overflow".into()))
                })
            };
            match p.gate.as_ref() {
                Gate::Dense(m) => {
                    let total = checked_total()?;
                    if m.nrows() != total || m.ncols() != total {
                        return Err(Error::Validation(format!(
                            "dense gate dim {} != register product {total}",
                            m.nrows()
                        )));
                    }
                    if total <= 256 && crate::linalg::unitarity_residual(m) > 1e-12 {
                        return Err(Error::Validation("dense gate not unitary".into()));
                    }
                }
                Gate::Select { blocks } => {
                    let total = checked_total()?;
                    let ctrl = *dims
                        .last()
                        .ok_or_else(|| Error::Validation("select gate needs registers".into()))?;
                    if blocks.len() != ctrl {
                        return Err(Error::Validation(
                            "select block count != control dim".into(),
                        ));
                    }
                    let sub = total / ctrl;
                    for b in blocks {
                        if b.nrows() != sub || b.ncols() != sub {
                            return Err(Error::Validation("select block shape mismatch".into()));
                        }
                        if sub <= 256 && crate::linalg::unitarity_residual(b) > 1e-12 {
                            return Err(Error::Validation("select block not unitary".into()));
                        }
                    }
                }
                Gate::AncillaReflection { .. } => {
                    if p.registers.len() != 1 {
                        return Err(Error::Validation(
                            "ancilla reflection acts on one register".into(),
                        ));
                    }
                }
                Gate::SubspaceFlip => {
                    if p.registers.len() < 2 {
                        return Err(Error::Validation(
                            "subspace flip needs targets and a control".into(),
                        ));
                    }
                }
            }
            Ok(())
        }
        CircuitNode::Sequence(ch) => {
            for x in ch {
                validate_node(x, registers)?;
            }
            Ok(())
        }
        CircuitNode::Parallel(ch) => {
            let mut union = std::collections::BTreeSet::new();
            for x in ch {
                let sup = x.support();
                if !union.is_disjoint(&sup) {
                    return Err(Error::Validation(
                        "parallel children share a register".into(),
                    ));
                }
                union.extend(sup);
                validate_node(x, registers)?;
            }
            Ok(())
        }
        CircuitNode::Repeat { body, .. } => validate_node(body, registers),
    }
}

// ---------------------------------------------------------------------------
// Depth
// ---------------------------------------------------------------------------

/// Oracle-call depth: every primitive counts 1 regardless of register count,
/// sequences add, parallels max, repetitions multiply.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DepthReport {
    pub depth: usize,
    /// Filled by the compiler: accounted cost per merge level.
    pub per_level: Vec<LevelCost>,
    pub q_used: Option<f64>,
    pub fitted_exponent: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelCost {
    pub level: usize,
    pub depth: usize,
    /// Depth with the per-merge span charge (see the cost-model note).
    pub accounted: f64,
}

pub fn depth(node: &CircuitNode) -> DepthReport {
    DepthReport {
        depth: depth_value(node),
        per_level: vec![],
        q_used: None,
        fitted_exponent: None,
    }
}

pub fn depth_value(node: &CircuitNode) -> usize {
    match node {
        CircuitNode::Primitive(_) => 1,
        CircuitNode::Sequence(ch) => ch.iter().map(|x| depth_value(x)).sum(),
        CircuitNode::Parallel(ch) => ch.iter().map(|x| depth_value(x)).max().unwrap_or(0),
        CircuitNode::Repeat { body, times } => times * depth_value(body),
    }
}

// ---------------------------------------------------------------------------
// Dense export
// ---------------------------------------------------------------------------

/// Dense unitary of a node in the circuit's register order.
pub fn to_unitary(registers: &[Register], node: &CircuitNode) -> Result<CMatrix> {
    let dim: usize = registers.iter().map(|r| r.dim).product();
    if dim > DENSE_CAP {
        return Err(Error::Resource(format!(
            "dense dimension {dim} exceeds {DENSE_CAP}"
        )));
    }
    match node {
        CircuitNode::Primitive(p) => {
            let dims: Vec<usize> = p
                .registers
                .iter()
                .map(|&id| reg_dim(registers, id))
                .collect::<Result<_>>()?;
            let g = p.gate.to_dense(&dims);
            let strides = strides_for(registers);
            let gate_strides: Vec<usize> = p
                .registers
                .iter()
                .map(|&id| strides[position_of(registers, id)])
                .collect();
            let t: usize = dims.iter().product();
            // local offset of each gate-local index
            let mut local = vec![0usize; t];
            for (gi, off) in local.iter_mut().enumerate() {
                let mut rem = gi;
                let mut acc = 0usize;
                for (k, &dd) in dims.iter().enumerate().rev() {
                    acc += (rem % dd) * gate_strides[k];
                    rem /= dd;
                }
                *off = acc;
            }
            let mut out = CMatrix::zeros(dim, dim);
            // iterate over complement assignments
            let comp: Vec<usize> = (0..registers.len())
                .filter(|k| !p.registers.contains(&registers[*k].id))
                .collect();
            let comp_dims: Vec<usize> = comp.iter().map(|&k| registers[k].dim).collect();
            let comp_strides: Vec<usize> = comp.iter().map(|&k| strides[k]).collect();
            let mut odo = vec![0usize; comp.len()];
            loop {
                let base: usize = odo.iter().zip(&comp_strides).map(|(&i, &s)| i * s).sum();
                for gr in 0..t {
                    for gc in 0..t {
                        let v = g[(gr, gc)];
                        if v != Complex64::ZERO {
                            out[(base + local[gr], base + local[gc])] = v;
                        }
                    }
                }
                if !advance(&mut odo, &comp_dims) {
                    break;
                }
            }
            Ok(out)
        }
        CircuitNode::Sequence(ch) => {
            let mut u = CMatrix::identity(dim, dim);
            for x in ch {
                u = to_unitary(registers, x)? * u;
            }
            Ok(u)
        }
        CircuitNode::Parallel(ch) => {
            let mut u = CMatrix::identity(dim, dim);
            for x in ch {
                u = to_unitary(registers, x)? * u;
            }
            Ok(u)
        }
        CircuitNode::Repeat { body, times } => {
            let b = to_unitary(registers, body)?;
            let mut u = CMatrix::identity(dim, dim);
            for _ in 0..*times {
                u = &b * u;
            }
            Ok(u)
        }
    }
}

fn position_of(registers: &[Register], id: usize) -> usize {
    registers
        .iter()
        .position(|r| r.id == id)
        .expect("register id")
}

fn strides_for(registers: &[Register]) -> Vec<usize> {
    let mut strides = vec![0usize; registers.len()];
    let mut acc = 1usize;
    for k in (0..registers.len()).rev() {
        strides[k] = acc;
        acc *= registers[k].dim;
    }
    strides
}

fn advance(odo: &mut [usize], dims: &[usize]) -> bool {
    for k in (0..odo.len()).rev() {
        odo[k] += 1;
        if odo[k] < dims[k] {
            return true;
        }
        odo[k] = 0;
    }
    false
}

// ---------------------------------------------------------------------------
// Statevector simulation
// ---------------------------------------------------------------------------

/// Apply a node to a state (length = product of register dims) by local
/// contraction; never materializes the global unitary.
pub fn apply_state(
    registers: &[Register],
    node: &CircuitNode,
    state: &mut [Complex64],
) -> Result<()> {
    let dim: usize = registers.iter().map(|r| r.dim).product();
    if state.len() != dim {
        return Err(Error::Shape(format!(
            "state length {} != register product {dim}",
            state.len()
        )));
    }
    if dim > STATE_CAP {
        return Err(Error::Resource(format!(
            "state length {dim} exceeds cap {STATE_CAP}"
        )));
    }
    apply_node(registers, node, state)
}

fn apply_node(registers: &[Register], node: &CircuitNode, state: &mut [Complex64]) -> Result<()> {
    match node {
        CircuitNode::Primitive(p) => apply_primitive(registers, p, state),
        CircuitNode::Sequence(ch) | CircuitNode::Parallel(ch) => {
            for x in ch {
                apply_node(registers, x, state)?;
            }
            Ok(())
        }
        CircuitNode::Repeat { body, times } => {
            for _ in 0..*times {
                apply_node(registers, body, state)?;
            }
            Ok(())
        }
    }
}

struct GatherPlan {
    /// state offsets of the gate-local basis, row-major over gate registers
    local: Vec<usize>,
    comp_dims: Vec<usize>,
    comp_strides: Vec<usize>,
}

fn gather_plan(registers: &[Register], gate_regs: &[usize], skip: Option<usize>) -> GatherPlan {
    let strides = strides_for(registers);
    let dims: Vec<usize> = gate_regs
        .iter()
        .map(|&id| registers[position_of(registers, id)].dim)
        .collect();
    let gate_strides: Vec<usize> = gate_regs
        .iter()
        .map(|&id| strides[position_of(registers, id)])
        .collect();
    let t: usize = dims.iter().product();
    let mut local = vec![0usize; t];
    for (gi, off) in local.iter_mut().enumerate() {
        let mut rem = gi;
        let mut acc = 0usize;
        for (k, &dd) in dims.iter().enumerate().rev() {
            acc += (rem % dd) * gate_strides[k];
            rem /= dd;
        }
        *off = acc;
    }
    let mut comp_dims = Vec::new();
    let mut comp_strides = Vec::new();
    for (k, r) in registers.iter().enumerate() {
        if gate_regs.contains(&r.id) || Some(r.id) == skip {
            continue;
        }
        comp_dims.push(r.dim);
        comp_strides.push(strides[k]);
    }
    GatherPlan {
        local,
        comp_dims,
        comp_strides,
    }
}

fn apply_dense_on(
    registers: &[Register],
    gate_regs: &[usize],
    g: &CMatrix,
    state: &mut [Complex64],
    fixed: Option<(usize, usize)>, // (register id, value)
) {
    let plan = gather_plan(registers, gate_regs, fixed.map(|f| f.0));
    let t = plan.local.len();
    let base_fixed = fixed
        .map(|(id, v)| {
            let strides = strides_for(registers);
            strides[position_of(registers, id)] * v
        })
        .unwrap_or(0);
    let mut x = vec![Complex64::ZERO; t];
    let mut y = vec![Complex64::ZERO; t];
    let mut odo = vec![0usize; plan.comp_dims.len()];
    loop {
        let base: usize = base_fixed
            + odo
                .iter()
                .zip(&plan.comp_strides)
                .map(|(&i, &s)| i * s)
                .sum::<usize>();
        for (k, &off) in plan.local.iter().enumerate() {
            x[k] = state[base + off];
        }
        // y = G x, streaming G's column-major storage
        y.iter_mut().for_each(|v| *v = Complex64::ZERO);
        let g_data = g.as_slice();
        for (k, xv) in x.iter().enumerate() {
            if *xv == Complex64::ZERO {
                continue;
            }
            let col = &g_data[k * t..(k + 1) * t];
            for (yr, gv) in y.iter_mut().zip(col) {
                *yr += gv * xv;
            }
        }
        for (k, &off) in plan.local.iter().enumerate() {
            state[base + off] = y[k];
        }
        if !advance(&mut odo, &plan.comp_dims) {
            break;
        }
    }
}

fn apply_primitive(registers: &[Register], p: &Primitive, state: &mut [Complex64]) -> Result<()> {
    match p.gate.as_ref() {
        Gate::Dense(m) => {
            apply_dense_on(registers, &p.registers, m, state, None);
            Ok(())
        }
        Gate::Select { blocks } => {
            let ctrl_id = *p.registers.last().unwrap();
            let targets = &p.registers[..p.registers.len() - 1];
            for (v, b) in blocks.iter().enumerate() {
                apply_dense_on(registers, targets, b, state, Some((ctrl_id, v)));
            }
            Ok(())
        }
        Gate::AncillaReflection { negate } => {
            let strides = strides_for(registers);
            let k = position_of(registers, p.registers[0]);
            let (stride, dimr) = (strides[k], registers[k].dim);
            let sign = if *negate { -1.0 } else { 1.0 };
            for (idx, amp) in state.iter_mut().enumerate() {
                let v = (idx / stride) % dimr;
                let s = if v == 0 { sign } else { -sign };
                *amp *= c(s, 0.0);
            }
            Ok(())
        }
        Gate::SubspaceFlip => {
            let strides = strides_for(registers);
            let ctrl_id = *p.registers.last().unwrap();
            let kc = position_of(registers, ctrl_id);
            let (cs, cd) = (strides[kc], registers[kc].dim);
            let targets: Vec<(usize, usize)> = p.registers[..p.registers.len() - 1]
                .iter()
                .map(|&id| {
                    let k = position_of(registers, id);
                    (strides[k], registers[k].dim)
                })
                .collect();
            for (idx, amp) in state.iter_mut().enumerate() {
                if (idx / cs) % cd != 0 {
                    continue;
                }
                let nonzero = targets.iter().any(|&(s, d)| (idx / s) % d != 0);
                if nonzero {
                    *amp = -*amp;
                }
            }
            Ok(())
        }
    }
}

/// Basis state with the given per-register indices.
pub fn basis_state(registers: &[Register], assignment: &[usize]) -> Vec<Complex64> {
    let dim: usize = registers.iter().map(|r| r.dim).product();
    let strides = strides_for(registers);
    let idx: usize = assignment.iter().zip(&strides).map(|(&i, &s)| i * s).sum();
    let mut v = vec![Complex64::ZERO; dim];
    v[idx] = c(1.0, 0.0);
    v
}

/// Decompose a state over one register subset: returns the amplitudes of the
/// sector where all the listed registers read zero, as a vector over the
/// remaining registers (in circuit order), plus the leaked weight outside.
pub fn zero_sector(
    registers: &[Register],
    zero_regs: &[usize],
    state: &[Complex64],
) -> (Vec<Complex64>, f64) {
    let strides = strides_for(registers);
    let keep: Vec<usize> = (0..registers.len())
        .filter(|&k| !zero_regs.contains(&registers[k].id))
        .collect();
    let keep_dims: Vec<usize> = keep.iter().map(|&k| registers[k].dim).collect();
    let keep_strides: Vec<usize> = keep.iter().map(|&k| strides[k]).collect();
    let keep_total: usize = keep_dims.iter().product();
    let mut out = vec![Complex64::ZERO; keep_total];
    let mut odo = vec![0usize; keep.len()];
    let mut pos = 0usize;
    loop {
        let src: usize = odo.iter().zip(&keep_strides).map(|(&i, &s)| i * s).sum();
        out[pos] = state[src];
        pos += 1;
        if !advance(&mut odo, &keep_dims) {
            break;
        }
    }
    let kept: f64 = out.iter().map(|v| v.norm_sqr()).sum();
    let total: f64 = state.iter().map(|v| v.norm_sqr()).sum();
    (out, (total - kept).max(0.0))
}

// ---------------------------------------------------------------------------
// JSON (schema "v1")
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct GateJson {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    entries: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    blocks: Option<Vec<GateJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    negate: Option<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum NodeJson {
    Primitive {
        registers: Vec<usize>,
        gate: GateJson,
    },
    Sequence {
        children: Vec<NodeJson>,
    },
    Parallel {
        children: Vec<NodeJson>,
    },
    Repeat {
        times: usize,
        body: Box<NodeJson>,
    },
}

#[derive(Serialize, Deserialize)]
struct CircuitJson {
    version: String,
    registers: Vec<Register>,
    root: NodeJson,
}

fn matrix_json(m: &CMatrix) -> GateJson {
    GateJson {
        kind: "dense".into(),
        dim: Some(m.nrows()),
        entries: Some(m.iter_rows_major().map(|v| [v.re, v.im]).collect()),
        blocks: None,
        negate: None,
    }
}

trait IterRowsMajor {
    fn iter_rows_major(&self) -> Box<dyn Iterator<Item = Complex64> + '_>;
}
impl IterRowsMajor for CMatrix {
    fn iter_rows_major(&self) -> Box<dyn Iterator<Item = Complex64> + '_> {
        let rows = self.nrows();
        let cols = self.ncols();
        Box::new((0..rows).flat_map(move |r| (0..cols).map(move |cc| self[(r, cc)])))
    }
}

fn matrix_from_json(g: &GateJson) -> Result<CMatrix> {
    let dim = g
        .dim
        .ok_or_else(|| Error::Validation("dense gate missing dim".into()))?;
    let entries = g
        .entries
        .as_ref()
        .ok_or_else(|| Error::Validation("dense gate missing entries".into()))?;
    if entries.len() != dim * dim {
        return Err(Error::Validation("dense gate entry count mismatch".into()));
    }
    Ok(CMatrix::from_fn(dim, dim, |r, cc| {
        let [re, im] = entries[r * dim + cc];
        c(re, im)
    }))
}

fn gate_json(g: &Gate, dims: &[usize]) -> GateJson {
    match g {
        Gate::Dense(m) => matrix_json(m),
        Gate::Select { blocks } => GateJson {
            kind: "select".into(),
            dim: None,
            entries: None,
            blocks: Some(blocks.iter().map(matrix_json).collect()),
            negate: None,
        },
        Gate::AncillaReflection { negate } => GateJson {
            kind: "ancilla_reflection".into(),
            dim: Some(dims.iter().product()),
            entries: None,
            blocks: None,
            negate: Some(*negate),
        },
        Gate::SubspaceFlip => GateJson {
            kind: "subspace_flip".into(),
            dim: None,
            entries: None,
            blocks: None,
            negate: None,
        },
    }
}

fn node_json(node: &CircuitNode, registers: &[Register]) -> NodeJson {
    match node {
        CircuitNode::Primitive(p) => {
            let dims: Vec<usize> = p
                .registers
                .iter()
                .map(|&id| registers[position_of(registers, id)].dim)
                .collect();
            NodeJson::Primitive {
                registers: p.registers.clone(),
                gate: gate_json(&p.gate, &dims),
            }
        }
        CircuitNode::Sequence(ch) => NodeJson::Sequence {
            children: ch.iter().map(|x| node_json(x, registers)).collect(),
        },
        CircuitNode::Parallel(ch) => NodeJson::Parallel {
            children: ch.iter().map(|x| node_json(x, registers)).collect(),
        },
        CircuitNode::Repeat { body, times } => NodeJson::Repeat {
            times: *times,
            body: Box::new(node_json(body, registers)),
        },
    }
}

fn node_from_json(n: &NodeJson) -> Result<Arc<CircuitNode>> {
    Ok(match n {
        NodeJson::Primitive { registers, gate } => {
            let g = match gate.kind.as_str() {
                "dense" => Gate::Dense(matrix_from_json(gate)?),
                "select" => {
                    let blocks = gate
                        .blocks
                        .as_ref()
                        .ok_or_else(|| Error::Validation("select gate missing blocks".into()))?
                        .iter()
                        .map(matrix_from_json)
                        .collect::<Result<Vec<_>>>()?;
                    Gate::Select { blocks }
                }
                "ancilla_reflection" => Gate::AncillaReflection {
                    negate: gate.negate.unwrap_or(false),
                },
                "subspace_flip" => Gate::SubspaceFlip,
                other => return Err(Error::Validation(format!("unknown gate kind {other}"))),
            };
            CircuitNode::primitive(Arc::new(g), registers.clone())
        }
        NodeJson::Sequence { children } => CircuitNode::seq(
            children
                .iter()
                .map(node_from_json)
                .collect::<Result<Vec<_>>>()?,
        ),
        NodeJson::Parallel { children } => CircuitNode::par(
            children
                .iter()
                .map(node_from_json)
                .collect::<Result<Vec<_>>>()?,
        ),
        NodeJson::Repeat { times, body } => CircuitNode::repeat(node_from_json(body)?, *times),
    })
}

pub fn circuit_to_json(circuit: &Circuit) -> String {
    let doc = CircuitJson {
        version: "v1".into(),
        registers: circuit.registers.clone(),
        root: node_json(&circuit.root, &circuit.registers),
    };
    serde_json::to_string(&doc).expect("circuit serialization")
}

pub fn circuit_from_json(text: &str) -> Result<Circuit> {
    let doc: CircuitJson = serde_json::from_str(text)
        .map_err(|e| Error::Validation(format!("bad circuit JSON: {e}")))?;
    if doc.version != "v1" {
        return Err(Error::Validation(format!(
            "unsupported circuit version {}",
            doc.version
        )));
    }
    let circuit = Circuit {
        registers: doc.registers,
        root: node_from_json(&doc.root)?,
    };
    circuit.validate()?;
    Ok(circuit)
}
