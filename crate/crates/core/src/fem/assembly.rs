//! Coefficient-weighted stiffness assembly on tensor-product meshes.
//!
//! One engine serves the canonical operator, the lifted two-scale and
//! reiterated operators, and periodic cell problems. The integration domain
//! is a product of `groups` copies of [0,1]^d (x, y₁, …, yₙ); every
//! coordinate carries the same uniform 1D mesh. On each product cell the
//! coefficient is sampled at the midpoints of a grid of sub-cells and held
//! constant there, while the piecewise polynomial basis products are
//! integrated exactly through per-cell moments ∫ a ∏_q t_q^{e_q}, e_q ≤ 2.
//! For a ≡ 1 this reproduces the exact Galerkin matrices.

use super::coefficient::MultiscaleCoefficient;
use super::mesh::{checked_pow, TensorMesh};
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::scalar::Real;
use rayon::prelude::*;
use std::ops::Range;

/// Resolution and size limits for assembly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssemblyOptions {
    /// Maximum sub-cells per product cell.
    pub quad_budget: usize,
    /// Maximum number of unknowns.
    pub dof_budget: usize,
    /// Forces this many sub-cells per coordinate instead of the default rule.
    pub sub_override: Option<usize>,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { quad_budget: 1 << 16, dof_budget: 4_000_000, sub_override: None }
    }
}

/// How the nodes of a field's own (gradient) group are indexed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum OwnNodes {
    /// Nodes 1..=N, zero on the boundary.
    Interior,
    /// Nodes taken modulo the cell count.
    Periodic,
}

/// Field uₖ depends on groups 0..=k, is differentiated in group k and uses
/// boundary-including macro nodes 0..=N+1, scaled by h^{-1/2} per
/// coordinate, in groups below k.
#[derive(Clone, Copy, Debug)]
pub(crate) struct FieldSpec {
    pub level: usize,
    pub own: OwnNodes,
}

#[derive(Clone, Debug)]
pub(crate) struct ProductLayout {
    pub d: usize,
    pub groups: usize,
    pub cells: usize,
    pub fields: Vec<FieldSpec>,
    pub offsets: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl ProductLayout {
    pub fn new(d: usize, groups: usize, cells: usize, fields: Vec<FieldSpec>) -> Result<Self> {
        let overflow = || Error::DimensionOverflow { what: "lifted dof count" };
        let mut offsets = Vec::with_capacity(fields.len());
        let mut sizes = Vec::with_capacity(fields.len());
        let mut total = 0usize;
        for f in &fields {
            if f.level >= groups {
                return Err(Error::invalid("field level exceeds the number of coordinate groups"));
            }
            let own = match f.own {
                OwnNodes::Interior => cells - 1,
                OwnNodes::Periodic => cells,
            };
            let macro_part = checked_pow(cells + 1, f.level * d).ok_or_else(overflow)?;
            let own_part = checked_pow(own, d).ok_or_else(overflow)?;
            let size = macro_part.checked_mul(own_part).ok_or_else(overflow)?;
            offsets.push(total);
            sizes.push(size);
            total = total.checked_add(size).ok_or_else(overflow)?;
        }
        Ok(ProductLayout { d, groups, cells, fields, offsets, sizes })
    }

    pub fn dof(&self) -> usize {
        self.offsets.last().map_or(0, |o| o + self.sizes.last().unwrap())
    }

    fn n_coords(&self) -> usize {
        self.d * self.groups
    }
}

#[derive(Clone, Debug)]
struct Slot {
    field: usize,
    bits: Vec<u8>,
}

#[derive(Clone, Copy)]
enum Factor {
    One,
    Value(u8),
    Deriv(u8),
}

fn factor_poly<T: Real>(f: Factor, inv_h: T) -> [T; 2] {
    match f {
        Factor::One => [T::one(), T::zero()],
        Factor::Value(0) => [T::one(), -T::one()],
        Factor::Value(_) => [T::zero(), T::one()],
        Factor::Deriv(0) => [-inv_h, T::zero()],
        Factor::Deriv(_) => [inv_h, T::zero()],
    }
}

fn slot_factor(layout: &ProductLayout, slot: &Slot, q: usize, dir: usize) -> Factor {
    let level = layout.fields[slot.field].level;
    let own_coords = (level + 1) * layout.d;
    if q >= own_coords {
        Factor::One
    } else if q == level * layout.d + dir {
        Factor::Deriv(slot.bits[q])
    } else {
        Factor::Value(slot.bits[q])
    }
}

/// Per pair of local basis functions, the coefficient tensor that turns the
/// cell moments into the local matrix entry.
struct PairTable<T> {
    slots: Vec<Slot>,
    pairs: Vec<(usize, usize, Vec<T>)>,
}

fn build_pairs<T: Real>(layout: &ProductLayout, h: f64) -> PairTable<T> {
    let d = layout.d;
    let nc = layout.n_coords();
    let inv_h = T::c(1.0 / h);
    let mut slots = Vec::new();
    for (fi, f) in layout.fields.iter().enumerate() {
        let k = (f.level + 1) * d;
        for pattern in 0..(1usize << k) {
            let bits = (0..k).map(|q| ((pattern >> (k - 1 - q)) & 1) as u8).collect();
            slots.push(Slot { field: fi, bits });
        }
    }
    let scale: Vec<T> = slots
        .iter()
        .map(|s| T::c(h.powf(-0.5 * (layout.fields[s.field].level * d) as f64)))
        .collect();
    let len = 3usize.pow(nc as u32);
    let mut pairs = Vec::new();
    for a in 0..slots.len() {
        for b in a..slots.len() {
            let mut tensor = vec![T::zero(); len];
            for dir in 0..d {
                let polys: Vec<[T; 3]> = (0..nc)
                    .map(|q| {
                        let p = factor_poly(slot_factor(layout, &slots[a], q, dir), inv_h);
                        let r = factor_poly(slot_factor(layout, &slots[b], q, dir), inv_h);
                        [p[0] * r[0], p[0] * r[1] + p[1] * r[0], p[1] * r[1]]
                    })
                    .collect();
                for (idx, t) in tensor.iter_mut().enumerate() {
                    let mut v = T::one();
                    let mut rem = idx;
                    for q in (0..nc).rev() {
                        v = v * polys[q][rem % 3];
                        rem /= 3;
                        if v == T::zero() {
                            break;
                        }
                    }
                    *t = *t + v;
                }
            }
            let s = scale[a] * scale[b];
            if tensor.iter().any(|v| *v != T::zero()) {
                for v in &mut tensor {
                    *v = *v * s;
                }
                pairs.push((a, b, tensor));
            }
        }
    }
    PairTable { slots, pairs }
}

/// Exact ∫ over sub-interval j of m of h·t^e, e = 0,1,2.
fn sub_integrals<T: Real>(m: usize, h: f64) -> Vec<[T; 3]> {
    (0..m)
        .map(|j| {
            let a = j as f64 / m as f64;
            let b = (j + 1) as f64 / m as f64;
            [T::c(h * (b - a)), T::c(h * (b * b - a * a) / 2.0), T::c(h * (b * b * b - a * a * a) / 3.0)]
        })
        .collect()
}

/// Replaces axis `q` (length `len`) of a row-major tensor by its three
/// moments.
fn axis_moments<T: Real>(data: &[T], outer: usize, len: usize, inner: usize, w: &[[T; 3]]) -> Vec<T> {
    let mut out = vec![T::zero(); outer * 3 * inner];
    for o in 0..outer {
        for j in 0..len {
            let base = (o * len + j) * inner;
            for (e, &we) in w[j].iter().enumerate() {
                let dst = (o * 3 + e) * inner;
                for i in 0..inner {
                    out[dst + i] = out[dst + i] + we * data[base + i];
                }
            }
        }
    }
    out
}

struct Entry<T> {
    row: usize,
    col: usize,
    val: T,
    mag: T,
}

fn reduce_sorted<T: Real>(mut v: Vec<Entry<T>>) -> Vec<Entry<T>> {
    v.sort_by_key(|e| (e.row, e.col));
    let mut out: Vec<Entry<T>> = Vec::with_capacity(v.len() / 2 + 1);
    for e in v {
        match out.last_mut() {
            Some(l) if l.row == e.row && l.col == e.col => {
                l.val = l.val + e.val;
                l.mag = l.mag + e.mag;
            }
            _ => out.push(e),
        }
    }
    out
}

/// Assembles the symmetric form ∫ a (Σₖ∇_{gₖ}uₖ)·(Σₗ∇_{gₗ}vₗ) over the
/// product domain described by `layout`. `sub[q]` is the number of
/// quadrature sub-cells per cell along coordinate q.
pub(crate) fn assemble_product<T: Real>(
    layout: &ProductLayout,
    sub: &[usize],
    coef: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<SparseMatrix<T>> {
    let nc = layout.n_coords();
    assert_eq!(sub.len(), nc);
    let cells = layout.cells;
    let h = 1.0 / cells as f64;
    let table = build_pairs::<T>(layout, h);
    let integrals: Vec<Vec<[T; 3]>> = sub.iter().map(|&m| sub_integrals::<T>(m, h)).collect();
    let n_sub: usize = sub.iter().product();
    let cells_per_slab = cells.pow(nc as u32 - 1);
    let eps = T::epsilon();

    let slab = |c0: usize| -> Vec<Entry<T>> {
        let mut out = Vec::new();
        let mut c = vec![0usize; nc];
        c[0] = c0;
        let mut point = vec![0.0; nc];
        let mut values = vec![T::zero(); n_sub];
        let mut globals: Vec<Option<usize>> = vec![None; table.slots.len()];
        for rest in 0..cells_per_slab {
            let mut r = rest;
            for q in (1..nc).rev() {
                c[q] = r % cells;
                r /= cells;
            }
            // coefficient on the sub-cell grid
            for (s, val) in values.iter_mut().enumerate() {
                let mut rem = s;
                for q in (0..nc).rev() {
                    let j = rem % sub[q];
                    rem /= sub[q];
                    point[q] = (c[q] as f64 + (j as f64 + 0.5) / sub[q] as f64) * h;
                }
                *val = T::c(coef(&point));
            }
            // moments, innermost coordinate first
            let mut data = values.clone();
            let mut inner = 1;
            for q in (0..nc).rev() {
                let outer: usize = sub[..q].iter().product();
                data = axis_moments(&data, outer, sub[q], inner, &integrals[q]);
                inner *= 3;
            }
            for (g, slot) in globals.iter_mut().zip(&table.slots) {
                *g = global_index(layout, slot, &c);
            }
            for (a, b, tensor) in &table.pairs {
                let (Some(ga), Some(gb)) = (globals[*a], globals[*b]) else { continue };
                let mut v = T::zero();
                let mut mag = T::zero();
                for (t, m) in tensor.iter().zip(&data) {
                    let p = *t * *m;
                    v = v + p;
                    mag = mag + p.abs();
                }
                if a != b && ga == gb {
                    v = v + v;
                    mag = mag + mag;
                }
                let (row, col) = if ga <= gb { (ga, gb) } else { (gb, ga) };
                out.push(Entry { row, col, val: v, mag });
            }
        }
        reduce_sorted(out)
    };

    let slabs: Vec<Vec<Entry<T>>> = (0..cells).into_par_iter().map(slab).collect();
    let merged = reduce_sorted(slabs.into_iter().flatten().collect());
    let n = layout.dof();
    let mut trips = Vec::with_capacity(2 * merged.len());
    for e in merged {
        // sums that cancel to rounding level are structural zeros
        if e.val.abs() <= T::c(64.0) * eps * e.mag {
            continue;
        }
        trips.push((e.row, e.col, e.val));
        if e.row != e.col {
            trips.push((e.col, e.row, e.val));
        }
    }
    SparseMatrix::from_triplets(n, n, trips)
}

fn global_index(layout: &ProductLayout, slot: &Slot, cell: &[usize]) -> Option<usize> {
    let f = layout.fields[slot.field];
    let d = layout.d;
    let cells = layout.cells;
    let mut idx = 0usize;
    for (q, &bit) in slot.bits.iter().enumerate() {
        let node = cell[q] + bit as usize;
        let own = q >= f.level * d;
        let (i, size) = if !own {
            (node, cells + 1)
        } else {
            match f.own {
                OwnNodes::Interior => {
                    if node == 0 || node == cells {
                        return None;
                    }
                    (node - 1, cells - 1)
                }
                OwnNodes::Periodic => (node % cells, cells),
            }
        };
        idx = idx * size + i;
    }
    Some(layout.offsets[slot.field] + idx)
}

/// Sub-cells per coordinate needed to resolve the finest scale: edge at
/// most εₙ/8 and at least three per cell.
pub fn canonical_subcells(coef: &MultiscaleCoefficient, mesh: &TensorMesh) -> usize {
    if coef.n_scales() == 0 {
        return 3;
    }
    let need = (8.0 * mesh.h() / coef.finest_scale() - 1e-9).ceil() as usize;
    need.max(3)
}

/// Sub-cells per cell along a fast coordinate of the lifted problem: at
/// least 16 per period and three per cell.
pub fn lifted_subcells(mesh: &TensorMesh) -> usize {
    ((16.0 * mesh.h() - 1e-9).ceil() as usize).max(3)
}

fn check_quad_budget(sub: &[usize], opts: &AssemblyOptions) -> Result<()> {
    let total = sub.iter().try_fold(1usize, |a, &m| a.checked_mul(m)).unwrap_or(usize::MAX);
    if total > opts.quad_budget {
        return Err(Error::QuadratureBudget { required: total, budget: opts.quad_budget });
    }
    Ok(())
}

/// Galerkin matrix of -div(a(x, x/ε₁, …) ∇u) with homogeneous Dirichlet
/// conditions.
pub fn assemble_canonical<T: Real>(
    coef: &MultiscaleCoefficient,
    mesh: &TensorMesh,
    opts: &AssemblyOptions,
) -> Result<SparseMatrix<T>> {
    check_dims(coef, mesh)?;
    let dof = mesh.dof()?;
    if dof > opts.dof_budget {
        return Err(Error::DofBudget { required: dof as u128, budget: opts.dof_budget });
    }
    let m = opts.sub_override.unwrap_or_else(|| canonical_subcells(coef, mesh));
    let sub = vec![m; mesh.d()];
    check_quad_budget(&sub, opts)?;
    let layout = ProductLayout::new(mesh.d(), 1, mesh.cells(), vec![FieldSpec { level: 0, own: OwnNodes::Interior }])?;
    assemble_product(&layout, &sub, &|x| coef.evaluate_canonical(x))
}

fn check_dims(coef: &MultiscaleCoefficient, mesh: &TensorMesh) -> Result<()> {
    if coef.d() != mesh.d() {
        return Err(Error::DimensionMismatch { what: "coefficient vs mesh dimension", left: coef.d(), right: mesh.d() });
    }
    Ok(())
}

/// Lifted homogenized system over Ω × Y₁ × … × Yₙ with unknowns ordered
/// [uₙ; …; u₁; u₀].
#[derive(Clone, Debug)]
pub struct LiftedSystem<T> {
    pub matrix: SparseMatrix<T>,
    pub force: Vec<T>,
    pub mesh: TensorMesh,
    pub n_scales: usize,
    /// Offsets of uₙ, …, u₀ in that order.
    pub offsets: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl<T: Real> LiftedSystem<T> {
    /// Index range of uₖ.
    pub fn range(&self, level: usize) -> Range<usize> {
        let i = self.n_scales - level;
        self.offsets[i]..self.offsets[i] + self.sizes[i]
    }

    /// Block of the matrix coupling uₖ (rows) with uₗ (columns).
    pub fn block(&self, k: usize, l: usize) -> SparseMatrix<T> {
        self.matrix.submatrix(self.range(k), self.range(l))
    }

    pub fn split(&self, x: &[T]) -> Vec<Vec<T>> {
        (0..=self.n_scales).map(|k| x[self.range(k)].to_vec()).collect()
    }

    /// Rows of uₙ whose stencil is not cut by any boundary.
    pub fn interior_rows(&self) -> Vec<usize> {
        let d = self.mesh.d();
        let n = self.mesh.n();
        let coords = (self.n_scales + 1) * d;
        let base = self.range(self.n_scales).start;
        let mut rows = Vec::new();
        'outer: for local in 0..self.sizes[0] {
            let mut r = local;
            for q in (0..coords).rev() {
                let full = if q >= self.n_scales * d {
                    let node = r % n + 1;
                    r /= n;
                    node >= 2 && node < n
                } else {
                    let node = r % (n + 2);
                    r /= n + 2;
                    node >= 1 && node <= n
                };
                if !full {
                    continue 'outer;
                }
            }
            rows.push(base + local);
        }
        rows
    }
}

/// Two-scale system for a coefficient with one fine scale.
pub fn assemble_two_scale<T: Real>(
    coef: &MultiscaleCoefficient,
    mesh: &TensorMesh,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    opts: &AssemblyOptions,
) -> Result<LiftedSystem<T>> {
    if coef.n_scales() != 1 {
        return Err(Error::invalid(format!("two-scale assembly needs n = 1, coefficient has n = {}", coef.n_scales())));
    }
    assemble_lifted(coef, mesh, f, opts)
}

/// Reiterated (n+1)-scale system.
pub fn assemble_reiterated<T: Real>(
    coef: &MultiscaleCoefficient,
    mesh: &TensorMesh,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    opts: &AssemblyOptions,
) -> Result<LiftedSystem<T>> {
    if coef.n_scales() == 0 {
        return Err(Error::invalid("reiterated assembly needs at least one fine scale"));
    }
    assemble_lifted(coef, mesh, f, opts)
}

/// Number of unknowns of the lifted system, computed without overflow.
pub fn lifted_dof(mesh: &TensorMesh, n_scales: usize) -> u128 {
    let d = mesh.d() as u32;
    let n = mesh.n() as u128;
    (0..=n_scales as u32).map(|k| (n + 2).pow(k * d) * n.pow(d)).sum()
}

fn assemble_lifted<T: Real>(
    coef: &MultiscaleCoefficient,
    mesh: &TensorMesh,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    opts: &AssemblyOptions,
) -> Result<LiftedSystem<T>> {
    check_dims(coef, mesh)?;
    let n = coef.n_scales();
    let d = mesh.d();
    let required = lifted_dof(mesh, n);
    if required > opts.dof_budget as u128 {
        return Err(Error::DofBudget { required, budget: opts.dof_budget });
    }
    let fields: Vec<FieldSpec> = (0..=n).rev().map(|level| FieldSpec { level, own: OwnNodes::Interior }).collect();
    let layout = ProductLayout::new(d, n + 1, mesh.cells(), fields)?;
    let my = opts.sub_override.unwrap_or_else(|| lifted_subcells(mesh));
    let mx = opts.sub_override.unwrap_or(3);
    let sub: Vec<usize> = (0..(n + 1) * d).map(|q| if q < d { mx } else { my }).collect();
    check_quad_budget(&sub, opts)?;
    let matrix = assemble_product(&layout, &sub, &|p| coef.evaluate(&p[..d], &p[d..]))?;
    let f0: Vec<T> = super::force::assemble_force(f, mesh)?;
    let mut force = vec![T::zero(); layout.dof()];
    let u0 = *layout.offsets.last().unwrap();
    force[u0..].copy_from_slice(&f0);
    Ok(LiftedSystem { matrix, force, mesh: *mesh, n_scales: n, offsets: layout.offsets, sizes: layout.sizes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::matrices::{lifted_unit_stiffness, stiffness_d};

    #[test]
    fn unit_coefficient_gives_stiffness() {
        for d in 1..=3 {
            let mesh = TensorMesh::new(d, 4).unwrap();
            let c = MultiscaleCoefficient::preset("constant", d, vec![]).unwrap();
            let a: SparseMatrix<f64> = assemble_canonical(&c, &mesh, &AssemblyOptions::default()).unwrap();
            let k = stiffness_d::<f64>(&mesh).unwrap();
            assert!(a.max_abs_diff(&k) < 1e-12, "d={d}");
        }
    }

    #[test]
    fn unit_lifted_is_block_diagonal() {
        let mesh = TensorMesh::new(1, 2).unwrap();
        let c = MultiscaleCoefficient::preset("constant", 1, vec![0.5]).unwrap();
        let sys: LiftedSystem<f64> = assemble_two_scale(&c, &mesh, &|_| 1.0, &AssemblyOptions::default()).unwrap();
        assert_eq!(sys.block(1, 0).nnz(), 0);
        assert_eq!(sys.block(0, 1).nnz(), 0);
        let k = lifted_unit_stiffness::<f64>(&mesh, 1).unwrap();
        assert!(sys.matrix.max_abs_diff(&k) < 1e-12);
    }

    #[test]
    fn periodic_unit_stiffness_has_constant_kernel() {
        let layout = ProductLayout::new(1, 1, 5, vec![FieldSpec { level: 0, own: OwnNodes::Periodic }]).unwrap();
        let k: SparseMatrix<f64> = assemble_product(&layout, &[3], &|_| 1.0).unwrap();
        assert_eq!(k.n_rows(), 5);
        let r = k.matvec(&[1.0; 5]);
        assert!(r.iter().all(|v| v.abs() < 1e-12));
        assert!((k.get(0, 4) + 5.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_budget_enforced() {
        let mesh = TensorMesh::new(1, 3).unwrap();
        let c = MultiscaleCoefficient::preset("sin1d", 1, vec![1e-4]).unwrap();
        let opts = AssemblyOptions { quad_budget: 100, ..Default::default() };
        match assemble_canonical::<f64>(&c, &mesh, &opts) {
            Err(Error::QuadratureBudget { required, .. }) => assert!(required > 100),
            other => panic!("expected budget failure, got {other:?}"),
        }
    }
}
