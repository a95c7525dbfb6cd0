//! Space-time block systems for implicit Euler (parabolic) and implicit
//! midpoint (wave) time stepping.
//!
//! Every scheme is a one-step recurrence `a Uʲ = b Uʲ⁻¹ + rʲ`, j = 1..N_T.
//! Stacking all steps gives the block lower bidiagonal system
//! `𝓛(a, b) U = R`, where the first block of `R` also carries `b U⁰`.

use crate::error::{Error, Result};
use crate::linalg::{block_bidiagonal, factorize, SparseMatrix};
use crate::scalar::Real;
use serde::Serialize;
use std::ops::Range;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeLayout {
    ParabolicCanonical,
    ParabolicHomogenized,
    WaveCanonical,
    WaveHomogenized,
}

impl TimeLayout {
    pub const ALL: [TimeLayout; 4] = [
        TimeLayout::ParabolicCanonical,
        TimeLayout::ParabolicHomogenized,
        TimeLayout::WaveCanonical,
        TimeLayout::WaveHomogenized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TimeLayout::ParabolicCanonical => "parabolic_canonical",
            TimeLayout::ParabolicHomogenized => "parabolic_homogenized",
            TimeLayout::WaveCanonical => "wave_canonical",
            TimeLayout::WaveHomogenized => "wave_homogenized",
        }
    }

    pub fn is_wave(self) -> bool {
        matches!(self, TimeLayout::WaveCanonical | TimeLayout::WaveHomogenized)
    }
}

/// Load vector at a given time.
pub type Forcing<'a, T> = &'a dyn Fn(f64) -> Vec<T>;

/// Global space-time system 𝓛(a, b) U = R together with the initial state.
#[derive(Clone, Debug)]
pub struct BlockTimeSystem<T> {
    pub block_a: SparseMatrix<T>,
    pub block_b: SparseMatrix<T>,
    pub n_steps: usize,
    pub dt: f64,
    /// Stacked right-hand side, `n_steps` blocks; the first includes `b U⁰`.
    pub rhs: Vec<T>,
    pub initial: Vec<T>,
    pub layout: TimeLayout,
    /// Where the macroscopic solution u (or u₀) sits inside one state.
    pub u_range: Range<usize>,
    /// Velocity block for the wave layouts.
    pub v_range: Option<Range<usize>>,
    /// Sizes of a partition in which `block_a` is block lower triangular.
    pub partition: Vec<usize>,
}

fn check_dt(dt: f64, n_steps: usize) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    if n_steps == 0 {
        return Err(Error::invalid("need at least one time step"));
    }
    Ok(())
}

fn check_square(m: &SparseMatrix<impl Real>, a: &SparseMatrix<impl Real>) -> Result<()> {
    if !m.is_square() || !a.is_square() {
        return Err(Error::invalid("mass and stiffness matrices must be square"));
    }
    Ok(())
}

fn check_len(what: &'static str, v: usize, want: usize) -> Result<()> {
    if v != want {
        return Err(Error::DimensionMismatch { what, left: v, right: want });
    }
    Ok(())
}

fn axpy<T: Real>(y: &mut [T], alpha: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

impl<T: Real> BlockTimeSystem<T> {
    fn finish(
        block_a: SparseMatrix<T>,
        block_b: SparseMatrix<T>,
        n_steps: usize,
        dt: f64,
        mut rhs: Vec<T>,
        initial: Vec<T>,
        layout: TimeLayout,
        u_range: Range<usize>,
        v_range: Option<Range<usize>>,
        partition: Vec<usize>,
    ) -> Self {
        let bu = block_b.matvec(&initial);
        axpy(&mut rhs[..bu.len()], T::one(), &bu);
        BlockTimeSystem { block_a, block_b, n_steps, dt, rhs, initial, layout, u_range, v_range, partition }
    }

    /// Implicit Euler for M u' + A u = F: a = M + Δt A, b = M, rʲ = Δt F(tⱼ).
    pub fn parabolic_canonical(
        m: &SparseMatrix<T>,
        a: &SparseMatrix<T>,
        dt: f64,
        n_steps: usize,
        forcing: Forcing<'_, T>,
        u0: &[T],
    ) -> Result<Self> {
        check_dt(dt, n_steps)?;
        check_square(m, a)?;
        let n = m.n_rows();
        check_len("initial state", u0.len(), n)?;
        let block_a = m.lin_comb(T::one(), a, T::c(dt))?;
        let mut rhs = Vec::with_capacity(n * n_steps);
        for j in 1..=n_steps {
            let f = forcing(j as f64 * dt);
            check_len("load vector", f.len(), n)?;
            rhs.extend(f.into_iter().map(|v| v * T::c(dt)));
        }
        Ok(Self::finish(block_a, m.clone(), n_steps, dt, rhs, u0.to_vec(), TimeLayout::ParabolicCanonical, 0..n, None, vec![n]))
    }

    /// Implicit Euler for the lifted system with mass diag(0, …, 0, M): the
    /// corrector rows become the algebraic constraint of the cell problems.
    /// The unknowns of `a_tilde` are ordered [uₙ; …; u₁; u₀].
    pub fn parabolic_homogenized(
        m: &SparseMatrix<T>,
        a_tilde: &SparseMatrix<T>,
        dt: f64,
        n_steps: usize,
        forcing: Forcing<'_, T>,
        u0: &[T],
    ) -> Result<Self> {
        check_dt(dt, n_steps)?;
        check_square(m, a_tilde)?;
        let n = m.n_rows();
        let total = a_tilde.n_rows();
        if total <= n {
            return Err(Error::invalid("lifted matrix must be larger than the mass matrix"));
        }
        check_len("initial state", u0.len(), n)?;
        let c = total - n;
        let m_tilde = SparseMatrix::from_blocks(&[c, n], &[c, n], &[(1, 1, m)])?;
        let block_a = m_tilde.lin_comb(T::one(), a_tilde, T::c(dt))?;
        let mut rhs = vec![T::zero(); total * n_steps];
        for j in 1..=n_steps {
            let f = forcing(j as f64 * dt);
            check_len("load vector", f.len(), n)?;
            let base = (j - 1) * total + c;
            for (i, v) in f.into_iter().enumerate() {
                rhs[base + i] = v * T::c(dt);
            }
        }
        let mut initial = vec![T::zero(); total];
        initial[c..].copy_from_slice(u0);
        Ok(Self::finish(block_a, m_tilde, n_steps, dt, rhs, initial, TimeLayout::ParabolicHomogenized, c..total, None, vec![total]))
    }

    /// Implicit midpoint for M u'' + A u = F written for (u, v = u'):
    /// a = [[M + Δt²/4 A, 0], [Δt/2 A, M]], b = [[M − Δt²/4 A, Δt M], [−Δt/2 A, M]],
    /// rʲ = (Δt²/2 F, Δt F) at t = (j − ½)Δt.
    pub fn wave_canonical(
        m: &SparseMatrix<T>,
        a: &SparseMatrix<T>,
        dt: f64,
        n_steps: usize,
        forcing: Forcing<'_, T>,
        u0: &[T],
        v0: &[T],
    ) -> Result<Self> {
        check_dt(dt, n_steps)?;
        check_square(m, a)?;
        let n = m.n_rows();
        check_len("initial displacement", u0.len(), n)?;
        check_len("initial velocity", v0.len(), n)?;
        let q = T::c(dt * dt / 4.0);
        let hdt = T::c(dt / 2.0);
        let a11 = m.lin_comb(T::one(), a, q)?;
        let a21 = a.scale(hdt);
        let b11 = m.lin_comb(T::one(), a, -q)?;
        let b12 = m.scale(T::c(dt));
        let b21 = a.scale(-hdt);
        let s = [n, n];
        let block_a = SparseMatrix::from_blocks(&s, &s, &[(0, 0, &a11), (1, 0, &a21), (1, 1, m)])?;
        let block_b = SparseMatrix::from_blocks(&s, &s, &[(0, 0, &b11), (0, 1, &b12), (1, 0, &b21), (1, 1, m)])?;
        let mut rhs = Vec::with_capacity(2 * n * n_steps);
        for j in 1..=n_steps {
            let f = forcing((j as f64 - 0.5) * dt);
            check_len("load vector", f.len(), n)?;
            rhs.extend(f.iter().map(|&v| v * T::c(dt * dt / 2.0)));
            rhs.extend(f.iter().map(|&v| v * T::c(dt)));
        }
        let mut initial = u0.to_vec();
        initial.extend_from_slice(v0);
        Ok(Self::finish(block_a, block_b, n_steps, dt, rhs, initial, TimeLayout::WaveCanonical, 0..n, Some(n..2 * n), vec![n, n]))
    }

    /// Implicit midpoint for the lifted wave system with state
    /// [u_c; u₀; v₀], u_c the stacked correctors:
    /// a = [[Δt²/4 Ã₁₁, Δt²/4 Ã₁₂, 0], [Δt²/4 Ã₂₁, M + Δt²/4 Ã₂₂, 0], [Δt²/4 Ã₂₁, Δt²/4 Ã₂₂, Δt/2 M]],
    /// b = [[0, 0, 0], [−Δt²/4 Ã₂₁, M − Δt²/4 Ã₂₂, Δt M], [−Δt²/4 Ã₂₁, −Δt²/4 Ã₂₂, Δt/2 M]],
    /// rʲ = Δt²/2 (0, F, F). The initial correctors solve the constraint row.
    pub fn wave_homogenized(
        m: &SparseMatrix<T>,
        a_tilde: &SparseMatrix<T>,
        dt: f64,
        n_steps: usize,
        forcing: Forcing<'_, T>,
        u0: &[T],
        v0: &[T],
    ) -> Result<Self> {
        check_dt(dt, n_steps)?;
        check_square(m, a_tilde)?;
        let n = m.n_rows();
        let total = a_tilde.n_rows();
        if total <= n {
            return Err(Error::invalid("lifted matrix must be larger than the mass matrix"));
        }
        check_len("initial displacement", u0.len(), n)?;
        check_len("initial velocity", v0.len(), n)?;
        let c = total - n;
        let q = T::c(dt * dt / 4.0);
        let hdt = T::c(dt / 2.0);
        let a11 = a_tilde.submatrix(0..c, 0..c);
        let a12 = a_tilde.submatrix(0..c, c..total);
        let a21 = a_tilde.submatrix(c..total, 0..c);
        let a22 = a_tilde.submatrix(c..total, c..total);
        let (qa11, qa12, qa21, qa22) = (a11.scale(q), a12.scale(q), a21.scale(q), a22.scale(q));
        let m_plus = m.lin_comb(T::one(), &a22, q)?;
        let m_minus = m.lin_comb(T::one(), &a22, -q)?;
        let mh = m.scale(hdt);
        let mdt = m.scale(T::c(dt));
        let (nqa21, nqa22) = (qa21.scale(-T::one()), qa22.scale(-T::one()));
        let s = [c, n, n];
        let block_a = SparseMatrix::from_blocks(
            &s,
            &s,
            &[(0, 0, &qa11), (0, 1, &qa12), (1, 0, &qa21), (1, 1, &m_plus), (2, 0, &qa21), (2, 1, &qa22), (2, 2, &mh)],
        )?;
        let block_b = SparseMatrix::from_blocks(
            &s,
            &s,
            &[(1, 0, &nqa21), (1, 1, &m_minus), (1, 2, &mdt), (2, 0, &nqa21), (2, 1, &nqa22), (2, 2, &mh)],
        )?;
        let w = c + 2 * n;
        let mut rhs = vec![T::zero(); w * n_steps];
        for j in 1..=n_steps {
            let f = forcing((j as f64 - 0.5) * dt);
            check_len("load vector", f.len(), n)?;
            let base = (j - 1) * w;
            for (i, &v) in f.iter().enumerate() {
                rhs[base + c + i] = v * T::c(dt * dt / 2.0);
                rhs[base + c + n + i] = v * T::c(dt * dt / 2.0);
            }
        }
        // consistent correctors: Ã₁₁ u_c = −Ã₁₂ u₀
        let mut r = a12.matvec(u0);
        r.iter_mut().for_each(|v| *v = -*v);
        let uc = factorize(&a11)?.solve(&r);
        let mut initial = uc;
        initial.extend_from_slice(u0);
        initial.extend_from_slice(v0);
        Ok(Self::finish(
            block_a,
            block_b,
            n_steps,
            dt,
            rhs,
            initial,
            TimeLayout::WaveHomogenized,
            c..c + n,
            Some(c + n..w),
            vec![c + n, n],
        ))
    }

    pub fn block_size(&self) -> usize {
        self.block_a.n_rows()
    }

    /// Final time N_T·Δt.
    pub fn final_time(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// The global matrix 𝓛(a, b).
    pub fn global_matrix(&self) -> Result<SparseMatrix<T>> {
        block_bidiagonal(&self.block_a, &self.block_b, self.n_steps)
    }

    /// Solves the global system in one factorization; returns states 0..=N_T.
    pub fn solve_global(&self) -> Result<Vec<Vec<T>>> {
        let l = self.global_matrix()?;
        let u = factorize(&l)?.solve(&self.rhs);
        let m = self.block_size();
        let mut out = vec![self.initial.clone()];
        out.extend(u.chunks(m).map(|c| c.to_vec()));
        Ok(out)
    }

    /// Forward substitution through 𝓛: per step, block forward
    /// substitution over the diagonal sub-blocks of `a`, each factored once.
    /// Returns states 0..=N_T.
    pub fn march_reference(&self) -> Result<Vec<Vec<T>>> {
        let m = self.block_size();
        let mut starts = vec![0usize];
        for &p in &self.partition {
            starts.push(starts.last().unwrap() + p);
        }
        let mut factors = Vec::with_capacity(self.partition.len());
        let mut lower = Vec::with_capacity(self.partition.len());
        for w in starts.windows(2) {
            let diag = self.block_a.submatrix(w[0]..w[1], w[0]..w[1]);
            factors.push(factorize(&diag).map_err(|e| Error::Step { step: 1, source: Box::new(e) })?);
            lower.push(self.block_a.submatrix(w[0]..w[1], 0..w[0]));
        }
        let mut out = Vec::with_capacity(self.n_steps + 1);
        out.push(self.initial.clone());
        for j in 1..=self.n_steps {
            let mut r = self.rhs[(j - 1) * m..j * m].to_vec();
            if j > 1 {
                let bu = self.block_b.matvec(&out[j - 1]);
                axpy(&mut r, T::one(), &bu);
            }
            let mut u = vec![T::zero(); m];
            for (p, w) in starts.windows(2).enumerate() {
                let mut rp = r[w[0]..w[1]].to_vec();
                if w[0] > 0 {
                    let c = lower[p].matvec(&u[..w[0]]);
                    axpy(&mut rp, -T::one(), &c);
                }
                u[w[0]..w[1]].copy_from_slice(&factors[p].solve(&rp));
            }
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::Step { step: j, source: Box::new(Error::invalid("non-finite state")) });
            }
            out.push(u);
        }
        Ok(out)
    }

    /// Macroscopic part u (or u₀) of a state.
    pub fn u_of<'a>(&self, state: &'a [T]) -> &'a [T] {
        &state[self.u_range.clone()]
    }
}

/// Row layout of [`write_trajectory_csv`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrajectoryLayout {
    /// One (step, time, dof, value) row per entry.
    Long,
    /// One row per step: step, time, then every entry.
    Wide,
}

/// Writes states 0..=N_T with step size `dt` as CSV.
pub fn write_trajectory_csv<T: Real, W: std::io::Write>(
    states: &[Vec<T>],
    dt: f64,
    layout: TrajectoryLayout,
    w: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let fmt = |v: f64| format!("{v:.10e}");
    match layout {
        TrajectoryLayout::Long => {
            out.write_record(["step", "time", "dof", "value"])?;
            for (j, s) in states.iter().enumerate() {
                for (i, v) in s.iter().enumerate() {
                    out.write_record([j.to_string(), fmt(j as f64 * dt), i.to_string(), fmt(v.as_f64())])?;
                }
            }
        }
        TrajectoryLayout::Wide => {
            let n = states.first().map_or(0, Vec::len);
            let mut header = vec!["step".to_string(), "time".to_string()];
            header.extend((0..n).map(|i| format!("u{i}")));
            out.write_record(&header)?;
            for (j, s) in states.iter().enumerate() {
                check_len("trajectory state", s.len(), n)?;
                let mut row = vec![j.to_string(), fmt(j as f64 * dt)];
                row.extend(s.iter().map(|v| fmt(v.as_f64())));
                out.write_record(&row)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Discrete wave energy ½ vᵀMv + ½ uᵀAu.
pub fn wave_energy<T: Real>(m: &SparseMatrix<T>, a: &SparseMatrix<T>, u: &[T], v: &[T]) -> f64 {
    let dot = |x: &[T], y: &[T]| x.iter().zip(y).map(|(p, q)| p.as_f64() * q.as_f64()).sum::<f64>();
    0.5 * dot(v, &m.matvec(v)) + 0.5 * dot(u, &a.matvec(u))
}
