//! Exact finite-dimensional Grassmann algebra.
//!
//! Sparse anticommuting polynomials over up to [`MAX_GENERATORS`] generators,
//! with products, exponentials of nilpotent elements, Berezin integration,
//! Pfaffians and truncated (connected) expectations. This module is the
//! brute-force oracle against which every fermionic formula in the rest of
//! the crate is validated, so everything here is exact up to f64 rounding.
//!
//! Monomials are stored as 64-bit masks; a stored coefficient always refers
//! to the generators of the mask written in ascending index order.

use num_complex::Complex64;
use std::collections::BTreeMap;
use thiserror::Error;

/// Hard cap on the generator count (monomials are u64 bitmasks; anything
/// larger is far beyond desk scale anyway).
pub const MAX_GENERATORS: usize = 40;

/// Default absolute threshold below which coefficients are dropped.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-15;

#[derive(Debug, Error, PartialEq)]
pub enum GrassmannError {
    #[error("generator count {0} exceeds the supported maximum {MAX_GENERATORS}")]
    TooManyGenerators(usize),
    #[error("operands declare different generator counts ({0} vs {1})")]
    GeneratorMismatch(usize, usize),
    #[error("exponential requires a zero constant term (got |c0| = {0:.3e})")]
    NonzeroConstantTerm(f64),
    #[error("integration order is not a permutation of the generator set")]
    BadIntegrationOrder,
    #[error("matrix dimension {0} is odd; Pfaffians need even dimension")]
    OddDimension(usize),
    #[error("matrix is not antisymmetric within tolerance (defect {0:.3e})")]
    NotAntisymmetric(f64),
    #[error("truncated expectation of an empty list")]
    EmptyExpectation,
    #[error("operand is not a plain monomial")]
    NotAMonomial,
    #[error("action contains a term of odd degree; only even actions factorize")]
    OddActionTerm,
}

/// Coefficient ring for Grassmann polynomials. `Complex64` is the everyday
/// instance; [`MultilinearPoly`] is used when source fields have to be
/// carried through a computation exactly to multilinear order.
pub trait CoeffRing: Clone {
    fn zero() -> Self;
    fn one() -> Self;
    fn add_assign(&mut self, rhs: &Self);
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale(&self, s: f64) -> Self;
    /// Magnitude used for pruning.
    fn norm(&self) -> f64;
}

impl CoeffRing for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn add_assign(&mut self, rhs: &Self) {
        *self += rhs;
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn scale(&self, s: f64) -> Self {
        self * s
    }
    fn norm(&self) -> f64 {
        self.norm()
    }
}

/// Polynomial in a handful of commuting source variables, truncated to
/// multilinear order (every variable squared is dropped). Subsets of
/// variables index the 2^n coefficients. This is exactly the ring needed to
/// read off mixed first derivatives of generating functionals.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilinearPoly {
    pub nvars: usize,
    pub coeffs: Vec<Complex64>,
}

impl MultilinearPoly {
    pub fn constant(nvars: usize, c: Complex64) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 1 << nvars];
        coeffs[0] = c;
        MultilinearPoly { nvars, coeffs }
    }

    /// The monomial `c * x_i`.
    pub fn linear(nvars: usize, var: usize, c: Complex64) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 1 << nvars];
        coeffs[1 << var] = c;
        MultilinearPoly { nvars, coeffs }
    }

    pub fn coeff(&self, subset: usize) -> Complex64 {
        self.coeffs[subset]
    }
}

impl CoeffRing for MultilinearPoly {
    fn zero() -> Self {
        MultilinearPoly::constant(0, Complex64::new(0.0, 0.0))
    }
    fn one() -> Self {
        MultilinearPoly::constant(0, Complex64::new(1.0, 0.0))
    }
    fn add_assign(&mut self, rhs: &Self) {
        if self.nvars < rhs.nvars {
            let mut grown = MultilinearPoly::constant(rhs.nvars, Complex64::new(0.0, 0.0));
            for (s, c) in self.coeffs.iter().enumerate() {
                grown.coeffs[s] = *c;
            }
            *self = grown;
        }
        for (s, c) in rhs.coeffs.iter().enumerate() {
            self.coeffs[s] += c;
        }
    }
    fn mul(&self, rhs: &Self) -> Self {
        let nvars = self.nvars.max(rhs.nvars);
        let mut out = MultilinearPoly::constant(nvars, Complex64::new(0.0, 0.0));
        for (sa, ca) in self.coeffs.iter().enumerate() {
            if ca.norm() == 0.0 {
                continue;
            }
            for (sb, cb) in rhs.coeffs.iter().enumerate() {
                if sa & sb != 0 {
                    continue; // x_i^2 truncated away
                }
                out.coeffs[sa | sb] += ca * cb;
            }
        }
        out
    }
    fn neg(&self) -> Self {
        MultilinearPoly {
            nvars: self.nvars,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
    fn scale(&self, s: f64) -> Self {
        MultilinearPoly {
            nvars: self.nvars,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }
    fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }
}

/// Sign picked up when commuting the monomial `b` through `a` so that the
/// concatenation lands in ascending order; assumes `a & b == 0`.
fn reorder_sign(a: u64, b: u64) -> f64 {
    let mut crossings = 0u32;
    let mut bb = b;
    while bb != 0 {
        let j = bb.trailing_zeros();
        // generators of `a` with index above j must hop over theta_j
        crossings += (a >> (j + 1)).count_ones();
        bb &= bb - 1;
    }
    if crossings % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sparse Grassmann polynomial with coefficients in `C`.
#[derive(Debug, Clone)]
pub struct GrassmannPolynomial<C: CoeffRing = Complex64> {
    pub generator_count: usize,
    pub prune_threshold: f64,
    terms: BTreeMap<u64, C>,
}

impl<C: CoeffRing> GrassmannPolynomial<C> {
    pub fn zero(generator_count: usize) -> Result<Self, GrassmannError> {
        if generator_count > MAX_GENERATORS {
            return Err(GrassmannError::TooManyGenerators(generator_count));
        }
        Ok(GrassmannPolynomial {
            generator_count,
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
            terms: BTreeMap::new(),
        })
    }

    pub fn constant(generator_count: usize, c: C) -> Result<Self, GrassmannError> {
        let mut p = Self::zero(generator_count)?;
        p.add_term(0, c);
        Ok(p)
    }

    /// Single generator theta_i.
    pub fn generator(generator_count: usize, i: usize) -> Result<Self, GrassmannError> {
        let mut p = Self::zero(generator_count)?;
        assert!(i < generator_count);
        p.add_term(1u64 << i, C::one());
        Ok(p)
    }

    /// `c * theta_{i1} theta_{i2} ...` with the listed generators in the
    /// listed order (signs for reordering to canonical form are applied).
    pub fn monomial(
        generator_count: usize,
        gens: &[usize],
        c: C,
    ) -> Result<Self, GrassmannError> {
        let mut p = Self::zero(generator_count)?;
        let mut mask = 0u64;
        let mut sign = 1.0;
        for &g in gens {
            assert!(g < generator_count);
            let bit = 1u64 << g;
            if mask & bit != 0 {
                return Ok(p); // repeated generator annihilates the term
            }
            // appending theta_g to an ascending word: hop over entries above g
            sign *= reorder_sign(mask, bit);
            mask |= bit;
        }
        p.add_term(mask, c.scale(sign));
        Ok(p)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&u64, &C)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, mask: u64) -> C {
        self.terms.get(&mask).cloned().unwrap_or_else(C::zero)
    }

    pub fn add_term(&mut self, mask: u64, c: C) {
        debug_assert!(mask >> self.generator_count == 0);
        let entry = self.terms.entry(mask).or_insert_with(C::zero);
        entry.add_assign(&c);
        if entry.norm() <= self.prune_threshold {
            self.terms.remove(&mask);
        }
    }

    pub fn add_assign(&mut self, rhs: &Self) -> Result<(), GrassmannError> {
        if self.generator_count != rhs.generator_count {
            return Err(GrassmannError::GeneratorMismatch(
                self.generator_count,
                rhs.generator_count,
            ));
        }
        for (m, c) in rhs.terms.iter() {
            self.add_term(*m, c.clone());
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.scale(s);
        }
        out
    }

    /// Anticommutative product; repeated generators annihilate.
    pub fn multiply(&self, rhs: &Self) -> Result<Self, GrassmannError> {
        if self.generator_count != rhs.generator_count {
            return Err(GrassmannError::GeneratorMismatch(
                self.generator_count,
                rhs.generator_count,
            ));
        }
        let mut out = Self::zero(self.generator_count)?;
        out.prune_threshold = self.prune_threshold;
        for (ma, ca) in self.terms.iter() {
            for (mb, cb) in rhs.terms.iter() {
                if ma & mb != 0 {
                    continue;
                }
                let sign = reorder_sign(*ma, *mb);
                out.add_term(ma | mb, ca.mul(cb).scale(sign));
            }
        }
        Ok(out)
    }

    /// Multiply in place by `(1 + c * theta_mask)`; cheaper than a general
    /// product and the workhorse of the action evaluator below.
    fn multiply_binomial(&mut self, mask: u64, c: &C) {
        if mask == 0 {
            let mut extra: Vec<(u64, C)> = Vec::with_capacity(self.terms.len());
            for (m, cc) in self.terms.iter() {
                extra.push((*m, cc.mul(c)));
            }
            for (m, cc) in extra {
                self.add_term(m, cc);
            }
            return;
        }
        let mut extra: Vec<(u64, C)> = Vec::new();
        for (m, cc) in self.terms.iter() {
            if m & mask != 0 {
                continue;
            }
            let sign = reorder_sign(*m, mask);
            extra.push((m | mask, cc.mul(c).scale(sign)));
        }
        for (m, cc) in extra {
            self.add_term(m, cc);
        }
    }

    /// Berezin integration over a single generator: drops terms without it,
    /// strips it (with the sign of moving it to the front) from the rest.
    fn integrate_generator(&mut self, g: usize) {
        let bit = 1u64 << g;
        let old = std::mem::take(&mut self.terms);
        for (m, c) in old {
            if m & bit == 0 {
                continue;
            }
            let below = (m & (bit - 1)).count_ones();
            let sign = if below % 2 == 0 { 1.0 } else { -1.0 };
            let entry = self.terms.entry(m & !bit).or_insert_with(C::zero);
            entry.add_assign(&c.scale(sign));
            if entry.norm() <= self.prune_threshold {
                self.terms.remove(&(m & !bit));
            }
        }
    }

    /// Finite power series `sum_k p^k / k!`; requires a nilpotent argument,
    /// i.e. zero constant term. Terminates after at most
    /// `generator_count / 2 + 1` rounds.
    pub fn exponential(&self) -> Result<Self, GrassmannError> {
        let c0 = self.coeff(0).norm();
        if c0 > self.prune_threshold {
            return Err(GrassmannError::NonzeroConstantTerm(c0));
        }
        let mut result = Self::constant(self.generator_count, C::one())?;
        result.prune_threshold = self.prune_threshold;
        let mut power = Self::constant(self.generator_count, C::one())?;
        power.prune_threshold = self.prune_threshold;
        let mut factorial = 1.0f64;
        for k in 1..=(self.generator_count / 2 + 1) {
            power = power.multiply(self)?;
            if power.terms.is_empty() {
                break;
            }
            factorial *= k as f64;
            for (m, c) in power.terms.iter() {
                result.add_term(*m, c.scale(1.0 / factorial));
            }
        }
        Ok(result)
    }

    /// Logarithm of a polynomial with invertible constant term, via the
    /// terminating series for log(1 + u) with u nilpotent. Only provided for
    /// complex coefficients via [`log_complex`]; the generic ring has no
    /// inverse. (Kept on the generic type for symmetry of the API.)
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl GrassmannPolynomial<Complex64> {
    /// log(p) for p with nonzero constant term; exact (nilpotent series).
    pub fn logarithm(&self) -> Result<Self, GrassmannError> {
        let c0 = self.coeff(0);
        if c0.norm() <= self.prune_threshold {
            return Err(GrassmannError::NonzeroConstantTerm(c0.norm()));
        }
        // p = c0 (1 + u)
        let mut u = self.scaled(1.0);
        for c in u.terms.values_mut() {
            *c /= c0;
        }
        u.terms.remove(&0u64);
        let mut result = Self::constant(self.generator_count, c0.ln())?;
        result.prune_threshold = self.prune_threshold;
        let mut power = Self::constant(self.generator_count, Complex64::new(1.0, 0.0))?;
        power.prune_threshold = self.prune_threshold;
        for k in 1..=(self.generator_count / 2 + 1) {
            power = power.multiply(&u)?;
            if power.is_zero() {
                break;
            }
            let w = if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            for (m, c) in power.terms.iter() {
                result.add_term(*m, c * w);
            }
        }
        Ok(result)
    }
}

/// Berezin integral with an explicit measure order: the written measure is
/// `d theta_{order[0]} d theta_{order[1]} ...` and the rightmost factor
/// integrates first. `order` must be a permutation of all generators.
pub fn berezin_integrate<C: CoeffRing>(
    p: &GrassmannPolynomial<C>,
    order: &[usize],
) -> Result<C, GrassmannError> {
    let n = p.generator_count;
    if order.len() != n {
        return Err(GrassmannError::BadIntegrationOrder);
    }
    let mut seen = vec![false; n];
    for &g in order {
        if g >= n || seen[g] {
            return Err(GrassmannError::BadIntegrationOrder);
        }
        seen[g] = true;
    }
    let mut q = p.clone();
    for &g in order.iter().rev() {
        q.integrate_generator(g);
    }
    Ok(q.coeff(0))
}

/// An action term: an even-degree monomial `c * theta_mask`.
#[derive(Debug, Clone)]
pub struct ActionTerm<C: CoeffRing = Complex64> {
    pub mask: u64,
    pub coeff: C,
}

/// Computes `∫ prefactor · e^{Σ terms} dθ` over the given measure order
/// without ever materializing the full exponential: terms are multiplied in
/// as binomials `(1 + c θ_S)` right before the first of their generators is
/// integrated out. All action terms must be of even degree (so the
/// exponential factorizes) and every generator must appear in `order`.
///
/// With local actions and an elimination order that follows the lattice this
/// keeps the live polynomial on a small frontier, which is what makes the
/// 36-generator oracle evaluations feasible.
pub fn integrate_exp_action<C: CoeffRing>(
    prefactor: &GrassmannPolynomial<C>,
    action: &[ActionTerm<C>],
    order: &[usize],
) -> Result<C, GrassmannError> {
    let n = prefactor.generator_count;
    if order.len() != n {
        return Err(GrassmannError::BadIntegrationOrder);
    }
    let mut elim_step = vec![usize::MAX; n];
    // rightmost measure factor integrates first
    for (step, &g) in order.iter().rev().enumerate() {
        if g >= n || elim_step[g] != usize::MAX {
            return Err(GrassmannError::BadIntegrationOrder);
        }
        elim_step[g] = step;
    }
    // each action term must be multiplied in before its earliest generator goes
    let mut scheduled: Vec<Vec<&ActionTerm<C>>> = vec![Vec::new(); n];
    for t in action {
        if t.mask.count_ones() % 2 != 0 || t.mask == 0 {
            return Err(GrassmannError::OddActionTerm);
        }
        let mut first = usize::MAX;
        let mut m = t.mask;
        while m != 0 {
            let g = m.trailing_zeros() as usize;
            first = first.min(elim_step[g]);
            m &= m - 1;
        }
        scheduled[first].push(t);
    }
    let mut q = prefactor.clone();
    for (step, &g) in order.iter().rev().enumerate() {
        for t in &scheduled[step] {
            q.multiply_binomial(t.mask, &t.coeff);
        }
        q.integrate_generator(g);
    }
    Ok(q.coeff(0))
}

// ---------------------------------------------------------------------------
// Antisymmetric matrices and Pfaffians
// ---------------------------------------------------------------------------

/// Dense complex antisymmetric matrix.
#[derive(Debug, Clone)]
pub struct AntisymmetricMatrix {
    pub dimension: usize,
    data: Vec<Complex64>,
}

impl AntisymmetricMatrix {
    /// Validates antisymmetry to 1e-12 relative and a (numerically) zero
    /// diagonal; the stored matrix is the antisymmetrized input.
    pub fn new(dimension: usize, entries: Vec<Complex64>) -> Result<Self, GrassmannError> {
        assert_eq!(entries.len(), dimension * dimension);
        let scale = entries
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max)
            .max(1e-300);
        let mut defect = 0.0f64;
        for i in 0..dimension {
            defect = defect.max(entries[i * dimension + i].norm());
            for j in (i + 1)..dimension {
                defect = defect.max((entries[i * dimension + j] + entries[j * dimension + i]).norm());
            }
        }
        if defect / scale > 1e-12 {
            return Err(GrassmannError::NotAntisymmetric(defect / scale));
        }
        let mut data = entries;
        for i in 0..dimension {
            data[i * dimension + i] = Complex64::new(0.0, 0.0);
            for j in (i + 1)..dimension {
                let a = (data[i * dimension + j] - data[j * dimension + i]) * 0.5;
                data[i * dimension + j] = a;
                data[j * dimension + i] = -a;
            }
        }
        Ok(AntisymmetricMatrix { dimension, data })
    }

    /// Build from the strictly-upper entries `f(i, j)`, `i < j`.
    pub fn from_upper<F: FnMut(usize, usize) -> Complex64>(
        dimension: usize,
        mut f: F,
    ) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); dimension * dimension];
        for i in 0..dimension {
            for j in (i + 1)..dimension {
                let v = f(i, j);
                data[i * dimension + j] = v;
                data[j * dimension + i] = -v;
            }
        }
        AntisymmetricMatrix { dimension, data }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dimension + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.dimension + j] = v;
        self.data[j * self.dimension + i] = -v;
    }
}

/// Pfaffian by skew-symmetric (Parlett–Reid style) elimination with partial
/// pivoting. O(n^3); returns exactly 0 when a whole pivot column vanishes.
pub fn pfaffian(a: &AntisymmetricMatrix) -> Result<Complex64, GrassmannError> {
    let n = a.dimension;
    if n % 2 != 0 {
        return Err(GrassmannError::OddDimension(n));
    }
    if n == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let mut m = a.data.clone();
    let idx = |i: usize, j: usize| i * n + j;
    let mut pf = Complex64::new(1.0, 0.0);
    for k in (0..n - 1).step_by(2) {
        // pivot: largest |m[i][k]| for i > k
        let mut piv = k + 1;
        let mut best = m[idx(k + 1, k)].norm();
        for i in (k + 2)..n {
            let v = m[idx(i, k)].norm();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if piv != k + 1 {
            // simultaneous row and column swap flips the Pfaffian sign
            for j in 0..n {
                m.swap(idx(k + 1, j), idx(piv, j));
            }
            for i in 0..n {
                m.swap(idx(i, k + 1), idx(i, piv));
            }
            pf = -pf;
        }
        let pivot = m[idx(k + 1, k)];
        pf *= -pivot; // m[k][k+1] = -m[k+1][k]
        for i in (k + 2)..n {
            let factor = m[idx(i, k)] / pivot;
            if factor.norm() == 0.0 {
                continue;
            }
            for j in 0..n {
                let d = factor * m[idx(k + 1, j)];
                m[idx(i, j)] -= d;
            }
            for j in 0..n {
                let d = factor * m[idx(j, k + 1)];
                m[idx(j, i)] -= d;
            }
        }
    }
    Ok(pf)
}

/// Recursive cofactor expansion along the first row; exponential cost, kept
/// as an independent reference for small matrices.
pub fn pfaffian_cofactor(a: &AntisymmetricMatrix) -> Result<Complex64, GrassmannError> {
    let n = a.dimension;
    if n % 2 != 0 {
        return Err(GrassmannError::OddDimension(n));
    }
    fn rec(a: &AntisymmetricMatrix, rows: &[usize]) -> Complex64 {
        let n = rows.len();
        if n == 0 {
            return Complex64::new(1.0, 0.0);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let r0 = rows[0];
        for (jj, &rj) in rows.iter().enumerate().skip(1) {
            let sub: Vec<usize> = rows
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != 0 && i != jj)
                .map(|(_, &r)| r)
                .collect();
            let sign = if jj % 2 == 1 { 1.0 } else { -1.0 };
            acc += a.get(r0, rj) * sign * rec(a, &sub);
        }
        acc
    }
    let rows: Vec<usize> = (0..n).collect();
    Ok(rec(a, &rows))
}

/// Complex determinant via LU with partial pivoting; used only to check
/// (Pf A)^2 = det A through an independent factorization route.
pub fn determinant_lu(n: usize, entries: &[Complex64]) -> Complex64 {
    let mut m = entries.to_vec();
    let idx = |i: usize, j: usize| i * n + j;
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let mut piv = k;
        let mut best = m[idx(k, k)].norm();
        for i in (k + 1)..n {
            let v = m[idx(i, k)].norm();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if piv != k {
            for j in 0..n {
                m.swap(idx(k, j), idx(piv, j));
            }
            det = -det;
        }
        det *= m[idx(k, k)];
        for i in (k + 1)..n {
            let f = m[idx(i, k)] / m[idx(k, k)];
            for j in k..n {
                let d = f * m[idx(k, j)];
                m[idx(i, j)] -= d;
            }
        }
    }
    det
}

// ---------------------------------------------------------------------------
// Gaussian moments and truncated expectations
// ---------------------------------------------------------------------------

/// Gaussian (Wick) moment of an ordered generator sequence under a
/// covariance `g`: `E(θ_{s1} ... θ_{s2p}) = Pf(G)` with `G_{ab} = g(s_a, s_b)`
/// for `a < b`. Repeated generators give 0, odd length gives 0.
pub fn wick_moment<F: Fn(usize, usize) -> Complex64>(
    seq: &[usize],
    g: &F,
) -> Complex64 {
    let n = seq.len();
    if n % 2 != 0 {
        return Complex64::new(0.0, 0.0);
    }
    for (i, &a) in seq.iter().enumerate() {
        for &b in &seq[i + 1..] {
            if a == b {
                return Complex64::new(0.0, 0.0);
            }
        }
    }
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let m = AntisymmetricMatrix::from_upper(n, |i, j| g(seq[i], seq[j]));
    pfaffian(&m).expect("even dimension by construction")
}

/// Iterator over set partitions of {0, .., n-1} in restricted-growth form.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut assign = vec![0usize; n];
    fn rec(i: usize, nblocks: usize, assign: &mut Vec<usize>, out: &mut Vec<Vec<Vec<usize>>>) {
        let n = assign.len();
        if i == n {
            let mut blocks = vec![Vec::new(); nblocks];
            for (e, &b) in assign.iter().enumerate() {
                blocks[b].push(e);
            }
            out.push(blocks);
            return;
        }
        for b in 0..=nblocks {
            assign[i] = b;
            rec(i + 1, nblocks.max(b + 1), assign, out);
        }
    }
    if n == 0 {
        return vec![Vec::new()];
    }
    rec(0, 0, &mut assign, &mut out);
    out
}

/// A monomial operand for truncated expectations: an ordered generator list
/// with a scalar prefactor.
#[derive(Debug, Clone)]
pub struct MonomialOp {
    pub gens: Vec<usize>,
    pub coeff: Complex64,
}

impl MonomialOp {
    /// Extract from a single-term polynomial (ascending-order convention).
    pub fn from_polynomial(p: &GrassmannPolynomial<Complex64>) -> Result<Self, GrassmannError> {
        if p.num_terms() != 1 {
            return Err(GrassmannError::NotAMonomial);
        }
        let (&mask, &coeff) = p.terms().next().unwrap();
        let mut gens = Vec::new();
        for g in 0..p.generator_count {
            if mask >> g & 1 == 1 {
                gens.push(g);
            }
        }
        Ok(MonomialOp { gens, coeff })
    }
}

/// Truncated (connected) expectation E^T(X_1; ...; X_n) of even monomials
/// under a Gaussian with propagator `g(i, j) = E(θ_i θ_j)`, via the
/// moments-to-cumulants sum over set partitions. Odd total degree returns
/// an exact zero. Exact for even operands; this is the partition-cumulant
/// realization of the log-derivative definition.
pub fn truncated_expectation<F: Fn(usize, usize) -> Complex64>(
    ops: &[MonomialOp],
    g: &F,
) -> Result<Complex64, GrassmannError> {
    let n = ops.len();
    if n == 0 {
        return Err(GrassmannError::EmptyExpectation);
    }
    let total: usize = ops.iter().map(|m| m.gens.len()).sum();
    if total % 2 != 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for partition in set_partitions(n) {
        let nb = partition.len();
        // (-1)^{|P|-1} (|P|-1)!
        let mut weight = 1.0f64;
        for k in 1..nb {
            weight *= -(k as f64);
        }
        let mut prod = Complex64::new(weight, 0.0);
        for block in &partition {
            let mut seq = Vec::new();
            let mut coeff = Complex64::new(1.0, 0.0);
            for &i in block {
                seq.extend_from_slice(&ops[i].gens);
                coeff *= ops[i].coeff;
            }
            prod *= coeff * wick_moment(&seq, g);
            if prod.norm() == 0.0 {
                break;
            }
        }
        acc += prod;
    }
    Ok(acc)
}
