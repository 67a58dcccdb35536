//! Desk-scale operator quantization with `hbar = 1`.
//!
//! Constraint operators act on wavefunctions of the form `A * exp(i*phi)`
//! with symbolic complex amplitude `A` and real phase `phi`, which covers
//! plane waves and plain functions of the coordinates. Reduced Hamiltonians
//! of the form `g(p^2 + q^2)` are quantized by applying `g` to the spectrum
//! of the discretized oscillator `p^2 + q^2`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::expr::{eval_num_clamped, numerically_zero, Expr, ExprError, Symbol, DEFAULT_SEED};

/// Smallest grid accepted by the operator constructors.
pub const MIN_POINTS: usize = 16;

/// Tolerance for hermiticity of assembled operators.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Radicands this close below zero count as on the domain boundary.
pub const DOMAIN_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuantizeError {
    #[error("grid needs at least {MIN_POINTS} points and a positive finite extent")]
    BadGrid,
    #[error("constraint is not polynomial in `{0}`")]
    NotPolynomial(String),
    #[error("reduced Hamiltonian is not a function of p^2 + q^2: {0}")]
    Unrecognized(String),
    #[error(transparent)]
    Eval(#[from] ExprError),
}

/// Uniform lattice of `n` points on `[-extent, extent]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub n: usize,
    pub extent: f64,
}

impl Grid {
    pub fn new(n: usize, extent: f64) -> Result<Self, QuantizeError> {
        if n < MIN_POINTS || !(extent.is_finite() && extent > 0.0) {
            return Err(QuantizeError::BadGrid);
        }
        Ok(Grid { n, extent })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }
}

/// Discretization of `p^2 = -d^2/dx^2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum Stencil {
    /// Central second difference, error `O(h^2)`.
    ThreePoint,
    /// Sinc discrete variable representation, spectrally accurate for
    /// functions resolved by the grid.
    #[default]
    Sinc,
}

/// Dense operator on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridOperator {
    pub grid: Grid,
    pub matrix: DMatrix<f64>,
    pub hermitian: bool,
}

impl GridOperator {
    /// Largest entrywise deviation from the transpose.
    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// Eigenvalues in ascending order. Only defined for hermitian operators.
    pub fn eigenvalues(&self) -> Vec<f64> {
        assert!(self.hermitian, "eigenvalues of a non-hermitian operator");
        let mut v: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// `p^2` on the grid.
pub fn kinetic(grid: &Grid, stencil: Stencil) -> GridOperator {
    let n = grid.n;
    let h2 = grid.spacing().powi(2);
    let matrix = match stencil {
        Stencil::ThreePoint => DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 2.0 / h2,
            1 => -1.0 / h2,
            _ => 0.0,
        }),
        Stencil::Sinc => DMatrix::from_fn(n, n, |i, j| {
            let d = i.abs_diff(j);
            if d == 0 {
                std::f64::consts::PI.powi(2) / (3.0 * h2)
            } else {
                let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
                2.0 * sign / (h2 * (d * d) as f64)
            }
        }),
    };
    let op = GridOperator { grid: *grid, matrix, hermitian: true };
    debug_assert!(op.asymmetry() <= HERMITIAN_TOLERANCE);
    op
}

/// `p^2 + q^2` on the grid.
pub fn oscillator_operator(grid: &Grid, stencil: Stencil) -> GridOperator {
    let mut op = kinetic(grid, stencil);
    for (i, x) in grid.points().into_iter().enumerate() {
        op.matrix[(i, i)] += x * x;
    }
    op
}

/// Ascending eigenvalues of `p^2 + q^2`. The exact levels are `2n + 1`.
pub fn oscillator_spectrum(grid: &Grid, stencil: Stencil) -> Vec<f64> {
    oscillator_operator(grid, stencil).eigenvalues()
}

/// Complex combination `re + i*im` of real expressions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexExpr {
    pub re: Expr,
    pub im: Expr,
}

impl ComplexExpr {
    pub fn real(re: Expr) -> Self {
        ComplexExpr { re, im: Expr::zero() }
    }

    pub fn zero() -> Self {
        ComplexExpr::real(Expr::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero_const() && self.im.is_zero_const()
    }

    pub fn add(&self, other: &ComplexExpr) -> ComplexExpr {
        ComplexExpr {
            re: Expr::add([self.re.clone(), other.re.clone()]),
            im: Expr::add([self.im.clone(), other.im.clone()]),
        }
    }

    pub fn scale(&self, c: &Expr) -> ComplexExpr {
        ComplexExpr { re: Expr::mul([c.clone(), self.re.clone()]), im: Expr::mul([c.clone(), self.im.clone()]) }
    }
}

/// Wavefunction `amplitude * exp(i*phase)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wave {
    pub amplitude: ComplexExpr,
    pub phase: Expr,
}

impl Wave {
    /// `exp(i*phase)`.
    pub fn plane(phase: Expr) -> Self {
        Wave { amplitude: ComplexExpr::real(Expr::one()), phase }
    }

    /// A real function of the coordinates.
    pub fn real(amplitude: Expr) -> Self {
        Wave { amplitude: ComplexExpr::real(amplitude), phase: Expr::zero() }
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude.is_zero()
    }

    /// `-i d/dq` applied to the wave.
    pub fn momentum(&self, q: &Symbol) -> Wave {
        let dphi = self.phase.differentiate(q);
        let ComplexExpr { re, im } = &self.amplitude;
        // -i (A' + i A phi') = A phi' - i A'
        let amplitude = ComplexExpr {
            re: Expr::add([Expr::mul([re.clone(), dphi.clone()]), im.differentiate(q)]),
            im: Expr::add([Expr::mul([im.clone(), dphi]), re.differentiate(q).neg()]),
        };
        Wave { amplitude, phase: self.phase.clone() }
    }
}

// Monomials of `e` in the momenta: (exponents, coefficient free of momenta).
fn momentum_monomials(e: &Expr, momenta: &[Symbol]) -> Result<Vec<(Vec<usize>, Expr)>, QuantizeError> {
    let Some((p, rest)) = momenta.split_first() else {
        return Ok(vec![(Vec::new(), e.clone())]);
    };
    let coeffs = e.polynomial_coeffs(p).ok_or_else(|| QuantizeError::NotPolynomial(p.name().to_string()))?;
    let mut out = Vec::new();
    for (k, c) in coeffs.iter().enumerate() {
        if c.is_zero_const() {
            continue;
        }
        for (mut exps, coeff) in momentum_monomials(c, rest)? {
            exps.insert(0, k);
            out.push((exps, coeff));
        }
    }
    Ok(out)
}

/// Residual of the constraint operator acting on `psi`, with `p -> -i d/dq`
/// and all momenta ordered to the right of the coordinates. The wave is
/// annihilated exactly when the residual is zero.
pub fn check_annihilation(constraint: &Expr, psi: &Wave, pairs: &[(Symbol, Symbol)]) -> Result<Wave, QuantizeError> {
    let momenta: Vec<Symbol> = pairs.iter().map(|(_, p)| p.clone()).collect();
    let mut total = ComplexExpr::zero();
    for (exps, coeff) in momentum_monomials(constraint, &momenta)? {
        let mut w = psi.clone();
        for ((q, _), k) in pairs.iter().zip(&exps) {
            for _ in 0..*k {
                w = w.momentum(q);
            }
        }
        total = total.add(&w.amplitude.scale(&coeff));
    }
    Ok(Wave { amplitude: total, phase: psi.phase.clone() })
}

/// A reduced Hamiltonian recognized as `g(lambda)` with `lambda = p^2 + q^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialForm {
    pub lambda: Symbol,
    pub g: Expr,
}

/// Symbol used for `p^2 + q^2` in [`RadialForm::g`].
pub const LAMBDA: &str = "lambda";

/// Recognizes `h(q, p)` as a function of `p^2 + q^2` by checking that it is
/// invariant under phase-space rotations, `q dh/dp - p dh/dq = 0`, then reads
/// off `g(lambda) = h(sqrt(lambda), 0)`.
pub fn radial_form(h: &Expr, pair: &(Symbol, Symbol)) -> Result<RadialForm, QuantizeError> {
    let (q, p) = pair;
    let unrecognized = || QuantizeError::Unrecognized(h.to_string());
    if !h.contains(q) && !h.contains(p) {
        return Err(unrecognized());
    }
    let rotation = Expr::add([
        Expr::mul([Expr::symbol(q), h.differentiate(p)]),
        Expr::mul([Expr::symbol(p), h.differentiate(q)]).neg(),
    ]);
    if !matches!(numerically_zero(&rotation, &[], DEFAULT_SEED), Ok(true)) {
        return Err(unrecognized());
    }
    let lambda = Symbol::new(LAMBDA);
    let g = h
        .substitute_one(p, &Expr::zero())
        .substitute_one(q, &Expr::sqrt(Expr::symbol(&lambda)));
    if g.contains(q) || g.contains(p) {
        return Err(unrecognized());
    }
    Ok(RadialForm { lambda, g })
}

/// One oscillator level and its image under `g`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level {
    pub n: usize,
    pub lambda: f64,
    /// `None` outside the domain of `g`.
    pub g: Option<f64>,
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub g: Expr,
    pub levels: Vec<Level>,
}

impl Spectrum {
    pub fn admissible(&self) -> impl Iterator<Item = &Level> {
        self.levels.iter().filter(|l| l.admissible)
    }

    pub fn count(&self) -> usize {
        self.admissible().count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,lambda_n,g_lambda_n,admissible\n");
        for l in &self.levels {
            let g = l.g.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", l.n, l.lambda, g, l.admissible);
        }
        out
    }
}

/// Functional-calculus spectrum of a reduced Hamiltonian `h(q, p)`.
///
/// Levels are the oscillator eigenvalues resolved by the grid (`lambda` not
/// beyond `extent^2`); a level is admissible when it lies in the natural
/// domain of `g`, i.e. `g(lambda)` is real.
pub fn reduced_spectrum(
    h: &Expr,
    pair: &(Symbol, Symbol),
    constants: &BTreeMap<Symbol, f64>,
    grid: &Grid,
    stencil: Stencil,
) -> Result<Spectrum, QuantizeError> {
    let form = radial_form(h, pair)?;
    if let Some(s) = form.g.symbols().into_iter().find(|s| *s != form.lambda && !constants.contains_key(s)) {
        return Err(QuantizeError::Eval(ExprError::Unbound(s.name().to_string())));
    }
    let mut point = constants.clone();
    let mut levels = Vec::new();
    for (n, lambda) in oscillator_spectrum(grid, stencil).into_iter().enumerate() {
        if lambda > grid.extent * grid.extent {
            break;
        }
        point.insert(form.lambda.clone(), lambda);
        let g = match eval_num_clamped(&form.g, &point, DOMAIN_TOLERANCE) {
            Ok(v) if v.is_finite() => Some(v),
            Ok(_) | Err(ExprError::Domain(_)) => None,
            Err(e) => return Err(e.into()),
        };
        levels.push(Level { n, lambda, g, admissible: g.is_some() });
    }
    Ok(Spectrum { g: form.g, levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_free;

    fn pair() -> (Symbol, Symbol) {
        (Symbol::new("q1"), Symbol::new("p1"))
    }

    #[test]
    fn grid_geometry() {
        let g = Grid::new(17, 8.0).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.point(0), -8.0);
        assert_eq!(g.point(16), 8.0);
        assert!(Grid::new(15, 8.0).is_err());
        assert!(Grid::new(16, 0.0).is_err());
    }

    #[test]
    fn operators_are_symmetric() {
        let g = Grid::new(64, 5.0).unwrap();
        for s in [Stencil::ThreePoint, Stencil::Sinc] {
            assert!(oscillator_operator(&g, s).asymmetry() <= HERMITIAN_TOLERANCE);
        }
    }

    #[test]
    fn momentum_on_plane_wave() {
        let psi = Wave::plane(parse_free("k*q1").unwrap());
        let w = psi.momentum(&Symbol::new("q1"));
        assert_eq!(w.amplitude.re, Expr::sym("k"));
        assert!(w.amplitude.im.is_zero_const());
    }

    #[test]
    fn momentum_on_real_function() {
        let w = Wave::real(parse_free("q1^2").unwrap()).momentum(&Symbol::new("q1"));
        assert!(w.amplitude.re.is_zero_const());
        assert_eq!(w.amplitude.im, parse_free("-2*q1").unwrap());
    }

    #[test]
    fn non_polynomial_constraint_is_rejected() {
        let c = parse_free("(1 + p1^2)^(1/2)").unwrap();
        let err = check_annihilation(&c, &Wave::real(Expr::one()), &[pair()]).unwrap_err();
        assert_eq!(err, QuantizeError::NotPolynomial("p1".into()));
    }

    #[test]
    fn radial_form_of_disc() {
        let h = parse_free("-2/3*(R^2 - p1^2 - q1^2)^(3/2)").unwrap();
        let f = radial_form(&h, &pair()).unwrap();
        assert_eq!(f.g, parse_free("-2/3*(R^2 - lambda)^(3/2)").unwrap());
        assert!(radial_form(&parse_free("q1*p1").unwrap(), &pair()).is_err());
        assert!(radial_form(&parse_free("R^2").unwrap(), &pair()).is_err());
    }

    #[test]
    fn csv_header() {
        let s = Spectrum { g: Expr::zero(), levels: vec![Level { n: 0, lambda: 1.0, g: None, admissible: false }] };
        assert_eq!(s.to_csv(), "n,lambda_n,g_lambda_n,admissible\n0,1,,false\n");
    }
}
