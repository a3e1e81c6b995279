//! Data model for N-component cubic derivative systems
//! `L_{m_j} u_j = F_j(u, u_x)`: the coefficient-tensor representation of the
//! nonlinearity, builders for the concrete two-component and single-equation
//! models, mass-resonance classification, and dealiased pseudospectral
//! evaluation of the cubic terms.
//!
//! Conjugated components are encoded by index offset: for an N-component
//! system, factor index `k <= N` selects `u_k` and `k > N` selects
//! `conj(u_{k-N})`, whose effective ("signed") mass is `-m_{k-N}`.

use num_complex::Complex64;
use num_rational::Rational64;

use crate::error::{CoreError, Result};
use crate::grid::{
    apply_derivative_bins, asc_to_bins, bins_to_asc, bins_to_field_inplace, field_to_bins_inplace,
    pad_bins, truncate_bins, Field, SpatialGrid, C64,
};
use crate::operators::Mass;

/// One cubic monomial `coeff * (d^l1 w_{k1})(d^l2 w_{k2})(d^l3 w_{k3})`
/// feeding component `target`, where `w_k` runs over the components followed
/// by their conjugates.
#[derive(Clone, Debug)]
pub struct CubicTerm {
    /// Component index `j` in `1..=N` receiving this term.
    pub target: usize,
    /// Three factors `(k, l)`: `k` in `1..=2N` (conjugates above `N`),
    /// derivative order `l` in `{0, 1}`.
    pub factors: [(usize, u8); 3],
    pub coeff: Complex64,
}

/// Which concrete model a spec was built from; `Custom` for parsed specs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    /// Two components coupled through `conj(u)^2 v_x` and `u^2 u_x`.
    GaugeCoupled,
    /// Two components coupled through `(v^3)_x` and `(u^3)_x`.
    DivergenceCoupled,
    /// Single gauge-invariant cubic equation, used by the validation mode.
    SingleCubic,
    Custom,
}

/// Regularity tier required by the covering theory: the two-component models
/// need `H^2 ∩ H^{1,1}` data, the general tensor form one order more.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegularityTier {
    H2W11,
    H3W21,
}

impl std::fmt::Display for RegularityTier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegularityTier::H2W11 => write!(f, "H2+H11"),
            RegularityTier::H3W21 => write!(f, "H3+H21"),
        }
    }
}

/// Masses plus the cubic coefficient tensor defining the nonlinearity.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    masses: Vec<Mass>,
    terms: Vec<CubicTerm>,
    kind: SystemKind,
    regularity: RegularityTier,
}

impl SystemSpec {
    pub fn new(masses: Vec<Mass>, terms: Vec<CubicTerm>) -> Result<Self> {
        Self::with_kind(masses, terms, SystemKind::Custom, RegularityTier::H3W21)
    }

    fn with_kind(
        masses: Vec<Mass>,
        terms: Vec<CubicTerm>,
        kind: SystemKind,
        regularity: RegularityTier,
    ) -> Result<Self> {
        if masses.is_empty() {
            return Err(CoreError::InvalidParameter(
                "a system needs at least one component".into(),
            ));
        }
        let n = masses.len();
        for (i, term) in terms.iter().enumerate() {
            if term.target == 0 || term.target > n {
                return Err(CoreError::InvalidParameter(format!(
                    "term {i}: target {} out of range 1..={n}",
                    term.target
                )));
            }
            for &(k, l) in &term.factors {
                if k == 0 || k > 2 * n {
                    return Err(CoreError::InvalidParameter(format!(
                        "term {i}: factor index {k} out of range 1..={}",
                        2 * n
                    )));
                }
                if l > 1 {
                    return Err(CoreError::InvalidParameter(format!(
                        "term {i}: derivative order {l} must be 0 or 1"
                    )));
                }
            }
            if !term.coeff.re.is_finite() || !term.coeff.im.is_finite() {
                return Err(CoreError::NonFinite {
                    context: "cubic coefficient",
                });
            }
        }
        Ok(Self {
            masses,
            terms,
            kind,
            regularity,
        })
    }

    pub fn n_components(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[Mass] {
        &self.masses
    }

    pub fn terms(&self) -> &[CubicTerm] {
        &self.terms
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn regularity(&self) -> RegularityTier {
        self.regularity
    }

    /// Signed mass of factor index `k`: `m_k` for a plain component,
    /// `-m_{k-N}` for a conjugated one.
    pub fn signed_mass(&self, k: usize) -> Mass {
        let n = self.masses.len();
        if k <= n {
            self.masses[k - 1]
        } else {
            self.masses[k - n - 1].negated()
        }
    }
}

/// Two components `(u, v)` with masses `(m, mu)` coupled through
/// `L_m u = kappa conj(u)^2 v_x`, `L_mu v = lambda u^2 u_x`.
pub fn build_nls2(m: Mass, mu: Mass, kappa: Complex64, lambda: Complex64) -> SystemSpec {
    SystemSpec::with_kind(
        vec![m, mu],
        vec![
            CubicTerm {
                target: 1,
                factors: [(3, 0), (3, 0), (2, 1)],
                coeff: kappa,
            },
            CubicTerm {
                target: 2,
                factors: [(1, 0), (1, 0), (1, 1)],
                coeff: lambda,
            },
        ],
        SystemKind::GaugeCoupled,
        RegularityTier::H2W11,
    )
    .expect("hard-wired indices are valid")
}

/// Two components `(u, v)` with masses `(m, mu)` coupled through
/// `L_m u = kappa (v^3)_x`, `L_mu v = lambda (u^3)_x`, expanded by the
/// product rule into `3 kappa v^2 v_x` and `3 lambda u^2 u_x`.
pub fn build_nls3(m: Mass, mu: Mass, kappa: Complex64, lambda: Complex64) -> SystemSpec {
    SystemSpec::with_kind(
        vec![m, mu],
        vec![
            CubicTerm {
                target: 1,
                factors: [(2, 0), (2, 0), (2, 1)],
                coeff: 3.0 * kappa,
            },
            CubicTerm {
                target: 2,
                factors: [(1, 0), (1, 0), (1, 1)],
                coeff: 3.0 * lambda,
            },
        ],
        SystemKind::DivergenceCoupled,
        RegularityTier::H2W11,
    )
    .expect("hard-wired indices are valid")
}

/// The single gauge-invariant cubic equation `L_1 u = |u|^2 u`. Violates the
/// derivative-free exclusion by construction and is used only by the
/// modified-scattering validation mode.
pub fn build_single_cubic() -> SystemSpec {
    SystemSpec::with_kind(
        vec![Mass::from_rational(1, 1).expect("one is a valid mass")],
        vec![CubicTerm {
            target: 1,
            factors: [(2, 0), (1, 0), (1, 0)],
            coeff: Complex64::new(1.0, 0.0),
        }],
        SystemKind::SingleCubic,
        RegularityTier::H2W11,
    )
    .expect("hard-wired indices are valid")
}

// ---------------------------------------------------------------------------
// Resonance classification
// ---------------------------------------------------------------------------

/// Sum of three signed masses, exact when all inputs carry rationals.
#[derive(Clone, Copy, Debug)]
pub struct MassSum {
    pub value: f64,
    pub exact: Option<Rational64>,
}

impl MassSum {
    fn of(a: Mass, b: Mass, c: Mass) -> MassSum {
        let exact = match (a.exact(), b.exact(), c.exact()) {
            (Some(x), Some(y), Some(z)) => Some(x + y + z),
            _ => None,
        };
        MassSum {
            value: a.value() + b.value() + c.value(),
            exact,
        }
    }

    fn scale(&self, masses: &[Mass]) -> f64 {
        masses
            .iter()
            .map(|m| m.value().abs())
            .fold(1.0_f64, f64::max)
    }

    pub fn is_zero(&self, masses: &[Mass]) -> bool {
        match self.exact {
            Some(r) => r == Rational64::new(0, 1),
            None => self.value.abs() <= 1e-12 * self.scale(masses),
        }
    }

    pub fn equals(&self, m: Mass, masses: &[Mass]) -> bool {
        match (self.exact, m.exact()) {
            (Some(r), Some(q)) => r == q,
            _ => (self.value - m.value()).abs() <= 1e-12 * self.scale(masses),
        }
    }
}

/// Per-term resonance record.
#[derive(Clone, Debug)]
pub struct TermReport {
    pub term_index: usize,
    pub target: usize,
    pub mass_sum: f64,
    pub mass_sum_exact: Option<Rational64>,
    /// Signed masses sum to zero.
    pub resonant_zero: bool,
    /// Signed masses sum to the target's own mass.
    pub resonant_self: bool,
    /// All three derivative orders vanish.
    pub derivative_free: bool,
    /// Oscillation frequency `(m_j^2 / 2)(1/m_j - 1/mass_sum)`, undefined
    /// when the mass sum vanishes, zero exactly on self-resonance.
    pub omega: Option<f64>,
    /// Whether the structural exclusions admit this term: no derivative-free
    /// interaction, and no interaction whose mass sum lies in `{0, m_j}`.
    pub admissible: bool,
}

/// Classification of a full spec: per-term records plus the overall verdict.
#[derive(Clone, Debug)]
pub struct ResonanceReport {
    pub terms: Vec<TermReport>,
    /// Every term passes both structural exclusions.
    pub covered: bool,
    pub regularity: RegularityTier,
}

/// Classify every cubic term of a spec by its mass arithmetic.
pub fn classify(spec: &SystemSpec) -> ResonanceReport {
    let masses = spec.masses();
    let terms = spec
        .terms()
        .iter()
        .enumerate()
        .map(|(i, term)| {
            let m_j = masses[term.target - 1];
            let sum = MassSum::of(
                spec.signed_mass(term.factors[0].0),
                spec.signed_mass(term.factors[1].0),
                spec.signed_mass(term.factors[2].0),
            );
            let resonant_zero = sum.is_zero(masses);
            let resonant_self = sum.equals(m_j, masses);
            let derivative_free = term.factors.iter().all(|&(_, l)| l == 0);
            let omega = if resonant_zero {
                None
            } else {
                Some(match (m_j.exact(), sum.exact) {
                    (Some(mr), Some(sr)) => {
                        let w = mr * (sr - mr) / (sr * 2);
                        *w.numer() as f64 / *w.denom() as f64
                    }
                    _ => m_j.value() * (sum.value - m_j.value()) / (2.0 * sum.value),
                })
            };
            let nonzero_coeff = term.coeff.norm() > 0.0;
            let admissible =
                !(nonzero_coeff && (derivative_free || resonant_zero || resonant_self));
            TermReport {
                term_index: i,
                target: term.target,
                mass_sum: sum.value,
                mass_sum_exact: sum.exact,
                resonant_zero,
                resonant_self,
                derivative_free,
                omega,
                admissible,
            }
        })
        .collect::<Vec<_>>();
    let covered = terms.iter().all(|t| t.admissible);
    ResonanceReport {
        terms,
        covered,
        regularity: spec.regularity(),
    }
}

// ---------------------------------------------------------------------------
// Solution state and nonlinearity evaluation
// ---------------------------------------------------------------------------

/// Time stamp plus one field per component.
#[derive(Clone, Debug)]
pub struct SolutionState {
    pub time: f64,
    pub fields: Vec<Field>,
}

impl SolutionState {
    pub fn new(time: f64, fields: Vec<Field>) -> Result<Self> {
        if fields.is_empty() {
            return Err(CoreError::InvalidParameter(
                "a state needs at least one component".into(),
            ));
        }
        let grid = fields[0].grid().clone();
        for f in &fields {
            if *f.grid() != grid {
                return Err(CoreError::GridMismatch);
            }
            if !f.is_finite() {
                return Err(CoreError::NonFinite {
                    context: "SolutionState",
                });
            }
        }
        if !time.is_finite() || time < 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "state time must be finite and nonnegative, got {time}"
            )));
        }
        Ok(Self { time, fields })
    }

    pub fn grid(&self) -> &SpatialGrid {
        self.fields[0].grid()
    }

    pub fn n_components(&self) -> usize {
        self.fields.len()
    }
}

struct LoweredFactor {
    /// Index into the distinct `(component, order)` cache.
    cache_slot: usize,
    conjugate: bool,
}

struct LoweredTerm {
    target: usize, // 0-based
    factors: [LoweredFactor; 3],
    coeff: C64,
}

/// Dealiased evaluator of the cubic tensor on a fixed grid. Reusable scratch
/// buffers make it cheap to call once per integrator stage.
pub struct NonlinearityEvaluator {
    grid: SpatialGrid,
    fine: SpatialGrid,
    n_components: usize,
    terms: Vec<LoweredTerm>,
    /// Distinct `(component, order)` pairs appearing across all factors.
    factor_keys: Vec<(usize, u8)>,
    fine_factors: Vec<Vec<C64>>,
    scratch: Vec<C64>,
}

impl NonlinearityEvaluator {
    pub fn new(spec: &SystemSpec, grid: &SpatialGrid) -> Self {
        let n = spec.n_components();
        let mut factor_keys: Vec<(usize, u8)> = Vec::new();
        let slot_of = |comp: usize, l: u8, keys: &mut Vec<(usize, u8)>| -> usize {
            if let Some(pos) = keys.iter().position(|&k| k == (comp, l)) {
                pos
            } else {
                keys.push((comp, l));
                keys.len() - 1
            }
        };
        let terms = spec
            .terms()
            .iter()
            .map(|term| {
                let factors = term.factors.map(|(k, l)| {
                    let conjugate = k > n;
                    let comp = if conjugate { k - n - 1 } else { k - 1 };
                    LoweredFactor {
                        cache_slot: slot_of(comp, l, &mut factor_keys),
                        conjugate,
                    }
                });
                LoweredTerm {
                    target: term.target - 1,
                    factors,
                    coeff: term.coeff,
                }
            })
            .collect();
        let fine = grid.refined(2);
        let n_fine = fine.num_points();
        let fine_factors = vec![vec![C64::new(0.0, 0.0); n_fine]; factor_keys.len()];
        NonlinearityEvaluator {
            grid: grid.clone(),
            fine,
            n_components: n,
            terms,
            factor_keys,
            fine_factors,
            scratch: vec![C64::new(0.0, 0.0); n_fine],
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// Evaluate `F_j` from per-component spectra in FFT bin order, writing
    /// per-component bin-order results into `out` (which is overwritten).
    ///
    /// The derivative of a conjugated factor is taken as the conjugate of the
    /// derivative, so the spectral multiplier acts before conjugation.
    pub(crate) fn eval_bins(&mut self, state_bins: &[Vec<C64>], out: &mut [Vec<C64>]) {
        debug_assert_eq!(state_bins.len(), self.n_components);
        debug_assert_eq!(out.len(), self.n_components);
        let n = self.grid.num_points();
        // 1. distinct factors on the padded grid, physical space
        for (key_idx, &(comp, l)) in self.factor_keys.iter().enumerate() {
            let buf = &mut self.fine_factors[key_idx];
            buf.clear();
            buf.extend_from_slice(&state_bins[comp]);
            apply_derivative_bins(buf, &self.grid, l);
            let mut padded = pad_bins(buf, 2);
            bins_to_field_inplace(&mut padded, &self.fine);
            *buf = padded;
        }
        // 2. per-term products, back to the coarse band
        for o in out.iter_mut() {
            o.clear();
            o.resize(n, C64::new(0.0, 0.0));
        }
        for term in &self.terms {
            let [f0, f1, f2] = &term.factors;
            let a = &self.fine_factors[f0.cache_slot];
            let b = &self.fine_factors[f1.cache_slot];
            let c = &self.fine_factors[f2.cache_slot];
            for i in 0..self.fine.num_points() {
                let x = if f0.conjugate { a[i].conj() } else { a[i] };
                let y = if f1.conjugate { b[i].conj() } else { b[i] };
                let z = if f2.conjugate { c[i].conj() } else { c[i] };
                self.scratch[i] = x * y * z;
            }
            field_to_bins_inplace(&mut self.scratch, &self.fine);
            let coarse = truncate_bins(&self.scratch, n);
            let target = &mut out[term.target];
            for (t, v) in target.iter_mut().zip(&coarse) {
                *t += term.coeff * v;
            }
        }
    }

    /// Evaluate `F_j` for a physical-space state.
    pub fn eval_state(&mut self, state: &SolutionState) -> Result<Vec<Field>> {
        if state.n_components() != self.n_components {
            return Err(CoreError::InvalidParameter(
                "state and spec component counts differ".into(),
            ));
        }
        if *state.grid() != self.grid {
            return Err(CoreError::GridMismatch);
        }
        let bins: Vec<Vec<C64>> = state
            .fields
            .iter()
            .map(|f| {
                let mut b = f.samples().to_vec();
                field_to_bins_inplace(&mut b, &self.grid);
                b
            })
            .collect();
        let mut out = vec![Vec::new(); self.n_components];
        self.eval_bins(&bins, &mut out);
        out.into_iter()
            .map(|mut b| {
                bins_to_field_inplace(&mut b, &self.grid);
                Field::new(self.grid.clone(), b)
            })
            .collect()
    }
}

/// Evaluate the cubic nonlinearity `F_j` for every component of a state.
pub fn evaluate_nonlinearity(spec: &SystemSpec, state: &SolutionState) -> Result<Vec<Field>> {
    for f in &state.fields {
        if !f.is_finite() {
            return Err(CoreError::NonFinite {
                context: "evaluate_nonlinearity",
            });
        }
    }
    NonlinearityEvaluator::new(spec, state.grid()).eval_state(state)
}

// ---------------------------------------------------------------------------
// Plain-text spec serialization
// ---------------------------------------------------------------------------

fn format_mass(m: &Mass) -> String {
    match m.exact() {
        Some(r) if *r.denom() != 1 => format!("{}/{}", r.numer(), r.denom()),
        Some(r) => format!("{}", r.numer()),
        None => format!("{:.17e}", m.value()),
    }
}

/// Render a spec in the line-oriented exchange format:
/// a `masses:` header followed by one `term` line per cubic monomial.
pub fn format_system(spec: &SystemSpec) -> String {
    let mut out = String::new();
    out.push_str("masses:");
    for m in spec.masses() {
        out.push(' ');
        out.push_str(&format_mass(m));
    }
    out.push('\n');
    for t in spec.terms() {
        out.push_str(&format!(
            "term {} | {} {} {} {} {} {} | {:.17e} {:.17e}\n",
            t.target,
            t.factors[0].0,
            t.factors[0].1,
            t.factors[1].0,
            t.factors[1].1,
            t.factors[2].0,
            t.factors[2].1,
            t.coeff.re,
            t.coeff.im
        ));
    }
    out
}

/// Parse a mass given as `p/q`, an integer, or a decimal. Terminating
/// decimals are captured exactly as rationals so resonance checks stay exact.
pub fn parse_mass(text: &str, line: usize) -> Result<Mass> {
    let text = text.trim();
    let err = |msg: String| CoreError::Parse { line, msg };
    if let Some((p, q)) = text.split_once('/') {
        let num: i64 = p
            .trim()
            .parse()
            .map_err(|_| err(format!("bad rational numerator {p:?}")))?;
        let den: i64 = q
            .trim()
            .parse()
            .map_err(|_| err(format!("bad rational denominator {q:?}")))?;
        if den == 0 {
            return Err(err("zero denominator".into()));
        }
        return Mass::from_rational(num, den).map_err(|e| err(e.to_string()));
    }
    if !text.contains(['e', 'E']) {
        // try exact decimal -> rational
        let negative = text.starts_with('-');
        let digits = text.trim_start_matches(['-', '+']);
        let (int_part, frac_part) = match digits.split_once('.') {
            Some((a, b)) => (a, b),
            None => (digits, ""),
        };
        if !int_part.is_empty() || !frac_part.is_empty() {
            let all_digits = int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit());
            if all_digits && frac_part.len() <= 12 && int_part.len() <= 12 {
                let mantissa: i64 = format!("{int_part}{frac_part}")
                    .parse()
                    .map_err(|_| err(format!("bad mass {text:?}")))?;
                let mantissa = if negative { -mantissa } else { mantissa };
                let den = 10_i64.pow(frac_part.len() as u32);
                if mantissa != 0 {
                    return Mass::from_rational(mantissa, den).map_err(|e| err(e.to_string()));
                }
            }
        }
    }
    let v: f64 = text
        .parse()
        .map_err(|_| err(format!("bad mass {text:?}")))?;
    Mass::new(v).map_err(|e| err(e.to_string()))
}

/// Parse the line-oriented spec format produced by [`format_system`].
pub fn parse_system(text: &str) -> Result<SystemSpec> {
    let mut masses: Option<Vec<Mass>> = None;
    let mut terms = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| CoreError::Parse {
            line: line_no,
            msg,
        };
        if let Some(rest) = line.strip_prefix("masses:") {
            let parsed: Result<Vec<Mass>> = rest
                .split_whitespace()
                .map(|tok| parse_mass(tok, line_no))
                .collect();
            masses = Some(parsed?);
        } else if let Some(rest) = line.strip_prefix("term") {
            let parts: Vec<&str> = rest.split('|').collect();
            if parts.len() != 3 {
                return Err(err("expected `term j | k1 l1 k2 l2 k3 l3 | re im`".into()));
            }
            let target: usize = parts[0]
                .trim()
                .parse()
                .map_err(|_| err(format!("bad target index {:?}", parts[0].trim())))?;
            let nums: Vec<usize> = parts[1]
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| err(format!("bad factor token {t:?}"))))
                .collect::<Result<_>>()?;
            if nums.len() != 6 {
                return Err(err(format!("expected six factor numbers, got {}", nums.len())));
            }
            let coeffs: Vec<f64> = parts[2]
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| err(format!("bad coefficient {t:?}"))))
                .collect::<Result<_>>()?;
            if coeffs.len() != 2 {
                return Err(err(format!("expected two coefficient values, got {}", coeffs.len())));
            }
            terms.push(CubicTerm {
                target,
                factors: [
                    (nums[0], nums[1] as u8),
                    (nums[2], nums[3] as u8),
                    (nums[4], nums[5] as u8),
                ],
                coeff: Complex64::new(coeffs[0], coeffs[1]),
            });
        } else {
            return Err(err(format!("unrecognized line {line:?}")));
        }
    }
    let masses = masses.ok_or(CoreError::Parse {
        line: 0,
        msg: "missing masses: header".into(),
    })?;
    SystemSpec::new(masses, terms)
}
