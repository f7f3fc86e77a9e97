//! Nerve-level diagnosis: a finite automaton read over the chain of segment
//! states (0 normal, 1 affected).
//!
//! The transition relation is data loaded from the KB. Every non-start state
//! is final and maps to a nerve diagnosis:
//!
//! | state            | diagnosis        |
//! |------------------|------------------|
//! | `n`              | normal           |
//! | `f_a`, `f_b`     | focal            |
//! | `m_f_a`, `m_f_b` | multiple focal   |
//! | `d`              | diffuse          |
//!
//! `d` is absorbing. `oracle_dx` evaluates the same diagnosis directly from
//! the lesion layout and is used to cross-check any loaded table.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{symbols, NerveDx, SegmentDx};
use crate::text::{self, LineError};

symbols! {
    pub enum AutomatonState: "automaton state" {
        Start => "start",
        N => "n",
        FA => "f_a",
        FB => "f_b",
        MFA => "m_f_a",
        MFB => "m_f_b",
        D => "d",
    }
}

impl AutomatonState {
    pub fn is_final(self) -> bool {
        self != AutomatonState::Start
    }

    fn idx(self) -> usize {
        self as usize
    }
}

/// Input alphabet: a normal or an affected segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Symbol {
    Normal,
    Affected,
}

impl Symbol {
    pub const ALL: [Symbol; 2] = [Symbol::Normal, Symbol::Affected];

    pub fn bit(self) -> u8 {
        self as u8
    }
}

impl From<Symbol> for u8 {
    fn from(s: Symbol) -> u8 {
        s.bit()
    }
}

impl TryFrom<u8> for Symbol {
    type Error = ChainError;

    fn try_from(b: u8) -> Result<Self, ChainError> {
        match b {
            0 => Ok(Symbol::Normal),
            1 => Ok(Symbol::Affected),
            other => Err(ChainError::BadSymbol(other)),
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bit())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("chain of segment states is empty")]
    Empty,
    #[error("chain of segment states has {0} symbols, at most {max} allowed", max = SegmentStateChain::MAX_LEN)]
    TooLong(usize),
    #[error("invalid segment state {0}, expected 0 or 1")]
    BadSymbol(u8),
}

/// One symbol per segment, proximal order preserved, length 1..=5.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<Symbol>", into = "Vec<Symbol>")]
pub struct SegmentStateChain(Vec<Symbol>);

impl SegmentStateChain {
    pub const MAX_LEN: usize = 5;

    pub fn new(symbols: Vec<Symbol>) -> Result<Self, ChainError> {
        match symbols.len() {
            0 => Err(ChainError::Empty),
            n if n > Self::MAX_LEN => Err(ChainError::TooLong(n)),
            _ => Ok(Self(symbols)),
        }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self, ChainError> {
        let symbols = bits
            .iter()
            .map(|&b| Symbol::try_from(b))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(symbols)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of affected segments.
    pub fn affected(&self) -> usize {
        self.0.iter().filter(|&&s| s == Symbol::Affected).count()
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }

    /// Every chain of length 1..=5, shortest first, then in binary order.
    pub fn all() -> impl Iterator<Item = SegmentStateChain> {
        (1..=Self::MAX_LEN).flat_map(|len| {
            (0u32..(1 << len)).map(move |code| {
                let symbols = (0..len)
                    .map(|i| {
                        if code >> (len - 1 - i) & 1 == 1 {
                            Symbol::Affected
                        } else {
                            Symbol::Normal
                        }
                    })
                    .collect();
                SegmentStateChain(symbols)
            })
        })
    }
}

impl TryFrom<Vec<Symbol>> for SegmentStateChain {
    type Error = ChainError;

    fn try_from(v: Vec<Symbol>) -> Result<Self, ChainError> {
        Self::new(v)
    }
}

impl From<SegmentStateChain> for Vec<Symbol> {
    fn from(c: SegmentStateChain) -> Self {
        c.0
    }
}

impl fmt::Display for SegmentStateChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str("]")
    }
}

/// Pathological flag per segment; the lesion kind is dropped here.
pub fn to_chain(diagnoses: &[SegmentDx]) -> Result<SegmentStateChain, ChainError> {
    SegmentStateChain::new(
        diagnoses
            .iter()
            .map(|dx| {
                if dx.is_pathological() {
                    Symbol::Affected
                } else {
                    Symbol::Normal
                }
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomatonError {
    #[error("δ not total at ({0},{1})")]
    NotTotal(AutomatonState, Symbol),
    #[error("δ not functional at ({0},{1})")]
    NotFunctional(AutomatonState, Symbol),
    #[error("transition ({0},{1}) leads to non-final state {2}")]
    NonFinalTarget(AutomatonState, Symbol, AutomatonState),
    #[error("state {0} is not final and has no diagnosis")]
    NotFinal(AutomatonState),
}

/// One application of δ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: AutomatonState,
    pub symbol: Symbol,
    pub to: AutomatonState,
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {} -> {})", self.from, self.symbol, self.to)
    }
}

/// The reference transition relation shipped in the default KB.
pub const STANDARD_TRANSITIONS: [(AutomatonState, Symbol, AutomatonState); 14] = {
    use AutomatonState::*;
    use Symbol::{Affected as I, Normal as O};
    [
        (Start, O, N),
        (Start, I, FA),
        (N, O, N),
        (N, I, FA),
        (FA, O, FB),
        (FA, I, D),
        (FB, O, FB),
        (FB, I, MFA),
        (MFA, O, MFB),
        (MFA, I, D),
        (MFB, O, MFB),
        (MFB, I, MFA),
        (D, O, D),
        (D, I, D),
    ]
};

/// `(Q, Σ, δ, start, F)` with `Q` the seven states, `Σ = {0, 1}` and
/// `F = Q \ {start}`. δ is total and functional by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AutomatonDef {
    delta: [[AutomatonState; 2]; 7],
}

impl AutomatonDef {
    pub const ENTRIES: usize = 14;

    pub fn standard() -> Self {
        Self::from_transitions(STANDARD_TRANSITIONS).expect("reference table is well formed")
    }

    /// Builds δ from `(state, symbol, next)` triples, reporting every
    /// totality, functionality and finality violation.
    pub fn from_transitions(
        triples: impl IntoIterator<Item = (AutomatonState, Symbol, AutomatonState)>,
    ) -> Result<Self, Vec<AutomatonError>> {
        let mut slots: [[Option<AutomatonState>; 2]; 7] = [[None; 2]; 7];
        let mut errors = Vec::new();
        for (from, symbol, to) in triples {
            if !to.is_final() {
                errors.push(AutomatonError::NonFinalTarget(from, symbol, to));
            }
            let slot = &mut slots[from.idx()][symbol.bit() as usize];
            if slot.is_some() {
                errors.push(AutomatonError::NotFunctional(from, symbol));
            } else {
                *slot = Some(to);
            }
        }
        for &state in AutomatonState::ALL {
            for symbol in Symbol::ALL {
                if slots[state.idx()][symbol.bit() as usize].is_none() {
                    errors.push(AutomatonError::NotTotal(state, symbol));
                }
            }
        }
        if !errors.is_empty() {
            return Err(errors);
        }
        let delta = slots.map(|row| row.map(|s| s.expect("checked total")));
        Ok(Self { delta })
    }

    /// Parses the transition file: one `<state> <symbol> <state>` per line.
    pub fn parse(source: &str) -> Result<Self, Vec<LineError>> {
        let mut triples = Vec::new();
        let mut lines_of = std::collections::BTreeMap::new();
        let mut errors = Vec::new();
        let mut last_line = 1;

        for line in text::lines(source) {
            last_line = line.number;
            match parse_transition(&line) {
                Ok(t) => {
                    lines_of
                        .entry((t.0, t.1))
                        .or_insert(Vec::new())
                        .push(line.number);
                    triples.push(t);
                }
                Err(e) => errors.push(e),
            }
        }

        if let Err(problems) = Self::from_transitions(triples.iter().copied()) {
            for p in problems {
                let line = match &p {
                    AutomatonError::NotFunctional(s, a) => lines_of[&(*s, *a)][1],
                    AutomatonError::NonFinalTarget(s, a, _) => lines_of[&(*s, *a)][0],
                    _ => last_line,
                };
                errors.push(LineError::new(line, 1, p.to_string()));
            }
        }

        if errors.is_empty() {
            Ok(Self::from_transitions(triples).expect("validated above"))
        } else {
            errors.sort_by_key(|e| (e.line, e.column));
            Err(errors)
        }
    }

    pub fn initial(&self) -> AutomatonState {
        AutomatonState::Start
    }

    pub fn finals(&self) -> impl Iterator<Item = AutomatonState> {
        AutomatonState::ALL.iter().copied().filter(|s| s.is_final())
    }

    /// δ(state, symbol).
    pub fn step(&self, state: AutomatonState, symbol: Symbol) -> AutomatonState {
        self.delta[state.idx()][symbol.bit() as usize]
    }

    /// All 14 entries of δ in state order.
    pub fn transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        AutomatonState::ALL.iter().flat_map(move |&from| {
            Symbol::ALL.into_iter().map(move |symbol| Transition {
                from,
                symbol,
                to: self.step(from, symbol),
            })
        })
    }

    /// Reads the chain from the initial state, reporting each δ lookup to
    /// `observe`. Exactly one lookup per symbol.
    pub fn run_observed(
        &self,
        chain: &SegmentStateChain,
        mut observe: impl FnMut(&Transition),
    ) -> AutomatonState {
        chain
            .symbols()
            .iter()
            .fold(self.initial(), |state, &symbol| {
                let t = Transition {
                    from: state,
                    symbol,
                    to: self.step(state, symbol),
                };
                observe(&t);
                t.to
            })
    }

    /// Final state and the full transition path.
    pub fn run(&self, chain: &SegmentStateChain) -> Run {
        let mut path = Vec::with_capacity(chain.len());
        let final_state = self.run_observed(chain, |t| path.push(*t));
        Run { final_state, path }
    }

    pub fn diagnose(&self, chain: &SegmentStateChain) -> Result<NerveDx, AutomatonError> {
        state_to_dx(self.run(chain).final_state)
    }
}

fn parse_transition(
    line: &text::Line<'_>,
) -> Result<(AutomatonState, Symbol, AutomatonState), LineError> {
    let toks = &line.tokens;
    if toks.len() < 3 {
        return Err(line.eol_error("expected `<state> <symbol> <state>`"));
    }
    if toks.len() > 3 {
        return Err(LineError::at(&toks[3], "unexpected trailing token"));
    }
    let state = |i: usize| -> Result<AutomatonState, LineError> {
        toks[i]
            .text
            .parse()
            .map_err(|e| LineError::at(&toks[i], format!("{e}")))
    };
    let from = state(0)?;
    let symbol = match toks[1].text {
        "0" => Symbol::Normal,
        "1" => Symbol::Affected,
        other => {
            return Err(LineError::at(
                &toks[1],
                format!("expected input symbol 0 or 1, found `{other}`"),
            ))
        }
    };
    let to = state(2)?;
    Ok((from, symbol, to))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub final_state: AutomatonState,
    pub path: Vec<Transition>,
}

pub fn state_to_dx(state: AutomatonState) -> Result<NerveDx, AutomatonError> {
    use AutomatonState::*;
    match state {
        N => Ok(NerveDx::Normal),
        FA | FB => Ok(NerveDx::Focal),
        MFA | MFB => Ok(NerveDx::MultipleFocal),
        D => Ok(NerveDx::Diffuse),
        Start => Err(AutomatonError::NotFinal(Start)),
    }
}

/// Direct reading of the lesion layout: contiguous lesions give diffuse,
/// otherwise several lesions give multiple focal, one gives focal.
pub fn oracle_dx(chain: &SegmentStateChain) -> NerveDx {
    let s = chain.symbols();
    let contiguous = s
        .windows(2)
        .any(|w| w[0] == Symbol::Affected && w[1] == Symbol::Affected);
    match chain.affected() {
        _ if contiguous => NerveDx::Diffuse,
        0 => NerveDx::Normal,
        1 => NerveDx::Focal,
        _ => NerveDx::MultipleFocal,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationRow {
    pub chain: SegmentStateChain,
    pub final_state: AutomatonState,
    pub dx: NerveDx,
    pub oracle: NerveDx,
    pub agree: bool,
}

/// The 62-row table of every chain of length 1..=5.
pub fn enumerate_all(def: &AutomatonDef) -> Vec<EnumerationRow> {
    SegmentStateChain::all()
        .map(|chain| {
            let final_state = def.run(&chain).final_state;
            let dx = state_to_dx(final_state).expect("non-empty chains end in a final state");
            let oracle = oracle_dx(&chain);
            EnumerationRow {
                agree: dx == oracle,
                chain,
                final_state,
                dx,
                oracle,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use AutomatonState::*;

    fn chain(bits: &[u8]) -> SegmentStateChain {
        SegmentStateChain::from_bits(bits).unwrap()
    }

    #[test]
    fn to_chain_examples() {
        use SegmentDx::*;
        assert_eq!(
            to_chain(&[Normal, SevereAxonal, Normal]).unwrap(),
            chain(&[0, 1, 0])
        );
        assert_eq!(to_chain(&[Normal; 5]).unwrap(), chain(&[0, 0, 0, 0, 0]));
        assert_eq!(
            to_chain(&[MildDemyelinating, Normal, SevereAxonal, SevereMixed, Normal]).unwrap(),
            chain(&[1, 0, 1, 1, 0])
        );
        assert_eq!(to_chain(&[Unclassified]).unwrap(), chain(&[1]));
        assert_eq!(to_chain(&[]), Err(ChainError::Empty));
        assert_eq!(to_chain(&[Normal; 6]), Err(ChainError::TooLong(6)));
    }

    #[test]
    fn step_examples() {
        let def = AutomatonDef::standard();
        assert_eq!(def.step(Start, Symbol::Affected), FA);
        assert_eq!(def.step(FA, Symbol::Affected), D);
        assert_eq!(def.step(D, Symbol::Normal), D);
        assert_eq!(def.step(MFB, Symbol::Normal), MFB);
    }

    #[test]
    fn run_hand_traces() {
        let def = AutomatonDef::standard();
        let states = |bits: &[u8]| -> Vec<AutomatonState> {
            def.run(&chain(bits)).path.iter().map(|t| t.to).collect()
        };
        assert_eq!(states(&[0, 1, 0, 0, 0]), vec![N, FA, FB, FB, FB]);
        assert_eq!(states(&[1, 0, 1, 1, 0]), vec![FA, FB, MFA, D, D]);
        assert_eq!(states(&[0, 1, 0, 1, 0]), vec![N, FA, FB, MFA, MFB]);
        assert_eq!(def.run(&chain(&[0, 0, 0, 0, 0])).final_state, N);
    }

    #[test]
    fn state_mapping() {
        assert_eq!(state_to_dx(FB).unwrap(), NerveDx::Focal);
        assert_eq!(state_to_dx(D).unwrap(), NerveDx::Diffuse);
        assert_eq!(state_to_dx(N).unwrap(), NerveDx::Normal);
        assert_eq!(state_to_dx(MFA).unwrap(), NerveDx::MultipleFocal);
        assert!(state_to_dx(Start).is_err());
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(oracle_dx(&chain(&[0, 1, 0, 1, 0])), NerveDx::MultipleFocal);
        assert_eq!(oracle_dx(&chain(&[1, 1, 0, 0, 0])), NerveDx::Diffuse);
        assert_eq!(oracle_dx(&chain(&[0, 0, 0, 1, 0])), NerveDx::Focal);
        assert_eq!(oracle_dx(&chain(&[1, 0, 1, 1, 0])), NerveDx::Diffuse);
        assert_eq!(oracle_dx(&chain(&[0])), NerveDx::Normal);
    }

    #[test]
    fn enumeration_has_62_rows_all_agreeing() {
        let rows = enumerate_all(&AutomatonDef::standard());
        assert_eq!(rows.len(), 62);
        assert!(rows.iter().all(|r| r.agree));
        let row = rows
            .iter()
            .find(|r| r.chain == chain(&[0, 1, 0, 0, 0]))
            .unwrap();
        assert_eq!((row.final_state, row.dx), (FB, NerveDx::Focal));
        let auto_diffuse = rows.iter().filter(|r| r.dx == NerveDx::Diffuse).count();
        let oracle_diffuse = rows.iter().filter(|r| r.oracle == NerveDx::Diffuse).count();
        assert_eq!(auto_diffuse, oracle_diffuse);
    }

    #[test]
    fn all_chains_are_distinct() {
        let all: std::collections::BTreeSet<_> = SegmentStateChain::all().collect();
        assert_eq!(all.len(), 62);
    }

    #[test]
    fn parse_reports_mutations() {
        let good: String = STANDARD_TRANSITIONS
            .iter()
            .map(|(a, s, b)| format!("{a} {s} {b}\n"))
            .collect();
        assert_eq!(
            AutomatonDef::parse(&good).unwrap(),
            AutomatonDef::standard()
        );

        let missing = good.replace("d 1 d\n", "");
        let errs = AutomatonDef::parse(&missing).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].message, "δ not total at (d,1)");

        let doubled = format!("{good}f_b 0 f_b\n");
        let errs = AutomatonDef::parse(&doubled).unwrap_err();
        assert_eq!(
            (errs[0].line, errs[0].message.as_str()),
            (15, "δ not functional at (f_b,0)")
        );

        let typo = good.replace("m_f_b 0 m_f_b", "m_f_b m_f_b 0");
        let errs = AutomatonDef::parse(&typo).unwrap_err();
        assert!(
            errs[0].message.contains("expected input symbol 0 or 1"),
            "{errs:?}"
        );
        assert_eq!(errs[0].column, 7);
        assert!(errs.iter().any(|e| e.message == "δ not total at (m_f_b,0)"));

        let into_start = good.replace("n 0 n", "n 0 start");
        let errs = AutomatonDef::parse(&into_start).unwrap_err();
        assert!(errs[0].message.contains("non-final state start"));
    }

    #[test]
    fn chain_serializes_as_bits() {
        let c = chain(&[0, 1, 1]);
        assert_eq!(serde_json::to_string(&c).unwrap(), "[0,1,1]");
        assert_eq!(
            serde_json::from_str::<SegmentStateChain>("[0,1,1]").unwrap(),
            c
        );
        assert!(serde_json::from_str::<SegmentStateChain>("[]").is_err());
        assert!(serde_json::from_str::<SegmentStateChain>("[2]").is_err());
    }

    fn arb_chain() -> impl Strategy<Value = SegmentStateChain> {
        prop::collection::vec(0u8..=1, 1..=5).prop_map(|b| chain(&b))
    }

    proptest! {
        #[test]
        fn absorption(c in arb_chain(), ext in prop::collection::vec(0u8..=1, 0..=4)) {
            let def = AutomatonDef::standard();
            prop_assume!(c.len() + ext.len() <= 5);
            if def.run(&c).final_state == D {
                let mut bits: Vec<u8> = c.symbols().iter().map(|s| s.bit()).collect();
                bits.extend(ext);
                prop_assert_eq!(def.run(&chain(&bits)).final_state, D);
            }
        }

        #[test]
        fn runs_are_linear_and_end_final(c in arb_chain()) {
            let def = AutomatonDef::standard();
            let mut lookups = 0;
            let end = def.run_observed(&c, |_| lookups += 1);
            prop_assert_eq!(lookups, c.len());
            prop_assert!(end.is_final());
        }
    }
}
