//! Production rules with set-valued premises, evaluated first-match in file
//! order. Used for segment diagnosis and for the patient-level synthesis.

mod parser;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use parser::parse_ruleset;

/// A `(variable, value)` binding.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SemanticFact {
    pub variable: String,
    pub value: String,
}

impl SemanticFact {
    pub fn new(variable: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            variable: variable.into(),
            value: value.into(),
        }
    }
}

/// Facts with at most one value per variable.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FactSet(BTreeMap<String, String>);

impl FactSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds `variable`, replacing any previous value.
    pub fn insert(&mut self, variable: impl Into<String>, value: impl Into<String>) {
        self.0.insert(variable.into(), value.into());
    }

    pub fn get(&self, variable: &str) -> Option<&str> {
        self.0.get(variable).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn facts(&self) -> impl Iterator<Item = SemanticFact> + '_ {
        self.iter().map(|(k, v)| SemanticFact::new(k, v))
    }
}

impl FromIterator<SemanticFact> for FactSet {
    fn from_iter<I: IntoIterator<Item = SemanticFact>>(iter: I) -> Self {
        FactSet(iter.into_iter().map(|f| (f.variable, f.value)).collect())
    }
}

impl<'a> FromIterator<(&'a str, &'a str)> for FactSet {
    fn from_iter<I: IntoIterator<Item = (&'a str, &'a str)>>(iter: I) -> Self {
        FactSet(
            iter.into_iter()
                .map(|(k, v)| (k.to_owned(), v.to_owned()))
                .collect(),
        )
    }
}

impl fmt::Display for FactSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

/// `variable in { allowed... }`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Premise {
    pub variable: String,
    pub allowed: BTreeSet<String>,
}

impl Premise {
    pub fn new<'a>(variable: &str, allowed: impl IntoIterator<Item = &'a str>) -> Self {
        Self {
            variable: variable.to_owned(),
            allowed: allowed.into_iter().map(str::to_owned).collect(),
        }
    }

    pub fn holds(&self, facts: &FactSet) -> bool {
        facts
            .get(&self.variable)
            .is_some_and(|v| self.allowed.contains(v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    /// Free-form origin tag from the rule file, e.g. `published` or `reconstructed`.
    pub provenance: Option<String>,
    pub premises: Vec<Premise>,
    pub conclusion: SemanticFact,
    /// Line of the `rule` header in the source file, 0 when built in code.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub name: String,
    pub target_variable: String,
    pub rules: Vec<Rule>,
}

/// Declared variables and their domains, plus the conclusion variable and
/// its domain. A rule set is checked against one vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    pub variables: BTreeMap<String, BTreeSet<String>>,
    pub target: String,
    pub target_domain: BTreeSet<String>,
}

impl Vocabulary {
    pub fn new(target: &str, target_domain: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            variables: BTreeMap::new(),
            target: target.to_owned(),
            target_domain: target_domain.into_iter().map(Into::into).collect(),
        }
    }

    pub fn with_variable(
        mut self,
        name: &str,
        domain: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        self.variables.insert(
            name.to_owned(),
            domain.into_iter().map(Into::into).collect(),
        );
        self
    }
}

/// True iff every premise is satisfied by `facts`.
pub fn matches(rule: &Rule, facts: &FactSet) -> bool {
    rule.premises.iter().all(|p| p.holds(facts))
}

/// A rule that fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Firing<'a> {
    /// 1-based position of the rule in its rule set.
    pub index: usize,
    pub rule: &'a Rule,
}

impl<'a> Firing<'a> {
    pub fn value(&self) -> &'a str {
        &self.rule.conclusion.value
    }
}

/// Fires the first rule in file order whose premises all hold. `None` is the
/// no-match outcome.
pub fn fire<'a>(rs: &'a RuleSet, facts: &FactSet) -> Option<Firing<'a>> {
    rs.rules
        .iter()
        .position(|r| matches(r, facts))
        .map(|i| Firing {
            index: i + 1,
            rule: &rs.rules[i],
        })
}

impl RuleSet {
    /// Checks structural invariants and conformance to `vocab`, returning a
    /// message and the offending rule's line for each problem.
    pub fn check(&self, vocab: &Vocabulary) -> Vec<(usize, String)> {
        let mut problems = Vec::new();
        if self.rules.is_empty() {
            problems.push((0, "ruleset has no rules".to_owned()));
        }
        if self.target_variable != vocab.target {
            problems.push((
                0,
                format!(
                    "ruleset target `{}` does not match expected `{}`",
                    self.target_variable, vocab.target
                ),
            ));
        }
        let mut names = BTreeSet::new();
        for rule in &self.rules {
            let at = rule.line;
            if !names.insert(rule.name.as_str()) {
                problems.push((at, format!("duplicate rule name `{}`", rule.name)));
            }
            if rule.premises.is_empty() {
                problems.push((at, format!("rule `{}`: empty premise set", rule.name)));
            }
            let mut seen = BTreeSet::new();
            for p in &rule.premises {
                if !seen.insert(p.variable.as_str()) {
                    problems.push((
                        at,
                        format!(
                            "rule `{}`: duplicate premise variable `{}`",
                            rule.name, p.variable
                        ),
                    ));
                }
                if p.allowed.is_empty() {
                    problems.push((
                        at,
                        format!(
                            "rule `{}`: empty premise set for `{}`",
                            rule.name, p.variable
                        ),
                    ));
                }
                match vocab.variables.get(&p.variable) {
                    None => problems.push((
                        at,
                        format!(
                            "rule `{}`: premise over undeclared variable `{}`",
                            rule.name, p.variable
                        ),
                    )),
                    Some(domain) => {
                        for v in p.allowed.difference(domain) {
                            problems.push((
                                at,
                                format!(
                                    "rule `{}`: `{v}` is not in the domain of `{}`",
                                    rule.name, p.variable
                                ),
                            ));
                        }
                    }
                }
                if p.variable == rule.conclusion.variable {
                    problems.push((
                        at,
                        format!(
                            "rule `{}`: conclusion variable `{}` also appears as a premise",
                            rule.name, p.variable
                        ),
                    ));
                }
            }
            if rule.conclusion.variable != self.target_variable {
                problems.push((
                    at,
                    format!(
                        "rule `{}` concludes `{}` but the ruleset target is `{}`",
                        rule.name, rule.conclusion.variable, self.target_variable
                    ),
                ));
            } else if !vocab.target_domain.contains(&rule.conclusion.value) {
                problems.push((
                    at,
                    format!(
                        "rule `{}`: `{}` is not a valid value for `{}`",
                        rule.name, rule.conclusion.value, rule.conclusion.variable
                    ),
                ));
            }
        }
        problems
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CATS: [&str; 3] = ["normal", "decreased", "very_decreased"];

    pub(crate) const FIG3: &str = "\
ruleset motor_subsequent target lesion
rule severe_axonal_1 provenance published
  if amplitude in { very_decreased }
  if amplitude_ratio in { normal }
  if velocity in { normal, decreased }
  then lesion = severe_axonal
rule mild_demyelinating_1 provenance published
  if amplitude in { normal }
  if amplitude_ratio in { normal, decreased }
  if velocity in { decreased }
  then lesion = mild_demyelinating
";

    fn vocab() -> Vocabulary {
        Vocabulary::new(
            "lesion",
            [
                "normal",
                "severe_axonal",
                "mild_demyelinating",
                "mild_axonal",
            ],
        )
        .with_variable("amplitude", CATS)
        .with_variable("amplitude_ratio", CATS)
        .with_variable("velocity", CATS)
    }

    fn facts(a: &str, r: &str, v: &str) -> FactSet {
        [("amplitude", a), ("amplitude_ratio", r), ("velocity", v)]
            .into_iter()
            .collect()
    }

    fn fig3() -> RuleSet {
        parse_ruleset(FIG3, &vocab()).unwrap()
    }

    #[test]
    fn rule_one_matches_example_facts() {
        let rs = fig3();
        assert!(matches(
            &rs.rules[0],
            &facts("very_decreased", "normal", "decreased")
        ));
        assert!(!matches(
            &rs.rules[0],
            &facts("normal", "normal", "decreased")
        ));
    }

    #[test]
    fn missing_premise_variable_never_matches() {
        let rs = fig3();
        let partial: FactSet = [("amplitude", "very_decreased"), ("velocity", "normal")]
            .into_iter()
            .collect();
        assert!(rs.rules.iter().all(|r| !matches(r, &partial)));
    }

    #[test]
    fn fire_returns_first_match() {
        let rs = fig3();
        let f = fire(&rs, &facts("very_decreased", "normal", "decreased")).unwrap();
        assert_eq!(
            (f.value(), f.rule.name.as_str(), f.index),
            ("severe_axonal", "severe_axonal_1", 1)
        );
        assert!(fire(&rs, &FactSet::new()).is_none());
    }

    #[test]
    fn overlapping_rules_resolve_by_order() {
        let text = format!(
            "{FIG3}rule all_normal\n  if amplitude in {{ normal }}\n  then lesion = normal\n"
        );
        let rs = parse_ruleset(&text, &vocab()).unwrap();
        // amplitude normal + velocity decreased matches rules 2 and 3
        let f = fire(&rs, &facts("normal", "normal", "decreased")).unwrap();
        assert_eq!(f.index, 2);
        let f = fire(&rs, &facts("normal", "normal", "normal")).unwrap();
        assert_eq!(f.rule.name, "all_normal");
    }

    #[test]
    fn fig3_rules_are_mutually_exclusive_over_all_27_combinations() {
        let rs = fig3();
        let (mut r1, mut r2) = (0, 0);
        for a in CATS {
            for r in CATS {
                for v in CATS {
                    let f = facts(a, r, v);
                    let m1 = matches(&rs.rules[0], &f);
                    let m2 = matches(&rs.rules[1], &f);
                    assert!(!(m1 && m2));
                    r1 += m1 as usize;
                    r2 += m2 as usize;
                }
            }
        }
        assert_eq!((r1, r2), (2, 2));
    }

    #[test]
    fn programmatic_ruleset_check() {
        let mut rs = fig3();
        assert!(rs.check(&vocab()).is_empty());
        rs.rules[1].name = rs.rules[0].name.clone();
        rs.rules[0]
            .premises
            .push(Premise::new("lesion", ["normal"]));
        let problems: Vec<_> = rs.check(&vocab()).into_iter().map(|(_, m)| m).collect();
        assert!(problems.iter().any(|m| m.contains("duplicate rule name")));
        assert!(problems
            .iter()
            .any(|m| m.contains("undeclared variable `lesion`")));
        assert!(problems
            .iter()
            .any(|m| m.contains("also appears as a premise")));
    }

    fn arb_facts() -> impl Strategy<Value = FactSet> {
        prop::collection::vec(prop::sample::select(CATS.to_vec()), 3)
            .prop_map(|v| facts(v[0], v[1], v[2]))
    }

    fn arb_rule(i: usize) -> impl Strategy<Value = Rule> {
        let premise = |var: &'static str| {
            prop::option::of(prop::sample::subsequence(CATS.to_vec(), 1..=3))
                .prop_map(move |set| set.map(|s| Premise::new(var, s)))
        };
        (
            premise("amplitude"),
            premise("amplitude_ratio"),
            premise("velocity"),
        )
            .prop_map(move |(a, b, c)| {
                let mut premises: Vec<_> = [a, b, c].into_iter().flatten().collect();
                if premises.is_empty() {
                    premises.push(Premise::new("amplitude", CATS));
                }
                Rule {
                    name: format!("r{i}"),
                    provenance: None,
                    premises,
                    conclusion: SemanticFact::new("lesion", format!("v{i}")),
                    line: 0,
                }
            })
    }

    fn arb_ruleset() -> impl Strategy<Value = RuleSet> {
        (1usize..6)
            .prop_flat_map(|n| (0..n).map(arb_rule).collect::<Vec<_>>())
            .prop_map(|rules| RuleSet {
                name: "generated".into(),
                target_variable: "lesion".into(),
                rules,
            })
    }

    proptest! {
        #[test]
        fn fire_is_deterministic_and_first_match(rs in arb_ruleset(), f in arb_facts()) {
            let a = fire(&rs, &f).map(|x| x.index);
            let b = fire(&rs, &f).map(|x| x.index);
            prop_assert_eq!(a, b);
            if let Some(i) = a {
                prop_assert!(rs.rules[..i - 1].iter().all(|r| !matches(r, &f)));
                prop_assert!(matches(&rs.rules[i - 1], &f));
            } else {
                prop_assert!(rs.rules.iter().all(|r| !matches(r, &f)));
            }
        }

        #[test]
        fn single_match_is_order_independent(
            rs in arb_ruleset(),
            f in arb_facts(),
            seed in any::<u64>(),
        ) {
            let matching = rs.rules.iter().filter(|r| matches(r, &f)).count();
            prop_assume!(matching == 1);
            let mut shuffled = rs.clone();
            let n = shuffled.rules.len();
            shuffled.rules.rotate_left((seed as usize) % n);
            shuffled.rules.reverse();
            prop_assert_eq!(
                fire(&rs, &f).map(|x| x.value().to_owned()),
                fire(&shuffled, &f).map(|x| x.value().to_owned())
            );
        }

        #[test]
        fn unrelated_facts_do_not_change_matching(rs in arb_ruleset(), f in arb_facts(), extra in "[a-z]{1,6}") {
            let mut more = f.clone();
            more.insert(format!("zz_{extra}"), "normal");
            for r in &rs.rules {
                prop_assert_eq!(matches(r, &f), matches(r, &more));
            }
        }
    }
}
