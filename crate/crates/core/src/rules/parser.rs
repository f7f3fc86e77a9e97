//! Line-oriented rule DSL:
//!
//! ```text
//! ruleset motor_subsequent target lesion
//! rule severe_axonal_1 provenance published
//!   if amplitude in { very_decreased }
//!   if velocity in { normal, decreased }
//!   then lesion = severe_axonal
//! ```

use std::collections::BTreeSet;

use super::{Premise, Rule, RuleSet, SemanticFact, Vocabulary};
use crate::text::{self, Line, LineError, Token};

struct Header {
    name: String,
    target: String,
    line: usize,
}

struct OpenRule {
    name: String,
    provenance: Option<String>,
    premises: Vec<Premise>,
    conclusion: Option<SemanticFact>,
    line: usize,
    column: usize,
}

/// Parses a rule file and checks it against `vocab`. All problems found are
/// returned, ordered by line.
pub fn parse_ruleset(source: &str, vocab: &Vocabulary) -> Result<RuleSet, Vec<LineError>> {
    let mut errors = Vec::new();
    let mut header: Option<Header> = None;
    let mut rules: Vec<Rule> = Vec::new();
    let mut open: Option<OpenRule> = None;
    let mut saw_content = false;
    let mut header_attempted = false;

    for line in text::lines(source) {
        saw_content = true;
        let keyword = line.tokens[0];
        let result = match keyword.text {
            "ruleset" => {
                if header.is_some() || open.is_some() || !rules.is_empty() {
                    Err(LineError::at(
                        &keyword,
                        "`ruleset` header must appear once, first",
                    ))
                } else {
                    header_attempted = true;
                    parse_header(&line).map(|h| header = Some(h))
                }
            }
            "rule" => {
                close(&mut open, &mut rules, &mut errors);
                if header.is_none() && rules.is_empty() {
                    errors.push(LineError::at(
                        &keyword,
                        "missing `ruleset` header before first rule",
                    ));
                }
                parse_rule_header(&line).map(|r| open = Some(r))
            }
            "if" => match open.as_mut() {
                Some(r) if r.conclusion.is_none() => {
                    parse_premise(&line).map(|p| r.premises.push(p))
                }
                Some(_) => Err(LineError::at(
                    &keyword,
                    "premise after `then`; start a new `rule`",
                )),
                None => Err(LineError::at(&keyword, "`if` outside of a rule")),
            },
            "then" => match open.as_mut() {
                Some(r) if r.conclusion.is_none() => {
                    parse_conclusion(&line).map(|c| r.conclusion = Some(c))
                }
                Some(_) => Err(LineError::at(&keyword, "rule already has a conclusion")),
                None => Err(LineError::at(&keyword, "`then` outside of a rule")),
            },
            other => Err(LineError::at(
                &keyword,
                format!("unexpected `{other}`, expected `ruleset`, `rule`, `if` or `then`"),
            )),
        };
        if let Err(e) = result {
            errors.push(e);
        }
    }
    close(&mut open, &mut rules, &mut errors);

    let Some(header) = header else {
        if header_attempted {
            // the header line already produced a syntax error
        } else if !saw_content || rules.is_empty() {
            errors.push(LineError::new(1, 1, "ruleset has no rules"));
        } else {
            errors.push(LineError::new(1, 1, "missing `ruleset` header"));
        }
        errors.sort_by_key(|e| (e.line, e.column));
        return Err(errors);
    };

    let rs = RuleSet {
        name: header.name,
        target_variable: header.target,
        rules,
    };
    for (line, message) in rs.check(vocab) {
        let line = if line == 0 { header.line } else { line };
        errors.push(LineError::new(line, 1, message));
    }

    if errors.is_empty() {
        Ok(rs)
    } else {
        errors.sort_by_key(|e| (e.line, e.column));
        Err(errors)
    }
}

fn close(open: &mut Option<OpenRule>, rules: &mut Vec<Rule>, errors: &mut Vec<LineError>) {
    let Some(r) = open.take() else { return };
    match r.conclusion {
        Some(conclusion) => rules.push(Rule {
            name: r.name,
            provenance: r.provenance,
            premises: r.premises,
            conclusion,
            line: r.line,
        }),
        None => errors.push(LineError::new(
            r.line,
            r.column,
            format!("rule `{}` has no `then` conclusion", r.name),
        )),
    }
}

fn expect_keyword(line: &Line<'_>, i: usize, kw: &str) -> Result<(), LineError> {
    match line.tokens.get(i) {
        Some(t) if t.text == kw => Ok(()),
        Some(t) => Err(LineError::at(
            t,
            format!("expected `{kw}`, found `{}`", t.text),
        )),
        None => Err(line.eol_error(format!("expected `{kw}`"))),
    }
}

fn expect_ident<'a>(line: &Line<'a>, i: usize, what: &str) -> Result<Token<'a>, LineError> {
    match line.tokens.get(i) {
        Some(t) if text::is_identifier(t.text) => Ok(*t),
        Some(t) => Err(LineError::at(
            t,
            format!("expected {what}, found `{}`", t.text),
        )),
        None => Err(line.eol_error(format!("expected {what}"))),
    }
}

fn expect_end(line: &Line<'_>, i: usize) -> Result<(), LineError> {
    match line.tokens.get(i) {
        Some(t) => Err(LineError::at(t, format!("unexpected `{}`", t.text))),
        None => Ok(()),
    }
}

fn parse_header(line: &Line<'_>) -> Result<Header, LineError> {
    let name = expect_ident(line, 1, "ruleset name")?;
    expect_keyword(line, 2, "target")?;
    let target = expect_ident(line, 3, "target variable")?;
    expect_end(line, 4)?;
    Ok(Header {
        name: name.text.to_owned(),
        target: target.text.to_owned(),
        line: line.number,
    })
}

fn parse_rule_header(line: &Line<'_>) -> Result<OpenRule, LineError> {
    let name = expect_ident(line, 1, "rule name")?;
    let provenance = if line.tokens.len() > 2 {
        expect_keyword(line, 2, "provenance")?;
        let tag = expect_ident(line, 3, "provenance tag")?;
        expect_end(line, 4)?;
        Some(tag.text.to_owned())
    } else {
        None
    };
    Ok(OpenRule {
        name: name.text.to_owned(),
        provenance,
        premises: Vec::new(),
        conclusion: None,
        line: line.number,
        column: name.column,
    })
}

fn parse_premise(line: &Line<'_>) -> Result<Premise, LineError> {
    let variable = expect_ident(line, 1, "variable name")?;
    expect_keyword(line, 2, "in")?;
    expect_keyword(line, 3, "{")?;

    let mut allowed = BTreeSet::new();
    let mut i = 4;
    // members: ident (',' ident)* followed by '}'; `{ }` is accepted here and
    // rejected later as an empty premise set
    if line.tokens.get(i).is_some_and(|t| t.text == "}") {
        expect_end(line, i + 1)?;
        return Ok(Premise {
            variable: variable.text.to_owned(),
            allowed,
        });
    }
    loop {
        let member = expect_ident(line, i, "set member")?;
        if !allowed.insert(member.text.to_owned()) {
            return Err(LineError::at(
                &member,
                format!("`{}` listed twice", member.text),
            ));
        }
        i += 1;
        match line.tokens.get(i) {
            Some(t) if t.text == "," => i += 1,
            Some(t) if t.text == "}" => break,
            Some(t) => {
                return Err(LineError::at(
                    t,
                    format!("expected `,` or `}}`, found `{}`", t.text),
                ))
            }
            None => return Err(line.eol_error("unterminated set, expected `}`")),
        }
    }
    expect_end(line, i + 1)?;
    Ok(Premise {
        variable: variable.text.to_owned(),
        allowed,
    })
}

fn parse_conclusion(line: &Line<'_>) -> Result<SemanticFact, LineError> {
    let variable = expect_ident(line, 1, "conclusion variable")?;
    expect_keyword(line, 2, "=")?;
    let value = expect_ident(line, 3, "conclusion value")?;
    expect_end(line, 4)?;
    Ok(SemanticFact::new(variable.text, value.text))
}
