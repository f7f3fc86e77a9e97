//! Human-readable rendering of reports, traces and the chain enumeration.

use std::fmt::Write;

use crate::automaton::EnumerationRow;
use crate::domain::NerveId;
use crate::pipeline::{DiagnosisReport, TraceEvent};

fn facts_line(facts: &crate::rules::FactSet) -> String {
    facts
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn list(ids: &[NerveId]) -> String {
    if ids.is_empty() {
        "none".to_owned()
    } else {
        ids.iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(", ")
    }
}

pub fn render_text(report: &DiagnosisReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Patient: {}", report.patient_id);
    let _ = writeln!(out, "KB fingerprint: {}", report.kb_fingerprint);
    for n in &report.nerves {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{}  chain {}  state {}  -> {}",
            n.nerve, n.chain, n.final_state, n.dx
        );
        for s in &n.segments {
            let rule = s.rule.as_deref().unwrap_or("no rule matched");
            let _ = writeln!(
                out,
                "  segment {} ({}): {} -> {} [{}]",
                s.index,
                s.segment_type,
                facts_line(&s.facts),
                s.dx,
                rule
            );
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Affected segments: {}", report.summary.total_affected);
    let _ = writeln!(
        out,
        "Affected nerves: {}",
        list(&report.summary.affected_nerves)
    );
    let pairs: Vec<String> = report
        .summary
        .diffuse_pairs
        .iter()
        .map(|(a, b)| format!("{a} / {b}"))
        .collect();
    let _ = writeln!(
        out,
        "Diffuse homologous pairs: {}",
        if pairs.is_empty() {
            "none".to_owned()
        } else {
            pairs.join(", ")
        }
    );
    let _ = writeln!(
        out,
        "Predicates: {}",
        facts_line(&report.summary.predicates)
    );
    for w in &report.warnings {
        let _ = writeln!(out, "Warning: {w}");
    }
    let rule = match (&report.patient.rule, report.patient.rule_index) {
        (Some(r), Some(i)) => format!("rule {i} {r}"),
        _ => "no rule matched".to_owned(),
    };
    let _ = writeln!(out, "Patient diagnosis: {} ({rule})", report.patient.dx);
    out
}

fn event_line(event: &TraceEvent) -> String {
    match event {
        TraceEvent::SegmentInterpreted {
            nerve,
            segment,
            segment_type,
            facts,
        } => format!(
            "[1] {nerve} segment {segment} ({segment_type}): {}",
            facts_line(facts)
        ),
        TraceEvent::RuleFired {
            nerve,
            segment,
            ruleset,
            rule,
            rule_index,
            dx,
        } => format!("[2] {nerve} segment {segment}: {ruleset} rule {rule_index} {rule} -> {dx}"),
        TraceEvent::NoRuleMatched {
            nerve,
            segment,
            ruleset,
            dx,
        } => format!("[2] {nerve} segment {segment}: no {ruleset} rule matched -> {dx}"),
        TraceEvent::TransitionTaken {
            nerve,
            from,
            symbol,
            to,
        } => format!("[3] {nerve}: {from} --{}--> {to}", symbol.bit()),
        TraceEvent::NerveDiagnosed {
            nerve,
            chain,
            final_state,
            dx,
        } => format!("[3] {nerve}: chain {chain} ends in {final_state} -> {dx}"),
        TraceEvent::PatientRuleSelected {
            predicates,
            rule,
            rule_index,
            dx,
        } => match (rule, rule_index) {
            (Some(r), Some(i)) => {
                format!(
                    "[4] {}: level3 rule {i} {r} -> {dx}",
                    facts_line(predicates)
                )
            }
            _ => format!(
                "[4] {}: no level3 rule matched -> {dx}",
                facts_line(predicates)
            ),
        },
    }
}

fn event_nerve(event: &TraceEvent) -> Option<&NerveId> {
    match event {
        TraceEvent::SegmentInterpreted { nerve, .. }
        | TraceEvent::RuleFired { nerve, .. }
        | TraceEvent::NoRuleMatched { nerve, .. }
        | TraceEvent::TransitionTaken { nerve, .. }
        | TraceEvent::NerveDiagnosed { nerve, .. } => Some(nerve),
        TraceEvent::PatientRuleSelected { .. } => None,
    }
}

/// Trace events for one nerve, or for the whole exam when `nerve` is `None`.
pub fn trace_events<'a>(
    report: &'a DiagnosisReport,
    nerve: Option<&'a NerveId>,
) -> impl Iterator<Item = &'a TraceEvent> {
    report.trace.iter().filter(move |e| match nerve {
        None => true,
        Some(id) => event_nerve(e) == Some(id),
    })
}

pub fn render_trace(report: &DiagnosisReport, nerve: Option<&NerveId>) -> String {
    let mut out = String::new();
    for e in trace_events(report, nerve) {
        let _ = writeln!(out, "{}", event_line(e));
    }
    out
}

pub fn render_enumeration(rows: &[EnumerationRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<13} {:<7} {:<14} {:<14} agree",
        "chain", "state", "automaton", "oracle"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<13} {:<7} {:<14} {:<14} {}",
            r.chain.to_string(),
            r.final_state.as_str(),
            r.dx.as_str(),
            r.oracle.as_str(),
            if r.agree { "yes" } else { "NO" }
        );
    }
    let agree = rows.iter().filter(|r| r.agree).count();
    let _ = writeln!(out, "{agree}/{} chains agree with the oracle", rows.len());
    out
}
