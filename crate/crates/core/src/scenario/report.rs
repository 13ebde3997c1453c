use serde::{Deserialize, Serialize};

use super::{
    check_invariants, InvariantVerdict, ScenarioConfig, ScenarioError, SessionSummary, World,
};
use crate::manager::PaymentMode;
use crate::simnet::{linkage_report_in, Adversary, LinkageReport, Transcript, UnitGraph};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BillingSummary {
    pub sessions: usize,
    pub billed_sessions: usize,
    pub total_amount: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub seed: u64,
    pub payment_mode: PaymentMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
    pub envelopes: usize,
    pub invariants: Vec<InvariantVerdict>,
    pub linkage: Vec<LinkageReport>,
    pub billing: BillingSummary,
    pub sessions: Vec<SessionSummary>,
}

impl RunReport {
    /// True iff every invariant holds and every adversary verdict is the
    /// expected one, including the expected-positive collusion linkage.
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(|v| v.passed) && self.linkage.iter().all(|l| l.met)
    }

    pub fn failed_invariants(&self) -> Vec<&str> {
        self.invariants
            .iter()
            .filter(|v| !v.passed)
            .map(|v| v.name.as_str())
            .collect()
    }

    pub fn invariant(&self, name: &str) -> Option<&InvariantVerdict> {
        self.invariants.iter().find(|v| v.name == name)
    }

    pub fn linkage_for(&self, adversary: Adversary) -> Option<&LinkageReport> {
        self.linkage.iter().find(|l| l.adversary == adversary)
    }

    /// Human-readable summary, one line per verdict.
    pub fn render(&self) -> String {
        let mut out = format!(
            "seed {} ({} mode), {} envelopes delivered\n",
            self.seed, self.payment_mode, self.envelopes
        );
        for v in &self.invariants {
            let mark = if v.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{mark} {}", v.name));
            if let Some(d) = &v.detail {
                out.push_str(&format!(": {d}"));
            }
            out.push('\n');
        }
        for l in &self.linkage {
            let mark = if l.met { "PASS" } else { "FAIL" };
            let linked: Vec<String> = l
                .customers
                .iter()
                .map(|c| {
                    let mut what = Vec::new();
                    for (flag, name) in [
                        (c.content, "content"),
                        (c.sn_set, "nodes"),
                        (c.payment, "payment"),
                        (c.identity_payment, "identity-payment"),
                    ] {
                        if flag {
                            what.push(name);
                        }
                    }
                    let what = if what.is_empty() {
                        "none".to_owned()
                    } else {
                        what.join("+")
                    };
                    format!("{}={what}", c.customer)
                })
                .collect();
            out.push_str(&format!(
                "{mark} adversary {} (expected {}): {}\n",
                l.adversary,
                l.expected,
                linked.join(", ")
            ));
        }
        out.push_str(&format!(
            "billing: {}/{} sessions settled, {} total\n",
            self.billing.billed_sessions, self.billing.sessions, self.billing.total_amount
        ));
        out
    }
}

/// Invariant and linkage verdicts for a finished run.
pub fn analyze(config: &ScenarioConfig, t: &Transcript, sessions: &[SessionSummary]) -> RunReport {
    let graph = UnitGraph::build(t);
    let invariants = check_invariants(config, t, sessions, &graph);
    let linkage = config
        .adversaries
        .iter()
        .map(|&a| linkage_report_in(&graph, t, a))
        .collect();
    RunReport {
        schema_version: super::SCHEMA_VERSION,
        seed: config.seed,
        payment_mode: config.payment_mode,
        transcript: None,
        envelopes: t.envelopes.len(),
        invariants,
        linkage,
        billing: BillingSummary {
            sessions: sessions.len(),
            billed_sessions: sessions.iter().filter(|s| s.billing_records > 0).count(),
            total_amount: sessions.iter().filter_map(|s| s.billed_amount).sum(),
        },
        sessions: sessions.to_vec(),
    }
}

pub struct RunOutcome {
    pub report: RunReport,
    pub transcript: Transcript,
    pub sessions: Vec<SessionSummary>,
}

pub fn run(config: &ScenarioConfig) -> Result<RunOutcome, ScenarioError> {
    let mut world = World::new(config)?;
    world.run()?;
    let sessions = world.sessions();
    let transcript = world.into_transcript();
    let report = analyze(config, &transcript, &sessions);
    Ok(RunOutcome {
        report,
        transcript,
        sessions,
    })
}
