use std::collections::BTreeMap;

use lob_core::{ControlStructure, Ident, RewritingRule, State, StateDelta, Value};
use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::registry::{EffectCtx, Registry};
use crate::trace::{GateRecord, TraceEvent};

/// State slices each rule has already fired on. A rule never fires twice on the same
/// slice of the state its conditions read.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Refraction {
    fired: BTreeMap<Ident, Vec<Slice>>,
}

/// Values of a rule's condition reads, in order; `None` for an unbound entry.
pub type Slice = Vec<Option<Value>>;

impl Refraction {
    pub fn has_fired(&self, rule: &Ident, slice: &Slice) -> bool {
        self.fired.get(rule).is_some_and(|s| s.contains(slice))
    }

    pub fn record(&mut self, rule: &Ident, slice: Slice) {
        let seen = self.fired.entry(rule.clone()).or_default();
        if !seen.contains(&slice) {
            seen.push(slice);
        }
    }

    pub fn forget(&mut self, rule: &Ident) {
        self.fired.remove(rule);
    }

    pub fn clear(&mut self) {
        self.fired.clear();
    }

    pub fn is_empty(&self) -> bool {
        self.fired.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Productive steps allowed before a run stops with [`HaltReason::CapReached`].
    pub max_iterations: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { max_iterations: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HaltReason {
    Quiescent,
    CapReached,
}

/// One rule firing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Firing {
    pub iteration: usize,
    pub rule: Ident,
    pub slice: Slice,
    pub deltas: Vec<StateDelta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub markers: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutcome {
    pub firings: Vec<Firing>,
    pub gates: Vec<GateRecord>,
}

impl StepOutcome {
    pub fn is_productive(&self) -> bool {
        !self.firings.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub steps: usize,
    pub halt: HaltReason,
    pub trace: Vec<TraceEvent>,
}

impl RunReport {
    pub fn firings(&self) -> impl Iterator<Item = &Firing> {
        self.trace.iter().filter_map(|e| match e {
            TraceEvent::Fired(f) => Some(f),
            _ => None,
        })
    }
}

/// Enabledness of each node, computed on the snapshot a step starts from.
#[derive(Debug, Clone)]
enum Enabled {
    Rule(bool),
    Connector { on: bool, children: Vec<Enabled> },
}

impl Enabled {
    fn on(&self) -> bool {
        match self {
            Enabled::Rule(b) => *b,
            Enabled::Connector { on, .. } => *on,
        }
    }
}

/// Evaluates control structures against a state.
///
/// A step decides every node's enabledness on the state as it was when the step began.
/// A rule is enabled when all its conditions hold and it has not fired on the current
/// slice. A connector is enabled when its operator, applied to the enabledness of its
/// children, yields true and at least one child is enabled. Enabled top-level structures
/// then fire in declaration order (the implicit OR); an enabled connector fires its enabled
/// children in order. Each rule re-checks its conditions on the current state right before
/// firing, since earlier firings in the same step may have changed it.
pub struct Engine<'r> {
    pub registry: &'r Registry,
    pub config: EngineConfig,
}

impl<'r> Engine<'r> {
    pub fn new(registry: &'r Registry) -> Self {
        Engine { registry, config: EngineConfig::default() }
    }

    pub fn with_config(registry: &'r Registry, config: EngineConfig) -> Self {
        Engine { registry, config }
    }

    /// Values of the rule's condition reads.
    pub fn slice(&self, rule: &RewritingRule, state: &State) -> Slice {
        rule.condition_reads().into_iter().map(|s| self.registry.select(s, state).ok()).collect()
    }

    /// Conditions hold and the rule has not fired on this slice.
    pub fn rule_enabled(&self, rule: &RewritingRule, state: &State, refraction: &Refraction) -> bool {
        rule.conditions.iter().all(|c| self.registry.holds(c.operator.as_str(), &c.args, state)) && !refraction.has_fired(&rule.name, &self.slice(rule, state))
    }

    fn enabled(&self, node: &ControlStructure, state: &State, refraction: &Refraction, path: &mut Vec<usize>, gates: &mut Vec<GateRecord>) -> Enabled {
        match node {
            ControlStructure::Rule(r) => Enabled::Rule(self.rule_enabled(r, state, refraction)),
            ControlStructure::Connector(c) => {
                let children: Vec<Enabled> = c
                    .children
                    .iter()
                    .enumerate()
                    .map(|(i, ch)| {
                        path.push(i);
                        let e = self.enabled(ch, state, refraction, path, gates);
                        path.pop();
                        e
                    })
                    .collect();
                let inputs: Vec<bool> = children.iter().map(Enabled::on).collect();
                let gate = self
                    .registry
                    .call(c.operator.as_str(), inputs.iter().map(|b| Value::Boolean(*b)).collect())
                    .ok()
                    .and_then(|v| v.as_bool())
                    .unwrap_or(false);
                gates.push(GateRecord { path: path.clone(), operator: c.operator.clone(), inputs: inputs.clone(), output: gate });
                Enabled::Connector { on: gate && inputs.iter().any(|b| *b), children }
            }
        }
    }

    /// Whether any structure would fire on this state.
    pub fn any_enabled(&self, state: &State, controls: &[ControlStructure], refraction: &Refraction) -> bool {
        let mut gates = Vec::new();
        controls.iter().enumerate().any(|(i, c)| self.enabled(c, state, refraction, &mut vec![i], &mut gates).on())
    }

    /// Fires one rule atomically: on failure the state is left as it was.
    pub fn fire(&self, rule: &RewritingRule, state: &mut State, refraction: &mut Refraction, iteration: usize) -> Result<Firing, EngineError> {
        let slice = self.slice(rule, state);
        let mut scratch = state.clone();
        let mut ctx = EffectCtx::new(self.registry, &mut scratch);
        for a in &rule.actions {
            self.registry
                .perform(a.operator.as_str(), &a.args, &mut ctx)
                .map_err(|source| EngineError::ActionFailed { rule: rule.name.to_string(), source })?;
        }
        let (deltas, markers) = (ctx.deltas, ctx.markers);
        *state = scratch;
        refraction.record(&rule.name, slice.clone());
        Ok(Firing { iteration, rule: rule.name.clone(), slice, deltas, markers })
    }

    fn fire_node(
        &self,
        node: &ControlStructure,
        enabled: &Enabled,
        state: &mut State,
        refraction: &mut Refraction,
        iteration: usize,
        out: &mut Vec<Firing>,
    ) -> Result<(), EngineError> {
        match (node, enabled) {
            (ControlStructure::Rule(r), Enabled::Rule(true)) => {
                if self.rule_enabled(r, state, refraction) {
                    out.push(self.fire(r, state, refraction, iteration)?);
                }
            }
            (ControlStructure::Connector(c), Enabled::Connector { on: true, children }) => {
                for (ch, e) in c.children.iter().zip(children) {
                    if e.on() {
                        self.fire_node(ch, e, state, refraction, iteration, out)?;
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// One step over the top-level structures. Firings made before a failing rule stay
    /// applied; the failing rule itself changes nothing.
    pub fn step(&self, state: &mut State, controls: &[ControlStructure], refraction: &mut Refraction, iteration: usize) -> Result<StepOutcome, EngineError> {
        let mut gates = Vec::new();
        let enabled: Vec<Enabled> = controls.iter().enumerate().map(|(i, c)| self.enabled(c, state, refraction, &mut vec![i], &mut gates)).collect();
        let mut firings = Vec::new();
        for (c, e) in controls.iter().zip(&enabled) {
            if e.on() {
                self.fire_node(c, e, state, refraction, iteration, &mut firings)?;
            }
        }
        Ok(StepOutcome { firings, gates })
    }

    /// Steps until nothing fires or the productive-step cap is reached.
    pub fn run(&self, state: &mut State, controls: &[ControlStructure], refraction: &mut Refraction) -> Result<RunReport, EngineError> {
        let mut trace = Vec::new();
        let mut steps = 0;
        let halt = loop {
            if steps >= self.config.max_iterations {
                break if self.any_enabled(state, controls, refraction) { HaltReason::CapReached } else { HaltReason::Quiescent };
            }
            let outcome = self.step(state, controls, refraction, steps + 1)?;
            let productive = outcome.is_productive();
            trace.extend(outcome.gates.into_iter().map(|g| TraceEvent::Gate { iteration: steps + 1, gate: g }));
            trace.extend(outcome.firings.into_iter().map(TraceEvent::Fired));
            if !productive {
                break HaltReason::Quiescent;
            }
            steps += 1;
        };
        trace.push(TraceEvent::Halted { steps, reason: halt });
        Ok(RunReport { steps, halt, trace })
    }
}
