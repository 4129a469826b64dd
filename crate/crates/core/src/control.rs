use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::state::FactPattern;
use crate::value::Value;
use crate::{ident, Ident};

/// Named path to one state entry. A missing scope means the evaluation's default scope.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<Ident>,
    pub name: Ident,
}

impl StateRef {
    pub fn local(name: Ident) -> Self {
        StateRef { scope: None, name }
    }

    pub fn scoped(scope: Ident, name: Ident) -> Self {
        StateRef { scope: Some(scope), name }
    }
}

impl std::fmt::Display for StateRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.scope {
            Some(s) => write!(f, "{s}.{}", self.name),
            None => write!(f, "{}", self.name),
        }
    }
}

/// Argument of a condition or action: how a slice of the state is picked out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selector {
    /// One named entry.
    Entry(StateRef),
    /// All entries of a scope, as a list in name order.
    Scope(Ident),
    /// Record entries of a scope that the pattern subsumes, as a list in name order.
    Match {
        scope: Ident,
        pattern: FactPattern,
    },
    Constant(Value),
    Apply {
        operator: Ident,
        args: Vec<Selector>,
    },
}

impl Selector {
    pub fn entry(name: Ident) -> Selector {
        Selector::Entry(StateRef::local(name))
    }

    /// State-reading leaves in left-to-right order. Constants and operator names are not reads.
    pub fn reads(&self) -> Vec<&Selector> {
        let mut out = Vec::new();
        self.collect_reads(&mut out);
        out
    }

    fn collect_reads<'a>(&'a self, out: &mut Vec<&'a Selector>) {
        match self {
            Selector::Entry(_) | Selector::Scope(_) | Selector::Match { .. } => out.push(self),
            Selector::Constant(_) => {}
            Selector::Apply { args, .. } => args.iter().for_each(|a| a.collect_reads(out)),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Selector::Apply { args, .. } => 1 + args.iter().map(Selector::depth).max().unwrap_or(0),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub operator: Ident,
    #[serde(default)]
    pub args: Vec<Selector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub operator: Ident,
    #[serde(default)]
    pub args: Vec<Selector>,
}

impl Condition {
    pub fn new(operator: Ident, args: Vec<Selector>) -> Self {
        Condition { operator, args }
    }
}

impl Action {
    pub fn new(operator: Ident, args: Vec<Selector>) -> Self {
        Action { operator, args }
    }
}

/// A conditioned action: enabled when every condition holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewritingRule {
    pub name: Ident,
    #[serde(default)]
    pub conditions: Vec<Condition>,
    pub actions: Vec<Action>,
}

impl RewritingRule {
    pub fn new(name: Ident, conditions: Vec<Condition>, actions: Vec<Action>) -> Result<Self, CoreError> {
        if actions.is_empty() {
            return Err(CoreError::NoActions(name.to_string()));
        }
        Ok(RewritingRule { name, conditions, actions })
    }

    /// Every state-reading selector used by the conditions.
    pub fn condition_reads(&self) -> Vec<&Selector> {
        self.conditions.iter().flat_map(|c| c.args.iter().flat_map(Selector::reads)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connector {
    pub operator: Ident,
    pub children: Vec<ControlStructure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlStructure {
    Rule(RewritingRule),
    Connector(Connector),
}

impl ControlStructure {
    pub fn connector(operator: Ident, children: Vec<ControlStructure>) -> Result<Self, CoreError> {
        if children.is_empty() {
            return Err(CoreError::EmptyConnector(operator.to_string()));
        }
        Ok(ControlStructure::Connector(Connector { operator, children }))
    }

    /// Groups structures under the implicit OR connector. An empty group is allowed here
    /// and means "no behavior".
    pub fn or(children: Vec<ControlStructure>) -> Self {
        ControlStructure::Connector(Connector { operator: ident!("or"), children })
    }

    /// Leaf rules in declaration order.
    pub fn rules(&self) -> Vec<&RewritingRule> {
        let mut out = Vec::new();
        self.collect_rules(&mut out);
        out
    }

    fn collect_rules<'a>(&'a self, out: &mut Vec<&'a RewritingRule>) {
        match self {
            ControlStructure::Rule(r) => out.push(r),
            ControlStructure::Connector(c) => c.children.iter().for_each(|ch| ch.collect_rules(out)),
        }
    }

    /// Follows a path of child indices from this node.
    pub fn at_path(&self, path: &[usize]) -> Option<&ControlStructure> {
        match path.split_first() {
            None => Some(self),
            Some((&i, rest)) => match self {
                ControlStructure::Connector(c) => c.children.get(i)?.at_path(rest),
                ControlStructure::Rule(_) => None,
            },
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            ControlStructure::Rule(_) => 1,
            ControlStructure::Connector(c) => 1 + c.children.iter().map(ControlStructure::depth).max().unwrap_or(0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(name: &str) -> ControlStructure {
        ControlStructure::Rule(RewritingRule::new(Ident::new(name).unwrap(), vec![], vec![Action::new(ident!("save"), vec![])]).unwrap())
    }

    #[test]
    fn rule_needs_an_action() {
        assert!(RewritingRule::new(ident!("r"), vec![], vec![]).is_err());
    }

    #[test]
    fn connector_needs_children() {
        assert!(ControlStructure::connector(ident!("nand"), vec![]).is_err());
        let c = ControlStructure::connector(ident!("nand"), vec![rule("a"), rule("b")]).unwrap();
        let names: Vec<_> = c.rules().iter().map(|r| r.name.to_string()).collect();
        assert_eq!(names, ["a", "b"]);
        assert!(c.at_path(&[1]).is_some());
        assert!(c.at_path(&[2]).is_none());
    }

    #[test]
    fn reads_skip_constants() {
        let sel = Selector::Apply {
            operator: ident!("add"),
            args: vec![Selector::entry(ident!("a")), Selector::Constant(Value::Integer(1)), Selector::Scope(ident!("lab"))],
        };
        assert_eq!(sel.reads().len(), 2);
    }
}
