use serde::{Deserialize, Serialize};

/// The sixteen generative productions. Diagnostics and validation violations name the
/// production they violate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Production {
    WebStructure = 1,
    LayoutStructure = 2,
    TopologicalObject = 3,
    OperandConstruct = 4,
    OperatorConstruct = 5,
    Annotation = 6,
    TargetRef = 7,
    Constant = 8,
    Target = 9,
    Style = 10,
    ControlStructure = 11,
    Connector = 12,
    RewritingRule = 13,
    Condition = 14,
    Action = 15,
    State = 16,
}

impl Production {
    pub const ALL: [Production; 16] = [
        Production::WebStructure,
        Production::LayoutStructure,
        Production::TopologicalObject,
        Production::OperandConstruct,
        Production::OperatorConstruct,
        Production::Annotation,
        Production::TargetRef,
        Production::Constant,
        Production::Target,
        Production::Style,
        Production::ControlStructure,
        Production::Connector,
        Production::RewritingRule,
        Production::Condition,
        Production::Action,
        Production::State,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Production::WebStructure => "web-structure",
            Production::LayoutStructure => "layout-structure",
            Production::TopologicalObject => "topological-object",
            Production::OperandConstruct => "operand-construct",
            Production::OperatorConstruct => "operator-construct",
            Production::Annotation => "annotation",
            Production::TargetRef => "target-ref",
            Production::Constant => "constant",
            Production::Target => "target",
            Production::Style => "style",
            Production::ControlStructure => "control-structure",
            Production::Connector => "connector",
            Production::RewritingRule => "rewriting-rule",
            Production::Condition => "condition",
            Production::Action => "action",
            Production::State => "state",
        }
    }
}

impl std::fmt::Display for Production {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "<{}> ({})", self.name(), self.number())
    }
}
