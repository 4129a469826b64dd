//! The unit of interchange: everything one `.lob` file can declare.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotation::Annotation;
use crate::control::{ControlStructure, RewritingRule};
use crate::operand::{Operand, OperatorConstruct, Param};
use crate::structure::WebStructure;
use crate::value::Value;
use crate::Ident;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedOperand {
    pub name: Ident,
    pub operand: Operand,
}

/// If-then rules bound to a template, composed under the implicit OR connector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismDecl {
    pub name: Ident,
    pub template: Ident,
    pub rules: Vec<RewritingRule>,
}

/// Initial entries for one state scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDecl {
    pub scope: Ident,
    pub entries: BTreeMap<Ident, Value>,
}

pub type Pairs = BTreeMap<Ident, Value>;

/// A function a wrapped application or device exposes to its community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrapperFn {
    pub name: Ident,
    pub params: Vec<Param>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityDecl {
    pub id: Ident,
    pub memberships: Vec<Ident>,
    pub memory: Vec<Pairs>,
    pub wrapper: Vec<WrapperFn>,
    pub behavior: Vec<ControlStructure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostedFact {
    pub owner: Ident,
    pub pairs: Pairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityDecl {
    pub name: Ident,
    pub facts: Vec<PostedFact>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentKind {
    Source,
    Filter,
    Viewer,
    Handler,
}

impl ComponentKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ComponentKind::Source => "source",
            ComponentKind::Filter => "filter",
            ComponentKind::Viewer => "viewer",
            ComponentKind::Handler => "handler",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        [ComponentKind::Source, ComponentKind::Filter, ComponentKind::Viewer, ComponentKind::Handler].into_iter().find(|k| k.keyword() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDecl {
    pub id: Ident,
    pub kind: ComponentKind,
    pub subscriptions: Vec<Ident>,
    pub accepts: Vec<Ident>,
    pub predicate: Option<Ident>,
    pub records: Vec<Value>,
    pub behavior: Vec<ControlStructure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArcDecl {
    Parallel { from: Ident, to: Ident },
    Alternative { from: Ident, selector: Option<Ident>, when_true: Ident, when_false: Ident },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceDecl {
    pub name: Ident,
    pub components: Vec<Ident>,
    pub arcs: Vec<ArcDecl>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    #[serde(default)]
    pub operators: Vec<OperatorConstruct>,
    #[serde(default)]
    pub operands: Vec<NamedOperand>,
    #[serde(default)]
    pub webs: Vec<WebStructure>,
    #[serde(default)]
    pub controls: Vec<ControlStructure>,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    #[serde(default)]
    pub mechanisms: Vec<MechanismDecl>,
    #[serde(default)]
    pub states: Vec<StateDecl>,
    #[serde(default)]
    pub entities: Vec<EntityDecl>,
    #[serde(default)]
    pub communities: Vec<CommunityDecl>,
    #[serde(default)]
    pub components: Vec<ComponentDecl>,
    #[serde(default)]
    pub workspaces: Vec<WorkspaceDecl>,
}

impl Bundle {
    pub fn is_empty(&self) -> bool {
        *self == Bundle::default()
    }

    /// Appends every item of `other`.
    pub fn extend(&mut self, other: Bundle) {
        self.operators.extend(other.operators);
        self.operands.extend(other.operands);
        self.webs.extend(other.webs);
        self.controls.extend(other.controls);
        self.annotations.extend(other.annotations);
        self.mechanisms.extend(other.mechanisms);
        self.states.extend(other.states);
        self.entities.extend(other.entities);
        self.communities.extend(other.communities);
        self.components.extend(other.components);
        self.workspaces.extend(other.workspaces);
    }

    /// Number of top-level items.
    pub fn item_count(&self) -> usize {
        self.operators.len()
            + self.operands.len()
            + self.webs.len()
            + self.controls.len()
            + self.annotations.len()
            + self.mechanisms.len()
            + self.states.len()
            + self.entities.len()
            + self.communities.len()
            + self.components.len()
            + self.workspaces.len()
    }
}
