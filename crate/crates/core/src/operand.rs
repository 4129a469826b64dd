use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::value::{TypeTag, Value};
use crate::Ident;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TypedVariable {
    pub name: Ident,
    #[serde(rename = "type")]
    pub ty: TypeTag,
}

impl TypedVariable {
    pub fn new(name: Ident, ty: TypeTag) -> Self {
        TypedVariable { name, ty }
    }
}

/// Recursive data building block: a constant, a typed variable, or a
/// functional operator applied to one or more operands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operand {
    Constant(Value),
    Variable(TypedVariable),
    Application { operator: Ident, args: Vec<Operand> },
}

impl Operand {
    pub fn constant(value: Value) -> Result<Operand, CoreError> {
        value.check()?;
        Ok(Operand::Constant(value))
    }

    pub fn var(name: Ident, ty: TypeTag) -> Operand {
        Operand::Variable(TypedVariable::new(name, ty))
    }

    pub fn apply(operator: Ident, args: Vec<Operand>) -> Result<Operand, CoreError> {
        if args.is_empty() {
            return Err(CoreError::EmptyApplication(operator.to_string()));
        }
        Ok(Operand::Application { operator, args })
    }

    /// Every typed variable in the tree, in left-to-right order.
    pub fn variables(&self) -> Vec<&TypedVariable> {
        let mut out = Vec::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables<'a>(&'a self, out: &mut Vec<&'a TypedVariable>) {
        match self {
            Operand::Constant(_) => {}
            Operand::Variable(v) => out.push(v),
            Operand::Application { args, .. } => args.iter().for_each(|a| a.collect_variables(out)),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Operand::Application { args, .. } => 1 + args.iter().map(Operand::depth).max().unwrap_or(0),
            _ => 1,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Operand::Constant(_) => true,
            Operand::Variable(_) => false,
            Operand::Application { args, .. } => args.iter().all(Operand::is_ground),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    Functional,
    Actional,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: Ident,
    #[serde(rename = "type")]
    pub ty: TypeTag,
}

/// Number of operands an operator takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arity {
    Exact(usize),
    AtLeast(usize),
}

impl Arity {
    pub fn admits(self, n: usize) -> bool {
        match self {
            Arity::Exact(k) => n == k,
            Arity::AtLeast(k) => n >= k,
        }
    }
}

impl std::fmt::Display for Arity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Arity::Exact(k) => write!(f, "{k}"),
            Arity::AtLeast(k) => write!(f, "{k} or more"),
        }
    }
}

/// A user-defined micro-function, articulated from primitives and earlier operators.
///
/// Functional operators have exactly one body expression over their parameters and a
/// result type. Actional operators have an ordered list of invocations; parameters
/// stand for the caller's state selectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorConstruct {
    pub name: Ident,
    pub kind: OperatorKind,
    pub params: Vec<Param>,
    pub result: Option<TypeTag>,
    pub body: Vec<Operand>,
}

impl OperatorConstruct {
    pub fn functional(name: Ident, params: Vec<Param>, result: TypeTag, body: Operand) -> Result<Self, CoreError> {
        let op = OperatorConstruct { name, kind: OperatorKind::Functional, params, result: Some(result), body: vec![body] };
        op.check_shape()?;
        Ok(op)
    }

    pub fn actional(name: Ident, params: Vec<Param>, body: Vec<Operand>) -> Result<Self, CoreError> {
        let op = OperatorConstruct { name, kind: OperatorKind::Actional, params, result: None, body };
        op.check_shape()?;
        Ok(op)
    }

    /// Registry-independent invariants.
    pub fn check_shape(&self) -> Result<(), CoreError> {
        if self.body.is_empty() {
            return Err(CoreError::EmptyBody(self.name.to_string()));
        }
        if self.kind == OperatorKind::Functional && self.result.is_none() {
            return Err(CoreError::MissingResultType(self.name.to_string()));
        }
        for (i, p) in self.params.iter().enumerate() {
            if self.params[..i].iter().any(|q| q.name == p.name) {
                return Err(CoreError::Duplicate { what: "parameter", name: p.name.to_string() });
            }
        }
        Ok(())
    }

    pub fn arity(&self) -> Arity {
        Arity::Exact(self.params.len())
    }
}
