use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::Ident;

/// Flat type vocabulary for typed variables, parameters and datoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TypeTag {
    Boolean,
    Integer,
    Decimal,
    Text,
    Media,
    List,
    Record,
}

impl TypeTag {
    pub const ALL: [TypeTag; 7] = [TypeTag::Boolean, TypeTag::Integer, TypeTag::Decimal, TypeTag::Text, TypeTag::Media, TypeTag::List, TypeTag::Record];

    pub fn keyword(self) -> &'static str {
        match self {
            TypeTag::Boolean => "boolean",
            TypeTag::Integer => "integer",
            TypeTag::Decimal => "decimal",
            TypeTag::Text => "text",
            TypeTag::Media => "media",
            TypeTag::List => "list",
            TypeTag::Record => "record",
        }
    }

    pub fn from_keyword(s: &str) -> Option<TypeTag> {
        TypeTag::ALL.into_iter().find(|t| t.keyword() == s)
    }

    /// Whether a value may be stored under this tag. Integers widen to decimals.
    pub fn accepts(self, value: &Value) -> bool {
        let tag = value.type_tag();
        tag == self || (self == TypeTag::Decimal && tag == TypeTag::Integer)
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Opaque reference to a piece of multimedia text, tagged with its media kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaRef {
    pub media: String,
    pub uri: String,
}

impl MediaRef {
    pub fn new(media: impl Into<String>, uri: impl Into<String>) -> Result<Self, CoreError> {
        let r = MediaRef { media: media.into(), uri: uri.into() };
        r.check()?;
        Ok(r)
    }

    pub fn check(&self) -> Result<(), CoreError> {
        if self.uri.is_empty() || self.media.is_empty() {
            return Err(CoreError::EmptyMediaRef);
        }
        Ok(())
    }
}

/// A domain value: the constant form of a ground operand construct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Value {
    Boolean(bool),
    Integer(i64),
    Decimal(f64),
    Text(String),
    Media(MediaRef),
    List(Vec<Value>),
    Record(BTreeMap<Ident, Value>),
}

impl Value {
    pub fn decimal(x: f64) -> Result<Value, CoreError> {
        if x.is_finite() {
            Ok(Value::Decimal(x))
        } else {
            Err(CoreError::NonFiniteDecimal)
        }
    }

    pub fn text(s: impl Into<String>) -> Value {
        Value::Text(s.into())
    }

    pub fn type_tag(&self) -> TypeTag {
        match self {
            Value::Boolean(_) => TypeTag::Boolean,
            Value::Integer(_) => TypeTag::Integer,
            Value::Decimal(_) => TypeTag::Decimal,
            Value::Text(_) => TypeTag::Text,
            Value::Media(_) => TypeTag::Media,
            Value::List(_) => TypeTag::List,
            Value::Record(_) => TypeTag::Record,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Boolean(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_integer(&self) -> Option<i64> {
        match self {
            Value::Integer(i) => Some(*i),
            _ => None,
        }
    }

    /// Numeric value, widening integers.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Integer(i) => Some(*i as f64),
            Value::Decimal(d) => Some(*d),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_record(&self) -> Option<&BTreeMap<Ident, Value>> {
        match self {
            Value::Record(fields) => Some(fields),
            _ => None,
        }
    }

    /// Checks the value invariants recursively: decimals finite, media references non-empty.
    pub fn check(&self) -> Result<(), CoreError> {
        match self {
            Value::Decimal(x) if !x.is_finite() => Err(CoreError::NonFiniteDecimal),
            Value::Media(m) => m.check(),
            Value::List(items) => items.iter().try_for_each(Value::check),
            Value::Record(fields) => fields.values().try_for_each(Value::check),
            _ => Ok(()),
        }
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Boolean(b)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Integer(i)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}
