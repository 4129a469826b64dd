use thiserror::Error;

/// Construction-time rejection of a value that would break a type invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoreError {
    #[error("`{0}` is not a kebab-case identifier")]
    InvalidIdent(String),
    #[error("decimal values must be finite")]
    NonFiniteDecimal,
    #[error("coordinates must be finite")]
    NonFiniteCoordinate,
    #[error("multimedia reference must name a media kind and a non-empty uri")]
    EmptyMediaRef,
    #[error("operator application `{0}` needs at least one operand")]
    EmptyApplication(String),
    #[error("layout structure `{0}` must hold at least one topological object")]
    EmptyLayout(String),
    #[error("variable `{name}` declared more than once in layout `{layout}`")]
    DuplicateVariable { layout: String, name: String },
    #[error("web structure must hold at least one layout structure")]
    EmptyWeb,
    #[error("duplicate {what} `{name}`")]
    Duplicate { what: &'static str, name: String },
    #[error("hyperlink {from} -> {to} names a missing layout structure")]
    DanglingLink { from: String, to: String },
    #[error("rule `{0}` must have at least one action")]
    NoActions(String),
    #[error("connector `{0}` must compose at least one control structure")]
    EmptyConnector(String),
    #[error("functional operator `{0}` must declare a result type")]
    MissingResultType(String),
    #[error("operator `{0}` has an empty body")]
    EmptyBody(String),
    #[error("annotation `{0}` must have at least one target reference")]
    NoTargets(String),
    #[error("style must carry at least one conventional symbol")]
    EmptyStyle,
    #[error("annotation reference cycle through `{0}`")]
    AnnotationCycle(String),
    #[error("fact must carry at least one attribute-value pair")]
    EmptyFact,
}
