//! Editing sessions. A session holds one resource of one project; while it is open,
//! only requests carrying its id may change that resource.

use std::collections::BTreeMap;

use lob_engine::EngineConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub project: String,
    /// `<kind>/<name>`, or `project` for the project as a whole.
    pub resource: String,
    pub author: String,
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

impl Session {
    pub fn config(&self) -> EngineConfig {
        self.max_iterations.map(|max_iterations| EngineConfig { max_iterations }).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Conflict {
    /// Another session holds the resource.
    Held(String),
    UnknownSession(String),
    /// The session holds a different resource.
    WrongResource {
        session: String,
        holds: String,
    },
}

impl std::fmt::Display for Conflict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Conflict::Held(id) => write!(f, "the resource is held by session {id}"),
            Conflict::UnknownSession(id) => write!(f, "no open session {id}"),
            Conflict::WrongResource { session, holds } => write!(f, "session {session} holds {holds}"),
        }
    }
}

#[derive(Debug, Default)]
pub struct Sessions {
    open: BTreeMap<String, Session>,
    next: u64,
}

impl Sessions {
    pub fn open(&mut self, project: String, resource: String, author: String, max_iterations: Option<usize>) -> Result<Session, Conflict> {
        if let Some(s) = self.holder(&project, &resource) {
            return Err(Conflict::Held(s.id.clone()));
        }
        self.next += 1;
        let s = Session { id: format!("s{}", self.next), project, resource, author, max_iterations };
        self.open.insert(s.id.clone(), s.clone());
        Ok(s)
    }

    pub fn close(&mut self, id: &str) -> Option<Session> {
        self.open.remove(id)
    }

    pub fn list(&self) -> Vec<&Session> {
        self.open.values().collect()
    }

    /// Drops every session on a project, for when the project goes away.
    pub fn close_project(&mut self, project: &str) {
        self.open.retain(|_, s| s.project != project);
    }

    fn holder(&self, project: &str, resource: &str) -> Option<&Session> {
        self.open.values().find(|s| s.project == project && (s.resource == resource || s.resource == "project" || resource == "project"))
    }

    /// Checks that a request with session `id` (if any) may change `resource`, returning
    /// the session it acts under.
    pub fn authorize(&self, id: Option<&str>, project: &str, resource: &str) -> Result<Option<Session>, Conflict> {
        let session = match id {
            Some(id) => {
                let s = self.open.get(id).ok_or_else(|| Conflict::UnknownSession(id.into()))?;
                if s.project != project || (s.resource != resource && s.resource != "project") {
                    return Err(Conflict::WrongResource { session: s.id.clone(), holds: format!("{}/{}", s.project, s.resource) });
                }
                Some(s.clone())
            }
            None => None,
        };
        match self.holder(project, resource) {
            Some(h) if session.as_ref().map(|s| &s.id) != Some(&h.id) => Err(Conflict::Held(h.id.clone())),
            _ => Ok(session),
        }
    }
}
