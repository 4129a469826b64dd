//! Projects on disk, one folder each.
//!
//! ```text
//! <root>/<project>/definitions.lob          authoritative
//! <root>/<project>/society.json             authoritative; society.lob, calls.log, society.trace derived
//! <root>/<project>/documents/<id>.json      authoritative; <id>.history, <id>.trace, <id>.notes derived
//! <root>/<project>/workspaces/<name>.json   authoritative; <name>.lob, <name>.trace, <name>.view derived
//! ```
//!
//! Every file is replaced atomically: written to a temporary file in the same folder,
//! synced, renamed over the target, then the folder is synced. A crash leaves each file
//! either old or new. Derived files are rewritten from the authoritative ones on load, and
//! stray temporaries are removed.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use lob_core::{Bundle, Ident};
use lob_dsl::{parse_document, print_bundle, SourceText};
use lob_engine::write_trace;
use lob_profiles::flow::{export_rows, plain_json};
use thiserror::Error;

use crate::project::{Project, ProjectError, Society, StoredWorkspace, Touched};

const DEFINITIONS: &str = "definitions.lob";
const SOCIETY: &str = "society.json";
const DOCUMENTS: &str = "documents";
const WORKSPACES: &str = "workspaces";
const TMP_PREFIX: &str = ".tmp";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Project(#[from] ProjectError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

fn corrupt(path: &Path, message: impl ToString) -> StoreError {
    StoreError::Corrupt { path: path.to_path_buf(), message: message.to_string() }
}

/// Replaces `path` with `contents` so that readers see the old or the new file, never a mix.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().expect("store paths have a parent");
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::Builder::new().prefix(TMP_PREFIX).tempfile_in(dir).map_err(io_err(dir))?;
    tmp.write_all(contents).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| StoreError::Io { path: path.to_path_buf(), source: e.error })?;
    sync_dir(dir)
}

fn remove_file(path: &Path) -> Result<(), StoreError> {
    match fs::remove_file(path) {
        Err(e) if e.kind() != io::ErrorKind::NotFound => Err(io_err(path)(e)),
        _ => Ok(()),
    }
}

fn sync_dir(dir: &Path) -> Result<(), StoreError> {
    #[cfg(unix)]
    fs::File::open(dir).and_then(|d| d.sync_all()).map_err(io_err(dir))?;
    Ok(())
}

fn read(path: &Path) -> Result<Option<String>, StoreError> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(path)(e)),
    }
}

fn json_pretty<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("store records serialize");
    s.push(b'\n');
    s
}

fn lines(xs: impl IntoIterator<Item = String>) -> String {
    xs.into_iter().map(|l| l + "\n").collect()
}

/// A folder of projects.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn project_dir(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Project names, sorted. Folders whose names are not identifiers are ignored.
    pub fn projects(&self) -> Result<Vec<Ident>, StoreError> {
        let mut names = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(io_err(&self.root))? {
            let entry = entry.map_err(io_err(&self.root))?;
            if entry.file_type().map_err(io_err(&entry.path()))?.is_dir() {
                if let Some(name) = entry.file_name().to_str().and_then(|n| Ident::new(n).ok()) {
                    names.push(name);
                }
            }
        }
        names.sort();
        Ok(names)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.project_dir(name).join(DEFINITIONS).is_file()
    }

    /// Loads every project in the store.
    pub fn load_all(&self) -> Result<BTreeMap<Ident, Project>, StoreError> {
        let mut all = BTreeMap::new();
        for name in self.projects()? {
            if self.exists(name.as_str()) {
                all.insert(name.clone(), self.load(&name)?);
            }
        }
        Ok(all)
    }

    /// Reads a project's authoritative files, then removes temporaries and rewrites
    /// every derived file from them.
    pub fn load(&self, name: &Ident) -> Result<Project, StoreError> {
        let dir = self.project_dir(name.as_str());
        clean_temporaries(&dir)?;
        let defs_path = dir.join(DEFINITIONS);
        let text = read(&defs_path)?.ok_or_else(|| corrupt(&defs_path, "missing"))?;
        let definitions = parse_document(&SourceText::new(defs_path.display().to_string(), text), &lob_profiles::registry())
            .map_err(|ds| corrupt(&defs_path, ds.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")))?;
        let mut project = Project::new(name.clone());
        project.definitions = definitions;

        let society_path = dir.join(SOCIETY);
        if let Some(text) = read(&society_path)? {
            project.society = serde_json::from_str::<Society>(&text).map_err(|e| corrupt(&society_path, e))?;
        }
        for (id, path) in records(&dir.join(DOCUMENTS))? {
            let text = read(&path)?.unwrap_or_default();
            project.documents.insert(id, serde_json::from_str(&text).map_err(|e| corrupt(&path, e))?);
        }
        for (id, path) in records(&dir.join(WORKSPACES))? {
            let text = read(&path)?.unwrap_or_default();
            project.workspaces.insert(id, serde_json::from_str::<StoredWorkspace>(&text).map_err(|e| corrupt(&path, e))?);
        }
        self.write_derived_all(&project)?;
        Ok(project)
    }

    /// Writes every file of a new or replaced project.
    pub fn save_all(&self, project: &Project) -> Result<(), StoreError> {
        let mut touched = vec![Touched::Definitions, Touched::Society];
        touched.extend(project.documents.keys().cloned().map(Touched::Document));
        touched.extend(project.workspaces.keys().cloned().map(Touched::Workspace));
        self.save(project, &touched)
    }

    /// Rewrites the files behind `touched`, definitions first so every other file only
    /// ever refers to definitions already on disk.
    pub fn save(&self, project: &Project, touched: &[Touched]) -> Result<(), StoreError> {
        let dir = self.project_dir(project.name.as_str());
        let mut touched = touched.to_vec();
        touched.sort();
        touched.dedup();
        for t in &touched {
            match t {
                Touched::Definitions => write_atomic(&dir.join(DEFINITIONS), project.definitions_text().as_bytes())?,
                Touched::Society => {
                    write_atomic(&dir.join(SOCIETY), &json_pretty(&project.society))?;
                    self.write_society_derived(project)?;
                }
                Touched::Document(id) => {
                    let base = dir.join(DOCUMENTS).join(id.as_str());
                    match project.documents.get(id) {
                        Some(snap) => {
                            write_atomic(&base.with_extension("json"), &json_pretty(snap))?;
                            self.write_document_derived(project, id)?;
                        }
                        None => {
                            for ext in ["json", "history", "trace", "notes"] {
                                remove_file(&base.with_extension(ext))?;
                            }
                        }
                    }
                }
                Touched::Workspace(id) => {
                    let base = dir.join(WORKSPACES).join(id.as_str());
                    match project.workspaces.get(id) {
                        Some(w) => {
                            write_atomic(&base.with_extension("json"), &json_pretty(w))?;
                            self.write_workspace_derived(project, id)?;
                        }
                        None => {
                            for ext in ["json", "lob", "trace", "view"] {
                                remove_file(&base.with_extension(ext))?;
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn delete(&self, name: &str) -> Result<(), StoreError> {
        let dir = self.project_dir(name);
        // The definitions file marks a project; drop it first so a crash mid-delete leaves no project.
        remove_file(&dir.join(DEFINITIONS))?;
        sync_dir(&dir)?;
        fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        sync_dir(&self.root)
    }

    fn write_derived_all(&self, project: &Project) -> Result<(), StoreError> {
        self.write_society_derived(project)?;
        for id in project.documents.keys() {
            self.write_document_derived(project, id)?;
        }
        for id in project.workspaces.keys() {
            self.write_workspace_derived(project, id)?;
        }
        Ok(())
    }

    fn write_society_derived(&self, project: &Project) -> Result<(), StoreError> {
        let dir = self.project_dir(project.name.as_str());
        let s = &project.society;
        write_atomic(&dir.join("society.lob"), project.society_text().as_bytes())?;
        write_atomic(&dir.join("calls.log"), lines(s.snapshot.calls.iter().map(|c| c.to_line())).as_bytes())?;
        write_atomic(&dir.join("society.trace"), lines(s.trace.iter().cloned()).as_bytes())
    }

    fn write_document_derived(&self, project: &Project, id: &Ident) -> Result<(), StoreError> {
        let snap = &project.documents[id];
        let base = self.project_dir(project.name.as_str()).join(DOCUMENTS).join(id.as_str());
        write_atomic(&base.with_extension("history"), lines(snap.history.iter().map(|e| e.to_line())).as_bytes())?;
        write_atomic(&base.with_extension("trace"), write_trace(&snap.trace).as_bytes())?;
        let notes = snap.annotations.iter().map(|a| serde_json::to_string(a).expect("annotations serialize"));
        write_atomic(&base.with_extension("notes"), lines(notes).as_bytes())
    }

    fn write_workspace_derived(&self, project: &Project, id: &Ident) -> Result<(), StoreError> {
        let w = &project.workspaces[id];
        let base = self.project_dir(project.name.as_str()).join(WORKSPACES).join(id.as_str());
        let snap = &w.snapshot;
        let text = print_bundle(&Bundle {
            components: snap.components.clone(),
            workspaces: vec![lob_core::bundle::WorkspaceDecl {
                name: snap.name.clone(),
                components: snap.components.iter().map(|c| c.id.clone()).collect(),
                arcs: snap.arcs.clone(),
            }],
            ..Bundle::default()
        });
        write_atomic(&base.with_extension("lob"), text.as_bytes())?;
        write_atomic(&base.with_extension("trace"), lines(w.trace.iter().cloned()).as_bytes())?;
        let view = snap.data_view.iter().map(|(viewer, rows)| format!("# {viewer} {}\n{}", plain_json(rows), export_rows(rows)));
        write_atomic(&base.with_extension("view"), lines(view).as_bytes())
    }
}

/// `<id>.json` files of a folder, by id.
fn records(dir: &Path) -> Result<Vec<(Ident, PathBuf)>, StoreError> {
    let mut out = Vec::new();
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(io_err(dir)(e)),
    };
    for entry in entries {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            if let Ok(id) = Ident::new(stem) {
                out.push((id, path));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn clean_temporaries(dir: &Path) -> Result<(), StoreError> {
    for sub in [dir.to_path_buf(), dir.join(DOCUMENTS), dir.join(WORKSPACES)] {
        let Ok(entries) = fs::read_dir(&sub) else { continue };
        for entry in entries {
            let path = entry.map_err(io_err(&sub))?.path();
            if path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with(TMP_PREFIX)) {
                remove_file(&path)?;
            }
        }
    }
    Ok(())
}
