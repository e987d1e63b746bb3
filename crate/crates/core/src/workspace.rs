use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("invalid workspace path `{0}`: must be relative without parent traversal")]
    InvalidPath(String),
    #[error("file not found in workspace: {0}")]
    FileNotFound(String),
    #[error("file `{0}` is not valid UTF-8 text")]
    NotText(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// An immutable snapshot of a source tree.
///
/// Paths are repo-relative with `/` separators; content is stored with LF
/// line endings. Edits produce a new value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Workspace {
    pub root: String,
    files: BTreeMap<String, String>,
}

/// Converts CRLF and lone CR line endings to LF.
pub fn normalize_line_endings(text: &str) -> String {
    if !text.contains('\r') {
        return text.to_string();
    }
    text.replace("\r\n", "\n").replace('\r', "\n")
}

/// Checks that `path` is a relative path without `..`, `.` or root components.
pub fn validate_rel_path(path: &str) -> Result<(), WorkspaceError> {
    if path.is_empty() || path.starts_with('/') || path.starts_with('\\') || path.contains('\\') {
        return Err(WorkspaceError::InvalidPath(path.to_string()));
    }
    let ok = Path::new(path)
        .components()
        .all(|c| matches!(c, Component::Normal(_)));
    if ok {
        Ok(())
    } else {
        Err(WorkspaceError::InvalidPath(path.to_string()))
    }
}

impl Workspace {
    pub fn new(root: impl Into<String>) -> Self {
        Self {
            root: root.into(),
            files: BTreeMap::new(),
        }
    }

    /// Builds a workspace from `(path, content)` pairs, normalizing line endings.
    pub fn from_files<I, P, C>(root: impl Into<String>, files: I) -> Result<Self, WorkspaceError>
    where
        I: IntoIterator<Item = (P, C)>,
        P: Into<String>,
        C: AsRef<str>,
    {
        let mut ws = Self::new(root);
        for (path, content) in files {
            let path = path.into();
            validate_rel_path(&path)?;
            ws.files.insert(path, normalize_line_endings(content.as_ref()));
        }
        Ok(ws)
    }

    /// Reads every file under `dir`. Hidden entries (`.git`, dotfiles) are skipped.
    pub fn load_dir(dir: &Path) -> Result<Self, WorkspaceError> {
        let mut files = Vec::new();
        collect_files(dir, dir, &mut files)?;
        Self::from_files(dir.display().to_string(), files)
    }

    /// Writes all files below `dir`, creating parent directories.
    pub fn write_to(&self, dir: &Path) -> Result<(), WorkspaceError> {
        for (rel, content) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|source| WorkspaceError::Io {
                    path: parent.to_path_buf(),
                    source,
                })?;
            }
            fs::write(&path, content).map_err(|source| WorkspaceError::Io { path, source })?;
        }
        Ok(())
    }

    pub fn get(&self, path: &str) -> Option<&str> {
        self.files.get(path).map(String::as_str)
    }

    pub fn read(&self, path: &str) -> Result<&str, WorkspaceError> {
        self.get(path)
            .ok_or_else(|| WorkspaceError::FileNotFound(path.to_string()))
    }

    pub fn contains(&self, path: &str) -> bool {
        self.files.contains_key(path)
    }

    pub fn files(&self) -> &BTreeMap<String, String> {
        &self.files
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    /// Returns a copy with `path` set to `content`.
    pub fn with_file(&self, path: &str, content: &str) -> Result<Self, WorkspaceError> {
        validate_rel_path(path)?;
        let mut next = self.clone();
        next.files
            .insert(path.to_string(), normalize_line_endings(content));
        Ok(next)
    }

    pub(crate) fn set_file(&mut self, path: String, content: String) {
        self.files.insert(path, content);
    }
}

fn collect_files(
    base: &Path,
    dir: &Path,
    out: &mut Vec<(String, String)>,
) -> Result<(), WorkspaceError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| WorkspaceError::Io { path, source }
    };
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(io(dir))?
        .collect::<Result<_, _>>()
        .map_err(io(dir))?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let name = entry.file_name();
        if name.to_string_lossy().starts_with('.') {
            continue;
        }
        let path = entry.path();
        let ty = entry.file_type().map_err(io(&path))?;
        if ty.is_dir() {
            collect_files(base, &path, out)?;
        } else if ty.is_file() {
            let rel = path
                .strip_prefix(base)
                .expect("entry below base")
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            let bytes = fs::read(&path).map_err(io(&path))?;
            let text = String::from_utf8(bytes).map_err(|_| WorkspaceError::NotText(rel.clone()))?;
            out.push((rel, text));
        }
    }
    Ok(())
}

/// Returns the 1-based line count, treating a trailing newline as a terminator.
pub fn line_count(text: &str) -> usize {
    text.lines().count()
}
