use crate::verilog::{parse, SourceText};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Eligible,
    Clean,
}

impl Class {
    pub fn dir(self) -> &'static str {
        match self {
            Class::Eligible => "eligible",
            Class::Clean => "clean",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    /// Path relative to the corpus root, with `/` separators.
    pub name: String,
    pub class: Class,
    pub top: String,
    pub source: SourceText,
}

#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
}

impl Corpus {
    pub fn of(&self, class: Class) -> impl Iterator<Item = &CorpusEntry> {
        self.entries.iter().filter(move |e| e.class == class)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}: bad manifest: {1}")]
    Manifest(PathBuf, String),
    #[error("{0}: neither `eligible/` nor `clean/` found")]
    Layout(PathBuf),
}

#[derive(Deserialize, Default)]
struct ManifestFile {
    #[serde(default)]
    module: Vec<ManifestModule>,
}

#[derive(Deserialize)]
struct ManifestModule {
    path: String,
    top: String,
}

/// Top module of a source: the last module no other module instantiates.
pub fn infer_top(source: &SourceText) -> Option<String> {
    let ast = parse(source).ok()?;
    let used: Vec<&str> = ast
        .modules
        .iter()
        .flat_map(|m| m.items.iter())
        .filter_map(|i| match &i.kind {
            crate::verilog::ItemKind::Instance(inst) => Some(inst.module.name.as_str()),
            _ => None,
        })
        .collect();
    ast.modules.iter().rev().find(|m| !used.contains(&m.name.name.as_str())).map(|m| m.name.name.clone())
}

fn read(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Load `eligible/*.v` and `clean/*.v` under `root`, sorted by name. Top
/// modules come from `manifest.toml` when listed there.
pub fn load_corpus(root: &Path) -> Result<Corpus, CorpusError> {
    let manifest_path = root.join(MANIFEST_FILE);
    let tops: BTreeMap<String, String> = if manifest_path.is_file() {
        let m: ManifestFile = toml::from_str(&read(&manifest_path)?).map_err(|e| CorpusError::Manifest(manifest_path.clone(), e.to_string()))?;
        m.module.into_iter().map(|e| (e.path, e.top)).collect()
    } else {
        BTreeMap::new()
    };
    let mut entries = Vec::new();
    let mut any = false;
    for class in [Class::Eligible, Class::Clean] {
        let dir = root.join(class.dir());
        if !dir.is_dir() {
            continue;
        }
        any = true;
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|source| CorpusError::Io { path: dir.clone(), source })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "v"))
            .collect();
        files.sort();
        for f in files {
            let name = format!("{}/{}", class.dir(), f.file_name().unwrap_or_default().to_string_lossy());
            let source = SourceText::new(read(&f)?, name.clone());
            let top = tops.get(&name).cloned().or_else(|| infer_top(&source)).unwrap_or_default();
            entries.push(CorpusEntry { name, class, top, source });
        }
    }
    if !any {
        return Err(CorpusError::Layout(root.to_path_buf()));
    }
    Ok(Corpus { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("eligible")).unwrap();
        std::fs::create_dir(dir.path().join("clean")).unwrap();
        std::fs::write(dir.path().join("eligible/b.v"), "module leaf(input a, output y); assign y = a; endmodule\nmodule top(input a, output y); leaf u(.a(a), .y(y)); endmodule\n").unwrap();
        std::fs::write(dir.path().join("eligible/a.v"), "module a(input x, output y); assign y = x; endmodule\n").unwrap();
        std::fs::write(dir.path().join("clean/c.v"), "module c(input x, output y); assign y = ~x; endmodule\n").unwrap();
        std::fs::write(dir.path().join("clean/notes.txt"), "ignored").unwrap();
        std::fs::write(dir.path().join(MANIFEST_FILE), "[[module]]\npath = \"eligible/a.v\"\ntop = \"named\"\n").unwrap();
        let c = load_corpus(dir.path()).unwrap();
        let names: Vec<_> = c.entries.iter().map(|e| (e.name.as_str(), e.top.as_str())).collect();
        assert_eq!(names, vec![("eligible/a.v", "named"), ("eligible/b.v", "top"), ("clean/c.v", "c")]);
        assert_eq!(c.of(Class::Clean).count(), 1);
        assert!(matches!(load_corpus(&dir.path().join("eligible")), Err(CorpusError::Layout(_))));
    }
}
