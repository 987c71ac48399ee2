use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{reformat_stream, write_jsonl, CorpusError, Document, InputFormat, Reformatted};

/// A file as itself; a directory as all regular, non-hidden files below it,
/// sorted by path.
pub fn list_input_files(path: &Path) -> io::Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out = Vec::new();
    let mut stack = vec![path.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir)? {
            let entry = entry?;
            if entry.file_name().to_string_lossy().starts_with('.') {
                continue;
            }
            let ty = entry.file_type()?;
            if ty.is_dir() {
                stack.push(entry.path());
            } else if ty.is_file() {
                out.push(entry.path());
            }
        }
    }
    out.sort();
    Ok(out)
}

fn source_name(root: &Path, file: &Path) -> String {
    let rel = file.strip_prefix(root).ok().filter(|r| !r.as_os_str().is_empty());
    let rel = rel.unwrap_or_else(|| Path::new(file.file_name().unwrap_or(file.as_os_str())));
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

/// Read every input file in order. Each file's documents get the file's
/// path relative to `path` as their source.
pub fn read_corpus(path: &Path, format: InputFormat, strict: bool) -> Result<Reformatted, CorpusError> {
    let mut out = Reformatted::default();
    for file in list_input_files(path)? {
        let r = reformat_stream(fs::File::open(&file)?, format, &source_name(path, &file), strict)?;
        out.documents.extend(r.documents);
        out.errors.extend(r.errors);
    }
    Ok(out)
}

/// Read JSONL documents, skipping bad records.
pub fn read_documents(path: &Path) -> Result<Vec<Document>, CorpusError> {
    Ok(read_corpus(path, InputFormat::Jsonl, false)?.documents)
}

pub fn write_jsonl_file(path: &Path, docs: &[Document]) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_jsonl(&mut w, docs)?;
    w.flush()
}
