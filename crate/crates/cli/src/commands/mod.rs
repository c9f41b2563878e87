mod data;
pub mod evaluate;
pub mod inspect;
pub mod synth;
pub mod text;
pub mod train;
pub mod translate;

use std::fs;
use std::path::Path;

use mmtl_core::datastore::read_lines;
use mmtl_core::textpipe::bpe_undo;
use mmtl_core::Error;

use crate::CliResult;

pub(crate) fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    Ok(())
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult {
    fs::write(path, contents).map_err(|e| Error::Io { path: path.into(), source: e })?;
    Ok(())
}

pub(crate) fn copy_file(from: &Path, to: &Path) -> CliResult {
    fs::copy(from, to).map_err(|e| Error::Io { path: from.into(), source: e })?;
    Ok(())
}

pub(crate) fn tokenized_lines(path: &Path) -> CliResult<Vec<Vec<String>>> {
    Ok(read_lines(path)?.iter().map(|l| l.split_whitespace().map(String::from).collect()).collect())
}

/// Word-level sentences: subword markers are joined back.
pub(crate) fn word_lines(path: &Path) -> CliResult<Vec<Vec<String>>> {
    Ok(tokenized_lines(path)?.iter().map(|l| bpe_undo(l)).collect())
}

pub(crate) fn join_lines(lines: &[Vec<String>]) -> String {
    lines.iter().map(|l| l.join(" ") + "\n").collect()
}
