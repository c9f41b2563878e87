//! Corpus and feature loading shared by `train` and `translate`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use mmtl_core::datastore::{attach_features, load_parallel, FeatureKind, FeatureStore, Sample};
use mmtl_core::model::ModelConfig;
use mmtl_core::textpipe::Vocabulary;
use mmtl_core::Error;

use crate::CliResult;

/// `prefix` + `suffix` (`data/train` + `.src`).
pub(crate) fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(prefix.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

/// Loads the feature files the variant needs and checks their shapes.
pub(crate) fn load_features(
    cfg: &ModelConfig,
    global: Option<&Path>,
    spatial: Option<&Path>,
) -> CliResult<(Option<FeatureStore>, Option<FeatureStore>)> {
    let v = cfg.variant;
    let g = match (v.uses_global(), global) {
        (false, _) => None,
        (true, None) => return Err(Error::Data(format!("variant {v} needs global features")).into()),
        (true, Some(p)) => {
            let fs = FeatureStore::load_expect(p, FeatureKind::Global)?;
            if fs.dims() != [cfg.global_dim] {
                return Err(Error::Data(format!(
                    "{}: dims {:?}, model expects [{}]",
                    p.display(),
                    fs.dims(),
                    cfg.global_dim
                ))
                .into());
            }
            Some(fs)
        }
    };
    let s = match (v.uses_spatial(), spatial) {
        (false, _) => None,
        (true, None) => return Err(Error::Data(format!("variant {v} needs spatial features")).into()),
        (true, Some(p)) => {
            let fs = FeatureStore::load_expect(p, FeatureKind::Spatial)?;
            if fs.dims() != [cfg.spatial_cells, cfg.spatial_dim] {
                return Err(Error::Data(format!(
                    "{}: dims {:?}, model expects [{}, {}]",
                    p.display(),
                    fs.dims(),
                    cfg.spatial_cells,
                    cfg.spatial_dim
                ))
                .into());
            }
            Some(fs)
        }
    };
    Ok((g, s))
}

/// A parallel split with whatever features the variant uses.
pub(crate) fn load_split(
    prefix: &Path,
    src_vocab: &Vocabulary,
    trg_vocab: &Vocabulary,
    cfg: &ModelConfig,
) -> CliResult<Vec<Sample>> {
    let mut samples = load_parallel(&with_suffix(prefix, ".src"), &with_suffix(prefix, ".trg"), src_vocab, trg_vocab)?;
    let (gp, sp) = (with_suffix(prefix, ".global.mmtf"), with_suffix(prefix, ".spatial.mmtf"));
    let (g, s) = load_features(cfg, Some(&gp), Some(&sp))?;
    attach_features(&mut samples, g.as_ref(), s.as_ref())?;
    Ok(samples)
}
