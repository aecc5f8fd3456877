//! Plumbing shared by the command-line binary: layered-config assembly,
//! dot-path overrides, thread-count resolution, and file digests.
//!
//! Every command builds its config the same way — struct defaults, then
//! an optional JSON file, then `key=value` overrides — and the final
//! deserialization is strict, so an unknown key from any layer fails
//! before any work starts.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Deep-merges `patch` onto `base`: objects merge key by key, everything
/// else is replaced.
pub fn merge_json(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies one `dot.path=value` override. The value is parsed as JSON
/// when it looks like JSON (numbers, booleans, arrays) and kept as a
/// string otherwise, so `arch=learnable` and `lr0=0.001` both read
/// naturally. Intermediate objects are created as needed; a typo in the
/// path survives to deserialization, where strict field checking
/// rejects it.
pub fn apply_override(config: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| {
        Error::Config(format!("override '{spec}' is not of the form key=value"))
    })?;
    if path.is_empty() {
        return Err(Error::Config(format!("override '{spec}' has an empty key")));
    }
    let value: Value = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
    let mut slot = config;
    let mut parts = path.split('.').peekable();
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(Error::Config(format!(
                "override '{spec}' has an empty path segment"
            )));
        }
        if !slot.is_object() {
            *slot = Value::Object(Default::default());
        }
        let map = slot.as_object_mut().expect("just ensured object");
        if parts.peek().is_none() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        slot = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split always yields at least one part");
}

/// Builds a config of type `T`: its `Default`, overlaid with the JSON
/// file at `file` (if given), overlaid with each `key=value` override,
/// in that order. The final strict deserialization rejects unknown keys
/// with the offending path in the message.
pub fn layered_config<T>(file: Option<&Path>, overrides: &[String]) -> Result<T>
where
    T: Default + Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(T::default())
        .map_err(|e| Error::Format(format!("config defaults: {e}")))?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let patch: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if !patch.is_object() {
            return Err(Error::Format(format!(
                "{}: config file must hold a JSON object",
                path.display()
            )));
        }
        merge_json(&mut value, patch);
    }
    for spec in overrides {
        apply_override(&mut value, spec)?;
    }
    serde_json::from_value(value).map_err(|e| Error::Config(format!("config: {e}")))
}

/// Worker count: explicit flag, else `LNOP_THREADS`, else the hardware.
pub fn resolve_threads(flag: Option<usize>) -> Result<usize> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var("LNOP_THREADS") {
            Ok(text) => text.parse().map_err(|_| {
                Error::Config(format!("LNOP_THREADS must be a positive integer, got '{text}'"))
            })?,
            Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        },
    };
    if n == 0 {
        return Err(Error::Config("thread count must be at least 1".into()));
    }
    Ok(n)
}

/// Hex SHA-256 of a file's bytes; the content digest printed after
/// generation so reruns can be compared at a glance.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Parses a resolution list like `64,128` (rank 1) or `32x32,64x64`
/// (explicit per-axis extents), broadcasting bare numbers to `rank`.
pub fn parse_resolutions(text: &str, rank: usize) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err(Error::Config(format!("empty entry in resolution list '{text}'")));
        }
        let parts: Vec<&str> = item.split('x').collect();
        let extents: Vec<usize> = parts
            .iter()
            .map(|p| {
                p.parse::<usize>().map_err(|_| {
                    Error::Config(format!("bad resolution '{item}' in '{text}'"))
                })
            })
            .collect::<Result<_>>()?;
        let extents = if extents.len() == 1 {
            vec![extents[0]; rank]
        } else if extents.len() == rank {
            extents
        } else {
            return Err(Error::Config(format!(
                "resolution '{item}' has {} axes, grid has {rank}",
                extents.len()
            )));
        };
        if extents.contains(&0) {
            return Err(Error::Config(format!("resolution '{item}' contains zero")));
        }
        out.push(extents);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::TrainConfig;

    #[test]
    fn overrides_nest_and_parse_json() {
        let mut v = serde_json::json!({"adam": {"beta1": 0.9}, "lr0": 1e-3});
        apply_override(&mut v, "adam.beta1=0.95").unwrap();
        apply_override(&mut v, "arch=fourier").unwrap();
        apply_override(&mut v, "modes=[8,8]").unwrap();
        assert_eq!(v["adam"]["beta1"], serde_json::json!(0.95));
        assert_eq!(v["arch"], serde_json::json!("fourier"));
        assert_eq!(v["modes"], serde_json::json!([8, 8]));
        assert!(apply_override(&mut v, "no-equals").is_err());
    }

    #[test]
    fn layering_order_is_defaults_file_flags() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("cfg.json");
        std::fs::write(&file, r#"{"lr0": 0.01, "epochs": 7}"#).unwrap();
        let cfg: TrainConfig =
            layered_config(Some(&file), &["lr0=0.5".into()]).unwrap();
        assert_eq!(cfg.lr0, 0.5); // flag beats file
        assert_eq!(cfg.epochs, 7); // file beats default
        assert_eq!(cfg.blocks, 4); // default survives
    }

    #[test]
    fn unknown_keys_are_rejected_with_exit_one() {
        let err = layered_config::<TrainConfig>(None, &["lr_zero=0.1".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("lr_zero"), "{err}");
    }

    #[test]
    fn resolution_lists_parse_both_forms() {
        assert_eq!(
            parse_resolutions("64,128", 1).unwrap(),
            vec![vec![64], vec![128]]
        );
        assert_eq!(
            parse_resolutions("32, 64x32", 2).unwrap(),
            vec![vec![32, 32], vec![64, 32]]
        );
        assert!(parse_resolutions("32x32", 3).is_err());
        assert!(parse_resolutions("0", 1).is_err());
        assert!(parse_resolutions("a", 1).is_err());
    }

    #[test]
    fn digests_match_for_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.bin");
        let b = dir.path().join("b.bin");
        std::fs::write(&a, b"same").unwrap();
        std::fs::write(&b, b"same").unwrap();
        assert_eq!(sha256_file(&a).unwrap(), sha256_file(&b).unwrap());
        std::fs::write(&b, b"diff").unwrap();
        assert_ne!(sha256_file(&a).unwrap(), sha256_file(&b).unwrap());
    }
}
