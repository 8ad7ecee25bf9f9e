//! `CVCK1` checkpoints.
//!
//! ```text
//! CVCK1
//! <config key>=<value>      (every TrainConfig key)
//! iter=<completed iterations>
//! rng_state=<seed>:<stream>:<word position>
//! adam_steps=<count>
//! <blank line>
//! <name> <rows> <cols>\n  followed by rows·cols little-endian f64
//! ...                      (parameters, then `<name>.m1`, then `<name>.m2`)
//! ```

use std::collections::HashMap;
use std::path::Path;

use super::TrainState;
use crate::config::{TrainConfig, CONFIG_KEYS};
use crate::data::format::split_header;
use crate::neural::{AdamState, Matrix, MlpParams};
use crate::{Error, Prng, Result};

pub const CHECKPOINT_MAGIC: &str = "CVCK";
pub const CHECKPOINT_VERSION: u32 = 1;

fn write_array(buf: &mut Vec<u8>, name: &str, m: &Matrix) {
    buf.extend_from_slice(format!("{name} {} {}\n", m.rows(), m.cols()).as_bytes());
    for v in m.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn save_checkpoint(state: &TrainState, config: &TrainConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut header = format!("{CHECKPOINT_MAGIC}{CHECKPOINT_VERSION}\n");
    header.push_str(&config.to_string());
    header.push_str(&format!(
        "iter={}\nrng_state={}\nadam_steps={}\n\n",
        state.iter,
        state.rng.state(),
        state.adam.step_count
    ));
    let mut buf = header.into_bytes();
    let names = state.params.array_names();
    for (name, m) in names.iter().zip(state.params.arrays()) {
        write_array(&mut buf, name, m);
    }
    for (name, m) in names.iter().zip(state.adam.first_moment.arrays()) {
        write_array(&mut buf, &format!("{name}.m1"), m);
    }
    for (name, m) in names.iter().zip(state.adam.second_moment.arrays()) {
        write_array(&mut buf, &format!("{name}.m2"), m);
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn check_version(bytes: &[u8], path: &Path) -> Result<()> {
    let first = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    let first = String::from_utf8_lossy(&first[..first.len().min(16)]).into_owned();
    match first.strip_prefix(CHECKPOINT_MAGIC) {
        Some(v) if v == CHECKPOINT_VERSION.to_string() => Ok(()),
        Some(v) if !v.is_empty() && v.bytes().all(|b| b.is_ascii_digit()) => Err(Error::format(
            path,
            format!("checkpoint version {v} is not supported (this build reads version {CHECKPOINT_VERSION})"),
        )),
        _ => Err(Error::format(
            path,
            format!("bad magic {first:?}, expected \"{CHECKPOINT_MAGIC}{CHECKPOINT_VERSION}\""),
        )),
    }
}

/// Reads `name rows cols` arrays until the payload is exhausted.
fn read_arrays(mut payload: &[u8], path: &Path) -> Result<HashMap<String, Matrix>> {
    let mut out = HashMap::new();
    while !payload.is_empty() {
        let end = payload
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format(path, "truncated array header"))?;
        let line = std::str::from_utf8(&payload[..end]).map_err(|_| Error::format(path, "array header is not UTF-8"))?;
        let parts: Vec<&str> = line.split(' ').collect();
        let [name, rows, cols] = parts[..] else {
            return Err(Error::format(path, format!("malformed array header {line:?}")));
        };
        let dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::format(path, format!("bad dimension {s:?} for array {name}")))
        };
        let (rows, cols) = (dim(rows)?, dim(cols)?);
        payload = &payload[end + 1..];
        let bytes = rows
            .checked_mul(cols)
            .and_then(|c| c.checked_mul(8))
            .filter(|&b| b <= payload.len())
            .ok_or_else(|| Error::format(path, format!("array {name} is truncated")))?;
        let data = payload[..bytes]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        payload = &payload[bytes..];
        let m = Matrix::from_vec(rows, cols, data).map_err(|e| Error::format(path, format!("array {name}: {e}")))?;
        if out.insert(name.to_string(), m).is_some() {
            return Err(Error::format(path, format!("duplicate array {name}")));
        }
    }
    Ok(out)
}

fn fill(target: &mut MlpParams, arrays: &mut HashMap<String, Matrix>, suffix: &str, path: &Path) -> Result<()> {
    let names = target.array_names();
    for (name, slot) in names.iter().zip(target.arrays_mut()) {
        let key = format!("{name}{suffix}");
        let m = arrays
            .remove(&key)
            .ok_or_else(|| Error::format(path, format!("missing array {key}")))?;
        if m.shape() != slot.shape() {
            return Err(Error::format(
                path,
                format!(
                    "array {key} is {:?} but the configured architecture needs {:?}",
                    m.shape(),
                    slot.shape()
                ),
            ));
        }
        *slot = m;
    }
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(TrainState, TrainConfig)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    check_version(&bytes, path)?;
    let (lines, payload) = split_header(&bytes, path)?;

    let mut config = TrainConfig::default();
    let mut seen = Vec::new();
    let (mut iter, mut rng_state, mut adam_steps) = (None, None, None);
    for line in &lines[1..] {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("malformed header line {line:?}")))?;
        let bad = |what: &str| Error::format(path, format!("header key {key}: bad {what} {value:?}"));
        match key {
            "iter" => iter = Some(value.parse::<u64>().map_err(|_| bad("count"))?),
            "adam_steps" => adam_steps = Some(value.parse::<u64>().map_err(|_| bad("count"))?),
            "rng_state" => rng_state = Some(value.parse().map_err(|_| bad("rng state"))?),
            _ => {
                config
                    .set(key, value)
                    .map_err(|e| Error::format(path, format!("header: {e}")))?;
                seen.push(key);
            }
        }
    }
    if let Some(missing) = CONFIG_KEYS.iter().find(|k| !seen.contains(k)) {
        return Err(Error::format(path, format!("missing header key {missing:?}")));
    }
    let missing = |k: &str| Error::format(path, format!("missing header key {k:?}"));
    let iter = iter.ok_or_else(|| missing("iter"))?;
    let rng_state = rng_state.ok_or_else(|| missing("rng_state"))?;
    let adam_steps = adam_steps.ok_or_else(|| missing("adam_steps"))?;

    let mut arrays = read_arrays(payload, path)?;
    let image_dim = arrays
        .get("enc.0.weight")
        .map(Matrix::rows)
        .ok_or_else(|| Error::format(path, "missing array enc.0.weight"))?;
    let mut params = MlpParams::zeros(&config.architecture(image_dim), config.m, config.s_card)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut adam = AdamState::new(&params);
    adam.step_count = adam_steps;
    fill(&mut params, &mut arrays, "", path)?;
    fill(&mut adam.first_moment, &mut arrays, ".m1", path)?;
    fill(&mut adam.second_moment, &mut arrays, ".m2", path)?;
    if let Some(extra) = arrays.keys().min() {
        return Err(Error::format(path, format!("unexpected array {extra}")));
    }
    Ok((
        TrainState {
            params,
            adam,
            iter,
            rng: Prng::from_state(rng_state),
        },
        config,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_dataset, FactorSpec};
    use crate::trainer::Trainer;

    fn trained() -> (TrainState, TrainConfig) {
        let data = generate_dataset(&FactorSpec {
            width: 6,
            scales: vec![0.5],
            pos_x: vec![0.4, 0.6],
            pos_y: vec![0.5],
        })
        .unwrap();
        let config = TrainConfig {
            batch_size: 4,
            t_d: 2,
            r: 2,
            m: 2,
            s_card: 2,
            hidden: vec![5],
            ..TrainConfig::default()
        };
        let mut t = Trainer::new(config.clone(), &data).unwrap();
        t.run_until(5, |_| Ok(())).unwrap();
        (t.into_state(), config)
    }

    #[test]
    fn round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cvck");
        let (state, config) = trained();
        save_checkpoint(&state, &config, &path).unwrap();
        let (back, back_cfg) = load_checkpoint(&path).unwrap();
        assert_eq!(back, state);
        assert_eq!(back_cfg, config);
        let again = dir.path().join("d.cvck");
        save_checkpoint(&back, &back_cfg, &again).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn wrong_magic_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cvck");
        std::fs::write(&path, b"NOPE\n\n").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));

        let (state, config) = trained();
        save_checkpoint(&state, &config, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = b'7';
        std::fs::write(&path, &bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err().to_string();
        assert!(err.contains('7') && err.contains('1'), "{err}");
    }

    #[test]
    fn truncation_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cvck");
        let (state, config) = trained();
        save_checkpoint(&state, &config, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        for cut in [5, 40, bytes.len() / 2, bytes.len() - 1] {
            std::fs::write(&path, &bytes[..cut]).unwrap();
            assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })), "cut {cut}");
        }
    }

    #[test]
    fn architecture_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cvck");
        let (state, config) = trained();
        let lying = TrainConfig { hidden: vec![6], ..config };
        save_checkpoint(&state, &lying, &path).unwrap();
        let err = load_checkpoint(&path).unwrap_err().to_string();
        assert!(err.contains("architecture"), "{err}");
    }
}
