//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::stats::{Fidelity, SceneModel, SensorModel};

struct Key {
    name: &'static str,
    default: Option<&'static str>,
    help: &'static str,
}

const fn key(name: &'static str, default: Option<&'static str>, help: &'static str) -> Key {
    Key {
        name,
        default,
        help,
    }
}

// "auto" defaults are resolved from other keys
const KEYS: &[Key] = &[
    key("mu", None, "mean photons per mode"),
    key("r_coh", None, "coherence radius, um"),
    key("eta_i", None, "idler-arm detection efficiency"),
    key("eta_s", None, "signal-arm detection efficiency"),
    key("beta", Some("0.5"), "border-mode collection efficiency"),
    key("offset_x", Some("0"), "center-of-symmetry offset x, um"),
    key("offset_y", Some("0"), "center-of-symmetry offset y, um"),
    key("read_noise", Some("0"), "read noise std per readout, e-"),
    key(
        "stray",
        Some("0"),
        "stray light mean per physical pixel, e-",
    ),
    key("fidelity", Some("point"), "point | spread"),
    key(
        "noise_after_binning",
        Some("true"),
        "one read per super-pixel",
    ),
    key("width", None, "sensor width, physical pixels"),
    key("height", None, "sensor height, physical pixels"),
    key("pixel_pitch", Some("20"), "physical pixel size, um"),
    key("bin_factor", Some("1"), "hardware binning side"),
    key(
        "cs_x",
        Some("auto"),
        "center of symmetry x, physical pixels",
    ),
    key(
        "cs_y",
        Some("auto"),
        "center of symmetry y, physical pixels",
    ),
    key(
        "arm_x",
        Some("auto"),
        "idler region center x, physical pixels",
    ),
    key(
        "arm_y",
        Some("auto"),
        "idler region center y, physical pixels",
    ),
    key("seed", Some("1"), "master seed"),
    key("frames", None, "frames per store"),
    key(
        "background_frames",
        Some("auto"),
        "frames in the background store",
    ),
    key(
        "l_list",
        Some(""),
        "region sizes, super-pixels, comma separated",
    ),
    key("bootstrap", Some("1000"), "bootstrap replicates"),
    key("u_d", Some("0"), "uncertainty of the offset, um"),
    key("u_r", Some("0"), "uncertainty of the coherence radius, um"),
    key("max_shift", Some("6"), "correlation map half-range, pixels"),
    key(
        "coherence_size",
        Some("24"),
        "correlation base region side, pixels",
    ),
    key("scan_step", Some("10"), "centering scan step, um"),
    key("scan_steps", Some("11"), "positions per centering pass"),
    key("scan_frames", Some("500"), "frames per scan position"),
    key(
        "scan_passes",
        Some("3"),
        "centering passes, each re-centered on the last vertex",
    ),
];

/// Centering-scan settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSettings {
    pub step: f64,
    pub steps: usize,
    pub frames: usize,
    pub passes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scene: SceneModel,
    pub sensor: SensorModel,
    pub seed: u64,
    pub frames: usize,
    pub background_frames: usize,
    /// Idler region center, physical pixels.
    pub arm_center_px: [f64; 2],
    /// Region sizes in readout pixels.
    pub l_list: Vec<usize>,
    pub bootstrap: usize,
    pub u_d: f64,
    pub u_r: f64,
    pub max_shift: usize,
    pub coherence_size: usize,
    pub scan: ScanSettings,
    resolved: BTreeMap<&'static str, String>,
}

fn parse_value<T: FromStr>(map: &BTreeMap<&'static str, String>, name: &'static str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = &map[name];
    raw.parse()
        .map_err(|e| Error::Config(format!("key `{name}`: cannot parse `{raw}`: {e}")))
}

fn parse_bool(map: &BTreeMap<&'static str, String>, name: &'static str) -> Result<bool> {
    match map[name].to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        v => Err(Error::Config(format!(
            "key `{name}`: expected true/false, got `{v}`"
        ))),
    }
}

/// Splits `text` into `key = value` pairs, skipping blanks and `#` comments.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string(), no + 1));
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_extra(text, &[]).map(|(c, _)| c)
    }

    /// Like [`ExperimentConfig::parse`], also accepting the keys in `extra`,
    /// which are returned separately.
    pub fn parse_with_extra(
        text: &str,
        extra: &[&str],
    ) -> Result<(Self, BTreeMap<String, String>)> {
        let mut map: BTreeMap<&'static str, String> = BTreeMap::new();
        let mut others = BTreeMap::new();
        for (k, v, line) in parse_pairs(text)? {
            if extra.contains(&k.as_str()) {
                others.insert(k, v);
                continue;
            }
            let spec = KEYS
                .iter()
                .find(|s| s.name == k)
                .ok_or_else(|| Error::Config(format!("line {line}: unknown key `{k}`")))?;
            if map.insert(spec.name, v).is_some() {
                return Err(Error::Config(format!("line {line}: duplicate key `{k}`")));
            }
        }
        for s in KEYS {
            if !map.contains_key(s.name) {
                match s.default {
                    Some(d) => {
                        map.insert(s.name, d.to_string());
                    }
                    None => {
                        return Err(Error::Config(format!(
                            "missing required key `{}` ({})",
                            s.name, s.help
                        )))
                    }
                }
            }
        }
        Self::from_map(map).map(|c| (c, others))
    }

    fn from_map(mut map: BTreeMap<&'static str, String>) -> Result<Self> {
        let width: usize = parse_value(&map, "width")?;
        let height: usize = parse_value(&map, "height")?;
        let resolve = |map: &mut BTreeMap<&'static str, String>, k: &'static str, v: String| {
            if map[k] == "auto" {
                map.insert(k, v);
            }
        };
        resolve(&mut map, "cs_x", format!("{}", width as f64 / 2.0));
        resolve(&mut map, "cs_y", format!("{}", height as f64 / 2.0));
        let cs = [
            parse_value::<f64>(&map, "cs_x")?,
            parse_value::<f64>(&map, "cs_y")?,
        ];
        resolve(&mut map, "arm_x", format!("{}", cs[0] / 2.0));
        resolve(&mut map, "arm_y", format!("{}", cs[1]));
        let frames_raw = map["frames"].clone();
        resolve(&mut map, "background_frames", frames_raw);

        let fidelity = Fidelity::from_str(&map["fidelity"])
            .map_err(|e| Error::Config(format!("key `fidelity`: {e}")))?;
        let scene = SceneModel::new(
            parse_value(&map, "mu")?,
            parse_value(&map, "r_coh")?,
            parse_value(&map, "eta_i")?,
            parse_value(&map, "eta_s")?,
        )?
        .with_beta(parse_value(&map, "beta")?)?
        .with_offset([
            parse_value(&map, "offset_x")?,
            parse_value(&map, "offset_y")?,
        ])?
        .with_read_noise(parse_value(&map, "read_noise")?)?
        .with_stray(parse_value(&map, "stray")?)?
        .with_fidelity(fidelity)
        .with_noise_after_binning(parse_bool(&map, "noise_after_binning")?);
        let sensor = SensorModel::new(
            width,
            height,
            parse_value(&map, "pixel_pitch")?,
            parse_value(&map, "bin_factor")?,
            cs,
        )?;

        let l_list = map["l_list"]
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|e| Error::Config(format!("key `l_list`: `{s}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if l_list.windows(2).any(|w| w[1] <= w[0]) || l_list.contains(&0) {
            return Err(Error::Config(
                "key `l_list`: sizes must be positive and strictly increasing".into(),
            ));
        }
        let frames: usize = parse_value(&map, "frames")?;
        let background_frames: usize = parse_value(&map, "background_frames")?;
        if frames < 2 || background_frames < 2 {
            return Err(Error::Config("frame counts must be at least 2".into()));
        }
        let bootstrap: usize = parse_value(&map, "bootstrap")?;
        if bootstrap < 100 {
            return Err(Error::Config(format!(
                "key `bootstrap`: need at least 100 replicates, got {bootstrap}"
            )));
        }
        let u_d: f64 = parse_value(&map, "u_d")?;
        let u_r: f64 = parse_value(&map, "u_r")?;
        if !(u_d >= 0.0 && u_r >= 0.0 && u_d.is_finite() && u_r.is_finite()) {
            return Err(Error::Config(
                "uncertainties u_d, u_r must be finite and >= 0".into(),
            ));
        }
        let scan = ScanSettings {
            step: parse_value(&map, "scan_step")?,
            steps: parse_value(&map, "scan_steps")?,
            frames: parse_value(&map, "scan_frames")?,
            passes: parse_value(&map, "scan_passes")?,
        };
        if !(scan.step > 0.0 && scan.step.is_finite())
            || scan.steps < 3
            || scan.frames < 2
            || scan.passes < 1
        {
            return Err(Error::Config(
                "scan needs step > 0, at least 3 steps, 2 frames per step and 1 pass".into(),
            ));
        }
        Ok(ExperimentConfig {
            scene,
            sensor,
            seed: parse_value(&map, "seed")?,
            frames,
            background_frames,
            arm_center_px: [parse_value(&map, "arm_x")?, parse_value(&map, "arm_y")?],
            l_list,
            bootstrap,
            u_d,
            u_r,
            max_shift: parse_value(&map, "max_shift")?,
            coherence_size: parse_value(&map, "coherence_size")?,
            scan,
            resolved: map,
        })
    }

    /// Idler region center in μm.
    pub fn arm_center_um(&self) -> [f64; 2] {
        let p = self.sensor.pixel_pitch();
        [self.arm_center_px[0] * p, self.arm_center_px[1] * p]
    }

    /// Fully resolved configuration, one sorted `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.resolved {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// The same configuration with some keys replaced.
    pub fn with_overrides(&self, overrides: &[(&str, String)]) -> Result<Self> {
        let mut text = String::new();
        for (k, v) in &self.resolved {
            let v = overrides
                .iter()
                .find(|(o, _)| o == k)
                .map(|(_, v)| v.as_str())
                .unwrap_or(v);
            let _ = writeln!(text, "{k} = {v}");
        }
        for (k, v) in overrides {
            if !self.resolved.contains_key(k) {
                let _ = writeln!(text, "{k} = {v}");
            }
        }
        Self::parse(&text)
    }

    /// Documentation of every key, for `--help`-style listings.
    pub fn key_reference() -> String {
        let mut s = String::new();
        for k in KEYS {
            let d = k
                .default
                .map(|d| format!(" (default {d:?})"))
                .unwrap_or_default();
            let _ = writeln!(s, "{:<20} {}{}", k.name, k.help, d);
        }
        s
    }
}
