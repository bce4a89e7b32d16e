//! On-disk scene convention: one directory per scene, holding exactly one of
//!
//! * four analyzer images `I000/I045/I090/I135.pfm`,
//! * property maps `s0/aolp/dolp.pfm` (plus optional `valid.pgm`), or
//! * a sensor frame `mosaic.pfm`,
//!
//! alongside an optional `meta.txt` of `key=value` lines (keys: `pattern`,
//! `peak`, `bitdepth`, `seed`, `gray_weights`).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use polar_core::error::{Error, Result};
use polar_core::image::{Mask, Plane};
use polar_core::mosaic::{demosaic, BitDepth, MosaicFrame, MosaicPattern};
use polar_core::stokes::{synthesize_stack, wrap_aolp, PolarStateMap, PolarizationStack};

use crate::io::pfm::{read_pfm, write_pfm, PfmImage};
use crate::io::pnm::{read_pnm, write_pnm, PnmImage, PnmKind};

pub const ANGLE_FILES: [&str; 4] = ["I000.pfm", "I045.pfm", "I090.pfm", "I135.pfm"];
pub const MAP_FILES: [&str; 3] = ["s0.pfm", "aolp.pfm", "dolp.pfm"];
pub const VALID_FILE: &str = "valid.pgm";
pub const MOSAIC_FILE: &str = "mosaic.pfm";
pub const META_FILE: &str = "meta.txt";

/// Which of the three recognized file sets a scene directory holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneLayout {
    AngleImages,
    PropertyMaps,
    Mosaic,
}

impl fmt::Display for SceneLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::AngleImages => "angle-images",
            Self::PropertyMaps => "property-maps",
            Self::Mosaic => "mosaic",
        })
    }
}

/// Validated `meta.txt` contents; every key is optional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneMeta {
    pub pattern: Option<MosaicPattern>,
    pub peak: Option<f64>,
    pub bitdepth: Option<BitDepth>,
    pub seed: Option<u64>,
    pub gray_weights: Option<[f64; 3]>,
}

impl SceneMeta {
    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Io(format!("meta.txt line {}: expected key=value", lineno + 1))
            })?;
            let bad = |what: &str| {
                Error::Io(format!("meta.txt line {}: {what} {value:?}", lineno + 1))
            };
            match key.trim() {
                "pattern" => {
                    meta.pattern =
                        Some(MosaicPattern::from_str(value).map_err(|_| bad("bad pattern"))?);
                }
                "peak" => {
                    let peak: f64 = value.trim().parse().map_err(|_| bad("bad peak"))?;
                    if !(peak > 0.0 && peak.is_finite()) {
                        return Err(bad("peak must be positive, got"));
                    }
                    meta.peak = Some(peak);
                }
                "bitdepth" => {
                    meta.bitdepth =
                        Some(BitDepth::from_str(value.trim()).map_err(|_| bad("bad bitdepth"))?);
                }
                "seed" => {
                    meta.seed = Some(value.trim().parse().map_err(|_| bad("bad seed"))?);
                }
                "gray_weights" => {
                    let parts: Vec<f64> = value
                        .split(',')
                        .map(|p| p.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("bad gray_weights"))?;
                    let w: [f64; 3] =
                        parts.try_into().map_err(|_| bad("gray_weights needs three values,"))?;
                    meta.gray_weights = Some(w);
                }
                other => {
                    return Err(Error::Io(format!(
                        "meta.txt line {}: unknown key {other:?}",
                        lineno + 1
                    )));
                }
            }
        }
        Ok(meta)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(p) = self.pattern {
            out.push_str(&format!("pattern={p}\n"));
        }
        if let Some(p) = self.peak {
            out.push_str(&format!("peak={p}\n"));
        }
        if let Some(b) = self.bitdepth {
            let label = match b.bits() {
                Some(bits) => bits.to_string(),
                None => "none".to_string(),
            };
            out.push_str(&format!("bitdepth={label}\n"));
        }
        if let Some(s) = self.seed {
            out.push_str(&format!("seed={s}\n"));
        }
        if let Some([r, g, b]) = self.gray_weights {
            out.push_str(&format!("gray_weights={r},{g},{b}\n"));
        }
        out
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(META_FILE);
        if !path.exists() {
            return Ok(Self::default());
        }
        let text =
            fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn store(&self, dir: &Path) -> Result<()> {
        let text = self.to_text();
        if text.is_empty() {
            return Ok(());
        }
        let path = dir.join(META_FILE);
        fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

/// An opened scene: path, detected layout, and parsed metadata.
#[derive(Debug, Clone)]
pub struct SceneDirectory {
    pub path: PathBuf,
    pub layout: SceneLayout,
    pub meta: SceneMeta,
}

impl SceneDirectory {
    pub fn open(path: &Path) -> Result<Self> {
        if !path.is_dir() {
            return Err(Error::Io(format!("scene directory {} not found", path.display())));
        }
        let has = |name: &str| path.join(name).is_file();
        let mut layouts = Vec::new();
        if ANGLE_FILES.iter().all(|f| has(f)) {
            layouts.push(SceneLayout::AngleImages);
        }
        if MAP_FILES.iter().all(|f| has(f)) {
            layouts.push(SceneLayout::PropertyMaps);
        }
        if has(MOSAIC_FILE) {
            layouts.push(SceneLayout::Mosaic);
        }
        let layout = match layouts.as_slice() {
            [one] => *one,
            [] => {
                return Err(Error::Io(format!(
                    "{} holds no recognized scene layout (angle images, property maps, or mosaic)",
                    path.display()
                )));
            }
            several => {
                return Err(Error::Precondition(format!(
                    "{} holds more than one layout ({})",
                    path.display(),
                    several.iter().map(ToString::to_string).collect::<Vec<_>>().join(" and ")
                )));
            }
        };
        Ok(Self { path: path.to_path_buf(), layout, meta: SceneMeta::load(path)? })
    }

    fn expect_layout(&self, wanted: SceneLayout) -> Result<()> {
        if self.layout != wanted {
            return Err(Error::Precondition(format!(
                "{} holds {} but this command needs {wanted}",
                self.path.display(),
                self.layout
            )));
        }
        Ok(())
    }

    /// Loads the four analyzer images (angle-image layout only).
    pub fn read_stack(&self) -> Result<PolarizationStack> {
        self.expect_layout(SceneLayout::AngleImages)?;
        let mut images = Vec::with_capacity(4);
        for name in ANGLE_FILES {
            images.push(read_pfm(&self.path.join(name))?.to_radiance()?);
        }
        let [i0, i45, i90, i135]: [_; 4] = images.try_into().expect("four files");
        PolarizationStack::new(i0, i45, i90, i135)
    }

    /// Loads the property maps (property-map layout only). A missing
    /// `valid.pgm` means every pixel is valid.
    pub fn read_state(&self) -> Result<PolarStateMap> {
        self.expect_layout(SceneLayout::PropertyMaps)?;
        let s0 = read_pfm(&self.path.join("s0.pfm"))?.to_radiance()?;
        let aolp = read_pfm(&self.path.join("aolp.pfm"))?.to_plane()?;
        // 32-bit storage can round an angle of exactly π/2 just past the
        // canonical range; re-wrap so every stored map loads.
        let aolp = Plane::new(
            aolp.width(),
            aolp.height(),
            aolp.data().iter().map(|&v| wrap_aolp(v)).collect::<Result<_>>()?,
        )?;
        let dolp = read_pfm(&self.path.join("dolp.pfm"))?.to_plane()?;
        let valid_path = self.path.join(VALID_FILE);
        let valid = if valid_path.is_file() {
            let img = read_pnm(&valid_path)?;
            if img.kind != PnmKind::Gray {
                return Err(Error::Io(format!(
                    "{}: validity mask must be grayscale",
                    valid_path.display()
                )));
            }
            Mask::new(img.width, img.height, img.samples.iter().map(|&v| v > 0).collect())?
        } else {
            Mask::filled(s0.width(), s0.height(), true)
        };
        PolarStateMap::new(s0, dolp, aolp, valid)
    }

    /// Loads the sensor frame (mosaic layout only); the pattern comes from
    /// `meta.txt` and defaults to the common commercial layout.
    pub fn read_mosaic(&self) -> Result<MosaicFrame> {
        self.expect_layout(SceneLayout::Mosaic)?;
        let img = read_pfm(&self.path.join(MOSAIC_FILE))?;
        if img.channels != 1 {
            return Err(Error::Io(format!(
                "{}: mosaic frames are single-channel",
                self.path.join(MOSAIC_FILE).display()
            )));
        }
        let pattern = self.meta.pattern.unwrap_or_default();
        MosaicFrame::new(img.width, img.height, img.data.iter().map(|&v| v as f64).collect(), pattern)
    }

    /// Produces the four analyzer images from whatever this scene holds:
    /// reading them directly, synthesizing from property maps, or
    /// demosaicing a sensor frame.
    pub fn stack(&self) -> Result<PolarizationStack> {
        match self.layout {
            SceneLayout::AngleImages => self.read_stack(),
            SceneLayout::PropertyMaps => synthesize_stack(&self.read_state()?),
            SceneLayout::Mosaic => demosaic(&self.read_mosaic()?),
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

/// Writes an angle-image scene.
pub fn write_stack(dir: &Path, stack: &PolarizationStack, meta: &SceneMeta) -> Result<()> {
    ensure_dir(dir)?;
    for (name, image) in ANGLE_FILES.iter().zip(stack.images()) {
        write_pfm(&dir.join(name), &PfmImage::from_radiance(image))?;
    }
    meta.store(dir)
}

/// Writes a property-map scene (with its validity mask).
pub fn write_state(dir: &Path, state: &PolarStateMap, meta: &SceneMeta) -> Result<()> {
    ensure_dir(dir)?;
    write_pfm(&dir.join("s0.pfm"), &PfmImage::from_radiance(&state.s0))?;
    write_pfm(&dir.join("aolp.pfm"), &PfmImage::from_plane(&state.aolp))?;
    write_pfm(&dir.join("dolp.pfm"), &PfmImage::from_plane(&state.dolp))?;
    let mask = PnmImage::new(
        PnmKind::Gray,
        state.valid.width(),
        state.valid.height(),
        255,
        state.valid.data().iter().map(|&b| if b { 255 } else { 0 }).collect(),
    )?;
    write_pnm(&dir.join(VALID_FILE), &mask)?;
    meta.store(dir)
}

/// Writes a mosaic-frame scene; the frame's pattern is recorded in the meta.
pub fn write_mosaic(dir: &Path, frame: &MosaicFrame, meta: &SceneMeta) -> Result<()> {
    ensure_dir(dir)?;
    let img = PfmImage::new(
        frame.width(),
        frame.height(),
        1,
        frame.data().iter().map(|&v| v as f32).collect(),
    )?;
    write_pfm(&dir.join(MOSAIC_FILE), &img)?;
    let mut meta = meta.clone();
    meta.pattern = Some(frame.pattern());
    meta.store(dir)
}

/// Loads a scene as a plane for mask-free single-channel use.
pub fn plane_from_pfm(path: &Path) -> Result<Plane> {
    read_pfm(path)?.to_plane()
}

#[cfg(test)]
mod tests {
    use super::*;
    use polar_core::image::RadianceImage;
    use std::f64::consts::FRAC_PI_4;
    use tempfile::tempdir;

    fn tiny_state() -> PolarStateMap {
        let s0 = RadianceImage::new(2, 2, 1, vec![0.2, 0.4, 0.6, 0.8]).unwrap();
        let dolp = Plane::new(2, 2, vec![0.0, 0.3, 0.6, 0.9]).unwrap();
        let aolp = Plane::new(2, 2, vec![0.0, FRAC_PI_4, -0.5, 1.0]).unwrap();
        let valid = Mask::new(2, 2, vec![false, true, true, true]).unwrap();
        PolarStateMap::new(s0, dolp, aolp, valid).unwrap()
    }

    #[test]
    fn meta_round_trip_with_all_keys() {
        let meta = SceneMeta {
            pattern: Some(MosaicPattern::default()),
            peak: Some(1.5),
            bitdepth: Some(BitDepth::B12),
            seed: Some(42),
            gray_weights: Some([0.299, 0.587, 0.114]),
        };
        let parsed = SceneMeta::parse(&meta.to_text()).unwrap();
        assert_eq!(parsed, meta);
        // Continuous bitdepth serializes as "none".
        let meta = SceneMeta { bitdepth: Some(BitDepth::None), ..SceneMeta::default() };
        assert_eq!(meta.to_text(), "bitdepth=none\n");
        assert_eq!(SceneMeta::parse(&meta.to_text()).unwrap(), meta);
    }

    #[test]
    fn meta_rejects_unknown_keys_and_bad_values() {
        assert!(matches!(SceneMeta::parse("exposure=3\n"), Err(Error::Io(_))));
        assert!(matches!(SceneMeta::parse("no equals sign"), Err(Error::Io(_))));
        assert!(matches!(SceneMeta::parse("peak=-1\n"), Err(Error::Io(_))));
        assert!(matches!(SceneMeta::parse("pattern=90,45,135\n"), Err(Error::Io(_))));
        assert!(matches!(SceneMeta::parse("gray_weights=1,2\n"), Err(Error::Io(_))));
    }

    #[test]
    fn state_round_trip_through_files() {
        let dir = tempdir().unwrap();
        let state = tiny_state();
        write_state(dir.path(), &state, &SceneMeta::default()).unwrap();
        let scene = SceneDirectory::open(dir.path()).unwrap();
        assert_eq!(scene.layout, SceneLayout::PropertyMaps);
        let back = scene.read_state().unwrap();
        assert_eq!(back.valid.data(), state.valid.data());
        for (a, b) in back.aolp.data().iter().zip(state.aolp.data()) {
            assert!((a - b).abs() < 1e-6, "32-bit storage round trip");
        }
        for (a, b) in back.dolp.data().iter().zip(state.dolp.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn stack_round_trip_and_layout_detection() {
        let dir = tempdir().unwrap();
        let stack = synthesize_stack(&tiny_state()).unwrap();
        write_stack(dir.path(), &stack, &SceneMeta::default()).unwrap();
        let scene = SceneDirectory::open(dir.path()).unwrap();
        assert_eq!(scene.layout, SceneLayout::AngleImages);
        let back = scene.read_stack().unwrap();
        for (a, b) in back.images().iter().zip(stack.images()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() < 1e-6);
            }
        }
        // The wrong-layout readers refuse.
        assert!(scene.read_state().is_err());
        assert!(scene.read_mosaic().is_err());
    }

    #[test]
    fn mosaic_round_trip_keeps_pattern() {
        let dir = tempdir().unwrap();
        let pattern = MosaicPattern::from_str("0,45,90,135").unwrap();
        let frame = MosaicFrame::new(2, 2, vec![0.1, 0.2, 0.3, 0.4], pattern).unwrap();
        write_mosaic(dir.path(), &frame, &SceneMeta::default()).unwrap();
        let scene = SceneDirectory::open(dir.path()).unwrap();
        assert_eq!(scene.layout, SceneLayout::Mosaic);
        let back = scene.read_mosaic().unwrap();
        assert_eq!(back.pattern(), pattern);
        for (a, b) in back.data().iter().zip(frame.data()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn empty_and_ambiguous_directories_are_rejected() {
        let dir = tempdir().unwrap();
        assert!(matches!(SceneDirectory::open(dir.path()), Err(Error::Io(_))));
        assert!(matches!(
            SceneDirectory::open(&dir.path().join("missing")),
            Err(Error::Io(_))
        ));

        // Both property maps and a mosaic present: ambiguous.
        write_state(dir.path(), &tiny_state(), &SceneMeta::default()).unwrap();
        let frame =
            MosaicFrame::new(2, 2, vec![0.0; 4], MosaicPattern::default()).unwrap();
        write_mosaic(dir.path(), &frame, &SceneMeta::default()).unwrap();
        assert!(matches!(SceneDirectory::open(dir.path()), Err(Error::Precondition(_))));
    }

    #[test]
    fn aolp_at_the_range_edge_survives_storage() {
        // π/2 rounds UP in 32-bit storage, just past the canonical range;
        // loading must re-wrap it instead of rejecting the file.
        let dir = tempdir().unwrap();
        let s0 = RadianceImage::new(1, 1, 1, vec![0.5]).unwrap();
        let dolp = Plane::new(1, 1, vec![0.7]).unwrap();
        let aolp = Plane::new(1, 1, vec![std::f64::consts::FRAC_PI_2]).unwrap();
        let valid = Mask::filled(1, 1, true);
        let state = PolarStateMap::new(s0, dolp, aolp, valid).unwrap();
        write_state(dir.path(), &state, &SceneMeta::default()).unwrap();
        let back = SceneDirectory::open(dir.path()).unwrap().read_state().unwrap();
        let phi = back.aolp.get(0, 0);
        // Same angle modulo π, to storage precision.
        assert!((phi.abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
    }

    #[test]
    fn missing_validity_mask_defaults_to_all_valid() {
        let dir = tempdir().unwrap();
        write_state(dir.path(), &tiny_state(), &SceneMeta::default()).unwrap();
        fs::remove_file(dir.path().join(VALID_FILE)).unwrap();
        // The stored AoLP at the now-valid pixel 0 is 0.0, inside range.
        let back = SceneDirectory::open(dir.path()).unwrap().read_state().unwrap();
        assert_eq!(back.valid.count(), 4);
    }
}
