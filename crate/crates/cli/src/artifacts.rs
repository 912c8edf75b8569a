//! Reading and writing the on-disk bundles exchanged between subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use layerblur::pipeline::MotionFile;
use layerblur::{ImageBuffer, Scene};
use serde::Serialize;

pub const MOTIONS: &str = "motions.json";

/// Image names of a scene bundle: `{prefix}L0.png`, `{prefix}L1.png`,
/// `{prefix}A.png`.
pub struct Bundle<'a> {
    pub dir: &'a Path,
    pub prefix: &'a str,
}

impl Bundle<'_> {
    fn image(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{}{name}.png", self.prefix))
    }

    pub fn exists(&self) -> bool {
        ["L0", "L1", "A"].iter().all(|n| self.image(n).is_file()) && self.dir.join(MOTIONS).is_file()
    }

    pub fn save(&self, scene: &Scene) -> Result<()> {
        scene.background.save_png(&self.image("L0"))?;
        scene.foreground.save_png(&self.image("L1"))?;
        scene.alpha.save_png(&self.image("A"))?;
        write_json(&self.dir.join(MOTIONS), &MotionFile::from_scene(scene))
    }

    pub fn load_images(&self) -> Result<[ImageBuffer; 3]> {
        let load = |n: &str| {
            let p = self.image(n);
            if !p.is_file() {
                bail!("missing {}", p.display());
            }
            Ok(ImageBuffer::load_png(&p)?)
        };
        let (mut bg, mut fg) = (load("L0")?, load("L1")?);
        // a grey PNG next to a colour one is promoted
        match (bg.channels(), fg.channels()) {
            (b, f) if b == f => {}
            (1, f) => bg = bg.broadcast(f),
            (b, 1) => fg = fg.broadcast(b),
            (b, f) => bail!("layer images have {b} and {f} channels"),
        }
        Ok([bg, fg, load("A")?.to_gray()])
    }

    pub fn load_motions(&self) -> Result<Option<MotionFile>> {
        let p = self.dir.join(MOTIONS);
        if !p.is_file() {
            return Ok(None);
        }
        Ok(Some(read_json(&p)?))
    }

    pub fn load_scene(&self) -> Result<Scene> {
        let [bg, fg, alpha] = self.load_images()?;
        let motions = self
            .load_motions()?
            .with_context(|| format!("missing {}", self.dir.join(MOTIONS).display()))?;
        Ok(motions.into_scene(fg, bg, alpha)?)
    }
}

pub fn frame_name(i: usize) -> String {
    format!("frame_{i:03}.png")
}

/// `frame_*.png` in name order.
pub fn load_frames(dir: &Path) -> Result<Vec<ImageBuffer>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read frame directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("frame_") && n.ends_with(".png"))
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| ImageBuffer::load_png(p).map_err(Into::into))
        .collect()
}

pub fn save_frames(dir: &Path, frames: &[ImageBuffer]) -> Result<()> {
    for (i, f) in frames.iter().enumerate() {
        f.save_png(&dir.join(frame_name(i)))?;
    }
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}
