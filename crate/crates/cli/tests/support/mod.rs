//! Fixtures and a runner for the `loadpath` binary.

#![allow(dead_code)]

use loadpath_core::geom::{primitives, Point2, Point3, Toolpath, ToolpathBuilder};
use loadpath_core::motion::{format_command, Command};
use std::path::{Path, PathBuf};
use std::process::Command as Process;

pub const CASE4_MOVES: usize = 55_592;
pub const CASE4_LENGTH_MM: f64 = 682_000.0;
pub const CASE4_DURATION_S: f64 = 22_680.0;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub struct Run {
    pub code: i32,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

impl Run {
    pub fn stdout_text(&self) -> String {
        String::from_utf8(self.stdout.clone()).expect("utf-8 stdout")
    }
}

pub fn loadpath<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Run {
    let out = Process::new(env!("CARGO_BIN_EXE_loadpath"))
        .args(args)
        .env("LOADPATH_LOG", "error")
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: out.stdout,
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn write(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, bytes).expect("fixture written");
    p
}

pub fn cube_stl(dir: &Path) -> PathBuf {
    let m = primitives::cuboid(Point3::default(), Point3::new(10.0, 10.0, 10.0));
    write(dir, "cube.stl", m.to_stl_binary())
}

/// 150 mm vase, 60 mm base radius, 96 facets around.
pub fn vase_stl(dir: &Path) -> PathBuf {
    let m = primitives::vase(Point3::default(), 150.0, 60.0, 96);
    write(dir, "vase.stl", m.to_stl_binary())
}

/// Sixty 50 mm rings, each shifted 2 mm further along +x, 2 mm apart.
pub fn shifted_tower() -> Toolpath {
    let mut b = ToolpathBuilder::new(2.0);
    for k in 0..60 {
        let c = Point2::new(2.0 * k as f64, 0.0);
        let ring: Vec<Point3> = (0..=64)
            .map(|i| {
                let a = std::f64::consts::TAU * ((i % 64) as f64 + 0.5) / 64.0;
                Point3::new(c.x + 50.0 * a.cos(), c.y + 50.0 * a.sin(), 1.0 + 2.0 * k as f64)
            })
            .collect();
        b.extrude(&ring, k);
    }
    b.finish()
}

/// A program of `CASE4_MOVES` equal extruding moves that total
/// `CASE4_LENGTH_MM` and take `CASE4_DURATION_S` at constant speed.
pub fn case4_cpl() -> String {
    let step = CASE4_LENGTH_MM / CASE4_MOVES as f64;
    let speed = CASE4_LENGTH_MM / CASE4_DURATION_S;
    let mut out = String::with_capacity(CASE4_MOVES * 48);
    out.push_str(&format_command(&Command::ExtOn { flow: 2.0 }));
    out.push('\n');
    for i in 0..CASE4_MOVES {
        let x = if i % 2 == 0 { step } else { 0.0 };
        out.push_str(&format_command(&Command::Move {
            target: Point3::new(x, 0.0, 0.0),
            speed,
            extruding: true,
        }));
        out.push('\n');
    }
    out.push_str("EXT OFF\n");
    out
}

pub fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).expect("json output")
}
