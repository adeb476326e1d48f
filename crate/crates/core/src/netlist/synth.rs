use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};
use thiserror::Error;

/// `{input}`, `{output}` and `{top}` are substituted before the command runs
/// under `sh -c`. File names are relative to the scratch directory the
/// command runs in, since sandboxed tools may not see absolute paths.
pub const DEFAULT_SYNTH_COMMAND: &str =
    "yosys -q -p 'read_verilog {input}; synth -flatten -top {top}; opt_clean; write_verilog -noexpr -noattr {output}'";

const FALLBACK_TOOL: &str = "yowasp-yosys";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthError {
    #[error("synthesis tool not found: {0}")]
    ToolMissing(String),
    #[error("synthesis failed with status {code:?}: {stderr}")]
    ToolFailed { code: Option<i32>, stderr: String },
    #[error("synthesis timed out after {0} s")]
    Timeout(u64),
    #[error("synthesis I/O: {0}")]
    Io(String),
}

fn io(e: std::io::Error) -> SynthError {
    SynthError::Io(e.to_string())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub command: String,
    pub timeout_secs: u64,
    /// Leave the scratch directory in place for inspection.
    pub keep_workdir: bool,
}

impl Default for SynthConfig {
    fn default() -> SynthConfig {
        SynthConfig {
            command: DEFAULT_SYNTH_COMMAND.to_string(),
            timeout_secs: 120,
            keep_workdir: false,
        }
    }
}

fn on_path(tool: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path).map(|d| d.join(tool)).find(|p| p.is_file())
}

impl SynthConfig {
    /// The default command, switched to the WebAssembly build of yosys when
    /// only that one is installed.
    pub fn resolved(&self) -> SynthConfig {
        let mut c = self.clone();
        if c.command.starts_with("yosys ") && on_path("yosys").is_none() && on_path(FALLBACK_TOOL).is_some() {
            c.command = format!("{FALLBACK_TOOL}{}", &c.command["yosys".len()..]);
        }
        c
    }

    /// Whether the command's program can be found.
    pub fn available(&self) -> bool {
        let c = self.resolved();
        let prog = c.command.split_whitespace().next().unwrap_or_default();
        if prog.contains('/') {
            Path::new(prog).is_file()
        } else {
            on_path(prog).is_some()
        }
    }
}

/// Synthesize `source` with top module `top` and return the netlist text.
pub fn synthesize(source: &str, top: &str, config: &SynthConfig) -> Result<String, SynthError> {
    let cfg = config.resolved();
    let dir = tempfile::Builder::new().prefix("rtlmark-synth").tempdir().map_err(io)?;
    let input = dir.path().join("input.v");
    let output = dir.path().join("netlist.v");
    std::fs::write(&input, source).map_err(io)?;
    let cmd = cfg
        .command
        .replace("{input}", "input.v")
        .replace("{output}", "netlist.v")
        .replace("{top}", top);
    let stderr_path = dir.path().join("stderr.txt");
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .current_dir(dir.path())
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(std::fs::File::create(&stderr_path).map_err(io)?)
        .spawn()
        .map_err(io)?;
    let deadline = Instant::now() + Duration::from_secs(cfg.timeout_secs);
    let status = loop {
        if let Some(s) = child.try_wait().map_err(io)? {
            break s;
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            return Err(SynthError::Timeout(cfg.timeout_secs));
        }
        std::thread::sleep(Duration::from_millis(20));
    };
    let stderr = std::fs::read_to_string(&stderr_path).unwrap_or_default();
    if cfg.keep_workdir {
        let kept = dir.keep();
        log::info!("synthesis workdir kept at {}", kept.display());
    }
    match status.code() {
        Some(0) => {}
        Some(127) => return Err(SynthError::ToolMissing(cmd.split_whitespace().next().unwrap_or_default().to_string())),
        code => return Err(SynthError::ToolFailed { code, stderr: stderr.trim().to_string() }),
    }
    std::fs::read_to_string(&output).map_err(|_| SynthError::ToolFailed {
        code: Some(0),
        stderr: format!("no netlist written. {}", stderr.trim()),
    })
}
