//! Isolated execution of safety-screened Python snippets.
//!
//! Every snippet runs in its own subprocess: isolated interpreter mode, an
//! empty temporary working directory, a scrubbed environment, a wall-clock
//! timeout, an address-space cap, and capped output capture. The harness
//! itself never crashes on snippet misbehavior — timeouts, nonzero exits,
//! and resource kills all come back as `ok = false` with a reason.
//!
//! [`execute_verified`] re-runs the static safety screen itself, so no code
//! string can reach an interpreter without a passing verdict.

use std::fmt;
use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use crate::synth::safety::{safety_filter, SafetyTables, SafetyVerdict};

/// Resource limits for one snippet execution.
#[derive(Debug, Clone)]
pub struct ExecLimits {
    /// Wall-clock budget; the process is killed at the deadline.
    pub timeout: Duration,
    /// Address-space cap for the child process, in bytes.
    pub memory_bytes: u64,
    /// Captured stdout is truncated to this many bytes.
    pub stdout_cap: usize,
    /// Interpreter binary (resolved via PATH when not absolute).
    pub interpreter: PathBuf,
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits {
            timeout: Duration::from_secs(10),
            memory_bytes: 512 << 20,
            stdout_cap: 64 << 10,
            interpreter: PathBuf::from("python3"),
        }
    }
}

/// What one execution did.
#[derive(Debug, Clone)]
pub struct ExecOutcome {
    /// True when the snippet exited 0 within all limits.
    pub ok: bool,
    /// Captured stdout, truncated at the configured cap.
    pub stdout: String,
    /// Captured stderr (diagnostics), truncated independently.
    pub stderr: String,
    pub duration: Duration,
    /// Why `ok` is false: "timeout ...", "exit status N", "killed by signal N".
    pub reason: Option<String>,
}

/// Harness-level failures. Snippet misbehavior is not an error — it is an
/// [`ExecOutcome`] with `ok = false`.
#[derive(Debug)]
pub enum ExecError {
    /// The code did not pass the safety screen; nothing was executed.
    SafetyRejected(SafetyVerdict),
    /// The configured interpreter binary could not be started.
    InterpreterUnavailable(String),
    Io(std::io::Error),
}

impl fmt::Display for ExecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecError::SafetyRejected(verdict) => {
                write!(f, "refusing to execute unscreened code: {verdict}")
            }
            ExecError::InterpreterUnavailable(path) => {
                write!(f, "interpreter unavailable: {path}")
            }
            ExecError::Io(e) => write!(f, "execution harness I/O failure: {e}"),
        }
    }
}

impl std::error::Error for ExecError {}

impl From<std::io::Error> for ExecError {
    fn from(e: std::io::Error) -> Self {
        ExecError::Io(e)
    }
}

/// True when the configured interpreter starts and reports a version.
pub fn interpreter_available(limits: &ExecLimits) -> bool {
    Command::new(&limits.interpreter)
        .arg("--version")
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

/// Drain a pipe fully (so the child never blocks on a full buffer) while
/// retaining only the first `cap` bytes.
fn read_capped(pipe: Option<impl Read>, cap: usize) -> String {
    let Some(mut pipe) = pipe else {
        return String::new();
    };
    let mut kept = Vec::with_capacity(cap.min(8 << 10));
    let mut chunk = [0u8; 8192];
    loop {
        match pipe.read(&mut chunk) {
            Ok(0) => break,
            Ok(n) => {
                let room = cap.saturating_sub(kept.len());
                kept.extend_from_slice(&chunk[..n.min(room)]);
            }
            Err(_) => break,
        }
    }
    String::from_utf8_lossy(&kept).into_owned()
}

/// Run `code` under the limits after re-checking it against the safety
/// tables. See the module docs for the isolation measures.
pub fn execute_verified(
    code: &str,
    tables: &SafetyTables,
    limits: &ExecLimits,
) -> Result<ExecOutcome, ExecError> {
    let verdict = safety_filter(code, tables);
    if !verdict.allowed() {
        return Err(ExecError::SafetyRejected(verdict));
    }

    let workdir = tempfile::tempdir()?;
    let script = workdir.path().join("snippet.py");
    fs::write(&script, code)?;

    let mut cmd = Command::new(&limits.interpreter);
    cmd.arg("-I") // isolated: no user site dir, no env-var influence, no cwd on sys.path
        .arg("-S") // skip site import
        .arg(&script)
        .current_dir(workdir.path())
        .env_clear()
        .env("PATH", "/usr/bin:/bin")
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());

    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        let mem = limits.memory_bytes as libc::rlim_t;
        // Safety: setrlimit is async-signal-safe and touches no memory
        // shared with the parent.
        unsafe {
            cmd.pre_exec(move || {
                let rl = libc::rlimit {
                    rlim_cur: mem,
                    rlim_max: mem,
                };
                libc::setrlimit(libc::RLIMIT_AS, &rl);
                Ok(())
            });
        }
    }

    let start = Instant::now();
    let mut child = match cmd.spawn() {
        Ok(child) => child,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(ExecError::InterpreterUnavailable(
                limits.interpreter.display().to_string(),
            ));
        }
        Err(e) => return Err(ExecError::Io(e)),
    };

    // Drain both pipes on threads so a chatty child cannot deadlock against
    // the timeout loop below.
    let stdout_pipe = child.stdout.take();
    let stderr_pipe = child.stderr.take();
    let cap = limits.stdout_cap;
    let stdout_thread = std::thread::spawn(move || read_capped(stdout_pipe, cap));
    let stderr_thread = std::thread::spawn(move || read_capped(stderr_pipe, 8 << 10));

    let deadline = start + limits.timeout;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                std::thread::sleep(Duration::from_millis(10));
            }
            Err(_) => {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
        }
    };

    let duration = start.elapsed();
    let stdout = stdout_thread.join().unwrap_or_default();
    let stderr = stderr_thread.join().unwrap_or_default();

    let (ok, reason) = match status {
        None => (
            false,
            Some(format!("timeout after {:.1}s", limits.timeout.as_secs_f64())),
        ),
        Some(status) if status.success() => (true, None),
        Some(status) => {
            let reason = match status.code() {
                Some(code) => format!("exit status {code}"),
                None => {
                    #[cfg(unix)]
                    {
                        use std::os::unix::process::ExitStatusExt;
                        match status.signal() {
                            Some(sig) => format!("killed by signal {sig}"),
                            None => "terminated abnormally".to_string(),
                        }
                    }
                    #[cfg(not(unix))]
                    "terminated abnormally".to_string()
                }
            };
            (false, Some(reason))
        }
    };

    Ok(ExecOutcome {
        ok,
        stdout,
        stderr,
        duration,
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(code: &str, limits: &ExecLimits) -> ExecOutcome {
        execute_verified(code, SafetyTables::builtin(), limits).expect("harness ok")
    }

    #[test]
    fn arithmetic_prints_and_succeeds() {
        let out = run("print(6*7)\n", &ExecLimits::default());
        assert!(out.ok, "stderr: {}", out.stderr);
        assert_eq!(out.stdout, "42\n");
        assert!(out.reason.is_none());
    }

    #[test]
    fn infinite_loop_hits_the_timeout() {
        let limits = ExecLimits {
            timeout: Duration::from_secs(2),
            ..ExecLimits::default()
        };
        let out = run("while True: pass\n", &limits);
        assert!(!out.ok);
        assert!(out.reason.as_deref().unwrap_or("").contains("timeout"));
        assert!(out.duration >= Duration::from_secs(2));
    }

    #[test]
    fn flagged_code_is_rejected_before_any_execution() {
        let err = execute_verified(
            "open('x.txt', 'w')\n",
            SafetyTables::builtin(),
            &ExecLimits::default(),
        )
        .unwrap_err();
        match err {
            ExecError::SafetyRejected(verdict) => assert!(!verdict.allowed()),
            other => panic!("expected safety rejection, got {other}"),
        }
    }

    #[test]
    fn raising_snippet_reports_exit_status_and_stderr() {
        let out = run("raise ValueError('boom')\n", &ExecLimits::default());
        assert!(!out.ok);
        assert!(out.reason.as_deref().unwrap_or("").starts_with("exit status"));
        assert!(out.stderr.contains("ValueError"), "stderr: {}", out.stderr);
    }

    #[test]
    fn stdout_is_truncated_at_the_cap() {
        let limits = ExecLimits {
            stdout_cap: 1024,
            ..ExecLimits::default()
        };
        let out = run("print('x' * 100000)\n", &limits);
        assert!(out.ok);
        assert!(out.stdout.len() <= 1024 + 4, "len {}", out.stdout.len());
    }

    #[test]
    fn snippet_runs_from_a_private_temp_directory() {
        let out = run("print(__file__)\n", &ExecLimits::default());
        assert!(out.ok);
        assert!(out.stdout.contains("snippet.py"), "stdout: {}", out.stdout);
    }

    #[test]
    fn memory_hog_is_killed_by_the_address_space_cap() {
        let limits = ExecLimits {
            memory_bytes: 256 << 20,
            ..ExecLimits::default()
        };
        let out = run("x = ' ' * (1 << 30)\nprint(len(x))\n", &limits);
        assert!(!out.ok, "stdout: {}", out.stdout);
        assert!(out.stderr.contains("MemoryError"), "stderr: {}", out.stderr);
    }

    #[test]
    fn missing_interpreter_is_reported_as_unavailable() {
        let limits = ExecLimits {
            interpreter: PathBuf::from("/nonexistent/python999"),
            ..ExecLimits::default()
        };
        let err = execute_verified("print(1)\n", SafetyTables::builtin(), &limits).unwrap_err();
        assert!(matches!(err, ExecError::InterpreterUnavailable(_)));
        assert!(!interpreter_available(&limits));
    }

    #[test]
    fn real_interpreter_probe_succeeds() {
        assert!(interpreter_available(&ExecLimits::default()));
    }
}
