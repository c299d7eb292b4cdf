use std::io::Read;
use std::os::unix::process::CommandExt;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use tracing::debug;

use super::{Backend, CommandOutput, CommandRequest, SandboxError};
use crate::text::decode_output;

const POLL_INTERVAL: Duration = Duration::from_millis(10);

/// Runs commands as real child processes.
///
/// Each command gets its own process group so a timeout can kill the whole
/// tree. stdout and stderr share one pipe, which keeps their interleaving.
#[derive(Debug, Default, Clone, Copy)]
pub struct ProcessBackend;

impl Backend for ProcessBackend {
    fn name(&self) -> &'static str {
        "process"
    }

    fn execute(&self, req: &CommandRequest<'_>) -> Result<CommandOutput, SandboxError> {
        let (program, args) = req.argv.split_first().ok_or(SandboxError::EmptyArgv)?;
        // Relative programs such as ./gradlew are resolved against the workspace.
        let resolved = if program.starts_with("./") || program.starts_with("../") {
            req.root.join(program)
        } else {
            program.into()
        };

        let (mut reader, writer) = std::io::pipe()?;
        let mut cmd = Command::new(&resolved);
        cmd.args(args)
            .current_dir(req.root)
            .envs(req.env)
            .stdin(Stdio::null())
            .stdout(writer.try_clone()?)
            .stderr(writer)
            .process_group(0);

        let started = Instant::now();
        let mut child = cmd.spawn().map_err(|source| SandboxError::Spawn {
            program: program.clone(),
            source,
        })?;
        // The command still holds write ends of the pipe; drop them so the
        // reader sees EOF once the process tree exits.
        drop(cmd);

        let pump = thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = reader.read_to_end(&mut buf);
            buf
        });

        let deadline = started + req.timeout;
        let mut timed_out = false;
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if Instant::now() >= deadline {
                timed_out = true;
                kill_group(child.id());
                break child.wait()?;
            }
            thread::sleep(POLL_INTERVAL);
        };
        // Reap anything the command left behind in its group.
        kill_group(child.id());
        let bytes = pump.join().unwrap_or_default();
        let duration = started.elapsed();
        debug!(?req.argv, code = ?status.code(), timed_out, "command finished");

        Ok(CommandOutput {
            exit_code: if timed_out { None } else { status.code() },
            output: decode_output(&bytes),
            duration: if timed_out { duration.max(req.timeout) } else { duration },
            timed_out,
            rule: None,
        })
    }
}

fn kill_group(pid: u32) {
    // SAFETY: killpg has no memory-safety preconditions; a stale group id
    // yields ESRCH, which is ignored.
    unsafe {
        libc::killpg(pid as libc::pid_t, libc::SIGKILL);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn run(argv: &[&str], timeout: Duration) -> Result<CommandOutput, SandboxError> {
        let dir = tempfile::tempdir().unwrap();
        let argv: Vec<String> = argv.iter().map(|s| s.to_string()).collect();
        ProcessBackend.execute(&CommandRequest {
            root: dir.path(),
            env: &BTreeMap::new(),
            argv: &argv,
            timeout,
            history: &[],
        })
    }

    #[test]
    fn echo_captures_output() {
        let out = run(&["echo", "x"], Duration::from_secs(10)).unwrap();
        assert_eq!(out.exit_code, Some(0));
        assert_eq!(out.output, "x\n");
        assert!(!out.timed_out);
    }

    #[test]
    fn stderr_is_merged() {
        let out = run(&["sh", "-c", "echo a; echo b 1>&2; exit 3"], Duration::from_secs(10)).unwrap();
        assert_eq!(out.exit_code, Some(3));
        assert_eq!(out.output, "a\nb\n");
    }

    #[test]
    fn unknown_binary_is_spawn_error() {
        let err = run(&["definitely-not-a-binary-abb"], Duration::from_secs(1)).unwrap_err();
        assert!(matches!(err, SandboxError::Spawn { .. }));
    }

    #[test]
    fn timeout_kills_the_process_tree() {
        let dir = tempfile::tempdir().unwrap();
        let marker = dir.path().join("survivor");
        let script = format!("(sleep 2; touch {}) & sleep 30", marker.display());
        let argv = vec!["sh".to_string(), "-c".to_string(), script];
        let started = Instant::now();
        let out = ProcessBackend
            .execute(&CommandRequest {
                root: dir.path(),
                env: &BTreeMap::new(),
                argv: &argv,
                timeout: Duration::from_millis(300),
                history: &[],
            })
            .unwrap();
        assert!(out.timed_out);
        assert_eq!(out.exit_code, None);
        assert!(out.duration >= Duration::from_millis(300));
        assert!(started.elapsed() < Duration::from_secs(5));
        thread::sleep(Duration::from_millis(2500));
        assert!(!marker.exists(), "background child outlived the timeout");
    }
}
