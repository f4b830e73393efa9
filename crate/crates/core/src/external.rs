//! Line-oriented external commands: N lines on stdin, N lines on stdout.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STDERR_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LineCommand {
    argv: Vec<String>,
}

impl LineCommand {
    pub fn new(argv: Vec<String>) -> Result<Self> {
        if argv.is_empty() || argv[0].is_empty() {
            return Err(Error::invalid("command must not be empty"));
        }
        Ok(Self { argv })
    }

    /// Split a command line with POSIX shell quoting rules.
    pub fn parse(cmdline: &str) -> Result<Self> {
        let argv = shlex::split(cmdline)
            .ok_or_else(|| Error::invalid(format!("unbalanced quoting in {cmdline:?}")))?;
        Self::new(argv)
    }

    pub fn argv(&self) -> &[String] {
        &self.argv
    }

    fn display(&self) -> String {
        shlex::try_join(self.argv.iter().map(String::as_str)).unwrap_or_else(|_| self.argv.join(" "))
    }

    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Command {
            command: self.display(),
            message: message.into(),
        }
    }

    /// Run once over `lines`, returning stdout split into lines. The caller
    /// checks the line count.
    pub fn run_raw(&self, lines: &[&str]) -> Result<Vec<String>> {
        let mut child = Command::new(&self.argv[0])
            .args(&self.argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| self.fail(format!("cannot start: {e}")))?;

        let mut stdin = child.stdin.take().expect("stdin is piped");
        let mut input = String::with_capacity(lines.iter().map(|l| l.len() + 1).sum());
        for l in lines {
            input.push_str(l);
            input.push('\n');
        }
        let mut stderr = child.stderr.take().expect("stderr is piped");
        let (write_res, err_text) = thread::scope(|s| {
            let writer = s.spawn(move || {
                let r = stdin.write_all(input.as_bytes());
                drop(stdin);
                r
            });
            let reader = s.spawn(move || {
                let mut buf = String::new();
                let _ = stderr.read_to_string(&mut buf);
                buf
            });
            let mut out = Vec::new();
            let read = child
                .stdout
                .take()
                .expect("stdout is piped")
                .read_to_end(&mut out);
            (
                (writer.join().expect("writer thread"), read.map(|_| out)),
                reader.join().expect("stderr thread"),
            )
        });
        let status = child.wait().map_err(|e| self.fail(e.to_string()))?;
        let diagnostics = || {
            let mut t = err_text.trim().to_string();
            if t.len() > STDERR_LIMIT {
                let mut cut = STDERR_LIMIT;
                while !t.is_char_boundary(cut) {
                    cut -= 1;
                }
                t.truncate(cut);
            }
            t
        };
        if !status.success() {
            return Err(self.fail(format!("exited with {status}: {}", diagnostics())));
        }
        let (written, out) = write_res;
        // an early exit that closes stdin shows up as a line-count mismatch
        if let Err(e) = written {
            if e.kind() != std::io::ErrorKind::BrokenPipe {
                return Err(self.fail(format!("writing input: {e}")));
            }
        }
        let out = out.map_err(|e| self.fail(format!("reading output: {e}")))?;
        let text = String::from_utf8(out).map_err(|_| self.fail("output is not UTF-8"))?;
        let mut result: Vec<String> = text.split('\n').map(str::to_string).collect();
        if result.last().is_some_and(String::is_empty) {
            result.pop();
        }
        Ok(result)
    }

    /// Run over `lines` in batches of `batch_size` (all at once when `None`),
    /// possibly concurrently, and reassemble the output in input order. Each
    /// batch must produce exactly one output line per input line.
    pub fn run(&self, lines: &[&str], batch_size: Option<usize>) -> Result<Vec<String>> {
        if lines.is_empty() {
            return Ok(Vec::new());
        }
        let size = batch_size.filter(|&b| b > 0).unwrap_or(lines.len());
        let batches: Vec<Vec<String>> = lines
            .par_chunks(size)
            .map(|chunk| {
                let out = self.run_raw(chunk)?;
                if out.len() != chunk.len() {
                    return Err(Error::LengthMismatch {
                        left_label: "input".into(),
                        left: chunk.len(),
                        right_label: format!("output of `{}`", self.display()),
                        right: out.len(),
                    });
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        Ok(batches.into_iter().flatten().collect())
    }
}
