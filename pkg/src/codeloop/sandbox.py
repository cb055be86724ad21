"""Isolated execution of candidate code against test suites.

Every execution spawns a fresh interpreter process in a throwaway scratch
directory. When the engine runs as root the child is demoted to uid/gid
nobody and detached into an empty network namespace, so sandboxed code can
neither write outside its scratch directory nor reach the network; when not
root the demotion is skipped (best effort, not container-grade).

Assert-style tests run as one combined suite file, so a failure's feedback is
the interpreter's own traceback of that file. Progress markers interleaved
between test snippets recover per-test pass flags from the single run.
Stdio-style tests run the program once per input and diff stdout against the
expected text after per-line trailing-whitespace normalization.
"""

from __future__ import annotations

import ctypes
import os
import shutil
import signal
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass

from .problems import ASSERT_CODE, STDIO_PAIR, TestCase
from .prompts import NO_CODE_FEEDBACK, render_feedback_turn

STATUS_ALL_PASS = "all-pass"
STATUS_TEST_FAIL = "test-fail"
STATUS_RUNTIME_ERROR = "runtime-error"
STATUS_TIMEOUT = "timeout"
STATUS_NO_CODE = "no-code"

TRUNCATION_MARKER = "\n... (feedback truncated)"

_PROGRESS_FILE = "__progress__"
_SUITE_FILE = "suite.py"
_PROGRAM_FILE = "program.py"

_CLONE_NEWNET = 0x40000000
_NOBODY_UID = 65534
_NOBODY_GID = 65534


class SandboxError(RuntimeError):
    """Infrastructure failure (spawn/scratch); distinct from candidate failure."""


@dataclass(frozen=True)
class ExecLimits:
    """Resource limits for one execution (the whole test suite)."""

    wall_timeout: float = 10.0
    max_output: int = 64 * 1024
    max_feedback_len: int = 4000

    def __post_init__(self):
        if self.wall_timeout <= 0 or self.max_output <= 0 or self.max_feedback_len <= 0:
            raise ValueError("execution limits must be strictly positive")


@dataclass(frozen=True)
class ExecutionResult:
    """Outcome of running one candidate against one test suite.

    ``per_test`` holds (test index, flag) for every test: True passed,
    False failed, None not run (short-circuited after an earlier failure).
    ``feedback`` is the raw executor output (traceback or diff text); empty
    exactly when everything passed.
    """

    status: str
    per_test: tuple[tuple[int, bool | None], ...]
    feedback: str
    wall_time: float
    truncated: bool = False

    @property
    def all_passed(self) -> bool:
        return self.status == STATUS_ALL_PASS

    @property
    def outcome(self) -> tuple:
        """Everything but the wall-clock measurement; deterministic code
        yields an identical outcome on every run."""
        return (self.status, self.per_test, self.feedback, self.truncated)


def no_code_result() -> ExecutionResult:
    """Synthetic result for a turn whose response contained no code block."""
    return ExecutionResult(
        status=STATUS_NO_CODE, per_test=(), feedback=NO_CODE_FEEDBACK, wall_time=0.0
    )


def render_feedback(result: ExecutionResult, limits: ExecLimits) -> str:
    """Format a failing result as the feedback message body.

    Calling this on an all-pass result is a caller bug.
    """
    if result.status == STATUS_ALL_PASS:
        raise ValueError("render_feedback called on an all-pass result")
    body = result.feedback[: limits.max_feedback_len]
    if result.truncated or len(result.feedback) > limits.max_feedback_len:
        body += TRUNCATION_MARKER
    return render_feedback_turn(body)


def _normalize_stdout(text: str) -> str:
    """Per-line trailing-whitespace strip plus trailing-blank-line strip."""
    lines = [line.rstrip() for line in text.split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines)


def _truncate(text: str, limit: int) -> tuple[str, bool]:
    if len(text) > limit:
        return text[:limit], True
    return text, False


class SandboxExecutor:
    """Facade over the subprocess sandbox; stateless and thread-safe.

    ``interpreter`` is the external runtime for candidate code; defaults to
    the ``CODELOOP_PYTHON`` environment variable, then the current
    interpreter. ``isolate`` controls the privilege drop / network detach
    (applied only when running as root).
    """

    def __init__(self, interpreter: str | None = None, isolate: bool = True):
        self.interpreter = interpreter or os.environ.get("CODELOOP_PYTHON") or sys.executable
        self.isolate = isolate and hasattr(os, "setuid")

    # -- public API ---------------------------------------------------------

    def execute_assert_tests(
        self, code: str, tests: list[TestCase], limits: ExecLimits
    ) -> ExecutionResult:
        """Run ``code`` and a suite of assert-style tests in one fresh process."""
        for t in tests:
            if t.kind != ASSERT_CODE:
                raise ValueError(f"execute_assert_tests got a {t.kind!r} test")
        scratch = self._make_scratch()
        try:
            suite_path = os.path.join(scratch, _SUITE_FILE)
            with open(suite_path, "w", encoding="utf-8") as fh:
                fh.write(self._build_suite(code, tests))
            start = time.monotonic()
            proc = self._run([self.interpreter, _SUITE_FILE], scratch, limits, stdin_text=None)
            wall = time.monotonic() - start
            return self._assert_result(proc, scratch, tests, limits, wall)
        finally:
            self._remove_scratch(scratch)

    def execute_stdio_tests(
        self, code: str, tests: list[TestCase], limits: ExecLimits
    ) -> ExecutionResult:
        """Run ``code`` once per stdio test; compare stdout after normalization.

        ``limits.wall_timeout`` budgets the whole call; each test run gets the
        remaining budget.
        """
        for t in tests:
            if t.kind != STDIO_PAIR:
                raise ValueError(f"execute_stdio_tests got a {t.kind!r} test")
        scratch = self._make_scratch()
        try:
            program_path = os.path.join(scratch, _PROGRAM_FILE)
            with open(program_path, "w", encoding="utf-8") as fh:
                fh.write(code if code.endswith("\n") else code + "\n")
            start = time.monotonic()
            flags: list[tuple[int, bool | None]] = []
            for i, test in enumerate(tests):
                remaining = limits.wall_timeout - (time.monotonic() - start)
                if remaining <= 0:
                    flags.extend((j, None) for j in range(i, len(tests)))
                    return ExecutionResult(
                        status=STATUS_TIMEOUT,
                        per_test=tuple(flags),
                        feedback=self._timeout_feedback(limits),
                        wall_time=time.monotonic() - start,
                    )
                run_limits = ExecLimits(
                    wall_timeout=remaining,
                    max_output=limits.max_output,
                    max_feedback_len=limits.max_feedback_len,
                )
                proc = self._run(
                    [self.interpreter, _PROGRAM_FILE], scratch, run_limits, stdin_text=test.input
                )
                wall = time.monotonic() - start
                if proc is None:  # timed out
                    flags.extend((j, None) for j in range(i, len(tests)))
                    return ExecutionResult(
                        status=STATUS_TIMEOUT,
                        per_test=tuple(flags),
                        feedback=self._timeout_feedback(limits),
                        wall_time=wall,
                    )
                if proc.returncode != 0:
                    flags.append((i, False))
                    flags.extend((j, None) for j in range(i + 1, len(tests)))
                    feedback, trunc = _truncate(
                        self._clean_traceback(proc.stderr, scratch), limits.max_feedback_len
                    )
                    return ExecutionResult(
                        status=STATUS_RUNTIME_ERROR,
                        per_test=tuple(flags),
                        feedback=feedback or "Program exited with a non-zero status.",
                        wall_time=wall,
                        truncated=trunc,
                    )
                got = _normalize_stdout(proc.stdout)
                expected = _normalize_stdout(test.output)
                if got != expected:
                    flags.append((i, False))
                    flags.extend((j, None) for j in range(i + 1, len(tests)))
                    feedback, trunc = _truncate(
                        self._stdio_diff(test.input, expected, got), limits.max_feedback_len
                    )
                    return ExecutionResult(
                        status=STATUS_TEST_FAIL,
                        per_test=tuple(flags),
                        feedback=feedback,
                        wall_time=wall,
                        truncated=trunc,
                    )
                flags.append((i, True))
            return ExecutionResult(
                status=STATUS_ALL_PASS,
                per_test=tuple(flags),
                feedback="",
                wall_time=time.monotonic() - start,
            )
        finally:
            self._remove_scratch(scratch)

    def execute(self, code: str, tests: list[TestCase], limits: ExecLimits) -> ExecutionResult:
        """Dispatch on the suite's test kind."""
        if not tests:
            raise ValueError("empty test suite")
        if tests[0].kind == ASSERT_CODE:
            return self.execute_assert_tests(code, tests, limits)
        return self.execute_stdio_tests(code, tests, limits)

    # -- assert-suite plumbing ----------------------------------------------

    @staticmethod
    def _build_suite(code: str, tests: list[TestCase]) -> str:
        """Candidate code, then each test snippet followed by a progress marker.

        Markers append the test index to a progress file via builtins.open,
        immune to the candidate shadowing ``open``. The traceback of a failing
        test is the genuine traceback of this file.
        """
        parts = [code, ""]
        for i, test in enumerate(tests):
            parts.append(test.code)
            parts.append(
                f'__import__("builtins").open({_PROGRESS_FILE!r}, "a").write("{i}\\n")'
            )
        return "\n".join(parts) + "\n"

    def _assert_result(
        self, proc, scratch: str, tests: list[TestCase], limits: ExecLimits, wall: float
    ) -> ExecutionResult:
        completed: set[int] = set()
        progress_path = os.path.join(scratch, _PROGRESS_FILE)
        if os.path.exists(progress_path):
            with open(progress_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line.isdigit():
                        completed.add(int(line))
        if proc is None:  # timed out
            flags = tuple(
                (i, True if i in completed else None) for i in range(len(tests))
            )
            return ExecutionResult(
                status=STATUS_TIMEOUT,
                per_test=flags,
                feedback=self._timeout_feedback(limits),
                wall_time=wall,
            )
        if proc.returncode == 0 and len(completed) == len(tests):
            flags = tuple((i, True) for i in range(len(tests)))
            return ExecutionResult(
                status=STATUS_ALL_PASS, per_test=flags, feedback="", wall_time=wall
            )
        # The first test not in the progress file is the one that blew up
        # (or the candidate failed before any test ran).
        failing = min((i for i in range(len(tests)) if i not in completed), default=None)
        flags = []
        for i in range(len(tests)):
            if i in completed:
                flags.append((i, True))
            elif i == failing:
                flags.append((i, False))
            else:
                flags.append((i, None))
        feedback = self._clean_traceback(proc.stderr, scratch)
        if not feedback:
            feedback = f"Program exited with status {proc.returncode} before completing the tests."
        feedback, trunc = _truncate(feedback, limits.max_feedback_len)
        status = STATUS_TEST_FAIL if "AssertionError" in feedback else STATUS_RUNTIME_ERROR
        return ExecutionResult(
            status=status,
            per_test=tuple(flags),
            feedback=feedback,
            wall_time=wall,
            truncated=trunc,
        )

    # -- process plumbing ----------------------------------------------------

    @staticmethod
    def _timeout_feedback(limits: ExecLimits) -> str:
        return f"Execution timed out after {limits.wall_timeout:g} seconds."

    @staticmethod
    def _clean_traceback(stderr: str, scratch: str) -> str:
        """Strip the scratch path so feedback is location-independent."""
        return stderr.replace(scratch + os.sep, "").strip("\n")

    @staticmethod
    def _stdio_diff(stdin_text: str, expected: str, got: str) -> str:
        return (
            "Wrong answer.\n"
            f"Input:\n{stdin_text.rstrip()}\n"
            f"Expected output:\n{expected}\n"
            f"Got:\n{got}"
        )

    def _make_scratch(self) -> str:
        try:
            scratch = tempfile.mkdtemp(prefix="codeloop-exec-")
            if self.isolate and os.geteuid() == 0:
                os.chmod(scratch, 0o777)
            return scratch
        except OSError as e:
            raise SandboxError(f"could not create scratch directory: {e}") from e

    @staticmethod
    def _remove_scratch(scratch: str) -> None:
        shutil.rmtree(scratch, ignore_errors=True)

    def _preexec(self):
        if not (self.isolate and os.geteuid() == 0):
            return None

        def demote():
            libc = ctypes.CDLL(None, use_errno=True)
            libc.unshare(_CLONE_NEWNET)  # best effort: empty network namespace
            os.setgid(_NOBODY_GID)
            os.setuid(_NOBODY_UID)

        return demote

    def _run(self, argv, scratch: str, limits: ExecLimits, stdin_text: str | None):
        """Spawn one sandboxed process. Returns the completed process, or None on timeout."""
        env = {
            "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
            "PYTHONHASHSEED": "0",
            "PYTHONDONTWRITEBYTECODE": "1",
            "HOME": scratch,
        }
        try:
            proc = subprocess.Popen(
                argv,
                cwd=scratch,
                env=env,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                start_new_session=True,
                preexec_fn=self._preexec(),
            )
        except OSError as e:
            raise SandboxError(f"could not spawn sandbox process: {e}") from e
        try:
            out, err = proc.communicate(input=stdin_text or "", timeout=limits.wall_timeout)
        except subprocess.TimeoutExpired:
            try:
                os.killpg(proc.pid, signal.SIGKILL)
            except (ProcessLookupError, PermissionError):
                proc.kill()
            proc.wait()
            return None
        return _Completed(proc.returncode, out[: limits.max_output], err[: limits.max_output])


@dataclass(frozen=True)
class _Completed:
    returncode: int
    stdout: str
    stderr: str
