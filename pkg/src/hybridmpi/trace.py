"""Parser for ``strace -f -e trace=%file`` logs.

The goal is narrow: given the file-access trace of a native MPI run,
recover which host shared libraries the dynamic loader actually touched,
so they can be bind-mounted into a container later. Lines look like::

    openat(AT_FDCWD, "/usr/lib/libmpi.so.12", O_RDONLY|O_CLOEXEC) = 3
    [pid 12345] access("/etc/ld.so.preload", R_OK) = -1 ENOENT (No such file or directory)
    12345 execve("/usr/bin/true", ["true"], 0x7ffc... /* 12 vars */) = 0

Both the ``[pid N]`` prefix (live ``-f`` output) and the bare leading pid
(``-f -o file`` output) are understood. Signal notifications, exit
notices, and unfinished/resumed fragments are skipped. strace output
drifts across versions; the fixtures in the test suite pin the format of
strace 5.x with default string quoting (C-style escapes, truncation
rendered as a ``...`` ellipsis after the closing quote).

Everything here is a pure function; per-line skip reasons are surfaced as
counters on the aggregate result rather than as hidden state.
"""

from __future__ import annotations

import posixpath
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

__all__ = [
    "Success",
    "Failure",
    "Outcome",
    "TraceEvent",
    "FileAccessSet",
    "FILE_SYSCALLS",
    "parse_trace_line",
    "render_trace_line",
    "collect_accesses",
    "filter_shared_libraries",
]

# Syscalls from the %file trace class that reveal library locations.
# Everything else (mkdir, unlink, chdir, ...) is deliberately ignored.
FILE_SYSCALLS = frozenset(
    {
        "open",
        "openat",
        "openat2",
        "execve",
        "access",
        "faccessat",
        "stat",
        "lstat",
        "statx",
        "readlink",
        "readlinkat",
    }
)


@dataclass(frozen=True)
class Success:
    value: int


@dataclass(frozen=True)
class Failure:
    errno: str


Outcome = Success | Failure


@dataclass(frozen=True)
class TraceEvent:
    """One parsed file-access record: who asked for which path, and how it went."""

    syscall: str
    path: str
    outcome: Outcome
    pid: int | None = None

    @property
    def ok(self) -> bool:
        return isinstance(self.outcome, Success)


@dataclass
class FileAccessSet:
    """Deduplicated path accesses with the strongest outcome seen per path.

    ``accesses`` preserves first-seen order; Success dominates Failure.
    The skip counters make parse losses observable to callers.
    """

    accesses: dict[str, Outcome] = field(default_factory=dict)
    source_line_count: int = 0
    skipped_lines: int = 0
    ignored_syscalls: int = 0
    relative_paths: int = 0
    truncated_paths: int = 0

    def record(self, event: TraceEvent) -> None:
        prev = self.accesses.get(event.path)
        if prev is None or (isinstance(prev, Failure) and event.ok):
            self.accesses[event.path] = event.outcome

    def successful_only(self) -> list[str]:
        return [p for p, o in self.accesses.items() if isinstance(o, Success)]

    def __len__(self) -> int:
        return len(self.accesses)


_PID_BRACKET_RE = re.compile(r"^\[pid\s+(\d+)\]\s+")
_PID_BARE_RE = re.compile(r"^(\d+)\s+")
_SYSCALL_RE = re.compile(r"^([a-z_][a-z0-9_]*)\((.*)\)\s*=\s*(-?\d+|\?)(.*)$")
_QUOTED_RE = re.compile(r'"((?:[^"\\]|\\.)*)"(\.\.\.)?')
_ERRNO_RE = re.compile(r"^\s+([A-Z][A-Z0-9]*)\b")
_OCTAL_RE = re.compile(r"[0-7]{1,3}")
_HEX_RE = re.compile(r"[0-9a-fA-F]{1,2}")

_SIMPLE_ESCAPES = {
    "n": "\n",
    "t": "\t",
    "r": "\r",
    "f": "\f",
    "v": "\v",
    "a": "\a",
    "b": "\b",
    '"': '"',
    "\\": "\\",
}

# Line shapes we recognize but never turn into events.
_NOISE_PREFIXES = ("--- ", "+++ ")

_SO_NAME_RE = re.compile(r"\.so(\.\d+)*$")


def _unescape(text: str) -> str:
    """Undo strace's C-style string quoting (\\", \\\\, \\n, octal, hex)."""
    if "\\" not in text:
        return text
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch != "\\" or i + 1 >= n:
            out.append(ch)
            i += 1
            continue
        nxt = text[i + 1]
        if nxt in _SIMPLE_ESCAPES:
            out.append(_SIMPLE_ESCAPES[nxt])
            i += 2
        elif nxt == "x":
            m = _HEX_RE.match(text, i + 2)
            if m:
                out.append(chr(int(m.group(0), 16)))
                i = m.end()
            else:
                out.append(nxt)
                i += 2
        elif nxt in "01234567":
            m = _OCTAL_RE.match(text, i + 1)
            assert m is not None  # nxt itself matches [0-7]
            out.append(chr(int(m.group(0), 8)))
            i = m.end()
        else:
            out.append(nxt)
            i += 2
    return "".join(out)


def _parse(line: str) -> tuple[TraceEvent | None, str | None]:
    """Parse one trace line into (event, skip_reason); exactly one is set.

    Skip reasons: blank, noise (signal/exit notices), fragment
    (unfinished/resumed), unparseable, ignored_syscall, no_path,
    truncated_path, relative_path.
    """
    stripped = line.strip()
    if not stripped:
        return None, "blank"
    if stripped.startswith(_NOISE_PREFIXES):
        return None, "noise"

    pid: int | None = None
    m = _PID_BRACKET_RE.match(stripped)
    if m:
        pid = int(m.group(1))
        stripped = stripped[m.end():]
    else:
        m = _PID_BARE_RE.match(stripped)
        if m:
            pid = int(m.group(1))
            stripped = stripped[m.end():]

    # Re-check noise after the pid prefix ("[pid N] +++ exited ...").
    if stripped.startswith(_NOISE_PREFIXES):
        return None, "noise"
    if "<unfinished" in stripped or stripped.startswith("<..."):
        return None, "fragment"

    m = _SYSCALL_RE.match(stripped)
    if m is None:
        return None, "unparseable"
    syscall, args, retval, trailer = m.groups()
    if retval == "?":
        return None, "unparseable"
    if syscall not in FILE_SYSCALLS:
        return None, "ignored_syscall"

    q = _QUOTED_RE.search(args)
    if q is None:
        return None, "no_path"
    raw_path, ellipsis = q.group(1), q.group(2)
    if ellipsis or raw_path.endswith("..."):
        return None, "truncated_path"
    path = _unescape(raw_path)
    if not path.startswith("/"):
        return None, "relative_path"

    ret = int(retval)
    if ret >= 0:
        outcome: Outcome = Success(ret)
    elif ret == -1:
        errno = _ERRNO_RE.match(trailer)
        outcome = Failure(errno.group(1) if errno else "UNKNOWN")
    else:
        return None, "unparseable"

    return TraceEvent(syscall=syscall, path=path, outcome=outcome, pid=pid), None


def parse_trace_line(line: str) -> TraceEvent | None:
    """Parse a single trace line; returns None for anything non-eventful.

    Never raises on arbitrary input. Use :func:`collect_accesses` to get
    skip counters alongside the events.
    """
    event, _ = _parse(line)
    return event


def render_trace_line(event: TraceEvent) -> str:
    """Render an event back into a minimal parseable trace line."""
    escaped = event.path.replace("\\", "\\\\").replace('"', '\\"')
    prefix = f"[pid {event.pid}] " if event.pid is not None else ""
    if isinstance(event.outcome, Success):
        result = str(event.outcome.value)
    else:
        result = f"-1 {event.outcome.errno}"
    return f'{prefix}{event.syscall}("{escaped}") = {result}'


def collect_accesses(lines: Iterable[str]) -> FileAccessSet:
    """Aggregate trace lines into a deduplicated per-path access set."""
    result = FileAccessSet()
    reasons: Counter[str] = Counter()
    for line in lines:
        result.source_line_count += 1
        event, reason = _parse(line)
        if event is not None:
            result.record(event)
        elif reason is not None:
            reasons[reason] += 1
    result.ignored_syscalls = reasons.pop("ignored_syscall", 0)
    result.relative_paths = reasons.pop("relative_path", 0)
    result.truncated_paths = reasons.pop("truncated_path", 0)
    reasons.pop("blank", 0)
    result.skipped_lines = sum(reasons.values())
    return result


def filter_shared_libraries(accesses: FileAccessSet | Mapping[str, Outcome]) -> list[str]:
    """Keep only successfully opened paths that look like shared objects.

    A shared object ends in ``.so`` or ``.so`` followed by a dotted
    numeric version (libfabric.so.1, libmpi.so.12.0.0). Input order is
    preserved.
    """
    mapping = accesses.accesses if isinstance(accesses, FileAccessSet) else accesses
    return [
        path
        for path, outcome in mapping.items()
        if isinstance(outcome, Success)
        and _SO_NAME_RE.search(posixpath.basename(path)) is not None
    ]
