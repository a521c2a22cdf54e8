"""Turn host library paths into a container bind-mount plan.

Directories are bound, not files, so the runtime can resolve versioned
symlink chains (libmpi.so.12 -> libmpi.so.12.0.x). The plan renders to
the two environment variables the container runtime consumes:
SINGULARITY_BIND and SINGULARITYENV_LD_LIBRARY_PATH, with host
directories placed before the container's own search path so the host
libraries win symbol resolution.
"""

from __future__ import annotations

import posixpath
from dataclasses import dataclass, field
from typing import Iterable, Sequence

__all__ = [
    "BindSpec",
    "BindPlan",
    "DEFAULT_EXCLUSIONS",
    "WHOLESALE_PREFIXES",
    "BIND_VAR",
    "LIBRARY_PATH_VAR",
    "plan_binds",
    "render_env",
    "merge_plans",
]

# The container's own MPI install prefix must never be shadowed by a bind.
DEFAULT_EXCLUSIONS = ("/container/mpi",)

# Directories too broad to bind wholesale; a bind here would shadow large
# parts of the container filesystem.
WHOLESALE_PREFIXES = frozenset({"/", "/usr", "/opt"})

BIND_VAR = "SINGULARITY_BIND"
LIBRARY_PATH_VAR = "SINGULARITYENV_LD_LIBRARY_PATH"

# Appended after the host directories so container-internal paths stay
# reachable while host libraries win resolution. Kept as a literal
# reference; whether the runtime expands it is environment-dependent.
_CONTAINER_PATH_REF = "$LD_LIBRARY_PATH"


def _is_within(path: str, prefix: str) -> bool:
    """True if path equals prefix or lies below it."""
    if prefix == "/":
        return True
    return path == prefix or path.startswith(prefix + "/")


def _shadows(destination: str, exclusion: str) -> bool:
    # A bind at the exclusion, below it, or at any ancestor of it would
    # shadow the excluded tree.
    return _is_within(destination, exclusion) or _is_within(exclusion, destination)


@dataclass(frozen=True)
class BindSpec:
    source: str
    destination: str = ""
    options: str | None = None

    def __post_init__(self) -> None:
        if not self.destination:
            object.__setattr__(self, "destination", self.source)
        if not self.source.startswith("/") or not self.destination.startswith("/"):
            raise ValueError(f"bind paths must be absolute: {self!r}")

    def render(self) -> str:
        if self.options:
            return f"{self.source}:{self.destination}:{self.options}"
        if self.destination != self.source:
            return f"{self.source}:{self.destination}"
        return self.source


@dataclass
class BindPlan:
    """Ordered bind mounts plus the in-container library search order."""

    binds: list[BindSpec] = field(default_factory=list)
    lib_dirs: list[str] = field(default_factory=list)
    dropped: list[tuple[str, str]] = field(default_factory=list)

    def validate(self) -> None:
        """Raise ValueError if the plan violates its structural invariants."""
        seen: set[str] = set()
        for d in self.lib_dirs:
            if d in seen:
                raise ValueError(f"duplicate library directory {d}")
            seen.add(d)
            if not any(_is_within(d, b.destination) for b in self.binds):
                raise ValueError(f"library directory {d} is not covered by any bind")
        for b in self.binds:
            for other in self.binds:
                if b is not other and b.source != other.source and _is_within(
                    b.source, other.source
                ):
                    raise ValueError(
                        f"nested binds after normalization: {b.source} under {other.source}"
                    )

    def is_empty(self) -> bool:
        return not self.binds and not self.lib_dirs


def _collapse_dirs(dirs: Sequence[str]) -> list[str]:
    """Drop directories nested under another one; keep first-seen order."""
    return [
        d
        for d in dirs
        if not any(o != d and _is_within(d, o) for o in dirs)
    ]


def plan_binds(
    lib_paths: Iterable[str],
    exclusions: Sequence[str] = DEFAULT_EXCLUSIONS,
) -> BindPlan:
    """Build a bind plan covering every given library file.

    Each library's parent directory becomes a bind; nested parents are
    collapsed into the shallowest one. A library is dropped (and counted
    in ``dropped``) when its directory would shadow an exclusion prefix
    or is a wholesale system prefix like /usr. Relative input paths are a
    contract violation.
    """
    excl = [posixpath.normpath(e) for e in exclusions]
    parents: list[str] = []
    dropped: list[tuple[str, str]] = []
    for raw in lib_paths:
        if not raw.startswith("/"):
            raise ValueError(f"library path must be absolute: {raw!r}")
        path = posixpath.normpath(raw)
        parent = posixpath.dirname(path) or "/"
        shadowing = next((e for e in excl if _shadows(parent, e)), None)
        if shadowing is not None:
            dropped.append((path, f"bind would shadow excluded prefix {shadowing}"))
            continue
        if parent in WHOLESALE_PREFIXES:
            dropped.append((path, f"refusing wholesale bind of {parent}"))
            continue
        if parent not in parents:
            parents.append(parent)
    binds = [BindSpec(source=d) for d in _collapse_dirs(parents)]
    return BindPlan(binds=binds, lib_dirs=parents, dropped=dropped)


def render_env(plan: BindPlan) -> dict[str, str]:
    """Render a plan to its environment-variable form.

    Binds are comma-separated ``source[:destination[:options]]`` entries
    (destination omitted when equal to the source); the search path is
    colon-separated with the pre-existing in-container value referenced
    last. An empty plan renders to an empty map.
    """
    plan.validate()
    env: dict[str, str] = {}
    if plan.binds:
        env[BIND_VAR] = ",".join(b.render() for b in plan.binds)
    if plan.lib_dirs:
        env[LIBRARY_PATH_VAR] = ":".join(plan.lib_dirs) + ":" + _CONTAINER_PATH_REF
    return env


def _covers(outer: BindSpec, inner: BindSpec) -> bool:
    """True if the outer bind already maps everything the inner one does."""
    if outer.options != inner.options:
        return False
    if not _is_within(inner.source, outer.source):
        return False
    rel = posixpath.relpath(inner.source, outer.source)
    mapped = posixpath.normpath(posixpath.join(outer.destination, rel))
    return mapped == inner.destination


def merge_plans(a: BindPlan, b: BindPlan) -> BindPlan:
    """Combine two plans with b's library directories taking precedence.

    b's lib_dirs come first (prepend semantics), binds are unioned and
    re-collapsed.
    """
    lib_dirs: list[str] = []
    for d in list(b.lib_dirs) + list(a.lib_dirs):
        if d not in lib_dirs:
            lib_dirs.append(d)
    combined: list[BindSpec] = []
    for spec in list(b.binds) + list(a.binds):
        if spec not in combined:
            combined.append(spec)
    binds = [
        spec
        for spec in combined
        if not any(o != spec and _covers(o, spec) for o in combined)
    ]
    return BindPlan(binds=binds, lib_dirs=lib_dirs, dropped=b.dropped + a.dropped)
