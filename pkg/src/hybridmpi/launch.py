"""Batch launch command composition.

Builds the full launch line for a containerized MPI run: environment
prefix, scheduler invocation, optional ABI-translation wrapper, container
runtime verb, image, and the command inside the container, plus the
environment-module load preamble that must precede it. Composition is
pure; actually executing the line is the caller's (CLI's) opt-in.
"""

from __future__ import annotations

import re
import shlex
from dataclasses import dataclass, field
from enum import Enum

from .abi import CompatDecision, DirectBind, Incompatible, RequiresTranslation
from .binds import BindPlan, BindSpec, merge_plans

__all__ = [
    "CheckMode",
    "RuntimeVerb",
    "Translation",
    "LaunchPlan",
    "required_modules",
    "module_preamble",
    "compose",
    "translation_env_adjustment",
    "CHECK_VAR",
]

CHECK_VAR = "CHECK_MPI"

# Module load order matters: the bindings module sets the host environment
# the others refine.
_MODULES_DIRECT = ("singularity-bindings",)
_MODULES_TRANSLATE = ("singularity-bindings", "cray-mpich", "cray-mpixlate")


class CheckMode(Enum):
    """Fail-fast rank check: off, error-only, or verbose."""

    OFF = "0"
    ON = "1"
    VERBOSE = "2"


class RuntimeVerb(Enum):
    EXEC = "exec"
    RUN = "run"


@dataclass(frozen=True)
class Translation:
    source_tag: str
    target_tag: str


@dataclass
class LaunchPlan:
    image: str
    inner_command: list[str]
    ntasks: int = 1
    ntasks_per_node: int | None = None
    account: str | None = None
    partition: str | None = None
    check_mode: CheckMode = CheckMode.OFF
    env: dict[str, str] = field(default_factory=dict)
    modules: list[str] = field(default_factory=list)
    wrapper: Translation | None = None
    runtime_verb: RuntimeVerb = RuntimeVerb.EXEC

    def validate(self) -> None:
        if not self.image:
            raise ValueError("launch plan needs an image")
        if not self.inner_command and self.runtime_verb is not RuntimeVerb.RUN:
            # run defers to the runscript, exec has nothing to execute
            raise ValueError("launch plan needs a command to run in the container")
        if self.ntasks < 1:
            raise ValueError("ntasks must be >= 1")
        if self.wrapper is not None and self.runtime_verb is not RuntimeVerb.RUN:
            # The wrapped launch must go through the runscript so the
            # preload is composed there instead of %environment.
            raise ValueError("a translation wrapper requires the run verb")
        if CHECK_VAR in self.env:
            raise ValueError(f"set {CHECK_VAR} via check_mode, not env")


def required_modules(decision: CompatDecision) -> list[str]:
    """Ordered environment modules a decision requires before launching."""
    if isinstance(decision, DirectBind):
        return list(_MODULES_DIRECT)
    if isinstance(decision, RequiresTranslation):
        return list(_MODULES_TRANSLATE)
    if isinstance(decision, Incompatible):
        raise ValueError(f"no launch is possible: {decision.reason}")
    raise TypeError(f"not a compatibility decision: {decision!r}")


def module_preamble(modules: list[str]) -> str:
    """The module-load line to run before capturing the environment."""
    if not modules:
        return ""
    return "module load " + " ".join(modules)


_SAFE_TOKEN_RE = re.compile(r"^[\w@%+=:,./$-]+$")


def _sh(token: str) -> str:
    if token and _SAFE_TOKEN_RE.match(token):
        return token
    return shlex.quote(token)


def compose(plan: LaunchPlan) -> str:
    """Render the launch plan to one POSIX-shell-safe command line.

    Environment assignments come first (CHECK_MPI leading when enabled,
    the rest sorted by name), then the scheduler call, the optional
    translation wrapper, and the container invocation. Deterministic for
    equal plans.
    """
    plan.validate()
    tokens: list[str] = []
    if plan.check_mode is not CheckMode.OFF:
        tokens.append(f"{CHECK_VAR}={plan.check_mode.value}")
    for name in sorted(plan.env):
        tokens.append(f"{name}={_sh(plan.env[name])}")
    tokens += ["srun", "-n", str(plan.ntasks)]
    if plan.ntasks_per_node is not None:
        tokens.append(f"--ntasks-per-node={plan.ntasks_per_node}")
    if plan.account:
        tokens += ["-A", _sh(plan.account)]
    if plan.partition:
        tokens += ["-p", _sh(plan.partition)]
    if plan.wrapper is not None:
        tokens += [
            "mpixlate",
            "-s",
            _sh(plan.wrapper.source_tag),
            "-t",
            _sh(plan.wrapper.target_tag),
        ]
    tokens += ["singularity", plan.runtime_verb.value, _sh(plan.image)]
    tokens += [_sh(arg) for arg in plan.inner_command]
    return " ".join(tokens)


def translation_env_adjustment(base: BindPlan, mpixlate_lib_dir: str) -> BindPlan:
    """Prepend the translator's library directory to a bind plan.

    The translator's libraries must win resolution ahead of everything
    else, so its directory sorts first in the rendered search path.
    """
    prepend = BindPlan(
        binds=[BindSpec(source=mpixlate_lib_dir)],
        lib_dirs=[mpixlate_lib_dir],
    )
    return merge_plans(base, prepend)
