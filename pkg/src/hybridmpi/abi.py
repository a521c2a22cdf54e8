"""MPI implementation classification and host-compatibility decisions.

An MPI library identifies itself through the banner returned by
``MPI_Get_library_version`` (or printed by ``mpichversion`` style tools).
This module classifies such banners into a concrete implementation flavor
and decides whether a container built against that implementation can run
on a Cray MPICH host by direct library binding, needs runtime ABI
translation, or cannot run at all.

The compatibility table is closed-world: only the combinations that are
known to work are accepted, everything else is reported as incompatible
with a reason.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

__all__ = [
    "CrayMpich",
    "Mpich",
    "OpenMpi",
    "Unknown",
    "MpiFlavor",
    "DirectBind",
    "RequiresTranslation",
    "Incompatible",
    "CompatDecision",
    "classify_version_banner",
    "decide_compatibility",
    "parse_soname",
    "CRAY_MPICH_SONAME_MAJOR",
    "TRANSLATION_SOURCE_TAG",
    "TRANSLATION_TARGET_TAG",
]

# ABI major of the Cray MPICH libmpi soname (libmpi.so.12). Direct binding
# is keyed on this number, not on exact version text.
CRAY_MPICH_SONAME_MAJOR = 12

# Translator tags for the one supported translation pair.
TRANSLATION_SOURCE_TAG = "ompi.40"
TRANSLATION_TARGET_TAG = "cmpich.12"


@dataclass(frozen=True)
class CrayMpich:
    """Cray MPICH, e.g. release 8.1.27.26 tracking ANL MPICH 3.4a2."""

    release: str
    anl_base: str


@dataclass(frozen=True)
class Mpich:
    """Vanilla MPICH with its build-time ABI triple (current:revision:age)."""

    version: str
    abi_triple: tuple[int, int, int] | None
    device: str = ""

    @property
    def abi_current(self) -> int | None:
        return self.abi_triple[0] if self.abi_triple else None


@dataclass(frozen=True)
class OpenMpi:
    version: tuple[int, int, int]

    @property
    def major(self) -> int:
        return self.version[0]


@dataclass(frozen=True)
class Unknown:
    raw: str


MpiFlavor = CrayMpich | Mpich | OpenMpi | Unknown


@dataclass(frozen=True)
class DirectBind:
    """The host MPI can be bind-mounted over the container MPI as-is."""


@dataclass(frozen=True)
class RequiresTranslation:
    """Runtime ABI translation is needed; Fortran apps are not supported."""

    source_tag: str
    target_tag: str
    fortran_supported: bool = False

    def __post_init__(self) -> None:
        if not self.source_tag or not self.target_tag:
            raise ValueError("translation tags must be non-empty")
        if self.fortran_supported:
            raise ValueError("Fortran is never supported under ABI translation")


@dataclass(frozen=True)
class Incompatible:
    reason: str


CompatDecision = DirectBind | RequiresTranslation | Incompatible


_CRAY_RE = re.compile(r"CRAY MPICH version (\S+) \(ANL base ([^)]+)\)")
_MPICH_VERSION_RE = re.compile(r"^MPICH Version:\s*(\S+)", re.MULTILINE)
_MPICH_ABI_RE = re.compile(r"^MPICH ABI:\s*(\d+):(\d+):(\d+)", re.MULTILINE)
_MPICH_DEVICE_RE = re.compile(r"^MPICH Device:\s*(\S+)", re.MULTILINE)
_OPENMPI_RE = re.compile(r"Open MPI v(\d+)\.(\d+)\.(\d+)")
_SONAME_RE = re.compile(r"^libmpi\.so\.(\d+)")


def classify_version_banner(banner: str) -> MpiFlavor:
    """Classify an MPI version banner into its implementation flavor.

    Matching is attempted in priority order (Cray MPICH, MPICH, Open MPI);
    anything unrecognized falls back to ``Unknown`` carrying the raw text.
    """
    m = _CRAY_RE.search(banner)
    if m:
        return CrayMpich(release=m.group(1), anl_base=m.group(2))

    m = _MPICH_VERSION_RE.search(banner)
    if m:
        version = m.group(1)
        abi = _MPICH_ABI_RE.search(banner)
        triple = tuple(int(g) for g in abi.groups()) if abi else None
        device = _MPICH_DEVICE_RE.search(banner)
        return Mpich(
            version=version,
            abi_triple=triple,  # type: ignore[arg-type]
            device=device.group(1) if device else "",
        )

    m = _OPENMPI_RE.search(banner)
    if m:
        return OpenMpi(version=(int(m.group(1)), int(m.group(2)), int(m.group(3))))

    return Unknown(raw=banner)


def decide_compatibility(
    container: MpiFlavor, host: MpiFlavor, app_uses_fortran: bool = False
) -> CompatDecision:
    """Decide how a container MPI can run against the host MPI.

    The host must be Cray MPICH; only three container outcomes exist:
    direct binding (MPICH with ABI major 12, or Cray MPICH itself),
    runtime translation (Open MPI 4.x, C/C++ applications only), or
    incompatible. ``app_uses_fortran`` is caller-declared; binaries are
    never inspected here.
    """
    if not isinstance(host, CrayMpich):
        return Incompatible(
            reason="unsupported host MPI: only Cray MPICH hosts are handled"
        )

    if isinstance(container, CrayMpich):
        return DirectBind()

    if isinstance(container, Mpich):
        if container.abi_current == CRAY_MPICH_SONAME_MAJOR:
            return DirectBind()
        have = (
            ":".join(str(n) for n in container.abi_triple)
            if container.abi_triple
            else "undeclared"
        )
        return Incompatible(
            reason=(
                f"MPICH ABI {have} does not match host soname major "
                f"{CRAY_MPICH_SONAME_MAJOR}"
            )
        )

    if isinstance(container, OpenMpi):
        if container.major != 4:
            return Incompatible(
                reason=(
                    f"Open MPI {container.major}.x has no ABI translation "
                    "support (only 4.x is translatable)"
                )
            )
        if app_uses_fortran:
            return Incompatible(
                reason="ABI translation of Fortran MPI applications is not supported"
            )
        return RequiresTranslation(
            source_tag=TRANSLATION_SOURCE_TAG, target_tag=TRANSLATION_TARGET_TAG
        )

    return Incompatible(reason="unrecognized container MPI implementation")


def parse_soname(filename: str) -> int | None:
    """Extract the ABI major from an MPI library soname.

    Returns N for names of the form ``libmpi.so.N[...]``, None otherwise.
    A leading directory part is ignored.
    """
    base = filename.rsplit("/", 1)[-1]
    m = _SONAME_RE.match(base)
    return int(m.group(1)) if m else None
