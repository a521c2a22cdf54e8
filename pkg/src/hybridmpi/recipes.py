"""Container definition-file generation.

Recipes are structured data rendered deterministically to the definition
file syntax understood by Singularity and Apptainer, which keeps the
generated text testable against golden files while allowing parameters
(version, install prefix, mirrors) to vary.

Three reference recipes are provided:

* an MPICH base image whose libmpi soname is patched to the ABI major of
  the Cray host MPI, so the host library can be bound straight over it;
* an Open MPI base image installed from distribution packages, with the
  privileged commands that break rootless proot builds faked out as
  symlinks to /bin/true;
* an application image on top of either base that compiles a small MPI
  check program, the fail-fast init interposer, and the OSU
  micro-benchmarks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = [
    "RegistryImage",
    "LocalImage",
    "Bootstrap",
    "RecipeSpec",
    "mpich_base_recipe",
    "openmpi_base_recipe",
    "app_recipe",
    "render_definition",
    "DEFAULT_BASE_IMAGE",
    "DEFAULT_MPICH_VERSION",
    "DEFAULT_INSTALL_PREFIX",
    "PRELOAD_VAR",
]

DEFAULT_BASE_IMAGE = "ubuntu:24.04"
DEFAULT_MPICH_VERSION = "3.4a2"
DEFAULT_INSTALL_PREFIX = "/container/mpi"
DEFAULT_MPICH_URL = "http://www.mpich.org/static/downloads/${VER}/mpich-${VER}.tar.gz"

# Commands the rootless proot build cannot emulate; replaced by links to
# an always-succeeding command.
DEFAULT_FAKED_COMMANDS = ("/usr/sbin/groupadd", "/usr/sbin/addgroup", "/bin/chgrp")

DEFAULT_TEST_DIR = "/container/test_mpi"
DEFAULT_OSU_PREFIX = "/container/osu"
DEFAULT_OSU_VERSION = "7.4"
DEFAULT_OSU_URL = "http://mvapich.cse.ohio-state.edu/download/mvapich/${OSU_NAME}.tar.gz"

PRELOAD_VAR = "LD_PRELOAD"

# The libmpi soname the patched MPICH must advertise (current:revision:age);
# its major is what the host MPI binds against.
_ABI_SONAME_TRIPLE = "12:0:0"


@dataclass(frozen=True)
class RegistryImage:
    reference: str

    bootstrap_keyword = "docker"

    @property
    def from_value(self) -> str:
        return self.reference


@dataclass(frozen=True)
class LocalImage:
    path: str

    bootstrap_keyword = "localimage"

    @property
    def from_value(self) -> str:
        return self.path


Bootstrap = RegistryImage | LocalImage


@dataclass
class RecipeSpec:
    """Abstract container definition, independent of the file syntax."""

    bootstrap: Bootstrap
    files: list[tuple[str, str]] = field(default_factory=list)
    environment: list[str] = field(default_factory=list)
    post_steps: list[str] = field(default_factory=list)
    runscript: str | None = None
    labels: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        env_preload = any(PRELOAD_VAR in line for line in self.environment)
        run_preload = self.runscript is not None and PRELOAD_VAR in self.runscript
        if env_preload and run_preload:
            raise ValueError(
                "preload activation must live in either %environment or "
                "%runscript, never both"
            )


def mpich_base_recipe(
    mpich_version: str = DEFAULT_MPICH_VERSION,
    install_prefix: str = DEFAULT_INSTALL_PREFIX,
    base_image: str = DEFAULT_BASE_IMAGE,
    download_url: str = DEFAULT_MPICH_URL,
) -> RecipeSpec:
    """Base image building MPICH from source with a patched libmpi soname.

    Static libraries and rpaths are disabled so the dynamic loader is free
    to pick up the bound host MPI, and the ch3 device is used so no
    network interface library needs to exist inside the container.
    """
    if not mpich_version:
        raise ValueError("mpich_version must be non-empty")

    packages = (
        "apt-get update && apt-get -y upgrade --no-install-recommends\n"
        "apt-get -y install --no-install-recommends \\\n"
        "        build-essential wget file ca-certificates \\\n"
        "        gfortran\n"
        "\n"
        "# Cleanup\n"
        "apt-get autoremove -y\n"
        "apt-get clean && rm -rf /var/lib/apt/lists/*"
    )
    fetch = (
        f"VER={mpich_version}\n"
        f"wget -q {download_url}\n"
        "tar xf mpich-${VER}.tar.gz && rm mpich-${VER}.tar.gz\n"
        "cd mpich-${VER}"
    )
    soname_patch = (
        "sed -i 's/libmpi_so_version=\"0:0:0\"/libmpi_so_version=\""
        + _ABI_SONAME_TRIPLE
        + "\"/g' configure"
    )
    build = (
        "FFLAGS='-fallow-argument-mismatch' \\\n"
        f"  ./configure --prefix={install_prefix} --disable-static \\\n"
        "              --disable-rpath --disable-wrapper-rpath \\\n"
        "              --enable-fast=all,O3 --with-device=ch3 \\\n"
        "              --mandir=/usr/share/man > /dev/null\n"
        "make -j$(getconf _NPROCESSORS_ONLN) install > /dev/null\n"
        "cd .. && rm -rf mpich-${VER}"
    )
    exports = (
        f'echo "export PATH={install_prefix}/bin:\\$PATH" >> '
        "${SINGULARITY_ENVIRONMENT}\n"
        f'echo "export LD_LIBRARY_PATH=\\${{LD_LIBRARY_PATH}}:{install_prefix}/lib" >> '
        "${SINGULARITY_ENVIRONMENT}"
    )
    return RecipeSpec(
        bootstrap=RegistryImage(base_image),
        post_steps=[packages, fetch, soname_patch, build, exports],
    )


def openmpi_base_recipe(
    base_image: str = DEFAULT_BASE_IMAGE,
    faked_commands: tuple[str, ...] = DEFAULT_FAKED_COMMANDS,
) -> RecipeSpec:
    """Base image installing the distribution Open MPI packages.

    The first post step replaces privileged commands that rootless proot
    builds cannot emulate with symlinks to /bin/true; nothing is compiled
    from source.
    """
    fake = (
        "# fake some of the commands not available with proot\n"
        f"for f in {' '.join(faked_commands)}; do\n"
        "    rm -rf $f\n"
        "    ln -s /bin/true $f\n"
        "done"
    )
    packages = (
        "apt-get update && apt-get -y upgrade --no-install-recommends\n"
        "apt-get -y install --no-install-recommends \\\n"
        "        build-essential wget libopenmpi-dev\n"
        "\n"
        "# Cleanup\n"
        "apt-get autoremove -y\n"
        "apt-get clean && rm -rf /var/lib/apt/lists/*"
    )
    return RecipeSpec(
        bootstrap=RegistryImage(base_image),
        post_steps=[fake, packages],
    )


def app_recipe(
    base: str,
    preload_via_runscript: bool = False,
    test_dir: str = DEFAULT_TEST_DIR,
    osu_prefix: str = DEFAULT_OSU_PREFIX,
    osu_version: str = DEFAULT_OSU_VERSION,
    osu_url: str = DEFAULT_OSU_URL,
) -> RecipeSpec:
    """Application image on top of a local MPI base image.

    Compiles the MPI check program and the init interposer with the
    container's wrapper compilers and builds the OSU micro-benchmarks.
    The interposer preload goes into %environment by default; with
    ``preload_via_runscript`` it moves into a %runscript that appends to
    any pre-existing preload list, which is required when the launch is
    wrapped by an ABI translator that needs %environment for itself.
    """
    if not base:
        raise ValueError("base image path must be non-empty")

    shim_path = f"{test_dir}/intercept.so"
    packages = (
        "apt-get update && apt-get -y upgrade --no-install-recommends\n"
        "\n"
        "# Cleanup\n"
        "apt-get autoremove -y\n"
        "apt-get clean && rm -rf /var/lib/apt/lists/*"
    )
    compile_tests = (
        f"cd {test_dir}/\n"
        "\n"
        "# Compile mpitest\n"
        "mpicc -o mpitest.x mpitest.c\n"
        "\n"
        "# Compile the intercept library\n"
        "mpicc -shared -fPIC -ldl -o intercept.so intercept.c"
    )
    osu_build = (
        "# Build OSU benchmarks\n"
        f"OSU_NAME=osu-micro-benchmarks-{osu_version}\n"
        f"wget -q {osu_url}\n"
        "tar xf ${OSU_NAME}.tar.gz\n"
        "cd ${OSU_NAME}\n"
        f"./configure --prefix={osu_prefix} CC=$(which mpicc) CXX=$(which mpicxx)\n"
        "make -j$(getconf _NPROCESSORS_ONLN) install\n"
        "cd ..\n"
        "rm -rf ${OSU_NAME} && rm ${OSU_NAME}.tar.gz"
    )

    environment: list[str] = []
    runscript: str | None = None
    if preload_via_runscript:
        runscript = (
            f'export {PRELOAD_VAR}="${{{PRELOAD_VAR}}}${{{PRELOAD_VAR}:+:}}{shim_path}"\n'
            "\n"
            'if test $# -eq 0 || test -z "$@" ; then\n'
            "    bash -norc\n"
            "else\n"
            '    sh -c "$@"\n'
            "fi"
        )
    else:
        environment = [f'export {PRELOAD_VAR}="{shim_path}"']

    return RecipeSpec(
        bootstrap=LocalImage(base),
        files=[("mpitest.c", f"{test_dir}/"), ("intercept.c", f"{test_dir}/")],
        environment=environment,
        post_steps=[packages, compile_tests, osu_build],
        runscript=runscript,
    )


def _indent_block(block: str) -> str:
    return "\n".join(
        "    " + line if line else "" for line in block.split("\n")
    )


def render_definition(recipe: RecipeSpec) -> str:
    """Render a recipe to definition-file text.

    Pure and deterministic: the same recipe always yields byte-identical
    output. Sections appear only when non-empty, in the fixed order
    header, %files, %environment, %post, %runscript, %labels.
    """
    recipe.validate()
    out: list[str] = [
        f"Bootstrap: {recipe.bootstrap.bootstrap_keyword}",
        f"From: {recipe.bootstrap.from_value}",
    ]
    if recipe.files:
        out.append("")
        out.append("%files")
        for source, destination in recipe.files:
            out.append(f"    {source} {destination}")
    if recipe.environment:
        out.append("")
        out.append("%environment")
        for line in recipe.environment:
            out.append(f"    {line}")
    if recipe.post_steps:
        out.append("")
        out.append("%post")
        for i, step in enumerate(recipe.post_steps):
            if i:
                out.append("")
            out.append(_indent_block(step))
    if recipe.runscript is not None:
        out.append("")
        out.append("%runscript")
        out.append(_indent_block(recipe.runscript))
    if recipe.labels:
        out.append("")
        out.append("%labels")
        for key in recipe.labels:
            out.append(f"    {key} {recipe.labels[key]}")
    return "\n".join(out) + "\n"
