"""Tools for running MPI containers against a host MPI stack.

The pipeline: generate a container recipe whose MPI matches the host ABI
(:mod:`.recipes`), trace which host libraries a launch touches
(:mod:`.trace`), turn those into bind mounts (:mod:`.binds`), decide
whether the container MPI can ride the host MPI directly or needs runtime
translation (:mod:`.abi`), compose the batch command (:mod:`.launch`), and
verify the resulting output (:mod:`.verify`).
"""

from .abi import (
    CrayMpich,
    DirectBind,
    Incompatible,
    Mpich,
    OpenMpi,
    RequiresTranslation,
    Unknown,
    classify_version_banner,
    decide_compatibility,
    parse_soname,
)
from .binds import BindPlan, BindSpec, merge_plans, plan_binds, render_env
from .launch import CheckMode, LaunchPlan, RuntimeVerb, Translation, compose
from .recipes import (
    RecipeSpec,
    app_recipe,
    mpich_base_recipe,
    openmpi_base_recipe,
    render_definition,
)
from .trace import (
    FileAccessSet,
    TraceEvent,
    collect_accesses,
    filter_shared_libraries,
    parse_trace_line,
)
from .verify import (
    ComparisonReport,
    DuplicateInstances,
    Healthy,
    OsuResult,
    compare_results,
    detect_duplicate_instances,
    parse_mpitest_output,
    parse_osu_output,
)

__version__ = "0.1.0"

__all__ = [
    "BindPlan",
    "BindSpec",
    "CheckMode",
    "ComparisonReport",
    "CrayMpich",
    "DirectBind",
    "DuplicateInstances",
    "FileAccessSet",
    "Healthy",
    "Incompatible",
    "LaunchPlan",
    "Mpich",
    "OpenMpi",
    "OsuResult",
    "RecipeSpec",
    "RequiresTranslation",
    "RuntimeVerb",
    "TraceEvent",
    "Translation",
    "Unknown",
    "app_recipe",
    "classify_version_banner",
    "collect_accesses",
    "compare_results",
    "compose",
    "decide_compatibility",
    "detect_duplicate_instances",
    "filter_shared_libraries",
    "merge_plans",
    "mpich_base_recipe",
    "openmpi_base_recipe",
    "parse_mpitest_output",
    "parse_osu_output",
    "parse_soname",
    "parse_trace_line",
    "plan_binds",
    "render_definition",
    "render_env",
]
