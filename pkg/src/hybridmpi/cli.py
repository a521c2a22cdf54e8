"""Command-line entry point.

Subcommands map one-to-one onto the pipeline stages: ``gen-def`` renders
container definitions, ``trace-binds`` turns a syscall trace into bind
environment exports, ``check-abi`` decides compatibility, ``compose-launch``
builds the batch command, ``verify-run`` and ``compare-osu`` judge captured
output. Everything is dry-run by default; only ``compose-launch --execute``
ever spawns the composed command.

Exit codes are uniform: 0 success, 1 verification failure, 2 usage or
input error.
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys

from . import abi, binds, launch, recipes, trace, verify

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_USAGE = 2

# Assumed when no host banner is supplied: the toolchain targets Cray
# MPICH hosts, so compatibility is decided against one.
_DEFAULT_HOST = abi.CrayMpich(release="unspecified", anl_base="unspecified")


def flavor_to_dict(flavor: abi.MpiFlavor) -> dict:
    if isinstance(flavor, abi.CrayMpich):
        return {"kind": "cray-mpich", "release": flavor.release, "anl_base": flavor.anl_base}
    if isinstance(flavor, abi.Mpich):
        triple = (
            ":".join(str(n) for n in flavor.abi_triple) if flavor.abi_triple else None
        )
        return {
            "kind": "mpich",
            "version": flavor.version,
            "abi": triple,
            "device": flavor.device,
        }
    if isinstance(flavor, abi.OpenMpi):
        return {"kind": "open-mpi", "version": ".".join(str(n) for n in flavor.version)}
    return {"kind": "unknown", "raw": flavor.raw}


def describe_flavor(flavor: abi.MpiFlavor) -> str:
    if isinstance(flavor, abi.CrayMpich):
        return f"Cray MPICH {flavor.release} (ANL base {flavor.anl_base})"
    if isinstance(flavor, abi.Mpich):
        triple = (
            ":".join(str(n) for n in flavor.abi_triple)
            if flavor.abi_triple
            else "undeclared ABI"
        )
        return f"MPICH {flavor.version} (ABI {triple}, device {flavor.device or '?'})"
    if isinstance(flavor, abi.OpenMpi):
        return "Open MPI " + ".".join(str(n) for n in flavor.version)
    return "unknown implementation"


def decision_to_dict(decision: abi.CompatDecision) -> dict:
    if isinstance(decision, abi.DirectBind):
        return {"decision": "direct-bind"}
    if isinstance(decision, abi.RequiresTranslation):
        return {
            "decision": "requires-translation",
            "source_tag": decision.source_tag,
            "target_tag": decision.target_tag,
            "fortran_supported": decision.fortran_supported,
        }
    return {"decision": "incompatible", "reason": decision.reason}


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _read(path: str) -> str | None:
    try:
        with open(path, "r", encoding="utf-8", errors="replace") as fh:
            return fh.read()
    except OSError as exc:
        print(f"error: cannot read {path}: {exc.strerror}", file=sys.stderr)
        return None


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--output", metavar="PATH", help="write the result here instead of stdout")
    parser.add_argument("--json", action="store_true", help="emit a machine-readable report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridmpi",
        description="Deploy MPI containers against a host MPI: generate "
        "recipes, plan binds, decide ABI compatibility, compose launches, "
        "verify runs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-def", help="render a container definition file")
    p.add_argument("template", choices=["mpich-base", "openmpi-base", "app"])
    p.add_argument("--mpich-version", default=recipes.DEFAULT_MPICH_VERSION)
    p.add_argument("--install-prefix", default=recipes.DEFAULT_INSTALL_PREFIX)
    p.add_argument("--base-image", default=recipes.DEFAULT_BASE_IMAGE)
    p.add_argument("--base", help="local base image for the app template")
    p.add_argument(
        "--runscript-preload",
        action="store_true",
        help="activate the init interposer from %%runscript instead of %%environment "
        "(required for translation-wrapped launches)",
    )
    _add_common(p)

    p = sub.add_parser("trace-binds", help="derive bind exports from a file-syscall trace")
    p.add_argument("trace_log", metavar="TRACE-LOG")
    p.add_argument(
        "--exclude",
        action="append",
        default=[],
        metavar="PREFIX",
        help="additional in-container prefix no bind may shadow",
    )
    _add_common(p)

    p = sub.add_parser("check-abi", help="decide container/host MPI compatibility")
    p.add_argument("banner_file", metavar="BANNER-FILE")
    p.add_argument("--host-banner", metavar="PATH", help="host banner (default: assume a Cray MPICH host)")
    p.add_argument("--fortran", action="store_true", help="the application uses Fortran MPI")
    _add_common(p)

    p = sub.add_parser("compose-launch", help="compose the batch launch command")
    p.add_argument("image")
    p.add_argument("inner_command", nargs=argparse.REMAINDER, metavar="COMMAND...")
    p.add_argument("--ntasks", "-n", type=int, required=True)
    p.add_argument("--ntasks-per-node", type=int)
    p.add_argument("--account", "-A")
    p.add_argument("--partition", "-p")
    p.add_argument("--check-mpi", choices=["0", "1", "2"], default="0")
    p.add_argument(
        "--translate",
        nargs=2,
        metavar=("SRC", "TGT"),
        help="wrap the launch in an ABI translator with these tags",
    )
    p.add_argument("--verb", choices=["exec", "run"])
    p.add_argument(
        "--env",
        action="append",
        default=[],
        metavar="VAR=VALUE",
        help="extra environment assignment to prefix",
    )
    p.add_argument(
        "--execute",
        action="store_true",
        help="actually run the composed command and capture its output",
    )
    _add_common(p)

    p = sub.add_parser("verify-run", help="check captured run output for failure signatures")
    p.add_argument("stdout_file", metavar="STDOUT-FILE")
    p.add_argument("--expected-ntasks", type=int, required=True)
    _add_common(p)

    p = sub.add_parser("compare-osu", help="compare a benchmark table against a reference")
    p.add_argument("reference", metavar="REF")
    p.add_argument("candidate", metavar="CAND")
    p.add_argument(
        "--tolerance",
        default=str(verify.DEFAULT_REL_TOL),
        help="maximum relative difference accepted (fraction)",
    )
    _add_common(p)

    return parser


def _cmd_gen_def(args: argparse.Namespace) -> int:
    if args.template == "mpich-base":
        if not args.mpich_version:
            print("error: --mpich-version must be non-empty", file=sys.stderr)
            return EXIT_USAGE
        recipe = recipes.mpich_base_recipe(
            mpich_version=args.mpich_version,
            install_prefix=args.install_prefix,
            base_image=args.base_image,
        )
    elif args.template == "openmpi-base":
        recipe = recipes.openmpi_base_recipe(base_image=args.base_image)
    else:
        if not args.base:
            print("error: the app template requires --base", file=sys.stderr)
            return EXIT_USAGE
        recipe = recipes.app_recipe(
            base=args.base, preload_via_runscript=args.runscript_preload
        )
    _emit(recipes.render_definition(recipe), args.output)
    return EXIT_OK


def _cmd_trace_binds(args: argparse.Namespace) -> int:
    text = _read(args.trace_log)
    if text is None:
        return EXIT_USAGE
    accesses = trace.collect_accesses(text.splitlines())
    libs = trace.filter_shared_libraries(accesses)
    if not libs:
        return EXIT_VERIFICATION
    exclusions = list(binds.DEFAULT_EXCLUSIONS)
    for extra in args.exclude:
        if extra not in exclusions:
            exclusions.append(extra)
    plan = binds.plan_binds(libs, exclusions=exclusions)
    if plan.is_empty():
        return EXIT_VERIFICATION
    env = binds.render_env(plan)
    if args.json:
        doc = {
            "libraries": libs,
            "env": env,
            "lib_dirs": plan.lib_dirs,
            "dropped": [{"path": p, "reason": r} for p, r in plan.dropped],
        }
        _emit(json.dumps(doc, indent=2) + "\n", args.output)
    else:
        lines = "".join(f"export {name}={value}\n" for name, value in env.items())
        _emit(lines, args.output)
    return EXIT_OK


def _cmd_check_abi(args: argparse.Namespace) -> int:
    banner = _read(args.banner_file)
    if banner is None:
        return EXIT_USAGE
    container = abi.classify_version_banner(banner)
    host: abi.MpiFlavor = _DEFAULT_HOST
    if args.host_banner:
        host_text = _read(args.host_banner)
        if host_text is None:
            return EXIT_USAGE
        host = abi.classify_version_banner(host_text)
    decision = abi.decide_compatibility(container, host, app_uses_fortran=args.fortran)

    launchable = not isinstance(decision, abi.Incompatible)
    modules = launch.required_modules(decision) if launchable else []
    if args.json:
        doc = {
            "container": flavor_to_dict(container),
            "host": flavor_to_dict(host),
            "fortran": args.fortran,
            **decision_to_dict(decision),
            "modules": modules,
        }
        _emit(json.dumps(doc, indent=2) + "\n", args.output)
    else:
        lines = [
            f"container: {describe_flavor(container)}",
            f"host:      {describe_flavor(host)}",
        ]
        if isinstance(decision, abi.DirectBind):
            lines.append("decision:  direct-bind (host MPI can be bound over the container MPI)")
        elif isinstance(decision, abi.RequiresTranslation):
            lines.append(
                "decision:  requires-translation "
                f"(mpixlate -s {decision.source_tag} -t {decision.target_tag}; no Fortran)"
            )
        else:
            lines.append(f"decision:  incompatible ({decision.reason})")
        if modules:
            lines.append("modules:   " + " ".join(modules))
        _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK if launchable else EXIT_VERIFICATION


def _cmd_compose_launch(args: argparse.Namespace) -> int:
    inner = list(args.inner_command)
    if inner and inner[0] == "--":
        inner = inner[1:]
    env: dict[str, str] = {}
    for item in args.env:
        if "=" not in item:
            print(f"error: --env expects VAR=VALUE, got {item!r}", file=sys.stderr)
            return EXIT_USAGE
        name, _, value = item.partition("=")
        env[name] = value

    wrapper = None
    if args.translate:
        wrapper = launch.Translation(source_tag=args.translate[0], target_tag=args.translate[1])
        if args.verb == "exec":
            print("error: a translated launch must use the run verb", file=sys.stderr)
            return EXIT_USAGE
        verb = launch.RuntimeVerb.RUN
        decision: abi.CompatDecision = abi.RequiresTranslation(
            source_tag=args.translate[0], target_tag=args.translate[1]
        )
    else:
        verb = launch.RuntimeVerb(args.verb) if args.verb else launch.RuntimeVerb.EXEC
        decision = abi.DirectBind()

    plan = launch.LaunchPlan(
        image=args.image,
        inner_command=inner,
        ntasks=args.ntasks,
        ntasks_per_node=args.ntasks_per_node,
        account=args.account,
        partition=args.partition,
        check_mode=launch.CheckMode(args.check_mpi),
        env=env,
        modules=launch.required_modules(decision),
        wrapper=wrapper,
        runtime_verb=verb,
    )
    try:
        command = launch.compose(plan)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    preamble = launch.module_preamble(plan.modules)
    if args.json:
        doc = {"modules": plan.modules, "preamble": preamble, "command": command}
        _emit(json.dumps(doc, indent=2) + "\n", args.output)
    else:
        _emit(f"{preamble}\n{command}\n", args.output)

    if args.execute:
        proc = subprocess.run(
            command, shell=True, capture_output=True, text=True
        )
        sys.stdout.write(proc.stdout)
        sys.stderr.write(proc.stderr)
        return EXIT_OK if proc.returncode == 0 else EXIT_VERIFICATION
    return EXIT_OK


def _cmd_verify_run(args: argparse.Namespace) -> int:
    if args.expected_ntasks < 1:
        print("error: --expected-ntasks must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    text = _read(args.stdout_file)
    if text is None:
        return EXIT_USAGE
    report = verify.parse_mpitest_output(text)
    if not report.blocks:
        print("error: no instance blocks found in output", file=sys.stderr)
        return EXIT_USAGE
    health = verify.detect_duplicate_instances(report, args.expected_ntasks)
    healthy = isinstance(health, verify.Healthy)
    if args.json:
        doc = {
            "blocks": [
                {
                    "nranks": b.nranks,
                    "rank_id": b.rank_id,
                    "flavor": flavor_to_dict(b.flavor),
                }
                for b in report.blocks
            ],
            "expected_ntasks": args.expected_ntasks,
            "verdict": "healthy" if healthy else "duplicate-instances",
        }
        _emit(json.dumps(doc, indent=2) + "\n", args.output)
    else:
        lines = [
            f"block {i}: ranks={b.nranks} rank_id={b.rank_id} {describe_flavor(b.flavor)}"
            for i, b in enumerate(report.blocks)
        ]
        if healthy:
            lines.append(f"verdict: healthy ({args.expected_ntasks} task(s) as expected)")
        else:
            lines.append(
                f"verdict: duplicate instances ({len(report.blocks)} block(s), "
                f"expected a single run of {args.expected_ntasks} task(s))"
            )
        _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK if healthy else EXIT_VERIFICATION


def _cmd_compare_osu(args: argparse.Namespace) -> int:
    ref_text = _read(args.reference)
    cand_text = _read(args.candidate)
    if ref_text is None or cand_text is None:
        return EXIT_USAGE
    try:
        reference = verify.parse_osu_output(ref_text)
        candidate = verify.parse_osu_output(cand_text)
        report = verify.compare_results(reference, candidate, rel_tol=args.tolerance)
    except (verify.MalformedOutputError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.json:
        _emit(json.dumps(report.to_dict(), indent=2) + "\n", args.output)
    else:
        lines = [f"benchmark: {report.benchmark_name}"]
        for c in report.per_size:
            lines.append(
                f"size {c.size}: ref {c.reference} cand {c.candidate} "
                f"rel_diff {c.rel_diff:.6f}"
            )
        for size in report.missing_sizes:
            lines.append(f"size {size}: MISSING from candidate")
        lines.append(
            f"max rel diff {report.max_rel_diff:.6f} vs tolerance {report.tolerance}: "
            + ("PASS" if report.passed else "FAIL")
        )
        _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK if report.passed else EXIT_VERIFICATION


_HANDLERS = {
    "gen-def": _cmd_gen_def,
    "trace-binds": _cmd_trace_binds,
    "check-abi": _cmd_check_abi,
    "compose-launch": _cmd_compose_launch,
    "verify-run": _cmd_verify_run,
    "compare-osu": _cmd_compare_osu,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors, 0 for --help
        return int(exc.code or 0)
    return _HANDLERS[args.command](args)


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
