"""Trace parsing: line grammar, dedupe rules, shared-object filtering.

Expected values for the fixture log were hand-derived from the file by
applying the documented line grammar (strace 5.x, default quoting)
before the parser existed.
"""

from hypothesis import given, settings
from hypothesis import strategies as st

from hybridmpi.trace import (
    FILE_SYSCALLS,
    Failure,
    FileAccessSet,
    Success,
    TraceEvent,
    collect_accesses,
    filter_shared_libraries,
    parse_trace_line,
    render_trace_line,
)

# Hand-derived expectations for tests/data/trace_sample.log.
SAMPLE_PATHS = [
    "/opt/cray/pe/mpich/8.1.27/ofi/gnu/9.1/bin/mpiexec",
    "/etc/ld.so.preload",
    "/etc/ld.so.cache",
    "/opt/cray/pe/mpich/8.1.27/ofi/gnu/9.1/lib/libmpi_gnu_91.so.12",
    "/opt/cray/pe/lib64/libpals.so.0",
    "/usr/lib64/libfabric.so.1",
    "/opt/cray/xpmem/default/lib64/libxpmem.so.0",
    "/opt/cray/pe/mpich/8.1.27/ofi/gnu/9.1/lib/libmpifort_gnu_91.so.12",
    "/container/mpi/lib/libmpi.so.12",
    "/usr/lib64/libcxi.so.1",
    "/usr/lib64/libjansson.so.4",
    "/proc/self/maps",
]
SAMPLE_LIBS = [
    "/opt/cray/pe/mpich/8.1.27/ofi/gnu/9.1/lib/libmpi_gnu_91.so.12",
    "/opt/cray/pe/lib64/libpals.so.0",
    "/usr/lib64/libfabric.so.1",
    "/opt/cray/xpmem/default/lib64/libxpmem.so.0",
    "/opt/cray/pe/mpich/8.1.27/ofi/gnu/9.1/lib/libmpifort_gnu_91.so.12",
    "/container/mpi/lib/libmpi.so.12",
    "/usr/lib64/libjansson.so.4",
]


class TestParseTraceLine:
    def test_plain_openat_success(self):
        ev = parse_trace_line(
            'openat(AT_FDCWD, "/usr/lib/libmpi.so.12", O_RDONLY|O_CLOEXEC) = 3'
        )
        assert ev == TraceEvent(
            syscall="openat", path="/usr/lib/libmpi.so.12", outcome=Success(3)
        )

    def test_pid_prefixed_failure(self):
        ev = parse_trace_line(
            '[pid 12345] openat(AT_FDCWD, "/lib/ld-linux-x86-64.so.2", '
            "O_RDONLY|O_CLOEXEC) = -1 ENOENT (No such file or directory)"
        )
        assert ev == TraceEvent(
            syscall="openat",
            path="/lib/ld-linux-x86-64.so.2",
            outcome=Failure("ENOENT"),
            pid=12345,
        )

    def test_bare_pid_prefix(self):
        # strace -f -o writes "PID syscall(...)" without brackets
        ev = parse_trace_line('51234 access("/etc/ld.so.preload", R_OK) = -1 ENOENT (No such file or directory)')
        assert ev is not None
        assert ev.pid == 51234
        assert ev.outcome == Failure("ENOENT")

    def test_empty_line(self):
        assert parse_trace_line("") is None

    def test_signal_notice(self):
        assert parse_trace_line("--- SIGCHLD {si_signo=SIGCHLD} ---") is None

    def test_exit_notice(self):
        assert parse_trace_line("+++ exited with 0 +++") is None

    def test_unfinished_fragment(self):
        line = 'openat(AT_FDCWD, "/etc/passwd" <unfinished ...>'
        assert parse_trace_line(line) is None

    def test_resumed_fragment(self):
        assert parse_trace_line("<... openat resumed>) = 3") is None

    def test_ignored_syscall(self):
        assert parse_trace_line('unlink("/tmp/x") = 0') is None

    def test_relative_path_discarded(self):
        assert parse_trace_line('access("mpitest.log", F_OK) = 0') is None

    def test_truncated_path_discarded(self):
        line = 'openat(AT_FDCWD, "/opt/very/long/pat"..., O_RDONLY) = 5'
        assert parse_trace_line(line) is None

    def test_escaped_quote_in_path(self):
        ev = parse_trace_line('open("/tmp/we\\"ird.so", O_RDONLY) = 3')
        assert ev is not None
        assert ev.path == '/tmp/we"ird.so'

    def test_execve_takes_first_quoted_argument(self):
        ev = parse_trace_line(
            'execve("/usr/bin/true", ["true"], 0x7ffc12345678 /* 12 vars */) = 0'
        )
        assert ev is not None
        assert ev.path == "/usr/bin/true"
        assert ev.syscall == "execve"

    def test_recognized_syscall_set(self):
        assert "openat" in FILE_SYSCALLS
        assert "statx" in FILE_SYSCALLS
        assert "unlink" not in FILE_SYSCALLS


class TestCollectAccesses:
    def test_failure_then_success_dedupes_to_success(self):
        lines = [
            'openat(AT_FDCWD, "/a/libx.so", O_RDONLY) = -1 ENOENT (No such file or directory)',
            'openat(AT_FDCWD, "/a/libx.so", O_RDONLY) = 3',
        ]
        acc = collect_accesses(lines)
        assert len(acc) == 1
        assert acc.accesses["/a/libx.so"] == Success(3)

    def test_success_never_downgraded(self):
        lines = [
            'openat(AT_FDCWD, "/a/libx.so", O_RDONLY) = 3',
            'openat(AT_FDCWD, "/a/libx.so", O_RDONLY) = -1 EACCES (Permission denied)',
        ]
        acc = collect_accesses(lines)
        assert acc.accesses["/a/libx.so"] == Success(3)

    def test_empty_input(self):
        acc = collect_accesses([])
        assert len(acc) == 0
        assert acc.source_line_count == 0

    def test_first_seen_order_preserved(self):
        lines = [
            'open("/b/lib2.so", O_RDONLY) = 3',
            'open("/a/lib1.so", O_RDONLY) = 4',
        ]
        acc = collect_accesses(lines)
        assert list(acc.accesses) == ["/b/lib2.so", "/a/lib1.so"]

    def test_sample_log_counters(self, read_data):
        acc = collect_accesses(read_data("trace_sample.log").splitlines())
        assert acc.source_line_count == 17
        assert list(acc.accesses) == SAMPLE_PATHS
        assert acc.ignored_syscalls == 1  # chdir
        assert acc.truncated_paths == 1
        assert acc.relative_paths == 1
        assert acc.skipped_lines == 2  # SIGCHLD notice + exit notice


class TestFilterSharedLibraries:
    def test_sample_log_libraries(self, read_data):
        acc = collect_accesses(read_data("trace_sample.log").splitlines())
        assert filter_shared_libraries(acc) == SAMPLE_LIBS

    def test_cache_files_not_libraries(self):
        acc = FileAccessSet(accesses={"/etc/ld.so.cache": Success(3)})
        assert filter_shared_libraries(acc) == []

    def test_versioned_suffix_matches(self):
        acc = FileAccessSet(accesses={"/x/libfoo.so.1.2.3": Success(3)})
        assert filter_shared_libraries(acc) == ["/x/libfoo.so.1.2.3"]

    def test_failures_excluded(self):
        acc = FileAccessSet(accesses={"/x/libbar.so": Failure("ENOENT")})
        assert filter_shared_libraries(acc) == []

    def test_non_numeric_suffix_rejected(self):
        acc = FileAccessSet(accesses={"/x/libfoo.so.conf": Success(3)})
        assert filter_shared_libraries(acc) == []


SYSCALL_NAMES = st.sampled_from(sorted(FILE_SYSCALLS))
# Paths without the escape metacharacters the renderer handles specially,
# plus a separate test for those.
PATH_SEGMENTS = st.text(
    alphabet=st.characters(
        codec="utf-8", exclude_characters='\x00\n"\\', exclude_categories=("Cs",)
    ),
    min_size=1,
    max_size=12,
)


@st.composite
def trace_events(draw):
    segs = draw(st.lists(PATH_SEGMENTS, min_size=1, max_size=4))
    path = "/" + "/".join(segs)
    if draw(st.booleans()):
        outcome = Success(draw(st.integers(min_value=0, max_value=1023)))
    else:
        outcome = Failure(draw(st.sampled_from(["ENOENT", "EACCES", "ELOOP"])))
    pid = draw(st.one_of(st.none(), st.integers(min_value=1, max_value=4194304)))
    return TraceEvent(
        syscall=draw(SYSCALL_NAMES), path=path, outcome=outcome, pid=pid
    )


class TestProperties:
    @given(trace_events())
    def test_render_parse_round_trip(self, event):
        assert parse_trace_line(render_trace_line(event)) == event

    @given(st.text(max_size=300))
    @settings(max_examples=1000)
    def test_never_raises_on_arbitrary_text(self, line):
        parse_trace_line(line)  # must not raise

    @given(st.lists(st.text(max_size=120), max_size=60))
    def test_accesses_bounded_by_line_count(self, lines):
        acc = collect_accesses(lines)
        assert len(acc) <= len(lines)
        assert acc.source_line_count == len(lines)

    @given(st.lists(st.text(max_size=120), max_size=60))
    def test_filtered_libraries_are_successful_subset(self, lines):
        acc = collect_accesses(lines)
        successful = set(acc.successful_only())
        assert set(filter_shared_libraries(acc)) <= successful
