"""Banner classification, compatibility decisions, soname parsing."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridmpi.abi import (
    CRAY_MPICH_SONAME_MAJOR,
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

CRAY_BANNER = "MPI VERSION    : CRAY MPICH version 8.1.27.26 (ANL base 3.4a2)"
MPICH_BANNER = (
    "MPICH Version:\t3.4a2\n"
    "MPICH Release date:\tWed Dec 18 14:46:35 CST 2019\n"
    "MPICH ABI:\t12:0:0\n"
    "MPICH Device:\tch3:nemesis\n"
)
OPENMPI_BANNER = (
    "Open MPI v4.1.6, package: Debian OpenMPI, ident: 4.1.6, "
    "repo rev: v4.1.6, Sep 30, 2023"
)

HOST = CrayMpich(release="8.1.27.26", anl_base="3.4a2")


class TestClassifyVersionBanner:
    def test_cray_banner(self):
        assert classify_version_banner(CRAY_BANNER) == CrayMpich(
            release="8.1.27.26", anl_base="3.4a2"
        )

    def test_mpich_banner(self):
        assert classify_version_banner(MPICH_BANNER) == Mpich(
            version="3.4a2", abi_triple=(12, 0, 0), device="ch3:nemesis"
        )

    def test_openmpi_banner(self):
        assert classify_version_banner(OPENMPI_BANNER) == OpenMpi(version=(4, 1, 6))

    def test_unknown_fallback_keeps_raw(self):
        flavor = classify_version_banner("Intel(R) MPI Library 2021.9")
        assert flavor == Unknown(raw="Intel(R) MPI Library 2021.9")

    def test_cray_wins_over_embedded_mpich_text(self):
        # a Cray banner inside larger output still classifies as Cray
        text = CRAY_BANNER + "\nMPI BUILD INFO : Fri Aug 11  0:25 2023 (git hash 55e934a)\n"
        assert isinstance(classify_version_banner(text), CrayMpich)

    def test_mpich_without_abi_line(self):
        flavor = classify_version_banner("MPICH Version:\t4.1\n")
        assert flavor == Mpich(version="4.1", abi_triple=None, device="")

    def test_deterministic(self):
        assert classify_version_banner(CRAY_BANNER) == classify_version_banner(
            CRAY_BANNER
        )

    @given(st.text(max_size=200))
    def test_total_over_arbitrary_text(self, text):
        classify_version_banner(text)  # must not raise


class TestDecideCompatibility:
    # the full decision matrix, one row per (container, fortran) pair
    MATRIX = [
        (Mpich("3.4a2", (12, 0, 0), "ch3:nemesis"), False, DirectBind),
        (Mpich("3.4a2", (12, 0, 0), "ch3:nemesis"), True, DirectBind),
        (CrayMpich("8.1.27.26", "3.4a2"), False, DirectBind),
        (CrayMpich("8.1.27.26", "3.4a2"), True, DirectBind),
        (OpenMpi((4, 1, 6)), False, RequiresTranslation),
        (OpenMpi((4, 1, 6)), True, Incompatible),
        (OpenMpi((5, 0, 0)), False, Incompatible),
        (OpenMpi((5, 0, 0)), True, Incompatible),
        (Unknown("???"), False, Incompatible),
        (Unknown("???"), True, Incompatible),
    ]

    @pytest.mark.parametrize("container,fortran,expected", MATRIX)
    def test_matrix(self, container, fortran, expected):
        decision = decide_compatibility(container, HOST, app_uses_fortran=fortran)
        assert isinstance(decision, expected)

    def test_translation_tags(self):
        decision = decide_compatibility(OpenMpi((4, 1, 6)), HOST)
        assert decision == RequiresTranslation(
            source_tag="ompi.40", target_tag="cmpich.12"
        )
        assert decision.fortran_supported is False

    def test_fortran_reason_names_the_restriction(self):
        decision = decide_compatibility(OpenMpi((4, 1, 6)), HOST, app_uses_fortran=True)
        assert isinstance(decision, Incompatible)
        assert "Fortran" in decision.reason

    def test_mpich_wrong_abi_major(self):
        decision = decide_compatibility(Mpich("4.1", (14, 0, 2)), HOST)
        assert isinstance(decision, Incompatible)

    def test_mpich_without_abi_declared(self):
        decision = decide_compatibility(Mpich("3.4a2", None), HOST)
        assert isinstance(decision, Incompatible)

    def test_non_cray_host_rejected(self):
        decision = decide_compatibility(
            Mpich("3.4a2", (12, 0, 0)), OpenMpi((4, 1, 6))
        )
        assert isinstance(decision, Incompatible)

    def test_translation_never_claims_fortran_support(self):
        with pytest.raises(ValueError):
            RequiresTranslation("a", "b", fortran_supported=True)

    def test_direct_bind_only_on_matching_major(self):
        for major in (0, 1, 11, 13, 120):
            decision = decide_compatibility(Mpich("x", (major, 0, 0)), HOST)
            assert isinstance(decision, Incompatible), major
        assert isinstance(
            decide_compatibility(Mpich("x", (CRAY_MPICH_SONAME_MAJOR, 0, 0)), HOST),
            DirectBind,
        )


class TestParseSoname:
    @pytest.mark.parametrize(
        "name,expected",
        [
            ("libmpi.so.12", 12),
            ("libmpi.so.12.0.0", 12),
            ("/opt/cray/pe/lib64/libmpi.so.12.0.0", 12),
            ("libmpifort.so", None),
            ("libmpi.so", None),
            ("libfabric.so.1", None),
            ("", None),
        ],
    )
    def test_cases(self, name, expected):
        assert parse_soname(name) == expected
