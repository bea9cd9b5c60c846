import sys
import time

import numpy as np
import pytest

from selfmap.packers import (
    CommandFailed,
    ParseError,
    UnpackFailed,
    UnpackPlan,
    WeakPatternError,
    identify_packer,
    load_signature_db,
    match_at,
    select_plans,
    unpack,
    unpack_with_fallback,
)
from selfmap.peformat import parse_pe

from helpers import build_pe, oracle_scan

UPX_LINE = "UPX 2.x = 60 BE ?? ?? ?? ?? 8D BE (ep_only)"
UPX_EP_BYTES = bytes([0x60, 0xBE, 0x00, 0x10, 0x40, 0x00, 0x8D, 0xBE])


def test_load_single_signature():
    db = load_signature_db(UPX_LINE)
    assert len(db) == 1
    sig = db[0]
    assert sig.name == "UPX 2.x"
    assert len(sig.pattern) == 8
    assert sum(1 for b in sig.pattern if b is None) == 4
    assert sig.ep_only is True


def test_weak_patterns_rejected():
    with pytest.raises(WeakPatternError):
        load_signature_db("X = ?? ??")
    with pytest.raises(WeakPatternError):
        load_signature_db("Y = ?? ?? ?? ??")


def test_empty_and_commented_document():
    assert load_signature_db("") == []
    assert load_signature_db("# just a comment\n\n   \n") == []


def test_parse_error_carries_line_number():
    with pytest.raises(ParseError) as info:
        load_signature_db("ok = 01 02 03 04\nbroken line without equals")
    assert info.value.line_no == 2


def test_duplicate_names_allowed():
    db = load_signature_db("P = 01 02 03 04\nP = 05 06 07 08 09")
    assert [s.name for s in db] == ["P", "P"]


def _fixture_with_ep_bytes(ep_bytes: bytes, extra: bytes = b""):
    payload = bytearray(b"\xCC" * 0x100)
    payload[0x40 : 0x40 + len(ep_bytes)] = ep_bytes
    payload[0x80 : 0x80 + len(extra)] = extra
    data = build_pe([(".text", 0x200, bytes(payload), 0x1000, 0x100)], entry_rva=0x1040)
    return data, parse_pe(data)


def test_upx_style_match_at_entry_point():
    data, layout = _fixture_with_ep_bytes(UPX_EP_BYTES)
    db = load_signature_db(UPX_LINE)
    report = identify_packer(data, layout, db)
    assert len(report.matches) == 1
    match = report.matches[0]
    assert match.name == "UPX 2.x"
    assert match.offset == layout.entry_offset() == 0x240
    assert match.ep_only


def test_no_match_on_clean_file():
    data, layout = _fixture_with_ep_bytes(b"\x55\x8B\xEC\x90")
    db = load_signature_db(UPX_LINE)
    assert identify_packer(data, layout, db).matches == []


def test_longer_signature_listed_first():
    data, layout = _fixture_with_ep_bytes(bytes(range(0x60, 0x6C)))
    db = load_signature_db(
        "short = 60 61 62 63 64 65 66 67 (ep_only)\n"
        "long = 60 61 62 63 64 65 66 67 68 69 6A 6B (ep_only)"
    )
    report = identify_packer(data, layout, db)
    assert [m.name for m in report.matches] == ["long", "short"]


def test_ep_only_never_matches_elsewhere():
    # pattern bytes appear both at the EP and deeper in the section
    data, layout = _fixture_with_ep_bytes(UPX_EP_BYTES, extra=UPX_EP_BYTES)
    db = load_signature_db(UPX_LINE)
    report = identify_packer(data, layout, db)
    assert [m.offset for m in report.matches] == [layout.entry_offset()]


def test_unmapped_entry_point_diagnosed_but_scan_runs():
    payload = b"\xCC" * 0x20 + UPX_EP_BYTES + b"\xCC" * 0x20
    data = build_pe([(".text", 0x200, payload, 0x1000, len(payload))], entry_rva=0x8000)
    layout = parse_pe(data)
    db = load_signature_db(
        "EPSIG = 60 BE ?? ?? ?? ?? 8D BE (ep_only)\nSCANSIG = 60 BE ?? ?? ?? ?? 8D BE"
    )
    report = identify_packer(data, layout, db)
    assert report.diagnostics, "expected an entry-point diagnostic"
    assert [m.name for m in report.matches] == ["SCANSIG"]
    assert report.matches[0].offset == 0x220


def test_scan_matches_equal_naive_oracle(rng):
    for trial in range(30):
        size = int(rng.integers(64, 512))
        payload = bytes(rng.integers(0, 256, size, dtype=np.uint8))
        pattern_len = int(rng.integers(4, 12))
        pattern = [
            None if rng.random() < 0.3 else int(rng.integers(0, 256))
            for _ in range(pattern_len)
        ]
        if all(p is None for p in pattern):
            pattern[0] = 0x42
        # inject the pattern at a random position so at least one hit exists
        inject_at = int(rng.integers(0, size - pattern_len))
        buf = bytearray(payload)
        for i, want in enumerate(pattern):
            if want is not None:
                buf[inject_at + i] = want
        payload = bytes(buf)

        data = build_pe([(".text", 0x200, payload, 0x1000, size)], entry_rva=0x1000)
        layout = parse_pe(data)
        line = " ".join("??" if p is None else f"{p:02X}" for p in pattern)
        db = load_signature_db(f"probe = {line}")
        got = sorted(m.offset for m in identify_packer(data, layout, db).matches)
        expected = sorted(0x200 + off for off in oracle_scan(payload, tuple(pattern)))
        assert got == expected
        assert 0x200 + inject_at in got


def test_match_at_respects_bounds():
    assert not match_at(b"\x01\x02", 1, (0x02, 0x03))
    assert match_at(b"\x01\x02\x03", 1, (0x02, None))


def test_unpack_plan_placeholder_validation():
    with pytest.raises(ValueError):
        UnpackPlan("x", "tool {in}")
    with pytest.raises(ValueError):
        UnpackPlan("x", "tool {in} {out} {out}")


def test_unpack_success_with_append_double(tmp_path):
    src = tmp_path / "packed.bin"
    src.write_bytes(b"A" * 64)
    plan = UnpackPlan(
        "double",
        f"{sys.executable} -c "
        "\"import sys,shutil; shutil.copy(sys.argv[1], sys.argv[2]); "
        "open(sys.argv[2],'ab').write(b'x')\" {in} {out}",
        timeout=30,
    )
    out = unpack(src, plan)
    assert out.exists()
    assert out.read_bytes() == b"A" * 64 + b"x"


def test_unpack_failure_when_nothing_written(tmp_path):
    src = tmp_path / "packed.bin"
    src.write_bytes(b"A" * 64)
    plan = UnpackPlan("noop", f"{sys.executable} -c pass {{in}} {{out}}", timeout=30)
    with pytest.raises(UnpackFailed):
        unpack(src, plan)


def test_unpack_failure_when_output_identical(tmp_path):
    src = tmp_path / "packed.bin"
    src.write_bytes(b"A" * 64)
    plan = UnpackPlan(
        "copy",
        f"{sys.executable} -c "
        "\"import sys,shutil; shutil.copy(sys.argv[1], sys.argv[2])\" {in} {out}",
        timeout=30,
    )
    with pytest.raises(UnpackFailed):
        unpack(src, plan)


def test_unpack_timeout(tmp_path):
    src = tmp_path / "packed.bin"
    src.write_bytes(b"A" * 64)
    plan = UnpackPlan(
        "sleepy",
        f"{sys.executable} -c \"import time; time.sleep(30)\" {{in}} {{out}}",
        timeout=1.0,
    )
    start = time.monotonic()
    with pytest.raises(CommandFailed):
        unpack(src, plan)
    assert time.monotonic() - start < 10


def test_unpack_nonzero_exit(tmp_path):
    src = tmp_path / "packed.bin"
    src.write_bytes(b"A" * 64)
    plan = UnpackPlan(
        "failing", f"{sys.executable} -c \"raise SystemExit(3)\" {{in}} {{out}}", timeout=30
    )
    with pytest.raises(CommandFailed):
        unpack(src, plan)


def test_plan_selection_prefix_and_generic_fallback():
    plans = [
        UnpackPlan("generic", "g {in} {out}"),
        UnpackPlan("UPX", "u {in} {out}"),
        UnpackPlan("UPX 2", "u2 {in} {out}"),
    ]
    chosen = select_plans("UPX 2.x", plans)
    assert [p.packer_name for p in chosen] == ["UPX 2", "UPX", "generic"]
    assert [p.packer_name for p in select_plans("Petite 1.4", plans)] == ["generic"]


def test_unpack_with_fallback_uses_generic(tmp_path):
    src = tmp_path / "packed.bin"
    src.write_bytes(b"B" * 32)
    plans = [
        UnpackPlan("UPX", f"{sys.executable} -c \"raise SystemExit(1)\" {{in}} {{out}}"),
        UnpackPlan(
            "generic",
            f"{sys.executable} -c "
            "\"import sys,shutil; shutil.copy(sys.argv[1], sys.argv[2]); "
            "open(sys.argv[2],'ab').write(b'!')\" {in} {out}",
        ),
    ]
    out, plan = unpack_with_fallback(src, "UPX 3.96", plans)
    assert plan.packer_name == "generic"
    assert out.read_bytes().endswith(b"!")
