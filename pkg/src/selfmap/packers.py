"""Packer identification and external unpacker dispatch.

Signatures are simple wildcard byte patterns (PEiD style) loaded from a
line-oriented text database.  Matching is position-exact: entry-point-only
signatures are tested at the entry point's file offset and nowhere else,
the rest are scanned across every section's raw data.  Actual unpacking is
delegated to external tools described by :class:`UnpackPlan`.
"""

from __future__ import annotations

import configparser
import hashlib
import re
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from .peformat import PeLayout

MIN_PATTERN_LEN = 4


class SignatureDbError(ValueError):
    pass


class ParseError(SignatureDbError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class WeakPatternError(SignatureDbError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class UnpackError(RuntimeError):
    pass


class CommandFailed(UnpackError):
    """External command exited non-zero or timed out."""


class UnpackFailed(UnpackError):
    """Command ran but produced no usable output (missing, empty or identical)."""


@dataclass(frozen=True)
class PackerSignature:
    name: str
    pattern: tuple[int | None, ...]  # None is a wildcard byte
    ep_only: bool

    def __len__(self) -> int:
        return len(self.pattern)


@dataclass(frozen=True)
class PackerMatch:
    name: str
    offset: int
    ep_only: bool
    length: int


@dataclass
class MatchReport:
    matches: list[PackerMatch] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter(self.matches)

    def __len__(self) -> int:
        return len(self.matches)


_HEX_BYTE = re.compile(r"^[0-9A-Fa-f]{2}$")
_EP_MARKER = re.compile(r"\(\s*ep_only\s*\)\s*$", re.IGNORECASE)


def parse_signature_line(line: str, line_no: int) -> PackerSignature | None:
    """Parse one DB line; returns None for blanks and comments."""
    if "#" in line:
        line = line.split("#", 1)[0]
    line = line.strip()
    if not line:
        return None
    if "=" not in line:
        raise ParseError(line_no, "expected '<name> = <pattern>'")
    name, _, rhs = line.partition("=")
    name = name.strip()
    if not name:
        raise ParseError(line_no, "empty signature name")
    rhs = rhs.strip()
    ep_only = False
    marker = _EP_MARKER.search(rhs)
    if marker:
        ep_only = True
        rhs = rhs[: marker.start()].strip()
    if not rhs:
        raise ParseError(line_no, "empty pattern")
    pattern: list[int | None] = []
    for token in rhs.split():
        if token == "??":
            pattern.append(None)
        elif _HEX_BYTE.match(token):
            pattern.append(int(token, 16))
        else:
            raise ParseError(line_no, f"bad pattern token {token!r}")
    if len(pattern) < MIN_PATTERN_LEN:
        raise WeakPatternError(
            line_no, f"pattern of {len(pattern)} bytes is too weak (need >= {MIN_PATTERN_LEN})"
        )
    if all(b is None for b in pattern):
        raise WeakPatternError(line_no, "pattern is all wildcards")
    return PackerSignature(name=name, pattern=tuple(pattern), ep_only=ep_only)


def load_signature_db(text: str) -> list[PackerSignature]:
    """Load a signature database document.  Duplicate names are allowed
    (packer variants); weak patterns are rejected outright."""
    signatures = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        sig = parse_signature_line(line, line_no)
        if sig is not None:
            signatures.append(sig)
    return signatures


def _pattern_regex(pattern: tuple[int | None, ...]) -> re.Pattern[bytes]:
    parts = [b"." if b is None else re.escape(bytes([b])) for b in pattern]
    # Lookahead so overlapping occurrences are all reported.
    return re.compile(b"(?=" + b"".join(parts) + b")", re.DOTALL)


def match_at(data: bytes, offset: int, pattern: tuple[int | None, ...]) -> bool:
    if offset < 0 or offset + len(pattern) > len(data):
        return False
    for i, want in enumerate(pattern):
        if want is not None and data[offset + i] != want:
            return False
    return True


def identify_packer(
    data: bytes, layout: PeLayout, db: list[PackerSignature]
) -> MatchReport:
    """Match every signature in ``db`` against ``data``.

    Entry-point-only signatures are tested at exactly the entry point's file
    offset.  Other signatures are scanned over each section's raw range (a
    match must fit entirely inside the section).  Results are ordered with
    ep_only matches first, then longer patterns before shorter ones.
    """
    report = MatchReport()
    seen: set[tuple[str, int, bool]] = set()

    ep_offset = layout.entry_offset()
    if ep_offset is None:
        report.diagnostics.append(
            f"entry point RVA 0x{layout.entry_point_rva:X} maps into no section; "
            "ep_only signatures skipped"
        )
    else:
        for sig in db:
            if sig.ep_only and match_at(data, ep_offset, sig.pattern):
                key = (sig.name, ep_offset, True)
                if key not in seen:
                    seen.add(key)
                    report.matches.append(
                        PackerMatch(sig.name, ep_offset, True, len(sig))
                    )

    for sig in db:
        if sig.ep_only:
            continue
        regex = _pattern_regex(sig.pattern)
        for section in layout.sections:
            lo, hi = section.raw_offset, section.raw_offset + section.raw_size
            region = data[lo:hi]
            for m in regex.finditer(region):
                if m.start() + len(sig) > len(region):
                    continue
                key = (sig.name, lo + m.start(), False)
                if key not in seen:
                    seen.add(key)
                    report.matches.append(
                        PackerMatch(sig.name, lo + m.start(), False, len(sig))
                    )

    report.matches.sort(key=lambda m: (not m.ep_only, -m.length, m.name, m.offset))
    return report


@dataclass(frozen=True)
class UnpackPlan:
    packer_name: str
    command_template: str
    timeout: float = 60.0

    def __post_init__(self):
        for placeholder in ("{in}", "{out}"):
            if self.command_template.count(placeholder) != 1:
                raise ValueError(
                    f"command template must contain {placeholder} exactly once"
                )


def load_unpack_plans(path: str | Path) -> list[UnpackPlan]:
    """Read unpack plans from an INI file: one section per packer-name
    prefix with ``command`` and optional ``timeout`` keys."""
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    plans = []
    for section in parser.sections():
        command = parser.get(section, "command")
        timeout = parser.getfloat(section, "timeout", fallback=60.0)
        plans.append(UnpackPlan(section, command, timeout))
    return plans


def select_plans(packer_name: str, plans: list[UnpackPlan]) -> list[UnpackPlan]:
    """Plans applicable to ``packer_name``: prefix matches first (longest
    prefix wins), then a plan named ``generic`` as the fallback of last
    resort."""
    lowered = packer_name.lower()
    specific = [
        p
        for p in plans
        if p.packer_name.lower() != "generic" and lowered.startswith(p.packer_name.lower())
    ]
    specific.sort(key=lambda p: -len(p.packer_name))
    fallback = [p for p in plans if p.packer_name.lower() == "generic"]
    return specific + fallback


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def unpack(file: str | Path, plan: UnpackPlan, out_path: str | Path | None = None) -> Path:
    """Run ``plan``'s external command on ``file`` and verify the output.

    The output must exist, be non-empty and differ from the input by content
    hash; anything else raises :class:`UnpackFailed` (the tool could not
    handle this packer).  Non-zero exit or a timeout raises
    :class:`CommandFailed`.
    """
    file = Path(file)
    out = Path(out_path) if out_path is not None else file.with_suffix(file.suffix + ".unpacked")
    argv = [
        token.replace("{in}", str(file)).replace("{out}", str(out))
        for token in shlex.split(plan.command_template)
    ]
    try:
        proc = subprocess.run(
            argv,
            timeout=plan.timeout,
            capture_output=True,
        )
    except subprocess.TimeoutExpired as exc:
        raise CommandFailed(
            f"{plan.packer_name}: timed out after {plan.timeout}s"
        ) from exc
    except OSError as exc:
        raise CommandFailed(f"{plan.packer_name}: {exc}") from exc
    if proc.returncode != 0:
        raise CommandFailed(
            f"{plan.packer_name}: exit {proc.returncode}: {proc.stderr.decode(errors='replace')[:400]}"
        )
    if not out.exists() or out.stat().st_size == 0:
        raise UnpackFailed(f"{plan.packer_name}: produced no output")
    if _sha256(out) == _sha256(file):
        raise UnpackFailed(f"{plan.packer_name}: output identical to input")
    return out


def unpack_with_fallback(
    file: str | Path, packer_name: str, plans: list[UnpackPlan]
) -> tuple[Path, UnpackPlan]:
    """Try the specific plans for ``packer_name`` and then the generic one;
    return the first success.  Raises the last failure when all plans fail."""
    candidates = select_plans(packer_name, plans)
    if not candidates:
        raise UnpackFailed(f"no unpack plan configured for {packer_name!r}")
    last: UnpackError | None = None
    for plan in candidates:
        try:
            return unpack(file, plan), plan
        except UnpackError as exc:
            last = exc
    assert last is not None
    raise last
