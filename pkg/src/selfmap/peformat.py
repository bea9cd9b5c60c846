"""Minimal PE (portable executable) layout parser.

Parses just enough of the header chain (DOS stub, COFF header, optional
header magic + entry point, section table) to locate the entry point and
map RVAs to file offsets.  Imports, exports and resources are deliberately
not parsed; nothing downstream consumes them.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

DOS_MAGIC = b"MZ"
PE_MAGIC = b"PE\x00\x00"
OPT_MAGIC_PE32 = 0x10B
OPT_MAGIC_PE32PLUS = 0x20B
SECTION_HEADER_SIZE = 40


class PeFormatError(ValueError):
    """Base class for PE parsing failures."""


class NotPeError(PeFormatError):
    """File lacks the MZ or PE signature."""


class TruncatedHeaderError(PeFormatError):
    """File ends before the header structures do."""


class SectionOutOfBoundsError(PeFormatError):
    """A section's raw data range runs past the end of the file."""


@dataclass(frozen=True)
class PeSection:
    name: str
    raw_offset: int
    raw_size: int
    virtual_rva: int
    virtual_size: int

    def virtual_span(self) -> int:
        # Packers sometimes leave VirtualSize zero; fall back to the raw size.
        return self.virtual_size if self.virtual_size > 0 else self.raw_size

    def contains_rva(self, rva: int) -> bool:
        return self.virtual_rva <= rva < self.virtual_rva + self.virtual_span()


@dataclass(frozen=True)
class PeLayout:
    entry_point_rva: int
    sections: tuple[PeSection, ...]
    image_kind: str  # "pe32" | "pe32plus"
    file_size: int

    def section_containing_rva(self, rva: int) -> PeSection | None:
        for section in self.sections:
            if section.contains_rva(rva):
                return section
        return None

    def rva_to_offset(self, rva: int) -> int | None:
        section = self.section_containing_rva(rva)
        if section is None:
            return None
        delta = rva - section.virtual_rva
        if delta >= section.raw_size:
            return None
        return section.raw_offset + delta

    def entry_section(self) -> PeSection | None:
        return self.section_containing_rva(self.entry_point_rva)

    def entry_offset(self) -> int | None:
        return self.rva_to_offset(self.entry_point_rva)


def _u16(data: bytes, off: int) -> int:
    return struct.unpack_from("<H", data, off)[0]


def _u32(data: bytes, off: int) -> int:
    return struct.unpack_from("<I", data, off)[0]


def parse_pe(data: bytes) -> PeLayout:
    """Parse the header chain of ``data`` and return its :class:`PeLayout`.

    Raises :class:`TruncatedHeaderError` when the file is shorter than the
    structures it declares, :class:`NotPeError` on bad magic values and
    :class:`SectionOutOfBoundsError` when a section's raw range exceeds the
    file.  An entry point that maps into no section is *not* an error here;
    callers observe it through :meth:`PeLayout.entry_section`.
    """
    if len(data) < 64:
        raise TruncatedHeaderError(f"file is {len(data)} bytes, need at least 64")
    if data[0:2] != DOS_MAGIC:
        raise NotPeError("missing MZ signature")
    pe_off = _u32(data, 0x3C)
    # PE signature + COFF header + optional-header magic must fit.
    if pe_off + 4 + 20 + 2 > len(data):
        raise TruncatedHeaderError("PE header offset points past end of file")
    if data[pe_off : pe_off + 4] != PE_MAGIC:
        raise NotPeError("missing PE signature")

    coff = pe_off + 4
    n_sections = _u16(data, coff + 2)
    opt_size = _u16(data, coff + 16)
    opt = coff + 20
    if opt_size < 20 or opt + opt_size > len(data):
        raise TruncatedHeaderError("optional header truncated")

    opt_magic = _u16(data, opt)
    if opt_magic == OPT_MAGIC_PE32:
        image_kind = "pe32"
    elif opt_magic == OPT_MAGIC_PE32PLUS:
        image_kind = "pe32plus"
    else:
        raise NotPeError(f"unknown optional header magic 0x{opt_magic:X}")
    entry_rva = _u32(data, opt + 16)

    table = opt + opt_size
    if table + n_sections * SECTION_HEADER_SIZE > len(data):
        raise TruncatedHeaderError("section table truncated")

    sections = []
    for i in range(n_sections):
        base = table + i * SECTION_HEADER_SIZE
        name = data[base : base + 8].rstrip(b"\x00").decode("ascii", "replace")
        virtual_size = _u32(data, base + 8)
        virtual_rva = _u32(data, base + 12)
        raw_size = _u32(data, base + 16)
        raw_offset = _u32(data, base + 20)
        if raw_offset + raw_size > len(data):
            raise SectionOutOfBoundsError(
                f"section {name!r} raw range [{raw_offset:#x}, {raw_offset + raw_size:#x}) "
                f"exceeds file size {len(data):#x}"
            )
        sections.append(
            PeSection(
                name=name,
                raw_offset=raw_offset,
                raw_size=raw_size,
                virtual_rva=virtual_rva,
                virtual_size=virtual_size,
            )
        )

    return PeLayout(
        entry_point_rva=entry_rva,
        sections=tuple(sections),
        image_kind=image_kind,
        file_size=len(data),
    )
