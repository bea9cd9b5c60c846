"""Disassembly interchange loading.

An external disassembler adapter dumps functions, basic blocks and
instruction bytes into a line-oriented interchange stream (grammar in
docs/formats.md).  This module parses that stream into
:class:`ProgramDisassembly`, the unit every downstream stage consumes, and
derives the per-program byte statistics (mean instruction length, mean
block size).  ``raw_blocks`` builds the same structure straight from file
bytes for gray-image style baselines.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from functools import cached_property

_FUNC_NAME = re.compile(r"^(fcn\.[0-9A-Fa-f]+|sym\.imp\..+)$")


class DisassemblyError(ValueError):
    pass


class SchemaError(DisassemblyError):
    pass


class OrderingError(DisassemblyError):
    pass


class EmptyProgramError(DisassemblyError):
    pass


class FileTooSmallError(DisassemblyError):
    pass


@dataclass(frozen=True)
class Instruction:
    address: int
    size: int
    data: bytes
    mnemonic: str  # informational only

    def __post_init__(self):
        if self.size < 1:
            raise SchemaError(f"instruction at 0x{self.address:X} has size {self.size}")
        if self.size != len(self.data):
            raise SchemaError(
                f"instruction at 0x{self.address:X}: size {self.size} != {len(self.data)} bytes"
            )


@dataclass(frozen=True)
class BasicBlock:
    entry: int
    instructions: tuple[Instruction, ...]

    def __post_init__(self):
        if not self.instructions:
            raise SchemaError(f"block 0x{self.entry:X} has no instructions")
        addresses = [ins.address for ins in self.instructions]
        if any(b <= a for a, b in zip(addresses, addresses[1:])):
            raise OrderingError(
                f"block 0x{self.entry:X}: instruction addresses not strictly increasing"
            )

    @property
    def byte_size(self) -> int:
        return sum(ins.size for ins in self.instructions)

    @property
    def content(self) -> bytes:
        return b"".join(ins.data for ins in self.instructions)


@dataclass(frozen=True)
class ProgramDisassembly:
    sample_id: str
    functions: tuple[tuple[str, tuple[BasicBlock, ...]], ...]

    def __post_init__(self):
        for name, _ in self.functions:
            if not _FUNC_NAME.match(name):
                raise SchemaError(
                    f"function name {name!r} violates the fcn.<hex> / sym.imp.<name> convention"
                )

    @cached_property
    def canonical_blocks(self) -> tuple[BasicBlock, ...]:
        """All blocks across all functions in ascending entry-address order.
        This is the program order every downstream module relies on."""
        blocks = [b for _, bs in self.functions for b in bs]
        return tuple(sorted(blocks, key=lambda b: b.entry))

    @property
    def block_count(self) -> int:
        return len(self.canonical_blocks)

    @property
    def instruction_count(self) -> int:
        return sum(len(b.instructions) for b in self.canonical_blocks)

    @property
    def total_bytes(self) -> int:
        return sum(b.byte_size for b in self.canonical_blocks)

    @property
    def avg_instr(self) -> float:
        """Mean instruction length in bytes."""
        return self.total_bytes / self.instruction_count

    @property
    def avg_bb(self) -> float:
        """Mean basic-block size in bytes."""
        return self.total_bytes / self.block_count


def _parse_hex(token: str, line_no: int, what: str) -> int:
    try:
        return int(token, 16)
    except ValueError:
        raise SchemaError(f"line {line_no}: bad hex {what} {token!r}") from None


def _parse_bytes(token: str, line_no: int) -> bytes:
    if len(token) % 2 != 0:
        raise SchemaError(f"line {line_no}: odd-length byte string {token!r}")
    try:
        return bytes.fromhex(token)
    except ValueError:
        raise SchemaError(f"line {line_no}: bad byte string {token!r}") from None


def load_disassembly(document: str, sample_id: str | None = None) -> ProgramDisassembly:
    """Parse an interchange document.

    Record kinds: ``F <name> <entry>`` declares a function, ``B <function
    entry> <block entry>`` a block, ``I <block entry> <address> <hex bytes>
    <mnemonic>`` an instruction.  Blocks duplicated by entry address are
    deduplicated keeping the longest.  ``sample_id`` defaults to the SHA-256
    of the document text.
    """
    functions: dict[int, tuple[str, list[int]]] = {}
    blocks: dict[int, list[Instruction]] = {}
    for line_no, raw in enumerate(document.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        kind = fields[0]
        if kind == "F":
            if len(fields) != 3:
                raise SchemaError(f"line {line_no}: F record needs <name> <entry>")
            name, entry = fields[1], _parse_hex(fields[2], line_no, "function entry")
            functions[entry] = (name, [])
        elif kind == "B":
            if len(fields) != 3:
                raise SchemaError(f"line {line_no}: B record needs <function entry> <block entry>")
            fentry = _parse_hex(fields[1], line_no, "function entry")
            bentry = _parse_hex(fields[2], line_no, "block entry")
            if fentry not in functions:
                raise SchemaError(f"line {line_no}: block references unknown function 0x{fentry:X}")
            if bentry not in blocks:
                blocks[bentry] = []
                functions[fentry][1].append(bentry)
        elif kind == "I":
            if len(fields) < 5:
                raise SchemaError(
                    f"line {line_no}: I record needs <block entry> <address> <bytes> <mnemonic>"
                )
            bentry = _parse_hex(fields[1], line_no, "block entry")
            address = _parse_hex(fields[2], line_no, "instruction address")
            data = _parse_bytes(fields[3], line_no)
            mnemonic = " ".join(fields[4:])
            if bentry not in blocks:
                raise SchemaError(
                    f"line {line_no}: instruction references unknown block 0x{bentry:X}"
                )
            blocks[bentry].append(Instruction(address, len(data), data, mnemonic))
        else:
            raise SchemaError(f"line {line_no}: unknown record kind {kind!r}")

    built: dict[int, BasicBlock] = {}
    for entry, instructions in blocks.items():
        block = BasicBlock(entry, tuple(instructions))  # raises on empty / unordered
        prior = built.get(entry)
        if prior is None or block.byte_size > prior.byte_size:
            built[entry] = block

    out_functions = []
    claimed: set[int] = set()
    for fentry in sorted(functions):
        name, bentries = functions[fentry]
        chosen = []
        for bentry in sorted(set(bentries)):
            if bentry in claimed:
                continue  # deduplicated across functions by entry address
            claimed.add(bentry)
            chosen.append(built[bentry])
        if chosen:
            out_functions.append((name, tuple(chosen)))

    if not claimed:
        raise EmptyProgramError("document declares no basic blocks")

    if sample_id is None:
        sample_id = hashlib.sha256(document.encode("utf-8")).hexdigest()
    return ProgramDisassembly(sample_id=sample_id, functions=tuple(out_functions))


def serialize_disassembly(program: ProgramDisassembly) -> str:
    """Render ``program`` back into canonical interchange text (uppercase
    hex, functions and blocks in ascending address order)."""
    lines = []
    for name, blocks in program.functions:
        fentry = min(b.entry for b in blocks)
        lines.append(f"F {name} {fentry:X}")
        for block in blocks:
            lines.append(f"B {fentry:X} {block.entry:X}")
            for ins in block.instructions:
                lines.append(f"I {block.entry:X} {ins.address:X} {ins.data.hex().upper()} {ins.mnemonic}")
    return "\n".join(lines) + "\n"


def raw_blocks(data: bytes, block_size: int, sample_id: str | None = None) -> ProgramDisassembly:
    """Partition raw file bytes into pseudo-blocks of ``block_size`` bytes.

    The trailing chunk is kept when it is at least 3 bytes and merged into
    the previous block otherwise.  Each chunk becomes a one-instruction
    block, which lets the descriptor stages run on files with no
    disassembly at all.
    """
    if block_size < 3:
        raise ValueError(f"block_size must be >= 3, got {block_size}")
    if len(data) < 3:
        raise FileTooSmallError(f"need at least 3 bytes, got {len(data)}")
    bounds = list(range(0, len(data), block_size))
    if len(bounds) > 1 and len(data) - bounds[-1] < 3:
        bounds.pop()  # merge the short tail into the previous chunk
    blocks = []
    for i, start in enumerate(bounds):
        end = bounds[i + 1] if i + 1 < len(bounds) else len(data)
        chunk = data[start:end]
        blocks.append(
            BasicBlock(start, (Instruction(start, len(chunk), chunk, "raw"),))
        )
    if sample_id is None:
        sample_id = hashlib.sha256(data).hexdigest()
    return ProgramDisassembly(
        sample_id=sample_id, functions=(("fcn.0", tuple(blocks)),)
    )
