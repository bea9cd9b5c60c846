"""Vendor label consolidation into class.family labels.

Raw detection names from many scanners disagree in format and vocabulary.
The refiner tokenizes every name, merges near-duplicate tokens by longest
common subsequence (longer spellings collapse into shorter ones), applies
synonym groups, and synthesizes one class.family label per sample from the
most frequent surviving tokens, preferring a specific family name over
broad category words.  Cohen's kappa quantifies agreement between two
complete labelings.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_STOPWORDS = frozenset(
    {
        # platform / packaging tags
        "win", "win32", "win64", "w32", "w64", "w97m", "msil", "linux", "osx",
        "android", "script", "html", "exe", "dll",
        # scanner noise
        "heur", "heuristic", "gen", "generic", "variant", "malware", "malicious",
        "suspicious", "behaveslike", "lookslike", "possible", "potentially",
        "riskware", "application", "program", "file", "packed", "agentb",
    }
)

DEFAULT_BROAD_CLASSES = frozenset(
    {"trojan", "adware", "worm", "virus", "pua", "backdoor", "ransom"}
)

DEFAULT_SYNONYM_GROUPS = (("pua", "pup"),)

_SPLIT = re.compile(r"[^0-9a-zA-Z]+")


class LabelError(ValueError):
    pass


class EmptyStringError(LabelError):
    pass


class LengthMismatchError(LabelError):
    pass


class NoUsableTokensError(LabelError):
    pass


@dataclass(frozen=True)
class LabelRecord:
    sample_id: str
    vendor_labels: dict[str, str]

    def __post_init__(self):
        if not self.vendor_labels:
            raise LabelError(f"{self.sample_id}: record carries no vendor labels")


@dataclass(frozen=True)
class RefinerParams:
    thr: float = 0.75
    top_t: int = 3
    min_token_len: int = 3
    stopwords: frozenset[str] = DEFAULT_STOPWORDS
    synonym_groups: tuple[tuple[str, ...], ...] = DEFAULT_SYNONYM_GROUPS
    broad_classes: frozenset[str] = DEFAULT_BROAD_CLASSES

    def __post_init__(self):
        if not 0 < self.thr <= 1:
            raise ValueError("thr must be in (0, 1]")
        if self.top_t < 2:
            raise ValueError("top_t must be >= 2")


@dataclass(frozen=True)
class RefinedLabel:
    sample_id: str
    class_token: str
    family_token: str
    confidence: int  # vendors supporting the emitted tokens
    flags: tuple[str, ...] = ()

    @property
    def label(self) -> str:
        return f"{self.class_token}.{self.family_token}"


@dataclass
class RefineResult:
    labels: list[RefinedLabel] = field(default_factory=list)
    manual_review: list[str] = field(default_factory=list)  # sample ids


def tokenize(raw_label: str, params: RefinerParams = RefinerParams()) -> list[str]:
    """Split on non-alphanumerics, lowercase, and drop tokens that are not
    purely alphabetic, shorter than the minimum, or stopwords."""
    tokens = []
    for piece in _SPLIT.split(raw_label):
        token = piece.lower()
        if len(token) < params.min_token_len:
            continue
        if not token.isalpha() or not token.isascii():
            continue
        if token in params.stopwords:
            continue
        tokens.append(token)
    return tokens


def _lcs_length(s1: str, s2: str) -> int:
    if len(s1) < len(s2):
        s1, s2 = s2, s1
    previous = [0] * (len(s2) + 1)
    for ch1 in s1:
        current = [0]
        for j, ch2 in enumerate(s2, start=1):
            if ch1 == ch2:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(current[j - 1], previous[j]))
        previous = current
    return previous[-1]


def lcs_similarity(s1: str, s2: str) -> float:
    """|LCS| / min(len): 1.0 when the shorter string is a subsequence of
    the longer one."""
    if not s1 or not s2:
        raise EmptyStringError("lcs_similarity needs two non-empty strings")
    return _lcs_length(s1, s2) / min(len(s1), len(s2))


def merge_tokens(
    tokens, params: RefinerParams = RefinerParams()
) -> dict[str, str]:
    """Map every token to its canonical spelling.

    Tokens are visited shortest first; each maps to the shortest earlier
    token that clears the LCS threshold, so longer variants collapse into
    shorter ones.  Synonym groups apply afterwards, sending every member
    to the group's first (canonical) token.  The mapping is idempotent.
    """
    unique = sorted(set(tokens), key=lambda t: (len(t), t))
    mapping: dict[str, str] = {}
    for i, token in enumerate(unique):
        target = token
        for earlier in unique[:i]:
            if lcs_similarity(earlier, token) >= params.thr:
                target = earlier
                break
        mapping[token] = target
    # collapse chains so the mapping is a projection
    for token in mapping:
        target = mapping[token]
        while mapping.get(target, target) != target:
            target = mapping[target]
        mapping[token] = target

    synonyms: dict[str, str] = {}
    for group in params.synonym_groups:
        canonical = group[0]
        for member in group:
            synonyms[member] = canonical
    for token in mapping:
        if token in synonyms:
            # group membership pins the token, overriding any LCS merge
            mapping[token] = synonyms[token]
        else:
            target = mapping[token]
            mapping[token] = synonyms.get(target, target)
    return mapping


def _rank_key(freq: Counter):
    # Most frequent first; ties prefer longer (more specific) tokens, then
    # alphabetical order for determinism.
    return lambda token: (-freq[token], -len(token), token)


def refine(
    records: list[LabelRecord], params: RefinerParams = RefinerParams()
) -> RefineResult:
    """Consolidate every record's vendor labels into class.family.

    Token canonicalization is built over the whole dataset's token pool.
    Per sample, the ``top_t`` most frequent canonical tokens form the
    candidate set: a broad-class token (most frequent one) becomes the
    class, and the best non-broad token becomes the family, preferring
    tokens that co-occur with the class token in some vendor's label.  A
    final dataset-wide merge pass consolidates the emitted tokens.
    Samples whose labels all filter away go to the manual review list.
    """
    if not records:
        raise LabelError("no records to refine")

    per_vendor_tokens: dict[str, dict[str, list[str]]] = {}
    pool: Counter[str] = Counter()
    for record in records:
        vendors = {}
        for vendor, raw in record.vendor_labels.items():
            tokens = tokenize(raw, params)
            vendors[vendor] = tokens
            pool.update(tokens)
        per_vendor_tokens[record.sample_id] = vendors

    canon = merge_tokens(pool, params)
    result = RefineResult()
    interim: list[tuple[str, str, str, int, tuple[str, ...]]] = []

    for record in records:
        vendors = {
            vendor: [canon.get(t, t) for t in tokens]
            for vendor, tokens in per_vendor_tokens[record.sample_id].items()
        }
        freq: Counter[str] = Counter()
        for tokens in vendors.values():
            freq.update(tokens)
        if not freq:
            result.manual_review.append(record.sample_id)
            continue

        ranked = sorted(freq, key=_rank_key(freq))
        top = ranked[: params.top_t]
        flags: list[str] = []

        broad = [t for t in top if t in params.broad_classes]
        families = [t for t in top if t not in params.broad_classes]
        if len(broad) > 1:
            flags.append("multi_class")

        if broad:
            class_token = broad[0]
        else:
            class_token = top[0]

        if families:
            def family_key(token: str):
                cooccurs = any(
                    class_token in tokens and token in tokens
                    for tokens in vendors.values()
                )
                return (-freq[token], not cooccurs, -len(token), token)

            family_token = min(families, key=family_key)
        elif len(top) > 1:
            family_token = top[1]
            flags.append("low_specificity")
        else:
            family_token = class_token
            flags.append("low_specificity")

        confidence = sum(
            1
            for tokens in vendors.values()
            if class_token in tokens or family_token in tokens
        )
        interim.append(
            (record.sample_id, class_token, family_token, confidence, tuple(flags))
        )

    emitted_pool = Counter()
    for _, class_token, family_token, _, _ in interim:
        emitted_pool.update((class_token, family_token))
    final_map = merge_tokens(emitted_pool, params)
    for sample_id, class_token, family_token, confidence, flags in interim:
        result.labels.append(
            RefinedLabel(
                sample_id=sample_id,
                class_token=final_map.get(class_token, class_token),
                family_token=final_map.get(family_token, family_token),
                confidence=confidence,
                flags=flags,
            )
        )
    return result


def cohens_kappa(labels_a: list[str], labels_b: list[str]) -> float:
    """Chance-corrected agreement between two annotators' label vectors."""
    if len(labels_a) != len(labels_b):
        raise LengthMismatchError(
            f"annotator vectors differ in length: {len(labels_a)} vs {len(labels_b)}"
        )
    if not labels_a:
        raise LabelError("empty annotation vectors")
    n = len(labels_a)
    observed = sum(a == b for a, b in zip(labels_a, labels_b)) / n
    count_a = Counter(labels_a)
    count_b = Counter(labels_b)
    expected = sum(
        (count_a[label] / n) * (count_b[label] / n)
        for label in set(count_a) | set(count_b)
    )
    if expected == 1.0:
        return 1.0 if observed == 1.0 else 0.0
    return (observed - expected) / (1.0 - expected)


def load_vendor_report(path: str | Path) -> LabelRecord:
    """Read one vendor report document.

    Accepts the flat layout {"sample_id": ..., "labels": {vendor: label}}
    and the common scan-report layout {"sha256"/"md5": ..., "scans":
    {vendor: {"detected": bool, "result": label}}}.
    """
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if "labels" in doc:
        sample_id = doc.get("sample_id") or doc.get("sha256") or doc.get("md5")
        if not sample_id:
            raise LabelError(f"{path}: report carries no sample id")
        labels = {v: str(l) for v, l in doc["labels"].items() if l}
    elif "scans" in doc:
        sample_id = doc.get("sha256") or doc.get("sample_id") or doc.get("md5")
        if not sample_id:
            raise LabelError(f"{path}: report carries no sample id")
        labels = {
            vendor: str(scan["result"])
            for vendor, scan in doc["scans"].items()
            if scan.get("detected") and scan.get("result")
        }
    else:
        raise LabelError(f"{path}: unrecognized report layout")
    return LabelRecord(sample_id=sample_id, vendor_labels=labels)


def save_refined(labels: list[RefinedLabel], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for item in labels:
            fh.write(f"{item.sample_id}\t{item.label}\t{item.confidence}\n")
    return path


def load_refined(path: str | Path) -> dict[str, str]:
    """sample_id -> class.family from a refined-labels file."""
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        sample_id, label, _ = line.split("\t")
        out[sample_id] = label
    return out
