"""INI parameter files: one file can override any ForgeParams, ClaheParams
or RefinerParams field under the [forge], [clahe] and [refiner] sections."""

from __future__ import annotations

import configparser
from pathlib import Path

from .descriptors import ForgeParams
from .enhance import ClaheParams
from .labels import RefinerParams

_FORGE_INTS = ("unit_len", "region_len", "angular_bins", "radial_bins", "block_stride")
_CLAHE_INTS = ("grid_a", "grid_b", "levels", "out_w", "out_h")
_REFINER_INTS = ("top_t", "min_token_len")


def load_params(path: str | Path) -> tuple[ForgeParams, ClaheParams, RefinerParams]:
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)

    forge_kwargs = {}
    if parser.has_section("forge"):
        section = parser["forge"]
        for key in _FORGE_INTS:
            if key in section:
                forge_kwargs[key] = section.getint(key)
        for key in ("byte_scale", "instruction_aligned", "include_imports"):
            if key in section:
                forge_kwargs[key] = section.getboolean(key)

    clahe_kwargs = {}
    if parser.has_section("clahe"):
        section = parser["clahe"]
        for key in _CLAHE_INTS:
            if key in section:
                clahe_kwargs[key] = section.getint(key)
        if "clip_limit" in section:
            clahe_kwargs["clip_limit"] = section.getfloat("clip_limit")

    refiner_kwargs = {}
    if parser.has_section("refiner"):
        section = parser["refiner"]
        for key in _REFINER_INTS:
            if key in section:
                refiner_kwargs[key] = section.getint(key)
        if "thr" in section:
            refiner_kwargs["thr"] = section.getfloat("thr")
        if "stopwords" in section:
            refiner_kwargs["stopwords"] = frozenset(
                token.strip().lower()
                for token in section["stopwords"].split(",")
                if token.strip()
            )
        if "broad_classes" in section:
            refiner_kwargs["broad_classes"] = frozenset(
                token.strip().lower()
                for token in section["broad_classes"].split(",")
                if token.strip()
            )
        if "synonym_groups" in section:
            groups = []
            for group in section["synonym_groups"].split(";"):
                members = tuple(t.strip().lower() for t in group.split(",") if t.strip())
                if members:
                    groups.append(members)
            refiner_kwargs["synonym_groups"] = tuple(groups)

    return (
        ForgeParams(**forge_kwargs),
        ClaheParams(**clahe_kwargs),
        RefinerParams(**refiner_kwargs),
    )
