"""selfmap: static-analysis feature maps for malware classification.

From (optionally packed) PE binaries and their disassembly to normalized,
contrast-enhanced block-similarity maps, with vendor label consolidation
and a nearest-neighbor baseline classifier.
"""

from .descriptors import (
    DescriptorEnsemble,
    ForgeParams,
    LocalSimilarityDescriptor,
    correlation,
    descriptor_at,
    forge,
    normalize,
    ssd,
    to_feature_map,
)
from .disasm import (
    BasicBlock,
    Instruction,
    ProgramDisassembly,
    load_disassembly,
    raw_blocks,
)
from .enhance import ClaheParams, enhance, resize
from .labels import RefinerParams, cohens_kappa, lcs_similarity, refine, tokenize
from .peformat import PeLayout, parse_pe
from .packers import PackerSignature, UnpackPlan, identify_packer, load_signature_db, unpack
from .tensorio import FeatureMap, load_tensor, save_tensor

__version__ = "0.1.0"

__all__ = [
    "BasicBlock",
    "ClaheParams",
    "DescriptorEnsemble",
    "FeatureMap",
    "ForgeParams",
    "Instruction",
    "LocalSimilarityDescriptor",
    "PackerSignature",
    "PeLayout",
    "ProgramDisassembly",
    "RefinerParams",
    "UnpackPlan",
    "cohens_kappa",
    "correlation",
    "descriptor_at",
    "enhance",
    "forge",
    "identify_packer",
    "lcs_similarity",
    "load_disassembly",
    "load_signature_db",
    "load_tensor",
    "normalize",
    "parse_pe",
    "raw_blocks",
    "refine",
    "resize",
    "save_tensor",
    "ssd",
    "to_feature_map",
    "tokenize",
    "unpack",
]
