"""CT volumes, annotations, phantoms, sampling and patches."""

from .patches import PatchRecord, balance_patches, extract_patches, read_patches, write_patches
from .phantom import PhantomConfig, phantom_dataset, phantom_generate
from .postprocess import postprocess_mask, read_pgm, write_pgm
from .sampling import kfold_split, systematic_sample
from .volume import NoduleAnnotation, VolumeMeta, hu_window, nodule_mask, read_annotations, read_mhd, write_mhd

__all__ = [
    "NoduleAnnotation",
    "PatchRecord",
    "PhantomConfig",
    "VolumeMeta",
    "balance_patches",
    "extract_patches",
    "hu_window",
    "kfold_split",
    "nodule_mask",
    "phantom_dataset",
    "phantom_generate",
    "postprocess_mask",
    "read_annotations",
    "read_mhd",
    "read_patches",
    "read_pgm",
    "systematic_sample",
    "write_mhd",
    "write_patches",
    "write_pgm",
]
