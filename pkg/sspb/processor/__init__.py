"""Image processing: imaging primitives, pretext generation and labeled datasets."""

from .imaging import (
    ChannelOrder,
    Image,
    PreprocessParams,
    SwapEntry,
    SwapRecord,
    corrupt_swap,
    default_mask_side,
    default_swap_patch,
    deprocess,
    flip_channels,
    load_png,
    mask_patch,
    preprocess,
    rotate_image,
    save_png,
    stack_pixels,
    swap_patches,
    uncorrupt,
)
from .pretext import (
    PretextDataset,
    PretextExample,
    PretextParams,
    PretextTask,
    build_pretext_dataset,
    gen_corruption_example,
    gen_missing_patch_example,
    gen_rotation_example,
    load_pretext_dataset,
    write_pretext_dataset,
)
from .dataset import (
    LabeledExample,
    SynthConfig,
    generate_synthetic,
    labeled_arrays,
    load_manifest,
    split_by_source,
    write_manifest,
)

__all__ = [
    'ChannelOrder',
    'Image',
    'PreprocessParams',
    'SwapEntry',
    'SwapRecord',
    'corrupt_swap',
    'default_mask_side',
    'default_swap_patch',
    'deprocess',
    'flip_channels',
    'load_png',
    'mask_patch',
    'preprocess',
    'rotate_image',
    'save_png',
    'stack_pixels',
    'swap_patches',
    'uncorrupt',
    'PretextDataset',
    'PretextExample',
    'PretextParams',
    'PretextTask',
    'build_pretext_dataset',
    'gen_corruption_example',
    'gen_missing_patch_example',
    'gen_rotation_example',
    'load_pretext_dataset',
    'write_pretext_dataset',
    'LabeledExample',
    'SynthConfig',
    'generate_synthetic',
    'labeled_arrays',
    'load_manifest',
    'split_by_source',
    'write_manifest',
]
