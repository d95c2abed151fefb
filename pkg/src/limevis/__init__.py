"""limevis: batch LIME superpixel explanations with interactive ablation.

The package is organized around one pipeline: ingest labeled images,
segment each into superpixels, probe a black-box classifier on masked
variants to fit a local surrogate, embed the rendered explanation images
in 2-D, and serve the whole session to an interactive frontend.
"""

__version__ = "0.1.0"

from . import errors  # noqa: F401
from .embedding import EmbeddingConfig, extract_features, pacmap_embed  # noqa: F401
from .imaging import (  # noqa: F401
    LabeledDataset,
    RgbImage,
    read_ppm,
    read_stl10_record,
    resize_bilinear,
    rgb_to_lab,
    write_ppm,
)
from .lime import ExplainConfig, Explanation, explain  # noqa: F401
from .predictor import (  # noqa: F401
    BuiltinModel,
    BuiltinPredictor,
    CallablePredictor,
    ClassProbabilities,
    ExternalHttpPredictor,
    ExternalProcessPredictor,
    softmax,
    train_builtin,
)
from .segmentation import (  # noqa: F401
    FelzenszwalbParams,
    QuickshiftParams,
    SegmentationParams,
    SlicParams,
    SuperpixelMap,
    boundary_mask,
    segment,
)
from .session import (  # noqa: F401
    Session,
    execute_category,
    load_dataset,
    pixel_to_superpixel,
    reset_toggles,
    toggle_superpixel,
)
