"""One-index adversarial attacks on vector-quantization compressed images.

The pipeline: train an LBG codebook, optionally sort its codewords along
their first principal component, compress images to index tensors, then
search for a single index substitution that flips a black-box
classifier's decision.
"""

from .attack import (
    AttackContext,
    AttackError,
    AttackResult,
    BudgetExhaustedError,
    DEConfig,
    Perturbation,
    apply_perturbation,
    de_attack,
    fitness,
    genotype_to_perturbation,
    random_search_attack,
)
from .codec import (
    Codebook,
    CodebookMismatchError,
    CodecError,
    IndexTensor,
    decode,
    distortion,
    encode,
    image_blocks,
    read_codebook,
    read_indices,
    train_codebook_lbg,
    write_codebook,
    write_indices,
)
from .experiment import (
    AttackRecord,
    BatchAbortedError,
    BatchReport,
    ExperimentError,
    export_heatmap_csv,
    export_records_csv,
    export_report_json,
    export_trajectory_csv,
    format_summary,
    load_dataset,
    run_batch,
    save_dataset,
    success_heatmap,
    summarize,
)
from .image_io import PnmError, load_image, save_image, validate_image
from .oracle import (
    FixtureOracle,
    Oracle,
    OracleConnectionError,
    OracleError,
    OracleProtocolError,
    OracleTimeoutError,
    RemoteOracle,
    connect_remote,
    load_fixture,
    validate_probability_vector,
    write_fixture_weights,
)
from .sorting import (
    DistanceProfile,
    EigensolverError,
    center_codewords,
    distance_profile,
    first_pc_scores,
    jacobi_eigh,
    remap_indices,
    sort_codebook,
)
from .synthetic import (
    class_templates,
    contrast_ladder_images,
    fixture_from_templates,
    make_dataset,
    smooth_image,
)

__version__ = "0.1.0"
