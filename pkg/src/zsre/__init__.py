"""Zero-shot relation extraction via sentence/description embedding alignment.

A sentence encoder head learns to place sentence embeddings next to their
relation's description embedding under a joint margin-ranking + classification
objective; never-seen relations are predicted by nearest-neighbor search over
their description embeddings.
"""

from .dataset import (
    Instance,
    RelationMeta,
    SplitSpec,
    SyntheticConfig,
    generate_synthetic,
    load_instances,
    load_relations,
    make_few_shot_split,
    make_zero_shot_split,
)
from .encoding import (
    EncodedSentence,
    EncoderParams,
    Vocab,
    build_vocab,
    encode_description,
    encode_tokens,
)
from .estimator import ZeroShotRelationExtractor
from .evaluation import (
    ExperimentReport,
    Metrics,
    compute_metrics,
    dump_embeddings,
    run_experiment,
    run_fewshot_curve,
    run_sweep,
)
from .head import (
    ForwardTrace,
    HeadParams,
    classify_seen,
    cls_projection,
    entity_pool,
    forward,
    sentence_embedding,
)
from .inference import (
    Prediction,
    RelationIndex,
    build_relation_index,
    distance,
    embed_new_sentence,
    predict,
)
from .losses import Batch, LossReport, backward, cross_entropy, joint_loss, margin_ranking_loss
from .optim import (
    AdamState,
    ModelParams,
    TrainConfig,
    TrainHistory,
    adam_step,
    grad_check,
    load_checkpoint,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "Batch", "EncodedSentence", "EncoderParams", "ExperimentReport",
    "ForwardTrace", "HeadParams", "Instance", "LossReport", "Metrics",
    "ModelParams", "Prediction", "RelationIndex", "RelationMeta", "SplitSpec",
    "SyntheticConfig", "TrainConfig", "TrainHistory", "Vocab",
    "ZeroShotRelationExtractor", "adam_step", "backward", "build_relation_index",
    "build_vocab", "classify_seen", "cls_projection", "compute_metrics",
    "cross_entropy", "distance", "dump_embeddings", "embed_new_sentence",
    "encode_description", "encode_tokens", "entity_pool", "forward",
    "generate_synthetic", "grad_check", "joint_loss", "load_checkpoint",
    "load_instances", "load_relations", "make_few_shot_split",
    "make_zero_shot_split", "margin_ranking_loss", "predict", "run_experiment",
    "run_fewshot_curve", "run_sweep", "save_checkpoint", "sentence_embedding",
    "train",
]
