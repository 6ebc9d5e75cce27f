"""Prefix-conditioned continuous diffusion for caption generation on toy scenes."""

from .config import RunConfig
from .data import (
    FeatureRecord,
    ToyScene,
    SceneObject,
    caption_templates,
    gen_scene,
    make_toy_dataset,
    parse_caption_attributes,
    read_captions_tsv,
    read_features,
    toy_encode_caption,
    toy_encode_scene,
    write_captions_tsv,
    write_features,
)
from .denoiser import DenoiserConfig, DenoiserModel, denoise, init_parameters, param_gradients
from .diffusion import (
    LatentState,
    PosteriorParams,
    clamp_to_table,
    p_sample_step,
    posterior,
    q_sample,
    q_sample_step,
    reconstruct_x0,
    sample,
    sample_batch,
)
from .metrics import EvalReport, RecordResult, bleu_n, distinct_n, evaluate, vocab_usage
from .schedule import KINDS, Schedule, dump_schedule, make_schedule, respace
from .selection import (
    Candidate,
    CandidateSet,
    choose_caption,
    cosine_similarity,
    generate_candidates,
    score_candidates,
    select_best,
)
from .training import TrainConfig, TrainState, build_state, fit, load_state, loss_batch, save_state, train_step
from .vocab import (
    EOS_ID,
    PAD_ID,
    UNK_ID,
    EmbeddingTable,
    Vocabulary,
    detokenize,
    embed,
    encode,
    round_to_tokens,
    tokenize,
)

__version__ = "0.1.0"
