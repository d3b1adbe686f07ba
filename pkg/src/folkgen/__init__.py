"""folkgen: trainable generative melody composer for abc folk corpora."""

from .notation import (AbcError, AbcHeader, EmitError, LexicalError,
                       NoteEvent, ParseError, Score, SkipReport, emit_abc,
                       parse_corpus, parse_tune, tokenize_abc)
from .representation import (EncodedSong, NormalizedSong, Vocabulary,
                             build_vocabulary, decode_song, encode_song,
                             normalize_durations, normalize_score,
                             transition_stats, transpose_to_c)
from .gru import (GruNetworkParams, backward_sequence, forward_sequence,
                  gradient_check, gru_step, init_network, sequence_nll)
from .model import Checkpoint, MelodyModel, init_state, new_model, \
    next_duration_dist, next_pitch_dist, teacher_forced_nll
from .training import AdamState, TrainConfig, TrainReport, adam_update, \
    evaluate, split_corpus, train, train_epoch
from .generation import (BatchStats, GeneratedSong, GenerationConfig,
                         batch_generate, continue_song, generate_song)

__version__ = "0.1.0"
