"""Post-neural stages of a multi-stage speaker diarization pipeline.

Denoising, hybrid VAD fusion and hysteresis decoding, multi-scale window
planning, spectral clustering, DER scoring, threshold tuning and error
analysis. Neural outputs (frame speech probabilities, word timestamps,
speaker embeddings) are read from files.
"""

from .audio import AudioBuffer, Spectrogram, istft, read_wav, stft, write_wav
from .clustering import (
    ClusterResult,
    RecordEmbedder,
    estimate_num_speakers,
    labels_to_turns,
    multi_scale_affinity,
    spectral_cluster,
)
from .denoise import SpectralGateConfig, estimate_noise_profile, make_augmentation_manifest, spectral_gate
from .formats import (
    EmbeddingRecord,
    FormatError,
    FrameTrack,
    SpeakerTurn,
    Word,
    parse_ctm,
    parse_embeddings,
    parse_frame_track,
    parse_roles,
    parse_rttm,
    write_frame_track,
    write_rttm,
)
from .pipeline import RunConfig, diarize, diarize_tracks, render_report
from .scoring import DerReport, ErrorBreakdown, der, error_breakdown, optimal_mapping, overlap_matrix, spearman
from .segmentation import MultiScalePlan, ScaleSpec, group_by_base_scale, plan_windows
from .tuning import DevItem, GridSpec, TrialResult, grid_search, vad_metrics
from .vad import (
    FusionWeight,
    SpeechSegment,
    VadThresholds,
    WindowScore,
    fuse,
    hysteresis_decode,
    merge_window_scores,
    segments_to_frames,
    words_to_frames,
)

__version__ = "0.1.0"
