"""Music emotion toolkit.

Log-mel features from audio, recurrent valence/arousal models (clip emotion
and next-point trajectory prediction), closed-form linear baselines, and
tolerance-based clip queueing. All heavy lifting happens in the compiled
`_mer` extension; arrays cross the boundary as numpy float64.
"""

try:
    from ._mer import (  # installed layout: the extension sits inside the package
        Model,
        compare_baseline,
        fit_line,
        gradient_check,
        load_wav,
        log_mel,
        save_wav,
        select_next,
        song_features,
        synth_tracks,
        train_emotion,
        train_next,
        __version__,
    )
except ImportError:  # build-tree layout: _mer.so on sys.path next to the build dir
    from _mer import (
        Model,
        compare_baseline,
        fit_line,
        gradient_check,
        load_wav,
        log_mel,
        save_wav,
        select_next,
        song_features,
        synth_tracks,
        train_emotion,
        train_next,
        __version__,
    )

__all__ = [
    "Model",
    "compare_baseline",
    "fit_line",
    "gradient_check",
    "load_wav",
    "log_mel",
    "save_wav",
    "select_next",
    "song_features",
    "synth_tracks",
    "train_emotion",
    "train_next",
    "__version__",
]
