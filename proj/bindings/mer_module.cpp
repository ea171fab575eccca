// Python bindings: numpy in, numpy out. Matrices cross the boundary as
// copies; models are opaque handles around the checkpoint struct.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mer/annotations.hpp"
#include "mer/baseline.hpp"
#include "mer/circumplex.hpp"
#include "mer/dsp.hpp"
#include "mer/error.hpp"
#include "mer/models.hpp"
#include "mer/nn.hpp"
#include "mer/queue.hpp"
#include "mer/rng.hpp"
#include "mer/wav.hpp"

namespace py = pybind11;
using namespace mer;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const DoubleArray& array, const char* what) {
    if (array.ndim() != 2) {
        throw UsageError(std::string(what) + " must be a 2-D array, got " +
                         std::to_string(array.ndim()) + "-D");
    }
    Matrix out(static_cast<std::size_t>(array.shape(0)), static_cast<std::size_t>(array.shape(1)));
    const auto view = array.unchecked<2>();
    for (py::ssize_t r = 0; r < array.shape(0); ++r) {
        for (py::ssize_t c = 0; c < array.shape(1); ++c) {
            out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = view(r, c);
        }
    }
    return out;
}

py::array_t<double> from_matrix(const Matrix& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    auto view = out.mutable_unchecked<2>();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            view(static_cast<py::ssize_t>(r), static_cast<py::ssize_t>(c)) = m(r, c);
        }
    }
    return out;
}

AudioClip clip_from(const DoubleArray& samples, int sample_rate) {
    if (samples.ndim() != 1) throw UsageError("samples must be a 1-D array");
    AudioClip clip;
    clip.sample_rate = sample_rate;
    clip.samples.assign(samples.data(), samples.data() + samples.size());
    return clip;
}

DspConfig dsp_config(int sample_rate, double clip_seconds, std::size_t n_mels,
                     std::size_t fft_size, std::size_t hop_length, double f_min, double f_max) {
    DspConfig config;
    config.sample_rate = sample_rate;
    config.clip_seconds = clip_seconds;
    config.n_mels = n_mels;
    config.fft_size = fft_size;
    config.hop_length = hop_length;
    config.f_min = f_min;
    config.f_max = f_max > 0.0 ? f_max : sample_rate / 2.0;
    config.validate();
    return config;
}

AnnotationTrack track_from(const std::string& song_id, const DoubleArray& values) {
    const Matrix m = to_matrix(values, "track");
    if (m.rows() != 2) throw UsageError("a track is a 2 x T array (valence row, arousal row)");
    AnnotationTrack track;
    track.song_id = song_id;
    track.points.reserve(m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) track.points.push_back({m(0, j), m(1, j)});
    return track;
}

py::array_t<double> track_to_array(const AnnotationTrack& track) {
    Matrix m(2, track.points.size());
    for (std::size_t j = 0; j < track.points.size(); ++j) {
        m(0, j) = track.points[j].valence;
        m(1, j) = track.points[j].arousal;
    }
    return from_matrix(m);
}

// hyperparameters: None = keep the task table's value
struct Overrides {
    std::optional<double> learning_rate;
    std::optional<std::size_t> hidden_size;
    std::optional<std::size_t> n_modules;
    std::optional<std::size_t> layers_per_module;
    std::optional<double> dropout_p;
    std::optional<std::size_t> max_epochs;
    std::optional<std::size_t> batch_size;
    std::optional<std::size_t> early_stop_patience;
    std::optional<double> early_stop_min_delta;
    std::optional<double> noise_sigma;

    void apply(TrainConfig& config) const {
        if (learning_rate) config.learning_rate = *learning_rate;
        if (hidden_size) config.hidden_size = *hidden_size;
        if (n_modules) config.n_modules = *n_modules;
        if (layers_per_module) config.layers_per_module = *layers_per_module;
        if (dropout_p) config.dropout_p = *dropout_p;
        if (max_epochs) config.max_epochs = *max_epochs;
        if (batch_size) config.batch_size = *batch_size;
        if (early_stop_patience) config.early_stop_patience = *early_stop_patience;
        if (early_stop_min_delta) config.early_stop_min_delta = *early_stop_min_delta;
        if (noise_sigma) config.noise_sigma = *noise_sigma;
    }
};

py::array_t<double> curve_to_array(const std::vector<EpochLoss>& curve) {
    py::array_t<double> out({curve.size(), static_cast<std::size_t>(3)});
    auto view = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < curve.size(); ++i) {
        view(static_cast<py::ssize_t>(i), 0) = static_cast<double>(curve[i].epoch);
        view(static_cast<py::ssize_t>(i), 1) = curve[i].train_mse;
        view(static_cast<py::ssize_t>(i), 2) = curve[i].val_mse;
    }
    return out;
}

py::dict report_to_dict(const TrainReport& report) {
    py::dict out;
    out["stopped_epoch"] = report.stopped_epoch;
    out["best_epoch"] = report.best_epoch;
    out["final_train_mse"] = report.final_train_mse;
    out["final_val_mse"] = report.final_val_mse;
    out["final_train_rmse"] = report.final_train_rmse;
    out["final_val_rmse"] = report.final_val_rmse;
    out["wall_seconds"] = report.wall_seconds;
    return out;
}

// songs: {song_id: (features [n_clips, mels, frames], targets [n_clips, 2])}
std::tuple<Checkpoint, py::array_t<double>, py::dict> py_train_emotion(
    const py::dict& songs, double val_fraction, const Overrides& overrides, std::uint64_t seed) {
    SongDataset data;
    for (const auto& item : songs) {
        const auto song_id = item.first.cast<std::string>();
        const auto pair = item.second.cast<py::tuple>();
        if (pair.size() != 2) throw UsageError("song " + song_id + ": expected (features, targets)");
        const auto features = pair[0].cast<DoubleArray>();
        const auto targets = pair[1].cast<DoubleArray>();
        if (features.ndim() != 3) {
            throw UsageError("song " + song_id + ": features must be [n_clips, mels, frames]");
        }
        if (targets.ndim() != 2 || targets.shape(1) != 2 ||
            targets.shape(0) != features.shape(0)) {
            throw UsageError("song " + song_id + ": targets must be [n_clips, 2]");
        }
        const auto f = features.unchecked<3>();
        const auto t = targets.unchecked<2>();
        std::vector<LabeledClip> clips(static_cast<std::size_t>(features.shape(0)));
        for (py::ssize_t i = 0; i < features.shape(0); ++i) {
            auto& clip = clips[static_cast<std::size_t>(i)];
            clip.song_id = song_id;
            clip.index = static_cast<std::size_t>(i);
            clip.features.values = Matrix(static_cast<std::size_t>(features.shape(1)),
                                          static_cast<std::size_t>(features.shape(2)));
            for (py::ssize_t r = 0; r < features.shape(1); ++r) {
                for (py::ssize_t c = 0; c < features.shape(2); ++c) {
                    clip.features.values(static_cast<std::size_t>(r),
                                         static_cast<std::size_t>(c)) = f(i, r, c);
                }
            }
            clip.target = {t(i, 0), t(i, 1)};
        }
        if (clips.empty()) throw UsageError("song " + song_id + " has no clips");
        data.songs[song_id] = std::move(clips);
    }
    if (data.songs.empty()) throw UsageError("no songs given");

    LstmStack stack;
    DenseHead head;
    TrainConfig config;
    build_task1_default(stack, head, config);
    config.feature_size = data.songs.begin()->second.front().features.values.rows();
    overrides.apply(config);
    config.seed = seed;
    build_network(config, stack, head);
    Rng rng(seed);
    init_network(stack, head, rng);

    const SongDataset split = split_by_song(std::move(data), val_fraction, seed);
    TrainReport report;
    {
        py::gil_scoped_release release;
        report = train_emotion(stack, head, split, config);
    }
    return {Checkpoint{std::move(stack), std::move(head), 0},
            curve_to_array(report.curve), report_to_dict(report)};
}

std::tuple<Checkpoint, py::array_t<double>, py::dict> py_train_next(
    const std::vector<DoubleArray>& tracks, double val_fraction, std::size_t window,
    const Overrides& overrides, std::uint64_t seed) {
    if (tracks.size() < 2) throw UsageError("need at least 2 tracks to split");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw UsageError("val_fraction must be in (0, 1)");
    }
    std::vector<std::size_t> order(tracks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    const auto n_val = static_cast<std::size_t>(
        std::ceil(val_fraction * static_cast<double>(order.size())));

    std::vector<Window> train_windows, val_windows;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto track = track_from("track_" + std::to_string(order[i]), tracks[order[i]]);
        const auto windows = make_windows(track, window);
        auto& sink = i < n_val ? val_windows : train_windows;
        sink.insert(sink.end(), windows.begin(), windows.end());
    }
    if (train_windows.empty() || val_windows.empty()) {
        throw UsageError("a split side has no windows; tracks are too short");
    }

    LstmStack stack;
    DenseHead head;
    TrainConfig config;
    build_task2_default(stack, head, config);
    overrides.apply(config);
    config.seed = seed;
    build_network(config, stack, head);
    Rng init_rng(seed);
    init_network(stack, head, init_rng);

    TrainReport report;
    {
        py::gil_scoped_release release;
        report = train_next(stack, head, train_windows, val_windows, config);
    }
    return {Checkpoint{std::move(stack), std::move(head), 1},
            curve_to_array(report.curve), report_to_dict(report)};
}

}  // namespace

PYBIND11_MODULE(_mer, m) {
    m.doc() = "music emotion engine: log-mel features, recurrent valence/arousal models,\n"
              "linear baselines, and tolerance-based clip queueing";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const IoError& e) {
            PyErr_SetString(PyExc_OSError, e.what());
        } catch (const UsageError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const NumericError& e) {
            PyErr_SetString(PyExc_ArithmeticError, e.what());
        } catch (const Error& e) {
            PyErr_SetString(PyExc_RuntimeError, e.what());
        }
    });

    py::class_<Checkpoint>(m, "Model", "A trained network plus its task tag")
        .def_property_readonly(
            "task", [](const Checkpoint& c) { return c.task_tag == 0 ? "emotion" : "next"; })
        .def_property_readonly(
            "feature_size", [](const Checkpoint& c) { return c.stack.input_size(); })
        .def_static(
            "load", [](const std::string& path) { return load_checkpoint(path); },
            py::arg("path"))
        .def(
            "save",
            [](const Checkpoint& c, const std::string& path) {
                save_checkpoint(path, c.stack, c.head, c.task_tag);
            },
            py::arg("path"))
        .def(
            "predict_emotion",
            [](const Checkpoint& c, const DoubleArray& features) {
                if (c.task_tag != 0) throw UsageError("not a clip-emotion model");
                const EmotionPoint p =
                    predict_emotion(c.stack, c.head, to_matrix(features, "features"));
                return std::make_pair(p.valence, p.arousal);
            },
            py::arg("features"), "Valence/arousal for one clip's [mels, frames] features")
        .def(
            "predict_next",
            [](const Checkpoint& c, const DoubleArray& window) {
                if (c.task_tag != 1) throw UsageError("not a next-point model");
                const EmotionPoint p = predict_next(c.stack, c.head, to_matrix(window, "window"));
                return std::make_pair(p.valence, p.arousal);
            },
            py::arg("window"), "Next valence/arousal after a [2, T] trajectory window");

    m.def(
        "load_wav",
        [](const std::string& path, int required_rate) {
            const AudioClip clip = load_wav(path, required_rate);
            py::array_t<double> samples(clip.samples.size());
            std::copy(clip.samples.begin(), clip.samples.end(), samples.mutable_data());
            return std::make_pair(std::move(samples), clip.sample_rate);
        },
        py::arg("path"), py::arg("required_rate") = 44100,
        "Read a WAV file into (samples in [-1, 1], sample_rate); 0 accepts any rate");

    m.def(
        "save_wav",
        [](const std::string& path, const DoubleArray& samples, int sample_rate) {
            const AudioClip clip = clip_from(samples, sample_rate);
            save_wav_pcm16(path, clip.samples, sample_rate);
        },
        py::arg("path"), py::arg("samples"), py::arg("sample_rate") = 44100,
        "Write mono 16-bit PCM");

    m.def(
        "log_mel",
        [](const DoubleArray& samples, int sample_rate, double clip_seconds, std::size_t n_mels,
           std::size_t fft_size, std::size_t hop_length, double f_min, double f_max) {
            const DspConfig config =
                dsp_config(sample_rate, clip_seconds, n_mels, fft_size, hop_length, f_min, f_max);
            return from_matrix(log_mel(clip_from(samples, sample_rate), config).values);
        },
        py::arg("samples"), py::arg("sample_rate") = 44100, py::arg("clip_seconds") = 0.5,
        py::arg("n_mels") = 128, py::arg("fft_size") = 2048, py::arg("hop_length") = 512,
        py::arg("f_min") = 0.0, py::arg("f_max") = 0.0,
        "Log-mel spectrogram of exactly one clip of samples (defaults: 128 x 44 per half second)");

    m.def(
        "song_features",
        [](const DoubleArray& samples, int sample_rate, double clip_seconds, std::size_t n_mels,
           std::size_t fft_size, std::size_t hop_length, double f_min, double f_max) {
            const DspConfig config =
                dsp_config(sample_rate, clip_seconds, n_mels, fft_size, hop_length, f_min, f_max);
            const auto clips = slice_clips(clip_from(samples, sample_rate), clip_seconds);
            std::vector<MelSpectrogram> features;
            features.reserve(clips.size());
            for (const auto& clip : clips) features.push_back(log_mel(clip, config));
            const std::size_t frames = features.empty() ? 0 : features.front().n_frames();
            py::array_t<double> out({features.size(), n_mels, frames});
            auto view = out.mutable_unchecked<3>();
            for (std::size_t i = 0; i < features.size(); ++i) {
                for (std::size_t r = 0; r < n_mels; ++r) {
                    for (std::size_t c = 0; c < frames; ++c) {
                        view(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(r),
                             static_cast<py::ssize_t>(c)) = features[i].values(r, c);
                    }
                }
            }
            return out;
        },
        py::arg("samples"), py::arg("sample_rate") = 44100, py::arg("clip_seconds") = 0.5,
        py::arg("n_mels") = 128, py::arg("fft_size") = 2048, py::arg("hop_length") = 512,
        py::arg("f_min") = 0.0, py::arg("f_max") = 0.0,
        "Slice a whole song into clips and stack their log-mel features "
        "[n_clips, n_mels, n_frames]; a trailing partial clip is dropped");

    m.def(
        "synth_tracks",
        [](std::size_t n_songs, std::size_t length, const std::string& kind, double noise_sigma,
           std::uint64_t seed) {
            std::vector<std::pair<std::string, py::array_t<double>>> out;
            for (const auto& track :
                 synth_tracks(n_songs, length, synth_kind_from_string(kind), noise_sigma, seed)) {
                out.emplace_back(track.song_id, track_to_array(track));
            }
            return out;
        },
        py::arg("n_songs"), py::arg("length"), py::arg("kind") = "linear",
        py::arg("noise_sigma") = 0.0, py::arg("seed") = 0,
        "Deterministic synthetic trajectories as (song_id, [2, length]) pairs; "
        "kind is constant, linear, sine, or piecewise");

    m.def(
        "fit_line",
        [](const DoubleArray& times, const DoubleArray& values) {
            if (times.ndim() != 1 || values.ndim() != 1) {
                throw UsageError("times and values must be 1-D arrays");
            }
            const LinearFit fit =
                fit_line(std::span<const double>(times.data(), static_cast<std::size_t>(times.size())),
                         std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
            return std::make_tuple(fit.slope, fit.intercept, fit.residual_mse);
        },
        py::arg("times"), py::arg("values"),
        "Closed-form OLS line: (slope, intercept, residual_mse)");

    m.def(
        "compare_baseline",
        [](const std::vector<std::pair<std::string, DoubleArray>>& tracks,
           const Checkpoint* model, std::size_t window) {
            std::vector<AnnotationTrack> parsed;
            parsed.reserve(tracks.size());
            for (const auto& [song_id, values] : tracks) {
                parsed.push_back(track_from(song_id, values));
            }
            if (model != nullptr && model->task_tag != 1) {
                throw UsageError("compare_baseline needs a next-point model");
            }
            const auto rows = compare_baseline(parsed, model ? &model->stack : nullptr,
                                               model ? &model->head : nullptr, window);
            py::list out;
            for (const auto& row : rows) {
                py::dict item;
                item["song_id"] = row.song_id;
                item["channel"] = row.channel;
                item["predictor"] = row.predictor;
                item["mse"] = row.mse;
                out.append(std::move(item));
            }
            return out;
        },
        py::arg("tracks"), py::arg("model") = nullptr, py::arg("window") = 10,
        "Next-point MSE rows per song, channel, and predictor over (song_id, [2, T]) tracks");

    m.def(
        "select_next",
        [](const Checkpoint& model, const DoubleArray& history,
           const std::vector<std::tuple<std::string, double, double>>& candidates,
           double tolerance, std::uint64_t seed) {
            if (model.task_tag != 1) throw UsageError("select_next needs a next-point model");
            std::vector<Candidate> pool;
            pool.reserve(candidates.size());
            for (const auto& [clip_id, valence, arousal] : candidates) {
                pool.push_back({clip_id, {valence, arousal}});
            }
            QueuePolicy policy;
            policy.tolerance = tolerance;
            policy.seed = seed;
            const Selection pick = select_next(to_matrix(history, "history"), model.stack,
                                               model.head, pool, policy);
            py::dict out;
            out["clip_id"] = pick.clip_id;
            out["predicted"] = std::make_pair(pick.predicted.valence, pick.predicted.arousal);
            out["distance"] = pick.distance;
            return out;
        },
        py::arg("model"), py::arg("history"), py::arg("candidates"), py::arg("tolerance") = 0.1,
        py::arg("seed") = 0,
        "Pick the next clip: candidates are (clip_id, valence, arousal); tolerance 0 is a "
        "deterministic argmin with ties broken by lowest clip_id");

    m.def(
        "gradient_check",
        [](std::size_t feature_size, std::size_t hidden_size, std::size_t n_modules,
           std::size_t layers_per_module, std::size_t timesteps, double fd_step,
           std::uint64_t seed) {
            LstmStack stack = make_stack(feature_size, hidden_size, n_modules, layers_per_module, 0.0);
            DenseHead head = DenseHead::zeros(hidden_size);
            Rng rng(seed);
            init_network(stack, head, rng);
            Matrix input(feature_size, timesteps);
            for (std::size_t r = 0; r < input.rows(); ++r) {
                for (std::size_t c = 0; c < input.cols(); ++c) input(r, c) = rng.normal(0.0, 1.0);
            }
            const double target[2] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
            return gradient_check(stack, head, input, std::span<const double>(target, 2), fd_step);
        },
        py::arg("feature_size") = 4, py::arg("hidden_size") = 8, py::arg("n_modules") = 1,
        py::arg("layers_per_module") = 2, py::arg("timesteps") = 5, py::arg("fd_step") = 1e-5,
        py::arg("seed") = 0,
        "Max relative error between BPTT gradients and central finite differences");

    m.def(
        "train_emotion",
        [](const py::dict& songs, double val_fraction, std::optional<double> learning_rate,
           std::optional<std::size_t> hidden_size, std::optional<std::size_t> n_modules,
           std::optional<std::size_t> layers_per_module, std::optional<double> dropout_p,
           std::optional<std::size_t> max_epochs, std::optional<std::size_t> batch_size,
           std::optional<std::size_t> early_stop_patience,
           std::optional<double> early_stop_min_delta, std::optional<double> noise_sigma,
           std::uint64_t seed) {
            const Overrides overrides{learning_rate, hidden_size,  n_modules,
                                      layers_per_module, dropout_p, max_epochs,
                                      batch_size,     early_stop_patience,
                                      early_stop_min_delta, noise_sigma};
            return py_train_emotion(songs, val_fraction, overrides, seed);
        },
        py::arg("songs"), py::arg("val_fraction") = 0.2, py::kw_only(),
        py::arg("learning_rate") = py::none(), py::arg("hidden_size") = py::none(),
        py::arg("n_modules") = py::none(), py::arg("layers_per_module") = py::none(),
        py::arg("dropout_p") = py::none(), py::arg("max_epochs") = py::none(),
        py::arg("batch_size") = py::none(), py::arg("early_stop_patience") = py::none(),
        py::arg("early_stop_min_delta") = py::none(), py::arg("noise_sigma") = py::none(),
        py::arg("seed") = 0,
        "Train the clip-to-emotion model on {song_id: (features [n_clips, mels, frames], "
        "targets [n_clips, 2])}; omitted keywords keep the task's published defaults. "
        "Returns (model, curve [epoch, train_mse, val_mse], report)");

    m.def(
        "train_next",
        [](const std::vector<DoubleArray>& tracks, double val_fraction, std::size_t window,
           std::optional<double> learning_rate, std::optional<std::size_t> hidden_size,
           std::optional<std::size_t> n_modules, std::optional<std::size_t> layers_per_module,
           std::optional<double> dropout_p, std::optional<std::size_t> max_epochs,
           std::optional<std::size_t> batch_size, std::optional<std::size_t> early_stop_patience,
           std::optional<double> early_stop_min_delta, std::uint64_t seed) {
            const Overrides overrides{learning_rate, hidden_size,  n_modules,
                                      layers_per_module, dropout_p, max_epochs,
                                      batch_size,     early_stop_patience,
                                      early_stop_min_delta, std::nullopt};
            return py_train_next(tracks, val_fraction, window, overrides, seed);
        },
        py::arg("tracks"), py::arg("val_fraction") = 0.2, py::arg("window") = 10, py::kw_only(),
        py::arg("learning_rate") = py::none(), py::arg("hidden_size") = py::none(),
        py::arg("n_modules") = py::none(), py::arg("layers_per_module") = py::none(),
        py::arg("dropout_p") = py::none(), py::arg("max_epochs") = py::none(),
        py::arg("batch_size") = py::none(), py::arg("early_stop_patience") = py::none(),
        py::arg("early_stop_min_delta") = py::none(), py::arg("seed") = 0,
        "Train the next-point model on [2, T] trajectory arrays; omitted keywords keep the "
        "task's published defaults. Returns (model, curve, report)");

    m.attr("__version__") = "0.1.0";
}
