#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mer/annotations.hpp"
#include "mer/baseline.hpp"
#include "mer/csv.hpp"
#include "mer/dsp.hpp"
#include "mer/error.hpp"
#include "mer/models.hpp"
#include "mer/nn.hpp"
#include "mer/queue.hpp"
#include "mer/rng.hpp"
#include "mer/wav.hpp"

namespace fs = std::filesystem;
using namespace mer;

namespace {

// ---------------------------------------------------------------- shared

std::string format_real(double v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

const AnnotationTrack& pick_track(const std::vector<AnnotationTrack>& tracks,
                                  const std::string& song_id) {
    if (song_id.empty()) {
        if (tracks.size() == 1) return tracks.front();
        throw UsageError("file holds " + std::to_string(tracks.size()) +
                         " songs; pick one with --song");
    }
    for (const auto& track : tracks) {
        if (track.song_id == song_id) return track;
    }
    throw UsageError("song not found: " + song_id);
}

Matrix tail_window(const AnnotationTrack& track, std::size_t length) {
    if (track.points.size() < length) {
        throw UsageError("song " + track.song_id + " has " +
                         std::to_string(track.points.size()) + " points, need " +
                         std::to_string(length));
    }
    Matrix window(2, length);
    const std::size_t start = track.points.size() - length;
    for (std::size_t j = 0; j < length; ++j) {
        window(0, j) = track.points[start + j].valence;
        window(1, j) = track.points[start + j].arousal;
    }
    return window;
}

// songs with annotations but no feature file are dropped with a warning
SongDataset load_labeled_songs(const std::string& features_dir,
                               const std::string& annotations_csv,
                               std::size_t expected_mels) {
    const auto tracks = load_tracks_csv(annotations_csv);
    SongDataset data;
    for (const auto& track : tracks) {
        const fs::path melf = fs::path(features_dir) / (track.song_id + ".melf");
        if (!fs::exists(melf)) {
            std::cerr << "warning: no feature file for song " << track.song_id << "; dropped\n";
            continue;
        }
        const auto clips = read_melf(melf.string());
        if (!clips.empty() && clips.front().n_mels() != expected_mels) {
            throw UsageError("song " + track.song_id + ": feature file has " +
                             std::to_string(clips.front().n_mels()) + " mel rows, expected " +
                             std::to_string(expected_mels));
        }
        std::vector<std::string> warnings;
        data.songs[track.song_id] = join_clips(clips, track, &warnings);
        for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    }
    if (data.songs.empty()) {
        throw IoError("no annotated song has a feature file in " + features_dir);
    }
    return data;
}

// seeded song-level split of tracks into train/validation window pools
std::pair<std::vector<Window>, std::vector<Window>> split_windows(
    const std::vector<AnnotationTrack>& tracks, double val_fraction, std::uint64_t seed,
    std::size_t length) {
    if (tracks.size() < 2) throw UsageError("need at least 2 songs to split");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw UsageError("val_fraction must be in (0, 1)");
    }
    std::vector<std::size_t> order(tracks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    const auto n_val = static_cast<std::size_t>(
        std::ceil(val_fraction * static_cast<double>(order.size())));

    std::vector<Window> train, val;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto windows = make_windows(tracks[order[i]], length);
        auto& sink = i < n_val ? val : train;
        sink.insert(sink.end(), windows.begin(), windows.end());
    }
    if (train.empty() || val.empty()) {
        throw UsageError("a split side has no windows; tracks are too short");
    }
    return {std::move(train), std::move(val)};
}

Checkpoint load_model(const std::string& path, std::uint8_t want_tag, const char* why) {
    Checkpoint model = load_checkpoint(path);
    if (model.task_tag != want_tag) {
        throw UsageError(std::string(why) + " needs a " +
                         (want_tag == 0 ? "clip-emotion" : "next-point") +
                         " checkpoint, got task tag " + std::to_string(model.task_tag));
    }
    return model;
}

// ---------------------------------------------------------------- features

struct FeaturesCli {
    std::string config_path;
    std::string in_dir;
    std::string out_dir;
    DspConfig dsp;
};

int cmd_features(const FeaturesCli& cli) {
    cli.dsp.validate();
    if (!fs::is_directory(cli.in_dir)) throw IoError("not a directory: " + cli.in_dir);
    fs::create_directories(cli.out_dir);

    std::vector<fs::path> wavs;
    for (const auto& entry : fs::directory_iterator(cli.in_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".wav") {
            wavs.push_back(entry.path());
        }
    }
    std::sort(wavs.begin(), wavs.end());

    std::string manifest = "song_id,n_clips\n";
    std::size_t failed = 0;
    for (const auto& wav : wavs) {
        const std::string song_id = wav.stem().string();
        try {
            const AudioClip audio = load_wav(wav.string(), cli.dsp.sample_rate);
            const auto clips = slice_clips(audio, cli.dsp.clip_seconds);
            std::vector<MelSpectrogram> features;
            features.reserve(clips.size());
            for (const auto& clip : clips) features.push_back(log_mel(clip, cli.dsp));
            const fs::path out = fs::path(cli.out_dir) / (song_id + ".melf");
            write_melf(out.string(), features);
            manifest += song_id + ',' + std::to_string(features.size()) + '\n';
            std::cout << song_id << ": " << features.size() << " clips\n";
        } catch (const Error& e) {
            std::cerr << "features: " << wav.string() << ": " << e.what() << "\n";
            failed += 1;
        }
    }
    write_text_file((fs::path(cli.out_dir) / "manifest.csv").string(), manifest);
    std::cout << "manifest = " << (fs::path(cli.out_dir) / "manifest.csv").string() << "\n";
    if (failed > 0) {
        std::cerr << "features: " << failed << " of " << wavs.size() << " files failed\n";
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainCli {
    std::string config_path;
    std::string task = "emotion";
    double learning_rate = 0.0;
    std::size_t feature_size = 0;
    std::size_t hidden_size = 0;
    std::size_t n_modules = 0;
    std::size_t layers_per_module = 0;
    double dropout_p = 0.0;
    std::size_t max_epochs = 0;
    std::size_t batch_size = 0;
    std::size_t early_stop_patience = 0;
    double early_stop_min_delta = 0.0;
    double noise_sigma = 0.0;
    bool clip_gradients = false;
    double clip_threshold = 0.0;
    std::uint64_t seed = 0;

    std::string features_dir;
    std::string annotations;
    std::string checkpoint = "model.ckpt";
    std::string loss_csv = "loss.csv";
    double val_fraction = 0.2;
    std::size_t window = 10;
    std::string synthetic;
    std::size_t synth_songs = 8;
    std::size_t synth_length = 30;
    double synth_noise = 0.0;
    std::size_t synth_frames = 44;

    CLI::Option* o_lr = nullptr;
    CLI::Option* o_feature = nullptr;
    CLI::Option* o_hidden = nullptr;
    CLI::Option* o_modules = nullptr;
    CLI::Option* o_layers = nullptr;
    CLI::Option* o_dropout = nullptr;
    CLI::Option* o_epochs = nullptr;
    CLI::Option* o_batch = nullptr;
    CLI::Option* o_patience = nullptr;
    CLI::Option* o_min_delta = nullptr;
    CLI::Option* o_noise = nullptr;
    CLI::Option* o_clip = nullptr;
    CLI::Option* o_clip_thresh = nullptr;

    // flags given on the command line or in the config file beat the
    // task's published defaults
    void apply_overrides(TrainConfig& config) const {
        if (o_lr->count()) config.learning_rate = learning_rate;
        if (o_feature->count()) config.feature_size = feature_size;
        if (o_hidden->count()) config.hidden_size = hidden_size;
        if (o_modules->count()) config.n_modules = n_modules;
        if (o_layers->count()) config.layers_per_module = layers_per_module;
        if (o_dropout->count()) config.dropout_p = dropout_p;
        if (o_epochs->count()) config.max_epochs = max_epochs;
        if (o_batch->count()) config.batch_size = batch_size;
        if (o_patience->count()) config.early_stop_patience = early_stop_patience;
        if (o_min_delta->count()) config.early_stop_min_delta = early_stop_min_delta;
        if (o_noise->count()) config.noise_sigma = noise_sigma;
        if (o_clip->count()) config.clip_gradients = clip_gradients;
        if (o_clip_thresh->count()) config.clip_threshold = clip_threshold;
        config.seed = seed;
    }
};

std::string config_echo(const TrainConfig& config) {
    std::ostringstream out;
    out << "task = " << to_string(config.task) << "\n"
        << "learning_rate = " << format_real(config.learning_rate) << "\n"
        << "feature_size = " << config.feature_size << "\n"
        << "hidden_size = " << config.hidden_size << "\n"
        << "n_modules = " << config.n_modules << "\n"
        << "layers_per_module = " << config.layers_per_module << "\n"
        << "dropout_p = " << format_real(config.dropout_p) << "\n"
        << "max_epochs = " << config.max_epochs << "\n"
        << "batch_size = " << config.batch_size << "\n"
        << "early_stop_patience = " << config.early_stop_patience << "\n"
        << "early_stop_min_delta = " << format_real(config.early_stop_min_delta) << "\n"
        << "seed = " << config.seed << "\n"
        << "noise_sigma = " << format_real(config.noise_sigma) << "\n"
        << "clip_gradients = " << (config.clip_gradients ? "true" : "false") << "\n"
        << "clip_threshold = " << format_real(config.clip_threshold) << "\n";
    return out.str();
}

std::string report_echo(const TrainReport& report) {
    std::ostringstream out;
    out << "epochs_run = " << report.stopped_epoch << "\n"
        << "best_epoch = " << report.best_epoch << "\n"
        << "final_train_mse = " << format_exact(report.final_train_mse) << "\n"
        << "final_val_mse = " << format_exact(report.final_val_mse) << "\n"
        << "final_train_rmse = " << format_exact(report.final_train_rmse) << "\n"
        << "final_val_rmse = " << format_exact(report.final_val_rmse) << "\n"
        << "wall_seconds = " << format_real(report.wall_seconds) << "\n";
    return out.str();
}

// synthetic Task 1 data: Gaussian feature matrices labeled by a synthetic
// trajectory, one song per track
SongDataset synth_emotion_dataset(const TrainCli& cli, const TrainConfig& config) {
    const auto tracks = synth_tracks(cli.synth_songs, cli.synth_length,
                                     synth_kind_from_string(cli.synthetic), cli.synth_noise,
                                     cli.seed);
    Rng base(cli.seed);
    Rng feature_rng = base.fork(1);
    SongDataset data;
    for (const auto& track : tracks) {
        std::vector<LabeledClip> clips;
        clips.reserve(track.points.size());
        for (std::size_t i = 0; i < track.points.size(); ++i) {
            LabeledClip clip;
            clip.song_id = track.song_id;
            clip.index = i;
            clip.features.values = Matrix(config.feature_size, cli.synth_frames);
            for (std::size_t r = 0; r < config.feature_size; ++r) {
                for (std::size_t c = 0; c < cli.synth_frames; ++c) {
                    clip.features.values(r, c) = feature_rng.normal(0.0, 1.0);
                }
            }
            clip.target = track.points[i];
            clips.push_back(std::move(clip));
        }
        data.songs[track.song_id] = std::move(clips);
    }
    return split_by_song(std::move(data), cli.val_fraction, cli.seed);
}

int cmd_train(const TrainCli& cli) {
    LstmStack stack;
    DenseHead head;
    TrainConfig config;
    if (cli.task == "emotion") {
        build_task1_default(stack, head, config);
    } else {
        build_task2_default(stack, head, config);
    }
    cli.apply_overrides(config);
    build_network(config, stack, head);
    Rng init_rng(config.seed);
    init_network(stack, head, init_rng);

    std::cout << config_echo(config);

    TrainReport report;
    if (config.task == Task::Emotion) {
        SongDataset data;
        if (!cli.synthetic.empty()) {
            data = synth_emotion_dataset(cli, config);
        } else {
            if (cli.features_dir.empty() || cli.annotations.empty()) {
                throw UsageError("emotion training needs --features and --annotations, "
                                 "or --synthetic");
            }
            data = split_by_song(
                load_labeled_songs(cli.features_dir, cli.annotations, config.feature_size),
                cli.val_fraction, config.seed);
        }
        report = train_emotion(stack, head, data, config);
    } else {
        std::vector<AnnotationTrack> tracks;
        if (!cli.synthetic.empty()) {
            tracks = synth_tracks(cli.synth_songs, cli.synth_length,
                                  synth_kind_from_string(cli.synthetic), cli.synth_noise,
                                  config.seed);
        } else {
            if (cli.annotations.empty()) {
                throw UsageError("next-point training needs --annotations or --synthetic");
            }
            tracks = load_tracks_csv(cli.annotations);
        }
        auto [train_w, val_w] =
            split_windows(tracks, cli.val_fraction, config.seed, cli.window);
        report = train_next(stack, head, train_w, val_w, config);
    }

    save_checkpoint(cli.checkpoint, stack, head, config.task == Task::Emotion ? 0 : 1);
    write_loss_csv(cli.loss_csv, report.curve);
    std::cout << report_echo(report);
    std::cout << "checkpoint = " << cli.checkpoint << "\n";
    std::cout << "loss_csv = " << cli.loss_csv << "\n";
    return 0;
}

// ---------------------------------------------------------------- eval

struct EvalCli {
    std::string config_path;
    std::string checkpoint;
    std::string features_dir;
    std::string annotations;
    std::size_t window = 10;
    bool csv = false;
};

int cmd_eval(const EvalCli& cli) {
    const Checkpoint model = load_checkpoint(cli.checkpoint);
    EvalReport report;
    if (model.task_tag == 0) {
        if (cli.features_dir.empty()) {
            throw UsageError("a clip-emotion checkpoint needs --features");
        }
        const SongDataset data =
            load_labeled_songs(cli.features_dir, cli.annotations, model.stack.input_size());
        std::vector<std::string> ids;
        for (const auto& [id, clips] : data.songs) {
            (void)clips;
            ids.push_back(id);
        }
        report = evaluate_emotion(model.stack, model.head, data, ids);
    } else {
        const auto tracks = load_tracks_csv(cli.annotations);
        report = evaluate_windows(model.stack, model.head, make_song_windows(tracks, cli.window));
    }
    std::cout << (cli.csv ? format_eval_csv(report) : format_eval_summary(report));
    return 0;
}

// ---------------------------------------------------------------- predict

struct PredictCli {
    std::string config_path;
    std::string checkpoint;
    std::string features;
    std::string annotations;
    std::string song;
    std::size_t window = 10;
    bool csv = false;
};

int cmd_predict(const PredictCli& cli) {
    const Checkpoint model = load_checkpoint(cli.checkpoint);
    if (model.task_tag == 0) {
        if (cli.features.empty()) {
            throw UsageError("a clip-emotion checkpoint needs --features FILE.melf");
        }
        const auto clips = read_melf(cli.features);
        if (cli.csv) std::cout << "clip_index,valence,arousal\n";
        for (std::size_t i = 0; i < clips.size(); ++i) {
            const EmotionPoint p = predict_emotion(model.stack, model.head, clips[i].values);
            if (cli.csv) {
                std::cout << i << ',' << format_fixed6(p.valence) << ','
                          << format_fixed6(p.arousal) << "\n";
            } else {
                std::cout << "clip " << i << ": valence " << format_fixed6(p.valence)
                          << ", arousal " << format_fixed6(p.arousal) << "\n";
            }
        }
    } else {
        if (cli.annotations.empty()) {
            throw UsageError("a next-point checkpoint needs --annotations");
        }
        const auto tracks = load_tracks_csv(cli.annotations);
        const auto& track = pick_track(tracks, cli.song);
        const Matrix history = tail_window(track, cli.window);
        const EmotionPoint p = predict_next(model.stack, model.head, history);
        if (cli.csv) {
            std::cout << "valence,arousal\n"
                      << format_fixed6(p.valence) << ',' << format_fixed6(p.arousal) << "\n";
        } else {
            std::cout << "next point for " << track.song_id << ": valence "
                      << format_fixed6(p.valence) << ", arousal " << format_fixed6(p.arousal)
                      << "\n";
        }
    }
    return 0;
}

// ---------------------------------------------------------------- baseline

struct BaselineCli {
    std::string config_path;
    std::string annotations;
    std::string checkpoint;
    std::size_t window = 10;
    bool csv = false;
};

int cmd_baseline(const BaselineCli& cli) {
    const auto tracks = load_tracks_csv(cli.annotations);
    std::vector<BaselineRow> rows;
    if (cli.checkpoint.empty()) {
        rows = compare_baseline(tracks, nullptr, nullptr, cli.window);
    } else {
        const Checkpoint model = load_model(cli.checkpoint, 1, "baseline");
        rows = compare_baseline(tracks, &model.stack, &model.head, cli.window);
    }
    if (cli.csv) {
        std::cout << format_baseline_csv(rows);
        return 0;
    }
    // pooled view: mean MSE per predictor across songs and channels
    std::vector<std::pair<std::string, std::pair<double, std::size_t>>> pooled;
    for (const auto& row : rows) {
        auto it = std::find_if(pooled.begin(), pooled.end(),
                               [&](const auto& p) { return p.first == row.predictor; });
        if (it == pooled.end()) {
            pooled.push_back({row.predictor, {row.mse, 1}});
        } else {
            it->second.first += row.mse;
            it->second.second += 1;
        }
    }
    for (const auto& [predictor, acc] : pooled) {
        std::cout << predictor << " mean_mse "
                  << format_fixed6(acc.first / static_cast<double>(acc.second)) << " over "
                  << acc.second << " rows\n";
    }
    return 0;
}

// ---------------------------------------------------------------- queue

struct QueueCli {
    std::string config_path;
    std::string checkpoint;
    std::string annotations;
    std::string candidates;
    std::string song;
    std::size_t steps = 5;
    std::size_t window = 10;
    QueuePolicy policy;
    bool csv = false;
};

int cmd_queue(const QueueCli& cli) {
    const Checkpoint model = load_model(cli.checkpoint, 1, "queue");
    const auto tracks = load_tracks_csv(cli.annotations);
    const auto& track = pick_track(tracks, cli.song);
    const auto candidates = load_candidates_csv(cli.candidates);

    Matrix history = tail_window(track, cli.window);
    Rng rng(cli.policy.seed);
    if (cli.csv) std::cout << "step,chosen_id,pred_valence,pred_arousal,distance\n";
    for (std::size_t step = 1; step <= cli.steps; ++step) {
        const Selection pick =
            select_next(history, model.stack, model.head, candidates, cli.policy, rng);
        if (cli.csv) {
            std::cout << step << ',' << pick.clip_id << ','
                      << format_fixed6(pick.predicted.valence) << ','
                      << format_fixed6(pick.predicted.arousal) << ','
                      << format_fixed6(pick.distance) << "\n";
        } else {
            std::cout << "step " << step << ": " << pick.clip_id << " at distance "
                      << format_fixed6(pick.distance) << ", predicted ("
                      << format_fixed6(pick.predicted.valence) << ", "
                      << format_fixed6(pick.predicted.arousal) << ")\n";
        }
        // the trajectory continues with the chosen clip's opening
        const auto it = std::find_if(candidates.begin(), candidates.end(),
                                     [&](const Candidate& c) { return c.clip_id == pick.clip_id; });
        for (std::size_t j = 0; j + 1 < cli.window; ++j) {
            history(0, j) = history(0, j + 1);
            history(1, j) = history(1, j + 1);
        }
        history(0, cli.window - 1) = it->opening.valence;
        history(1, cli.window - 1) = it->opening.arousal;
    }
    return 0;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckCli {
    std::string config_path;
    std::size_t feature_size = 4;
    std::size_t hidden_size = 8;
    std::size_t n_modules = 1;
    std::size_t layers_per_module = 2;
    std::size_t timesteps = 5;
    double fd_step = 1e-5;
    double threshold = 1e-4;
    std::uint64_t seed = 0;
};

int cmd_gradcheck(const GradcheckCli& cli) {
    LstmStack stack = make_stack(cli.feature_size, cli.hidden_size, cli.n_modules,
                                 cli.layers_per_module, 0.0);
    DenseHead head = DenseHead::zeros(cli.hidden_size);
    Rng rng(cli.seed);
    init_network(stack, head, rng);

    Matrix input(cli.feature_size, cli.timesteps);
    for (std::size_t r = 0; r < input.rows(); ++r) {
        for (std::size_t c = 0; c < input.cols(); ++c) input(r, c) = rng.normal(0.0, 1.0);
    }
    const double target[2] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};

    const double err =
        gradient_check(stack, head, input, std::span<const double>(target, 2), cli.fd_step);
    std::cout << "max_rel_error = " << format_exact(err) << "\n";
    if (err < cli.threshold) {
        std::cout << "PASS\n";
        return 0;
    }
    std::cout << "FAIL (threshold " << format_real(cli.threshold) << ")\n";
    return 2;
}

// ---------------------------------------------------------------- wiring

std::string valid_keys(const CLI::App* sub) {
    std::string out;
    for (const CLI::Option* opt : sub->get_options()) {
        for (const auto& name : opt->get_lnames()) {
            if (name == "help" || name == "config") continue;
            if (!out.empty()) out += ", ";
            out += name;
        }
    }
    return out;
}

// line-oriented `key = value` file; keys are the subcommand's long flag
// names, and values for flags already given on the command line are ignored
void apply_config_file(CLI::App* sub, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        line_no += 1;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        CLI::detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path + ":" + std::to_string(line_no) + ": expected key = value");
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        CLI::detail::trim(key);
        CLI::detail::trim(value);
        CLI::Option* op =
            key == "help" || key == "config" ? nullptr : sub->get_option_no_throw("--" + key);
        if (op == nullptr) {
            throw UsageError(path + ":" + std::to_string(line_no) + ": unknown key '" + key +
                             "'; valid keys: " + valid_keys(sub));
        }
        if (op->count() > 0) continue;
        if (value.empty()) {
            throw UsageError(path + ":" + std::to_string(line_no) + ": key '" + key +
                             "' has no value");
        }
        if (op->get_expected_min() == 0) {
            op->add_result(op->get_flag_value("--" + key, value));
        } else {
            op->add_result(value);
        }
        op->run_callback();
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"music emotion engine: log-mel features, recurrent valence/arousal\n"
                 "models, linear baselines, and tolerance-based clip queuing"};
    app.require_subcommand(1);

    FeaturesCli features;
    auto* sub_features = app.add_subcommand(
        "features", "Slice WAVs into half-second clips and store log-mel features");
    sub_features->add_option("--in", features.in_dir, "directory of .wav files")->required();
    sub_features->add_option("--out", features.out_dir, "output directory for .melf + manifest")
        ->required();
    sub_features->add_option("--sample_rate", features.dsp.sample_rate, "expected WAV rate (Hz)")->capture_default_str();
    sub_features->add_option("--clip_seconds", features.dsp.clip_seconds, "clip length (s)")->capture_default_str();
    sub_features->add_option("--n_mels", features.dsp.n_mels, "mel bins")->capture_default_str();
    sub_features->add_option("--fft_size", features.dsp.fft_size, "FFT length (samples)")->capture_default_str();
    sub_features->add_option("--hop_length", features.dsp.hop_length, "hop (samples)")->capture_default_str();
    sub_features->add_option("--config", features.config_path,
                           "key = value file; command-line flags win");

    TrainCli train;
    auto* sub_train = app.add_subcommand(
        "train", "Train a model; omitted flags use the task's published defaults");
    sub_train->add_option("--task", train.task, "emotion (clip features) or next (trajectory)")
        ->check(CLI::IsMember({"emotion", "next"}));
    train.o_lr = sub_train->add_option("--learning_rate", train.learning_rate, "Adam step size");
    train.o_feature =
        sub_train->add_option("--feature_size", train.feature_size, "input rows per timestep");
    train.o_hidden = sub_train->add_option("--hidden_size", train.hidden_size, "LSTM width");
    train.o_modules = sub_train->add_option("--n_modules", train.n_modules, "stacked modules");
    train.o_layers = sub_train->add_option("--layers_per_module", train.layers_per_module,
                                           "LSTM layers per module");
    train.o_dropout =
        sub_train->add_option("--dropout_p", train.dropout_p, "inter-layer dropout in [0, 1)");
    train.o_epochs = sub_train->add_option("--max_epochs", train.max_epochs, "epoch cap");
    train.o_batch = sub_train->add_option("--batch_size", train.batch_size,
                                          "windows per batch (0 = one batch per song)");
    train.o_patience = sub_train->add_option("--early_stop_patience", train.early_stop_patience,
                                             "epochs without improvement before stopping");
    train.o_min_delta = sub_train->add_option(
        "--early_stop_min_delta", train.early_stop_min_delta, "improvement that resets patience");
    train.o_noise = sub_train->add_option("--noise_sigma", train.noise_sigma,
                                          "Gaussian feature augmentation (emotion task)");
    train.o_clip = sub_train->add_flag("--clip_gradients", train.clip_gradients,
                                       "rescale gradients above the threshold");
    train.o_clip_thresh =
        sub_train->add_option("--clip_threshold", train.clip_threshold, "gradient norm cap");
    sub_train->add_option("--seed", train.seed, "seed for every random choice")->capture_default_str();
    sub_train->add_option("--features", train.features_dir, "directory of .melf files");
    sub_train->add_option("--annotations", train.annotations, "long-format annotation CSV");
    sub_train->add_option("--checkpoint", train.checkpoint, "output checkpoint path")->capture_default_str();
    sub_train->add_option("--loss_csv", train.loss_csv, "output loss curve path")->capture_default_str();
    sub_train->add_option("--val_fraction", train.val_fraction, "songs held out for validation")->capture_default_str();
    sub_train->add_option("--window", train.window, "trajectory window length (next task)")->capture_default_str();
    sub_train->add_option("--synthetic", train.synthetic,
                          "train on generated tracks: constant, linear, sine, piecewise");
    sub_train->add_option("--synth_songs", train.synth_songs, "synthetic song count")->capture_default_str();
    sub_train->add_option("--synth_length", train.synth_length, "points per synthetic song")->capture_default_str();
    sub_train->add_option("--synth_noise", train.synth_noise, "synthetic trajectory noise")->capture_default_str();
    sub_train->add_option("--synth_frames", train.synth_frames,
                          "frames per synthetic feature clip")->capture_default_str();
    sub_train->add_option("--config", train.config_path,
                           "key = value file; command-line flags win");

    EvalCli eval;
    auto* sub_eval = app.add_subcommand("eval", "Score a checkpoint against labeled data");
    sub_eval->add_option("--checkpoint", eval.checkpoint, "model to score")->required();
    sub_eval->add_option("--annotations", eval.annotations, "long-format annotation CSV")
        ->required();
    sub_eval->add_option("--features", eval.features_dir, "directory of .melf files");
    sub_eval->add_option("--window", eval.window, "trajectory window length")->capture_default_str();
    sub_eval->add_flag("--csv", eval.csv, "machine-readable per-song table on stdout");
    sub_eval->add_option("--config", eval.config_path,
                           "key = value file; command-line flags win");

    PredictCli predict;
    auto* sub_predict = app.add_subcommand("predict", "Run a checkpoint on new inputs");
    sub_predict->add_option("--checkpoint", predict.checkpoint, "model to run")->required();
    sub_predict->add_option("--features", predict.features, "one song's .melf file");
    sub_predict->add_option("--annotations", predict.annotations, "long-format annotation CSV");
    sub_predict->add_option("--song", predict.song, "song id when the CSV has several");
    sub_predict->add_option("--window", predict.window, "trajectory window length")->capture_default_str();
    sub_predict->add_flag("--csv", predict.csv, "machine-readable output");
    sub_predict->add_option("--config", predict.config_path,
                           "key = value file; command-line flags win");

    BaselineCli baseline;
    auto* sub_baseline =
        app.add_subcommand("baseline", "Compare next-point predictors on annotation tracks");
    sub_baseline->add_option("--annotations", baseline.annotations, "long-format annotation CSV")
        ->required();
    sub_baseline->add_option("--checkpoint", baseline.checkpoint,
                             "optional next-point model for lstm rows");
    sub_baseline->add_option("--window", baseline.window, "trajectory window length")->capture_default_str();
    sub_baseline->add_flag("--csv", baseline.csv, "full per-song table on stdout");
    sub_baseline->add_option("--config", baseline.config_path,
                           "key = value file; command-line flags win");

    QueueCli queue;
    auto* sub_queue =
        app.add_subcommand("queue", "Walk a trajectory, picking the nearest candidate clip "
                           "within tolerance at each step");
    sub_queue->add_option("--checkpoint", queue.checkpoint, "next-point model")->required();
    sub_queue->add_option("--annotations", queue.annotations, "history trajectory CSV")
        ->required();
    sub_queue->add_option("--candidates", queue.candidates,
                          "candidate manifest clip_id,valence,arousal")
        ->required();
    sub_queue->add_option("--song", queue.song, "song id when the CSV has several");
    sub_queue->add_option("--steps", queue.steps, "selections to simulate")->capture_default_str();
    sub_queue->add_option("--window", queue.window, "trajectory window length")->capture_default_str();
    sub_queue->add_option("--tolerance", queue.policy.tolerance,
                          "distance slack; 0 = deterministic argmin")->capture_default_str();
    sub_queue->add_option("--seed", queue.policy.seed, "seed for tie-free sampling")->capture_default_str();
    sub_queue->add_flag("--csv", queue.csv, "machine-readable trace");
    sub_queue->add_option("--config", queue.config_path,
                           "key = value file; command-line flags win");

    GradcheckCli gradcheck;
    auto* sub_gradcheck = app.add_subcommand(
        "gradcheck", "Compare analytic gradients with central finite differences");
    sub_gradcheck->add_option("--feature_size", gradcheck.feature_size, "input rows")->capture_default_str();
    sub_gradcheck->add_option("--hidden_size", gradcheck.hidden_size, "LSTM width")->capture_default_str();
    sub_gradcheck->add_option("--n_modules", gradcheck.n_modules, "stacked modules")->capture_default_str();
    sub_gradcheck->add_option("--layers_per_module", gradcheck.layers_per_module,
                              "layers per module")->capture_default_str();
    sub_gradcheck->add_option("--timesteps", gradcheck.timesteps, "sequence length")->capture_default_str();
    sub_gradcheck->add_option("--fd_step", gradcheck.fd_step, "finite-difference step")->capture_default_str();
    sub_gradcheck->add_option("--threshold", gradcheck.threshold, "pass bound")->capture_default_str();
    sub_gradcheck->add_option("--seed", gradcheck.seed, "seed for weights and input")->capture_default_str();
    sub_gradcheck->add_option("--config", gradcheck.config_path,
                           "key = value file; command-line flags win");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }

    try {
        if (sub_features->parsed()) {
            if (!features.config_path.empty()) apply_config_file(sub_features, features.config_path);
            return cmd_features(features);
        }
        if (sub_train->parsed()) {
            if (!train.config_path.empty()) apply_config_file(sub_train, train.config_path);
            return cmd_train(train);
        }
        if (sub_eval->parsed()) {
            if (!eval.config_path.empty()) apply_config_file(sub_eval, eval.config_path);
            return cmd_eval(eval);
        }
        if (sub_predict->parsed()) {
            if (!predict.config_path.empty()) apply_config_file(sub_predict, predict.config_path);
            return cmd_predict(predict);
        }
        if (sub_baseline->parsed()) {
            if (!baseline.config_path.empty()) apply_config_file(sub_baseline, baseline.config_path);
            return cmd_baseline(baseline);
        }
        if (sub_queue->parsed()) {
            if (!queue.config_path.empty()) apply_config_file(sub_queue, queue.config_path);
            return cmd_queue(queue);
        }
        if (sub_gradcheck->parsed()) {
            if (!gradcheck.config_path.empty()) apply_config_file(sub_gradcheck, gradcheck.config_path);
            return cmd_gradcheck(gradcheck);
        }
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    }
    return 3;
}
