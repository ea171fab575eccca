#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "mer/annotations.hpp"
#include "mer/csv.hpp"
#include "mer/error.hpp"
#include "mer/models.hpp"
#include "mer/nn.hpp"
#include "util.hpp"

using namespace mer;
using mer::testutil::TempDir;

namespace {

AnnotationTrack ramp_track(const std::string& id, std::size_t n) {
    AnnotationTrack track;
    track.song_id = id;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i);
        track.points.push_back({0.01 * t - 0.4, 0.35 - 0.005 * t});
    }
    return track;
}

LabeledClip random_clip(const std::string& id, std::size_t index, std::size_t features,
                        std::size_t frames, Rng& rng) {
    LabeledClip clip;
    clip.song_id = id;
    clip.index = index;
    clip.features.values = Matrix(features, frames);
    for (std::size_t r = 0; r < features; ++r) {
        for (std::size_t c = 0; c < frames; ++c) clip.features.values(r, c) = rng.normal(0.0, 1.0);
    }
    clip.target = {rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
    return clip;
}

// small dataset: n_songs songs x clips_each clips of features x frames noise
SongDataset tiny_dataset(std::size_t n_songs, std::size_t clips_each, std::size_t features,
                         std::size_t frames, std::uint64_t seed) {
    Rng rng(seed);
    SongDataset data;
    for (std::size_t s = 0; s < n_songs; ++s) {
        const std::string id = "song_" + std::to_string(s);
        std::vector<LabeledClip> clips;
        for (std::size_t i = 0; i < clips_each; ++i) {
            clips.push_back(random_clip(id, i, features, frames, rng));
        }
        data.songs.emplace(id, std::move(clips));
        if (s + 1 < n_songs) {
            data.train_ids.insert(id);
        } else {
            data.validation_ids.insert(id);
        }
    }
    return data;
}

TrainConfig tiny_emotion_config() {
    TrainConfig config;
    config.task = Task::Emotion;
    config.learning_rate = 1e-3;
    config.feature_size = 4;
    config.hidden_size = 4;
    config.n_modules = 1;
    config.layers_per_module = 1;
    config.dropout_p = 0.0;
    config.max_epochs = 5;
    config.early_stop_patience = 10;
    config.early_stop_min_delta = 0.0;
    config.seed = 21;
    return config;
}

}  // namespace

TEST_CASE("make_windows slides with stride one") {
    CHECK(make_windows(ramp_track("a", 58)).size() == 48);
    CHECK(make_windows(ramp_track("a", 11)).size() == 1);
    CHECK(make_windows(ramp_track("a", 10)).empty());
    CHECK(make_windows(ramp_track("a", 3)).empty());
    CHECK(make_windows(ramp_track("a", 5), 3).size() == 2);
    CHECK_THROWS_AS(make_windows(ramp_track("a", 5), 0), UsageError);

    const auto track = ramp_track("a", 14);
    const auto windows = make_windows(track);
    REQUIRE(windows.size() == 4);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        REQUIRE(windows[i].inputs.rows() == 2);
        REQUIRE(windows[i].inputs.cols() == 10);
        for (std::size_t j = 0; j < 10; ++j) {
            CHECK(windows[i].inputs(0, j) == track.points[i + j].valence);
            CHECK(windows[i].inputs(1, j) == track.points[i + j].arousal);
        }
        CHECK(windows[i].target.valence == track.points[i + 10].valence);
        CHECK(windows[i].target.arousal == track.points[i + 10].arousal);
    }
}

TEST_CASE("make_song_windows keeps ids and drops nothing") {
    std::vector<AnnotationTrack> tracks = {ramp_track("x", 12), ramp_track("y", 8),
                                           ramp_track("z", 20)};
    const auto songs = make_song_windows(tracks);
    REQUIRE(songs.size() == 3);
    CHECK(songs[0].song_id == "x");
    CHECK(songs[0].windows.size() == 2);
    CHECK(songs[1].song_id == "y");
    CHECK(songs[1].windows.empty());
    CHECK(songs[2].windows.size() == 10);
}

TEST_CASE("make_task2_batches covers every index exactly once") {
    Rng rng(9);
    const auto batches = make_task2_batches(23, 5, rng);
    REQUIRE(batches.size() == 5);
    for (std::size_t b = 0; b + 1 < batches.size(); ++b) CHECK(batches[b].size() == 5);
    CHECK(batches.back().size() == 3);

    std::set<std::size_t> seen;
    for (const auto& batch : batches) {
        for (const std::size_t idx : batch) {
            CHECK(idx < 23);
            CHECK(seen.insert(idx).second);
        }
    }
    CHECK(seen.size() == 23);

    Rng rng2(9);
    const auto again = make_task2_batches(23, 5, rng2);
    CHECK(again == batches);

    Rng rng3(9);
    CHECK_THROWS_AS(make_task2_batches(23, 0, rng3), UsageError);

    Rng rng4(1);
    CHECK(make_task2_batches(0, 5, rng4).empty());
}

TEST_CASE("make_task1_batches permutes nonempty train songs") {
    SongDataset data = tiny_dataset(5, 2, 3, 4, 1);
    data.songs["empty"] = {};
    data.train_ids.insert("empty");

    Rng rng(4);
    const auto ids = make_task1_batches(data, rng);
    CHECK(ids.size() == 4);  // 4 train songs with clips, "empty" dropped
    std::set<std::string> seen(ids.begin(), ids.end());
    CHECK(seen.size() == 4);
    CHECK(seen.count("empty") == 0);
    for (const auto& id : data.train_ids) {
        if (id != "empty") CHECK(seen.count(id) == 1);
    }

    data.train_ids.insert("ghost");
    Rng rng2(4);
    CHECK_THROWS_AS(make_task1_batches(data, rng2), UsageError);
}

TEST_CASE("default configurations match the published tables") {
    LstmStack stack;
    DenseHead head;
    TrainConfig config;

    build_task1_default(stack, head, config);
    CHECK(config.task == Task::Emotion);
    CHECK(config.learning_rate == 5e-5);
    CHECK(config.feature_size == 128);
    CHECK(config.hidden_size == 20);
    CHECK(config.n_modules == 2);
    CHECK(config.layers_per_module == 2);
    CHECK(config.dropout_p == 0.1);
    CHECK(config.max_epochs == 200);
    CHECK(config.batch_size == 0);
    REQUIRE(stack.layers.size() == 4);
    CHECK(stack.layers[0].input() == 128);
    CHECK(stack.layers[0].hidden() == 20);
    CHECK(stack.layers[1].input() == 20);
    CHECK(head.weights.rows() == 2);
    CHECK(head.weights.cols() == 20);

    build_task2_default(stack, head, config);
    CHECK(config.task == Task::NextPoint);
    CHECK(config.learning_rate == 1e-4);
    CHECK(config.feature_size == 2);
    CHECK(config.hidden_size == 32);
    CHECK(config.n_modules == 1);
    CHECK(config.layers_per_module == 2);
    CHECK(config.dropout_p == 0.0);
    CHECK(config.max_epochs == 10);
    CHECK(config.batch_size == 64);
    REQUIRE(stack.layers.size() == 2);
    CHECK(stack.layers[0].input() == 2);
    CHECK(stack.layers[0].hidden() == 32);
}

TEST_CASE("TrainConfig::validate rejects bad fields") {
    TrainConfig config = tiny_emotion_config();
    config.validate();

    auto broken = config;
    broken.learning_rate = 0.0;
    CHECK_THROWS_AS(broken.validate(), UsageError);
    broken = config;
    broken.dropout_p = 1.0;
    CHECK_THROWS_AS(broken.validate(), UsageError);
    broken = config;
    broken.dropout_p = -0.1;
    CHECK_THROWS_AS(broken.validate(), UsageError);
    broken = config;
    broken.hidden_size = 0;
    CHECK_THROWS_AS(broken.validate(), UsageError);
    broken = config;
    broken.max_epochs = 0;
    CHECK_THROWS_AS(broken.validate(), UsageError);
    broken = config;
    broken.early_stop_patience = 0;
    CHECK_THROWS_AS(broken.validate(), UsageError);
    broken = config;
    broken.early_stop_min_delta = -1e-9;
    CHECK_THROWS_AS(broken.validate(), UsageError);
    broken = config;
    broken.noise_sigma = -0.5;
    CHECK_THROWS_AS(broken.validate(), UsageError);
    broken = config;
    broken.clip_gradients = true;
    broken.clip_threshold = 0.0;
    CHECK_THROWS_AS(broken.validate(), UsageError);
}

TEST_CASE("train_emotion is deterministic under a fixed seed") {
    const SongDataset data = tiny_dataset(3, 3, 4, 5, 2);
    TrainConfig config = tiny_emotion_config();
    config.dropout_p = 0.1;
    config.noise_sigma = 0.05;

    LstmStack stack_a, stack_b;
    DenseHead head_a, head_b;
    build_network(config, stack_a, head_a);
    build_network(config, stack_b, head_b);
    Rng init_a(100), init_b(100);
    init_network(stack_a, head_a, init_a);
    init_network(stack_b, head_b, init_b);

    const auto report_a = train_emotion(stack_a, head_a, data, config);
    const auto report_b = train_emotion(stack_b, head_b, data, config);

    REQUIRE(report_a.curve.size() == report_b.curve.size());
    for (std::size_t i = 0; i < report_a.curve.size(); ++i) {
        CHECK(report_a.curve[i].train_mse == report_b.curve[i].train_mse);
        CHECK(report_a.curve[i].val_mse == report_b.curve[i].val_mse);
    }
    CHECK(report_a.best_epoch == report_b.best_epoch);

    const auto& clip = data.songs.at("song_0")[0];
    const auto pa = predict_emotion(stack_a, head_a, clip.features.values);
    const auto pb = predict_emotion(stack_b, head_b, clip.features.values);
    CHECK(pa.valence == pb.valence);
    CHECK(pa.arousal == pb.arousal);

    // a different seed must change the trajectory
    config.seed = 22;
    LstmStack stack_c;
    DenseHead head_c;
    build_network(config, stack_c, head_c);
    Rng init_c(100);
    init_network(stack_c, head_c, init_c);
    const auto report_c = train_emotion(stack_c, head_c, data, config);
    bool moved = false;
    const std::size_t shared = std::min(report_a.curve.size(), report_c.curve.size());
    for (std::size_t i = 0; i < shared && !moved; ++i) {
        moved = report_a.curve[i].train_mse != report_c.curve[i].train_mse;
    }
    CHECK(moved);
}

TEST_CASE("early stopping waits out exactly the patience") {
    const SongDataset data = tiny_dataset(3, 2, 4, 5, 3);
    TrainConfig config = tiny_emotion_config();
    config.max_epochs = 50;
    config.early_stop_patience = 3;
    config.early_stop_min_delta = 10.0;  // nothing can improve by this much

    LstmStack stack;
    DenseHead head;
    build_network(config, stack, head);
    Rng init(7);
    init_network(stack, head, init);

    const auto report = train_emotion(stack, head, data, config);
    CHECK(report.stopped_epoch == 4);  // epoch 1 best, then patience misses
    CHECK(report.best_epoch == 1);
    CHECK(report.curve.size() == 4);
    CHECK(report.final_val_mse == report.curve[0].val_mse);
}

TEST_CASE("training runs to max_epochs when patience never fills") {
    const SongDataset data = tiny_dataset(3, 2, 4, 5, 4);
    TrainConfig config = tiny_emotion_config();
    config.max_epochs = 6;
    config.early_stop_patience = 10;

    LstmStack stack;
    DenseHead head;
    build_network(config, stack, head);
    Rng init(8);
    init_network(stack, head, init);

    const auto report = train_emotion(stack, head, data, config);
    CHECK(report.stopped_epoch == 6);
    CHECK(report.curve.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(report.curve[i].epoch == i + 1);
}

TEST_CASE("the best validation epoch is restored on return") {
    const SongDataset data = tiny_dataset(4, 3, 4, 5, 5);
    TrainConfig config = tiny_emotion_config();
    config.max_epochs = 8;
    config.learning_rate = 5e-3;  // big steps so validation wiggles

    LstmStack stack;
    DenseHead head;
    build_network(config, stack, head);
    Rng init(9);
    init_network(stack, head, init);

    const auto report = train_emotion(stack, head, data, config);

    double min_val = report.curve[0].val_mse;
    for (const auto& row : report.curve) min_val = std::min(min_val, row.val_mse);
    CHECK(report.final_val_mse == min_val);
    CHECK(report.curve[report.best_epoch - 1].val_mse == min_val);
    CHECK(report.final_train_mse == report.curve[report.best_epoch - 1].train_mse);
    CHECK(report.final_val_rmse == doctest::Approx(std::sqrt(min_val)).epsilon(1e-15));

    // the returned parameters really are the best epoch's parameters
    const std::vector<std::string> val_ids(data.validation_ids.begin(),
                                           data.validation_ids.end());
    const auto eval = evaluate_emotion(stack, head, data, val_ids);
    CHECK(eval.mse == report.final_val_mse);
}

TEST_CASE("train_next mirrors the emotion loop on windows") {
    const auto tracks = synth_tracks(3, 26, SynthKind::Sine, 0.02, 6);
    std::vector<Window> train_windows = make_windows(tracks[0]);
    const auto more = make_windows(tracks[1]);
    train_windows.insert(train_windows.end(), more.begin(), more.end());
    const std::vector<Window> val_windows = make_windows(tracks[2]);
    REQUIRE(train_windows.size() == 32);
    REQUIRE(val_windows.size() == 16);

    TrainConfig config;
    config.task = Task::NextPoint;
    config.learning_rate = 1e-3;
    config.feature_size = 2;
    config.hidden_size = 8;
    config.n_modules = 1;
    config.layers_per_module = 1;
    config.dropout_p = 0.0;
    config.max_epochs = 6;
    config.batch_size = 8;
    config.seed = 13;

    LstmStack stack;
    DenseHead head;
    build_network(config, stack, head);
    Rng init(14);
    init_network(stack, head, init);

    const auto report = train_next(stack, head, train_windows, val_windows, config);
    CHECK(report.stopped_epoch >= 1);
    CHECK(report.curve.size() == report.stopped_epoch);
    CHECK(report.best_epoch >= 1);
    CHECK(report.best_epoch <= report.stopped_epoch);

    double min_val = report.curve[0].val_mse;
    for (const auto& row : report.curve) min_val = std::min(min_val, row.val_mse);
    CHECK(report.final_val_mse == min_val);

    // restored parameters reproduce the reported validation loss
    SongWindows vs{"val", val_windows};
    const auto eval = evaluate_windows(stack, head, {vs});
    CHECK(eval.mse == doctest::Approx(report.final_val_mse).epsilon(1e-12));

    config.batch_size = 0;
    LstmStack stack2;
    DenseHead head2;
    build_network(config, stack2, head2);
    CHECK_THROWS_AS(train_next(stack2, head2, train_windows, val_windows, config), UsageError);
}

TEST_CASE("a poisoned target raises Diverged with the epoch") {
    const auto tracks = synth_tracks(2, 15, SynthKind::Constant, 0.0, 1);
    std::vector<Window> train_windows = make_windows(tracks[0]);
    std::vector<Window> val_windows = make_windows(tracks[1]);
    train_windows[0].target.valence = std::numeric_limits<double>::quiet_NaN();

    TrainConfig config;
    config.task = Task::NextPoint;
    config.learning_rate = 1e-3;
    config.feature_size = 2;
    config.hidden_size = 4;
    config.n_modules = 1;
    config.layers_per_module = 1;
    config.dropout_p = 0.0;
    config.max_epochs = 3;
    config.batch_size = 16;

    LstmStack stack;
    DenseHead head;
    build_network(config, stack, head);
    Rng init(2);
    init_network(stack, head, init);

    try {
        train_next(stack, head, train_windows, val_windows, config);
        FAIL("expected Diverged");
    } catch (const Diverged& e) {
        CHECK(e.epoch() == 1);
    }

    // Diverged is a numeric error for exit-code purposes
    LstmStack stack2;
    DenseHead head2;
    build_network(config, stack2, head2);
    Rng init2(2);
    init_network(stack2, head2, init2);
    CHECK_THROWS_AS(train_next(stack2, head2, train_windows, val_windows, config), NumericError);
}

TEST_CASE("training rejects empty splits") {
    TrainConfig config = tiny_emotion_config();
    LstmStack stack;
    DenseHead head;
    build_network(config, stack, head);

    SongDataset no_train = tiny_dataset(2, 2, 4, 5, 1);
    no_train.train_ids.clear();
    CHECK_THROWS_AS(train_emotion(stack, head, no_train, config), UsageError);

    SongDataset no_val = tiny_dataset(2, 2, 4, 5, 1);
    no_val.validation_ids.clear();
    CHECK_THROWS_AS(train_emotion(stack, head, no_val, config), UsageError);

    const auto tracks = synth_tracks(1, 16, SynthKind::Constant, 0.0, 1);
    const auto windows = make_windows(tracks[0]);
    TrainConfig config2 = config;
    config2.feature_size = 2;
    config2.batch_size = 4;
    LstmStack stack2;
    DenseHead head2;
    build_network(config2, stack2, head2);
    CHECK_THROWS_AS(train_next(stack2, head2, {}, windows, config2), UsageError);
    CHECK_THROWS_AS(train_next(stack2, head2, windows, {}, config2), UsageError);
}

TEST_CASE("evaluate_emotion reports per-song and pooled scores") {
    // zero network predicts (0, 0); the mse is the mean squared target
    SongDataset data;
    std::vector<LabeledClip> clips_a;
    for (std::size_t i = 0; i < 3; ++i) {
        LabeledClip clip;
        clip.song_id = "a";
        clip.index = i;
        clip.features.values = Matrix(3, 4, 0.7);
        clip.target = {0.6, -0.8};  // item mse (0.36 + 0.64) / 2 = 0.5
        clips_a.push_back(clip);
    }
    std::vector<LabeledClip> clips_b;
    LabeledClip clip_b;
    clip_b.song_id = "b";
    clip_b.features.values = Matrix(3, 4, -0.2);
    clip_b.target = {0.0, 0.0};
    clips_b.push_back(clip_b);
    data.songs["a"] = clips_a;
    data.songs["b"] = clips_b;

    LstmStack stack = make_stack(3, 5, 1, 1, 0.0);
    DenseHead head = DenseHead::zeros(5);

    const auto report = evaluate_emotion(stack, head, data, {"a", "b"});
    CHECK(report.n_items == 4);
    REQUIRE(report.per_song.size() == 2);
    CHECK(report.per_song[0].song_id == "a");
    CHECK(report.per_song[0].n_items == 3);
    CHECK(report.per_song[0].mse == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(report.per_song[0].rmse == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(report.per_song[1].mse == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(report.mse == doctest::Approx(1.5 / 4.0).epsilon(1e-12));
    CHECK(report.rmse == doctest::Approx(std::sqrt(0.375)).epsilon(1e-12));

    CHECK_THROWS_AS(evaluate_emotion(stack, head, data, {"ghost"}), UsageError);
    CHECK_THROWS_AS(evaluate_emotion(stack, head, data, {}), UsageError);
}

TEST_CASE("a zero network scores the mean squared annotation") {
    // targets at (sqrt(0.054), sqrt(0.054)) give mse 0.054 and rmse 0.2324
    const double v = std::sqrt(0.054);
    SongDataset data;
    std::vector<LabeledClip> clips;
    for (std::size_t i = 0; i < 5; ++i) {
        LabeledClip clip;
        clip.song_id = "s";
        clip.index = i;
        clip.features.values = Matrix(2, 3, 0.1 * static_cast<double>(i));
        clip.target = {v, v};
        clips.push_back(clip);
    }
    data.songs["s"] = clips;

    LstmStack stack = make_stack(2, 4, 1, 1, 0.0);
    DenseHead head = DenseHead::zeros(4);
    const auto report = evaluate_emotion(stack, head, data, {"s"});
    CHECK(report.mse == doctest::Approx(0.054).epsilon(1e-12));
    CHECK(std::abs(report.rmse - 0.2324) < 1e-4);

    const std::string csv = format_eval_csv(report);
    CHECK(csv.find("song_id,n_items,mse,rmse\n") == 0);
    CHECK(csv.find("s,5,0.0540,0.2324\n") != std::string::npos);
    CHECK(csv.find("ALL,5,0.0540,0.2324\n") != std::string::npos);

    const std::string summary = format_eval_summary(report);
    CHECK(summary.find("0.2324") != std::string::npos);
    CHECK(summary.find("5 items") != std::string::npos);
}

TEST_CASE("predictions are clamped to the circumplex square") {
    LstmStack stack = make_stack(3, 4, 1, 1, 0.0);
    DenseHead head = DenseHead::zeros(4);
    head.bias[0] = 7.0;
    head.bias[1] = -3.5;

    const auto p = predict_emotion(stack, head, Matrix(3, 6, 0.3));
    CHECK(p.valence == 1.0);
    CHECK(p.arousal == -1.0);

    LstmStack stack2 = make_stack(2, 4, 1, 1, 0.0);
    const auto q = predict_next(stack2, head, Matrix(2, 10, 0.1));
    CHECK(q.valence == 1.0);
    CHECK(q.arousal == -1.0);
}

TEST_CASE("loss csv round trip is lossless") {
    TempDir dir;
    const std::string path = dir.file("loss.csv");

    std::vector<EpochLoss> curve;
    Rng rng(3);
    for (std::size_t e = 1; e <= 12; ++e) {
        curve.push_back({e, rng.uniform(0.0, 0.3), rng.uniform(0.0, 0.3)});
    }
    write_loss_csv(path, curve);
    const auto loaded = read_loss_csv(path);
    REQUIRE(loaded.size() == curve.size());
    for (std::size_t i = 0; i < curve.size(); ++i) {
        CHECK(loaded[i].epoch == curve[i].epoch);
        CHECK(loaded[i].train_mse == curve[i].train_mse);
        CHECK(loaded[i].val_mse == curve[i].val_mse);
    }

    write_text_file(path, "epoch,train,val\n1,0.1,0.2\n");
    CHECK_THROWS_AS(read_loss_csv(path), IoError);
}
