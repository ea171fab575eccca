#include "mer/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mer/csv.hpp"
#include "mer/error.hpp"
#include "mer/rng.hpp"

namespace mer {

namespace {

void warn(std::vector<std::string>* sink, const std::string& msg) {
    if (sink) sink->push_back(msg);
}

std::map<std::string, std::vector<double>> read_wide_values(const std::string& path) {
    CsvTable table = read_csv(path, /*require_rectangular=*/false);
    if (table.header.empty()) throw IoError("empty header in " + path);
    std::map<std::string, std::vector<double>> rows;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& cells = table.rows[r];
        if (cells.size() < 2) {
            throw IoError(path + ": row " + std::to_string(r + 2) + " has no value columns");
        }
        const std::string& id = cells[0];
        if (rows.count(id)) throw IoError(path + ": duplicate song_id " + id);
        std::vector<double> values;
        values.reserve(cells.size() - 1);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            values.push_back(parse_cell(cells[c], path + " song " + id));
        }
        rows.emplace(id, std::move(values));
    }
    return rows;
}

double apply_scale(double v, const EmomusicOptions& options, const std::string& context) {
    if (options.strict) {
        if (v < -1.0 - 1e-12 || v > 1.0 + 1e-12) {
            throw ScaleViolation(context + ": value " + std::to_string(v) +
                                 " outside [-1, 1] (use lenient mode to rescale)");
        }
        return std::clamp(v, -1.0, 1.0);
    }
    if (options.lenient_scale == 0.0) throw UsageError("lenient scale factor must be nonzero");
    return std::clamp(v / options.lenient_scale, -1.0, 1.0);
}

}  // namespace

std::vector<AnnotationTrack> load_emomusic(const std::string& arousal_csv,
                                           const std::string& valence_csv,
                                           const EmomusicOptions& options,
                                           std::vector<std::string>* warnings) {
    auto arousal = read_wide_values(arousal_csv);
    auto valence = read_wide_values(valence_csv);

    std::vector<AnnotationTrack> tracks;
    for (const auto& [id, a_values] : arousal) {
        auto it = valence.find(id);
        if (it == valence.end()) {
            warn(warnings, "song " + id + " present only in arousal file; dropped");
            continue;
        }
        const auto& v_values = it->second;
        if (v_values.size() != a_values.size()) {
            throw IoError("song " + id + ": arousal has " + std::to_string(a_values.size()) +
                          " columns but valence has " + std::to_string(v_values.size()));
        }
        AnnotationTrack track;
        track.song_id = id;
        track.points.reserve(a_values.size());
        for (std::size_t i = 0; i < a_values.size(); ++i) {
            const std::string ctx = "song " + id + " step " + std::to_string(i);
            track.points.push_back(clamp(apply_scale(v_values[i], options, ctx),
                                         apply_scale(a_values[i], options, ctx)));
        }
        tracks.push_back(std::move(track));
    }
    for (const auto& [id, values] : valence) {
        (void)values;
        if (!arousal.count(id)) {
            warn(warnings, "song " + id + " present only in valence file; dropped");
        }
    }
    if (tracks.empty()) throw IoError("no song appears in both annotation files");
    return tracks;
}

void save_tracks_csv(const std::string& path, const std::vector<AnnotationTrack>& tracks) {
    const bool with_stds =
        std::any_of(tracks.begin(), tracks.end(), [](const auto& t) { return t.stds.has_value(); });
    std::ostringstream out;
    out << "song_id,time_s,valence,arousal";
    if (with_stds) out << ",valence_std,arousal_std";
    out << "\n";
    for (const auto& track : tracks) {
        if (with_stds && (!track.stds || track.stds->size() != track.points.size())) {
            throw UsageError("save_tracks_csv: track " + track.song_id +
                             " lacks stds while other tracks have them");
        }
        for (std::size_t i = 0; i < track.points.size(); ++i) {
            out << track.song_id << ',' << format_fixed6(track.time_of(i)) << ','
                << format_fixed6(track.points[i].valence) << ','
                << format_fixed6(track.points[i].arousal);
            if (with_stds) {
                out << ',' << format_fixed6((*track.stds)[i].first) << ','
                    << format_fixed6((*track.stds)[i].second);
            }
            out << "\n";
        }
    }
    write_text_file(path, out.str());
}

std::vector<AnnotationTrack> load_tracks_csv(const std::string& path) {
    CsvTable table = read_csv(path);
    const bool with_stds = table.header.size() == 6;
    if (!(table.header.size() == 4 || with_stds) || table.header[0] != "song_id" ||
        table.header[1] != "time_s" || table.header[2] != "valence" ||
        table.header[3] != "arousal") {
        throw IoError(path + ": expected header song_id,time_s,valence,arousal[,valence_std,arousal_std]");
    }

    std::vector<AnnotationTrack> tracks;
    std::set<std::string> seen;
    AnnotationTrack* current = nullptr;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& cells = table.rows[r];
        const std::string ctx = path + ":" + std::to_string(r + 2);
        const std::string& id = cells[0];
        const double t = parse_cell(cells[1], ctx);
        const double v = parse_cell(cells[2], ctx);
        const double a = parse_cell(cells[3], ctx);
        if (!current || current->song_id != id) {
            if (seen.count(id)) {
                throw IoError(ctx + ": rows of song " + id + " are not contiguous");
            }
            seen.insert(id);
            tracks.push_back(AnnotationTrack{});
            current = &tracks.back();
            current->song_id = id;
            current->start_time = t;
            if (with_stds) current->stds.emplace();
        } else {
            const double expected = current->time_of(current->points.size());
            if (std::abs(t - expected) > 1e-6) {
                throw IoError(ctx + ": time " + cells[1] + " breaks the 0.5 s grid (expected " +
                              format_fixed6(expected) + ")");
            }
        }
        current->points.push_back(clamp(v, a));
        if (with_stds) {
            const double vs = parse_cell(cells[4], ctx);
            const double as = parse_cell(cells[5], ctx);
            if (vs < 0.0 || as < 0.0) throw IoError(ctx + ": negative standard deviation");
            current->stds->emplace_back(vs, as);
        }
    }
    if (tracks.empty()) throw IoError(path + ": no annotation rows");
    return tracks;
}

std::vector<LabeledClip> join_clips(const std::vector<MelSpectrogram>& clips,
                                    const AnnotationTrack& track,
                                    std::vector<std::string>* warnings) {
    if (clips.empty()) throw UsageError("join_clips: no clips for song " + track.song_id);
    if (track.points.empty()) throw UsageError("join_clips: empty track " + track.song_id);
    const std::size_t n = std::min(clips.size(), track.points.size());
    if (clips.size() != track.points.size()) {
        warn(warnings, "song " + track.song_id + ": " + std::to_string(clips.size()) +
                           " clips vs " + std::to_string(track.points.size()) +
                           " annotation points; using first " + std::to_string(n));
    }
    std::vector<LabeledClip> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(LabeledClip{track.song_id, i, clips[i], track.points[i]});
    }
    return out;
}

SongDataset split_by_song(SongDataset dataset, double validation_fraction, std::uint64_t seed) {
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw UsageError("split_by_song: fraction must be in (0, 1)");
    }
    if (dataset.songs.size() < 2) {
        throw UsageError("split_by_song: need at least 2 songs, got " +
                         std::to_string(dataset.songs.size()));
    }
    std::vector<std::string> ids;
    ids.reserve(dataset.songs.size());
    for (const auto& [id, clips] : dataset.songs) {
        (void)clips;
        ids.push_back(id);
    }
    // map iteration is already sorted; the shuffle alone decides the split
    Rng rng(seed);
    rng.shuffle(ids);

    const auto n_val = static_cast<std::size_t>(
        std::ceil(validation_fraction * static_cast<double>(ids.size())));
    dataset.train_ids.clear();
    dataset.validation_ids.clear();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i < n_val) {
            dataset.validation_ids.insert(ids[i]);
        } else {
            dataset.train_ids.insert(ids[i]);
        }
    }
    return dataset;
}

SynthKind synth_kind_from_string(const std::string& name) {
    if (name == "constant") return SynthKind::Constant;
    if (name == "linear") return SynthKind::Linear;
    if (name == "sine") return SynthKind::Sine;
    if (name == "piecewise") return SynthKind::Piecewise;
    throw UsageError("unknown synthetic track kind '" + name +
                     "' (valid: constant, linear, sine, piecewise)");
}

std::vector<AnnotationTrack> synth_tracks(std::size_t n_songs, std::size_t length,
                                          SynthKind kind, double noise_sigma,
                                          std::uint64_t seed) {
    if (n_songs < 1) throw UsageError("synth_tracks: n_songs must be >= 1");
    if (length < 11) throw UsageError("synth_tracks: length must be >= 11");
    if (noise_sigma < 0.0) throw InvalidValue("synth_tracks: noise_sigma must be >= 0");

    Rng rng(seed);
    std::vector<AnnotationTrack> tracks;
    tracks.reserve(n_songs);
    for (std::size_t s = 0; s < n_songs; ++s) {
        AnnotationTrack track;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "synth_%04zu", s);
        track.song_id = buf;
        track.points.reserve(length);

        // per-channel trajectory parameters
        double base[2], slope[2], amp[2], period[2], phase[2];
        for (int ch = 0; ch < 2; ++ch) {
            base[ch] = rng.uniform(-0.8, 0.8);
            slope[ch] = rng.uniform(-0.05, 0.05);
            amp[ch] = rng.uniform(0.2, 0.6);
            period[ch] = rng.uniform(5.0, 20.0);
            phase[ch] = rng.uniform(0.0, 2.0 * M_PI);
        }
        std::vector<double> level[2];
        std::vector<std::size_t> cuts;
        if (kind == SynthKind::Piecewise) {
            const std::size_t n_segments = 2 + static_cast<std::size_t>(rng.uniform_int(3));
            for (std::size_t seg = 0; seg < n_segments; ++seg) {
                level[0].push_back(rng.uniform(-0.8, 0.8));
                level[1].push_back(rng.uniform(-0.8, 0.8));
            }
            for (std::size_t seg = 1; seg < n_segments; ++seg) {
                cuts.push_back(1 + rng.uniform_int(length - 1));
            }
            std::sort(cuts.begin(), cuts.end());
        }

        for (std::size_t i = 0; i < length; ++i) {
            const double t = 0.5 * static_cast<double>(i);
            double value[2];
            for (int ch = 0; ch < 2; ++ch) {
                switch (kind) {
                    case SynthKind::Constant:
                        value[ch] = base[ch];
                        break;
                    case SynthKind::Linear:
                        value[ch] = 0.5 * base[ch] + slope[ch] * t;
                        break;
                    case SynthKind::Sine:
                        value[ch] = 0.3 * base[ch] +
                                    amp[ch] * std::sin(2.0 * M_PI * t / period[ch] + phase[ch]);
                        break;
                    case SynthKind::Piecewise: {
                        std::size_t seg = 0;
                        while (seg < cuts.size() && i >= cuts[seg]) ++seg;
                        value[ch] = level[ch][seg];
                        break;
                    }
                }
                if (noise_sigma > 0.0) value[ch] += rng.normal(0.0, noise_sigma);
            }
            track.points.push_back(clamp(value[0], value[1]));
        }
        tracks.push_back(std::move(track));
    }
    return tracks;
}

}  // namespace mer
