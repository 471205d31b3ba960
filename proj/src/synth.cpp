#include "lwf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "lwf/dataset.hpp"
#include "lwf/error.hpp"
#include "lwf/features.hpp"
#include "lwf/rng.hpp"
#include "lwf/tensor.hpp"
#include "lwf/vocab.hpp"

namespace lwf {

namespace {

namespace fs = std::filesystem;

constexpr const char* kConsonants = "bdfgklmnprstvz";  // 14
constexpr const char* kVowels = "aeiou";               // 5
constexpr int kSyllables = 14 * 5;

// Seed-stream tags so the independent random draws (class templates, clip
// features, captions) never alias each other.
constexpr uint64_t kTemplateTag = 0x7E0000;
constexpr uint64_t kFeatureTag = 0x10000;
constexpr uint64_t kCaptionTag = 0x20000;

int shared_word_count(const SynthConfig& cfg) {
    return static_cast<int>(std::llround(cfg.overlap * cfg.vocab_words));
}

struct SplitSpec {
    const char* name;
    int clips;
};

struct DatasetPlan {
    std::string label;  // "ori" or "new"
    uint64_t seed;
    std::vector<SplitSpec> splits;
    int captions_per_clip;
    std::vector<std::string> pool;
};

// Class c owns the pool words at positions congruent to c modulo
// n_classes, which spreads shared and exclusive words over every class.
std::vector<std::string> class_lexicon(const std::vector<std::string>& pool, int n_classes,
                                       int c) {
    std::vector<std::string> words;
    for (size_t i = static_cast<size_t>(c); i < pool.size(); i += static_cast<size_t>(n_classes)) {
        words.push_back(pool[i]);
    }
    return words;
}

std::string make_caption(Rng& rng, const std::vector<std::string>& lexicon) {
    const int length = 4 + static_cast<int>(rng.below(3));  // 4..6 words
    std::string caption;
    for (int w = 0; w < length; ++w) {
        if (w > 0) caption += ' ';
        caption += lexicon[rng.below(lexicon.size())];
    }
    return caption;
}

Tensor make_features(Rng& rng, const std::vector<double>& tmpl, int frames, int n_mels,
                     double noise) {
    std::vector<double> data(static_cast<size_t>(frames) * n_mels);
    for (int t = 0; t < frames; ++t) {
        for (int f = 0; f < n_mels; ++f) {
            data[static_cast<size_t>(t) * n_mels + f] = tmpl[f] + noise * rng.normal();
        }
    }
    return Tensor({frames, n_mels}, std::move(data));
}

void write_dataset(const DatasetPlan& plan, const SynthConfig& cfg, int n_mels,
                   const fs::path& dir) {
    fs::create_directories(dir / "features");

    std::vector<std::string> sorted_pool = plan.pool;
    std::sort(sorted_pool.begin(), sorted_pool.end());
    save_vocabulary(Vocabulary::from_words(sorted_pool), (dir / "vocab.txt").string());

    // One Gaussian template (mean vector over mel bands) per sound class.
    std::vector<std::vector<double>> templates(static_cast<size_t>(cfg.n_classes));
    for (int c = 0; c < cfg.n_classes; ++c) {
        Rng rng(mix_seed(plan.seed, kTemplateTag + static_cast<uint64_t>(c)));
        templates[c].resize(static_cast<size_t>(n_mels));
        for (int f = 0; f < n_mels; ++f) templates[c][f] = rng.uniform(-1.0, 1.0);
    }
    std::vector<std::vector<std::string>> lexicons(static_cast<size_t>(cfg.n_classes));
    for (int c = 0; c < cfg.n_classes; ++c) {
        lexicons[c] = class_lexicon(plan.pool, cfg.n_classes, c);
    }

    int clip_index = 0;  // continuous across splits, so no two clips repeat
    for (const SplitSpec& split : plan.splits) {
        if (split.clips == 0) continue;
        std::vector<ManifestRow> rows;
        for (int i = 0; i < split.clips; ++i, ++clip_index) {
            const int c = clip_index % cfg.n_classes;
            char name[32];
            std::snprintf(name, sizeof(name), "%s_%04d", split.name, i);
            const std::string feature_file = std::string("features/") + name + ".afb";
            const std::string clip_id = plan.label + "_" + name;

            Rng frng(mix_seed(plan.seed, kFeatureTag + static_cast<uint64_t>(clip_index)));
            save_features(
                make_features(frng, templates[c], cfg.frames, n_mels, cfg.feature_noise),
                (dir / feature_file).string());

            Rng crng(mix_seed(plan.seed, kCaptionTag + static_cast<uint64_t>(clip_index)));
            for (int j = 0; j < plan.captions_per_clip; ++j) {
                rows.push_back({clip_id, feature_file, make_caption(crng, lexicons[c])});
            }
        }
        save_manifest(rows, (dir / (std::string(split.name) + ".csv")).string());
    }
}

}  // namespace

void SynthConfig::validate() const {
    if (n_classes < 1) throw ConfigError("synth.n_classes must be at least 1");
    if (frames < 1) throw ConfigError("synth.frames must be at least 1");
    if (vocab_words < n_classes || vocab_words > 2000) {
        throw ConfigError("synth.vocab_words must lie in [n_classes, 2000]");
    }
    if (!(overlap >= 0.0 && overlap <= 1.0)) {
        throw ConfigError("synth.overlap must lie in [0, 1]");
    }
    if (!(feature_noise >= 0.0)) throw ConfigError("synth.feature_noise must be non-negative");
    for (int clips : {ori_train_clips, ori_val_clips, ori_eval_clips, new_train_clips,
                      new_val_clips, new_eval_clips}) {
        if (clips < 0) throw ConfigError("synth clip counts must be non-negative");
    }
    if (ori_captions_per_clip < 1 || new_captions_per_clip < 1) {
        throw ConfigError("synth captions per clip must be at least 1");
    }
}

std::string synth_word(int index) {
    if (index < 0 || index >= kSyllables * kSyllables) {
        throw ConfigError("synth_word index out of range: " + std::to_string(index));
    }
    const auto syllable = [](int s) {
        return std::string{kConsonants[s / 5], kVowels[s % 5]};
    };
    return syllable(index / kSyllables) + syllable(index % kSyllables);
}

std::vector<std::string> synth_word_pool(const SynthConfig& cfg, bool original_dataset) {
    cfg.validate();
    const int shared = shared_word_count(cfg);
    const int exclusive = cfg.vocab_words - shared;
    std::vector<std::string> pool;
    pool.reserve(static_cast<size_t>(cfg.vocab_words));
    for (int i = 0; i < shared; ++i) pool.push_back(synth_word(i));
    const int base = original_dataset ? shared : shared + exclusive;
    for (int i = 0; i < exclusive; ++i) pool.push_back(synth_word(base + i));
    return pool;
}

void generate_datasets(const SynthConfig& cfg, int n_mels, uint64_t seed,
                       const std::string& out_dir, bool force) {
    cfg.validate();
    if (n_mels < 1) throw ConfigError("generate_datasets: n_mels must be at least 1");
    const fs::path out(out_dir);
    if (fs::exists(out) && !fs::is_empty(out) && !force) {
        throw DataError("output directory '" + out_dir +
                        "' is not empty (pass --force to overwrite)");
    }

    const DatasetPlan plans[2] = {
        {"ori",
         mix_seed(seed, 1),
         {{"train", cfg.ori_train_clips}, {"val", cfg.ori_val_clips}, {"eval", cfg.ori_eval_clips}},
         cfg.ori_captions_per_clip,
         synth_word_pool(cfg, true)},
        {"new",
         mix_seed(seed, 2),
         {{"train", cfg.new_train_clips}, {"val", cfg.new_val_clips}, {"eval", cfg.new_eval_clips}},
         cfg.new_captions_per_clip,
         synth_word_pool(cfg, false)},
    };
    for (const DatasetPlan& plan : plans) {
        write_dataset(plan, cfg, n_mels, out / plan.label);
    }
}

}  // namespace lwf
