#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lwf {

// Synthetic two-dataset generator. Each dataset ("ori" and "new") has its
// own 100-word-scale content vocabulary; a configurable fraction of the
// words is shared between the two, the rest is dataset-exclusive. Clips
// belong to sound classes: features are drawn from a per-class Gaussian
// template (class mean vector plus isotropic noise) and captions from a
// per-class phrase pool, so captions of the same clip share words and
// clips of the same class resemble each other.
struct SynthConfig {
    int n_classes = 5;
    int frames = 80;            // feature frames per clip
    int vocab_words = 100;      // content words per dataset
    double overlap = 0.6;       // shared fraction of the content words
    double feature_noise = 0.05;

    int ori_train_clips = 20;
    int ori_val_clips = 5;
    int ori_eval_clips = 5;
    int ori_captions_per_clip = 5;

    int new_train_clips = 20;
    int new_val_clips = 0;
    int new_eval_clips = 5;
    int new_captions_per_clip = 1;

    bool operator==(const SynthConfig&) const = default;
    void validate() const;
};

// Deterministic pseudo-word: two consonant-vowel syllables in a fixed
// enumeration. Distinct indices below 4900 yield distinct words.
std::string synth_word(int index);

// Content-word pool of one dataset, in generation order: the shared words
// first (round(overlap * vocab_words) of them), then the dataset-exclusive
// words. Both pools have exactly vocab_words entries.
std::vector<std::string> synth_word_pool(const SynthConfig& cfg, bool original_dataset);

// Writes <out_dir>/ori and <out_dir>/new, each holding vocab.txt, split
// manifests (train.csv / val.csv / eval.csv; empty splits are omitted),
// and features/<split>_NNNN.afb per clip. Identical (cfg, n_mels, seed)
// arguments produce byte-identical trees. An existing non-empty out_dir
// is refused unless force is set.
void generate_datasets(const SynthConfig& cfg, int n_mels, uint64_t seed,
                       const std::string& out_dir, bool force);

}  // namespace lwf
