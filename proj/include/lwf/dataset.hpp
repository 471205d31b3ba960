#pragma once

#include <string>
#include <vector>

#include "lwf/tensor.hpp"
#include "lwf/vocab.hpp"

namespace lwf {

// One audio clip with its reference captions. `features` is [T_a, F].
struct CaptionedClip {
    std::string clip_id;
    Tensor features;
    std::vector<std::string> captions;
};

// CSV field quoting per RFC 4180: fields containing comma, quote, or
// newline are wrapped in double quotes with embedded quotes doubled.
std::string csv_escape(const std::string& field);
std::vector<std::string> csv_parse_line(const std::string& line, size_t line_no);

// Manifest format: header `clip_id,feature_file,caption`, one row per
// (clip, caption) pair. Feature paths are resolved relative to the
// manifest's directory. Rows sharing a clip_id are grouped into one clip
// (first-appearance order) and the feature file is loaded once.
std::vector<CaptionedClip> load_manifest(const std::string& manifest_path);

struct ManifestRow {
    std::string clip_id;
    std::string feature_file;
    std::string caption;
};

void save_manifest(const std::vector<ManifestRow>& rows, const std::string& path);

// One training example per (clip, caption) pair, captions encoded against
// `vocab` with out-of-vocabulary words dropped or mapped to unk.
struct TrainExample {
    Tensor features;          // shared with the owning clip
    std::vector<int> tokens;  // start token ... end token
    std::string clip_id;
};

std::vector<TrainExample> make_examples(const std::vector<CaptionedClip>& clips,
                                        const Vocabulary& vocab, bool drop_oov,
                                        EncodeStats* stats = nullptr);

}  // namespace lwf
