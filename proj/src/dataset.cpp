#include "lwf/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "lwf/error.hpp"
#include "lwf/features.hpp"

namespace lwf {

std::string csv_escape(const std::string& field) {
    const bool needs_quotes = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::vector<std::string> csv_parse_line(const std::string& line, size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool in_quotes = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            if (!cur.empty()) {
                throw FormatError("csv line " + std::to_string(line_no) +
                                  ": quote inside unquoted field");
            }
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (in_quotes) {
        throw FormatError("csv line " + std::to_string(line_no) + ": unterminated quote");
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::vector<CaptionedClip> load_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw DataError("cannot open manifest: " + manifest_path);
    const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();

    std::string line;
    size_t line_no = 0;
    if (!std::getline(in, line)) throw FormatError("manifest " + manifest_path + ": empty file");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "clip_id,feature_file,caption") {
        throw FormatError("manifest " + manifest_path + " line 1: expected header "
                          "'clip_id,feature_file,caption', found '" + line + "'");
    }

    std::vector<CaptionedClip> clips;
    std::unordered_map<std::string, size_t> clip_index;
    std::unordered_map<std::string, std::string> clip_feature_file;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = csv_parse_line(line, line_no);
        if (fields.size() != 3) {
            throw FormatError("manifest " + manifest_path + " line " + std::to_string(line_no) +
                              ": expected 3 fields, found " + std::to_string(fields.size()));
        }
        const std::string& clip_id = fields[0];
        const std::string& feature_file = fields[1];
        const std::string& caption = fields[2];
        if (clip_id.empty() || feature_file.empty()) {
            throw FormatError("manifest " + manifest_path + " line " + std::to_string(line_no) +
                              ": empty clip_id or feature_file");
        }
        auto it = clip_index.find(clip_id);
        if (it == clip_index.end()) {
            CaptionedClip clip;
            clip.clip_id = clip_id;
            clip.features = load_features((base / feature_file).string());
            clip.captions.push_back(caption);
            clip_index.emplace(clip_id, clips.size());
            clip_feature_file.emplace(clip_id, feature_file);
            clips.push_back(std::move(clip));
        } else {
            if (clip_feature_file[clip_id] != feature_file) {
                throw FormatError("manifest " + manifest_path + " line " +
                                  std::to_string(line_no) + ": clip '" + clip_id +
                                  "' maps to two different feature files");
            }
            clips[it->second].captions.push_back(caption);
        }
    }
    if (clips.empty()) {
        throw DataError("manifest " + manifest_path + ": no data rows");
    }
    return clips;
}

void save_manifest(const std::vector<ManifestRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open manifest for writing: " + path);
    out << "clip_id,feature_file,caption\n";
    for (const auto& r : rows) {
        out << csv_escape(r.clip_id) << ',' << csv_escape(r.feature_file) << ','
            << csv_escape(r.caption) << '\n';
    }
    if (!out) throw DataError("failed writing manifest: " + path);
}

std::vector<TrainExample> make_examples(const std::vector<CaptionedClip>& clips,
                                        const Vocabulary& vocab, bool drop_oov,
                                        EncodeStats* stats) {
    std::vector<TrainExample> out;
    for (const auto& clip : clips) {
        for (const auto& caption : clip.captions) {
            TrainExample ex;
            ex.features = clip.features;
            ex.tokens = encode_caption(caption, vocab, drop_oov, stats);
            ex.clip_id = clip.clip_id;
            out.push_back(std::move(ex));
        }
    }
    return out;
}

}  // namespace lwf
