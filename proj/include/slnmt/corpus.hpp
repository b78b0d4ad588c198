#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace slnmt {

struct SentencePair {
    std::string source;
    std::string target;
};

// One sentence per line, UTF-8, no BOM. Errors carry the offending line
// number or the mismatched counts.
std::vector<std::string> load_lines(const std::string& path);
void save_lines(const std::string& path, const std::vector<std::string>& lines);
std::vector<SentencePair> load_parallel(const std::string& source_path, const std::string& target_path);

struct CorpusStats {
    std::size_t sentences = 0;
    std::size_t tokens = 0;
    std::size_t unique_tokens = 0;
};

CorpusStats corpus_stats(const std::vector<std::string>& lines);

// FNV-1a over bytes; used for dataset provenance in run manifests.
std::uint64_t fnv1a(std::string_view data);
std::uint64_t hash_lines(const std::vector<std::string>& lines);
std::string hash_hex(std::uint64_t h);

// Plain-text key=value configuration. Blank lines and '#' comments ignored.
std::map<std::string, std::string> load_kv_file(const std::string& path);
std::map<std::string, std::string> parse_kv(const std::string& text);

}  // namespace slnmt
