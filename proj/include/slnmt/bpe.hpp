#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace slnmt {

// Ordered byte-pair merges, learning order preserved. Serialized as one
// "left right" pair per line.
struct MergeTable {
    std::vector<std::pair<std::string, std::string>> merges;

    std::size_t size() const { return merges.size(); }
};

// Token <-> id bijection with the four reserved ids up front.
struct Vocabulary {
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;

    std::vector<std::string> id_to_token;
    std::unordered_map<std::string, int> token_to_id;

    int size() const { return static_cast<int>(id_to_token.size()); }
    // Unknown tokens map to kUnk.
    int id(const std::string& token) const;
    const std::string& token(int id) const;

    static Vocabulary from_tokens(const std::vector<std::string>& tokens);
};

std::vector<std::string> split_ws(const std::string& line);
std::string join_ws(const std::vector<std::string>& tokens);

// Greedy most-frequent-pair merges over whitespace-tokenized words carrying a
// trailing "</w>" symbol. Stops early once no pair occurs at least twice.
// Ties go to the lexicographically smaller (left, right) pair.
MergeTable learn_bpe(const std::vector<std::string>& corpus, int num_merges);

std::string apply_bpe(const std::string& sentence, const MergeTable& merges);
std::vector<std::string> apply_bpe_corpus(const std::vector<std::string>& corpus, const MergeTable& merges);

// Inverse of apply_bpe on "@@ " continuation output.
std::string debpe(const std::string& tokens);

// Frequency-then-lexicographic ranking over an already BPE-applied corpus,
// truncated so reserved tokens plus content fit in max_size.
Vocabulary build_vocab(const std::vector<std::string>& corpus, int max_size);

std::vector<int> encode_tokens(const Vocabulary& vocab, const std::vector<std::string>& tokens);
std::vector<std::string> decode_ids(const Vocabulary& vocab, const std::vector<int>& ids);

void save_merges(const std::string& path, const MergeTable& merges);
MergeTable load_merges(const std::string& path);
void save_vocab(const std::string& path, const Vocabulary& vocab);
Vocabulary load_vocab(const std::string& path);

}  // namespace slnmt
