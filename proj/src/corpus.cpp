#include "slnmt/corpus.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "slnmt/bpe.hpp"

namespace slnmt {

namespace {

bool valid_utf8(const std::string& s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char c = static_cast<unsigned char>(s[i]);
        int len;
        if (c < 0x80u) len = 1;
        else if ((c & 0xE0u) == 0xC0u) len = 2;
        else if ((c & 0xF0u) == 0xE0u) len = 3;
        else if ((c & 0xF8u) == 0xF0u) len = 4;
        else return false;
        if (i + static_cast<std::size_t>(len) > s.size()) return false;
        for (int k = 1; k < len; ++k) {
            if ((static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]) & 0xC0u) != 0x80u) return false;
        }
        i += static_cast<std::size_t>(len);
    }
    return true;
}

}  // namespace

std::vector<std::string> load_lines(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::vector<std::string> lines;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        lineno += 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
            throw std::runtime_error(path + ": byte-order mark not allowed");
        }
        if (!valid_utf8(line)) {
            throw std::runtime_error(path + ": invalid UTF-8 at line " + std::to_string(lineno));
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

void save_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    for (const std::string& line : lines) os << line << '\n';
    if (!os) throw std::runtime_error("write failed for " + path);
}

std::vector<SentencePair> load_parallel(const std::string& source_path, const std::string& target_path) {
    std::vector<std::string> src = load_lines(source_path);
    std::vector<std::string> tgt = load_lines(target_path);
    if (src.size() != tgt.size()) {
        throw std::runtime_error("parallel corpus mismatch: " + source_path + " has " +
                                 std::to_string(src.size()) + " lines, " + target_path + " has " +
                                 std::to_string(tgt.size()));
    }
    std::vector<SentencePair> pairs;
    pairs.reserve(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) pairs.push_back({std::move(src[i]), std::move(tgt[i])});
    return pairs;
}

CorpusStats corpus_stats(const std::vector<std::string>& lines) {
    CorpusStats st;
    st.sentences = lines.size();
    std::unordered_set<std::string> uniq;
    for (const std::string& line : lines) {
        for (std::string& tok : split_ws(line)) {
            st.tokens += 1;
            uniq.insert(std::move(tok));
        }
    }
    st.unique_tokens = uniq.size();
    return st;
}

std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : data) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t hash_lines(const std::vector<std::string>& lines) {
    std::uint64_t h = 1469598103934665603ull;
    for (const std::string& line : lines) {
        for (char c : line) {
            h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
            h *= 1099511628211ull;
        }
        h ^= static_cast<std::uint64_t>('\n');
        h *= 1099511628211ull;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xFu];
        h >>= 4;
    }
    return out;
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        lineno += 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        auto eq = line.find('=', start);
        if (eq == std::string::npos) {
            throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key=value, got '" +
                                     line + "'");
        }
        std::string key = line.substr(start, eq - start);
        std::string value = line.substr(eq + 1);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        std::size_t vstart = value.find_first_not_of(" \t");
        value = vstart == std::string::npos ? "" : value.substr(vstart);
        while (!value.empty() && (value.back() == ' ' || value.back() == '\t')) value.pop_back();
        kv[key] = value;
    }
    return kv;
}

std::map<std::string, std::string> load_kv_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_kv(buf.str());
}

}  // namespace slnmt
