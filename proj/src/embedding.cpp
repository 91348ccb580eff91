#include "mcpscope/embedding.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "mcpscope/common/errors.hpp"
#include "mcpscope/common/text.hpp"

namespace mcpscope {

namespace {

const std::set<std::string>& stopwords() {
    static const std::set<std::string> words{
        "a",    "an",   "and",  "are",  "as",   "at",   "be",   "by",   "for",  "from",
        "has",  "have", "in",   "into", "is",   "it",   "its",  "of",   "on",   "or",
        "such", "that", "the",  "their", "them", "these", "this", "to",  "using", "via",
        "was",  "were", "which", "will", "with", "within", "other", "all", "any", "your",
    };
    return words;
}

std::string stem(std::string w) {
    auto strip = [&](std::string_view suf, std::size_t min_len, std::string_view repl = "") {
        if (w.size() >= min_len && w.ends_with(suf)) {
            w.resize(w.size() - suf.size());
            w += repl;
            return true;
        }
        return false;
    };
    if (strip("ations", 8) || strip("ation", 7) || strip("ments", 7) || strip("ment", 7) ||
        strip("ings", 6) || strip("ing", 6) || strip("ies", 5, "y") || strip("ed", 5) ||
        strip("es", 5) || (!w.ends_with("ss") && strip("s", 4))) {
        return w;
    }
    return w;
}

}  // namespace

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

double cosine(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine of vectors of unequal size");
    double na = a.norm(), nb = b.norm();
    if (na == 0 || nb == 0) return 0;
    return a.dot(b) / (na * nb);
}

HashedTfidfEmbedder::HashedTfidfEmbedder(std::size_t dimension) : dim_(dimension) {
    if (dim_ == 0) throw std::invalid_argument("embedding dimension must be positive");
}

std::string HashedTfidfEmbedder::id() const { return fmt::format("hashed-tfidf-{}", dim_); }

std::vector<std::string> HashedTfidfEmbedder::tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string prev;
    for (auto& w : text::words(text)) {
        if (stopwords().count(w) || w.size() < 2) {
            prev.clear();
            continue;
        }
        auto s = stem(w);
        out.push_back(s);
        if (!prev.empty()) out.push_back(prev + "_" + s);
        prev = s;
    }
    return out;
}

Vector HashedTfidfEmbedder::embed_one(const std::string& text) const {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(dim_));
    for (const auto& tok : tokens(text)) {
        auto h = fnv1a(tok);
        auto bucket = static_cast<Eigen::Index>(h % dim_);
        double sign = (h >> 63) ? -1.0 : 1.0;
        double weight = idf_.empty() ? 1.0 : idf_[bucket];
        // Bigrams count half so that shared unigrams dominate similarity.
        if (tok.find('_') != std::string::npos) weight *= 0.5;
        v(bucket) += sign * weight;
    }
    double n = v.norm();
    if (n > 0) v /= n;
    return v;
}

std::vector<Vector> HashedTfidfEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
}

void HashedTfidfEmbedder::fit(const std::vector<std::string>& corpus) {
    std::vector<double> df(dim_, 0.0);
    for (const auto& doc : corpus) {
        std::set<std::size_t> seen;
        for (const auto& tok : tokens(doc)) seen.insert(fnv1a(tok) % dim_);
        for (auto b : seen) df[b] += 1;
    }
    idf_.assign(dim_, 0.0);
    const double n = static_cast<double>(corpus.size());
    for (std::size_t b = 0; b < dim_; ++b) idf_[b] = std::log((n + 1.0) / (df[b] + 1.0)) + 1.0;
}

Json HashedTfidfEmbedder::state() const {
    return Json{{"dimension", dim_}, {"idf", idf_}};
}

void HashedTfidfEmbedder::load_state(const Json& state) {
    if (state.value("dimension", dim_) != dim_) {
        throw std::invalid_argument("embedder state has a different dimension");
    }
    idf_ = state.value("idf", std::vector<double>{});
    if (!idf_.empty() && idf_.size() != dim_) throw std::invalid_argument("bad idf table size");
}

PrecomputedEmbedder::PrecomputedEmbedder(std::string id, std::map<std::string, Vector> table)
    : id_(std::move(id)), table_(std::move(table)) {
    for (const auto& [k, v] : table_) {
        if (dim_ == 0) dim_ = static_cast<std::size_t>(v.size());
        if (static_cast<std::size_t>(v.size()) != dim_) {
            throw std::invalid_argument("precomputed vectors differ in dimension");
        }
    }
}

std::vector<Vector> PrecomputedEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<Vector> out;
    for (const auto& t : texts) {
        auto it = table_.find(t);
        if (it == table_.end()) throw ProviderUnavailable(fmt::format("no vector for '{}'", t));
        out.push_back(it->second);
    }
    return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(http::Client& client, std::string url,
                                             std::string model, std::string api_key,
                                             std::size_t dimension)
    : client_(client), url_(std::move(url)), model_(std::move(model)), key_(std::move(api_key)),
      dim_(dimension) {}

std::vector<Vector> HttpEmbeddingProvider::embed(const std::vector<std::string>& texts) {
    std::vector<Vector> out;
    constexpr std::size_t kBatch = 64;
    for (std::size_t start = 0; start < texts.size(); start += kBatch) {
        auto end = std::min(texts.size(), start + kBatch);
        Json body{{"model", model_},
                  {"input", std::vector<std::string>(texts.begin() + start, texts.begin() + end)}};
        auto resp = client_.post(url_, body.dump(),
                                 {{"Content-Type", "application/json"},
                                  {"Authorization", "Bearer " + key_}});
        if (resp.status == 401 || resp.status == 403) {
            throw ProviderAuthError(fmt::format("embedding endpoint rejected credentials ({})",
                                                resp.status));
        }
        if (!resp.ok()) {
            throw ProviderUnavailable(fmt::format("embedding endpoint status {}", resp.status));
        }
        Json doc = Json::parse(resp.body, nullptr, false);
        if (doc.is_discarded() || !doc.contains("data")) {
            throw ProviderUnavailable("embedding reply missing data");
        }
        for (const auto& item : doc["data"]) {
            auto vals = item.at("embedding").get<std::vector<double>>();
            if (vals.size() != dim_) {
                throw std::invalid_argument(fmt::format(
                    "embedding dimension mismatch: expected {}, got {}", dim_, vals.size()));
            }
            out.push_back(Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size())));
        }
    }
    return out;
}

void write_vectors(const fs::path& path, const std::vector<Vector>& rows) {
    std::uint64_t n = rows.size(), d = rows.empty() ? 0 : static_cast<std::uint64_t>(rows[0].size());
    std::string buf = "MCPV1";
    buf.append(reinterpret_cast<const char*>(&n), sizeof n);
    buf.append(reinterpret_cast<const char*>(&d), sizeof d);
    for (const auto& r : rows) {
        if (static_cast<std::uint64_t>(r.size()) != d) throw std::invalid_argument("ragged vectors");
        buf.append(reinterpret_cast<const char*>(r.data()), sizeof(double) * d);
    }
    write_file(path, buf);
}

std::vector<Vector> read_vectors(const fs::path& path) {
    std::string buf = read_file(path);
    constexpr std::size_t head = 5 + 2 * sizeof(std::uint64_t);
    if (buf.size() < head || buf.compare(0, 5, "MCPV1") != 0) {
        throw std::runtime_error(fmt::format("{} is not a vector file", path.string()));
    }
    std::uint64_t n = 0, d = 0;
    std::memcpy(&n, buf.data() + 5, sizeof n);
    std::memcpy(&d, buf.data() + 5 + sizeof n, sizeof d);
    if (buf.size() != head + n * d * sizeof(double)) {
        throw std::runtime_error(fmt::format("{} is truncated", path.string()));
    }
    std::vector<Vector> out(n, Vector(static_cast<Eigen::Index>(d)));
    for (std::uint64_t i = 0; i < n; ++i) {
        std::memcpy(out[i].data(), buf.data() + head + i * d * sizeof(double), d * sizeof(double));
    }
    return out;
}

}  // namespace mcpscope
