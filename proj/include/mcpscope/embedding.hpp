#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcpscope/common/http.hpp"
#include "mcpscope/common/io.hpp"

namespace mcpscope {

using Vector = Eigen::VectorXd;

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    [[nodiscard]] virtual std::string id() const = 0;
    [[nodiscard]] virtual std::size_t dimension() const = 0;
    virtual std::vector<Vector> embed(const std::vector<std::string>& texts) = 0;
    /// Learns corpus statistics where the implementation has any (no-op by default).
    virtual void fit(const std::vector<std::string>& /*corpus*/) {}
    /// Serializable state needed to reproduce vectors in a later process.
    [[nodiscard]] virtual Json state() const { return Json::object(); }
    virtual void load_state(const Json& /*state*/) {}
};

/// Signed feature hashing of stemmed unigrams and bigrams with bucket-level IDF,
/// L2-normalized. Texts without tokens map to the zero vector.
class HashedTfidfEmbedder final : public EmbeddingProvider {
public:
    explicit HashedTfidfEmbedder(std::size_t dimension = 1024);
    [[nodiscard]] std::string id() const override;
    [[nodiscard]] std::size_t dimension() const override { return dim_; }
    std::vector<Vector> embed(const std::vector<std::string>& texts) override;
    void fit(const std::vector<std::string>& corpus) override;
    [[nodiscard]] Json state() const override;
    void load_state(const Json& state) override;

    /// Tokens fed to the hasher: lowercased words minus stopwords, lightly stemmed.
    static std::vector<std::string> tokens(std::string_view text);

private:
    [[nodiscard]] Vector embed_one(const std::string& text) const;
    std::size_t dim_;
    std::vector<double> idf_;  // empty = unit weights
};

/// Fixed text -> vector table; unknown texts throw ProviderUnavailable.
class PrecomputedEmbedder final : public EmbeddingProvider {
public:
    PrecomputedEmbedder(std::string id, std::map<std::string, Vector> table);
    [[nodiscard]] std::string id() const override { return id_; }
    [[nodiscard]] std::size_t dimension() const override { return dim_; }
    std::vector<Vector> embed(const std::vector<std::string>& texts) override;

private:
    std::string id_;
    std::map<std::string, Vector> table_;
    std::size_t dim_ = 0;
};

/// OpenAI-format /v1/embeddings endpoint.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(http::Client& client, std::string url, std::string model,
                          std::string api_key, std::size_t dimension);
    [[nodiscard]] std::string id() const override { return "http:" + model_; }
    [[nodiscard]] std::size_t dimension() const override { return dim_; }
    std::vector<Vector> embed(const std::vector<std::string>& texts) override;

private:
    http::Client& client_;
    std::string url_, model_, key_;
    std::size_t dim_;
};

/// Cosine similarity; zero if either vector is zero.
double cosine(const Vector& a, const Vector& b);

/// FNV-1a 64-bit.
std::uint64_t fnv1a(std::string_view s);

/// Binary matrix sidecar ("MCPV1", rows, cols, little-endian doubles).
void write_vectors(const fs::path& path, const std::vector<Vector>& rows);
std::vector<Vector> read_vectors(const fs::path& path);

}  // namespace mcpscope
