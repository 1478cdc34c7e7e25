#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "spotlight/grid.hpp"
#include "spotlight/image.hpp"

namespace spotlight {

class ContentCache;

/// Finite, nonzero embedding. Construction throws DomainError otherwise.
class EmbeddingVector {
public:
    explicit EmbeddingVector(std::vector<double> values);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double norm() const noexcept { return norm_; }

    friend bool operator==(const EmbeddingVector& a, const EmbeddingVector& b) { return a.values_ == b.values_; }

private:
    std::vector<double> values_;
    double norm_ = 0.0;
};

enum class BackendKind { http, synthetic };

struct EmbeddingBackendDescriptor {
    std::string backend_id;  // participates in cache keys and index validation
    std::size_t dim = 0;
    BackendKind kind = BackendKind::synthetic;
};

/// Text/image encoder. Implementations must be safe to call from several threads at once.
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;

    virtual const EmbeddingBackendDescriptor& descriptor() const = 0;
    virtual std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) = 0;
    virtual std::vector<EmbeddingVector> embed_images(std::span<const PageImage> images) = 0;

    /// Largest batch a single request should carry.
    virtual std::size_t max_batch() const { return 16; }
};

/// Decorator that serves embeddings from a ContentCache ("embeddings" namespace) keyed by
/// backend id, pipeline version and content hash; misses are forwarded in one batch.
class CachedEmbeddingBackend final : public EmbeddingBackend {
public:
    CachedEmbeddingBackend(EmbeddingBackend& inner, ContentCache& cache) : inner_(inner), cache_(cache) {}

    const EmbeddingBackendDescriptor& descriptor() const override { return inner_.descriptor(); }
    std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) override;
    std::vector<EmbeddingVector> embed_images(std::span<const PageImage> images) override;
    std::size_t max_batch() const override { return inner_.max_batch(); }

    static std::string text_key(const EmbeddingBackendDescriptor& d, std::string_view text);
    static std::string image_key(const EmbeddingBackendDescriptor& d, const PageImage& image);

private:
    template <class T, class KeyFn, class EmbedFn>
    std::vector<EmbeddingVector> lookup(std::span<const T> items, KeyFn&& key, EmbedFn&& embed);

    EmbeddingBackend& inner_;
    ContentCache& cache_;
};

/// Builds a vector from backend output, turning any invariant violation (wrong dim,
/// non-finite entry, zero norm) into a ContractError.
EmbeddingVector checked_embedding(std::vector<double> values, std::size_t expected_dim,
                                  const std::string& backend_id);

EmbeddingVector embed_text(EmbeddingBackend& backend, const std::string& text);

/// Embeds images in order, batching by max_batch() with up to `max_in_flight` concurrent batches.
std::vector<EmbeddingVector> embed_patches(EmbeddingBackend& backend, std::span<const PageImage> images,
                                           std::size_t max_in_flight = 8);

/// u.v / (|u||v|), clamped to [-1, 1]. Throws DomainError on dim mismatch.
double cosine_sim(const EmbeddingVector& u, const EmbeddingVector& v);

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> scores);

struct SelectionResult {
    std::string page_id;
    int n = 1;
    int i_star = 1;
    int j_star = 1;
    std::vector<double> sims;  // row-major n x n
    double p = 1.0;            // softmax mass at the winner
    NormPoint center;

    double sim(int i, int j) const { return sims[static_cast<std::size_t>(i - 1) * n + (j - 1)]; }
};

/// Argmax (first maximum in row-major order) plus softmax confidence over the n^2 scores.
SelectionResult select_from_sims(std::span<const double> sims, const GridSpec& spec, std::string page_id = {});

/// Cosine sims of every patch vector against the query, then select_from_sims.
SelectionResult select_patch(const EmbeddingVector& query, std::span<const EmbeddingVector> patch_vecs,
                             const GridSpec& spec, std::string page_id = {});

}  // namespace spotlight
