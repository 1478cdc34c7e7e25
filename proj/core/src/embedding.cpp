#include "spotlight/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <nlohmann/json.hpp>

#include "spotlight/cache.hpp"
#include "spotlight/error.hpp"
#include "spotlight/parallel.hpp"

namespace spotlight {

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw DomainError("embedding must have dim >= 1");
    double sq = 0.0;
    for (double v : values_) {
        if (!std::isfinite(v)) throw DomainError("embedding contains a non-finite entry");
        sq += v * v;
    }
    norm_ = std::sqrt(sq);
    if (!(norm_ > 0.0)) throw DomainError("embedding has zero norm");
}

EmbeddingVector checked_embedding(std::vector<double> values, std::size_t expected_dim,
                                  const std::string& backend_id) {
    if (values.size() != expected_dim) {
        throw ContractError("backend '" + backend_id + "' returned dim " + std::to_string(values.size()) +
                            ", expected " + std::to_string(expected_dim));
    }
    try {
        return EmbeddingVector(std::move(values));
    } catch (const DomainError& e) {
        throw ContractError("backend '" + backend_id + "': " + e.what());
    }
}

namespace {

void check_batch(const std::vector<EmbeddingVector>& out, std::size_t expected_count,
                 const EmbeddingBackendDescriptor& desc) {
    if (out.size() != expected_count) {
        throw ContractError("backend '" + desc.backend_id + "' returned " + std::to_string(out.size()) +
                            " embeddings for " + std::to_string(expected_count) + " inputs");
    }
    for (const auto& v : out) {
        if (v.dim() != desc.dim) {
            throw ContractError("backend '" + desc.backend_id + "' returned dim " + std::to_string(v.dim()) +
                                ", expected " + std::to_string(desc.dim));
        }
    }
}

}  // namespace

std::string CachedEmbeddingBackend::text_key(const EmbeddingBackendDescriptor& d, std::string_view text) {
    std::string material(kPipelineVersion);
    material.append("|").append(d.backend_id).append("|text|").append(sha256_hex(text));
    return sha256_hex(material);
}

std::string CachedEmbeddingBackend::image_key(const EmbeddingBackendDescriptor& d, const PageImage& image) {
    std::string material(kPipelineVersion);
    material.append("|").append(d.backend_id).append("|image|");
    material.append(std::to_string(image.width())).append("x").append(std::to_string(image.height())).append("|");
    material.append(sha256_hex(image.pixels()));
    return sha256_hex(material);
}

template <class T, class KeyFn, class EmbedFn>
std::vector<EmbeddingVector> CachedEmbeddingBackend::lookup(std::span<const T> items, KeyFn&& key, EmbedFn&& embed) {
    const auto& desc = descriptor();
    std::vector<std::optional<EmbeddingVector>> slots(items.size());
    std::vector<std::string> keys(items.size());
    std::vector<T> missing;
    std::vector<std::size_t> missing_at;
    for (std::size_t k = 0; k < items.size(); ++k) {
        keys[k] = key(desc, items[k]);
        if (auto hit = cache_.get("embeddings", keys[k])) {
            try {
                slots[k] = checked_embedding(hit->at("values").template get<std::vector<double>>(), desc.dim,
                                             desc.backend_id);
                continue;
            } catch (const std::exception&) {
                // corrupt entry: recompute below
            }
        }
        missing.push_back(items[k]);
        missing_at.push_back(k);
    }
    if (!missing.empty()) {
        auto fresh = embed(std::span<const T>(missing));
        check_batch(fresh, missing.size(), desc);
        for (std::size_t m = 0; m < fresh.size(); ++m) {
            const std::size_t k = missing_at[m];
            const auto vals = fresh[m].values();
            cache_.put("embeddings", keys[k], nlohmann::json{{"values", std::vector<double>(vals.begin(), vals.end())}});
            slots[k] = std::move(fresh[m]);
        }
    }
    std::vector<EmbeddingVector> out;
    out.reserve(items.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

std::vector<EmbeddingVector> CachedEmbeddingBackend::embed_texts(std::span<const std::string> texts) {
    return lookup(texts, [](const auto& d, const std::string& t) { return text_key(d, t); },
                  [&](std::span<const std::string> m) { return inner_.embed_texts(m); });
}

std::vector<EmbeddingVector> CachedEmbeddingBackend::embed_images(std::span<const PageImage> images) {
    return lookup(images, [](const auto& d, const PageImage& img) { return image_key(d, img); },
                  [&](std::span<const PageImage> m) { return inner_.embed_images(m); });
}

EmbeddingVector embed_text(EmbeddingBackend& backend, const std::string& text) {
    if (text.empty()) throw DomainError("cannot embed empty text");
    const std::string texts[1] = {text};
    auto out = backend.embed_texts(texts);
    check_batch(out, 1, backend.descriptor());
    return std::move(out.front());
}

std::vector<EmbeddingVector> embed_patches(EmbeddingBackend& backend, std::span<const PageImage> images,
                                           std::size_t max_in_flight) {
    if (images.empty()) return {};
    const std::size_t batch = std::max<std::size_t>(1, backend.max_batch());
    const std::size_t batches = (images.size() + batch - 1) / batch;
    std::vector<std::vector<EmbeddingVector>> parts(batches);
    parallel_for(batches, max_in_flight, [&](std::size_t b) {
        const std::size_t begin = b * batch;
        const std::size_t len = std::min(batch, images.size() - begin);
        auto out = backend.embed_images(images.subspan(begin, len));
        check_batch(out, len, backend.descriptor());
        parts[b] = std::move(out);
    });
    std::vector<EmbeddingVector> result;
    result.reserve(images.size());
    for (auto& part : parts)
        for (auto& v : part) result.push_back(std::move(v));
    return result;
}

double cosine_sim(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dim() != v.dim()) {
        throw DomainError("cosine_sim dim mismatch: " + std::to_string(u.dim()) + " vs " + std::to_string(v.dim()));
    }
    const auto a = u.values();
    const auto b = v.values();
    double dot = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
    return std::clamp(dot / (u.norm() * v.norm()), -1.0, 1.0);
}

std::vector<double> softmax(std::span<const double> scores) {
    if (scores.empty()) throw DomainError("softmax over empty scores");
    const double mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double total = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        out[k] = std::exp(scores[k] - mx);
        total += out[k];
    }
    for (double& v : out) v /= total;
    return out;
}

SelectionResult select_from_sims(std::span<const double> sims, const GridSpec& spec, std::string page_id) {
    const auto expected = static_cast<std::size_t>(spec.cells());
    if (sims.size() != expected) {
        throw DomainError("expected " + std::to_string(expected) + " patch scores, got " +
                          std::to_string(sims.size()));
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < sims.size(); ++k) {
        if (sims[k] > sims[best]) best = k;
    }
    const double mx = sims[best];
    double total = 0.0;
    for (double s : sims) total += std::exp(s - mx);

    SelectionResult r;
    r.page_id = std::move(page_id);
    r.n = spec.n();
    r.i_star = static_cast<int>(best / spec.n()) + 1;
    r.j_star = static_cast<int>(best % spec.n()) + 1;
    r.sims.assign(sims.begin(), sims.end());
    r.p = 1.0 / total;
    r.center = patch_center(r.i_star, r.j_star, spec);
    return r;
}

SelectionResult select_patch(const EmbeddingVector& query, std::span<const EmbeddingVector> patch_vecs,
                             const GridSpec& spec, std::string page_id) {
    if (patch_vecs.size() != static_cast<std::size_t>(spec.cells())) {
        throw DomainError("expected " + std::to_string(spec.cells()) + " patch embeddings, got " +
                          std::to_string(patch_vecs.size()));
    }
    std::vector<double> sims;
    sims.reserve(patch_vecs.size());
    for (const auto& v : patch_vecs) sims.push_back(cosine_sim(v, query));
    return select_from_sims(sims, spec, std::move(page_id));
}

}  // namespace spotlight
