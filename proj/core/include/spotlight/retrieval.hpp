#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spotlight/embedding.hpp"

namespace spotlight {

struct IndexEntry {
    std::string page_id;
    std::filesystem::path path;  // where the page image lives (may be empty for in-memory pages)
    EmbeddingVector vector;
};

/// Exact-scan page index. Immutable after build; safe for concurrent queries.
class CorpusIndex {
public:
    /// Throws ValidationError on duplicate page ids or mixed dims.
    CorpusIndex(std::string backend_id, std::size_t dim, std::vector<IndexEntry> entries, std::string built_at);

    const std::string& backend_id() const noexcept { return backend_id_; }
    std::size_t dim() const noexcept { return dim_; }
    const std::string& built_at() const noexcept { return built_at_; }
    const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

    const IndexEntry* find(const std::string& page_id) const;

    /// Throws ValidationError when the index was built with a different backend.
    void require_backend(const EmbeddingBackendDescriptor& backend) const;

    /// JSON: {"format":"spotlight-index","version":1,"backend_id","dim","built_at",
    ///        "entries":[{"page_id","path","vector":[...]}]}. Paths are stored relative to
    /// the index file's directory when possible.
    void save(const std::filesystem::path& file) const;
    static CorpusIndex load(const std::filesystem::path& file);

private:
    std::string backend_id_;
    std::size_t dim_;
    std::vector<IndexEntry> entries_;
    std::string built_at_;
};

struct PageSource {
    std::string page_id;
    std::filesystem::path path;
};

/// One whole-page embedding per page, all-or-nothing. Pages are loaded from disk.
/// `built_at` defaults to the newest input mtime (ISO-8601 UTC) so rebuilds are reproducible.
CorpusIndex index_corpus(std::span<const PageSource> pages, EmbeddingBackend& backend, std::size_t max_in_flight = 8);

/// In-memory variant; page ids come from PageImage::id().
CorpusIndex index_pages(std::span<const PageImage> pages, EmbeddingBackend& backend, std::string built_at = {},
                        std::size_t max_in_flight = 8);

struct RankedPage {
    std::string page_id;
    double score = 0.0;
};

struct RetrievalResult {
    std::vector<RankedPage> ranked;  // scores non-increasing; ties by page_id
};

/// Top-k by cosine similarity over every entry. k larger than the corpus returns the full ranking.
RetrievalResult retrieve_topk(const EmbeddingVector& query, const CorpusIndex& index, std::size_t k);

/// relevant + m pages drawn from `pool`, shuffled by Fisher-Yates driven by std::mt19937_64(seed).
/// m == 0 returns `relevant` unchanged. Throws DomainError if m > |pool| or pool overlaps relevant.
std::vector<std::string> inject_distractors(std::span<const std::string> relevant, std::span<const std::string> pool,
                                            std::size_t m, std::uint64_t seed);

/// FNV-1a 64-bit; used to derive per-question seeds.
std::uint64_t fnv1a64(std::string_view s) noexcept;

}  // namespace spotlight
