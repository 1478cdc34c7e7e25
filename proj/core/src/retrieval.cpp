#include "spotlight/retrieval.hpp"

#include <algorithm>
#include <limits>
#include <ctime>
#include <fstream>
#include <random>
#include <set>
#include <unordered_set>

#include <sys/stat.h>

#include <nlohmann/json.hpp>

#include "spotlight/error.hpp"
#include "spotlight/image.hpp"

namespace spotlight {

using nlohmann::json;

CorpusIndex::CorpusIndex(std::string backend_id, std::size_t dim, std::vector<IndexEntry> entries, std::string built_at)
    : backend_id_(std::move(backend_id)), dim_(dim), entries_(std::move(entries)), built_at_(std::move(built_at)) {
    std::unordered_set<std::string> seen;
    std::string problems;
    for (const auto& e : entries_) {
        if (!seen.insert(e.page_id).second) problems += "duplicate page_id '" + e.page_id + "'\n";
        if (e.vector.dim() != dim_) {
            problems += "page '" + e.page_id + "' has dim " + std::to_string(e.vector.dim()) + ", index dim " +
                        std::to_string(dim_) + "\n";
        }
    }
    if (!problems.empty()) throw ValidationError("invalid corpus index:\n" + problems);
}

const IndexEntry* CorpusIndex::find(const std::string& page_id) const {
    for (const auto& e : entries_)
        if (e.page_id == page_id) return &e;
    return nullptr;
}

void CorpusIndex::require_backend(const EmbeddingBackendDescriptor& backend) const {
    if (backend.backend_id != backend_id_ || backend.dim != dim_) {
        throw ValidationError("index built with backend '" + backend_id_ + "' (dim " + std::to_string(dim_) +
                              ") cannot be queried with '" + backend.backend_id + "' (dim " +
                              std::to_string(backend.dim) + ")");
    }
}

void CorpusIndex::save(const std::filesystem::path& file) const {
    const auto base = file.has_parent_path() ? std::filesystem::absolute(file.parent_path())
                                             : std::filesystem::current_path();
    json entries = json::array();
    for (const auto& e : entries_) {
        std::string path;
        if (!e.path.empty()) {
            const auto rel = std::filesystem::absolute(e.path).lexically_normal().lexically_relative(base);
            path = rel.empty() ? e.path.string() : rel.generic_string();
        }
        const auto v = e.vector.values();
        entries.push_back({{"page_id", e.page_id}, {"path", path}, {"vector", std::vector<double>(v.begin(), v.end())}});
    }
    json doc{{"format", "spotlight-index"}, {"version", 1},      {"backend_id", backend_id_},
             {"dim", dim_},                 {"built_at", built_at_}, {"entries", std::move(entries)}};
    write_file_atomic(file, doc.dump(2) + "\n");
}

CorpusIndex CorpusIndex::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw InputError("cannot read index file: " + file.string());
    const auto doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || doc.value("format", "") != "spotlight-index") {
        throw ValidationError("not a spotlight index file: " + file.string());
    }
    const auto base = file.has_parent_path() ? file.parent_path() : std::filesystem::path(".");
    const auto dim = doc.at("dim").get<std::size_t>();
    std::vector<IndexEntry> entries;
    for (const auto& e : doc.at("entries")) {
        std::filesystem::path path = e.value("path", "");
        if (!path.empty() && path.is_relative()) path = base / path;
        try {
            entries.push_back({e.at("page_id").get<std::string>(), path,
                               EmbeddingVector(e.at("vector").get<std::vector<double>>())});
        } catch (const DomainError& err) {
            throw ValidationError("index entry '" + e.value("page_id", "?") + "': " + err.what());
        }
    }
    return CorpusIndex(doc.at("backend_id").get<std::string>(), dim, std::move(entries), doc.value("built_at", ""));
}

namespace {

std::string iso8601_utc(std::time_t t) {
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::time_t mtime_of(const std::filesystem::path& p) {
    struct stat st {};
    if (::stat(p.c_str(), &st) != 0) throw InputError("cannot stat page: " + p.string());
    return st.st_mtime;
}

}  // namespace

CorpusIndex index_pages(std::span<const PageImage> pages, EmbeddingBackend& backend, std::string built_at,
                        std::size_t max_in_flight) {
    if (pages.empty()) throw DomainError("cannot index an empty corpus");
    const auto vecs = embed_patches(backend, pages, max_in_flight);
    std::vector<IndexEntry> entries;
    entries.reserve(pages.size());
    for (std::size_t k = 0; k < pages.size(); ++k) entries.push_back({pages[k].id(), {}, vecs[k]});
    const auto& d = backend.descriptor();
    return CorpusIndex(d.backend_id, d.dim, std::move(entries), std::move(built_at));
}

CorpusIndex index_corpus(std::span<const PageSource> pages, EmbeddingBackend& backend, std::size_t max_in_flight) {
    if (pages.empty()) throw DomainError("cannot index an empty corpus");
    std::vector<PageImage> images;
    images.reserve(pages.size());
    std::time_t newest = 0;
    for (const auto& p : pages) {
        images.push_back(load_image(p.path).with_id(p.page_id));
        newest = std::max(newest, mtime_of(p.path));
    }
    // Embedding failures propagate before any entry is kept.
    CorpusIndex built = index_pages(images, backend, iso8601_utc(newest), max_in_flight);
    std::vector<IndexEntry> entries = built.entries();
    for (std::size_t k = 0; k < entries.size(); ++k) entries[k].path = pages[k].path;
    return CorpusIndex(built.backend_id(), built.dim(), std::move(entries), built.built_at());
}

RetrievalResult retrieve_topk(const EmbeddingVector& query, const CorpusIndex& index, std::size_t k) {
    if (k < 1) throw DomainError("k must be at least 1");
    if (index.size() == 0) throw DomainError("cannot retrieve from an empty index");
    RetrievalResult r;
    r.ranked.reserve(index.size());
    for (const auto& e : index.entries()) r.ranked.push_back({e.page_id, cosine_sim(query, e.vector)});
    std::sort(r.ranked.begin(), r.ranked.end(), [](const RankedPage& a, const RankedPage& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.page_id < b.page_id;
    });
    if (r.ranked.size() > k) r.ranked.resize(k);
    return r;
}

namespace {

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    // Rejection sampling over the largest multiple of `bound` that fits in 64 bits.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    for (;;) {
        const std::uint64_t x = rng();
        if (x < limit) return x % bound;
    }
}

template <class T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(bounded(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace

std::vector<std::string> inject_distractors(std::span<const std::string> relevant, std::span<const std::string> pool,
                                            std::size_t m, std::uint64_t seed) {
    const std::set<std::string> rel(relevant.begin(), relevant.end());
    if (rel.size() != relevant.size()) throw DomainError("relevant pages contain duplicates");
    std::set<std::string> pool_set;
    for (const auto& p : pool) {
        if (rel.count(p)) throw DomainError("distractor pool overlaps relevant page '" + p + "'");
        if (!pool_set.insert(p).second) throw DomainError("distractor pool contains duplicate '" + p + "'");
    }
    if (m > pool.size()) {
        throw DomainError("requested " + std::to_string(m) + " distractors from a pool of " + std::to_string(pool.size()));
    }
    std::vector<std::string> out(relevant.begin(), relevant.end());
    if (m == 0) return out;

    std::mt19937_64 rng(seed);
    std::vector<std::string> candidates(pool.begin(), pool.end());
    // Partial Fisher-Yates: the first m slots become a uniform sample without replacement.
    for (std::size_t i = 0; i < m; ++i) {
        const auto j = i + static_cast<std::size_t>(bounded(rng, candidates.size() - i));
        std::swap(candidates[i], candidates[j]);
    }
    out.insert(out.end(), candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(m));
    fisher_yates(out, rng);
    return out;
}

std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace spotlight
