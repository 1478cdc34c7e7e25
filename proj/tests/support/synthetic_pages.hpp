#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spotlight/grid.hpp"
#include "spotlight/image.hpp"

namespace spotlight::fixtures {

/// One page with a single planted palette glyph. `cell` is the grid cell that holds it.
struct NeedleCase {
    PageImage page;
    int i = 1;
    int j = 1;
    PatchRect cell;
    std::string keyword;
    std::string question;
    std::string answer;
};

/// Tinted background (blue channel below 180), grey text-like strokes, and one glyph of a palette
/// colour covering ~85% of a random cell. Violet is skipped: its blue channel is already 255,
/// so a blue highlight cannot raise it.
NeedleCase make_needle_case(std::uint64_t seed, int size = 240, int n = 6);

/// Background plus noise strokes, no glyph.
PageImage make_noise_page(std::uint64_t seed, int width, int height);

/// Page for the retrieval suite: glyphs of colours a (30% of the page) and b (15%).
struct CorpusPage {
    PageImage page;
    std::string query;  // "a a b": twice the first keyword, once the second
};

/// `count` pages with pairwise-distinct ordered colour pairs (count <= 56).
std::vector<CorpusPage> make_retrieval_corpus(std::size_t count, std::uint64_t seed, int size = 120);

/// Writes pages, dataset.json, the uplift oracle spec (oracle.json) and config.json into `dir`.
/// Returns the dataset path.
std::filesystem::path write_needle_fixture(const std::filesystem::path& dir, const std::vector<NeedleCase>& cases,
                                           const std::string& domain = "synthetic");

/// Fresh directory under the system temp dir; removed by the destructor.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

void write_json(const std::filesystem::path& file, const nlohmann::json& j);
std::string read_text(const std::filesystem::path& file);

}  // namespace spotlight::fixtures
