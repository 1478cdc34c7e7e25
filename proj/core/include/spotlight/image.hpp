#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace spotlight {

struct Rgb8 {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

/// Decoded raster page: row-major RGB8, immutable after construction.
class PageImage {
public:
    PageImage() = default;

    /// Throws DomainError unless width, height >= 1 and pixels.size() == width*height*3.
    PageImage(std::string id, int width, int height, std::vector<std::uint8_t> pixels);

    /// Solid-color page.
    static PageImage filled(std::string id, int width, int height, Rgb8 color);

    const std::string& id() const noexcept { return id_; }
    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
    bool empty() const noexcept { return pixels_.empty(); }

    Rgb8 at(int x, int y) const noexcept {
        const std::size_t o = offset(x, y);
        return {pixels_[o], pixels_[o + 1], pixels_[o + 2]};
    }

    /// Sub-image covering the half-open rect [x0,x1) x [y0,y1).
    PageImage crop(int x0, int y0, int x1, int y1, std::string id = {}) const;

    /// Copy with a new id (pixels shared by value).
    PageImage with_id(std::string id) const;

    friend bool operator==(const PageImage& a, const PageImage& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.pixels_ == b.pixels_;
    }

private:
    std::size_t offset(int x, int y) const noexcept {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
    }

    std::string id_;
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// Mutable RGB8 buffer used while rendering; freeze() turns it into a PageImage.
class ImageBuffer {
public:
    ImageBuffer(int width, int height, Rgb8 fill = {});
    explicit ImageBuffer(const PageImage& src);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

    void set(int x, int y, Rgb8 c) noexcept {
        const std::size_t o = (static_cast<std::size_t>(y) * width_ + x) * 3;
        data_[o] = c.r;
        data_[o + 1] = c.g;
        data_[o + 2] = c.b;
    }
    Rgb8 get(int x, int y) const noexcept {
        const std::size_t o = (static_cast<std::size_t>(y) * width_ + x) * 3;
        return {data_[o], data_[o + 1], data_[o + 2]};
    }
    void fill_rect(int x0, int y0, int x1, int y1, Rgb8 c) noexcept;

    std::span<std::uint8_t> row(int y) noexcept {
        return {data_.data() + static_cast<std::size_t>(y) * width_ * 3, static_cast<std::size_t>(width_) * 3};
    }

    PageImage freeze(std::string id) &&;

private:
    int width_;
    int height_;
    std::vector<std::uint8_t> data_;
};

enum class ImageFormat { png, jpeg, unknown };

ImageFormat sniff_format(std::span<const std::uint8_t> bytes) noexcept;

/// Decode PNG or JPEG bytes to RGB8. Alpha is composited over white. Throws InputError.
PageImage decode_image(std::span<const std::uint8_t> bytes, std::string id);

/// Load a PNG/JPEG page. The page id is the path string as given.
PageImage load_image(const std::filesystem::path& path);

/// Deterministic PNG encoding (fixed zlib level, no timestamps).
std::vector<std::uint8_t> encode_png(const PageImage& image);

void save_png(const PageImage& image, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Write via a temp file and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace spotlight
