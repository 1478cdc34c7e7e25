#include "spotlight/image.hpp"

#include <png.h>

#include <atomic>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <jpeglib.h>

#include "spotlight/error.hpp"

namespace spotlight {

PageImage::PageImage(std::string id, int width, int height, std::vector<std::uint8_t> pixels)
    : id_(std::move(id)), width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1) {
        throw DomainError("page dimensions must be at least 1x1, got " + std::to_string(width) + "x" +
                          std::to_string(height));
    }
    const auto expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
    if (pixels_.size() != expected) {
        throw DomainError("pixel buffer length " + std::to_string(pixels_.size()) + " != W*H*3 = " +
                          std::to_string(expected));
    }
}

PageImage PageImage::filled(std::string id, int width, int height, Rgb8 color) {
    ImageBuffer buf(width, height, color);
    return std::move(buf).freeze(std::move(id));
}

PageImage PageImage::crop(int x0, int y0, int x1, int y1, std::string id) const {
    if (x0 < 0 || y0 < 0 || x1 > width_ || y1 > height_ || x1 <= x0 || y1 <= y0) {
        throw DomainError("crop rect out of bounds");
    }
    const int w = x1 - x0;
    const int h = y1 - y0;
    std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
        std::memcpy(out.data() + static_cast<std::size_t>(y) * w * 3, pixels_.data() + offset(x0, y0 + y),
                    static_cast<std::size_t>(w) * 3);
    }
    return PageImage(std::move(id), w, h, std::move(out));
}

PageImage PageImage::with_id(std::string id) const {
    PageImage copy = *this;
    copy.id_ = std::move(id);
    return copy;
}

ImageBuffer::ImageBuffer(int width, int height, Rgb8 fill) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw DomainError("image buffer dimensions must be at least 1x1");
    data_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t o = 0; o < data_.size(); o += 3) {
        data_[o] = fill.r;
        data_[o + 1] = fill.g;
        data_[o + 2] = fill.b;
    }
}

ImageBuffer::ImageBuffer(const PageImage& src)
    : width_(src.width()), height_(src.height()), data_(src.pixels().begin(), src.pixels().end()) {}

void ImageBuffer::fill_rect(int x0, int y0, int x1, int y1, Rgb8 c) noexcept {
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, width_);
    y1 = std::min(y1, height_);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) set(x, y, c);
}

PageImage ImageBuffer::freeze(std::string id) && {
    return PageImage(std::move(id), width_, height_, std::move(data_));
}

ImageFormat sniff_format(std::span<const std::uint8_t> bytes) noexcept {
    static constexpr std::uint8_t kPng[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPng, 8) == 0) return ImageFormat::png;
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return ImageFormat::jpeg;
    return ImageFormat::unknown;
}

namespace {

PageImage decode_png(std::span<const std::uint8_t> bytes, std::string id) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw InputError("invalid PNG '" + id + "': " + img.message);
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(img));
    png_color white{255, 255, 255};
    if (!png_image_finish_read(&img, &white, pixels.data(), 0, nullptr)) {
        std::string msg = img.message;
        png_image_free(&img);
        throw InputError("failed to decode PNG '" + id + "': " + msg);
    }
    const int w = static_cast<int>(img.width);
    const int h = static_cast<int>(img.height);
    png_image_free(&img);
    return PageImage(std::move(id), w, h, std::move(pixels));
}

struct JpegErrorMgr {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

PageImage decode_jpeg(std::span<const std::uint8_t> bytes, std::string id) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    std::vector<std::uint8_t> pixels;
    int w = 0;
    int h = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw InputError("failed to decode JPEG '" + id + "': " + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    w = static_cast<int>(cinfo.output_width);
    h = static_cast<int>(cinfo.output_height);
    pixels.resize(static_cast<std::size_t>(w) * h * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return PageImage(std::move(id), w, h, std::move(pixels));
}

}  // namespace

PageImage decode_image(std::span<const std::uint8_t> bytes, std::string id) {
    switch (sniff_format(bytes)) {
        case ImageFormat::png:
            return decode_png(bytes, std::move(id));
        case ImageFormat::jpeg:
            return decode_jpeg(bytes, std::move(id));
        case ImageFormat::unknown:
            break;
    }
    throw InputError("'" + id + "' is neither PNG nor JPEG");
}

PageImage load_image(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return decode_image(bytes, path.string());
}

std::vector<std::uint8_t> encode_png(const PageImage& image) {
    if (image.empty()) throw DomainError("cannot encode an empty image");
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width());
    img.height = static_cast<png_uint_32>(image.height());
    img.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(img, size, 0, image.pixels().data(), 0, nullptr)) {
        throw Error(std::string("PNG size query failed: ") + img.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels().data(), 0, nullptr)) {
        throw Error(std::string("PNG encode failed: ") + img.message);
    }
    out.resize(size);
    return out;
}

void save_png(const PageImage& image, const std::filesystem::path& path) {
    write_file_atomic(path, encode_png(image));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read file: " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    static std::atomic<unsigned long long> counter{0};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ostringstream suffix;
    suffix << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "." << counter++;
    const std::filesystem::path tmp = path.string() + suffix.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write file: " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw InputError("short write: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                          text.size()));
}

}  // namespace spotlight
