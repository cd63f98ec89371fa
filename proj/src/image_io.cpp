#include "crfsim/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

namespace crfsim {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr openFile(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError(std::string("cannot open ") + path.string());
    return f;
}

/// Decoded 8- or 16-bit samples, `channels` per pixel.
struct RawImage {
    Eigen::Index height = 0, width = 0;
    int channels = 0;
    int bitDepth = 8;
    std::vector<std::uint16_t> samples;

    double maxValue() const { return bitDepth == 16 ? 65535.0 : 255.0; }
    double at(Eigen::Index r, Eigen::Index c, int ch) const {
        return samples[static_cast<std::size_t>((r * width + c) * channels + ch)] / maxValue();
    }
};

RawImage readPng(const std::filesystem::path& path) {
    auto file = openFile(path, "rb");
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw IoError(path.string() + " is not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng initialization failed");
    }
    RawImage img;
    std::vector<png_bytep> rows;
    std::vector<png_byte> buffer;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("corrupt PNG " + path.string());
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int colorType = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (colorType == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (colorType == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (colorType & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);
    png_read_update_info(png, info);
    img.height = png_get_image_height(png, info);
    img.width = png_get_image_width(png, info);
    img.channels = png_get_channels(png, info);
    img.bitDepth = png_get_bit_depth(png, info);
    const std::size_t rowBytes = png_get_rowbytes(png, info);
    buffer.resize(rowBytes * static_cast<std::size_t>(img.height));
    rows.resize(static_cast<std::size_t>(img.height));
    for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = buffer.data() + r * rowBytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const std::size_t count = static_cast<std::size_t>(img.height * img.width * img.channels);
    img.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        img.samples[i] = img.bitDepth == 16
                             ? static_cast<std::uint16_t>(buffer[2 * i] | (buffer[2 * i + 1] << 8))
                             : buffer[i];
    }
    return img;
}

/// `samples` row-major, interleaved, host order for 16-bit.
void writePng(const std::filesystem::path& path, Eigen::Index height, Eigen::Index width, int colorType,
              int bitDepth, const std::vector<std::uint16_t>& samples) {
    auto file = openFile(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng initialization failed");
    }
    const int channels = colorType == PNG_COLOR_TYPE_RGB ? 3 : 1;
    const std::size_t bytesPer = bitDepth == 16 ? 2 : 1;
    const std::size_t rowBytes = static_cast<std::size_t>(width * channels) * bytesPer;
    std::vector<png_byte> buffer(rowBytes * static_cast<std::size_t>(height));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (bitDepth == 16) {
            buffer[2 * i] = static_cast<png_byte>(samples[i] >> 8);
            buffer[2 * i + 1] = static_cast<png_byte>(samples[i] & 0xFF);
        } else {
            buffer[i] = static_cast<png_byte>(samples[i]);
        }
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = buffer.data() + r * rowBytes;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bitDepth,
                 colorType, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(file.get()) != 0) throw IoError("failed writing " + path.string());
}

void requireGray(const RawImage& img, const std::filesystem::path& path) {
    if (img.channels != 1) {
        throw IoError(path.string() + " has " + std::to_string(img.channels) +
                      " channels; expected a grayscale PNG");
    }
}

std::uint16_t quantize(double v, double maxValue) {
    return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * maxValue));
}

}  // namespace

void writeMaskPng(const std::filesystem::path& path, const Labeling& mask) {
    std::vector<std::uint16_t> s(static_cast<std::size_t>(mask.size()));
    for (Eigen::Index i = 0; i < mask.size(); ++i) s[static_cast<std::size_t>(i)] = mask(i) ? 255 : 0;
    writePng(path, mask.rows(), mask.cols(), PNG_COLOR_TYPE_GRAY, 8, s);
}

Labeling readMaskPng(const std::filesystem::path& path) {
    const auto img = readPng(path);
    requireGray(img, path);
    Labeling out(img.height, img.width);
    for (Eigen::Index r = 0; r < img.height; ++r)
        for (Eigen::Index c = 0; c < img.width; ++c) out(r, c) = img.at(r, c, 0) >= 0.5 ? 1 : 0;
    return out;
}

void writeProbabilityPng(const std::filesystem::path& path, const GridD& prob) {
    std::vector<std::uint16_t> s(static_cast<std::size_t>(prob.size()));
    for (Eigen::Index i = 0; i < prob.size(); ++i) s[static_cast<std::size_t>(i)] = quantize(prob(i), 65535.0);
    writePng(path, prob.rows(), prob.cols(), PNG_COLOR_TYPE_GRAY, 16, s);
}

GridD readProbabilityPng(const std::filesystem::path& path) {
    const auto img = readPng(path);
    requireGray(img, path);
    GridD out(img.height, img.width);
    for (Eigen::Index r = 0; r < img.height; ++r)
        for (Eigen::Index c = 0; c < img.width; ++c) out(r, c) = img.at(r, c, 0);
    return out;
}

void writeImagePng(const std::filesystem::path& path, const ColorImage& image) {
    const Eigen::Index h = image.channels[0].rows(), w = image.channels[0].cols();
    std::vector<std::uint16_t> s(static_cast<std::size_t>(h * w * 3));
    for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index c = 0; c < w; ++c)
            for (int ch = 0; ch < 3; ++ch)
                s[static_cast<std::size_t>((r * w + c) * 3 + ch)] =
                    quantize(image.channels[static_cast<std::size_t>(ch)](r, c), 255.0);
    writePng(path, h, w, PNG_COLOR_TYPE_RGB, 8, s);
}

ColorImage readImagePng(const std::filesystem::path& path) {
    const auto img = readPng(path);
    ColorImage out;
    for (int ch = 0; ch < 3; ++ch) {
        auto& dst = out.channels[static_cast<std::size_t>(ch)];
        dst.resize(img.height, img.width);
        const int src = img.channels == 1 ? 0 : ch;
        for (Eigen::Index r = 0; r < img.height; ++r)
            for (Eigen::Index c = 0; c < img.width; ++c) dst(r, c) = img.at(r, c, src);
    }
    return out;
}

}  // namespace crfsim
