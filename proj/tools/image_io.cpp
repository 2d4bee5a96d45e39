#include "image_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <vector>

#include <png.h>

namespace snn::io {
namespace fs = std::filesystem;

namespace {

struct FileCloser {
    void operator()(std::FILE *f) const noexcept {
        if (f)
            std::fclose(f);
    }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const fs::path &path, const char *mode) {
    File f(std::fopen(path.c_str(), mode));
    if (!f)
        throw IoError("cannot open '" + path.string() + "'");
    return f;
}

std::string lower_extension(const fs::path &path) {
    std::string ext = path.extension().string();
    for (char &c : ext)
        c = char(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
    auto *what = static_cast<std::string *>(png_get_error_ptr(png));
    if (what)
        *what = msg;
    png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

Image<double> read_png(const fs::path &path) {
    File f = open_file(path, "rb");
    std::string error;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
    if (!png)
        throw IoError("libpng: cannot create read struct");
    png_infop info = png_create_info_struct(png);
    std::vector<unsigned char> pixels;
    std::vector<png_bytep> rows;
    png_uint_32 width = 0, height = 0;
    int channels = 0, depth = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("'" + path.string() + "': " + (error.empty() ? "PNG decode failed" : error));
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS))
        png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (png_get_bit_depth(png, info) == 16)
        png_set_swap(png); // little-endian 16-bit samples
    png_read_update_info(png, info);
    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    channels = png_get_channels(png, info);
    depth = png_get_bit_depth(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    pixels.resize(stride * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y)
        rows[y] = pixels.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    if (channels != 1 && channels != 3)
        throw IoError("'" + path.string() + "': unsupported PNG channel count");
    Image<double> img(int(width), int(height), channels);
    auto out = img.samples();
    if (depth == 16) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const unsigned v = pixels[2 * i] | (unsigned(pixels[2 * i + 1]) << 8);
            out[i] = v / 65535.0;
        }
    } else {
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = pixels[i] / 255.0;
    }
    return img;
}

void write_png(std::FILE *f, const Image<double> &img) {
    std::string error;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
    if (!png)
        throw IoError("libpng: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    std::vector<unsigned char> bytes(img.size());
    std::vector<png_bytep> rows(std::size_t(img.height()));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError(error.empty() ? "PNG encode failed" : error);
    }
    const auto src = img.samples();
    std::transform(src.begin(), src.end(), bytes.begin(), to_byte);
    const std::size_t stride = std::size_t(img.width()) * img.channels();
    for (int y = 0; y < img.height(); ++y)
        rows[std::size_t(y)] = bytes.data() + std::size_t(y) * stride;
    png_init_io(png, f);
    png_set_IHDR(png, info, png_uint_32(img.width()), png_uint_32(img.height()), 8,
                 img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// PNM header token, skipping whitespace and '#' comments.
int read_pnm_int(std::istream &in) {
    for (;;) {
        const int c = in.peek();
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v = -1;
    if (!(in >> v))
        throw IoError("malformed PNM header");
    return v;
}

Image<double> read_pnm(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path.string() + "'");
    char magic[2] = {};
    in.read(magic, 2);
    if (magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
        throw IoError("'" + path.string() + "': only binary P5/P6 PNM is supported");
    const int channels = magic[1] == '5' ? 1 : 3;
    const int width = read_pnm_int(in);
    const int height = read_pnm_int(in);
    const int maxval = read_pnm_int(in);
    if (width < 1 || height < 1 || maxval < 1 || maxval > 65535)
        throw IoError("'" + path.string() + "': invalid PNM header");
    in.get(); // single whitespace before the raster
    const std::size_t count = std::size_t(width) * height * channels;
    const std::size_t bytes_per = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(count * bytes_per);
    in.read(reinterpret_cast<char *>(raw.data()), std::streamsize(raw.size()));
    if (std::size_t(in.gcount()) != raw.size())
        throw IoError("'" + path.string() + "': truncated PNM raster");
    Image<double> img(width, height, channels);
    auto out = img.samples();
    for (std::size_t i = 0; i < count; ++i) {
        const unsigned v = bytes_per == 1 ? raw[i] : (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1];
        out[i] = double(v) / maxval;
    }
    return img;
}

void write_pnm(std::FILE *f, const Image<double> &img) {
    const std::string header = std::string(img.channels() == 1 ? "P5" : "P6") + "\n" +
                               std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<unsigned char> bytes(img.size());
    const auto src = img.samples();
    std::transform(src.begin(), src.end(), bytes.begin(), to_byte);
    if (std::fwrite(header.data(), 1, header.size(), f) != header.size() ||
        std::fwrite(bytes.data(), 1, bytes.size(), f) != bytes.size())
        throw IoError("short write");
}

} // namespace

unsigned char to_byte(double v) noexcept {
    if (!(v > 0.0)) // also maps NaN to 0
        return 0;
    if (v >= 1.0)
        return 255;
    return static_cast<unsigned char>(std::lround(v * 255.0));
}

bool is_image_file(const fs::path &path) {
    const std::string ext = lower_extension(path);
    return ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

Image<double> read_image(const fs::path &path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec))
        throw IoError("no such file '" + path.string() + "'");
    std::array<unsigned char, 8> sig{};
    {
        File f = open_file(path, "rb");
        const std::size_t n = std::fread(sig.data(), 1, sig.size(), f.get());
        if (n >= 8 && png_sig_cmp(sig.data(), 0, 8) == 0)
            return read_png(path);
        if (n >= 2 && sig[0] == 'P')
            return read_pnm(path);
    }
    throw IoError("'" + path.string() + "': unrecognized image format (PNG, PGM or PPM expected)");
}

void write_image(const fs::path &path, const Image<double> &img) {
    const fs::path tmp = path.string() + ".partial";
    try {
        {
            File f = open_file(tmp, "wb");
            if (lower_extension(path) == ".png")
                write_png(f.get(), img);
            else
                write_pnm(f.get(), img);
            if (std::fflush(f.get()) != 0)
                throw IoError("flush failed");
        }
        fs::rename(tmp, path);
    } catch (const std::exception &e) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw IoError("cannot write '" + path.string() + "': " + e.what());
    }
}

} // namespace snn::io
