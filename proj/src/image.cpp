#include "sdfrecon/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace sdfrecon {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& why) {
    throw std::runtime_error(path + ": " + why);
}

// Skips whitespace and '#' comment lines between header tokens.
int next_header_int(std::istream& in, const std::string& path) {
    for (;;) {
        int c = in.peek();
        if (c == EOF) fail(path, "truncated header");
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        break;
    }
    int v = 0;
    if (!(in >> v)) fail(path, "malformed header");
    return v;
}

std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(
        std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

ImageGray to_gray(const ImageRgb& img) {
    ImageGray g(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const Vec3& c = img.at(x, y);
            g.at(x, y) = 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
        }
    return g;
}

void write_ppm(const std::string& path, const ImageRgb& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const Vec3& c = img.at(x, y);
            const std::uint8_t px[3] = {quantize(c[0]), quantize(c[1]),
                                        quantize(c[2])};
            out.write(reinterpret_cast<const char*>(px), 3);
        }
    if (!out) fail(path, "write failed");
}

ImageRgb read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    std::string magic;
    in >> magic;
    if (magic != "P6") fail(path, "expected PPM magic P6, got '" + magic + "'");
    const int w = next_header_int(in, path);
    const int h = next_header_int(in, path);
    const int maxval = next_header_int(in, path);
    if (w <= 0 || h <= 0) fail(path, "bad dimensions");
    if (maxval != 255) fail(path, "only maxval 255 supported");
    in.get();  // single whitespace after maxval
    ImageRgb img(w, h);
    std::vector<std::uint8_t> row(std::size_t(w) * 3);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), row.size());
        if (!in) fail(path, "truncated pixel data");
        for (int x = 0; x < w; ++x)
            img.at(x, y) = Vec3(row[3 * x], row[3 * x + 1], row[3 * x + 2]) / 255.0;
    }
    return img;
}

void write_pgm(const std::string& path, const ImageGray& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const std::uint8_t v = quantize(img.at(x, y));
            out.write(reinterpret_cast<const char*>(&v), 1);
        }
    if (!out) fail(path, "write failed");
}

void write_pgm16(const std::string& path, const ImageGray& img, double scale) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    out << "P5\n" << img.width() << " " << img.height() << "\n65535\n";
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const long raw = std::lround(img.at(x, y) * scale);
            const std::uint16_t v =
                static_cast<std::uint16_t>(std::clamp(raw, 0l, 65535l));
            const std::uint8_t be[2] = {std::uint8_t(v >> 8), std::uint8_t(v)};
            out.write(reinterpret_cast<const char*>(be), 2);
        }
    if (!out) fail(path, "write failed");
}

namespace {

ImageGray read_pgm_impl(const std::string& path, double value_scale,
                        bool scale_is_maxval) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    std::string magic;
    in >> magic;
    if (magic != "P5") fail(path, "expected PGM magic P5, got '" + magic + "'");
    const int w = next_header_int(in, path);
    const int h = next_header_int(in, path);
    const int maxval = next_header_int(in, path);
    if (w <= 0 || h <= 0) fail(path, "bad dimensions");
    in.get();
    const bool wide = maxval > 255;
    const double denom = scale_is_maxval ? double(maxval) : value_scale;
    ImageGray img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            unsigned v;
            if (wide) {
                std::uint8_t be[2];
                in.read(reinterpret_cast<char*>(be), 2);
                v = (unsigned(be[0]) << 8) | be[1];
            } else {
                std::uint8_t b;
                in.read(reinterpret_cast<char*>(&b), 1);
                v = b;
            }
            if (!in) fail(path, "truncated pixel data");
            img.at(x, y) = v / denom;
        }
    return img;
}

}  // namespace

ImageGray read_pgm(const std::string& path) {
    return read_pgm_impl(path, 0, true);
}

ImageGray read_pgm16(const std::string& path, double scale) {
    return read_pgm_impl(path, scale, false);
}

}  // namespace sdfrecon
