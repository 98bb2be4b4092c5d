#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdfrecon/geometry.hpp"

namespace sdfrecon {

// Row-major image grid of T pixels. at(x, y) with x across, y down.
template <typename T>
class Grid {
  public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : w_(width), h_(height), data_(std::size_t(width) * height, fill) {}

    int width() const { return w_; }
    int height() const { return h_; }
    bool empty() const { return data_.empty(); }
    bool contains(int x, int y) const {
        return x >= 0 && x < w_ && y >= 0 && y < h_;
    }
    T& at(int x, int y) { return data_[std::size_t(y) * w_ + x]; }
    const T& at(int x, int y) const { return data_[std::size_t(y) * w_ + x]; }
    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

  private:
    int w_ = 0, h_ = 0;
    std::vector<T> data_;
};

using ImageRgb = Grid<Vec3>;      // channels in [0,1]
using ImageGray = Grid<double>;   // [0,1]
using ImageLabel = Grid<int>;

ImageGray to_gray(const ImageRgb& img);  // Rec. 601 luma

// Binary PPM (P6) / PGM (P5, 8- or 16-bit). Values clamped to [0,1] on
// write; 16-bit PGM stores round(v * scale) big-endian.
void write_ppm(const std::string& path, const ImageRgb& img);
ImageRgb read_ppm(const std::string& path);
void write_pgm(const std::string& path, const ImageGray& img);
void write_pgm16(const std::string& path, const ImageGray& img, double scale);
ImageGray read_pgm(const std::string& path);  // either depth, rescaled to [0,1]
ImageGray read_pgm16(const std::string& path, double scale);

}  // namespace sdfrecon
