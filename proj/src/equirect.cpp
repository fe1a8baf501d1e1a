// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#include "fimesh/equirect.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "fimesh/common.hpp"

namespace fimesh {

EquirectImage make_image(int width, int height, int channels, double fill) {
  if (width <= 0 || height <= 0 || (channels != 1 && channels != 3))
    throw ConfigError("bad image dimensions");
  EquirectImage img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.values = Eigen::MatrixXd::Constant(
      channels, static_cast<std::int64_t>(width) * height, fill);
  return img;
}

int lon_to_pixel_x(double lon, int width) {
  const double t = (lon + 3.14159265358979323846) / (2.0 * 3.14159265358979323846);
  int x = static_cast<int>(std::floor(t * width));
  x %= width;
  if (x < 0) x += width;
  return x;
}

int lat_to_pixel_y(double lat, int height) {
  const double t = (3.14159265358979323846 / 2.0 - lat) / 3.14159265358979323846;
  int y = static_cast<int>(std::floor(t * height));
  return std::clamp(y, 0, height - 1);
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

EquirectImage load_png(std::FILE* fp, const std::string& name) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng init failed");
  }
  std::vector<png_bytep> rows;
  std::vector<png_byte> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("undecodable PNG: " + name);
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int ch = png_get_channels(png, info);
  if (ch != 1 && ch != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("unsupported PNG channel count in " + name);
  }
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels.resize(stride * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + y * stride;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  EquirectImage img = make_image(static_cast<int>(w), static_cast<int>(h), ch);
  for (png_uint_32 y = 0; y < h; ++y)
    for (png_uint_32 x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c)
        img.at(c, static_cast<int>(x), static_cast<int>(y)) =
            pixels[y * stride + x * ch + c] / 255.0;
  return img;
}

int pnm_next_int(std::FILE* fp, const std::string& name) {
  int c;
  for (;;) {
    c = std::fgetc(fp);
    if (c == '#') {
      while (c != '\n' && c != EOF) c = std::fgetc(fp);
    } else if (c == EOF || !std::isspace(c)) {
      break;
    }
  }
  if (c == EOF || !std::isdigit(c)) throw DataError("malformed PNM header: " + name);
  int v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    c = std::fgetc(fp);
  }
  return v;
}

EquirectImage load_pnm(std::FILE* fp, const std::string& name) {
  char m0 = static_cast<char>(std::fgetc(fp));
  char m1 = static_cast<char>(std::fgetc(fp));
  if (m0 != 'P' || (m1 != '2' && m1 != '3' && m1 != '5' && m1 != '6'))
    throw DataError("unsupported PNM flavor: " + name);
  const bool binary = m1 == '5' || m1 == '6';
  const int ch = (m1 == '3' || m1 == '6') ? 3 : 1;
  const int w = pnm_next_int(fp, name);
  const int h = pnm_next_int(fp, name);
  const int maxval = pnm_next_int(fp, name);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw DataError("unsupported PNM header: " + name);

  EquirectImage img = make_image(w, h, ch);
  const std::int64_t n = static_cast<std::int64_t>(w) * h * ch;
  if (binary) {
    // single whitespace byte after maxval already consumed by pnm_next_int
    std::vector<unsigned char> buf(static_cast<std::size_t>(n));
    if (std::fread(buf.data(), 1, buf.size(), fp) != buf.size())
      throw DataError("truncated PNM: " + name);
    for (std::int64_t i = 0; i < n; ++i)
      img.values(i % ch, i / ch) = buf[static_cast<std::size_t>(i)] / double(maxval);
  } else {
    for (std::int64_t i = 0; i < n; ++i)
      img.values(i % ch, i / ch) = pnm_next_int(fp, name) / double(maxval);
  }
  return img;
}

}  // namespace

EquirectImage load_image(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw MissingInputError("cannot open image: " + path.string());
  unsigned char sig[8] = {};
  const std::size_t got = std::fread(sig, 1, 8, fp.get());
  std::rewind(fp.get());
  if (got >= 8 && png_sig_cmp(sig, 0, 8) == 0) return load_png(fp.get(), path.string());
  if (got >= 2 && sig[0] == 'P') return load_pnm(fp.get(), path.string());
  throw DataError("unrecognized image format: " + path.string());
}

void save_image(const std::filesystem::path& path, const EquirectImage& img) {
  const auto ext = path.extension().string();
  const auto quantize = [](double v) {
    return static_cast<unsigned char>(
        std::clamp(std::lround(v * 255.0), 0l, 255l));
  };

  if (ext == ".ppm" || ext == ".pgm") {
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw MissingInputError("cannot open for writing: " + path.string());
    std::fprintf(fp.get(), "P%c\n%d %d\n255\n", img.channels == 3 ? '6' : '5',
                 img.width, img.height);
    std::vector<unsigned char> buf;
    buf.reserve(static_cast<std::size_t>(img.values.size()));
    for (std::int64_t p = 0; p < img.values.cols(); ++p)
      for (int c = 0; c < img.channels; ++c) buf.push_back(quantize(img.values(c, p)));
    if (std::fwrite(buf.data(), 1, buf.size(), fp.get()) != buf.size())
      throw DataError("short write: " + path.string());
    return;
  }

  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw MissingInputError("cannot open for writing: " + path.string());
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng init failed");
  }
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG write failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  pixels.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
  std::size_t k = 0;
  for (std::int64_t p = 0; p < img.values.cols(); ++p)
    for (int c = 0; c < img.channels; ++c) pixels[k++] = quantize(img.values(c, p));
  rows.resize(static_cast<std::size_t>(img.height));
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y) rows[y] = pixels.data() + y * stride;
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

EquirectImage downscale_equirect(const EquirectImage& img, int width) {
  if (img.width != 2 * img.height)
    throw ConfigError("downscale_equirect expects a 2:1 image");
  if (width <= 0 || width % 2 != 0 || width > img.width)
    throw ConfigError("bad downscale width");
  if (width == img.width) return img;

  const int height = width / 2;
  const double s = static_cast<double>(img.width) / width;  // same per axis

  // per-axis fractional coverage segments of each output cell
  struct Seg {
    int first;
    std::vector<double> w;
  };
  const auto segments = [s](int out_i, int in_limit) {
    Seg seg;
    const double lo = out_i * s, hi = (out_i + 1) * s;
    seg.first = static_cast<int>(std::floor(lo));
    const int last = std::min(static_cast<int>(std::ceil(hi)) - 1, in_limit - 1);
    for (int i = seg.first; i <= last; ++i) {
      const double overlap = std::min(hi, double(i + 1)) - std::max(lo, double(i));
      seg.w.push_back(std::max(overlap, 0.0));
    }
    return seg;
  };

  std::vector<Seg> xs(width), ys(height);
  for (int x = 0; x < width; ++x) xs[x] = segments(x, img.width);
  for (int y = 0; y < height; ++y) ys[y] = segments(y, img.height);

  EquirectImage out = make_image(width, height, img.channels);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double wsum = 0.0;
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(img.channels);
      for (std::size_t j = 0; j < ys[y].w.size(); ++j) {
        for (std::size_t i = 0; i < xs[x].w.size(); ++i) {
          const double w = ys[y].w[j] * xs[x].w[i];
          const std::int64_t px =
              static_cast<std::int64_t>(ys[y].first + j) * img.width +
              (xs[x].first + i);
          acc += w * img.values.col(px);
          wsum += w;
        }
      }
      out.values.col(static_cast<std::int64_t>(y) * width + x) = acc / wsum;
    }
  }
  return out;
}

EquirectImage to_luminance(const EquirectImage& img) {
  if (img.channels == 1) return img;
  EquirectImage out = make_image(img.width, img.height, 1);
  out.values = 0.299 * img.values.row(0) + 0.587 * img.values.row(1) +
               0.114 * img.values.row(2);
  return out;
}

}  // namespace fimesh
