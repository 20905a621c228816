#include "tendon/image.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace tendon {

Image make_image(int h, int w, double fill) {
  if (h <= 0 || w <= 0)
    throw std::invalid_argument("image dimensions must be positive, got " +
                                std::to_string(h) + "x" + std::to_string(w));
  Image img;
  img.h = h;
  img.w = w;
  img.px.assign(static_cast<std::size_t>(h) * w, fill);
  return img;
}

void write_pgm(const Image& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "P5\n" << img.w << " " << img.h << "\n255\n";
  std::vector<unsigned char> bytes(img.px.size());
  for (std::size_t i = 0; i < img.px.size(); ++i)
    bytes[i] = static_cast<unsigned char>(
        std::lround(clamp01(img.px[i]) * 255.0));
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("short write: " + path);
}

namespace {

// Reads the next whitespace-delimited token, skipping '#' comment lines.
int next_pgm_int(std::istream& in, const std::string& path) {
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  if (c == EOF || !std::isdigit(c))
    throw std::runtime_error("malformed PGM header: " + path);
  int v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    c = in.get();
  }
  return v;
}

}  // namespace

Image read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  char magic[2];
  f.read(magic, 2);
  if (!f || magic[0] != 'P' || magic[1] != '5')
    throw std::runtime_error("not a binary PGM (P5) file: " + path);
  int w = next_pgm_int(f, path);
  int h = next_pgm_int(f, path);
  int maxval = next_pgm_int(f, path);
  if (w <= 0 || h <= 0 || maxval != 255)
    throw std::runtime_error("unsupported PGM geometry or maxval in " + path);
  // exactly one whitespace byte separates the header from the raster
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h);
  f.read(reinterpret_cast<char*>(bytes.data()),
         static_cast<std::streamsize>(bytes.size()));
  if (f.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw std::runtime_error("truncated PGM raster: " + path);
  Image img = make_image(h, w);
  for (std::size_t i = 0; i < bytes.size(); ++i)
    img.px[i] = bytes[i] / 255.0;
  return img;
}

Image bilinear_resize(const Image& img, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0)
    throw std::invalid_argument("resize target must be positive");
  if (out_h == img.h && out_w == img.w) return img;
  Image out = make_image(out_h, out_w);
  const double sy = static_cast<double>(img.h) / out_h;
  const double sx = static_cast<double>(img.w) / out_w;
  for (int r = 0; r < out_h; ++r) {
    double fy = (r + 0.5) * sy - 0.5;
    if (fy < 0.0) fy = 0.0;
    if (fy > img.h - 1.0) fy = img.h - 1.0;
    const int y0 = static_cast<int>(fy);
    const int y1 = y0 + 1 < img.h ? y0 + 1 : y0;
    const double wy = fy - y0;
    for (int c = 0; c < out_w; ++c) {
      double fx = (c + 0.5) * sx - 0.5;
      if (fx < 0.0) fx = 0.0;
      if (fx > img.w - 1.0) fx = img.w - 1.0;
      const int x0 = static_cast<int>(fx);
      const int x1 = x0 + 1 < img.w ? x0 + 1 : x0;
      const double wx = fx - x0;
      const double top = img.at(y0, x0) * (1.0 - wx) + img.at(y0, x1) * wx;
      const double bot = img.at(y1, x0) * (1.0 - wx) + img.at(y1, x1) * wx;
      out.at(r, c) = top * (1.0 - wy) + bot * wy;
    }
  }
  return out;
}

Image flip_horizontal(const Image& img) {
  Image out = make_image(img.h, img.w);
  for (int r = 0; r < img.h; ++r)
    for (int c = 0; c < img.w; ++c) out.at(r, c) = img.at(r, img.w - 1 - c);
  return out;
}

Image quantize255(const Image& img) {
  Image out = img;
  for (auto& v : out.px) v = std::lround(clamp01(v) * 255.0) / 255.0;
  return out;
}

Image crop(const Image& img, int r0, int c0, int r1, int c1) {
  if (r0 < 0 || c0 < 0 || r1 > img.h || c1 > img.w || r0 >= r1 || c0 >= c1)
    throw std::invalid_argument(
        "crop rectangle [" + std::to_string(r0) + "," + std::to_string(c0) +
        ")x[" + std::to_string(r1) + "," + std::to_string(c1) +
        ") outside image " + std::to_string(img.h) + "x" +
        std::to_string(img.w));
  Image out = make_image(r1 - r0, c1 - c0);
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) out.at(r - r0, c - c0) = img.at(r, c);
  return out;
}

}  // namespace tendon
