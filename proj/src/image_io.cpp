#include "m2p/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "m2p/error.hpp"

namespace m2p {

namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  for (auto& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e;
}

GrayImage read_png(const fs::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error("image: cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("image: libpng init failed");
  }
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("image: malformed PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_read_update_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const auto channels = png_get_channels(png, info);
  const auto rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  GrayImage img(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const unsigned char* p = rows[y] + x * channels;
      double v = 0.0;
      if (channels >= 3) {
        v = (p[0] + p[1] + p[2]) / 3.0;
      } else {
        v = p[0];
      }
      img(x, y) = v / 255.0;
    }
  }
  return img;
}

void write_png(const GrayImage& img, const fs::path& path) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error("image: cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("image: libpng init failed");
  }
  std::vector<unsigned char> buffer(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    buffer[i] = static_cast<unsigned char>(std::lround(std::clamp(img.data()[i], 0.0, 1.0) * 255.0));
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("image: PNG write failed " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < img.height(); ++y) png_write_row(png, buffer.data() + y * img.width());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Next PGM header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

GrayImage read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("image: cannot open " + path.string());
  const std::string magic = pgm_token(in);
  if (magic != "P5" && magic != "P2") throw Error("image: not a PGM file " + path.string());
  std::size_t w = 0, h = 0;
  unsigned long maxval = 0;
  try {
    w = std::stoul(pgm_token(in));
    h = std::stoul(pgm_token(in));
    maxval = std::stoul(pgm_token(in));
  } catch (const std::exception&) {
    throw Error("image: malformed PGM header " + path.string());
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw Error("image: bad PGM header");
  GrayImage img(w, h);
  if (magic == "P2") {
    for (auto& v : img.data()) {
      const std::string tok = pgm_token(in);
      if (tok.empty()) throw Error("image: truncated PGM " + path.string());
      v = static_cast<double>(std::stoul(tok)) / static_cast<double>(maxval);
    }
    return img;
  }
  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(w * h * bytes_per);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw Error("image: truncated PGM " + path.string());
  for (std::size_t i = 0; i < w * h; ++i) {
    const unsigned v = bytes_per == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
    img.data()[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return img;
}

void write_pgm(const GrayImage& img, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("image: cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  for (double v : img.data()) {
    out.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  if (!out) throw Error("image: I/O failure writing " + path.string());
}

}  // namespace

GrayImage read_image(const fs::path& path) {
  const auto ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".pnm") return read_pgm(path);
  throw Error("image: unsupported format " + path.string());
}

void write_image(const GrayImage& img, const fs::path& path) {
  const auto ext = lower_ext(path);
  if (ext == ".png") return write_png(img, path);
  if (ext == ".pgm") return write_pgm(img, path);
  throw Error("image: unsupported output format " + path.string());
}

void write_image(const PhaseMap& map, const fs::path& path) {
  GrayImage g(map.width(), map.height());
  for (std::size_t i = 0; i < map.size(); ++i) g.data()[i] = map.data()[i] ? 1.0 : 0.0;
  write_image(g, path);
}

}  // namespace m2p
