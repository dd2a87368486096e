#include <png.h>

#include <cctype>
#include <cstring>

#include "amflow/io.hpp"
#include "amflow/vision.hpp"

namespace am::vision {

RgbImage::RgbImage(int w, int h, Rgb fill) : width(w), height(h) {
  data.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < data.size(); i += 3) {
    data[i] = fill[0];
    data[i + 1] = fill[1];
    data[i + 2] = fill[2];
  }
}

Rgb RgbImage::get(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {data[i], data[i + 1], data[i + 2]};
}

void RgbImage::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  data[i] = c[0];
  data[i + 1] = c[1];
  data[i + 2] = c[2];
}

namespace {

// Whitespace/comment-aware PGM header tokenizer.
class PgmReader {
 public:
  PgmReader(const std::string& bytes, const std::string& path) : s_(bytes), path_(path) {}

  std::string token() {
    skip();
    std::size_t start = pos_;
    while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_) throw Error(path_ + ": truncated PGM");
    return s_.substr(start, pos_ - start);
  }
  int number() {
    const std::string t = token();
    try {
      return std::stoi(t);
    } catch (const std::exception&) {
      throw Error(path_ + ": bad PGM number '" + t + "'");
    }
  }
  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }

 private:
  void skip() {
    while (pos_ < s_.size()) {
      if (s_[pos_] == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(s_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }
  const std::string& s_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage read_pgm(const std::string& path) {
  const std::string bytes = read_file(path);
  PgmReader rd(bytes, path);
  const std::string magic = rd.token();
  if (magic != "P5" && magic != "P2") throw Error(path + ": not a PGM (magic " + magic + ")");
  const int w = rd.number(), h = rd.number(), maxval = rd.number();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw Error(path + ": unsupported PGM geometry or maxval");
  }
  GrayImage img(w, h);
  auto scale = [maxval](int v) {
    return static_cast<std::uint8_t>(maxval == 255 ? v : (v * 255 + maxval / 2) / maxval);
  };
  if (magic == "P5") {
    rd.advance();  // single whitespace byte after maxval
    const std::size_t need = img.pixels.size();
    if (bytes.size() < rd.pos() + need) throw Error(path + ": truncated PGM raster");
    for (std::size_t i = 0; i < need; ++i) {
      img.pixels[i] = scale(static_cast<unsigned char>(bytes[rd.pos() + i]));
    }
  } else {
    for (auto& p : img.pixels) p = scale(rd.number());
  }
  return img;
}

GrayImage read_png_gray(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(path + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  GrayImage out(static_cast<int>(image.width), static_cast<int>(image.height));
  // White background for any alpha channel.
  png_color background{255, 255, 255};
  if (!png_image_finish_read(&image, &background, out.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(path + ": " + msg);
  }
  return out;
}

GrayImage read_gray_image(const std::string& path) {
  const std::string head = read_file(path).substr(0, 8);
  if (head.size() >= 4 && head.compare(1, 3, "PNG") == 0) return read_png_gray(path);
  if (head.size() >= 2 && head[0] == 'P' && (head[1] == '5' || head[1] == '2')) return read_pgm(path);
  throw Error(path + ": unrecognized image format");
}

void write_pgm(const std::string& path, const GrayImage& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  write_file(path, out);
}

namespace {

void write_png_raw(const std::string& path, int w, int h, png_uint_32 format, const void* buffer) {
  write_file(path, "");  // creates parent directories
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer, 0, nullptr)) {
    throw Error(path + ": " + image.message);
  }
}

}  // namespace

void write_png(const std::string& path, const RgbImage& image) {
  write_png_raw(path, image.width, image.height, PNG_FORMAT_RGB, image.data.data());
}

void write_png(const std::string& path, const GrayImage& image) {
  write_png_raw(path, image.width, image.height, PNG_FORMAT_GRAY, image.pixels.data());
}

}  // namespace am::vision
