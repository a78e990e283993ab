#include "dlma/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "dlma/error.hpp"

namespace dlma {
namespace {

using FilePtr = std::unique_ptr<std::FILE, decltype(&std::fclose)>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode), &std::fclose);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path.string());
  return f;
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext;
}

Raster from_codes(int h, int w, int c, const std::vector<unsigned char>& codes) {
  std::vector<double> data(codes.size());
  std::transform(codes.begin(), codes.end(), data.begin(),
                 [](unsigned char k) { return static_cast<double>(k) / 255.0; });
  return Raster(h, w, c, std::move(data));
}

std::vector<unsigned char> to_codes(const Raster& r, double q) {
  std::vector<unsigned char> codes(r.size());
  auto src = r.data();
  for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = encode_code(src[i], q);
  return codes;
}

// ---- PGM / PPM ---------------------------------------------------------

// Reads one header integer, skipping whitespace and '#' comments.
int read_pnm_int(std::istream& in, const std::string& name) {
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (!std::isspace(ch)) {
      break;
    }
    ch = in.get();
  }
  if (ch == EOF || !std::isdigit(ch)) throw Error(ErrorCode::corrupt, "malformed PNM header in " + name);
  long value = 0;
  while (ch != EOF && std::isdigit(ch)) {
    value = value * 10 + (ch - '0');
    if (value > (1L << 30)) throw Error(ErrorCode::corrupt, "PNM header value too large in " + name);
    ch = in.get();
  }
  // exactly one whitespace byte terminates the field
  if (ch != EOF && !std::isspace(ch)) throw Error(ErrorCode::corrupt, "malformed PNM header in " + name);
  return static_cast<int>(value);
}

Raster load_pnm(const std::filesystem::path& path, int channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  in.ignore(2);
  const int w = read_pnm_int(in, path.string());
  const int h = read_pnm_int(in, path.string());
  const int maxval = read_pnm_int(in, path.string());
  if (maxval != 255) {
    throw Error(ErrorCode::unsupported_depth,
                path.string() + ": maxval " + std::to_string(maxval) + " (only 255 is supported)");
  }
  std::vector<unsigned char> codes(static_cast<std::size_t>(w) * h * channels);
  in.read(reinterpret_cast<char*>(codes.data()), static_cast<std::streamsize>(codes.size()));
  if (in.gcount() != static_cast<std::streamsize>(codes.size())) {
    throw Error(ErrorCode::corrupt, path.string() + ": truncated pixel data");
  }
  return from_codes(h, w, channels, codes);
}

void save_pnm(const Raster& r, const std::filesystem::path& path, double q) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << (r.channels() == 1 ? "P5" : "P6") << '\n' << r.width() << ' ' << r.height() << '\n' << 255 << '\n';
  const auto codes = to_codes(r, q);
  out.write(reinterpret_cast<const char*>(codes.data()), static_cast<std::streamsize>(codes.size()));
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

// ---- PNG ---------------------------------------------------------------

// libpng reports errors by longjmp back into the function that owns the
// png_struct; both readers keep every C++ object alive across that jump and
// throw only after it lands.
void png_warning_handler(png_structp, png_const_charp) {}

Raster load_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, &png_warning_handler);
  if (!png) throw Error(ErrorCode::io, "libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  std::vector<unsigned char> codes;
  std::vector<png_bytep> rows;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::corrupt, path.string() + ": corrupt PNG stream");
  }

  png_init_io(png, f.get());
  png_read_info(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::unsupported_depth, path.string() + ": 16-bit PNG is not supported");
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::unsupported_format, path.string() + ": unexpected channel layout");
  }
  codes.resize(static_cast<std::size_t>(w) * h * channels);
  rows.resize(h);
  for (int y = 0; y < h; ++y) rows[y] = codes.data() + static_cast<std::size_t>(y) * w * channels;
  // re-arm so the jump target sees the buffers in their final state
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::corrupt, path.string() + ": corrupt PNG stream");
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return from_codes(h, w, channels, codes);
}

void save_png(const Raster& r, const std::filesystem::path& path, double q) {
  const auto codes = to_codes(r, q);
  FilePtr f = open_file(path, "wb");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, &png_warning_handler);
  if (!png) throw Error(ErrorCode::io, "libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::io, "write failed for " + path.string());
  }

  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(r.width()), static_cast<png_uint_32>(r.height()), 8,
               r.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < r.height(); ++y) {
    png_write_row(png, const_cast<png_bytep>(codes.data()) + static_cast<std::size_t>(y) * r.width() * r.channels());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

unsigned char encode_code(double value, double q) {
  const double v = std::clamp(quantize(value, q), 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(v * 255.0));
}

Raster load_image(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::array<unsigned char, 8> magic{};
  probe.read(reinterpret_cast<char*>(magic.data()), magic.size());
  const auto got = probe.gcount();
  probe.close();

  static constexpr std::array<unsigned char, 8> kPngMagic = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (got == 8 && magic == kPngMagic) return load_png(path);
  if (got >= 2 && magic[0] == 'P' && magic[1] == '5') return load_pnm(path, 1);
  if (got >= 2 && magic[0] == 'P' && magic[1] == '6') return load_pnm(path, 3);
  throw Error(ErrorCode::unsupported_format, path.string() + ": not a PNG, PGM or PPM file");
}

void save_image(const Raster& r, const std::filesystem::path& path, const QuantSpec& q) {
  q.validate();
  const std::string ext = lower_extension(path);
  if (ext == ".png") return save_png(r, path, q.step);
  if (ext == ".pnm" || (ext == ".pgm" && r.channels() == 1) || (ext == ".ppm" && r.channels() == 3)) {
    return save_pnm(r, path, q.step);
  }
  if (ext == ".pgm" || ext == ".ppm") {
    throw Error(ErrorCode::dimension_mismatch,
                path.string() + ": extension does not match a " + std::to_string(r.channels()) + "-channel image");
  }
  throw Error(ErrorCode::unsupported_format, path.string() + ": unknown image extension");
}

}  // namespace dlma
