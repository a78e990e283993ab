#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "dlma/error.hpp"
#include "dlma/synth.hpp"

namespace dlma {
namespace {

constexpr const char* kSidecarMagic = "dlma-sidecar 1";

void put_f32le(std::ostream& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                        static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

float get_f32le(const unsigned char* b) {
  const std::uint32_t bits = std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 |
                             std::uint32_t{b[3]} << 24;
  return std::bit_cast<float>(bits);
}

}  // namespace

void write_sidecar(const Sidecar& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << kSidecarMagic << '\n' << std::setprecision(17);
  out << "dim_gain " << s.params.dim_gain << '\n';
  out << "gamma_ratio " << s.params.gamma_ratio << '\n';
  out << "q " << s.params.q << '\n';
  out << "noise_sigma " << s.params.noise_sigma << '\n';
  out << "seed " << s.params.seed << '\n';
  out << "noise_map f32le " << s.height << ' ' << s.width << ' ' << s.channels << '\n';
  for (float v : s.noise_map) put_f32le(out, v);
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

Sidecar read_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kSidecarMagic) {
    throw Error(ErrorCode::unsupported_format, path.string() + ": not a sidecar file");
  }
  Sidecar s;
  std::map<std::string, std::string> fields;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "noise_map") {
      std::string enc;
      ls >> enc >> s.height >> s.width >> s.channels;
      if (enc != "f32le" || !ls || s.height < 0 || s.width < 0 || s.channels <= 0) {
        throw Error(ErrorCode::corrupt, path.string() + ": bad noise_map header");
      }
      break;
    }
    std::string value;
    ls >> value;
    fields[key] = value;
  }
  try {
    s.params.dim_gain = std::stod(fields.at("dim_gain"));
    s.params.gamma_ratio = std::stod(fields.at("gamma_ratio"));
    s.params.q = std::stod(fields.at("q"));
    s.params.noise_sigma = std::stod(fields.at("noise_sigma"));
    s.params.seed = std::stoull(fields.at("seed"));
  } catch (const std::exception&) {
    throw Error(ErrorCode::corrupt, path.string() + ": missing or malformed parameter");
  }
  const std::size_t n = static_cast<std::size_t>(s.height) * s.width * s.channels;
  std::vector<unsigned char> raw(n * 4);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw Error(ErrorCode::corrupt, path.string() + ": truncated noise map");
  }
  s.noise_map.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.noise_map[i] = get_f32le(raw.data() + 4 * i);
  return s;
}

}  // namespace dlma
