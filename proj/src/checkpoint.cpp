#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dlma/error.hpp"
#include "dlma/trainer.hpp"

namespace dlma {
namespace {

constexpr char kMagic[4] = {'D', 'L', 'M', 'A'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <class T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::size_t size() const { return out_.size(); }
  const std::uint8_t* at(std::size_t offset) const { return out_.data() + offset; }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  const std::uint8_t* take(std::size_t n) {
    if (n > in_.size() - pos_) throw Error(ErrorCode::corrupt, "checkpoint is truncated");
    const std::uint8_t* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <class T>
  T uint() {
    const std::uint8_t* p = take(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
    return v;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }
  const std::uint8_t* at(std::size_t offset) const { return in_.data() + offset; }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(const std::uint8_t* p, std::size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large payloads in pieces.
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = crc32(c, p, chunk);
    p += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

std::size_t element_size(DType t) {
  switch (t) {
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::i64: return 8;
    case DType::bytes: return 1;
  }
  return 0;
}

}  // namespace

Record Record::reals(std::string name, std::vector<std::int64_t> dims, const std::vector<double>& values) {
  Record r{std::move(name), DType::f64, std::move(dims), {}};
  Writer w;
  for (double v : values) w.uint(std::bit_cast<std::uint64_t>(v));
  r.payload = w.take();
  return r;
}

Record Record::integer(std::string name, std::int64_t value) {
  Record r{std::move(name), DType::i64, {1}, {}};
  Writer w;
  w.uint(static_cast<std::uint64_t>(value));
  r.payload = w.take();
  return r;
}

Record Record::text(std::string name, const std::string& value) {
  return Record{std::move(name), DType::bytes, {static_cast<std::int64_t>(value.size())},
                std::vector<std::uint8_t>(value.begin(), value.end())};
}

std::vector<double> Record::as_reals() const {
  Reader r(payload);
  std::vector<double> out;
  if (dtype == DType::f64) {
    out.resize(payload.size() / 8);
    for (double& v : out) v = std::bit_cast<double>(r.uint<std::uint64_t>());
  } else if (dtype == DType::f32) {
    out.resize(payload.size() / 4);
    for (double& v : out) v = std::bit_cast<float>(r.uint<std::uint32_t>());
  } else {
    throw Error(ErrorCode::corrupt, "checkpoint record '" + name + "' does not hold reals");
  }
  return out;
}

std::int64_t Record::as_integer() const {
  if (dtype != DType::i64 || payload.size() != 8) {
    throw Error(ErrorCode::corrupt, "checkpoint record '" + name + "' is not an integer");
  }
  Reader r(payload);
  return static_cast<std::int64_t>(r.uint<std::uint64_t>());
}

std::string Record::as_text() const {
  if (dtype != DType::bytes) throw Error(ErrorCode::corrupt, "checkpoint record '" + name + "' is not text");
  return std::string(payload.begin(), payload.end());
}

const Record* Checkpoint::find(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const Record& Checkpoint::get(const std::string& name) const {
  const Record* r = find(name);
  if (!r) throw Error(ErrorCode::corrupt, "checkpoint has no record '" + name + "'");
  return *r;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  Writer w;
  w.bytes(kMagic, 4);
  w.uint<std::uint32_t>(c.version);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.records.size()));
  for (const auto& r : c.records) {
    const std::size_t start = w.size();
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(r.name.size()));
    w.bytes(r.name.data(), r.name.size());
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(r.dtype));
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(r.dims.size()));
    for (auto d : r.dims) w.uint<std::uint64_t>(static_cast<std::uint64_t>(d));
    w.uint<std::uint64_t>(r.payload.size());
    w.bytes(r.payload.data(), r.payload.size());
    w.uint<std::uint32_t>(crc(w.at(start), w.size() - start));
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  if (std::memcmp(in.take(4), kMagic, 4) != 0) throw Error(ErrorCode::corrupt, "not a checkpoint (bad magic)");
  Checkpoint c;
  c.version = in.uint<std::uint32_t>();
  if (c.version != kCheckpointVersion) {
    throw Error(ErrorCode::version_mismatch, "checkpoint version " + std::to_string(c.version) +
                                                 " is not supported (expected " +
                                                 std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t count = in.uint<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::size_t start = in.pos();
    Record r;
    const std::uint32_t name_len = in.uint<std::uint32_t>();
    const std::uint8_t* name = in.take(name_len);
    r.name.assign(name, name + name_len);
    const std::uint8_t tag = in.uint<std::uint8_t>();
    if (tag < 1 || tag > 4) throw Error(ErrorCode::corrupt, "checkpoint record '" + r.name + "' has unknown dtype");
    r.dtype = static_cast<DType>(tag);
    const std::uint32_t rank = in.uint<std::uint32_t>();
    std::uint64_t count_elems = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      r.dims.push_back(static_cast<std::int64_t>(in.uint<std::uint64_t>()));
      count_elems *= static_cast<std::uint64_t>(r.dims.back());
    }
    const std::uint64_t len = in.uint<std::uint64_t>();
    const std::uint8_t* payload = in.take(len);
    r.payload.assign(payload, payload + len);
    const std::size_t end = in.pos();
    if (in.uint<std::uint32_t>() != crc(in.at(start), end - start)) {
      throw Error(ErrorCode::corrupt, "checkpoint record '" + r.name + "' fails its checksum");
    }
    if (len != count_elems * element_size(r.dtype)) {
      throw Error(ErrorCode::corrupt, "checkpoint record '" + r.name + "' has an inconsistent length");
    }
    c.records.push_back(std::move(r));
  }
  if (!in.done()) throw Error(ErrorCode::corrupt, "checkpoint has trailing bytes");
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(c);
  // Write beside the target and rename so a crash never leaves a torn file.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::io, "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::io, "cannot replace " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace dlma
