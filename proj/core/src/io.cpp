#include "regionalign/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <string>

#include "regionalign/error.hpp"

namespace regionalign::io {

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian hosts are not supported");

template <typename T>
T byteswap_if_needed(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
    std::memcpy(&value, raw, sizeof(T));
  }
  return value;
}

class Writer {
 public:
  void magic(const char (&tag)[5]) { bytes_.insert(bytes_.end(), tag, tag + 4); }
  template <typename T>
  void put(T value) {
    value = byteswap_if_needed(value);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
  }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  Bytes take() { return std::move(bytes_); }

 private:
  Bytes bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t offset() const { return offset_; }

  void magic(const char (&tag)[5]) {
    need(4, "magic");
    if (std::memcmp(bytes_.data(), tag, 4) != 0) {
      throw Error(ErrorCode::kBadMagic, std::string("expected magic \"") + tag + "\"", 0);
    }
    offset_ = 4;
  }

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return byteswap_if_needed(value);
  }

  double finite_f32(const char* what) {
    const std::uint64_t at = offset_;
    const float v = get<float>(what);
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, std::string(what) + " is not finite", at);
    return v;
  }

  std::string text(std::size_t length, const char* what) {
    need(length, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + offset_), length);
    offset_ += length;
    return s;
  }

  void need(std::uint64_t count, const char* what) const {
    if (bytes_.size() - offset_ < count) {
      throw Error(ErrorCode::kTruncated,
                  std::string("file ends inside ") + what + " (need " + std::to_string(count) +
                      " bytes, have " + std::to_string(bytes_.size() - offset_) + ")",
                  offset_);
    }
  }

  void finish() const {
    if (offset_ != bytes_.size()) {
      throw Error(ErrorCode::kMalformed,
                  std::to_string(bytes_.size() - offset_) + " trailing bytes after payload",
                  offset_);
    }
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t offset_ = 0;
};

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw Error(ErrorCode::kShape, std::string(what) + " exceeds u32");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

Bytes encode_features(const FeatureMap& map) {
  Writer w;
  w.magic("DFM1");
  w.put(checked_u32(map.height(), "height"));
  w.put(checked_u32(map.width(), "width"));
  w.put(checked_u32(map.channels(), "channels"));
  for (double v : map.data()) w.put(static_cast<float>(v));
  return w.take();
}

FeatureMap decode_features(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic("DFM1");
  const std::uint64_t dims_at = r.offset();
  const auto h = r.get<std::uint32_t>("height");
  const auto w = r.get<std::uint32_t>("width");
  const auto c = r.get<std::uint32_t>("channels");
  if (h == 0 || w == 0 || c == 0) {
    throw Error(ErrorCode::kMalformed, "feature map dimensions must be positive", dims_at);
  }
  const std::uint64_t count = std::uint64_t{h} * w * c;
  r.need(count * 4, "feature payload");
  std::vector<double> data(count);
  for (auto& v : data) v = r.finite_f32("feature value");
  r.finish();
  return FeatureMap(h, w, c, std::move(data));
}

Bytes encode_bank(const EmbeddingBank& bank) {
  Writer w;
  w.magic("EBK1");
  w.put(checked_u32(bank.size(), "category count"));
  w.put(checked_u32(bank.channels(), "channels"));
  for (std::size_t j = 0; j < bank.size(); ++j) {
    const std::string& name = bank.names()[j];
    if (name.size() > 0xFFFF) throw Error(ErrorCode::kShape, "category name too long");
    w.put(static_cast<std::uint16_t>(name.size()));
    w.raw(name);
    w.put(static_cast<std::uint8_t>(bank.kind(j)));
  }
  for (double v : bank.embeddings()) w.put(static_cast<float>(v));
  return w.take();
}

EmbeddingBank decode_bank(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic("EBK1");
  const std::uint64_t dims_at = r.offset();
  const auto d = r.get<std::uint32_t>("category count");
  const auto c = r.get<std::uint32_t>("channels");
  if (d == 0 || c == 0) {
    throw Error(ErrorCode::kMalformed, "category count and channels must be >= 1", dims_at);
  }
  std::vector<std::string> names;
  std::vector<CategoryKind> kinds;
  std::set<std::string> seen;
  for (std::uint32_t j = 0; j < d; ++j) {
    const std::uint64_t entry_at = r.offset();
    const auto len = r.get<std::uint16_t>("name length");
    if (len == 0) throw Error(ErrorCode::kMalformed, "empty category name", entry_at);
    std::string name = r.text(len, "category name");
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::kDuplicateName, "duplicate category name '" + name + "'", entry_at);
    }
    const std::uint64_t kind_at = r.offset();
    const auto kind = r.get<std::uint8_t>("category kind");
    if (kind > 1) {
      throw Error(ErrorCode::kMalformed, "category kind " + std::to_string(kind) + " not 0 or 1",
                  kind_at);
    }
    names.push_back(std::move(name));
    kinds.push_back(static_cast<CategoryKind>(kind));
  }
  const std::uint64_t count = std::uint64_t{d} * c;
  r.need(count * 4, "embedding payload");
  std::vector<double> emb(count);
  for (auto& v : emb) v = r.finite_f32("embedding value");
  r.finish();
  return EmbeddingBank(std::move(names), std::move(kinds), c, std::move(emb));
}

Bytes encode_annotations(std::span<const EvalRecord> records) {
  Writer w;
  w.magic("ANN1");
  w.put(checked_u32(records.size(), "record count"));
  for (const EvalRecord& rec : records) {
    w.put(static_cast<std::uint8_t>(rec.kind));
    w.put(checked_u32(rec.gt_category, "ground-truth index"));
    if (rec.kind == RecordKind::kBox) {
      w.put(static_cast<float>(rec.box.x0));
      w.put(static_cast<float>(rec.box.y0));
      w.put(static_cast<float>(rec.box.x1));
      w.put(static_cast<float>(rec.box.y1));
    } else {
      w.put(checked_u32(rec.mask.size(), "mask entry count"));
      for (const MaskEntry& e : rec.mask) {
        w.put(e.location);
        w.put(static_cast<float>(e.weight));
      }
    }
  }
  return w.take();
}

std::vector<EvalRecord> decode_annotations(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic("ANN1");
  const auto n = r.get<std::uint32_t>("record count");
  std::vector<EvalRecord> out;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint64_t kind_at = r.offset();
    const auto kind = r.get<std::uint8_t>("record kind");
    if (kind > 2) {
      throw Error(ErrorCode::kMalformed, "record kind " + std::to_string(kind) + " not in 0..2",
                  kind_at);
    }
    EvalRecord rec;
    rec.kind = static_cast<RecordKind>(kind);
    rec.gt_category = r.get<std::uint32_t>("ground-truth index");
    if (rec.kind == RecordKind::kBox) {
      const std::uint64_t box_at = r.offset();
      rec.box.x0 = r.finite_f32("box x0");
      rec.box.y0 = r.finite_f32("box y0");
      rec.box.x1 = r.finite_f32("box x1");
      rec.box.y1 = r.finite_f32("box y1");
      if (!(rec.box.x0 < rec.box.x1) || !(rec.box.y0 < rec.box.y1) || rec.box.x0 < 0.0 ||
          rec.box.y0 < 0.0) {
        throw Error(ErrorCode::kInvalidRegion, "degenerate box", box_at);
      }
    } else {
      const auto count = r.get<std::uint32_t>("mask entry count");
      r.need(std::uint64_t{count} * 8, "mask entries");
      rec.mask.reserve(count);
      for (std::uint32_t e = 0; e < count; ++e) {
        MaskEntry entry;
        entry.location = r.get<std::uint32_t>("mask location");
        const std::uint64_t weight_at = r.offset();
        entry.weight = r.finite_f32("mask weight");
        if (entry.weight < 0.0 || entry.weight > 1.0) {
          throw Error(ErrorCode::kMalformed, "mask weight outside [0,1]", weight_at);
        }
        rec.mask.push_back(entry);
      }
    }
    out.push_back(std::move(rec));
  }
  r.finish();
  return out;
}

Bytes encode_head(const StudentHead& head) {
  Writer w;
  w.magic("HED1");
  w.put(checked_u32(head.channels(), "channels"));
  w.put(static_cast<std::uint32_t>(head.hidden() ? 1u : 0u));
  w.put(static_cast<std::uint64_t>(head.parameters().size()));
  for (double v : head.parameters()) w.put(v);
  return w.take();
}

StudentHead decode_head(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic("HED1");
  const auto c = r.get<std::uint32_t>("channels");
  const std::uint64_t flags_at = r.offset();
  const auto flags = r.get<std::uint32_t>("flags");
  if (flags > 1) throw Error(ErrorCode::kMalformed, "unknown head flags", flags_at);
  const std::uint64_t count_at = r.offset();
  const auto count = r.get<std::uint64_t>("parameter count");
  const bool hidden = (flags & 1u) != 0;
  if (c == 0 || count != StudentHead::parameter_count(c, hidden)) {
    throw Error(ErrorCode::kMalformed, "parameter count does not match architecture", count_at);
  }
  r.need(count * 8, "head parameters");
  std::vector<double> params(count);
  for (auto& v : params) {
    const std::uint64_t at = r.offset();
    v = r.get<double>("head parameter");
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "head parameter is not finite", at);
  }
  r.finish();
  return StudentHead::from_parameters(c, hidden, std::move(params));
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for reading");
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIo, "read failure on '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failure on '" + path.string() + "'");
}

namespace {

template <typename Decode>
auto decode_file(const std::filesystem::path& path, Decode decode) {
  const Bytes bytes = read_file(path);
  try {
    return decode(std::span<const std::uint8_t>(bytes));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what(), e.offset());
  }
}

}  // namespace

FeatureMap read_features(const std::filesystem::path& path) {
  return decode_file(path, decode_features);
}

void write_features(const std::filesystem::path& path, const FeatureMap& map) {
  write_file(path, encode_features(map));
}

EmbeddingBank read_bank(const std::filesystem::path& path) {
  return decode_file(path, decode_bank);
}

void write_bank(const std::filesystem::path& path, const EmbeddingBank& bank) {
  write_file(path, encode_bank(bank));
}

std::vector<EvalRecord> read_annotations(const std::filesystem::path& path) {
  return decode_file(path, decode_annotations);
}

void write_annotations(const std::filesystem::path& path, std::span<const EvalRecord> records) {
  write_file(path, encode_annotations(records));
}

StudentHead read_head(const std::filesystem::path& path) {
  return decode_file(path, decode_head);
}

void write_head(const std::filesystem::path& path, const StudentHead& head) {
  write_file(path, encode_head(head));
}

}  // namespace regionalign::io
