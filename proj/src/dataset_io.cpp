#include "socs/dataset_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <cstdio>

#include <Eigen/Dense>

#include "socs/config_file.hpp"
#include "socs/error.hpp"
#include "socs/rng.hpp"

namespace socs {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

template <typename T>
constexpr DType dtype_of();
template <> constexpr DType dtype_of<float>() { return DType::f32; }
template <> constexpr DType dtype_of<double>() { return DType::f64; }
template <> constexpr DType dtype_of<std::int32_t>() { return DType::i32; }
template <> constexpr DType dtype_of<std::int64_t>() { return DType::i64; }
template <> constexpr DType dtype_of<std::uint64_t>() { return DType::u64; }
template <> constexpr DType dtype_of<std::uint8_t>() { return DType::u8; }

template <typename T>
void append_pod(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

std::uint64_t align8(std::uint64_t v) { return (v + 7) & ~std::uint64_t{7}; }

class Reader {
 public:
  Reader(const std::string& bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

  template <typename T>
  T pod() {
    T v;
    need(pos_, sizeof(T));
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string text(std::size_t n) {
    need(pos_, n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void need(std::uint64_t offset, std::uint64_t n) const {
    if (offset > bytes_.size() || n > bytes_.size() - offset) {
      throw FormatError(path_ + ": unexpected end of file (need " + std::to_string(n) + " bytes at offset " +
                        std::to_string(offset) + ", file has " + std::to_string(bytes_.size()) + ")");
    }
  }
  const char* at(std::uint64_t offset) const { return bytes_.data() + offset; }
  const std::string& path() const { return path_; }

 private:
  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

struct FieldHeader {
  std::string name;
  DType dtype{};
  std::vector<int> dims;
  std::uint64_t offset = 0;
  std::uint64_t nbytes = 0;
};

template <typename T>
Container::Array decode_array(const FieldHeader& h, const Reader& r) {
  Tensor<T> t(h.dims);
  if (t.size() * sizeof(T) != h.nbytes) {
    throw FormatError(r.path() + ": field '" + h.name + "' byte count " + std::to_string(h.nbytes) +
                      " does not match shape " + shape_string(h.dims));
  }
  r.need(h.offset, h.nbytes);
  if (h.nbytes) std::memcpy(t.data.data(), r.at(h.offset), h.nbytes);
  return t;
}

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw ValidationError(field + ": " + what);
}

void expect_shape(const std::string& field, const std::vector<int>& got, const std::vector<int>& want) {
  if (got != want) invalid(field, "shape " + shape_string(got) + ", expected " + shape_string(want));
}

template <typename T>
void expect_finite(const std::string& field, const Tensor<T>& t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(static_cast<double>(t.data[i]))) invalid(field, "non-finite value at index " + std::to_string(i));
  }
}

}  // namespace

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::i32: return 4;
    case DType::i64: return 8;
    case DType::u64: return 8;
    case DType::u8: return 1;
  }
  return 0;
}

const char* dtype_name(DType t) {
  switch (t) {
    case DType::f32: return "f32";
    case DType::f64: return "f64";
    case DType::i32: return "i32";
    case DType::i64: return "i64";
    case DType::u64: return "u64";
    case DType::u8: return "u8";
  }
  return "?";
}

void Container::put_text(const std::string& name, const std::string& text) {
  put(name, Tensor<std::uint8_t>({static_cast<int>(text.size())}, std::vector<std::uint8_t>(text.begin(), text.end())));
}

std::string Container::get_text(const std::string& name) const {
  const auto& t = get<std::uint8_t>(name);
  return std::string(t.data.begin(), t.data.end());
}

void Container::missing(const std::string& name) { throw FormatError("container has no field '" + name + "'"); }

void Container::wrong_type(const std::string& name) {
  throw FormatError("container field '" + name + "' has an unexpected dtype");
}

void Container::write(const std::filesystem::path& path) const {
  struct Blob {
    DType dtype;
    const std::vector<int>* shape;
    const char* data;
    std::uint64_t nbytes;
  };
  std::vector<Blob> blobs;
  for (const auto& name : order_) {
    blobs.push_back(std::visit(
        [](const auto& t) {
          using T = typename std::decay_t<decltype(t.data)>::value_type;
          return Blob{dtype_of<T>(), &t.shape, reinterpret_cast<const char*>(t.data.data()),
                      static_cast<std::uint64_t>(t.data.size() * sizeof(T))};
        },
        arrays_.at(name)));
  }

  std::uint64_t header_size = sizeof kContainerMagic + 8;
  for (std::size_t i = 0; i < order_.size(); ++i) {
    header_size += 4 + order_[i].size() + 4 + 8 * blobs[i].shape->size() + 16;
  }

  std::string out;
  out.append(kContainerMagic, sizeof kContainerMagic);
  append_pod(out, kContainerVersion);
  append_pod(out, static_cast<std::uint32_t>(order_.size()));
  std::uint64_t offset = align8(header_size);
  std::vector<std::uint64_t> offsets;
  for (std::size_t i = 0; i < order_.size(); ++i) {
    const Blob& b = blobs[i];
    append_pod(out, static_cast<std::uint32_t>(order_[i].size()));
    out += order_[i];
    append_pod(out, static_cast<std::uint8_t>(b.dtype));
    append_pod(out, static_cast<std::uint8_t>(b.shape->size()));
    append_pod(out, std::uint16_t{0});
    for (int d : *b.shape) append_pod(out, static_cast<std::int64_t>(d));
    append_pod(out, offset);
    append_pod(out, b.nbytes);
    offsets.push_back(offset);
    offset = align8(offset + b.nbytes);
  }
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    out.resize(offsets[i], '\0');
    out.append(blobs[i].data, blobs[i].nbytes);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

Container Container::read(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  const std::string bytes = buf.str();
  Reader r(bytes, path.string());

  if (bytes.size() < sizeof kContainerMagic || std::memcmp(bytes.data(), kContainerMagic, sizeof kContainerMagic) != 0) {
    if (bytes.size() < sizeof kContainerMagic) r.need(0, sizeof kContainerMagic);
    throw FormatError(path.string() + ": not a SOCS container (bad magic bytes)");
  }
  r.text(sizeof kContainerMagic);
  const auto version = r.pod<std::uint32_t>();
  if (version != kContainerVersion) {
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version) + " (reader supports version " +
                      std::to_string(kContainerVersion) + ")");
  }
  const auto count = r.pod<std::uint32_t>();
  std::vector<FieldHeader> headers;
  for (std::uint32_t i = 0; i < count; ++i) {
    FieldHeader h;
    const auto len = r.pod<std::uint32_t>();
    h.name = r.text(len);
    const auto code = r.pod<std::uint8_t>();
    if (code < 1 || code > 6) {
      throw FormatError(path.string() + ": field '" + h.name + "' has unknown dtype code " + std::to_string(code));
    }
    h.dtype = static_cast<DType>(code);
    const auto rank = r.pod<std::uint8_t>();
    r.pod<std::uint16_t>();
    for (int d = 0; d < rank; ++d) {
      const auto dim = r.pod<std::int64_t>();
      if (dim < 0 || dim > (std::int64_t{1} << 31)) {
        throw FormatError(path.string() + ": field '" + h.name + "' has invalid dimension " + std::to_string(dim));
      }
      h.dims.push_back(static_cast<int>(dim));
    }
    h.offset = r.pod<std::uint64_t>();
    h.nbytes = r.pod<std::uint64_t>();
    headers.push_back(std::move(h));
  }

  Container c;
  for (const auto& h : headers) {
    Array a;
    switch (h.dtype) {
      case DType::f32: a = decode_array<float>(h, r); break;
      case DType::f64: a = decode_array<double>(h, r); break;
      case DType::i32: a = decode_array<std::int32_t>(h, r); break;
      case DType::i64: a = decode_array<std::int64_t>(h, r); break;
      case DType::u64: a = decode_array<std::uint64_t>(h, r); break;
      case DType::u8: a = decode_array<std::uint8_t>(h, r); break;
    }
    if (!c.arrays_.count(h.name)) c.order_.push_back(h.name);
    c.arrays_[h.name] = std::move(a);
  }
  return c;
}

// ---------------------------------------------------------------------------

void validate_record(const SequenceRecord& rec) {
  if (rec.frames.rank() != 5 || rec.frames.dim(4) != 3) {
    invalid("frames", "shape " + shape_string(rec.frames.shape) + ", expected [V, F, H, W, 3]");
  }
  const int V = rec.frames.dim(0), F = rec.frames.dim(1), H = rec.frames.dim(2), W = rec.frames.dim(3);
  if (V < 1 || F < 1 || H < 1 || W < 1) invalid("frames", "empty dimension in " + shape_string(rec.frames.shape));
  for (std::size_t i = 0; i < rec.frames.size(); ++i) {
    const float v = rec.frames.data[i];
    if (!(v >= 0.0f && v <= 1.0f)) invalid("frames", "value outside [0, 1] at index " + std::to_string(i));
  }

  expect_shape("extrinsics", rec.extrinsics.shape, {V, F, 4, 4});
  expect_finite("extrinsics", rec.extrinsics);
  for (int i = 0; i < V * F; ++i) {
    Eigen::Matrix4d m = Eigen::Map<const Eigen::Matrix<double, 4, 4, Eigen::RowMajor>>(rec.extrinsics.data.data() + 16 * i);
    const Eigen::Matrix3d rot = m.topLeftCorner<3, 3>();
    const double ortho = (rot.transpose() * rot - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    const bool bottom = m(3, 0) == 0.0 && m(3, 1) == 0.0 && m(3, 2) == 0.0 && m(3, 3) == 1.0;
    if (ortho > 1e-6 || std::abs(rot.determinant() - 1.0) > 1e-6 || !bottom) {
      invalid("extrinsics", "matrix " + std::to_string(i) + " is not a rigid transform");
    }
  }

  expect_shape("intrinsics", rec.intrinsics.shape, {V, 3, 3});
  expect_finite("intrinsics", rec.intrinsics);

  expect_shape("timestamps", rec.timestamps.shape, {F});
  expect_finite("timestamps", rec.timestamps);
  for (int f = 1; f < F; ++f) {
    if (!(rec.timestamps.data[static_cast<std::size_t>(f)] > rec.timestamps.data[static_cast<std::size_t>(f - 1)])) {
      invalid("timestamps", "not strictly increasing at index " + std::to_string(f));
    }
  }

  expect_shape("instance_masks", rec.instance_masks.shape, {V, F, H, W});
  for (std::size_t i = 0; i < rec.instance_masks.size(); ++i) {
    if (rec.instance_masks.data[i] < 0) {
      invalid("instance_masks", "negative instance id " + std::to_string(rec.instance_masks.data[i]) + " at index " +
                                    std::to_string(i));
    }
  }

  if (rec.waypoints.rank() != 2 || rec.waypoints.dim(1) != 2 || rec.waypoints.dim(0) < 1) {
    invalid("waypoints", "shape " + shape_string(rec.waypoints.shape) + ", expected [W_n, 2] with W_n >= 1");
  }
  expect_finite("waypoints", rec.waypoints);
}

void write_record(const SequenceRecord& record, const std::filesystem::path& path) {
  validate_record(record);
  Container c;
  c.put("frames", record.frames);
  c.put("extrinsics", record.extrinsics);
  c.put("intrinsics", record.intrinsics);
  c.put("timestamps", record.timestamps);
  c.put("instance_masks", record.instance_masks);
  c.put("waypoints", record.waypoints);
  c.put("meta.seed", Tensor<std::int64_t>({1}, std::vector<std::int64_t>{record.seed}));
  c.put("meta.config_hash", Tensor<std::uint64_t>({1}, std::vector<std::uint64_t>{record.config_hash}));
  c.write(path);
}

SequenceRecord read_record(const std::filesystem::path& path) {
  const Container c = Container::read(path);
  SequenceRecord rec;
  rec.frames = c.get<float>("frames");
  rec.extrinsics = c.get<double>("extrinsics");
  rec.intrinsics = c.get<double>("intrinsics");
  rec.timestamps = c.get<double>("timestamps");
  rec.instance_masks = c.get<std::int32_t>("instance_masks");
  rec.waypoints = c.get<double>("waypoints");
  const auto& seed = c.get<std::int64_t>("meta.seed");
  const auto& hash = c.get<std::uint64_t>("meta.config_hash");
  if (seed.size() != 1 || hash.size() != 1) throw FormatError(path.string() + ": malformed meta fields");
  rec.seed = seed[0];
  rec.config_hash = hash[0];
  try {
    validate_record(rec);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return rec;
}

// ---------------------------------------------------------------------------

std::filesystem::path DatasetManifest::resolve(std::size_t i) const {
  const auto& p = entries.at(i).path;
  return p.is_absolute() ? p : base_dir / p;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string manifest_text(const DatasetManifest& m) {
  KeyValueConfig kv;
  kv.set("format", "socs-manifest-1");
  kv.set("config_hash", hex64(m.config_hash));
  kv.set("split", m.split);
  kv.set("count", std::to_string(m.entries.size()));
  std::string out = kv.to_text();
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    out += "record." + std::to_string(i) + " = " + m.entries[i].path.generic_string() + "\n";
    out += "seed." + std::to_string(i) + " = " + std::to_string(m.entries[i].seed) + "\n";
  }
  return out;
}

}  // namespace

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << manifest_text(manifest);
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  const KeyValueConfig kv = KeyValueConfig::load(path);
  if (kv.get_string("format", "") != "socs-manifest-1") {
    throw FormatError(path.string() + ": not a SOCS dataset manifest");
  }
  DatasetManifest m;
  m.base_dir = path.parent_path();
  m.split = kv.get_string("split");
  m.config_hash = std::stoull(kv.get_string("config_hash"), nullptr, 16);
  const long long count = kv.get_int("count");
  std::set<std::int64_t> seeds;
  for (long long i = 0; i < count; ++i) {
    const std::string idx = std::to_string(i);
    ManifestEntry e{kv.get_string("record." + idx), kv.get_int("seed." + idx)};
    if (!seeds.insert(e.seed).second) {
      throw ValidationError(path.string() + ": duplicate seed " + std::to_string(e.seed) + " in split '" + m.split + "'");
    }
    m.entries.push_back(std::move(e));
    if (!std::filesystem::exists(m.resolve(m.entries.size() - 1))) {
      throw IoError(path.string() + ": record '" + m.resolve(m.entries.size() - 1).string() + "' does not exist");
    }
  }
  return m;
}

std::uint64_t manifest_hash(const DatasetManifest& manifest) { return fnv1a64(manifest_text(manifest)); }

// ---------------------------------------------------------------------------

BatchIterator::BatchIterator(DatasetManifest manifest, std::size_t batch_size, std::uint64_t shuffle_seed)
    : manifest_(std::move(manifest)), batch_size_(batch_size), shuffle_seed_(shuffle_seed) {
  if (batch_size_ == 0) throw ConfigError("batch_size must be positive");
  if (manifest_.entries.empty()) throw ConfigError("cannot iterate an empty manifest");
}

std::size_t BatchIterator::batches_per_epoch() const {
  return (manifest_.entries.size() + batch_size_ - 1) / batch_size_;
}

std::vector<std::vector<std::size_t>> BatchIterator::epoch_batches(std::uint64_t epoch) const {
  CounterRng rng(shuffle_seed_, epoch, "batch_shuffle");
  const auto order = random_permutation(manifest_.entries.size(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size_) {
    const std::size_t end = std::min(order.size(), i + batch_size_);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

std::vector<std::shared_ptr<const SequenceRecord>> BatchIterator::next() {
  const std::size_t per_epoch = batches_per_epoch();
  const auto batches = epoch_batches(position_ / per_epoch);
  const auto& indices = batches[position_ % per_epoch];
  ++position_;
  std::vector<std::shared_ptr<const SequenceRecord>> out;
  for (std::size_t i : indices) out.push_back(load(i));
  return out;
}

void BatchIterator::seek(std::uint64_t batch_index) { position_ = batch_index; }

std::shared_ptr<const SequenceRecord> BatchIterator::load(std::size_t manifest_index) {
  auto it = cache_.find(manifest_index);
  if (it != cache_.end()) return it->second;
  auto rec = std::make_shared<const SequenceRecord>(read_record(manifest_.resolve(manifest_index)));
  cache_[manifest_index] = rec;
  return rec;
}

}  // namespace socs
