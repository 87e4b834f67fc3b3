#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "socs/tensor.hpp"

namespace socs {

// ---------------------------------------------------------------------------
// Container format
//
// Little-endian throughout.
//   magic        8 bytes  "SOCSARR\0"
//   version      u32      kContainerVersion
//   field_count  u32
//   per field:
//     name_len   u32, name bytes (UTF-8, no terminator)
//     dtype      u8  (DType)
//     rank       u8
//     reserved   u16 (zero)
//     dims       i64 x rank
//     offset     u64  absolute byte offset of the payload
//     nbytes     u64
//   payloads, each starting on an 8-byte boundary, in field order.
// ---------------------------------------------------------------------------

inline constexpr char kContainerMagic[8] = {'S', 'O', 'C', 'S', 'A', 'R', 'R', '\0'};
inline constexpr std::uint32_t kContainerVersion = 1;

enum class DType : std::uint8_t { f32 = 1, f64 = 2, i32 = 3, i64 = 4, u64 = 5, u8 = 6 };

std::size_t dtype_size(DType t);
const char* dtype_name(DType t);

/// Named arrays in insertion order; the unit of storage for records and
/// checkpoints.
class Container {
 public:
  using Array = std::variant<Tensor<float>, Tensor<double>, Tensor<std::int32_t>, Tensor<std::int64_t>,
                             Tensor<std::uint64_t>, Tensor<std::uint8_t>>;

  template <typename T>
  void put(const std::string& name, Tensor<T> array) {
    if (!arrays_.count(name)) order_.push_back(name);
    arrays_[name] = std::move(array);
  }
  void put_text(const std::string& name, const std::string& text);

  bool has(const std::string& name) const { return arrays_.count(name) != 0; }
  const std::vector<std::string>& names() const { return order_; }

  /// Throws FormatError if absent or stored with a different dtype.
  template <typename T>
  const Tensor<T>& get(const std::string& name) const {
    const auto it = arrays_.find(name);
    if (it == arrays_.end()) missing(name);
    const auto* t = std::get_if<Tensor<T>>(&it->second);
    if (t == nullptr) wrong_type(name);
    return *t;
  }
  std::string get_text(const std::string& name) const;

  void write(const std::filesystem::path& path) const;
  static Container read(const std::filesystem::path& path);

 private:
  [[noreturn]] static void missing(const std::string& name);
  [[noreturn]] static void wrong_type(const std::string& name);

  std::vector<std::string> order_;
  std::map<std::string, Array> arrays_;
};

// ---------------------------------------------------------------------------
// Sequence records
// ---------------------------------------------------------------------------

struct SequenceRecord {
  Tensor<float> frames;                 // [V, F, H, W, 3] in [0, 1]
  Tensor<double> extrinsics;            // [V, F, 4, 4] camera-to-world
  Tensor<double> intrinsics;            // [V, 3, 3]
  Tensor<double> timestamps;            // [F] seconds, strictly increasing
  Tensor<std::int32_t> instance_masks;  // [V, F, H, W], 0 = background
  Tensor<double> waypoints;             // [W_n, 2] meters, ego frame
  std::int64_t seed = 0;
  std::uint64_t config_hash = 0;

  int num_views() const { return frames.dim(0); }
  int num_frames() const { return frames.dim(1); }
  int height() const { return frames.dim(2); }
  int width() const { return frames.dim(3); }
  std::size_t pixels_per_image() const { return static_cast<std::size_t>(height()) * width(); }

  friend bool operator==(const SequenceRecord&, const SequenceRecord&) = default;
};

/// Checks every record invariant; throws ValidationError naming the field.
void validate_record(const SequenceRecord& record);

/// Validates, then writes. Nothing is written if validation fails.
void write_record(const SequenceRecord& record, const std::filesystem::path& path);
SequenceRecord read_record(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::filesystem::path path;  // absolute, or relative to the manifest directory
  std::int64_t seed = 0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::uint64_t config_hash = 0;
  std::string split = "train";
  std::filesystem::path base_dir;  // directory the manifest was loaded from

  std::filesystem::path resolve(std::size_t i) const;
};

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
/// Loads and checks invariants: every path exists and seeds are unique.
DatasetManifest read_manifest(const std::filesystem::path& path);
/// Hash over the manifest's canonical text (paths, seeds, config hash, split).
std::uint64_t manifest_hash(const DatasetManifest& manifest);

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

/// Deterministic epoch-shuffled batches over a manifest. Each epoch is a fresh
/// permutation keyed on (shuffle_seed, epoch); the final short batch of an
/// epoch is emitted. Records are loaded lazily and cached per iterator.
class BatchIterator {
 public:
  BatchIterator(DatasetManifest manifest, std::size_t batch_size, std::uint64_t shuffle_seed);

  std::size_t batches_per_epoch() const;
  /// Manifest indices of every batch in `epoch`.
  std::vector<std::vector<std::size_t>> epoch_batches(std::uint64_t epoch) const;

  /// Next batch; crosses epoch boundaries indefinitely.
  std::vector<std::shared_ptr<const SequenceRecord>> next();
  /// Positions the iterator so that next() returns the batch with this
  /// zero-based global index.
  void seek(std::uint64_t batch_index);
  std::uint64_t position() const { return position_; }

  std::shared_ptr<const SequenceRecord> load(std::size_t manifest_index);
  const DatasetManifest& manifest() const { return manifest_; }

 private:
  DatasetManifest manifest_;
  std::size_t batch_size_;
  std::uint64_t shuffle_seed_;
  std::uint64_t position_ = 0;
  std::map<std::size_t, std::shared_ptr<const SequenceRecord>> cache_;
};

}  // namespace socs
