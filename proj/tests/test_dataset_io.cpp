#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

#include "socs/error.hpp"
#include "socs/scene_synth.hpp"
#include "test_util.hpp"

using namespace socs;
namespace fs = std::filesystem;

namespace {

SequenceRecord small_record(std::uint64_t seed) {
  SceneConfig c;
  c.image_height = 12;
  c.image_width = 20;
  c.frames = 3;
  return render_sequence(generate_scene(c, seed), c);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <typename T>
T read_le(const std::string& b, std::size_t off) {
  T v;
  std::memcpy(&v, b.data() + off, sizeof v);
  return v;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

DatasetManifest manifest_of(const fs::path& dir, std::size_t n) {
  DatasetManifest m;
  m.base_dir = dir;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = "r" + std::to_string(i) + ".socsrec";
    write_record(small_record(i), dir / name);
    m.entries.push_back({name, static_cast<std::int64_t>(i)});
  }
  write_manifest(m, dir / "manifest.txt");
  return read_manifest(dir / "manifest.txt");
}

}  // namespace

TEST_CASE("record round-trip is bitwise lossless") {
  test::TempDir d("rec");
  const SequenceRecord rec = small_record(4);
  write_record(rec, d.path / "a.socsrec");
  const SequenceRecord back = read_record(d.path / "a.socsrec");
  CHECK(back == rec);
  CHECK(std::memcmp(back.frames.data.data(), rec.frames.data.data(), rec.frames.size() * sizeof(float)) == 0);
}

TEST_CASE("container byte layout follows the documented header") {
  test::TempDir d("layout");
  Container c;
  c.put("alpha", Tensor<float>({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6}));
  c.put("b", Tensor<std::int32_t>({1}, std::vector<std::int32_t>{-7}));
  c.write(d.path / "c.bin");
  const std::string b = slurp(d.path / "c.bin");
  REQUIRE(b.size() > 16);
  CHECK(std::memcmp(b.data(), "SOCSARR\0", 8) == 0);
  CHECK(read_le<std::uint32_t>(b, 8) == 1);
  CHECK(read_le<std::uint32_t>(b, 12) == 2);
  std::size_t off = 16;
  CHECK(read_le<std::uint32_t>(b, off) == 5);
  CHECK(b.substr(off + 4, 5) == "alpha");
  off += 9;
  CHECK(static_cast<int>(b[off]) == 1);      // f32
  CHECK(static_cast<int>(b[off + 1]) == 2);  // rank
  CHECK(read_le<std::uint16_t>(b, off + 2) == 0);
  CHECK(read_le<std::int64_t>(b, off + 4) == 2);
  CHECK(read_le<std::int64_t>(b, off + 12) == 3);
  const auto payload = read_le<std::uint64_t>(b, off + 20);
  CHECK(read_le<std::uint64_t>(b, off + 28) == 24);
  CHECK(payload % 8 == 0);
  CHECK(read_le<float>(b, payload + 20) == 6.0f);
}

TEST_CASE("corrupt files give explicit format errors") {
  test::TempDir d("corrupt");
  const fs::path p = d.path / "r.socsrec";
  write_record(small_record(1), p);
  const std::string good = slurp(p);

  std::string bad = good;
  bad[0] = 'X';
  spit(p, bad);
  CHECK_THROWS_AS(read_record(p), FormatError);
  CHECK(error_of([&] { read_record(p); }).find("magic") != std::string::npos);

  bad = good;
  bad[8] = 2;
  spit(p, bad);
  const std::string msg = error_of([&] { read_record(p); });
  CHECK(msg.find("unsupported version 2") != std::string::npos);
  CHECK(msg.find("version 1") != std::string::npos);

  spit(p, good.substr(0, good.size() / 2));
  CHECK(error_of([&] { read_record(p); }).find("unexpected end of file") != std::string::npos);
  spit(p, good.substr(0, 30));
  CHECK_THROWS_AS(read_record(p), FormatError);
}

TEST_CASE("invalid records are rejected before writing") {
  test::TempDir d("invalid");
  const fs::path p = d.path / "r.socsrec";

  SequenceRecord rec = small_record(2);
  rec.instance_masks.data[5] = -1;
  CHECK(error_of([&] { write_record(rec, p); }).find("instance_masks") != std::string::npos);
  CHECK_FALSE(fs::exists(p));

  rec = small_record(2);
  rec.timestamps.data[2] = rec.timestamps.data[1];
  CHECK(error_of([&] { validate_record(rec); }).find("timestamps") != std::string::npos);

  rec = small_record(2);
  rec.extrinsics.data[0] *= 2.0;
  CHECK(error_of([&] { validate_record(rec); }).find("extrinsics") != std::string::npos);

  rec = small_record(2);
  rec.frames.data[0] = 1.5f;
  CHECK(error_of([&] { validate_record(rec); }).find("frames") != std::string::npos);

  rec = small_record(2);
  rec.instance_masks.shape[2] += 1;
  CHECK_THROWS_AS(validate_record(rec), ValidationError);

  rec = small_record(2);
  rec.waypoints.shape = {static_cast<int>(rec.waypoints.size())};
  CHECK(error_of([&] { validate_record(rec); }).find("waypoints") != std::string::npos);
}

TEST_CASE("reading re-checks invariants") {
  test::TempDir d("recheck");
  const fs::path p = d.path / "r.socsrec";
  write_record(small_record(3), p);
  Container c = Container::read(p);
  Tensor<std::int32_t> masks = c.get<std::int32_t>("instance_masks");
  masks.data[0] = -4;
  c.put("instance_masks", masks);
  c.write(p);
  CHECK_THROWS_AS(read_record(p), ValidationError);
  CHECK(error_of([&] { read_record(p); }).find("instance_masks") != std::string::npos);
}

TEST_CASE("manifest invariants") {
  test::TempDir d("manifest");
  DatasetManifest m = manifest_of(d.path, 3);
  CHECK(m.entries.size() == 3);
  CHECK(m.split == "train");

  DatasetManifest dup = m;
  dup.entries[1].seed = 0;
  write_manifest(dup, d.path / "dup.txt");
  CHECK_THROWS_AS(read_manifest(d.path / "dup.txt"), ValidationError);

  DatasetManifest missing = m;
  missing.entries[2].path = "nope.socsrec";
  write_manifest(missing, d.path / "missing.txt");
  CHECK(error_of([&] { read_manifest(d.path / "missing.txt"); }).find("nope.socsrec") != std::string::npos);

  CHECK_THROWS_AS(read_manifest(d.path / "r0.socsrec"), Error);
}

TEST_CASE("batch iterator") {
  test::TempDir d("batches");
  const DatasetManifest m = manifest_of(d.path, 10);

  SUBCASE("10 records in batches of 8 give sizes 8 and 2") {
    BatchIterator it(m, 8, 1);
    CHECK(it.batches_per_epoch() == 2);
    CHECK(it.next().size() == 8);
    CHECK(it.next().size() == 2);
    CHECK(it.next().size() == 8);
  }
  SUBCASE("same seed gives the same order, different seed a different order of the same records") {
    const auto a = BatchIterator(m, 4, 5).epoch_batches(0);
    const auto b = BatchIterator(m, 4, 5).epoch_batches(0);
    const auto c = BatchIterator(m, 4, 6).epoch_batches(0);
    CHECK(a == b);
    CHECK(a != c);
    auto flat = [](const std::vector<std::vector<std::size_t>>& bs) {
      std::vector<std::size_t> out;
      for (const auto& x : bs) out.insert(out.end(), x.begin(), x.end());
      std::sort(out.begin(), out.end());
      return out;
    };
    CHECK(flat(a) == flat(c));
    CHECK(BatchIterator(m, 4, 5).epoch_batches(1) != a);
  }
  SUBCASE("iterators are independent and seekable") {
    BatchIterator a(m, 3, 2), b(m, 3, 2);
    const auto first = a.next();
    a.next();
    const auto other = b.next();
    REQUIRE(first.size() == other.size());
    for (std::size_t i = 0; i < first.size(); ++i) CHECK(*first[i] == *other[i]);
    BatchIterator c(m, 3, 2);
    c.seek(1);
    BatchIterator e(m, 3, 2);
    e.next();
    const auto x = c.next();
    const auto y = e.next();
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i]->seed == y[i]->seed);
  }
  SUBCASE("configuration errors") {
    CHECK_THROWS_AS(BatchIterator(m, 0, 0), ConfigError);
    CHECK_THROWS_AS(BatchIterator(DatasetManifest{}, 4, 0), ConfigError);
  }
}
