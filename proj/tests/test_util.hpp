#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "socs/rng.hpp"

namespace socs::test {

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("socs_" + tag + "_" + std::to_string(mix64(reinterpret_cast<std::uintptr_t>(this) ^ std::rand())));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace socs::test
