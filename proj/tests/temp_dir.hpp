#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

/// Scratch directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string &name = "t") {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("stormcast_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;
};
