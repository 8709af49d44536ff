#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "pbci/error.hpp"

namespace testutil {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    const auto id = counter.fetch_add(1);
    path_ = std::filesystem::temp_directory_path() /
            ("pbci_test_" + std::to_string(::getpid()) + "_" + std::to_string(id));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(out.good());
  out << text;
}

template <typename Fn>
void expect_error(pbci::errc expected, Fn&& fn) {
  try {
    fn();
  } catch (const pbci::Error& e) {
    CHECK_MESSAGE(e.code() == expected,
                  "expected " << std::string(pbci::errc_name(expected)) << ", got "
                              << std::string(pbci::errc_name(e.code())) << ": "
                              << std::string(e.what()));
    return;
  } catch (const std::exception& e) {
    FAIL("wrong exception type: " << e.what());
    return;
  }
  FAIL_CHECK("no exception thrown, expected " << pbci::errc_name(expected));
}

}  // namespace testutil
