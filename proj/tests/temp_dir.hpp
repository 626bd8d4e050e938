#pragma once

#include <filesystem>
#include <string>

#include "bitexpand/rng.hpp"

/// Scratch directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        bitexpand::Rng rng(reinterpret_cast<std::uintptr_t>(this) ^ ++counter);
        path_ = std::filesystem::temp_directory_path() /
                ("bitexpand_" + tag + "_" + std::to_string(rng.next_u64() % 1000000000));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};
