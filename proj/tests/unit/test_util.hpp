#pragma once

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "bci/error.hpp"

#define EXPECT_BCI_ERROR(stmt, expected_kind)                                            \
    do {                                                                                 \
        try {                                                                            \
            stmt;                                                                        \
            ADD_FAILURE() << "expected " << bci::to_string(expected_kind) << ", got none"; \
        } catch (const bci::Error& e_) {                                                 \
            EXPECT_EQ(e_.kind(), expected_kind) << e_.what();                            \
        }                                                                                \
    } while (0)

// Fresh directory under the build tree, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("bci_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};
