#pragma once

#include "farms/synth.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

namespace farms::testing {

/// Fresh empty directory under the system temp dir, removed on scope exit.
class scratch_dir {
public:
    explicit scratch_dir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("farms_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~scratch_dir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    scratch_dir(const scratch_dir&) = delete;
    scratch_dir& operator=(const scratch_dir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

inline Eigen::MatrixXd gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    return gen_gaussian({rows, cols, variance_mode::unit, seed});
}

inline std::vector<double> row_major(const Eigen::MatrixXd& m) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
    }
    return out;
}

} // namespace farms::testing
